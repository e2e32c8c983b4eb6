import { z } from "zod";

/** Declarative description of one figure: which CSV cells to plot and how. */
export const FigureSpecSchema = z.object({
  /** Input CSV paths, concatenated in order (shared header). */
  csv: z.array(z.string()).min(1),
  kind: z.enum(["bars", "curves"]),
  /** Column plotted on the x axis (categorical for bars, numeric for curves). */
  x: z.string().min(1),
  /** Column plotted on the y axis; every selected cell becomes one mark. */
  y: z.string().min(1),
  /** Grouping keys: one series per distinct combination. */
  series: z.array(z.string()).default([]),
  /** Exact-match row filter selecting the plotted group. */
  filter: z.record(z.string(), z.string()).default({}),
  /** Output path; ".svg" and ".png" siblings are written. */
  out: z.string().min(1),
  title: z.string().default(""),
  x_label: z.string().default(""),
  y_label: z.string().default(""),
  log_x: z.boolean().default(false),
});

export type FigureSpec = z.infer<typeof FigureSpecSchema>;

export class SpecError extends Error {}
export class SchemaError extends Error {}
export class EmptySelectionError extends Error {}

export function parseSpec(raw: unknown): FigureSpec {
  const result = FigureSpecSchema.safeParse(raw);
  if (!result.success) {
    throw new SpecError(`invalid figure spec: ${result.error.issues
      .map((i) => `${i.path.join(".")}: ${i.message}`)
      .join("; ")}`);
  }
  return result.data;
}
