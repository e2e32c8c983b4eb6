import { readFileSync, writeFileSync } from "node:fs";
import { dirname, isAbsolute, join } from "node:path";
import { buildChart } from "./chart";
import { readCsvs } from "./csv";
import { FigureSpec, parseSpec } from "./figspec";
import { toPng } from "./raster";
import { toSvg } from "./svg";

export interface RenderResult {
  svgPath: string;
  pngPath: string;
  svg: string;
  png: Buffer;
  markCount: number;
}

function stripExt(path: string): string {
  return path.replace(/\.(svg|png)$/i, "");
}

/** Render a figure spec object; CSV and output paths resolve against baseDir. */
export function renderFigure(spec: FigureSpec, baseDir = "."): RenderResult {
  const resolve = (p: string) => (isAbsolute(p) ? p : join(baseDir, p));
  const table = readCsvs(spec.csv.map(resolve));
  const display = buildChart(table, spec);
  const svg = toSvg(display);
  const png = toPng(display);
  const base = stripExt(resolve(spec.out));
  const svgPath = `${base}.svg`;
  const pngPath = `${base}.png`;
  writeFileSync(svgPath, svg, "utf-8");
  writeFileSync(pngPath, png);
  const markCount = display.shapes.filter(
    (s) => (s.type === "rect" || s.type === "circle") && s.cls === "mark"
  ).length;
  return { svgPath, pngPath, svg, png, markCount };
}

/** Render from a spec file; relative paths inside resolve against its directory. */
export function renderSpecFile(specPath: string): RenderResult {
  const raw = JSON.parse(readFileSync(specPath, "utf-8"));
  const spec = parseSpec(raw);
  return renderFigure(spec, dirname(specPath));
}
