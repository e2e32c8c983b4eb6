import { Table } from "./csv";
import { EmptySelectionError, FigureSpec, SchemaError } from "./figspec";

export type Shape =
  | {
      type: "rect";
      x: number;
      y: number;
      w: number;
      h: number;
      fill: string;
      cls?: string;
      dataX?: string;
      dataY?: string;
    }
  | { type: "line"; x1: number; y1: number; x2: number; y2: number; stroke: string; width: number }
  | { type: "polyline"; points: [number, number][]; stroke: string; width: number; cls?: string }
  | {
      type: "circle";
      cx: number;
      cy: number;
      r: number;
      fill: string;
      cls?: string;
      dataX?: string;
      dataY?: string;
    }
  | {
      type: "text";
      x: number;
      y: number;
      text: string;
      size: number;
      anchor: "start" | "middle" | "end";
      fill: string;
    };

export interface Display {
  width: number;
  height: number;
  shapes: Shape[];
}

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#ff7f0e",
  "#9467bd",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];

const W = 640;
const H = 420;
const MARGIN = { left: 78, right: 24, top: 46, bottom: 58 };

interface Point {
  row: Record<string, string>;
  xCell: string;
  yCell: string;
  y: number;
  series: string;
}

function requireColumns(table: Table, spec: FigureSpec): void {
  const needed = [spec.x, spec.y, ...spec.series, ...Object.keys(spec.filter)];
  for (const col of needed) {
    if (!table.columns.includes(col)) {
      throw new SchemaError(
        `column '${col}' not in CSV header (${table.columns.join(",")})`
      );
    }
  }
}

function select(table: Table, spec: FigureSpec): Point[] {
  requireColumns(table, spec);
  const points: Point[] = [];
  for (const row of table.rows) {
    let keep = true;
    for (const [col, want] of Object.entries(spec.filter)) {
      if ((row[col] ?? "") !== want) {
        keep = false;
        break;
      }
    }
    if (!keep) continue;
    const yCell = row[spec.y] ?? "";
    const y = Number(yCell);
    if (yCell === "" || !Number.isFinite(y)) {
      throw new SchemaError(
        `row with ${spec.x}='${row[spec.x]}' has no numeric '${spec.y}' value: '${yCell}'`
      );
    }
    points.push({
      row,
      xCell: row[spec.x] ?? "",
      yCell,
      y,
      series: spec.series.length
        ? spec.series.map((k) => row[k]).join(", ")
        : "all",
    });
  }
  if (points.length === 0) {
    throw new EmptySelectionError(
      `no rows match filter ${JSON.stringify(spec.filter)}`
    );
  }
  return points;
}

function uniqueInOrder(values: string[]): string[] {
  const seen = new Set<string>();
  const out: string[] = [];
  for (const v of values) {
    if (!seen.has(v)) {
      seen.add(v);
      out.push(v);
    }
  }
  return out;
}

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const abs = Math.abs(v);
  if (abs >= 1e4 || abs < 1e-3) return v.toExponential(1);
  return String(Number(v.toPrecision(3)));
}

function yTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let i = 0; i <= 4; i++) ticks.push(lo + ((hi - lo) * i) / 4);
  return ticks;
}

function frame(
  shapes: Shape[],
  spec: FigureSpec,
  yLo: number,
  yHi: number,
  yPos: (v: number) => number
): void {
  const x0 = MARGIN.left;
  const x1 = W - MARGIN.right;
  const y0 = H - MARGIN.bottom;
  const y1 = MARGIN.top;
  shapes.push({ type: "line", x1: x0, y1: y0, x2: x1, y2: y0, stroke: "#000000", width: 1 });
  shapes.push({ type: "line", x1: x0, y1: y0, x2: x0, y2: y1, stroke: "#000000", width: 1 });
  for (const t of yTicks(yLo, yHi)) {
    const y = yPos(t);
    shapes.push({ type: "line", x1: x0 - 4, y1: y, x2: x0, y2: y, stroke: "#000000", width: 1 });
    shapes.push({
      type: "line",
      x1: x0,
      y1: y,
      x2: x1,
      y2: y,
      stroke: "#dddddd",
      width: 1,
    });
    shapes.push({
      type: "text",
      x: x0 - 8,
      y: y + 4,
      text: fmtTick(t),
      size: 11,
      anchor: "end",
      fill: "#000000",
    });
  }
  if (spec.title) {
    shapes.push({
      type: "text",
      x: W / 2,
      y: MARGIN.top - 18,
      text: spec.title,
      size: 14,
      anchor: "middle",
      fill: "#000000",
    });
  }
  if (spec.y_label) {
    shapes.push({
      type: "text",
      x: 16,
      y: MARGIN.top - 18,
      text: spec.y_label,
      size: 11,
      anchor: "start",
      fill: "#000000",
    });
  }
  if (spec.x_label) {
    shapes.push({
      type: "text",
      x: (x0 + x1) / 2,
      y: H - 12,
      text: spec.x_label,
      size: 11,
      anchor: "middle",
      fill: "#000000",
    });
  }
}

function legend(shapes: Shape[], seriesList: string[]): void {
  let y = MARGIN.top + 6;
  for (const [i, name] of seriesList.entries()) {
    const x = W - MARGIN.right - 150;
    shapes.push({
      type: "rect",
      x,
      y: y - 8,
      w: 12,
      h: 12,
      fill: PALETTE[i % PALETTE.length],
    });
    shapes.push({
      type: "text",
      x: x + 18,
      y: y + 2,
      text: name,
      size: 11,
      anchor: "start",
      fill: "#000000",
    });
    y += 18;
  }
}

function yRange(points: Point[], includeZero: boolean): [number, number] {
  let lo = Math.min(...points.map((p) => p.y));
  let hi = Math.max(...points.map((p) => p.y));
  if (includeZero) {
    lo = Math.min(lo, 0);
    hi = Math.max(hi, 0);
  }
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const pad = (hi - lo) * 0.06;
  return [includeZero && lo === 0 ? 0 : lo - pad, hi + pad];
}

export function buildChart(table: Table, spec: FigureSpec): Display {
  const points = select(table, spec);
  const seriesList = uniqueInOrder(points.map((p) => p.series));
  const shapes: Shape[] = [];
  const x0 = MARGIN.left;
  const x1 = W - MARGIN.right;
  const y0 = H - MARGIN.bottom;
  const y1 = MARGIN.top;

  if (spec.kind === "bars") {
    const categories = uniqueInOrder(points.map((p) => p.xCell));
    const [lo, hi] = yRange(points, true);
    const yPos = (v: number) => y0 - ((v - lo) / (hi - lo)) * (y0 - y1);
    frame(shapes, spec, lo, hi, yPos);
    const slot = (x1 - x0) / categories.length;
    const barW = Math.min(38, (slot * 0.7) / seriesList.length);
    for (const p of points) {
      const ci = categories.indexOf(p.xCell);
      const si = seriesList.indexOf(p.series);
      const groupW = barW * seriesList.length;
      const bx = x0 + slot * ci + (slot - groupW) / 2 + barW * si;
      const zero = yPos(Math.max(lo, Math.min(0, hi)));
      const py = yPos(p.y);
      shapes.push({
        type: "rect",
        x: bx,
        y: Math.min(py, zero),
        w: barW,
        h: Math.abs(zero - py),
        fill: PALETTE[si % PALETTE.length],
        cls: "mark",
        dataX: p.xCell,
        dataY: p.yCell,
      });
    }
    for (const [ci, cat] of categories.entries()) {
      shapes.push({
        type: "text",
        x: x0 + slot * ci + slot / 2,
        y: y0 + 16,
        text: cat,
        size: 11,
        anchor: "middle",
        fill: "#000000",
      });
    }
  } else {
    const xs = points.map((p) => {
      const v = Number(p.xCell);
      if (p.xCell === "" || !Number.isFinite(v)) {
        throw new SchemaError(`curves need numeric '${spec.x}' values, got '${p.xCell}'`);
      }
      if (spec.log_x && v <= 0) {
        throw new SchemaError(`log_x needs positive '${spec.x}' values, got '${p.xCell}'`);
      }
      return v;
    });
    const tx = (v: number) => (spec.log_x ? Math.log10(v) : v);
    let xLo = Math.min(...xs.map(tx));
    let xHi = Math.max(...xs.map(tx));
    if (xLo === xHi) {
      xLo -= 1;
      xHi += 1;
    }
    const [lo, hi] = yRange(points, false);
    const xPos = (v: number) => x0 + ((tx(v) - xLo) / (xHi - xLo)) * (x1 - x0);
    const yPos = (v: number) => y0 - ((v - lo) / (hi - lo)) * (y0 - y1);
    frame(shapes, spec, lo, hi, yPos);
    const xTickVals = uniqueInOrder(points.map((p) => p.xCell))
      .map(Number)
      .sort((a, b) => a - b);
    const shown = xTickVals.length <= 8 ? xTickVals : [xTickVals[0], xTickVals[Math.floor(xTickVals.length / 2)], xTickVals[xTickVals.length - 1]];
    for (const v of shown) {
      shapes.push({
        type: "line",
        x1: xPos(v),
        y1: y0,
        x2: xPos(v),
        y2: y0 + 4,
        stroke: "#000000",
        width: 1,
      });
      shapes.push({
        type: "text",
        x: xPos(v),
        y: y0 + 16,
        text: fmtTick(v),
        size: 11,
        anchor: "middle",
        fill: "#000000",
      });
    }
    for (const [si, name] of seriesList.entries()) {
      const member = points
        .map((p, i) => ({ p, x: xs[i] }))
        .filter(({ p }) => p.series === name)
        .sort((a, b) => a.x - b.x);
      const color = PALETTE[si % PALETTE.length];
      if (member.length > 1) {
        shapes.push({
          type: "polyline",
          points: member.map(({ p, x }) => [xPos(x), yPos(p.y)] as [number, number]),
          stroke: color,
          width: 2,
          cls: "series",
        });
      }
      for (const { p, x } of member) {
        shapes.push({
          type: "circle",
          cx: xPos(x),
          cy: yPos(p.y),
          r: 4,
          fill: color,
          cls: "mark",
          dataX: p.xCell,
          dataY: p.yCell,
        });
      }
    }
  }
  legend(shapes, seriesList);
  return { width: W, height: H, shapes };
}
