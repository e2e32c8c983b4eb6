import { Display, Shape } from "./chart";

const fmt = (n: number): string => {
  const r = Math.round(n * 100) / 100;
  return Object.is(r, -0) ? "0" : String(r);
};

const esc = (s: string): string =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");

function shapeToSvg(s: Shape): string {
  switch (s.type) {
    case "rect": {
      const cls = s.cls ? ` class="${s.cls}"` : "";
      const data =
        s.dataX !== undefined ? ` data-x="${esc(s.dataX)}" data-y="${esc(s.dataY ?? "")}"` : "";
      return `<rect${cls} x="${fmt(s.x)}" y="${fmt(s.y)}" width="${fmt(s.w)}" height="${fmt(
        s.h
      )}" fill="${s.fill}"${data}/>`;
    }
    case "line":
      return `<line x1="${fmt(s.x1)}" y1="${fmt(s.y1)}" x2="${fmt(s.x2)}" y2="${fmt(
        s.y2
      )}" stroke="${s.stroke}" stroke-width="${s.width}"/>`;
    case "polyline": {
      const cls = s.cls ? ` class="${s.cls}"` : "";
      const pts = s.points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
      return `<polyline${cls} points="${pts}" fill="none" stroke="${s.stroke}" stroke-width="${s.width}"/>`;
    }
    case "circle": {
      const cls = s.cls ? ` class="${s.cls}"` : "";
      const data =
        s.dataX !== undefined ? ` data-x="${esc(s.dataX)}" data-y="${esc(s.dataY ?? "")}"` : "";
      return `<circle${cls} cx="${fmt(s.cx)}" cy="${fmt(s.cy)}" r="${fmt(s.r)}" fill="${
        s.fill
      }"${data}/>`;
    }
    case "text":
      return `<text x="${fmt(s.x)}" y="${fmt(s.y)}" font-family="Helvetica,Arial,sans-serif" font-size="${
        s.size
      }" text-anchor="${s.anchor}" fill="${s.fill}">${esc(s.text)}</text>`;
  }
}

/** Deterministic standalone SVG (no timestamps, fixed formatting). */
export function toSvg(display: Display): string {
  const body = display.shapes.map(shapeToSvg).join("\n  ");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${display.width}" height="${display.height}" ` +
    `viewBox="0 0 ${display.width} ${display.height}">\n` +
    `  <rect x="0" y="0" width="${display.width}" height="${display.height}" fill="#ffffff"/>\n` +
    `  ${body}\n</svg>\n`
  );
}
