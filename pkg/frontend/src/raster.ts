import { PNG } from "pngjs";
import { Display, Shape } from "./chart";
import { GLYPH_H, GLYPH_SPACING, GLYPH_W, glyph, textWidth } from "./font";

/** Scanline rasterizer for the display list; no anti-aliasing so output
 * bytes are fully deterministic. */

function parseColor(hex: string): [number, number, number] {
  const h = hex.replace("#", "");
  return [
    parseInt(h.slice(0, 2), 16),
    parseInt(h.slice(2, 4), 16),
    parseInt(h.slice(4, 6), 16),
  ];
}

class Canvas {
  png: PNG;

  constructor(public width: number, public height: number) {
    this.png = new PNG({ width, height });
    this.png.data.fill(255);
  }

  set(x: number, y: number, rgb: [number, number, number]): void {
    const xi = Math.round(x);
    const yi = Math.round(y);
    if (xi < 0 || yi < 0 || xi >= this.width || yi >= this.height) return;
    const i = (yi * this.width + xi) * 4;
    this.png.data[i] = rgb[0];
    this.png.data[i + 1] = rgb[1];
    this.png.data[i + 2] = rgb[2];
    this.png.data[i + 3] = 255;
  }

  fillRect(x: number, y: number, w: number, h: number, rgb: [number, number, number]): void {
    for (let yy = Math.round(y); yy < Math.round(y + h); yy++) {
      for (let xx = Math.round(x); xx < Math.round(x + w); xx++) {
        this.set(xx, yy, rgb);
      }
    }
  }

  line(x1: number, y1: number, x2: number, y2: number, rgb: [number, number, number], width: number): void {
    let x = Math.round(x1);
    let y = Math.round(y1);
    const ex = Math.round(x2);
    const ey = Math.round(y2);
    const dx = Math.abs(ex - x);
    const dy = -Math.abs(ey - y);
    const sx = x < ex ? 1 : -1;
    const sy = y < ey ? 1 : -1;
    let err = dx + dy;
    for (;;) {
      this.set(x, y, rgb);
      if (width > 1) {
        this.set(x + 1, y, rgb);
        this.set(x, y + 1, rgb);
      }
      if (x === ex && y === ey) break;
      const e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y += sy;
      }
    }
  }

  fillCircle(cx: number, cy: number, r: number, rgb: [number, number, number]): void {
    for (let yy = Math.round(cy - r); yy <= Math.round(cy + r); yy++) {
      for (let xx = Math.round(cx - r); xx <= Math.round(cx + r); xx++) {
        if ((xx - cx) ** 2 + (yy - cy) ** 2 <= r * r) this.set(xx, yy, rgb);
      }
    }
  }

  text(
    x: number,
    y: number,
    s: string,
    anchor: "start" | "middle" | "end",
    rgb: [number, number, number]
  ): void {
    const w = textWidth(s);
    let left = Math.round(anchor === "start" ? x : anchor === "end" ? x - w : x - w / 2);
    const top = Math.round(y - GLYPH_H);
    for (const ch of s) {
      const rows = glyph(ch);
      for (let gy = 0; gy < GLYPH_H; gy++) {
        for (let gx = 0; gx < GLYPH_W; gx++) {
          if (rows[gy][gx] === "#") this.set(left + gx, top + gy, rgb);
        }
      }
      left += GLYPH_W + GLYPH_SPACING;
    }
  }
}

export function toPng(display: Display): Buffer {
  const canvas = new Canvas(display.width, display.height);
  for (const s of display.shapes as Shape[]) {
    switch (s.type) {
      case "rect":
        canvas.fillRect(s.x, s.y, s.w, s.h, parseColor(s.fill));
        break;
      case "line":
        canvas.line(s.x1, s.y1, s.x2, s.y2, parseColor(s.stroke), s.width);
        break;
      case "polyline": {
        const rgb = parseColor(s.stroke);
        for (let i = 1; i < s.points.length; i++) {
          canvas.line(
            s.points[i - 1][0],
            s.points[i - 1][1],
            s.points[i][0],
            s.points[i][1],
            rgb,
            s.width
          );
        }
        break;
      }
      case "circle":
        canvas.fillCircle(s.cx, s.cy, s.r, parseColor(s.fill));
        break;
      case "text":
        canvas.text(s.x, s.y, s.text, s.anchor, parseColor(s.fill));
        break;
    }
  }
  return PNG.sync.write(canvas.png, { deflateLevel: 9, deflateStrategy: 0 });
}
