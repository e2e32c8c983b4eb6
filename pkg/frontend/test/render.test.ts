import { mkdtempSync, existsSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { EmptySelectionError, SchemaError, parseSpec } from "../src/figspec";
import { main } from "../src/main";
import { renderFigure, renderSpecFile } from "../src/render";

const HEADER =
  "experiment,scenario,objective,method,n_shot,mask_ratio,param_count,seed,mean_utility,ratio_vs_wmmse_best,violated_user_rate";

function dir(): string {
  return mkdtempSync(join(tmpdir(), "figs-"));
}

function writeCsv(d: string, name: string, rows: string[]): string {
  const p = join(d, name);
  writeFileSync(p, [HEADER, ...rows].join("\n") + "\n");
  return p;
}

const FEWSHOT_ROWS = [64, 128, 256, 512, 1024, 2048].flatMap((n) => [
  `fewshot,D18-toy,sum_rate,model_pretrained,${n},0.0,18291,0,20.1,0.9${n % 7},0.1`,
  `fewshot,D18-toy,sum_rate,model_scratch,${n},0.0,18291,0,18.3,0.8${n % 7},0.2`,
]);

function countMarks(svg: string): number {
  return (svg.match(/class="mark"/g) ?? []).length;
}

describe("bars", () => {
  it("renders one bar per selected row at the stated value", () => {
    const d = dir();
    writeCsv(d, "r.csv", ["eval,D1-toy,sum_rate,model,,0.0,18291,0,21.5,0.84,0.1"]);
    const spec = parseSpec({
      csv: ["r.csv"],
      kind: "bars",
      x: "method",
      y: "ratio_vs_wmmse_best",
      out: "fig",
    });
    const res = renderFigure(spec, d);
    expect(res.markCount).toBe(1);
    expect(countMarks(res.svg)).toBe(1);
    expect(res.svg).toContain('data-y="0.84"');
    expect(existsSync(join(d, "fig.svg"))).toBe(true);
    expect(existsSync(join(d, "fig.png"))).toBe(true);
    expect(res.png.subarray(0, 4)).toEqual(Buffer.from([0x89, 0x50, 0x4e, 0x47]));
  });

  it("plots every selected row even with duplicate keys", () => {
    const d = dir();
    writeCsv(d, "r.csv", [
      "eval,D1-toy,sum_rate,model,,0.0,18291,0,21.5,0.84,0.1",
      "eval,D1-toy,sum_rate,model,,0.0,18291,1,21.0,0.82,0.1",
      "eval,D1-toy,sum_rate,full_reuse,,0.0,,0,18.0,0.70,0.3",
    ]);
    const spec = parseSpec({
      csv: ["r.csv"],
      kind: "bars",
      x: "method",
      y: "ratio_vs_wmmse_best",
      series: ["seed"],
      out: "fig",
    });
    expect(renderFigure(spec, d).markCount).toBe(3);
  });
});

describe("curves", () => {
  it("renders one series per method with one mark per row", () => {
    const d = dir();
    writeCsv(d, "few.csv", FEWSHOT_ROWS);
    const spec = parseSpec({
      csv: ["few.csv"],
      kind: "curves",
      x: "n_shot",
      y: "ratio_vs_wmmse_best",
      series: ["method"],
      filter: { experiment: "fewshot" },
      log_x: true,
      out: "few",
    });
    const res = renderFigure(spec, d);
    expect(res.markCount).toBe(12);
    expect((res.svg.match(/<polyline class="series"/g) ?? []).length).toBe(2);
  });

  it("every plotted mark carries its CSV cells verbatim", () => {
    const d = dir();
    writeCsv(d, "few.csv", FEWSHOT_ROWS);
    const spec = parseSpec({
      csv: ["few.csv"],
      kind: "curves",
      x: "n_shot",
      y: "ratio_vs_wmmse_best",
      series: ["method"],
      out: "few",
    });
    const res = renderFigure(spec, d);
    for (const row of FEWSHOT_ROWS) {
      const cells = row.split(",");
      expect(res.svg).toContain(`data-x="${cells[4]}" data-y="${cells[9]}"`);
    }
  });
});

describe("determinism", () => {
  it("re-rendering is byte-stable for both outputs", () => {
    const d = dir();
    writeCsv(d, "few.csv", FEWSHOT_ROWS);
    const spec = parseSpec({
      csv: ["few.csv"],
      kind: "curves",
      x: "n_shot",
      y: "mean_utility",
      series: ["method"],
      title: "few-shot adaptation",
      x_label: "fine-tuning samples",
      y_label: "normalized utility",
      out: "few",
    });
    const a = renderFigure(spec, d);
    const svg1 = readFileSync(a.svgPath, "utf-8");
    const png1 = readFileSync(a.pngPath);
    const b = renderFigure(spec, d);
    expect(readFileSync(b.svgPath, "utf-8")).toBe(svg1);
    expect(readFileSync(b.pngPath).equals(png1)).toBe(true);
  });
});

describe("errors", () => {
  it("names a missing column", () => {
    const d = dir();
    writeCsv(d, "r.csv", ["eval,D1-toy,sum_rate,model,,0.0,18291,0,21.5,0.84,0.1"]);
    const spec = parseSpec({
      csv: ["r.csv"],
      kind: "bars",
      x: "method",
      y: "no_such_column",
      out: "fig",
    });
    expect(() => renderFigure(spec, d)).toThrowError(SchemaError);
    expect(() => renderFigure(spec, d)).toThrowError(/no_such_column/);
  });

  it("rejects an empty selection without writing files", () => {
    const d = dir();
    writeCsv(d, "r.csv", ["eval,D1-toy,sum_rate,model,,0.0,18291,0,21.5,0.84,0.1"]);
    const spec = parseSpec({
      csv: ["r.csv"],
      kind: "bars",
      x: "method",
      y: "mean_utility",
      filter: { objective: "qos" },
      out: "empty-fig",
    });
    expect(() => renderFigure(spec, d)).toThrowError(EmptySelectionError);
    expect(existsSync(join(d, "empty-fig.svg"))).toBe(false);
    expect(existsSync(join(d, "empty-fig.png"))).toBe(false);
  });

  it("rejects a non-numeric y cell in the selection", () => {
    const d = dir();
    writeCsv(d, "r.csv", ["eval,D1-toy,sum_rate,model,,0.0,18291,0,21.5,,0.1"]);
    const spec = parseSpec({
      csv: ["r.csv"],
      kind: "bars",
      x: "method",
      y: "ratio_vs_wmmse_best",
      out: "fig",
    });
    expect(() => renderFigure(spec, d)).toThrowError(SchemaError);
  });

  it("rejects malformed specs", () => {
    expect(() => parseSpec({ kind: "bars" })).toThrowError(/csv/);
    expect(() => parseSpec({ csv: ["x"], kind: "pie", x: "a", y: "b", out: "o" })).toThrowError();
  });
});

describe("cli", () => {
  it("renders a spec file and reports mark count", () => {
    const d = dir();
    writeCsv(d, "r.csv", [
      "eval,D1-toy,sum_rate,model,,0.0,18291,0,21.5,0.84,0.1",
      "eval,D1-toy,sum_rate,wmmse_best,,0.0,,0,25.5,1.0,0.0",
    ]);
    const specPath = join(d, "spec.json");
    writeFileSync(
      specPath,
      JSON.stringify({
        csv: ["r.csv"],
        kind: "bars",
        x: "method",
        y: "mean_utility",
        out: "fig",
      })
    );
    expect(main(["--spec", specPath])).toBe(0);
    const res = renderSpecFile(specPath);
    expect(res.markCount).toBe(2);
  });

  it("returns usage and data-error exit codes", () => {
    expect(main([])).toBe(64);
    expect(main(["--spec"])).toBe(64);
    const d = dir();
    const specPath = join(d, "bad.json");
    writeFileSync(specPath, JSON.stringify({ csv: ["missing.csv"] }));
    expect(main(["--spec", specPath])).toBe(65);
  });
});
