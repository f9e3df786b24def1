import { describe, expect, it } from "vitest";

import { SpecError } from "../src/errors.js";
import { parsePlotSpec } from "../src/plotspec.js";

const MINIMAL = `
out = fig.svg
[panel]
csv = a.csv
x = B
y = sim_error_mean
`;

describe("parsePlotSpec", () => {
  it("parses a minimal spec with defaults", () => {
    const spec = parsePlotSpec(MINIMAL);
    expect(spec.rows).toBe(1);
    expect(spec.cols).toBe(1);
    expect(spec.out).toBe("fig.svg");
    expect(spec.panels[0]).toMatchObject({
      csv: "a.csv",
      x: "B",
      logx: false,
      logy: false,
    });
  });

  it("parses layout, error-bar series, and grouping", () => {
    const spec = parsePlotSpec(`
layout = 2x2
out = f.svg
[panel]
csv = a.csv
x = B
y = sim_error_mean:sim_error_stderr
y = theory_F
logy = true
group = n
title = hello # trailing comment
`);
    expect([spec.rows, spec.cols]).toEqual([2, 2]);
    const panel = spec.panels[0]!;
    expect(panel.series).toEqual([
      { column: "sim_error_mean", err: "sim_error_stderr" },
      { column: "theory_F" },
    ]);
    expect(panel.logy).toBe(true);
    expect(panel.group).toBe("n");
    expect(panel.title).toBe("hello");
  });

  it("defaults layout to one row of all panels", () => {
    const spec = parsePlotSpec(
      MINIMAL + "[panel]\ncsv = b.csv\nx = B\ny = F\n",
    );
    expect([spec.rows, spec.cols]).toEqual([1, 2]);
  });

  const bad: [string, string, RegExp][] = [
    ["missing out", "[panel]\ncsv=a\nx=B\ny=F\n", /missing the global out/],
    ["no panels", "out = f.svg\n", /no \[panel\]/],
    ["missing csv", "out=f.svg\n[panel]\nx=B\ny=F\n", /missing csv/],
    ["missing x", "out=f.svg\n[panel]\ncsv=a\ny=F\n", /missing x/],
    ["no series", "out=f.svg\n[panel]\ncsv=a\nx=B\n", /at least one y/],
    ["bad layout", "layout = wide\nout=f.svg\n[panel]\ncsv=a\nx=B\ny=F\n", /1x3/],
    ["overfull layout",
     "layout = 1x1\nout=f.svg\n[panel]\ncsv=a\nx=B\ny=F\n[panel]\ncsv=a\nx=B\ny=F\n",
     /do not fit/],
    ["unknown global key", "nope = 1\nout=f.svg\n[panel]\ncsv=a\nx=B\ny=F\n",
     /unknown global key "nope"/],
    ["unknown panel key", "out=f.svg\n[panel]\ncsv=a\nx=B\ny=F\nzap=1\n",
     /unknown panel key "zap"/],
    ["bad bool", "out=f.svg\n[panel]\ncsv=a\nx=B\ny=F\nlogy=yes\n",
     /must be true or false/],
    ["bad series", "out=f.svg\n[panel]\ncsv=a\nx=B\ny=a:b:c\n",
     /stderr_column/],
  ];
  for (const [name, text, pattern] of bad) {
    it(`rejects ${name}`, () => {
      expect(() => parsePlotSpec(text)).toThrow(SpecError);
      expect(() => parsePlotSpec(text)).toThrow(pattern);
    });
  }
});
