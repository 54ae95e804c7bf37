import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const CLI = join(dirname(fileURLToPath(import.meta.url)), "..", "dist", "cli.js");
import { describe, expect, it } from "vitest";
import { run } from "../src/cli.js";
import { BUILDERS } from "../src/figures.js";
import { renderSvg } from "../src/render.js";
import { load } from "../src/schemas.js";

const SQRT3 = Math.sqrt(3);

function tmpFile(name: string, content: string): string {
  const dir = mkdtempSync(join(tmpdir(), "viz-"));
  const p = join(dir, name);
  writeFileSync(p, content);
  return p;
}

function mixingCsv(rate = 0.19739): string {
  let out = "t,estimate,stderr\n";
  for (let k = 0; k < 10; k++) {
    const t = k * 1.0;
    out += `${t},${0.8 * Math.exp(-rate * t)},0.005\n`;
  }
  return tmpFile("mixing.csv", out);
}

function invariantCsv(): string {
  let out = "bin_index_1,bin_index_2,center_1,center_2,mass\n";
  for (let i = 0; i < 8; i++) {
    for (let j = 0; j < 8; j++) {
      const mass = (1 + 0.02 * Math.sin(i + j)) / 64;
      out += `${i},${j},${(i + 0.5) / 8},${(j + 0.5) / 8},${mass}\n`;
    }
  }
  return tmpFile("invariant.csv", out);
}

function cltCsv(): string {
  let out = "epsilon,t,i,j,emp_cov,stderr,target\n";
  for (const t of [0.25, 0.5, 0.75, 1.0]) {
    out += `0.1,${t},1,1,${SQRT3 * t * 1.003},${0.01 * t},${SQRT3 * t}\n`;
  }
  return tmpFile("clt.csv", out);
}

function studyCsv(): string {
  let out = "epsilon,x_1,u_eps,stderr_eps,u0,stderr_0,gap,z\n";
  for (const [eps, gap] of [
    [0.5, 0.012],
    [0.25, 0.006],
    [0.1, 0.002],
  ]) {
    out += `${eps},0.5,${0.445 - gap},0.001,0.445,0.0005,${-gap},${gap / 0.0011}\n`;
  }
  return tmpFile("study.csv", out);
}

function example2dCsv(): string {
  let out = "x_1,x_2,fraction,q25,q50,q90\n";
  for (let i = 0; i < 8; i++) {
    for (let j = 0; j < 8; j++) {
      const d = Math.hypot(i * 1.25 + 0.625 - 5, j * 1.25 + 0.625 - 5);
      out += `${i * 1.25 + 0.625},${j * 1.25 + 0.625},1.0,${d * 0.8},${d},${d * 2}\n`;
    }
  }
  return tmpFile("example2d.csv", out);
}

const INPUTS: Record<string, () => string> = {
  mixing: mixingCsv,
  invariant: invariantCsv,
  clt: cltCsv,
  study: studyCsv,
  example2d: example2dCsv,
};

describe("figure rendering", () => {
  for (const kind of Object.keys(BUILDERS)) {
    it(`renders the ${kind} figure to SVG`, () => {
      const table = load(kind, INPUTS[kind]());
      const svg = renderSvg(BUILDERS[kind](table));
      expect(svg.startsWith("<svg")).toBe(true);
      expect(svg).toContain("</svg>");
    });
  }

  it("is deterministic: identical inputs give identical bytes", () => {
    // element ids in the SVG come from a per-process instance counter, so
    // the real invariant is byte-identical output across CLI invocations
    const path = mixingCsv();
    const dir = mkdtempSync(join(tmpdir(), "viz-"));
    const render = (name: string) => {
      const out = join(dir, name);
      execFileSync("node", [CLI, "render", "--kind", "mixing",
                            "--in", path, "--out", out]);
      return readFileSync(out, "utf-8");
    };
    expect(render("a.svg")).toBe(render("b.svg"));
  });

  it("recovers the planted mixing rate to 3 digits in the annotation", () => {
    const fig = BUILDERS.mixing(load("mixing", mixingCsv(0.19739)));
    expect(Math.abs(fig.summary.rate - 0.19739)).toBeLessThan(5e-4);
    const svg = renderSvg(fig);
    expect(svg).toContain("0.19739");
  });

  it("annotates the clt diagonal slope near the planted value", () => {
    const fig = BUILDERS.clt(load("clt", cltCsv()));
    expect(Math.abs(fig.summary.slope_11 - SQRT3)).toBeLessThan(0.02);
  });

  it("flags a strictly decreasing study gap", () => {
    const fig = BUILDERS.study(load("study", studyCsv()));
    expect(fig.summary.strictly_decreasing).toBe(1);
  });
});

describe("cli", () => {
  it("renders end to end and exits 0", () => {
    const out = join(mkdtempSync(join(tmpdir(), "viz-")), "fig.svg");
    const code = run(["render", "--kind", "mixing", "--in", mixingCsv(),
                      "--out", out]);
    expect(code).toBe(0);
    expect(readFileSync(out, "utf-8")).toContain("</svg>");
  });

  it("exits 2 on schema mismatch", () => {
    const bad = tmpFile("bad.csv", "t,estimate\n0,1\n");
    const out = join(mkdtempSync(join(tmpdir(), "viz-")), "fig.svg");
    expect(run(["render", "--kind", "mixing", "--in", bad, "--out", out]))
      .toBe(2);
  });

  it("exits 2 on unknown kind", () => {
    expect(run(["render", "--kind", "nope", "--in", "x.csv", "--out", "y.svg"]))
      .toBe(2);
  });

  it("exits 4 on missing input file", () => {
    expect(run(["render", "--kind", "mixing", "--in", "/does/not/exist.csv",
                "--out", "/tmp/fig.svg"]))
      .toBe(4);
  });
});
