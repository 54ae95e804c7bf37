#!/usr/bin/env node
/**
 * viz-reports: render figures from torushomog CSV artifacts.
 *
 *   viz-reports render --kind mixing --in out/mixing.csv --out fig.svg
 *
 * Exit codes: 0 success, 2 usage or schema mismatch, 4 I/O failure.
 */
import { writeFileSync } from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { BUILDERS } from "./figures.js";
import { renderSvg } from "./render.js";
import { SchemaError, load } from "./schemas.js";

export function run(argv: string[]): number {
  const parser = yargs(argv)
    .command("render", "render one figure from engine CSV output", (y) =>
      y
        .option("kind", {
          choices: Object.keys(BUILDERS),
          demandOption: true,
          type: "string",
        })
        .option("in", { demandOption: true, type: "string" })
        .option("out", { demandOption: true, type: "string" })
        .option("width", { type: "number", default: 840 })
        .option("height", { type: "number", default: 600 }),
    )
    .demandCommand(1)
    .strict()
    .exitProcess(false)
    .fail((msg) => {
      throw new UsageError(msg);
    });

  let args;
  try {
    args = parser.parseSync();
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    return 2;
  }

  const kind = args.kind as string;
  const input = args.in as string;
  try {
    const table = load(kind, input);
    const figure = BUILDERS[kind](table);
    const svg = renderSvg(figure, {
      width: args.width as number,
      height: args.height as number,
    });
    try {
      writeFileSync(args.out as string, svg);
    } catch (err) {
      console.error(`cannot write ${args.out}: ${(err as Error).message}`);
      return 4;
    }
    const summary = Object.entries(figure.summary)
      .map(([k, v]) => `${k}=${Number(v.toPrecision(6))}`)
      .join(" ");
    console.log(`${kind}: ${args.out} (${summary})`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema mismatch: ${err.message}`);
      return 2;
    }
    if ((err as NodeJS.ErrnoException).code === "ENOENT") {
      console.error(`cannot read ${input}`);
      return 4;
    }
    throw err;
  }
}

class UsageError extends Error {}

const invokedDirectly = process.argv[1]?.endsWith("cli.js");
if (invokedDirectly) {
  process.exit(run(hideBin(process.argv)));
}
