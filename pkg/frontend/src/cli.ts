#!/usr/bin/env node
/** `icl-plot --spec <file>`: render one spec to its SVG output.
 *
 * Exit codes: 0 success, 2 bad spec or CSV (message on stderr).
 */

import { readFileSync, writeFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { CsvError, SpecError } from "./errors.js";
import { renderSpecFile } from "./render.js";

export function main(argv: string[]): number {
  let specPath: string | undefined;
  try {
    const { values } = parseArgs({
      args: argv,
      options: { spec: { type: "string" } },
    });
    specPath = values.spec;
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n`);
    return 2;
  }
  if (!specPath) {
    process.stderr.write("usage: icl-plot --spec <file>\n");
    return 2;
  }
  try {
    const text = readFileSync(specPath, "utf-8");
    const { out, svg } = renderSpecFile(specPath, text);
    writeFileSync(out, svg, "utf-8");
    process.stdout.write(`${out}\n`);
    return 0;
  } catch (err) {
    if (err instanceof SpecError || err instanceof CsvError || (err as NodeJS.ErrnoException).code === "ENOENT") {
      process.stderr.write(`icl-plot: ${(err as Error).message}\n`);
      return 2;
    }
    throw err;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
