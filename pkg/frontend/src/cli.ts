/**
 * CLI: `render --spec <file>` — render every figure in a spec file.
 */

import { CsvError } from "./csv.js";
import { SpecError, renderSpecFile } from "./render.js";

export async function main(argv: string[]): Promise<number> {
  const args = [...argv];
  if (args[0] === "render") {
    args.shift(); // allow both `render --spec f` and `--spec f`
  }
  const i = args.indexOf("--spec");
  if (i === -1 || i + 1 >= args.length) {
    console.error("usage: render --spec <file>");
    return 1;
  }
  try {
    const written = await renderSpecFile(args[i + 1]);
    for (const path of written) {
      console.log(`wrote ${path}`);
    }
    return 0;
  } catch (err) {
    if (err instanceof CsvError || err instanceof SpecError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

const invoked = process.argv[1];
if (invoked && (invoked.endsWith("cli.js") || invoked.endsWith("cli.ts"))) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
