#!/usr/bin/env node
import { EmptySelectionError, SchemaError, SpecError } from "./figspec";
import { renderSpecFile } from "./render";

function usage(): void {
  console.error("usage: render --spec <figure-spec.json>");
}

export function main(argv: string[]): number {
  const i = argv.indexOf("--spec");
  if (i === -1 || i + 1 >= argv.length || argv.length !== 2) {
    usage();
    return 64;
  }
  try {
    const result = renderSpecFile(argv[i + 1]);
    console.log(`wrote ${result.svgPath} and ${result.pngPath} (${result.markCount} marks)`);
    return 0;
  } catch (err) {
    if (err instanceof SpecError || err instanceof SchemaError || err instanceof EmptySelectionError) {
      console.error(`render: ${err.message}`);
      return 65;
    }
    console.error(`render: ${String(err)}`);
    return 74;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
