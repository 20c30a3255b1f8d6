import { loadSpec } from "./figspec.js";
import { renderToFiles } from "./render.js";

export function main(argv: string[]): number {
    if (argv[0] !== "plot") {
        process.stderr.write("usage: plot --spec <fig.toml>\n");
        return 2;
    }
    const flagIdx = argv.indexOf("--spec");
    const specPath = flagIdx >= 0 ? argv[flagIdx + 1] : undefined;
    if (!specPath) {
        process.stderr.write("usage: plot --spec <fig.toml>\n");
        return 2;
    }
    try {
        const spec = loadSpec(specPath);
        const { output, sidecar } = renderToFiles(spec);
        process.stdout.write(`wrote ${output} (+ ${sidecar})\n`);
        return 0;
    } catch (err) {
        process.stderr.write(`error: ${(err as Error).message}\n`);
        return 1;
    }
}

if (import.meta.url === `file://${process.argv[1]}`) {
    process.exit(main(process.argv.slice(2)));
}
