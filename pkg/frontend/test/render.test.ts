import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { EXPECTED_HEADER, parseCsv } from "../src/csv.js";
import { FIGURE_KINDS, FigureSpec, loadSpec, specFromObject } from "../src/figspec.js";
import { buildFigure, renderToFiles } from "../src/render.js";
import { iqrBand, median, smoothCentered } from "../src/stats.js";
import { main } from "../src/cli.js";

const GOLDEN = join(__dirname, "..", "fixtures", "golden.csv");

function tempDir(): string {
    return mkdtempSync(join(tmpdir(), "plots-"));
}

function makeSpec(kind: FigureSpec["kind"], dir: string,
                  extra: Partial<FigureSpec> = {}): FigureSpec {
    return {
        kind,
        inputs: [GOLDEN],
        output: join(dir, `${kind}.svg`),
        labels: { ringmaster: "Ringmaster ASGD" },
        aggregate: "none",
        smoothWindow: 0,
        title: "",
        ...extra,
    };
}

describe("csv parsing", () => {
    it("parses the golden fixture with provenance", () => {
        const rows = parseCsv(GOLDEN);
        expect(rows.length).toBeGreaterThan(100);
        expect(rows[0].line).toBe(2);
        expect(rows[0].source).toBe(GOLDEN);
        const methods = new Set(rows.map((r) => r.method));
        expect(methods.has("ringmaster")).toBe(true);
        expect(methods.has("ata_empirical")).toBe(true);
    });

    it("rejects a wrong header", () => {
        const dir = tempDir();
        const bad = join(dir, "bad.csv");
        writeFileSync(bad, "method,seed,k\nringmaster,0,1\n");
        expect(() => parseCsv(bad)).toThrow(/unexpected header/);
    });

    it("rejects empty input", () => {
        const dir = tempDir();
        const empty = join(dir, "empty.csv");
        writeFileSync(empty, EXPECTED_HEADER + "\n");
        expect(() => parseCsv(empty)).toThrow(/no data rows/);
    });
});

describe("figure rendering", () => {
    it("renders all four figure kinds from the golden fixture", () => {
        const dir = tempDir();
        for (const kind of FIGURE_KINDS) {
            const spec = makeSpec(kind, dir);
            const { output, sidecar } = renderToFiles(spec);
            const svg = readFileSync(output, "utf8");
            expect(svg.startsWith("<svg")).toBe(true);
            expect(svg).toContain("polyline");
            const rows = readFileSync(sidecar, "utf8").trim().split("\n");
            expect(rows.length).toBeGreaterThan(0);
        }
    });

    it("sidecar lists exactly the consumed rows", () => {
        const dir = tempDir();
        const spec = makeSpec("vtime_vs_subopt", dir);
        const result = buildFigure(spec);
        renderToFiles(spec);
        const sidecar = readFileSync(spec.output + ".rows.txt", "utf8").trim().split("\n");
        expect(sidecar).toEqual(result.consumed.map((r) => `${r.source}:${r.line}`));
        // every consumed row really carries the plotted columns
        const byLine = new Map(parseCsv(GOLDEN).map((r) => [r.line, r]));
        for (const entry of sidecar) {
            const line = Number(entry.split(":").at(-1));
            const row = byLine.get(line)!;
            expect(row.subopt).not.toBeNull();
        }
        // regret-only rows are not consumed by a suboptimality figure
        for (const r of byLine.values()) {
            if (r.method === "ata_empirical") {
                expect(sidecar).not.toContain(`${r.source}:${r.line}`);
            }
        }
    });

    it("repeated renders produce identical bytes and sidecars", () => {
        const dir = tempDir();
        const spec = makeSpec("busytime_vs_subopt", dir, { aggregate: "median_iqr" });
        renderToFiles(spec);
        const first = readFileSync(spec.output, "utf8");
        const firstRows = readFileSync(spec.output + ".rows.txt", "utf8");
        renderToFiles(spec);
        expect(readFileSync(spec.output, "utf8")).toBe(first);
        expect(readFileSync(spec.output + ".rows.txt", "utf8")).toBe(firstRows);
    });

    it("draws a band only with three or more seeds", () => {
        const dir = tempDir();
        const banded = buildFigure(makeSpec("vtime_vs_subopt", dir,
                                            { aggregate: "median_iqr" }));
        expect(banded.svg).toContain("polygon");
        // single-seed input: filter the fixture down to seed 0
        const rows = readFileSync(GOLDEN, "utf8").split("\n");
        const single = [rows[0],
                        ...rows.slice(1).filter((l) => l.split(",")[1] === "0")];
        const singlePath = join(dir, "single.csv");
        writeFileSync(singlePath, single.join("\n") + "\n");
        const lone = buildFigure(makeSpec("vtime_vs_subopt", dir, {
            inputs: [singlePath], aggregate: "median_iqr",
        }));
        expect(lone.svg).not.toContain("polygon");
    });

    it("median of three constant series is the constant", () => {
        const dir = tempDir();
        const path = join(dir, "const.csv");
        const lines = [EXPECTED_HEADER];
        for (const seed of [0, 1, 2]) {
            for (let k = 1; k <= 5; k++) {
                lines.push(`m,${seed},${k},${k}.0,,0.5,,,1.0,`);
            }
        }
        writeFileSync(path, lines.join("\n") + "\n");
        const fig = buildFigure(makeSpec("vtime_vs_subopt", dir, {
            inputs: [path], aggregate: "median_iqr",
        }));
        // all medians equal 0.5 -> the polyline is horizontal
        const match = fig.svg.match(/polyline[^>]*points="([^"]+)"/);
        expect(match).not.toBeNull();
        const ys = match![1].split(" ").map((p) => Number(p.split(",")[1]));
        expect(new Set(ys).size).toBe(1);
    });

    it("log-scale suboptimality and missing-column errors", () => {
        const dir = tempDir();
        const fig = buildFigure(makeSpec("vtime_vs_subopt", dir));
        expect(fig.svg).toMatch(/1e-\d/);  // log ticks
        // a CSV with empty subopt everywhere cannot feed this figure
        const path = join(dir, "noopt.csv");
        writeFileSync(path, EXPECTED_HEADER + "\nm,0,1,1.0,,,,,1.0,\n");
        expect(() => buildFigure(makeSpec("vtime_vs_subopt", dir, { inputs: [path] })))
            .toThrow(/no plottable rows/);
    });

    it("smoothing keeps the first point unchanged", () => {
        const raw = [10, 0, 10, 0, 10, 0];
        const smooth = smoothCentered(raw, 3);
        expect(smooth[0]).toBe(10);
        expect(smooth[1]).toBeCloseTo((10 + 0 + 10) / 3);
        expect(smoothCentered(raw, 0)).toEqual(raw);
    });
});

describe("stats", () => {
    it("median and iqr", () => {
        expect(median([3, 1, 2])).toBe(2);
        const band = iqrBand([1, 2, 3, 4, 5]);
        expect(band.mid).toBe(3);
        expect(band.lo).toBe(2);
        expect(band.hi).toBe(4);
    });
});

describe("spec parsing and cli", () => {
    it("parses a TOML spec file", () => {
        const dir = tempDir();
        const specPath = join(dir, "fig.toml");
        writeFileSync(specPath, [
            "[figure]",
            'kind = "avg_regret"',
            `inputs = ["${GOLDEN}"]`,
            `output = "${join(dir, "regret.svg")}"`,
            'aggregate = "median_iqr"',
            "smooth_window = 0",
            "[labels]",
            'ata_empirical = "adaptive allocation"',
        ].join("\n"));
        const spec = loadSpec(specPath);
        expect(spec.kind).toBe("avg_regret");
        expect(main(["plot", "--spec", specPath])).toBe(0);
        expect(readFileSync(join(dir, "regret.svg"), "utf8")).toContain("adaptive allocation");
    });

    it("rejects bad specs and bad invocations", () => {
        expect(() => specFromObject({ figure: { kind: "nope" } })).toThrow(/kind/);
        expect(() => specFromObject({ figure: { kind: "avg_regret", inputs: [] } }))
            .toThrow(/inputs/);
        expect(main(["plot"])).toBe(2);
        expect(main(["nope"])).toBe(2);
        const dir = tempDir();
        const specPath = join(dir, "missing.toml");
        writeFileSync(specPath, [
            "[figure]",
            'kind = "avg_regret"',
            'inputs = ["/nonexistent.csv"]',
            `output = "${join(dir, "x.svg")}"`,
        ].join("\n"));
        expect(main(["plot", "--spec", specPath])).toBe(1);
    });
});
