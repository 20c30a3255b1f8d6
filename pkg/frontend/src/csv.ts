import { readFileSync } from "node:fs";

export const EXPECTED_HEADER =
    "method,seed,k,vtime,grad_norm_sq,subopt,total_busy,discarded,avg_iter_time,cum_regret";

export interface MetricRow {
    method: string;
    seed: number;
    k: number;
    vtime: number;
    grad_norm_sq: number | null;
    subopt: number | null;
    total_busy: number | null;
    discarded: number | null;
    avg_iter_time: number | null;
    cum_regret: number | null;
    /** provenance: source file and 1-based line number */
    source: string;
    line: number;
}

const NUMERIC = ["seed", "k", "vtime"] as const;
const OPTIONAL = ["grad_norm_sq", "subopt", "total_busy", "discarded",
    "avg_iter_time", "cum_regret"] as const;

export function parseCsv(path: string): MetricRow[] {
    const text = readFileSync(path, "utf8");
    const lines = text.split(/\r?\n/);
    if (lines.length === 0 || lines[0].trim() === "") {
        throw new Error(`${path}: empty input`);
    }
    if (lines[0] !== EXPECTED_HEADER) {
        throw new Error(`${path}: unexpected header ${JSON.stringify(lines[0])}`);
    }
    const names = lines[0].split(",");
    const rows: MetricRow[] = [];
    for (let i = 1; i < lines.length; i++) {
        const line = lines[i];
        if (line.trim() === "") continue;
        const parts = line.split(",");
        if (parts.length !== names.length) {
            throw new Error(`${path}:${i + 1}: expected ${names.length} fields, got ${parts.length}`);
        }
        const row: Record<string, unknown> = { method: parts[0], source: path, line: i + 1 };
        for (const name of NUMERIC) {
            const v = Number(parts[names.indexOf(name)]);
            if (!Number.isFinite(v)) {
                throw new Error(`${path}:${i + 1}: bad numeric field ${name}`);
            }
            row[name] = v;
        }
        for (const name of OPTIONAL) {
            const raw = parts[names.indexOf(name)];
            row[name] = raw === "" ? null : Number(raw);
        }
        rows.push(row as unknown as MetricRow);
    }
    if (rows.length === 0) {
        throw new Error(`${path}: no data rows`);
    }
    return rows;
}
