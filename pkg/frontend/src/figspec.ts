import { readFileSync } from "node:fs";
import { parse as parseToml } from "smol-toml";

export const FIGURE_KINDS = [
    "vtime_vs_subopt",
    "busytime_vs_subopt",
    "avg_iter_time",
    "avg_regret",
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface FigureSpec {
    kind: FigureKind;
    inputs: string[];
    output: string;
    /** map from method id (CSV value) to display label */
    labels: Record<string, string>;
    /** median + interquartile band across seeds (needs >= 3 seeds) */
    aggregate: "none" | "median_iqr";
    /** centered moving-average window; 0 disables smoothing */
    smoothWindow: number;
    title: string;
}

export function specFromObject(raw: Record<string, unknown>, baseTitle = ""): FigureSpec {
    const fig = (raw["figure"] ?? {}) as Record<string, unknown>;
    const kind = fig["kind"];
    if (typeof kind !== "string" || !FIGURE_KINDS.includes(kind as FigureKind)) {
        throw new Error(`figure.kind must be one of ${FIGURE_KINDS.join(", ")}`);
    }
    const inputs = fig["inputs"];
    if (!Array.isArray(inputs) || inputs.length === 0 ||
        inputs.some((x) => typeof x !== "string")) {
        throw new Error("figure.inputs must be a nonempty list of CSV paths");
    }
    const output = fig["output"];
    if (typeof output !== "string" || output === "") {
        throw new Error("figure.output must be a path");
    }
    const aggregate = (fig["aggregate"] ?? "none") as string;
    if (aggregate !== "none" && aggregate !== "median_iqr") {
        throw new Error("figure.aggregate must be 'none' or 'median_iqr'");
    }
    const smoothWindow = Number(fig["smooth_window"] ?? 0);
    if (!Number.isInteger(smoothWindow) || smoothWindow < 0) {
        throw new Error("figure.smooth_window must be a nonnegative integer");
    }
    const labels: Record<string, string> = {};
    const rawLabels = (raw["labels"] ?? {}) as Record<string, unknown>;
    for (const [key, value] of Object.entries(rawLabels)) {
        if (typeof value !== "string") {
            throw new Error(`labels.${key} must be a string`);
        }
        labels[key] = value;
    }
    const title = typeof fig["title"] === "string" ? (fig["title"] as string) : baseTitle;
    return {
        kind: kind as FigureKind,
        inputs: inputs as string[],
        output,
        labels,
        aggregate: aggregate as "none" | "median_iqr",
        smoothWindow,
        title,
    };
}

export function loadSpec(path: string): FigureSpec {
    const raw = parseToml(readFileSync(path, "utf8"));
    return specFromObject(raw as Record<string, unknown>, path);
}
