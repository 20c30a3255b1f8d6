/** Dependency-free SVG assembly with deterministic number formatting. */

export const WIDTH = 640;
export const HEIGHT = 420;
export const MARGIN = { left: 70, right: 20, top: 36, bottom: 46 };

export const PALETTE = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

export function fmt(x: number): string {
    if (!Number.isFinite(x)) throw new Error(`non-finite coordinate ${x}`);
    return x.toFixed(2);
}

export interface Scale {
    (value: number): number;
    ticks(): { value: number; label: string }[];
}

function tickLabel(v: number): string {
    if (v === 0) return "0";
    const abs = Math.abs(v);
    if (abs >= 1e5 || abs < 1e-3) return v.toExponential(0).replace("+", "");
    return String(Number(v.toPrecision(6)));
}

export function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
    const span = hi - lo || 1;
    const scale = ((value: number) =>
        outLo + ((value - lo) / span) * (outHi - outLo)) as Scale;
    scale.ticks = () => {
        const raw = span / 5;
        const mag = Math.pow(10, Math.floor(Math.log10(raw)));
        const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= 6) ?? mag * 10;
        const ticks = [];
        for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-12 * span; v += step) {
            ticks.push({ value: v, label: tickLabel(v) });
        }
        return ticks;
    };
    return scale;
}

export function logScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
    if (lo <= 0) throw new Error("log scale needs positive bounds");
    const llo = Math.log10(lo);
    const lhi = Math.log10(hi);
    const span = lhi - llo || 1;
    const scale = ((value: number) =>
        outLo + ((Math.log10(value) - llo) / span) * (outHi - outLo)) as Scale;
    scale.ticks = () => {
        const ticks = [];
        for (let e = Math.ceil(llo); e <= Math.floor(lhi + 1e-9); e++) {
            ticks.push({ value: Math.pow(10, e), label: `1e${e}` });
        }
        if (ticks.length === 0) {
            ticks.push({ value: lo, label: tickLabel(lo) }, { value: hi, label: tickLabel(hi) });
        }
        return ticks;
    };
    return scale;
}

export function polyline(points: [number, number][], color: string): string {
    const path = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    return `<polyline fill="none" stroke="${color}" stroke-width="1.6" points="${path}"/>`;
}

export function bandPath(upper: [number, number][], lower: [number, number][],
                         color: string): string {
    const fwd = upper.map(([x, y]) => `${fmt(x)},${fmt(y)}`);
    const back = [...lower].reverse().map(([x, y]) => `${fmt(x)},${fmt(y)}`);
    return `<polygon fill="${color}" fill-opacity="0.18" stroke="none" ` +
        `points="${[...fwd, ...back].join(" ")}"/>`;
}

export function document(body: string[], title: string, xLabel: string,
                         yLabel: string, xScale: Scale, yScale: Scale): string {
    const left = MARGIN.left;
    const right = WIDTH - MARGIN.right;
    const top = MARGIN.top;
    const bottom = HEIGHT - MARGIN.bottom;
    const parts: string[] = [];
    parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`);
    parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
    parts.push(`<text x="${WIDTH / 2}" y="20" text-anchor="middle" font-size="14" font-family="sans-serif">${escapeXml(title)}</text>`);
    for (const t of xScale.ticks()) {
        const x = xScale(t.value);
        parts.push(`<line x1="${fmt(x)}" y1="${bottom}" x2="${fmt(x)}" y2="${top}" stroke="#eeeeee"/>`);
        parts.push(`<text x="${fmt(x)}" y="${bottom + 16}" text-anchor="middle" font-size="10" font-family="sans-serif">${t.label}</text>`);
    }
    for (const t of yScale.ticks()) {
        const y = yScale(t.value);
        parts.push(`<line x1="${left}" y1="${fmt(y)}" x2="${right}" y2="${fmt(y)}" stroke="#eeeeee"/>`);
        parts.push(`<text x="${left - 6}" y="${fmt(y + 3)}" text-anchor="end" font-size="10" font-family="sans-serif">${t.label}</text>`);
    }
    parts.push(`<rect x="${left}" y="${top}" width="${right - left}" height="${bottom - top}" fill="none" stroke="#333333"/>`);
    parts.push(`<text x="${(left + right) / 2}" y="${HEIGHT - 10}" text-anchor="middle" font-size="12" font-family="sans-serif">${escapeXml(xLabel)}</text>`);
    parts.push(`<text x="16" y="${(top + bottom) / 2}" text-anchor="middle" font-size="12" font-family="sans-serif" transform="rotate(-90 16 ${(top + bottom) / 2})">${escapeXml(yLabel)}</text>`);
    parts.push(...body);
    parts.push("</svg>");
    return parts.join("\n") + "\n";
}

export function legendEntry(index: number, label: string, color: string): string {
    const x = MARGIN.left + 10;
    const y = MARGIN.top + 14 + index * 16;
    return `<line x1="${x}" y1="${y - 4}" x2="${x + 18}" y2="${y - 4}" stroke="${color}" stroke-width="2"/>` +
        `<text x="${x + 24}" y="${y}" font-size="11" font-family="sans-serif">${escapeXml(label)}</text>`;
}

function escapeXml(s: string): string {
    return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
