/** Small numeric helpers for series aggregation. */

export function quantile(sorted: number[], q: number): number {
    if (sorted.length === 0) throw new Error("quantile of empty array");
    const pos = (sorted.length - 1) * q;
    const lo = Math.floor(pos);
    const hi = Math.ceil(pos);
    if (lo === hi) return sorted[lo];
    return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo);
}

export function median(values: number[]): number {
    return quantile([...values].sort((a, b) => a - b), 0.5);
}

export function iqrBand(values: number[]): { lo: number; mid: number; hi: number } {
    const sorted = [...values].sort((a, b) => a - b);
    return {
        lo: quantile(sorted, 0.25),
        mid: quantile(sorted, 0.5),
        hi: quantile(sorted, 0.75),
    };
}

/**
 * Centered moving average with the first point kept unchanged; the window
 * shrinks symmetrically near the edges.
 */
export function smoothCentered(values: number[], window: number): number[] {
    if (window <= 1) return [...values];
    const half = Math.floor(window / 2);
    const out = values.map((_, i) => {
        if (i === 0) return values[0];
        const lo = Math.max(0, i - half);
        const hi = Math.min(values.length - 1, i + half);
        let sum = 0;
        for (let j = lo; j <= hi; j++) sum += values[j];
        return sum / (hi - lo + 1);
    });
    return out;
}
