"""SVG line charts of a results table.

Written by hand so that every variant is exactly one ``<polyline>``; BER and
MSE axes are log10-scaled with zeros clipped to a floor below the smallest
positive value.
"""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .harness import ResultsTable

COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]
W, H = 640, 440
MARGIN = dict(left=70, right=170, top=40, bottom=55)


def _log_range(values):
    pos = [v for v in values if v > 0]
    if not pos:
        return -6.0, 0.0, 1e-6
    lo, hi = np.floor(np.log10(min(pos))) - 1, np.ceil(np.log10(max(pos)))
    if hi <= lo:
        hi = lo + 1
    return float(lo), float(hi), 10.0**lo


def line_chart(series, title, xlabel, ylabel, log_y=True) -> str:
    """``series`` is a list of (label, xs, ys). Returns the SVG document."""
    all_x = [x for _, xs, _ in series for x in xs] or [0.0, 1.0]
    all_y = [y for _, _, ys in series for y in ys]
    x0, x1 = min(all_x), max(all_x)
    if x1 == x0:
        x1 = x0 + 1
    if log_y:
        y0, y1, floor = _log_range(all_y)
        ty = lambda v: np.log10(max(v, floor))
    else:
        y0, y1 = (min(all_y), max(all_y)) if all_y else (0.0, 1.0)
        if y1 == y0:
            y1 = y0 + 1
        ty = float
    pw = W - MARGIN["left"] - MARGIN["right"]
    ph = H - MARGIN["top"] - MARGIN["bottom"]
    px = lambda x: MARGIN["left"] + (x - x0) / (x1 - x0) * pw
    py = lambda y: MARGIN["top"] + (1 - (ty(y) - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="15" font-family="sans-serif">{escape(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    # y ticks
    if log_y:
        for e in range(int(y0), int(y1) + 1):
            y = MARGIN["top"] + (1 - (e - y0) / (y1 - y0)) * ph
            out.append(f'<line x1="{MARGIN["left"]}" y1="{y:.1f}" x2="{MARGIN["left"] + pw}" y2="{y:.1f}" stroke="#ddd"/>')
            out.append(f'<text x="{MARGIN["left"] - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="11" font-family="sans-serif">1e{e}</text>')
    else:
        for v in np.linspace(y0, y1, 5):
            y = py(v)
            out.append(f'<text x="{MARGIN["left"] - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="11" font-family="sans-serif">{v:.3g}</text>')
    # x ticks at the data points of the first series
    for x in sorted(set(all_x)):
        out.append(f'<text x="{px(x):.1f}" y="{MARGIN["top"] + ph + 16}" text-anchor="middle" font-size="11" font-family="sans-serif">{x:g}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{H - 12}" text-anchor="middle" font-size="13" font-family="sans-serif">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" font-size="13" font-family="sans-serif" '
        f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for i, (label, xs, ys) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"><title>{escape(label)}</title></polyline>')
        ly = MARGIN["top"] + 14 + 18 * i
        lx = MARGIN["left"] + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 28}" y="{ly + 4}" font-size="11" font-family="sans-serif">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _variants(table):
    seen = []
    for r in table.rows:
        if r.variant not in seen:
            seen.append(r.variant)
    return seen


def iteration_snr(table: ResultsTable, target: float = 5.0) -> float:
    snrs = sorted({r.snr_db for r in table.rows})
    return min(snrs, key=lambda s: (abs(s - target), s))


def emit_plots(table: ResultsTable, out_dir) -> list[Path]:
    """ber_vs_snr, ber_vs_iter, mse_vs_snr and mse_vs_iter as SVG files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not table.rows:
        charts = {name: line_chart([], name, "", "") for name in ("ber_vs_snr", "ber_vs_iter", "mse_vs_snr", "mse_vs_iter")}
    else:
        last = table.final_iteration()
        s_it = iteration_snr(table)
        charts = {}
        for metric, ylabel in (("ber", "BER"), ("mse", "channel MSE")):
            attr = "ber" if metric == "ber" else "channel_mse"
            vs_snr, vs_iter = [], []
            for v in _variants(table):
                rows = sorted(table.select(variant=v, iteration=last), key=lambda r: r.snr_db)
                vs_snr.append((v, [r.snr_db for r in rows], [getattr(r, attr) for r in rows]))
                rows = sorted(table.select(variant=v, snr_db=s_it), key=lambda r: r.iteration)
                vs_iter.append((v, [r.iteration for r in rows], [getattr(r, attr) for r in rows]))
            charts[f"{metric}_vs_snr"] = line_chart(vs_snr, f"{ylabel} vs SNR (iteration {last})", "SNR per receive antenna [dB]", ylabel)
            charts[f"{metric}_vs_iter"] = line_chart(vs_iter, f"{ylabel} vs iteration (SNR {s_it:g} dB)", "iteration", ylabel)
    paths = []
    for name, svg in charts.items():
        p = out / f"{name}.svg"
        try:
            p.write_text(svg)
        except OSError as exc:
            raise OSError(f"cannot write plot {p}: {exc}") from exc
        paths.append(p)
    return paths
