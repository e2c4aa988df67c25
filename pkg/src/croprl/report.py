"""Plain-text summaries and dependency-free SVG charts for run outputs."""

from __future__ import annotations

import csv
import math
from pathlib import Path

_W, _H = 640, 400
_ML, _MR, _MT, _MB = 70, 20, 30, 55


def _svg_header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="18" text-anchor="middle" font-size="14">{title}</text>',
    ]


def _nice_ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 0.5 * step:
        ticks.append(t)
        t += step
    return ticks


class _Axes:
    def __init__(self, xlo, xhi, ylo, yhi):
        if xhi == xlo:
            xhi = xlo + 1.0
        if yhi == ylo:
            yhi = ylo + 1.0
        pad = 0.05 * (yhi - ylo)
        self.xlo, self.xhi = xlo, xhi
        self.ylo, self.yhi = ylo - pad, yhi + pad

    def x(self, v):
        return _ML + (v - self.xlo) / (self.xhi - self.xlo) * (_W - _ML - _MR)

    def y(self, v):
        return _H - _MB - (v - self.ylo) / (self.yhi - self.ylo) * (_H - _MT - _MB)

    def frame(self, xlabel, ylabel):
        parts = [f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
                 f'height="{_H - _MT - _MB}" fill="none" stroke="#444"/>']
        for t in _nice_ticks(self.xlo, self.xhi):
            if self.xlo <= t <= self.xhi:
                parts.append(f'<line x1="{self.x(t):.1f}" y1="{_H - _MB}" '
                             f'x2="{self.x(t):.1f}" y2="{_H - _MB + 4}" stroke="#444"/>')
                parts.append(f'<text x="{self.x(t):.1f}" y="{_H - _MB + 17}" '
                             f'text-anchor="middle">{t:g}</text>')
        for t in _nice_ticks(self.ylo, self.yhi):
            if self.ylo <= t <= self.yhi:
                parts.append(f'<line x1="{_ML - 4}" y1="{self.y(t):.1f}" '
                             f'x2="{_ML}" y2="{self.y(t):.1f}" stroke="#444"/>')
                parts.append(f'<text x="{_ML - 7}" y="{self.y(t) + 4:.1f}" '
                             f'text-anchor="end">{t:g}</text>')
        parts.append(f'<text x="{(_ML + _W - _MR) / 2:.1f}" y="{_H - 12}" '
                     f'text-anchor="middle">{xlabel}</text>')
        parts.append(f'<text x="16" y="{(_MT + _H - _MB) / 2:.1f}" text-anchor="middle" '
                     f'transform="rotate(-90 16 {(_MT + _H - _MB) / 2:.1f})">{ylabel}</text>')
        return parts


def write_sweep_svg(rows, path, title="Mean RF1 vs masking ratio") -> None:
    """Line chart of mean RF1 over alpha with +-1 std whiskers."""
    xs = [r.alpha for r in rows]
    ys = [r.mean_rf1 for r in rows]
    sd = [r.std_rf1 for r in rows]
    ax = _Axes(min(xs), max(xs), min(y - s for y, s in zip(ys, sd)),
               max(y + s for y, s in zip(ys, sd)))
    parts = _svg_header(title) + ax.frame("masking ratio alpha", "mean RF1")
    pts = " ".join(f"{ax.x(x):.1f},{ax.y(y):.1f}" for x, y in zip(xs, ys))
    for x, y, s in zip(xs, ys, sd):
        parts.append(f'<line x1="{ax.x(x):.1f}" y1="{ax.y(y - s):.1f}" '
                     f'x2="{ax.x(x):.1f}" y2="{ax.y(y + s):.1f}" stroke="#9bb" />')
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#06c" stroke-width="2"/>')
    for x, y in zip(xs, ys):
        parts.append(f'<circle cx="{ax.x(x):.1f}" cy="{ax.y(y):.1f}" r="3" fill="#06c"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def write_noise_svg(named_results, path, title="RF1 decrease rate under noise") -> None:
    """Bar chart of decrease rates (%), one bar per noise cell."""
    names = [name for name, _ in named_results]
    vals = [res.decrease_rate_pct for _, res in named_results]
    finite = [v for v in vals if math.isfinite(v)]
    hi = max(finite + [1.0])
    lo = min(finite + [0.0])
    ax = _Axes(0.0, float(len(names)), lo, hi)
    parts = _svg_header(title) + ax.frame("", "decrease rate (%)")
    width = (_W - _ML - _MR) / max(1, len(names))
    for i, (name, v) in enumerate(zip(names, vals)):
        if not math.isfinite(v):
            continue
        x0 = ax.x(i + 0.15)
        x1 = ax.x(i + 0.85)
        y0 = ax.y(max(0.0, v))
        y1 = ax.y(min(0.0, v))
        parts.append(f'<rect x="{x0:.1f}" y="{y0:.1f}" width="{x1 - x0:.1f}" '
                     f'height="{max(0.5, y1 - y0):.1f}" fill="#c60"/>')
        cx = ax.x(i + 0.5)
        parts.append(f'<text x="{cx:.1f}" y="{_H - _MB + 17}" text-anchor="end" '
                     f'transform="rotate(-35 {cx:.1f} {_H - _MB + 17})" '
                     f'font-size="10">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def _is_eval_csv(path: Path) -> bool:
    try:
        with path.open() as fh:
            header = fh.readline().strip().split(",")
    except OSError:
        return False
    return header[:6] == ["run_id", "seed", "yield_kg_ha", "n_total", "w_total",
                          "leach_total"]


def summarize_eval_dir(in_dir, out_path) -> str:
    """One table row per eval CSV found, mirroring the familiar
    N / irrigation / yield / RF1..RF4 column layout."""
    in_dir = Path(in_dir)
    rows = []
    for path in sorted(in_dir.glob("*.csv")):
        if not _is_eval_csv(path):
            continue
        with path.open() as fh:
            recs = list(csv.DictReader(fh))
        if not recs:
            continue
        mean = lambda key: sum(float(r[key]) for r in recs) / len(recs)
        rows.append((path.stem, mean("n_total"), mean("w_total"), mean("yield_kg_ha"),
                     mean("rf1"), mean("rf2"), mean("rf3"), mean("rf4"), len(recs)))
    header = (f"{'case':<28} {'N Input':>9} {'Irrig.':>9} {'Yield':>9} "
              f"{'RF1':>9} {'RF2':>9} {'RF3':>9} {'RF4':>9} {'runs':>5}")
    units = (f"{'':<28} {'(kg/ha)':>9} {'(L/m2)':>9} {'(kg/ha)':>9} "
             f"{'':>9} {'':>9} {'':>9} {'':>9} {'':>5}")
    lines = [header, units, "-" * len(header)]
    for r in rows:
        lines.append(f"{r[0]:<28} {r[1]:>9.1f} {r[2]:>9.1f} {r[3]:>9.1f} "
                     f"{r[4]:>9.1f} {r[5]:>9.1f} {r[6]:>9.1f} {r[7]:>9.1f} {r[8]:>5d}")
    text = "\n".join(lines) + "\n"
    Path(out_path).write_text(text)
    return text
