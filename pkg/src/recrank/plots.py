"""Plot data documents and minimal static SVG renderers.

The JSON documents carry everything needed to redraw a figure; the SVG
output is presentational only and written without any plotting library.
"""
from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

from .aggregation import PerformanceProfile
from .stability import StabilityReport
from .stats import CdDiagramData

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939")


def cd_plot_doc(cd: CdDiagramData) -> dict:
    return {
        "methods": list(cd.methods),
        "mean_ranks": list(cd.mean_ranks),
        "cliques": {kind: [list(c) for c in cliques] for kind, cliques in cd.cliques.items()},
    }


def dm_plot_doc(profile: PerformanceProfile) -> dict:
    return {
        "beta_hat": profile.beta_hat,
        "methods": [
            {"method": m, "curve": [list(p) for p in profile.curve(i)],
             "raw_area": profile.raw_areas[i], "normalized_area": profile.normalized_areas[i]}
            for i, m in enumerate(profile.methods)
        ],
    }


def stability_plot_doc(reports: Sequence[StabilityReport]) -> dict:
    return {"series": [r.to_doc() for r in reports]}


def _svg(width: int, height: int, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>',
                      *body, "</svg>"]) + "\n"


def cd_svg(cd: CdDiagramData, width: int = 640) -> str:
    """Critical-difference diagram: rank axis, method labels, clique bars.

    Wilcoxon cliques are solid bars, Bayesian cliques dashed.
    """
    m = len(cd.methods)
    margin = 60
    axis_y = 50
    lo, hi = 1.0, float(max(m, 2))
    half = (m + 1) // 2
    height = axis_y + 40 + 22 * half + 14 * sum(len(c) for c in cd.cliques.values()) + 20

    def x_of(rank: float) -> float:
        return margin + (rank - lo) / (hi - lo) * (width - 2 * margin)

    body = [f'<line x1="{x_of(lo):.2f}" y1="{axis_y}" x2="{x_of(hi):.2f}" y2="{axis_y}" '
            'stroke="black"/>']
    for r in range(1, int(hi) + 1):
        x = x_of(r)
        body.append(f'<line x1="{x:.2f}" y1="{axis_y - 5}" x2="{x:.2f}" y2="{axis_y}" '
                    'stroke="black"/>')
        body.append(f'<text x="{x:.2f}" y="{axis_y - 10}" text-anchor="middle">{r}</text>')
    label_top = axis_y + 30
    for pos, (method, rank) in enumerate(zip(cd.methods, cd.mean_ranks)):
        x = x_of(rank)
        left_side = pos < half
        row = pos if left_side else m - 1 - pos
        y = label_top + 22 * row
        end_x = margin - 10 if left_side else width - margin + 10
        anchor = "end" if left_side else "start"
        body.append(f'<polyline points="{x:.2f},{axis_y} {x:.2f},{y} {end_x:.2f},{y}" '
                    'fill="none" stroke="black"/>')
        tx = end_x - 4 if left_side else end_x + 4
        body.append(f'<text x="{tx:.2f}" y="{y + 4}" text-anchor="{anchor}">'
                    f'{escape(method)} ({rank:.3f})</text>')
    y = label_top + 22 * half + 10
    for kind, cliques in cd.cliques.items():
        dash = ' stroke-dasharray="6,4"' if kind == "bayesian" else ""
        for clique in cliques:
            ranks = [cd.mean_ranks[cd.methods.index(c)] for c in clique]
            body.append(f'<line x1="{x_of(min(ranks)) - 3:.2f}" y1="{y}" '
                        f'x2="{x_of(max(ranks)) + 3:.2f}" y2="{y}" stroke="black" '
                        f'stroke-width="4"{dash}><title>{escape(kind)}</title></line>')
            y += 14
    return _svg(width, int(max(height, y + 10)), body)


def dm_svg(profile: PerformanceProfile, width: int = 640, height: int = 400) -> str:
    """Performance-profile step curves on [1, beta_hat] as polylines with a legend."""
    margin_l, margin_r, margin_t, margin_b = 50, 160, 20, 40
    lo, hi = 1.0, max(profile.beta_hat, 1.0 + 1e-9)

    def px(beta: float, p: float) -> tuple[float, float]:
        x = margin_l + (beta - lo) / (hi - lo) * (width - margin_l - margin_r)
        y = margin_t + (1.0 - p) * (height - margin_t - margin_b)
        return x, y

    x0, y0 = px(lo, 0.0)
    x1, y1 = px(hi, 1.0)
    body = [f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y0:.2f}" stroke="black"/>',
            f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x0:.2f}" y2="{y1:.2f}" stroke="black"/>',
            f'<text x="{(x0 + x1) / 2:.2f}" y="{height - 8}" text-anchor="middle">beta</text>']
    for tick in (0.0, 0.5, 1.0):
        _, ty = px(lo, tick)
        body.append(f'<text x="{x0 - 6:.2f}" y="{ty + 4:.2f}" text-anchor="end">{tick:g}</text>')
    for i, method in enumerate(profile.methods):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join("{:.2f},{:.2f}".format(*px(b, p)) for b, p in profile.curve(i))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = margin_t + 16 * i + 8
        lx = width - margin_r + 12
        body.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" '
                    'stroke-width="2"/>')
        body.append(f'<text x="{lx + 22}" y="{ly + 4}">{escape(method)} '
                    f'({profile.normalized_areas[i]:.3f})</text>')
    return _svg(width, height, body)
