"""Deterministic SVG rendering of planar flows.

Byte-identical output for identical input: fixed float formatting, element
order following the stored vertex/edge order, no timestamps.  Terminals are
filled circles of radius 2 viewBox units, branching points radius 1, and
edge stroke widths are proportional to c(|mass|) normalized so the widest
edge is 3 units.
"""

from __future__ import annotations

import numpy as np

from .costs import CostModel
from .errors import InputError
from .flows import KIND_TERMINAL, Flow

_EDGE_COLOR = "#1f6fb5"
_TERMINAL_COLOR = "#c8321e"
_BRANCH_COLOR = "#2a2a2a"


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def render_svg(flow: Flow, cost: CostModel) -> str:
    if flow.dimension != 2:
        raise InputError(f"SVG rendering supports d = 2 only, got d = {flow.dimension}")
    pts = np.array([v.point for v in flow.vertices], dtype=float)
    pts[:, 1] = -pts[:, 1]  # math orientation: y grows upward
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    extent = float(max((hi - lo).max(), 1e-9))
    margin = 0.05 * extent
    view = (lo[0] - margin, lo[1] - margin,
            (hi[0] - lo[0]) + 2 * margin, (hi[1] - lo[1]) + 2 * margin)
    # radii/strokes are specified in viewBox units of the unit-extent frame;
    # scale them to the actual extent so proportions stay fixed
    unit = extent / 100.0
    widths = {}
    if flow.edges:
        costs = {(e.u, e.v): float(cost.evaluate(abs(e.mass))) for e in flow.edges}
        peak = max(costs.values())
        widths = {k: 3.0 * unit * c / peak for k, c in costs.items()}
    index = {v.id: i for i, v in enumerate(flow.vertices)}
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{_fmt(view[0])} {_fmt(view[1])} '
        f'{_fmt(view[2])} {_fmt(view[3])}">',
    ]
    for e in flow.edges:
        a = pts[index[e.u]]
        b = pts[index[e.v]]
        lines.append(
            f'<line x1="{_fmt(a[0])}" y1="{_fmt(a[1])}" x2="{_fmt(b[0])}" y2="{_fmt(b[1])}" '
            f'stroke="{_EDGE_COLOR}" stroke-width="{_fmt(widths[(e.u, e.v)])}" '
            f'stroke-linecap="round"/>')
    for v in flow.vertices:
        x, y = pts[index[v.id]]
        if v.kind == KIND_TERMINAL:
            r, fill = 2.0 * unit, _TERMINAL_COLOR
        else:
            r, fill = 1.0 * unit, _BRANCH_COLOR
        lines.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}" fill="{fill}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
