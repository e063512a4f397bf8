"""Sampling, CSV schemas, SVG rendering, histograms and edge-ratio curves."""
from __future__ import annotations

import csv
import os
from typing import Iterable, Sequence
from xml.sax.saxutils import quoteattr

import numpy as np

from .exceptions import DegenerateRange
from .geometry import BoxDomain, Diagram, SiteSet
from .penalties import j1_terms, j2_terms

GREEN = "#4caf50"
WHITE = "#ffffff"
# shade 1 (darkest) .. shade 7 (lightest)
BLUES = ("#08306b", "#08519c", "#2171b5", "#4292c6", "#6baed6", "#9ecae1", "#c6dbef")
J1_COLOR_THRESHOLD = 1e-3
MIN_EDGE_WHITE = 0.8


def sample_uniform_sites(kappa0: int, seed: int | None = None) -> SiteSet:
    """i.i.d. uniform sites in ``[0, sqrt(kappa0)]^2`` from numpy's PCG64 generator."""
    if int(kappa0) < 1:
        raise ValueError(f"kappa0 must be at least 1, got {kappa0!r}")
    domain = BoxDomain.for_sites(int(kappa0))
    rng = np.random.default_rng(seed)
    return SiteSet(rng.uniform(0.0, domain.side, size=(int(kappa0), 2)), domain)


# -- CSV -------------------------------------------------------------------------


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def write_sites_csv(path, sites: SiteSet) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "x", "y"])
        for i, (x, y) in enumerate(sites.points):
            w.writerow([i, _fmt(x), _fmt(y)])


def read_sites_csv(path, side: float | None = None) -> SiteSet:
    """Read an ``i,x,y`` file; the box side defaults to ``sqrt(#rows)``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no sites")
    try:
        rows.sort(key=lambda r: int(r["i"]))
        pts = np.array([[float(r["x"]), float(r["y"])] for r in rows])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: expected columns i,x,y ({exc})") from None
    return SiteSet.from_points(pts, side=side)


def cell_rows(diagram: Diagram, c2: float = 0.5) -> list[dict]:
    j1 = j1_terms(diagram)
    j2 = j2_terms(diagram, c2)
    return [
        {
            "i": i,
            "area": diagram.areas[i],
            "j1_i": j1[i],
            "n_edges": int(diagram.n_edges[i]),
            "perimeter": diagram.perimeters[i],
            "min_edge_ratio": diagram.min_edge_ratios[i],
            "j2_i": j2[i],
        }
        for i in range(diagram.kappa0)
    ]


CELL_COLUMNS = ("i", "area", "j1_i", "n_edges", "perimeter", "min_edge_ratio", "j2_i")


def write_rows(path, rows: Sequence[dict], columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) if isinstance(r[c], (float, np.floating)) else r[c]
                        for c in columns])


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- histograms and curves -------------------------------------------------------


def area_histogram(values: Iterable[float], bins: int = 100, strict: bool = False) -> list[tuple]:
    """Equal-width bins over ``[min, max]`` (last bin closed) with value proportions.

    A collapsed range yields one bin holding everything, unless ``strict``.
    """
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        raise ValueError("values must be nonempty")
    if int(bins) < 1:
        raise ValueError("bins must be at least 1")
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        if strict:
            raise DegenerateRange(f"all values equal {lo}")
        return [(lo, hi, 1.0)]
    counts, edges = np.histogram(v, bins=int(bins), range=(lo, hi))
    props = counts / v.size
    return [(float(edges[b]), float(edges[b + 1]), float(props[b])) for b in range(int(bins))]


def edge_ratio_curve(diagram: Diagram, grid: Iterable[float]) -> list[tuple]:
    """Share of cells whose every edge is at least ``c`` times the cell's mean edge."""
    r = diagram.min_edge_ratios
    return [(float(c), float(np.mean(r >= c))) for c in grid]


DEFAULT_CURVE_GRID = tuple(np.round(np.linspace(0.0, 1.0, 101), 2))


# -- SVG -------------------------------------------------------------------------


def min_edge_shade(ratio: float, white_above: float = MIN_EDGE_WHITE) -> int:
    """0 for white, else the blue shade 1 (darkest) .. 7."""
    if ratio >= min(white_above, MIN_EDGE_WHITE):
        return 0
    return int(min(max(np.floor(ratio * 10.0), 1), 7))


def cell_fill(diagram: Diagram, mode: str, white_above: float = MIN_EDGE_WHITE):
    """Per-cell ``(class, color)`` for a rendering mode."""
    n = diagram.kappa0
    if mode == "plain":
        return [("plain", "none")] * n
    if mode == "equal-area":
        j1 = j1_terms(diagram)
        return [("green", GREEN) if abs(t) > J1_COLOR_THRESHOLD else ("white", WHITE) for t in j1]
    if mode == "min-edge":
        out = []
        for r in diagram.min_edge_ratios:
            b = min_edge_shade(r, white_above)
            out.append(("white", WHITE) if b == 0 else (f"shade-{b}", BLUES[b - 1]))
        return out
    raise ValueError(f"unknown rendering mode {mode!r}")


def render_svg(diagram: Diagram, mode: str = "plain", white_above: float = MIN_EDGE_WHITE,
               show_sites: bool = False) -> str:
    L = diagram.domain.side
    fills = cell_fill(diagram, mode, white_above)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="0 0 {L:.17g} {L:.17g}" '
        f'width="600" height="600">',
        f'<g transform="translate(0,{L:.17g}) scale(1,-1)" stroke="#000000" '
        f'stroke-width="{L / 600:.6g}">',
    ]
    for i in range(diagram.kappa0):
        pts = " ".join(f"{x:.10g},{y:.10g}" for x, y in diagram.polygon(i))
        cls, color = fills[i]
        out.append(f'<polygon class={quoteattr("cell " + cls)} data-i="{i}" '
                   f'fill="{color}" points="{pts}"/>')
    if show_sites:
        r = L / 300
        for x, y in diagram.sites.points:
            out.append(f'<circle class="site" cx="{x:.10g}" cy="{y:.10g}" r="{r:.6g}" '
                       f'fill="#d62728" stroke="none"/>')
    out += ["</g>", "</svg>"]
    return "\n".join(out) + "\n"


def write_text(path, text: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)
