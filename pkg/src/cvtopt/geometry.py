"""Bounded Voronoi diagrams in a square box.

Cells are built by half-plane clipping of the box polygon against the
bisectors of nearby sites.  Internally a diagram is a flat, CSR-style set
of per-cell vertex slots; :meth:`Diagram.cell` returns a structured view
with vertex provenance for callers that want it.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Union

import numpy as np
from scipy.spatial import cKDTree

from . import _clip
from .exceptions import DegenerateInput

#: relative tolerance for coincidence and degeneracy tests (scaled by the side length)
EPS_DEG = 1e-12

BOTTOM, RIGHT, TOP, LEFT = range(4)
SIDE_NAMES = ("bottom", "right", "top", "left")

# outward unit normals of the four sides
_NORMALS = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])

_MAX_VERTS = 64
_ALL_PAIRS_MAX = 64
_INITIAL_CANDIDATES = 16


def side_label(side: int) -> int:
    """Edge label used for box side ``side`` (0..3)."""
    return -1 - side


def label_side(label):
    return -1 - label


@dataclass(frozen=True)
class BoxDomain:
    """The square ``[0, side]^2`` with its four affine boundary pieces."""

    side: float

    def __post_init__(self):
        if not np.isfinite(self.side) or self.side <= 0:
            raise ValueError(f"side must be a positive finite number, got {self.side!r}")

    @classmethod
    def for_sites(cls, kappa0: int) -> "BoxDomain":
        return cls(float(np.sqrt(kappa0)))

    @property
    def area(self) -> float:
        return self.side * self.side

    @property
    def center(self) -> np.ndarray:
        return np.array([0.5 * self.side, 0.5 * self.side])

    @property
    def corners(self) -> np.ndarray:
        L = self.side
        return np.array([[0.0, 0.0], [L, 0.0], [L, L], [0.0, L]])

    @property
    def eps(self) -> float:
        return EPS_DEG * self.side

    def phi(self, side: int, x) -> np.ndarray:
        """Affine level-set function of a side: zero on it, negative inside the box."""
        x = np.asarray(x, dtype=float)
        L = self.side
        if side == BOTTOM:
            return -x[..., 1]
        if side == RIGHT:
            return x[..., 0] - L
        if side == TOP:
            return x[..., 1] - L
        if side == LEFT:
            return -x[..., 0]
        raise ValueError(f"unknown side {side}")

    @staticmethod
    def normal(side: int) -> np.ndarray:
        return _NORMALS[side].copy()

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= -tol) & (x <= self.side + tol), axis=-1)


@dataclass(frozen=True, eq=False)
class SiteSet:
    """Generator positions inside a box domain.

    ``points`` has shape ``(kappa0, 2)``; ``coords`` is the flat
    ``(x0, y0, x1, y1, ...)`` view used by the optimizer.
    """

    points: np.ndarray
    domain: BoxDomain

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise ValueError(f"points must have shape (kappa0, 2), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("site coordinates must be finite")
        if not np.all(self.domain.contains(pts)):
            raise ValueError("every site must lie in the closed box")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_points(cls, points, side: float | None = None) -> "SiteSet":
        points = np.asarray(points, dtype=float)
        if side is None:
            side = float(np.sqrt(len(points)))
        return cls(points, BoxDomain(side))

    @classmethod
    def from_coords(cls, coords, domain: BoxDomain) -> "SiteSet":
        return cls(np.asarray(coords, dtype=float).reshape(-1, 2), domain)

    @property
    def kappa0(self) -> int:
        return self.points.shape[0]

    @property
    def coords(self) -> np.ndarray:
        return self.points.reshape(-1)

    def __len__(self):
        return self.kappa0


# -- provenance ------------------------------------------------------------


@dataclass(frozen=True)
class Interior:
    """Vertex shared by cells ``i, j, k`` (counterclockwise around it)."""

    i: int
    j: int
    k: int

    def canonical(self) -> "Interior":
        t = (self.i, self.j, self.k)
        r = t.index(min(t))
        return Interior(*(t[r:] + t[:r]))


@dataclass(frozen=True)
class Boundary:
    """Vertex where the bisector of sites ``i, j`` meets box side ``side``."""

    i: int
    j: int
    side: int

    def canonical(self) -> "Boundary":
        return Boundary(min(self.i, self.j), max(self.i, self.j), self.side)


@dataclass(frozen=True)
class Corner:
    side1: int
    side2: int

    def canonical(self) -> "Corner":
        return Corner(min(self.side1, self.side2), max(self.side1, self.side2))


VertexProvenance = Union[Interior, Boundary, Corner]


@dataclass(frozen=True)
class InteriorEdge:
    neighbor: int


@dataclass(frozen=True)
class BoundaryEdge:
    side: int


@dataclass(frozen=True)
class Cell:
    """Counterclockwise polygon of one site with vertex and edge provenance.

    ``edges[e] = (v, w, kind)`` runs from vertex ``v`` to its counterclockwise
    successor ``w``.
    """

    site: int
    vertices: list
    edges: list

    @property
    def polygon(self) -> np.ndarray:
        return np.array([v for v, _ in self.vertices])


class CellMeasures(NamedTuple):
    area: float
    centroid: np.ndarray
    perimeter: float
    edge_lengths: np.ndarray


# vertex kinds per slot
KIND_INTERIOR, KIND_BOUNDARY, KIND_CORNER = 0, 1, 2


class Diagram:
    """Bounded Voronoi diagram stored as flat per-cell vertex slots.

    Slot ``s`` belongs to cell ``owner[s]``; the slots of cell ``i`` are
    ``ptr[i]:ptr[i+1]`` in counterclockwise order.  ``labels[s]`` tags the
    edge from slot ``s`` to ``nxt[s]``: a neighbour site (>= 0) or a box
    side (``-1 - side``).
    """

    def __init__(self, sites: SiteSet, ptr: np.ndarray, xy: np.ndarray, labels: np.ndarray):
        self.sites = sites
        self.domain = sites.domain
        self.ptr = ptr
        self.xy = xy
        self.labels = labels
        n_slots = len(labels)
        self.owner = np.repeat(np.arange(sites.kappa0), np.diff(ptr))
        idx = np.arange(n_slots)
        start = ptr[self.owner]
        end = ptr[self.owner + 1]
        self.nxt = np.where(idx + 1 == end, start, idx + 1)
        self.prv = np.where(idx == start, end - 1, idx - 1)
        for arr in (self.ptr, self.xy, self.labels, self.owner, self.nxt, self.prv):
            arr.setflags(write=False)

    @property
    def kappa0(self) -> int:
        return self.sites.kappa0

    @property
    def n_slots(self) -> int:
        return len(self.labels)

    @property
    def total_area(self) -> float:
        return self.domain.area

    # -- per-slot provenance ------------------------------------------------

    @cached_property
    def incoming(self) -> np.ndarray:
        """Label of the edge arriving at each slot."""
        return self.labels[self.prv]

    @cached_property
    def kind(self) -> np.ndarray:
        a = self.incoming >= 0
        b = self.labels >= 0
        out = np.full(self.n_slots, KIND_BOUNDARY)
        out[a & b] = KIND_INTERIOR
        out[~a & ~b] = KIND_CORNER
        return out

    # -- measures -------------------------------------------------------------

    @cached_property
    def edge_vectors(self) -> np.ndarray:
        return self.xy[self.nxt] - self.xy

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return np.hypot(self.edge_vectors[:, 0], self.edge_vectors[:, 1])

    @cached_property
    def _triangle_det(self) -> np.ndarray:
        # signed det(v - a, w - a) per slot
        a = self.sites.points[self.owner]
        v = self.xy - a
        w = self.xy[self.nxt] - a
        return v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]

    @cached_property
    def areas(self) -> np.ndarray:
        return 0.5 * np.bincount(self.owner, self._triangle_det, minlength=self.kappa0)

    @cached_property
    def centroids(self) -> np.ndarray:
        a = self.sites.points[self.owner]
        mid = (self.xy + self.xy[self.nxt] - 2.0 * a) / 3.0
        J = self._triangle_det
        cx = np.bincount(self.owner, J * mid[:, 0], minlength=self.kappa0)
        cy = np.bincount(self.owner, J * mid[:, 1], minlength=self.kappa0)
        twice = 2.0 * self.areas
        return self.sites.points + np.column_stack([cx / twice, cy / twice])

    @cached_property
    def perimeters(self) -> np.ndarray:
        return np.bincount(self.owner, self.edge_lengths, minlength=self.kappa0)

    @cached_property
    def n_edges(self) -> np.ndarray:
        return np.diff(self.ptr)

    @cached_property
    def min_edge_ratios(self) -> np.ndarray:
        """Smallest edge over the mean edge length of each cell."""
        mins = np.minimum.reduceat(self.edge_lengths, self.ptr[:-1])
        return mins * self.n_edges / self.perimeters

    # -- structured views -----------------------------------------------------

    def polygon(self, i: int) -> np.ndarray:
        return np.array(self.xy[self.ptr[i]:self.ptr[i + 1]])

    def provenance(self, s: int) -> VertexProvenance:
        """Provenance of slot ``s`` with the owning cell listed first."""
        i = int(self.owner[s])
        p = int(self.incoming[s])
        q = int(self.labels[s])
        if p >= 0 and q >= 0:
            return Interior(i, p, q)
        if p >= 0:
            return Boundary(i, p, int(label_side(q)))
        if q >= 0:
            return Boundary(i, q, int(label_side(p)))
        return Corner(int(label_side(p)), int(label_side(q)))

    def cell(self, i: int) -> Cell:
        lo, hi = self.ptr[i], self.ptr[i + 1]
        n = hi - lo
        verts = [(self.xy[s].copy(), self.provenance(s)) for s in range(lo, hi)]
        edges = []
        for e, s in enumerate(range(lo, hi)):
            lab = int(self.labels[s])
            kind = InteriorEdge(lab) if lab >= 0 else BoundaryEdge(int(label_side(lab)))
            edges.append((e, (e + 1) % n, kind))
        return Cell(int(i), verts, edges)

    @property
    def cells(self) -> list:
        return [self.cell(i) for i in range(self.kappa0)]

    def locate(self, points) -> np.ndarray:
        """Index of the cell polygon containing each query point (-1 if none).

        Pure point-in-convex-polygon test; it never consults the sites.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(len(pts), -1, dtype=np.int64)
        tol = self.domain.eps
        for i in range(self.kappa0):
            poly = self.polygon(i)
            lo = poly.min(axis=0) - tol
            hi = poly.max(axis=0) + tol
            sel = np.flatnonzero(np.all((pts >= lo) & (pts <= hi), axis=1) & (out < 0))
            if sel.size == 0:
                continue
            e = np.roll(poly, -1, axis=0) - poly
            rel = pts[sel, None, :] - poly[None, :, :]
            cross = e[None, :, 0] * rel[..., 1] - e[None, :, 1] * rel[..., 0]
            inside = np.all(cross >= -tol * np.hypot(e[:, 0], e[:, 1])[None, :], axis=1)
            out[sel[inside]] = i
        return out


# -- construction -------------------------------------------------------------


def _circumcenters(a, b, c):
    bx, by = (b - a).T
    cx, cy = (c - a).T
    d = 2.0 * (bx * cy - by * cx)
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    with np.errstate(divide="ignore", invalid="ignore"):
        ux = (cy * b2 - by * c2) / d
        uy = (bx * c2 - cx * b2) / d
    return a + np.column_stack([ux, uy])


def _bisector_side_points(a, b, sides, L):
    m = 0.5 * (a + b)
    d = b - a
    out = np.empty_like(m)
    const = np.where((sides == BOTTOM) | (sides == LEFT), 0.0, L)
    horiz = (sides == BOTTOM) | (sides == TOP)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_h = m[:, 0] - d[:, 1] * (const - m[:, 1]) / d[:, 0]
        y_v = m[:, 1] - d[:, 0] * (const - m[:, 0]) / d[:, 1]
    out[:, 0] = np.where(horiz, x_h, const)
    out[:, 1] = np.where(horiz, const, y_v)
    return out


_CORNER_OF = {
    frozenset((LEFT, BOTTOM)): 0,
    frozenset((BOTTOM, RIGHT)): 1,
    frozenset((RIGHT, TOP)): 2,
    frozenset((TOP, LEFT)): 3,
}


def _refine_vertices(pts, L, owner, inc, out, xy):
    """Recompute vertex coordinates from provenance; keep clipped values where ill-posed."""
    res = xy.copy()
    inner = (inc >= 0) & (out >= 0)
    if np.any(inner):
        cc = _circumcenters(pts[owner[inner]], pts[inc[inner]], pts[out[inner]])
        res[inner] = cc
    bnd = (inc >= 0) ^ (out >= 0)
    if np.any(bnd):
        other = np.where(inc[bnd] >= 0, inc[bnd], out[bnd])
        sides = label_side(np.where(inc[bnd] < 0, inc[bnd], out[bnd]))
        res[bnd] = _bisector_side_points(pts[owner[bnd]], pts[other], sides, L)
    corner = (inc < 0) & (out < 0)
    if np.any(corner):
        corners = np.array([[0.0, 0.0], [L, 0.0], [L, L], [0.0, L]])
        s1 = label_side(inc[corner])
        s2 = label_side(out[corner])
        idx = [_CORNER_OF.get(frozenset((int(p), int(q))), -1) for p, q in zip(s1, s2)]
        idx = np.array(idx)
        ok = idx >= 0
        sub = res[corner]
        sub[ok] = corners[idx[ok]]
        res[corner] = sub
    bad = ~np.all(np.isfinite(res), axis=1) | (np.abs(res - xy).max(axis=1) > 1e-6 * L)
    res[bad] = xy[bad]
    return res


def build_diagram(sites: SiteSet, parallel: bool = False) -> Diagram:
    """Clip the box against bisector half-planes to get every cell.

    Raises :class:`DegenerateInput` for coincident sites or cells that end
    up empty.  ``parallel`` splits the clipping across threads; the result
    does not depend on it.
    """
    pts = np.ascontiguousarray(sites.points)
    n = len(pts)
    L = sites.domain.side
    eps = sites.domain.eps
    tree = cKDTree(pts) if n > 1 else None
    out_xy = np.empty((n, _MAX_VERTS, 2))
    out_lab = np.empty((n, _MAX_VERTS), dtype=np.int64)
    out_cnt = np.zeros(n, dtype=np.int64)
    out_status = np.zeros(n, dtype=np.int64)

    todo = np.arange(n)
    k = n - 1 if n - 1 <= _ALL_PAIRS_MAX else _INITIAL_CANDIDATES
    while todo.size:
        complete = k >= n - 1
        if n == 1:
            cand = np.full((1, 1), -1, dtype=np.int64)
        else:
            dist, idx = tree.query(pts[todo], k=k + 1)
            dist = dist.reshape(len(todo), k + 1)
            idx = np.asarray(idx, dtype=np.int64).reshape(len(todo), k + 1)
            if np.min(dist[:, 1]) <= eps:
                i = int(todo[np.argmin(dist[:, 1])])
                raise DegenerateInput(f"site {i} coincides with another site")
            if np.all(idx[:, 0] == todo):
                cand = np.ascontiguousarray(idx[:, 1:])
            else:
                cand = np.empty((len(todo), k), dtype=np.int64)
                for r, i in enumerate(todo):
                    cand[r] = idx[r][idx[r] != i][:k]
        sub_xy = np.empty((len(todo), _MAX_VERTS, 2))
        sub_lab = np.empty((len(todo), _MAX_VERTS), dtype=np.int64)
        sub_cnt = np.zeros(len(todo), dtype=np.int64)
        sub_status = np.zeros(len(todo), dtype=np.int64)
        _run(pts, todo, L, cand, complete, eps, sub_xy, sub_lab, sub_cnt, sub_status,
             parallel)
        out_xy[todo] = sub_xy
        out_lab[todo] = sub_lab
        out_cnt[todo] = sub_cnt
        out_status[todo] = sub_status
        if np.any(sub_status == _clip.EMPTY) or np.any(sub_status == _clip.OVERFLOW):
            i = int(todo[np.flatnonzero(sub_status >= _clip.OVERFLOW)[0]])
            raise DegenerateInput(f"cell {i} could not be constructed")
        todo = todo[sub_status == _clip.NEED_MORE]
        k = min(2 * k, n - 1)

    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(out_cnt, out=ptr[1:])
    mask = np.arange(_MAX_VERTS)[None, :] < out_cnt[:, None]
    xy = out_xy[mask]
    labels = out_lab[mask]
    owner = np.repeat(np.arange(n), out_cnt)
    idx = np.arange(len(labels))
    start = ptr[owner]
    prv = np.where(idx == start, ptr[owner + 1] - 1, idx - 1)
    xy = _refine_vertices(pts, L, owner, labels[prv], labels, xy)
    return Diagram(sites, ptr, xy, labels)


def _run(pts, rows, L, cand, complete, eps, out_xy, out_lab, out_cnt, out_status, parallel):
    m = len(rows)
    if not parallel or m < 256:
        _clip.clip_cells(pts, rows, L, cand, complete, eps, out_xy, out_lab, out_cnt,
                         out_status, 0, m)
        return
    n_chunks = 8
    bounds = np.linspace(0, m, n_chunks + 1).astype(int)
    with ThreadPoolExecutor() as pool:
        futures = [
            pool.submit(_clip.clip_cells, pts, rows, L, cand, complete, eps,
                        out_xy, out_lab, out_cnt, out_status, int(lo), int(hi))
            for lo, hi in zip(bounds[:-1], bounds[1:])
        ]
        for f in futures:
            f.result()


# -- queries --------------------------------------------------------------------


def nearest_site(sites: SiteSet, x) -> np.ndarray | int:
    """Exhaustive nearest site; ties go to the lowest index."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    q = np.atleast_2d(x)
    d2 = ((q[:, None, :] - sites.points[None, :, :]) ** 2).sum(axis=-1)
    idx = np.argmin(d2, axis=1)
    return int(idx[0]) if single else idx


def polygon_measures(poly) -> CellMeasures:
    """Shoelace area, centroid, perimeter and edge lengths of a CCW polygon."""
    poly = np.asarray(poly, dtype=float)
    o = poly[0]
    v = poly - o
    w = np.roll(v, -1, axis=0)
    cross = v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]
    area = 0.5 * cross.sum()
    centroid = o + (cross[:, None] * (v + w)).sum(axis=0) / (6.0 * area)
    lengths = np.hypot(*(w - v).T)
    return CellMeasures(float(area), centroid, float(lengths.sum()), lengths)


def cell_measures(diagram: Diagram, i: int) -> CellMeasures:
    lo, hi = diagram.ptr[i], diagram.ptr[i + 1]
    return CellMeasures(
        float(diagram.areas[i]),
        diagram.centroids[i].copy(),
        float(diagram.perimeters[i]),
        np.array(diagram.edge_lengths[lo:hi]),
    )


# -- non-degeneracy report --------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    where: tuple
    value: float


@dataclass
class DegeneracyReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set:
        return {v.kind for v in self.violations}

    def __bool__(self):
        return bool(self.violations)

    def __len__(self):
        return len(self.violations)


def _perp_dot(u, v):
    # u^perp . v with perp the counterclockwise quarter turn
    return -u[..., 1] * v[..., 0] + u[..., 0] * v[..., 1]


def coincident_pairs(sites: SiteSet, tol: float) -> list:
    if sites.kappa0 < 2:
        return []
    tree = cKDTree(sites.points)
    return sorted(tree.query_pairs(tol))


def check_nondegeneracy(diagram: Diagram, sites: SiteSet | None = None,
                        tol: float = EPS_DEG) -> DegeneracyReport:
    """List every place where the non-degeneracy hypotheses fail within ``tol``.

    ``tol`` is relative: lengths compare against ``tol * L`` and site
    triangle determinants against ``tol * L**2``.
    """
    sites = diagram.sites if sites is None else sites
    L = sites.domain.side
    pts = sites.points
    report = DegeneracyReport()
    for i, j in coincident_pairs(sites, tol * L):
        report.violations.append(
            Violation("coincident_sites", (i, j), float(np.linalg.norm(pts[i] - pts[j]))))

    kind = diagram.kind
    own = diagram.owner
    inc = diagram.incoming
    out = diagram.labels

    inner = np.flatnonzero(kind == KIND_INTERIOR)
    if inner.size:
        ai, aj, ak = pts[own[inner]], pts[inc[inner]], pts[out[inner]]
        q = _perp_dot(aj - ai, ak - ai)
        seen = set()
        for s in inner[np.abs(q) < tol * L * L]:
            key = diagram.provenance(s).canonical()
            if key not in seen:
                seen.add(key)
                report.violations.append(Violation(
                    "interior_vertex", (key.i, key.j, key.k),
                    float(abs(_perp_dot(pts[key.j] - pts[key.i], pts[key.k] - pts[key.i])))))

    bnd = np.flatnonzero(kind == KIND_BOUNDARY)
    if bnd.size:
        other = np.where(inc[bnd] >= 0, inc[bnd], out[bnd])
        sides = label_side(np.where(inc[bnd] < 0, inc[bnd], out[bnd]))
        det = _perp_dot(pts[other] - pts[own[bnd]], _NORMALS[sides])
        corners = diagram.domain.corners
        dc = np.min(np.linalg.norm(diagram.xy[bnd, None, :] - corners[None], axis=-1), axis=1)
        seen_b, seen_c = set(), set()
        for r, s in enumerate(bnd):
            key = diagram.provenance(s).canonical()
            if abs(det[r]) < tol * L and key not in seen_b:
                seen_b.add(key)
                report.violations.append(
                    Violation("boundary_vertex", (key.i, key.j, key.side), float(abs(det[r]))))
            if dc[r] < tol * L and key not in seen_c:
                seen_c.add(key)
                report.violations.append(
                    Violation("corner_vertex", (key.i, key.j, key.side), float(dc[r])))

    # vertices touched by more cells than their provenance names
    non_corner = np.flatnonzero(kind != KIND_CORNER)
    if non_corner.size and sites.kappa0 > 2:
        v = diagram.xy[non_corner]
        r = np.linalg.norm(v - pts[own[non_corner]], axis=1)
        tree = cKDTree(pts)
        hits = tree.query_ball_point(v, r + tol * L)
        seen_m = set()
        for row, s in enumerate(non_corner):
            named = {int(own[s])}
            if inc[s] >= 0:
                named.add(int(inc[s]))
            if out[s] >= 0:
                named.add(int(out[s]))
            dist = np.abs(np.linalg.norm(pts[hits[row]] - v[row], axis=1) - r[row])
            extra = {m for m, dm in zip(hits[row], dist) if dm <= tol * L} - named
            if extra:
                key = tuple(sorted(named | extra))
                if key not in seen_m:
                    seen_m.add(key)
                    report.violations.append(Violation("shared_vertex", key, float(len(key))))
    return report
