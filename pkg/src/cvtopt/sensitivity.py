"""First-order motion of Voronoi vertices and of cell areas / edge lengths.

An interior vertex (circumcenter of sites i, j, k) and a boundary vertex
(bisector of i, j meeting a box side) move linearly with the site
perturbation; the 2x2 blocks below give that map per generating site.
Corners never move.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateVertex
from .geometry import (
    EPS_DEG,
    KIND_BOUNDARY,
    KIND_INTERIOR,
    Boundary,
    BoxDomain,
    Corner,
    Diagram,
    Interior,
    SiteSet,
    VertexProvenance,
    _NORMALS,
    label_side,
)


def perp(u):
    """Counterclockwise quarter turn, ``(x, y) -> (-y, x)``."""
    u = np.asarray(u, dtype=float)
    return np.stack([-u[..., 1], u[..., 0]], axis=-1)


def _det(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


@dataclass(frozen=True)
class VertexJacobians:
    """Per-site 2x2 blocks ``B_s`` with vertex velocity ``sum_s B_s @ delta a_s``."""

    vertex: np.ndarray
    provenance: VertexProvenance
    blocks: list

    def sites(self) -> list:
        return [s for s, _ in self.blocks]


class SparseGradient:
    """Additive map site index -> gradient with respect to that site."""

    def __init__(self, entries=None):
        self._entries: dict[int, np.ndarray] = {}
        for site, vec in entries or ():
            self.add(site, vec)

    def add(self, site: int, vec) -> None:
        site = int(site)
        vec = np.asarray(vec, dtype=float)
        if site in self._entries:
            self._entries[site] = self._entries[site] + vec
        else:
            self._entries[site] = vec.copy()

    @property
    def entries(self) -> list:
        return [(s, self._entries[s]) for s in sorted(self._entries)]

    def __len__(self):
        return len(self._entries)

    def __getitem__(self, site: int) -> np.ndarray:
        return self._entries.get(int(site), np.zeros(2))

    def to_dense(self, kappa0: int) -> np.ndarray:
        out = np.zeros((kappa0, 2))
        for s, v in self.entries:
            out[s] += v
        return out

    def __repr__(self):
        body = ", ".join(f"{s}: [{v[0]:.6g}, {v[1]:.6g}]" for s, v in self.entries)
        return f"SparseGradient({{{body}}})"


def interior_vertex_jacobians(sites: SiteSet, v, prov: Interior,
                              tol: float = EPS_DEG) -> VertexJacobians:
    a = sites.points
    ai, aj, ak = a[prov.i], a[prov.j], a[prov.k]
    v = np.asarray(v, dtype=float)
    q = _det(aj - ai, ak - ai)
    L = sites.domain.side
    if abs(q) <= tol * L * L:
        raise DegenerateVertex(f"collinear sites at interior vertex {prov}")
    blocks = [
        (prov.i, np.outer(perp(aj - ak), v - ai) / q),
        (prov.j, np.outer(perp(ak - ai), v - aj) / q),
        (prov.k, np.outer(perp(ai - aj), v - ak) / q),
    ]
    return VertexJacobians(v, prov, blocks)


def boundary_vertex_jacobians(sites: SiteSet, domain: BoxDomain | None, v, prov: Boundary,
                              tol: float = EPS_DEG) -> VertexJacobians:
    domain = sites.domain if domain is None else domain
    a = sites.points
    ai, aj = a[prov.i], a[prov.j]
    v = np.asarray(v, dtype=float)
    n = domain.normal(prov.side)
    det_ij = _det(aj - ai, n)
    if abs(det_ij) <= tol * domain.side:
        raise DegenerateVertex(f"bisector parallel to the side at boundary vertex {prov}")
    t = perp(n)
    blocks = [
        (prov.i, -np.outer(t, v - ai) / det_ij),
        (prov.j, np.outer(t, v - aj) / det_ij),
    ]
    return VertexJacobians(v, prov, blocks)


def vertex_jacobians(diagram: Diagram, slot: int, tol: float = EPS_DEG) -> VertexJacobians:
    prov = diagram.provenance(slot)
    v = diagram.xy[slot]
    if isinstance(prov, Interior):
        return interior_vertex_jacobians(diagram.sites, v, prov, tol)
    if isinstance(prov, Boundary):
        return boundary_vertex_jacobians(diagram.sites, diagram.domain, v, prov, tol)
    return VertexJacobians(np.array(v), prov, [])


def vertex_velocity(jac: VertexJacobians, delta) -> np.ndarray:
    """Velocity of the vertex for a full perturbation ``delta`` (flat or (kappa0, 2))."""
    d = np.asarray(delta, dtype=float).reshape(-1, 2)
    out = np.zeros(2)
    if isinstance(jac.provenance, Corner):
        return out
    for s, B in jac.blocks:
        out += B @ d[s]
    return out


# -- vectorized machinery over all vertex slots ----------------------------------


class SlotJacobians:
    """Jacobian blocks of every vertex slot of a diagram.

    ``sites[s, r]`` is the r-th generating site of slot ``s`` (-1 if unused)
    and ``blocks[s, r]`` its 2x2 block.
    """

    def __init__(self, diagram: Diagram, tol: float = EPS_DEG):
        self.diagram = diagram
        S = diagram.n_slots
        pts = diagram.sites.points
        L = diagram.domain.side
        own = diagram.owner
        inc = diagram.incoming
        out = diagram.labels
        kind = diagram.kind
        v = diagram.xy
        sites = np.full((S, 3), -1, dtype=np.int64)
        blocks = np.zeros((S, 3, 2, 2))

        m = np.flatnonzero(kind == KIND_INTERIOR)
        if m.size:
            i, j, k = own[m], inc[m], out[m]
            ai, aj, ak = pts[i], pts[j], pts[k]
            q = _det(aj - ai, ak - ai)
            bad = np.abs(q) <= tol * L * L
            if np.any(bad):
                s = int(m[np.flatnonzero(bad)[0]])
                raise DegenerateVertex(f"collinear sites at interior vertex {diagram.provenance(s)}")
            vm = v[m]
            sites[m] = np.column_stack([i, j, k])
            blocks[m, 0] = _outer(perp(aj - ak), vm - ai) / q[:, None, None]
            blocks[m, 1] = _outer(perp(ak - ai), vm - aj) / q[:, None, None]
            blocks[m, 2] = _outer(perp(ai - aj), vm - ak) / q[:, None, None]

        m = np.flatnonzero(kind == KIND_BOUNDARY)
        if m.size:
            i = own[m]
            j = np.where(inc[m] >= 0, inc[m], out[m])
            side = label_side(np.where(inc[m] < 0, inc[m], out[m]))
            n = _NORMALS[side]
            ai, aj = pts[i], pts[j]
            det_ij = _det(aj - ai, n)
            bad = np.abs(det_ij) <= tol * L
            if np.any(bad):
                s = int(m[np.flatnonzero(bad)[0]])
                raise DegenerateVertex(f"bisector parallel to side at {diagram.provenance(s)}")
            t = perp(n)
            vm = v[m]
            sites[m, 0] = i
            sites[m, 1] = j
            blocks[m, 0] = -_outer(t, vm - ai) / det_ij[:, None, None]
            blocks[m, 1] = _outer(t, vm - aj) / det_ij[:, None, None]

        self.sites = sites
        self.blocks = blocks

    def velocities(self, delta) -> np.ndarray:
        """Velocity of every slot under the perturbation ``delta``."""
        d = np.asarray(delta, dtype=float).reshape(-1, 2)
        dd = np.zeros((self.sites.shape[0], 3, 2))
        used = self.sites >= 0
        dd[used] = d[self.sites[used]]
        return np.einsum("srxy,sry->sx", self.blocks, dd)

    def pullback(self, cov) -> np.ndarray:
        """Gradient of ``sum_s cov[s] . velocity[s]`` with respect to the sites, shape (kappa0, 2)."""
        cov = np.asarray(cov, dtype=float)
        contrib = np.einsum("srxy,sx->sry", self.blocks, cov)
        used = self.sites >= 0
        idx = self.sites[used]
        c = contrib[used]
        n = self.diagram.kappa0
        # float cast: bincount of empty weights yields integers
        return np.column_stack([
            np.bincount(idx, c[:, 0], minlength=n),
            np.bincount(idx, c[:, 1], minlength=n),
        ]).astype(float)


def _outer(u, v):
    return u[:, :, None] * v[:, None, :]


def slot_jacobians(diagram: Diagram) -> SlotJacobians:
    """Cached :class:`SlotJacobians` of ``diagram``."""
    jac = diagram.__dict__.get("_slot_jacobians")
    if jac is None:
        jac = SlotJacobians(diagram)
        diagram.__dict__["_slot_jacobians"] = jac
    return jac


def edge_tangents(diagram: Diagram) -> np.ndarray:
    """Unit counterclockwise tangent of the edge leaving each slot."""
    lengths = diagram.edge_lengths
    safe = np.where(lengths > 0, lengths, 1.0)
    return diagram.edge_vectors / safe[:, None]


def weighted_area_gradient(diagram: Diagram, weights) -> np.ndarray:
    """Gradient of ``sum_i weights[i] * |V_i|`` with respect to every site."""
    w = np.asarray(weights, dtype=float)
    pts = diagram.sites.points
    s = np.flatnonzero(diagram.labels >= 0)
    i = diagram.owner[s]
    k = diagram.labels[s]
    p = 0.5 * (diagram.xy[s] + diagram.xy[diagram.nxt[s]])
    d = np.linalg.norm(pts[i] - pts[k], axis=1)
    coef = (w[i] * diagram.edge_lengths[s] / d)[:, None]
    gi = coef * (p - pts[i])
    gk = -coef * (p - pts[k])
    n = diagram.kappa0
    idx = np.concatenate([i, k])
    g = np.concatenate([gi, gk])
    return np.column_stack([
        np.bincount(idx, g[:, 0], minlength=n),
        np.bincount(idx, g[:, 1], minlength=n),
    ]).astype(float)


def area_gradient(diagram: Diagram, i: int) -> SparseGradient:
    """Gradient of the area of cell ``i``; only interior edges contribute."""
    pts = diagram.sites.points
    grad = SparseGradient()
    for s in range(diagram.ptr[i], diagram.ptr[i + 1]):
        k = int(diagram.labels[s])
        if k < 0:
            continue
        p = 0.5 * (diagram.xy[s] + diagram.xy[diagram.nxt[s]])
        length = diagram.edge_lengths[s]
        d = np.linalg.norm(pts[i] - pts[k])
        grad.add(i, length * (p - pts[i]) / d)
        grad.add(k, -length * (p - pts[k]) / d)
    return grad


def edge_length_gradient(diagram: Diagram, cell: int, edge: int) -> SparseGradient:
    """Gradient of the length of edge ``edge`` (local index) of ``cell``."""
    s = int(diagram.ptr[cell] + edge)
    if not diagram.ptr[cell] <= s < diagram.ptr[cell + 1]:
        raise IndexError(f"cell {cell} has no edge {edge}")
    t = diagram.nxt[s]
    tau = edge_tangents(diagram)[s]
    grad = SparseGradient()
    for slot, sign in ((t, 1.0), (s, -1.0)):
        jac = vertex_jacobians(diagram, int(slot))
        for site, B in jac.blocks:
            grad.add(site, sign * (B.T @ tau))
    return grad
