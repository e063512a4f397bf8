"""CVT energy with unit density and its gradient, computed two ways."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Diagram, SiteSet
from .sensitivity import perp, slot_jacobians


@dataclass(frozen=True)
class EnergyBreakdown:
    total: float
    per_cell: np.ndarray


@dataclass(frozen=True)
class TriangleTerm:
    jacobian: float
    quad: float


def triangle_jacobian(v, w, a) -> float:
    """Signed determinant of ``(v - a | w - a)``; twice the signed triangle area."""
    v, w, a = (np.asarray(x, dtype=float) for x in (v, w, a))
    return float(-np.dot(v - a, perp(w - a)))


def triangle_term(v, w, a) -> TriangleTerm:
    v, w, a = (np.asarray(x, dtype=float) for x in (v, w, a))
    p, q = v - a, w - a
    return TriangleTerm(triangle_jacobian(v, w, a), float(p @ p + p @ q + q @ q))


def _slot_terms(diagram: Diagram):
    a = diagram.sites.points[diagram.owner]
    p = diagram.xy - a
    q = diagram.xy[diagram.nxt] - a
    J = p[:, 0] * q[:, 1] - p[:, 1] * q[:, 0]
    sigma = (p * p).sum(1) + (p * q).sum(1) + (q * q).sum(1)
    return a, J, sigma


def cvt_energy(diagram: Diagram) -> EnergyBreakdown:
    """Exact ``(1/kappa0) sum_i int_{V_i} |x - a_i|^2 dx`` via the fan of triangles at each site."""
    _, J, sigma = _slot_terms(diagram)
    per_cell = np.bincount(diagram.owner, np.abs(J) * sigma / 12.0, minlength=diagram.kappa0)
    return EnergyBreakdown(float(per_cell.sum() / diagram.kappa0), per_cell)


def cvt_gradient_integral(diagram: Diagram) -> np.ndarray:
    """``(2/kappa0) (a_i - c_i) |V_i|`` per site, flattened."""
    pts = diagram.sites.points
    g = 2.0 / diagram.kappa0 * (pts - diagram.centroids) * diagram.areas[:, None]
    return g.reshape(-1)


def cvt_gradient_explicit(diagram: Diagram) -> np.ndarray:
    """Differentiate the triangle formula directly through the vertex velocities.

    Raises :class:`~cvtopt.exceptions.DegenerateVertex` if a vertex Jacobian
    cannot be formed.
    """
    a, J, sigma = _slot_terms(diagram)
    v = diagram.xy
    w = diagram.xy[diagram.nxt]
    gamma = np.abs(J)[:, None]
    kap = (np.sign(J) * sigma)[:, None]
    cov_v = (kap * (perp(a) - perp(w)) + gamma * (2 * v + w - 3 * a)) / 12.0
    cov_w = (kap * (perp(v) - perp(a)) + gamma * (v + 2 * w - 3 * a)) / 12.0
    direct = -(kap * (perp(v) - perp(w)) + 3 * gamma * (v + w - 2 * a)) / 12.0

    cov = cov_v.copy()
    cov[diagram.nxt] += cov_w  # nxt is a permutation of the slots
    jac = slot_jacobians(diagram)
    g = jac.pullback(cov)
    g[:, 0] += np.bincount(diagram.owner, direct[:, 0], minlength=diagram.kappa0)
    g[:, 1] += np.bincount(diagram.owner, direct[:, 1], minlength=diagram.kappa0)
    return (g / diagram.kappa0).reshape(-1)


def lloyd_step(diagram: Diagram) -> SiteSet:
    """Move every site to its cell centroid (clamped to the box)."""
    c = np.clip(diagram.centroids, 0.0, diagram.domain.side)
    return SiteSet(c, diagram.domain)
