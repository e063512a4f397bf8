"""Geometric penalty terms and the merit functions that combine them with the CVT energy.

* ``J1``: squared relative deviation of cell areas from the mean area.
* ``J2``: violation of a minimum edge length, relative to each cell's mean edge.
* ``J3``: squared deviation of relative cell areas from a prescribed density ``psi``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from .energy import cvt_energy, cvt_gradient_explicit, cvt_gradient_integral
from .geometry import BoxDomain, Diagram, SiteSet, build_diagram
from .sensitivity import edge_tangents, slot_jacobians, weighted_area_gradient


class PenaltyValue(NamedTuple):
    value: float
    grad: np.ndarray  # flat, 2 * kappa0


# -- density fields --------------------------------------------------------------


@dataclass(frozen=True)
class Psi1:
    """Banana-shaped (Rosenbrock-like) density around the box center."""

    center: tuple
    a: float = 19.0 / 16.0**2
    b: float = 0.25

    def value_and_grad(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        zb = (2.0 * z - np.asarray(self.center)) / 5.0
        u = zb[:, 0] / 4.0
        r = zb[:, 1] - u * u
        val = self.a * (r * r + (u - 1.0) ** 2) + self.b
        d1 = self.a * (-u * r + 0.5 * (u - 1.0))
        d2 = 2.0 * self.a * r
        return val, 0.4 * np.column_stack([d1, d2])


@dataclass(frozen=True)
class Psi2:
    """Low density along a sine wave across the box."""

    delta: float
    period: float

    def value_and_grad(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        k = 2.0 * np.pi / self.period
        c = 2.9 / self.delta**2
        r = z[:, 1] - 0.6 * self.delta * np.sin(k * z[:, 0]) - self.delta
        val = 0.1 + c * r * r
        d1 = 2.0 * c * r * (-0.6 * self.delta * k * np.cos(k * z[:, 0]))
        d2 = 2.0 * c * r
        return val, np.column_stack([d1, d2])


@dataclass(frozen=True)
class Psi3:
    """Radial paraboloid with its minimum at the center of the inscribed circle."""

    center: tuple
    radius: float

    def value_and_grad(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        d = z - np.asarray(self.center)
        r2 = self.radius**2
        return 0.01 + 20.0 * (d * d).sum(axis=1) / r2, 40.0 * d / r2


DensityField = Union[Psi1, Psi2, Psi3]


def make_density(psi: int, domain: BoxDomain) -> DensityField:
    """Density field number ``psi`` (1, 2 or 3) scaled to ``domain``."""
    L = domain.side
    c = (0.5 * L, 0.5 * L)
    if psi == 1:
        return Psi1(c)
    if psi == 2:
        return Psi2(delta=0.5 * L, period=L)
    if psi == 3:
        return Psi3(c, 0.5 * L)
    raise ValueError(f"psi must be 1, 2 or 3, got {psi!r}")


def psi_eval(field: DensityField, z):
    """Value and gradient of ``field`` at a single point or an (m, 2) array."""
    val, grad = field.value_and_grad(z)
    if np.ndim(z) == 1:
        return float(val[0]), grad[0]
    return val, grad


# -- penalty terms -----------------------------------------------------------------


def area_ratios(diagram: Diagram) -> np.ndarray:
    """``|V_i|`` over the mean cell area."""
    return diagram.areas * diagram.kappa0 / diagram.total_area


def j1_terms(diagram: Diagram) -> np.ndarray:
    return area_ratios(diagram) - 1.0


def j1_eval(diagram: Diagram) -> PenaltyValue:
    t = j1_terms(diagram)
    grad = weighted_area_gradient(diagram, 2.0 * t / diagram.total_area)
    return PenaltyValue(float(np.mean(t * t)), grad.reshape(-1))


def j3_terms(diagram: Diagram, field: DensityField) -> np.ndarray:
    psi, _ = field.value_and_grad(diagram.sites.points)
    return area_ratios(diagram) - psi


def j3_eval(diagram: Diagram, field: DensityField) -> PenaltyValue:
    n = diagram.kappa0
    psi, dpsi = field.value_and_grad(diagram.sites.points)
    t = area_ratios(diagram) - psi
    grad = weighted_area_gradient(diagram, 2.0 * t / diagram.total_area)
    grad -= (2.0 / n) * t[:, None] * dpsi
    return PenaltyValue(float(np.mean(t * t)), grad.reshape(-1))


def _edge_shortfall(diagram: Diagram, c2: float) -> np.ndarray:
    mean_edge = diagram.perimeters / diagram.n_edges
    ratio = diagram.edge_lengths / mean_edge[diagram.owner]
    return np.minimum(0.0, ratio - c2)


def j2_terms(diagram: Diagram, c2: float) -> np.ndarray:
    m = _edge_shortfall(diagram, c2)
    return np.bincount(diagram.owner, m * m, minlength=diagram.kappa0) / diagram.n_edges


def j2_eval(diagram: Diagram, c2: float) -> PenaltyValue:
    """Unnormalized sum over cells of the mean squared edge shortfall.

    All edges take part, boundary ones included.
    """
    if not 0.0 < c2 < 1.0:
        raise ValueError(f"c2 must lie in (0, 1), got {c2!r}")
    m = _edge_shortfall(diagram, c2)
    owner = diagram.owner
    n = diagram.kappa0
    value = float(np.sum(np.bincount(owner, m * m, minlength=n) / diagram.n_edges))
    if not np.any(m):
        return PenaltyValue(value, np.zeros(2 * n))
    P = diagram.perimeters
    weighted = np.bincount(owner, diagram.edge_lengths * m, minlength=n) / P
    mu = 2.0 / P[owner] * (m - weighted[owner])
    tau = edge_tangents(diagram) * mu[:, None]
    cov = -tau
    cov[diagram.nxt] += tau
    grad = slot_jacobians(diagram).pullback(cov)
    return PenaltyValue(value, grad.reshape(-1))


# -- merit functions ---------------------------------------------------------------


class MeritKind(str, enum.Enum):
    ENERGY = "g"
    EQUAL_AREA = "f1"
    MIN_EDGE = "f2"
    DENSITY = "f3"


class GradientVariant(str, enum.Enum):
    INTEGRAL = "integral"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class MeritSpec:
    """Which objective to minimize.

    ``f1 = omega*G + J1``, ``f2 = omega*G + J2`` and ``f3 = G + omega*J3``;
    note that the weight sits on the penalty only for ``f3``.
    """

    kind: MeritKind = MeritKind.ENERGY
    omega: float = 1.0
    c2: float | None = None
    field: DensityField | None = None
    gradient_variant: GradientVariant = GradientVariant.INTEGRAL

    def __post_init__(self):
        object.__setattr__(self, "kind", MeritKind(self.kind))
        object.__setattr__(self, "gradient_variant", GradientVariant(self.gradient_variant))
        if self.omega < 0 or not np.isfinite(self.omega):
            raise ValueError(f"omega must be a finite non-negative number, got {self.omega!r}")
        if self.kind is MeritKind.MIN_EDGE and (self.c2 is None or not 0.0 < self.c2 < 1.0):
            raise ValueError("the min-edge merit needs c2 in (0, 1)")
        if self.kind is MeritKind.DENSITY and self.field is None:
            raise ValueError("the density merit needs a density field")

    def combine(self, G: float, J: float) -> float:
        if self.kind is MeritKind.ENERGY:
            return G
        if self.kind is MeritKind.DENSITY:
            return G + self.omega * J
        return self.omega * G + J


@dataclass(frozen=True)
class MeritValue:
    f: float
    grad: np.ndarray
    components: dict = field(default_factory=dict)
    diagram: Diagram | None = field(default=None, repr=False, compare=False)


def energy_gradient(diagram: Diagram, variant=GradientVariant.INTEGRAL) -> np.ndarray:
    if GradientVariant(variant) is GradientVariant.EXPLICIT:
        return cvt_gradient_explicit(diagram)
    return cvt_gradient_integral(diagram)


def penalty_eval(spec: MeritSpec, diagram: Diagram) -> PenaltyValue:
    if spec.kind is MeritKind.EQUAL_AREA:
        return j1_eval(diagram)
    if spec.kind is MeritKind.MIN_EDGE:
        return j2_eval(diagram, spec.c2)
    if spec.kind is MeritKind.DENSITY:
        return j3_eval(diagram, spec.field)
    return PenaltyValue(0.0, np.zeros(2 * diagram.kappa0))


def merit_on_diagram(spec: MeritSpec, diagram: Diagram) -> MeritValue:
    G = cvt_energy(diagram).total
    gG = energy_gradient(diagram, spec.gradient_variant)
    if spec.kind is MeritKind.ENERGY:
        return MeritValue(G, gG, {"G": G, "J": 0.0}, diagram)
    J, gJ = penalty_eval(spec, diagram)
    if spec.kind is MeritKind.DENSITY:
        grad = gG + spec.omega * gJ
    else:
        grad = spec.omega * gG + gJ
    return MeritValue(spec.combine(G, J), grad, {"G": G, "J": J}, diagram)


def merit_eval(spec: MeritSpec, sites: SiteSet, parallel: bool = False) -> MeritValue:
    """Build the diagram once and evaluate the merit, its gradient and both components."""
    return merit_on_diagram(spec, build_diagram(sites, parallel=parallel))
