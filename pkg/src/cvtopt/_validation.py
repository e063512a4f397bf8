"""Parameter and input checks shared by the estimator and the CLI."""
from __future__ import annotations

import numbers

import numpy as np

from .geometry import BoxDomain
from .penalties import GradientVariant, MeritKind, MeritSpec, make_density

MERITS = tuple(k.value for k in MeritKind)
GRADIENTS = tuple(v.value for v in GradientVariant)


def check_kappa0(n) -> int:
    if isinstance(n, bool) or not isinstance(n, numbers.Integral) or n < 1:
        raise ValueError(f"the number of sites must be a positive integer, got {n!r}")
    return int(n)


def check_positive(name: str, value, allow_zero: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        raise ValueError(f"{name} must be {'non-negative' if allow_zero else 'positive'}, got {value!r}")
    return float(value)


def check_points(X, domain: BoxDomain | None = None, name: str = "X") -> np.ndarray:
    """2-d float array of shape (m, 2), finite and, if a domain is given, inside it."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{name} must have shape (n_samples, 2), got {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if domain is not None and not np.all(domain.contains(arr)):
        raise ValueError(f"{name} has points outside [0, {domain.side:g}]^2")
    return arr


def build_merit_spec(merit: str, omega: float, c2: float | None, psi: int | None,
                     gradient: str, domain: BoxDomain) -> MeritSpec:
    if merit not in MERITS:
        raise ValueError(f"merit must be one of {MERITS}, got {merit!r}")
    if gradient not in GRADIENTS:
        raise ValueError(f"gradient must be one of {GRADIENTS}, got {gradient!r}")
    check_positive("omega", omega, allow_zero=True)
    kind = MeritKind(merit)
    field = None
    if kind is MeritKind.DENSITY:
        if psi not in (1, 2, 3):
            raise ValueError(f"psi must be 1, 2 or 3, got {psi!r}")
        field = make_density(psi, domain)
    if kind is MeritKind.MIN_EDGE:
        if c2 is None or not 0.0 < float(c2) < 1.0:
            raise ValueError(f"c2 must lie in (0, 1), got {c2!r}")
    return MeritSpec(kind, float(omega), None if c2 is None else float(c2), field, gradient)
