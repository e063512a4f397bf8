"""Box-constrained limited-memory BFGS.

The step computation follows the classic recipe for bounds: a generalized
Cauchy point along the projected steepest-descent path of the compact
quasi-Newton model, a direct primal minimization over the variables left
free there, and a backtracking line search that never leaves the box.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .exceptions import DegenerateError
from .geometry import BoxDomain, SiteSet, build_diagram, check_nondegeneracy
from .penalties import MeritKind, MeritSpec, merit_eval

EPS_MACH = np.finfo(float).eps


class Termination(str, enum.Enum):
    CONVERGED = "Converged"
    NO_PROGRESS = "NoProgress"
    ITER_LIMIT = "IterLimit"
    EVAL_LIMIT = "EvalLimit"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class Bounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("bounds need matching shapes and lower <= upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def for_domain(cls, domain: BoxDomain, kappa0: int) -> "Bounds":
        return cls(np.zeros(2 * kappa0), np.full(2 * kappa0, domain.side))


@dataclass(frozen=True)
class OptimizerConfig:
    memory: int = 5
    eps_opt: float = 1e-8
    max_iter: int | None = None  # None: 50 * kappa0 (or 50 * n / 2 for plain problems)
    max_feval: int | None = None  # None: 10 * max_iter
    progress_factor: float | None = None  # None: see resolve_progress_factor
    armijo: float = 1e-4
    wolfe_curvature: float = 0.9
    line_search: str = "wolfe"  # or "backtracking"
    max_backtracks: int = 30

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be at least 1")
        if not self.eps_opt > 0:
            raise ValueError("eps_opt must be positive")
        if self.max_iter is not None and self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        if self.progress_factor is not None and self.progress_factor < 0:
            raise ValueError("progress_factor must be non-negative")
        if self.line_search not in ("wolfe", "backtracking"):
            raise ValueError(f"unknown line search {self.line_search!r}")

    def limits(self, n: int) -> tuple[int, int]:
        it = self.max_iter if self.max_iter is not None else max(50 * (n // 2), 50)
        fe = self.max_feval if self.max_feval is not None else 10 * max(it, 1)
        return it, fe


ENERGY_PROGRESS_FACTOR = 1.0
PENALTY_PROGRESS_FACTOR = 1e7


def resolve_progress_factor(config: "OptimizerConfig", spec: MeritSpec | None = None) -> float:
    """Explicit setting, else 1 for the smooth CVT energy and 1e7 otherwise.

    The energy alone converges cleanly to the projected-gradient tolerance,
    while the penalized merits (C1 only, with jumps at topology changes)
    crawl for thousands of iterations and are stopped by lack of progress.
    """
    if config.progress_factor is not None:
        return float(config.progress_factor)
    if spec is not None and spec.kind is MeritKind.ENERGY:
        return ENERGY_PROGRESS_FACTOR
    return PENALTY_PROGRESS_FACTOR


@dataclass
class RunReport:
    f_star: float
    pg_norm: float
    components: dict
    iterations: int
    fevals: int
    wall_time_s: float
    termination: Termination
    message: str = ""
    history: list = field(default_factory=list, repr=False)


@dataclass
class LbfgsbResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    pg_norm: float
    iterations: int
    fevals: int
    termination: Termination
    message: str = ""
    extra: object = None


def project_box(a, bounds: Bounds) -> np.ndarray:
    return np.minimum(np.maximum(np.asarray(a, dtype=float), bounds.lower), bounds.upper)


def projected_gradient_norm(a, grad, bounds: Bounds) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(project_box(a - np.asarray(grad), bounds) - a), initial=0.0))


# -- limited-memory model --------------------------------------------------------


class _Memory:
    """Correction pairs and the compact form ``B = theta*I - W M W^T``."""

    def __init__(self, m: int):
        self.m = m
        self.S: list = []
        self.Y: list = []
        self.theta = 1.0
        self.W = None
        self.M = None

    def __len__(self):
        return len(self.S)

    def reset(self):
        self.S.clear()
        self.Y.clear()
        self.theta = 1.0
        self.W = self.M = None

    def update(self, s, y) -> bool:
        sy = float(s @ y)
        yy = float(y @ y)
        if sy <= EPS_MACH * yy or yy == 0.0:
            return False
        self.S.append(s)
        self.Y.append(y)
        if len(self.S) > self.m:
            self.S.pop(0)
            self.Y.pop(0)
        self.theta = yy / sy
        S = np.column_stack(self.S)
        Y = np.column_stack(self.Y)
        SY = S.T @ Y
        Lo = np.tril(SY, -1)
        D = np.diag(np.diag(SY))
        K = np.block([[-D, Lo.T], [Lo, self.theta * (S.T @ S)]])
        try:
            self.M = np.linalg.inv(K)
        except np.linalg.LinAlgError:
            self.reset()
            return False
        self.W = np.hstack([Y, self.theta * S])
        return True


def _cauchy_point(x, g, lo, hi, mem: _Memory):
    """Generalized Cauchy point; returns ``(xc, c)`` with ``c = W^T (xc - x)``."""
    n = x.size
    theta = mem.theta
    W, M = mem.W, mem.M
    t = np.full(n, np.inf)
    neg = g < 0
    pos = g > 0
    t[neg] = (x[neg] - hi[neg]) / g[neg]
    t[pos] = (x[pos] - lo[pos]) / g[pos]
    d = np.where(t > 0, -g, 0.0)
    xc = x.copy()
    k = 0 if W is None else W.shape[1]
    p = W.T @ d if k else np.zeros(0)
    c = np.zeros(k)
    fp = -float(d @ d)
    fpp = -theta * fp - (float(p @ (M @ p)) if k else 0.0)
    if fp >= 0:
        return xc, c
    fpp = max(fpp, EPS_MACH * -fp)
    dt_min = -fp / fpp
    t_old = 0.0
    order = np.flatnonzero(np.isfinite(t) & (t > 0))
    order = order[np.argsort(t[order], kind="stable")]
    for b in order:
        dt = t[b] - t_old
        if dt_min < dt:
            break
        xc[b] = hi[b] if d[b] > 0 else lo[b]
        zb = xc[b] - x[b]
        c = c + dt * p
        gb = g[b]
        if k:
            wb = W[b]
            Mw = M @ wb
            fp += dt * fpp + gb * gb + theta * gb * zb - gb * float(Mw @ c)
            fpp += -theta * gb * gb - 2.0 * gb * float(Mw @ p) - gb * gb * float(wb @ Mw)
            p = p + gb * wb
        else:
            fp += dt * fpp + gb * gb + theta * gb * zb
            fpp += -theta * gb * gb
        d[b] = 0.0
        t_old = t[b]
        if fp >= 0:
            dt_min = 0.0
            break
        fpp = max(fpp, EPS_MACH * abs(fp))
        dt_min = -fp / fpp
    dt_min = max(dt_min, 0.0)
    t_old += dt_min
    free = d != 0
    xc[free] = x[free] + t_old * d[free]
    c = c + dt_min * p
    return xc, c


def _subspace_step(x, g, lo, hi, xc, c, mem: _Memory):
    """Minimize the model over the variables free at ``xc``; returns the new point."""
    free = (xc > lo) & (xc < hi)
    if not np.any(free):
        return xc
    theta = mem.theta
    W, M = mem.W, mem.M
    r = g + theta * (xc - x)
    if W is not None:
        r = r - W @ (M @ c)
    rz = r[free]
    if W is None:
        du = -rz / theta
    else:
        WZ = W[free]
        v = M @ (WZ.T @ rz)
        N = np.eye(M.shape[0]) - (M @ (WZ.T @ WZ)) / theta
        try:
            v = np.linalg.solve(N, v)
        except np.linalg.LinAlgError:
            return xc
        du = -rz / theta - (WZ @ v) / theta**2
    # try the projected step first, fall back to the truncated one
    cand = xc.copy()
    cand[free] = np.clip(xc[free] + du, lo[free], hi[free])
    if float(g @ (cand - x)) < 0:
        return cand
    xz = xc[free]
    with np.errstate(divide="ignore", invalid="ignore"):
        room = np.where(du > 0, (hi[free] - xz) / du, np.where(du < 0, (lo[free] - xz) / du, np.inf))
    alpha = min(1.0, float(np.min(room, initial=np.inf)))
    out = xc.copy()
    out[free] = xz + max(alpha, 0.0) * du
    return out


# -- driver ----------------------------------------------------------------------


def lbfgsb(fun: Callable, x0, lower, upper, config: OptimizerConfig | None = None,
           callback: Callable | None = None) -> LbfgsbResult:
    """Minimize ``fun`` over the box ``[lower, upper]``.

    ``fun(x)`` returns ``(f, g)`` or an object with ``.f`` and ``.grad``;
    raising :class:`DegenerateError` at a trial point makes the line search
    shorten the step.
    """
    config = config or OptimizerConfig()
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    x = np.clip(np.asarray(x0, dtype=float).copy(), lo, hi)
    n = x.size
    max_iter, max_feval = config.limits(n)
    factr = resolve_progress_factor(config)
    bounds = Bounds(lo, hi)

    nfev = 0

    def evaluate(z):
        nonlocal nfev
        nfev += 1
        out = fun(z)
        if isinstance(out, tuple):
            return float(out[0]), np.asarray(out[1], dtype=float), None
        return float(out.f), np.asarray(out.grad, dtype=float), out

    f, g, extra = evaluate(x)
    pg = projected_gradient_norm(x, g, bounds)
    mem = _Memory(config.memory)
    it = 0

    def result(term, msg=""):
        return LbfgsbResult(x, f, g, pg, it, nfev, term, msg, extra)

    if pg <= config.eps_opt:
        return result(Termination.CONVERGED)

    while True:
        if it >= max_iter:
            return result(Termination.ITER_LIMIT, "iteration limit reached")
        if nfev >= max_feval:
            return result(Termination.EVAL_LIMIT, "evaluation limit reached")

        step = _search(x, f, g, lo, hi, mem, config, evaluate, first=(len(mem) == 0),
                       feval_left=max_feval - nfev)
        if step.status != "ok" and len(mem):
            mem.reset()
            step = _search(x, f, g, lo, hi, mem, config, evaluate, first=True,
                           feval_left=max_feval - nfev)
        if step.status == "degenerate":
            return result(Termination.DEGENERATE, "trial points stayed degenerate after backoff")
        if step.status == "evals":
            return result(Termination.EVAL_LIMIT, "evaluation limit reached in line search")
        if step.status != "ok":
            return result(Termination.NO_PROGRESS, "line search found no sufficient decrease")

        s = step.x - x
        y = step.g - g
        f_old = f
        x, f, g, extra = step.x, step.f, step.g, step.extra
        it += 1
        mem.update(s, y)
        pg = projected_gradient_norm(x, g, bounds)
        if callback is not None:
            callback(it, x, f, pg)
        if pg <= config.eps_opt:
            return result(Termination.CONVERGED)
        scale = max(abs(f_old), abs(f), 1.0)
        if f_old - f <= factr * EPS_MACH * scale:
            return result(Termination.NO_PROGRESS, "relative reduction of f below threshold")


@dataclass
class _Step:
    status: str
    x: np.ndarray | None = None
    f: float = np.nan
    g: np.ndarray | None = None
    extra: object = None


def _direction(x, g, lo, hi, mem):
    xc, c = _cauchy_point(x, g, lo, hi, mem)
    d = _subspace_step(x, g, lo, hi, xc, c, mem) - x
    slope = float(g @ d)
    if not slope < 0:
        # the model step is useless; fall back to the projected gradient path
        d = np.clip(x - g, lo, hi) - x
        slope = float(g @ d)
    return d, slope


def _max_step(x, d, lo, hi) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        room = np.where(d > 0, (hi - x) / d, np.where(d < 0, (lo - x) / d, np.inf))
    return max(1.0, float(np.min(room, initial=np.inf)))


def _search(x, f, g, lo, hi, mem, config, evaluate, first, feval_left) -> _Step:
    d, slope = _direction(x, g, lo, hi, mem)
    if not slope < 0:
        return _Step("flat")
    t = 1.0
    if first:
        t = min(1.0, 1.0 / max(float(np.linalg.norm(d)), EPS_MACH))
    t_max = 1.0 if (first or config.line_search == "backtracking") else min(_max_step(x, d, lo, hi), 1e10)
    ls = _LineSearch(x, f, slope, d, lo, hi, evaluate, config, feval_left)
    if config.line_search == "backtracking":
        return ls.backtrack(t)
    return ls.wolfe(t, t_max)


class _LineSearch:
    """Scalar searches along ``x + t d`` (clipped to the box against round-off)."""

    def __init__(self, x, f, slope, d, lo, hi, evaluate, config, budget):
        self.x, self.f0, self.slope, self.d = x, f, slope, d
        self.lo, self.hi = lo, hi
        self.evaluate = evaluate
        self.c1 = config.armijo
        self.c2 = config.wolfe_curvature
        self.max_trials = config.max_backtracks
        self.budget = budget
        self.trials = 0
        self.n_degenerate = 0
        self.best = None  # best point satisfying sufficient decrease

    def phi(self, t):
        """``(f, dphi, step)`` at ``t``; ``None`` if the trial point is degenerate."""
        self.budget -= 1
        self.trials += 1
        z = np.clip(self.x + t * self.d, self.lo, self.hi)
        try:
            fz, gz, extra = self.evaluate(z)
        except DegenerateError:
            self.n_degenerate += 1
            return None
        if not np.isfinite(fz):
            return None
        step = _Step("ok", z, fz, gz, extra)
        if self.armijo(t, fz) and (self.best is None or fz < self.best.f):
            self.best = step
        return fz, float(gz @ self.d), step

    def armijo(self, t, ft) -> bool:
        return ft <= self.f0 + self.c1 * t * self.slope

    def exhausted(self) -> bool:
        return self.budget <= 0 or self.trials > self.max_trials

    def give_up(self) -> _Step:
        if self.best is not None:
            return self.best
        if self.budget <= 0:
            return _Step("evals")
        return _Step("degenerate" if self.n_degenerate > self.max_trials // 2 else "fail")

    def backtrack(self, t) -> _Step:
        while not self.exhausted():
            r = self.phi(t)
            if r is None:
                t *= 0.5
                continue
            ft, _, step = r
            if self.armijo(t, ft):
                return step
            denom = 2.0 * (ft - self.f0 - t * self.slope)
            t_new = -self.slope * t * t / denom if denom > 0 else 0.5 * t
            t = min(max(t_new, 0.1 * t), 0.5 * t)
        return self.give_up()

    def wolfe(self, t, t_max) -> _Step:
        """Bracketing search for the strong Wolfe conditions."""
        f0, s0 = self.f0, self.slope
        t_prev, f_prev, d_prev = 0.0, f0, s0
        while not self.exhausted():
            r = self.phi(t)
            if r is None:
                t = 0.5 * (t_prev + t)
                continue
            ft, dt, step = r
            if not self.armijo(t, ft) or (t_prev > 0 and ft >= f_prev):
                return self._zoom(t_prev, f_prev, d_prev, t, ft, dt)
            if abs(dt) <= -self.c2 * s0:
                return step
            if dt >= 0:
                return self._zoom(t, ft, dt, t_prev, f_prev, d_prev)
            if t >= t_max:
                return step
            t_prev, f_prev, d_prev = t, ft, dt
            t = min(4.0 * t, t_max)
        return self.give_up()

    def _zoom(self, a, fa, da, b, fb, db) -> _Step:
        # invariant: a satisfies sufficient decrease and has the lowest f seen so far
        while not self.exhausted():
            t = _cubic_min(a, fa, da, b, fb, db)
            lo_t, hi_t = min(a, b), max(a, b)
            w = hi_t - lo_t
            if not (lo_t + 0.1 * w <= t <= hi_t - 0.1 * w):
                t = 0.5 * (a + b)
            if w <= EPS_MACH * max(hi_t, 1.0):
                break
            r = self.phi(t)
            if r is None:
                b, fb, db = t, np.inf, 0.0
                continue
            ft, dt, step = r
            if not self.armijo(t, ft) or ft >= fa:
                b, fb, db = t, ft, dt
                continue
            if abs(dt) <= -self.c2 * self.slope:
                return step
            if dt * (b - a) >= 0:
                b, fb, db = a, fa, da
            a, fa, da = t, ft, dt
        return self.give_up()


def _cubic_min(a, fa, da, b, fb, db) -> float:
    """Minimizer of the cubic through two points with slopes (midpoint if ill-posed)."""
    if not (np.isfinite(fb) and np.isfinite(db)):
        return 0.5 * (a + b)
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    rad = d1 * d1 - da * db
    if rad < 0:
        return 0.5 * (a + b)
    d2 = np.copysign(np.sqrt(rad), b - a)
    den = db - da + 2.0 * d2
    if den == 0:
        return 0.5 * (a + b)
    return float(b - (b - a) * (db + d2 - d1) / den)


# -- merit-function front end ----------------------------------------------------


def minimize(spec: MeritSpec, a0: SiteSet, bounds: Bounds | None = None,
             config: OptimizerConfig | None = None, *, allow_degenerate: bool = False,
             parallel: bool = False, callback: Callable | None = None):
    """Minimize a merit function over site positions; returns ``(sites, report)``."""
    domain = a0.domain
    n = a0.kappa0
    bounds = bounds or Bounds.for_domain(domain, n)
    config = config or OptimizerConfig()
    config = replace(config, max_iter=50 * n if config.max_iter is None else config.max_iter,
                     progress_factor=resolve_progress_factor(config, spec))
    if not allow_degenerate:
        report = check_nondegeneracy(build_diagram(a0, parallel=parallel), a0)
        if not report.ok:
            raise DegenerateError(f"initial configuration is degenerate: {sorted(report.kinds())}")

    def fun(x):
        return merit_eval(spec, SiteSet.from_coords(x, domain), parallel=parallel)

    t0 = time.monotonic()
    try:
        res = lbfgsb(fun, a0.coords, bounds.lower, bounds.upper, config, callback)
    except DegenerateError as exc:
        # the starting point itself could not be evaluated
        elapsed = time.monotonic() - t0
        rep = RunReport(np.nan, np.nan, {}, 0, 1, elapsed, Termination.DEGENERATE, str(exc))
        return a0, rep
    elapsed = time.monotonic() - t0
    comps = dict(res.extra.components) if res.extra is not None else {}
    rep = RunReport(res.f, res.pg_norm, comps, res.iterations, res.fevals, elapsed,
                    res.termination, res.message)
    return SiteSet.from_coords(res.x, domain), rep


def finite_difference_gradient(spec, a: SiteSet | np.ndarray, h: float = 1e-6,
                               domain: BoxDomain | None = None) -> np.ndarray:
    """Central differences of the merit ``spec`` (or of a plain callable) at ``a``."""
    if callable(spec) and not isinstance(spec, MeritSpec):
        f = spec
        x = np.asarray(a, dtype=float).reshape(-1)
    else:
        domain = a.domain if domain is None else domain
        x = a.coords.copy()

        def f(z):
            return merit_eval(spec, SiteSet.from_coords(z, domain)).f

    out = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        out[k] = (f(x + e) - f(x - e)) / (2.0 * h)
    return out
