"""scikit-learn style front end: fit sites, then assign or measure query points."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import build_merit_spec, check_kappa0, check_points, check_positive
from .artifacts import sample_uniform_sites
from .geometry import BoxDomain, SiteSet, build_diagram, nearest_site
from .optimizer import OptimizerConfig, minimize
from .penalties import MeritKind, MeritSpec, merit_eval


class CVTEstimator(TransformerMixin, BaseEstimator):
    """Optimized Voronoi tessellation of the square ``[0, sqrt(n_sites)]^2``.

    ``fit`` places ``n_sites`` generators by minimizing the chosen merit
    (``"g"`` for the plain CVT energy, ``"f1"``, ``"f2"`` or ``"f3"`` for the
    penalized variants). Afterwards ``predict`` returns the index of the cell
    containing each query point and ``transform`` the distances to all sites.

    Parameters
    ----------
    n_sites : int
    merit : {"g", "f1", "f2", "f3"}
    omega : float
        Merit weight; multiplies ``G`` for f1/f2 and the penalty for f3.
    c2 : float
        Minimum edge ratio for ``"f2"``.
    psi : {1, 2, 3}
        Density field for ``"f3"``.
    gradient : {"integral", "explicit"}
    eps, max_iter, memory, progress_factor
        Optimizer settings; ``max_iter=None`` means ``50 * n_sites``.
    warm_start_cvt : bool
        For penalized merits, start from a minimizer of ``G`` alone.
    random_state : int or None
        Seed of the uniform initial sites when ``fit`` gets no ``X``.
    allow_degenerate : bool
        Accept a starting configuration that violates non-degeneracy.
    """

    def __init__(self, n_sites=10, merit="g", omega=1.0, c2=0.5, psi=1, gradient="integral",
                 eps=1e-8, max_iter=None, memory=5, progress_factor=None, warm_start_cvt=True,
                 random_state=None, allow_degenerate=False):
        self.n_sites = n_sites
        self.merit = merit
        self.omega = omega
        self.c2 = c2
        self.psi = psi
        self.gradient = gradient
        self.eps = eps
        self.max_iter = max_iter
        self.memory = memory
        self.progress_factor = progress_factor
        self.warm_start_cvt = warm_start_cvt
        self.random_state = random_state
        self.allow_degenerate = allow_degenerate

    def _config(self) -> OptimizerConfig:
        return OptimizerConfig(
            memory=int(self.memory),
            eps_opt=check_positive("eps", self.eps),
            max_iter=self.max_iter,
            progress_factor=(None if self.progress_factor is None
                             else check_positive("progress_factor", self.progress_factor, True)),
        )

    def _spec(self, domain: BoxDomain) -> MeritSpec:
        return build_merit_spec(self.merit, self.omega, self.c2, self.psi, self.gradient, domain)

    def fit(self, X=None, y=None):
        """Optimize the sites; ``X`` optionally gives the (n_sites, 2) starting positions."""
        n = check_kappa0(self.n_sites)
        domain = BoxDomain.for_sites(n)
        spec = self._spec(domain)
        config = self._config()
        if X is None:
            a0 = sample_uniform_sites(n, self.random_state)
        else:
            pts = check_points(X, domain)
            if pts.shape[0] != n:
                raise ValueError(f"X has {pts.shape[0]} rows but n_sites={n}")
            a0 = SiteSet(pts, domain)

        self.cvt_report_ = None
        if spec.kind is not MeritKind.ENERGY and self.warm_start_cvt:
            g_spec = MeritSpec(gradient_variant=spec.gradient_variant)
            a0, self.cvt_report_ = minimize(g_spec, a0, config=config,
                                            allow_degenerate=self.allow_degenerate)
        sites, report = minimize(spec, a0, config=config, allow_degenerate=self.allow_degenerate)

        self.initial_sites_ = a0
        self.sites_ = sites
        self.report_ = report
        self.diagram_ = build_diagram(sites)
        self.merit_spec_ = spec
        self.cluster_centers_ = sites.points
        self.n_iter_ = report.iterations
        self.termination_ = report.termination
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        """Index of the nearest site (the containing cell) for each row of ``X``."""
        check_is_fitted(self, "sites_")
        return np.atleast_1d(nearest_site(self.sites_, check_points(X)))

    def transform(self, X):
        """Euclidean distances from each row of ``X`` to every site, shape (m, n_sites)."""
        check_is_fitted(self, "sites_")
        X = check_points(X)
        d = X[:, None, :] - self.sites_.points[None, :, :]
        return np.sqrt((d * d).sum(axis=2))

    def score(self, X=None, y=None):
        """Negative merit at the fitted sites (higher is better); ``X`` is ignored."""
        check_is_fitted(self, "sites_")
        return -merit_eval(self.merit_spec_, self.sites_).f

    @property
    def energy_(self) -> float:
        check_is_fitted(self, "sites_")
        return float(self.report_.components.get("G", np.nan))
