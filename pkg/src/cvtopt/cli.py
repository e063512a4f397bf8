"""Command-line experiment runner.

Exit codes: 0 success (Converged or NoProgress), 1 configuration error,
2 degenerate configuration, 3 other optimizer failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import artifacts
from ._validation import MERITS, GRADIENTS, build_merit_spec, check_kappa0
from .exceptions import DegenerateError
from .geometry import build_diagram
from .optimizer import OptimizerConfig, RunReport, Termination, minimize
from .penalties import MeritKind, MeritSpec

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_OPTIMIZER = 0, 1, 2, 3

REPORT_COLUMNS = ("stage", "kappa0", "merit", "omega", "c2", "psi", "grad",
                  "f", "pg", "G", "J", "it", "fcnt", "time", "termination")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kappa0: int | None = None
    merit: str = "g"
    omega: float = 1.0
    c2: float | None = None
    psi: int = 1
    gradient: str = "integral"
    seed: int = 0
    eps_opt: float = 1e-8
    max_iter: int | None = None
    progress_factor: float | None = None
    out: str = "out"
    svg: bool = False
    svg_mode: str | None = None
    show_sites: bool = False
    init: str | None = None
    allow_degenerate: bool = False
    parallel: bool = False
    bins: int = 100


@dataclass
class OutputBundle:
    report: str
    cells: str
    sites_out: str
    hist: str
    curve: str
    svg: str | None = None
    reports: list = field(default_factory=list)
    exit_code: int = EXIT_OK

    def paths(self) -> list:
        return [p for p in (self.report, self.cells, self.sites_out, self.hist, self.curve,
                            self.svg) if p]


def _report_row(stage, cfg: ExperimentConfig, spec: MeritSpec, rep: RunReport) -> dict:
    return {
        "stage": stage,
        "kappa0": cfg.kappa0,
        "merit": spec.kind.value,
        "omega": spec.omega,
        "c2": "" if spec.c2 is None else spec.c2,
        "psi": cfg.psi if spec.kind is MeritKind.DENSITY else "",
        "grad": spec.gradient_variant.value,
        "f": rep.f_star,
        "pg": rep.pg_norm,
        "G": rep.components.get("G", np.nan),
        "J": rep.components.get("J", np.nan),
        "it": rep.iterations,
        "fcnt": rep.fevals,
        "time": rep.wall_time_s,
        "termination": rep.termination.value,
    }


def _exit_code(rep: RunReport) -> int:
    if rep.termination in (Termination.CONVERGED, Termination.NO_PROGRESS):
        return EXIT_OK
    if rep.termination is Termination.DEGENERATE:
        return EXIT_DEGENERATE
    return EXIT_OPTIMIZER


def run_experiment(cfg: ExperimentConfig) -> OutputBundle:
    """Run the CVT stage (and the merit stage if requested) and write every artifact.

    Raises :class:`ConfigError` for invalid settings and
    :class:`DegenerateError` for a degenerate start.
    """
    try:
        if cfg.init:
            a0 = artifacts.read_sites_csv(cfg.init)
            if cfg.kappa0 is not None and cfg.kappa0 != a0.kappa0:
                raise ValueError(f"--kappa0 {cfg.kappa0} disagrees with {a0.kappa0} sites in {cfg.init}")
            cfg.kappa0 = a0.kappa0
        else:
            if cfg.kappa0 is None:
                raise ValueError("--kappa0 or --init is required")
            cfg.kappa0 = check_kappa0(cfg.kappa0)
            a0 = artifacts.sample_uniform_sites(cfg.kappa0, cfg.seed)
        if cfg.merit == "f2" and cfg.c2 is None:
            cfg.c2 = 0.5
        spec = build_merit_spec(cfg.merit, cfg.omega, cfg.c2, cfg.psi, cfg.gradient, a0.domain)
        config = OptimizerConfig(eps_opt=cfg.eps_opt, max_iter=cfg.max_iter,
                                 progress_factor=cfg.progress_factor)
        if cfg.svg_mode not in (None, "plain", "equal-area", "min-edge"):
            raise ValueError(f"unknown --svg-mode {cfg.svg_mode!r}")
        if cfg.bins < 1:
            raise ValueError("--bins must be at least 1")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    os.makedirs(cfg.out, exist_ok=True)
    rows, reports = [], []
    g_spec = MeritSpec(gradient_variant=spec.gradient_variant)
    start = a0
    code = EXIT_OK
    if spec.kind is not MeritKind.ENERGY:
        start, rep = minimize(g_spec, a0, config=config, allow_degenerate=cfg.allow_degenerate,
                              parallel=cfg.parallel)
        rows.append(_report_row("cvt", cfg, g_spec, rep))
        reports.append(rep)
        code = _exit_code(rep)
    if code == EXIT_OK:
        final, rep = minimize(spec, start, config=config, allow_degenerate=cfg.allow_degenerate,
                              parallel=cfg.parallel)
        rows.append(_report_row("merit" if spec.kind is not MeritKind.ENERGY else "cvt",
                                cfg, spec, rep))
        reports.append(rep)
        code = _exit_code(rep)
    else:
        final = start

    join = lambda name: os.path.join(cfg.out, name)  # noqa: E731
    bundle = OutputBundle(join("report.csv"), join("cells.csv"), join("sites_out.csv"),
                          join("hist.csv"), join("curve.csv"), reports=reports, exit_code=code)
    artifacts.write_rows(bundle.report, rows, REPORT_COLUMNS)
    artifacts.write_sites_csv(bundle.sites_out, final)

    diagram = build_diagram(final)
    c2 = 0.5 if cfg.c2 is None else cfg.c2
    artifacts.write_rows(bundle.cells, artifacts.cell_rows(diagram, c2), artifacts.CELL_COLUMNS)
    hist = artifacts.area_histogram(diagram.areas, cfg.bins)
    artifacts.write_rows(bundle.hist, [dict(zip(("bin_lo", "bin_hi", "proportion"), h)) for h in hist],
                         ("bin_lo", "bin_hi", "proportion"))
    curve = artifacts.edge_ratio_curve(diagram, artifacts.DEFAULT_CURVE_GRID)
    artifacts.write_rows(bundle.curve, [{"c": c, "proportion": p} for c, p in curve],
                         ("c", "proportion"))
    if cfg.svg:
        mode = cfg.svg_mode or {"f1": "equal-area", "f2": "min-edge"}.get(spec.kind.value, "plain")
        white = cfg.c2 if (mode == "min-edge" and cfg.c2 is not None) else artifacts.MIN_EDGE_WHITE
        bundle.svg = join("diagram.svg")
        artifacts.write_text(bundle.svg, artifacts.render_svg(diagram, mode, white, cfg.show_sites))
    return bundle


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cvtopt", description="Optimize bounded Voronoi tessellations in a square.")
    p.add_argument("--kappa0", type=int, help="number of sites (box side is sqrt(kappa0))")
    p.add_argument("--merit", choices=MERITS, default="g")
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--c2", type=float, default=None, help="minimum edge ratio for f2 (default 0.5)")
    p.add_argument("--psi", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--grad", choices=GRADIENTS, default="integral", dest="gradient")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-8, dest="eps_opt")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--progress-factor", type=float, default=None,
                   help="lack-of-progress multiplier (default 1 for g, 1e7 for f1/f2/f3)")
    p.add_argument("--init", help="starting sites as an i,x,y CSV")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--svg", action="store_true", help="also write diagram.svg")
    p.add_argument("--svg-mode", choices=("plain", "equal-area", "min-edge"))
    p.add_argument("--show-sites", action="store_true")
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--allow-degenerate", action="store_true")
    p.add_argument("--parallel", action="store_true",
                   help="build cells on several threads (same result)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = ExperimentConfig(**vars(args))
    try:
        bundle = run_experiment(cfg)
    except ConfigError as exc:
        print(f"cvtopt: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateError as exc:
        print(f"cvtopt: degenerate configuration: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    for rep in bundle.reports:
        print(f"f={rep.f_star:.6e} pg={rep.pg_norm:.1e} G={rep.components.get('G', np.nan):.6e} "
              f"J={rep.components.get('J', np.nan):.6e} it={rep.iterations} fcnt={rep.fevals} "
              f"time={rep.wall_time_s:.3f}s {rep.termination.value}")
    return bundle.exit_code


if __name__ == "__main__":
    sys.exit(main())
