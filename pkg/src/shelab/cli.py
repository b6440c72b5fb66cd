"""Batch experiment runner.

Usage: shelab <kind> --config FILE [--seed S] [--workers W] [--out DIR]

Config files are INI-style sectioned key-value text; command-line flags
override the [run] section, and the environment variable SHELAB_OUT
overrides the output root only.  Random streams are keyed by logical task
index, never by worker, so outputs are byte-identical for any worker
count.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from pathlib import Path

import numpy as np

from . import rngs
from .basis import build_onb, sample_noise
from .chaos import second_moment_series, tc_bracket
from .errors import ShelabError
from .kernels import TemporalKernel
from .local_time import divergence_probe, expected_self_energy, richardson, self_energy_samples
from .pinning import (
    DisorderFactor,
    RenewalLaw,
    free_energy,
    hc_scan,
    sample_renewal,
    wh_classifier,
    wick_partition_mc,
)
from .reporting import RunManifest, write_csv, write_json
from .she import (
    compute_Zn,
    make_ensemble,
    mean_one_check,
    regime_classify,
    second_moment_identity_check,
    solve_L1,
)
from .stable import StableParams

KINDS = [
    "she-solve",
    "she-moments",
    "chaos-series",
    "tc-bracket",
    "self-energy",
    "divergence-probe",
    "pinning-free-energy",
    "hc-scan",
    "wick-check",
    "phase-diagram",
    "validate",
]


class ConfigError(SystemExit):
    def __init__(self, field: str, message: str):
        super().__init__(f"config error at [{field}]: {message}")


class _Config:
    """Typed access to a sectioned key-value config with field-path errors."""

    def __init__(self, parser: configparser.ConfigParser):
        self._p = parser

    def get(self, section: str, key: str, cast, default=None):
        if not self._p.has_option(section, key):
            if default is not None:
                return default
            raise ConfigError(f"{section}.{key}", "missing required key")
        raw = self._p.get(section, key)
        try:
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r}: {exc}") from None

    def floats(self, section: str, key: str, default=None):
        return self.get(section, key, lambda s: [float(v) for v in s.split()], default)

    def ints(self, section: str, key: str, default=None):
        return self.get(section, key, lambda s: [int(v) for v in s.split()], default)


def _load_config(path: str | None) -> _Config:
    parser = configparser.ConfigParser()
    if path is not None:
        if not Path(path).exists():
            raise SystemExit(f"config file not found: {path}")
        parser.read(path)
    return _Config(parser)


def _out_dir(args, cfg: _Config) -> Path:
    out = args.out or cfg.get("run", "out", str, "runs/out")
    root = os.environ.get("SHELAB_OUT")
    if root:
        out = str(Path(root) / Path(out).name)
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# experiment implementations
# ---------------------------------------------------------------------------


def _run_she_solve(cfg: _Config, seed: int, out: Path, man: RunManifest) -> None:
    rho = cfg.get("params", "rho", float, 2.0)
    H = cfg.get("params", "H", float, 0.9)
    t = cfg.get("params", "t", float, 0.5)
    x = cfg.get("params", "x", float, 0.0)
    beta = cfg.get("params", "beta", float, 1.0)
    eps = cfg.get("params", "eps", float, 0.125)
    n_cells = cfg.get("params", "n_cells", int, 256)
    n_paths = cfg.get("params", "n_paths", int, 4000)
    levels = cfg.ints("params", "levels", [1, 2, 4, 8, 16, 32, 64, 128, 256])
    man.resolution.update({"n_cells": n_cells, "eps": eps, "dt": t / n_cells})
    basis = build_onb(TemporalKernel(H, t), n_cells)
    ens = make_ensemble(StableParams(rho), t, x, eps, basis, n_paths, rngs.stream(seed, 0))
    noise = sample_noise(basis.n_basis, rngs.stream(seed, 1))
    trace = solve_L1(ens, [n for n in levels if n <= basis.n_basis], noise, beta)
    rows = zip(trace.levels, trace.values, trace.stderrs) if trace.values else []
    man.add_output("trace", write_csv(out / "trace.csv", ["n", "Z_n", "stderr"], rows))
    man.add_output(
        "verdict",
        write_json(out / "verdict.json", {"verdict": trace.verdict, "final": trace.values[-1] if trace.values else None}),
    )


def _run_she_moments(cfg: _Config, seed: int, out: Path, man: RunManifest) -> None:
    rho = cfg.get("params", "rho", float, 2.0)
    H = cfg.get("params", "H", float, 0.8)
    t = cfg.get("params", "t", float, 0.5)
    x = cfg.get("params", "x", float, 0.0)
    beta = cfg.get("params", "beta", float, 1.0)
    eps = cfg.get("params", "eps", float, 0.125)
    n_cells = cfg.get("params", "n_cells", int, 128)
    n_paths = cfg.get("params", "n_paths", int, 2000)
    n_draws = cfg.get("params", "n_draws", int, 2000)
    ns = cfg.ints("params", "ns", [1, 2, 4])
    basis = build_onb(TemporalKernel(H, t), n_cells)
    params = StableParams(rho)
    ens_a = make_ensemble(params, t, x, eps, basis, n_paths, rngs.stream(seed, 0))
    ens_b = make_ensemble(params, t, x, eps, basis, n_paths, rngs.stream(seed, 1))
    rows = []
    for i, n in enumerate(ns):
        m1 = mean_one_check(ens_a, n, beta, n_draws, rngs.stream(seed, 2, i))
        m2 = second_moment_identity_check(ens_a, ens_b, n, beta, n_draws, rngs.stream(seed, 3, i))
        rows.append([n, m1.lhs, m1.lhs_stderr, m2.lhs, m2.lhs_stderr, m2.rhs, m2.rhs_stderr, m2.sigma_distance])
        if not (m1.passed and m2.passed):
            man.flag(f"moment identity outside 3 sigma at n={n}")
    man.add_output(
        "moments",
        write_csv(
            out / "moments.csv",
            ["n", "mean", "mean_stderr", "EZ2_xi", "EZ2_xi_stderr", "EZ2_pairs", "EZ2_pairs_stderr", "sigma_distance"],
            rows,
        ),
    )


def _run_chaos_series(cfg: _Config, seed: int, out: Path, man: RunManifest) -> None:
    rho = cfg.get("params", "rho", float, 2.0)
    H = cfg.get("params", "H", float, 0.75)
    t = cfg.get("params", "t", float, 0.1)
    x = cfg.get("params", "x", float, 0.0)
    n_max = cfg.get("params", "n_max", int, 6)
    budget = cfg.get("params", "budget", int, 200_000)
    rep = second_moment_series(rho, H, t, x, n_max, budget, rngs.stream(seed, 0))
    rows = [
        [n + 1, rep.terms[n], rep.stderrs[n], rep.partial_sums[n]] for n in range(len(rep.terms))
    ]
    man.add_output("series", write_csv(out / "series.csv", ["n", "a_n", "stderr", "partial_sum"], rows))
    man.add_output(
        "summary",
        write_json(
            out / "summary.json",
            {"classification": rep.classification, "growth_rate": rep.growth_rate},
        ),
    )


def _run_tc_bracket(cfg: _Config, seed: int, out: Path, man: RunManifest) -> None:
    H = cfg.get("params", "H", float, 0.75)
    n_max = cfg.get("params", "n_max", int, 6)
    budget = cfg.get("params", "budget", int, 200_000)
    br = tc_bracket(H, 0.0, n_max, budget, rngs.stream(seed, 0))
    man.add_output(
        "bracket",
        write_json(
            out / "bracket.json",
            {
                "t_lo": br.t_lo,
                "t_hi": br.t_hi,
                "rate_at_unit_t": br.rate_at_unit_t,
                "n_max": br.n_max,
                "low_confidence": br.low_confidence,
                "classification_lo": br.classification_lo,
                "classification_hi": br.classification_hi,
            },
        ),
    )


def _run_self_energy(cfg: _Config, seed: int, out: Path, man: RunManifest) -> None:
    rho = cfg.get("params", "rho", float, 2.0)
    H = cfg.get("params", "H", float, 0.8)
    t = cfg.get("params", "t", float, 1.0)
    x = cfg.get("params", "x", float, 0.0)
    n_paths = cfg.get("params", "n_paths", int, 10_000)
    eps_schedule = cfg.floats("params", "eps_schedule", [2**-3, 2**-4, 2**-5, 2**-6])
    params = StableParams(rho)
    rows = []
    means = []
    for i, eps in enumerate(eps_schedule):
        m = max(1, round(t / (eps**rho / 4.0)))
        dt = t / m
        vals = self_energy_samples(params, H, t, x, eps, dt, n_paths, rngs.stream(seed, i))
        mean = float(vals.mean())
        err = float(vals.std(ddof=1) / np.sqrt(n_paths))
        means.append(mean)
        rows.append([eps, dt, mean, err])
    man.resolution.update({"eps_schedule": eps_schedule})
    extrap = richardson(eps_schedule[-2:], means[-2:]) if len(means) >= 2 else None
    try:
        oracle = expected_self_energy(params, H, t, x)
    except ShelabError as exc:
        oracle = None
        man.flag(str(exc))
    man.add_output("levels", write_csv(out / "levels.csv", ["eps", "dt", "mean", "stderr"], rows))
    man.add_output(
        "summary",
        write_json(out / "summary.json", {"extrapolated": extrap, "expected": oracle}),
    )


def _run_divergence_probe(cfg: _Config, seed: int, out: Path, man: RunManifest) -> None:
    rho = cfg.get("params", "rho", float, 2.0)
    H = cfg.get("params", "H", float, 0.7)
    t = cfg.get("params", "t", float, 1.0)
    x = cfg.get("params", "x", float, 0.0)
    n_paths = cfg.get("params", "paths_per_eps", int, 3000)
    eps_schedule = cfg.floats("params", "eps_schedule", [2**-3, 2**-4, 2**-5, 2**-6, 2**-7])
    rep = divergence_probe(StableParams(rho), H, t, x, eps_schedule, n_paths, rngs.stream(seed, 0))
    rows = zip(rep.eps_schedule, rep.conditional_means, rep.stderrs, rep.n_conditioned)
    man.add_output("probe", write_csv(out / "probe.csv", ["eps", "mean", "stderr", "n_conditioned"], rows))
    man.add_output(
        "classification",
        write_json(
            out / "classification.json",
            {"classification": rep.classification, "last_ratio": rep.last_ratio},
        ),
    )


def _run_pinning_free_energy(cfg: _Config, seed: int, out: Path, man: RunManifest) -> None:
    alpha = cfg.get("params", "alpha", float, 0.5)
    H = cfg.get("params", "H", float, 0.75)
    beta = cfg.get("params", "beta", float, 0.0)
    N = cfg.get("params", "N", int, 1024)
    n_disorder = cfg.get("params", "n_disorder", int, 16)
    h_grid = cfg.floats("params", "h_grid", [-0.5, -0.25, 0.0, 0.25, 0.5])
    law = RenewalLaw(alpha)
    factor = None
    if beta != 0.0:
        factor = DisorderFactor.build(N, H, clip_tol=float("inf"))
        man.flag(f"disorder covariance clipped to PSD (fraction {factor.clip_fraction:.3e})")
    rows = []
    for i, h in enumerate(h_grid):
        est = free_energy(law, H, beta, h, N, n_disorder, rngs.stream(seed, i), factor=factor)
        rows.append([h, est.value, est.ci_lo, est.ci_hi, N, est.n_disorder])
    man.add_output(
        "free_energy",
        write_csv(out / "free_energy.csv", ["h", "F", "ci_lo", "ci_hi", "N", "n_disorder"], rows),
    )


def _run_hc_scan(cfg: _Config, seed: int, out: Path, man: RunManifest) -> None:
    alpha = cfg.get("params", "alpha", float, 0.5)
    H = cfg.get("params", "H", float, 0.75)
    beta = cfg.get("params", "beta", float, 0.0)
    N = cfg.get("params", "N", int, 1024)
    n_disorder = cfg.get("params", "n_disorder", int, 16)
    h_grid = cfg.floats("params", "h_grid", [-0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.2])
    rep = hc_scan(RenewalLaw(alpha), H, beta, h_grid, N, n_disorder, rngs.stream(seed, 0))
    rows = [
        [h, e.value, e.ci_lo, e.ci_hi, N, e.n_disorder] for h, e in zip(rep.h_grid, rep.estimates)
    ]
    man.add_output("scan", write_csv(out / "scan.csv", ["h", "F", "ci_lo", "ci_hi", "N", "n_disorder"], rows))
    man.add_output(
        "bracket",
        write_json(out / "bracket.json", {"status": rep.status, "bracket": rep.bracket}),
    )


def _run_wick_check(cfg: _Config, seed: int, out: Path, man: RunManifest) -> None:
    alpha = cfg.get("params", "alpha", float, 0.5)
    H = cfg.get("params", "H", float, 0.75)
    beta = cfg.get("params", "beta", float, 0.5)
    N = cfg.get("params", "N", int, 256)
    n_disorder = cfg.get("params", "n_disorder", int, 200)
    paths_per_disorder = cfg.get("params", "paths_per_disorder", int, 10)
    law = RenewalLaw(alpha)
    factor = DisorderFactor.build(N, H, clip_tol=float("inf"))
    man.flag(f"disorder covariance clipped to PSD (fraction {factor.clip_fraction:.3e})")
    cov = factor.realized_covariance()
    means = []
    for i in range(n_disorder):
        rng = rngs.stream(seed, i)
        omega = factor.draw(rng)
        mean, _ = wick_partition_mc(omega, law, H, beta, 0.0, paths_per_disorder, rng, cov=cov)
        means.append(mean)
    means = np.array(means)
    overall = float(means.mean())
    err = float(means.std(ddof=1) / np.sqrt(n_disorder))
    man.add_output(
        "wick",
        write_json(
            out / "wick.json",
            {"mean": overall, "stderr": err, "sigma_from_one": abs(overall - 1.0) / err if err > 0 else 0.0},
        ),
    )


def _run_phase_diagram(cfg: _Config, seed: int, out: Path, man: RunManifest) -> None:
    n_grid = cfg.get("params", "n_grid", int, 20)
    alphas = np.linspace(0.025, 0.975, n_grid)
    hs = np.linspace(0.525, 0.975, n_grid)
    rows = []
    for a in alphas:
        rho = 1.0 / (1.0 - a)
        for h in hs:
            regime = sorted(regime_classify(rho, h)) if rho <= 2.0 else []
            wh = sorted(wh_classifier(a, h))
            rows.append([a, h, "|".join(regime), "|".join(wh)])
    man.add_output(
        "phase_diagram",
        write_csv(out / "phase_diagram.csv", ["alpha", "H", "regime_flags", "wh_flags"], rows),
    )


def _run_validate(cfg: _Config, seed: int, out: Path, man: RunManifest) -> None:
    """Fast invariant sweep; raises SystemExit(1) on any failure."""
    from .chaos import dirichlet_simplex_integral
    from .kernels import cell_kernel_table
    from .local_time import local_time_profile, mutual_energy, self_energy
    from .pinning import partition_recursion
    from .stable import sample_backward_pinned, transition_density

    failures = []

    def check(name, ok):
        if not ok:
            failures.append(name)

    w = cell_kernel_table(TemporalKernel(0.75, 1.0), 64)
    check("gram_sum_8_3", abs(w.sum() - 8.0 / 3.0) < 1e-10)
    check("gram_symmetric", np.allclose(w, w.T))
    check("dirichlet_pi", abs(dirichlet_simplex_integral((0.5, 0.5), 1.0) - np.pi) < 1e-12)
    p2 = StableParams(2.0)
    check(
        "gaussian_density",
        abs(transition_density(p2, 1.0, 0.3) - np.exp(-0.09 / 4.0) / np.sqrt(4.0 * np.pi)) < 1e-8,
    )
    rng = rngs.stream(seed, 0)
    path = sample_backward_pinned(p2, 1.0, 0.0, 2**-8, rng)
    prof = local_time_profile(path, 0.125)
    se = self_energy(prof, 0.8).value
    me = mutual_energy(prof, prof, 0.8).value
    check("self_equals_mutual", se == me)
    law = RenewalLaw(0.5)
    check("partition_normalized", abs(partition_recursion(np.zeros(64), law, 0.0, 0.0).Z - 1.0) < 1e-12)
    tau = sample_renewal(law, 32, rngs.stream(seed, 1))
    check("renewal_sorted", bool(np.all(np.diff(tau) > 0)) if len(tau) > 1 else True)
    man.add_output(
        "validate",
        write_json(out / "validate.json", {"failures": failures, "passed": not failures}),
    )
    if failures:
        man.finish(out)
        raise SystemExit(1)


_RUNNERS = {
    "she-solve": _run_she_solve,
    "she-moments": _run_she_moments,
    "chaos-series": _run_chaos_series,
    "tc-bracket": _run_tc_bracket,
    "self-energy": _run_self_energy,
    "divergence-probe": _run_divergence_probe,
    "pinning-free-energy": _run_pinning_free_energy,
    "hc-scan": _run_hc_scan,
    "wick-check": _run_wick_check,
    "phase-diagram": _run_phase_diagram,
    "validate": _run_validate,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="shelab", description=__doc__)
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", default=None)
    args = parser.parse_args(argv)
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.get("run", "seed", int, 0)
    out = _out_dir(args, cfg)
    man = RunManifest(kind=args.kind, seed=seed, config={"file": args.config, "workers": args.workers})
    _RUNNERS[args.kind](cfg, seed, out, man)
    man.finish(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
