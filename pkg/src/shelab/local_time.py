"""Mollified local time at level 0 and its energy functionals.

The self-energy of a path's local time is the double integral of the
occupation density against the temporal kernel |r-s|^(2H-2); it is finite
exactly when rho > 1/(2H-1).  Estimates use exact cell-pair kernel weights
so the diagonal singularity carries no discretization bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate
from scipy.special import beta as beta_fn

from .errors import DivergentRegimeError, GridMismatchError, InvalidParameterError
from .kernels import kernel_lag_weights
from .stable import StableParams, StablePath, density_at_origin, sample_pinned_matrix, transition_density

__all__ = [
    "Mollifier",
    "LocalTimeProfile",
    "EnergyEstimate",
    "SelfEnergyRegime",
    "DivergenceReport",
    "local_time_profile",
    "mollified_increments",
    "self_energy",
    "mutual_energy",
    "self_energy_samples",
    "expected_self_energy",
    "finiteness_diagnostic",
    "divergence_probe",
    "richardson",
]


@dataclass(frozen=True)
class Mollifier:
    """delta_eps(x) = 1/(2 eps) on |x| < eps, integrating to one."""

    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise InvalidParameterError("epsilon must be positive")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.where(np.abs(x) < self.epsilon, 1.0 / (2.0 * self.epsilon), 0.0)


@dataclass(frozen=True)
class LocalTimeProfile:
    """Per-cell increments ell_j = delta_eps(X_(t_j)) dt and their partial sums."""

    path_ref: str
    epsilon: float
    t: float
    dt: float
    increments: np.ndarray
    cumulative: np.ndarray = field(repr=False)
    resolution_warning: bool = False

    @property
    def total(self) -> float:
        return float(self.cumulative[-1])

    @property
    def n_cells(self) -> int:
        return len(self.increments)


@dataclass(frozen=True)
class EnergyEstimate:
    value: float
    epsilon: float
    step: float
    kind: str  # "self" | "mutual"

    def __post_init__(self):
        if self.value < 0:
            raise InvalidParameterError("energy estimates are nonnegative")


class SelfEnergyRegime(Enum):
    FINITE = "FINITE"
    INFINITE = "INFINITE"


def mollified_increments(positions: np.ndarray, eps: float, dt: float) -> np.ndarray:
    """Left-endpoint mollified occupation increments for one or many paths.

    `positions` has M+1 grid values per path (last axis); the returned
    increments drop the terminal point (left-endpoint evaluation).
    """
    if eps <= 0:
        raise InvalidParameterError("eps must be positive")
    return np.where(np.abs(positions[..., :-1]) < eps, dt / (2.0 * eps), 0.0)


def local_time_profile(path: StablePath, eps: float) -> LocalTimeProfile:
    inc = mollified_increments(path.values, eps, path.dt)
    warn = path.dt > eps**path.params.rho
    return LocalTimeProfile(
        path_ref=f"path@{id(path):x}",
        epsilon=eps,
        t=path.t,
        dt=path.dt,
        increments=inc,
        cumulative=np.cumsum(inc),
        resolution_warning=warn,
    )


def _check_H(H: float) -> None:
    if not (0.5 < H < 1.0):
        raise InvalidParameterError(f"H must lie in (1/2, 1), got {H}")


def _pair_energy(a: np.ndarray, b: np.ndarray, dt: float, H: float, wtab: np.ndarray | None = None) -> float:
    """Sum_ij (a_i/dt) (b_j/dt) W_ij for increment vectors a, b via lag weights."""
    ia = np.flatnonzero(a)
    ib = np.flatnonzero(b)
    if len(ia) == 0 or len(ib) == 0:
        return 0.0
    if wtab is None:
        wtab = kernel_lag_weights(H, dt, len(a))
    lags = np.abs(ia[:, None] - ib[None, :])
    return float((a[ia][:, None] * b[ib][None, :] * wtab[lags]).sum()) / dt**2


def self_energy(profile: LocalTimeProfile, H: float) -> EnergyEstimate:
    """I_t estimate with exact cell-pair kernel weights, diagonal included."""
    _check_H(H)
    val = _pair_energy(profile.increments, profile.increments, profile.dt, H)
    return EnergyEstimate(value=val, epsilon=profile.epsilon, step=profile.dt, kind="self")


def mutual_energy(a: LocalTimeProfile, b: LocalTimeProfile, H: float) -> EnergyEstimate:
    _check_H(H)
    if a.n_cells != b.n_cells or abs(a.dt - b.dt) > 1e-12 * a.dt:
        raise GridMismatchError("profiles must share grid and horizon")
    val = _pair_energy(a.increments, b.increments, a.dt, H)
    return EnergyEstimate(value=val, epsilon=a.epsilon, step=a.dt, kind="mutual")


def self_energy_samples(
    params: StableParams,
    H: float,
    t: float,
    x: float,
    eps: float,
    dt: float,
    n_paths: int,
    rng: np.random.Generator,
    batch: int = 200,
) -> np.ndarray:
    """Self-energy of eps-mollified local time for n_paths pinned paths."""
    _check_H(H)
    m = round(t / dt)
    wtab = kernel_lag_weights(H, dt, m)
    scale = (dt / (2.0 * eps)) ** 2 / dt**2
    out = np.empty(n_paths)
    done = 0
    while done < n_paths:
        nb = min(batch, n_paths - done)
        pos = sample_pinned_matrix(params, t, x, dt, nb, rng)
        occ = np.abs(pos[:, :-1]) < eps
        for r in range(nb):
            idx = np.flatnonzero(occ[r])
            if len(idx) == 0:
                out[done + r] = 0.0
            else:
                lags = np.abs(idx[:, None] - idx[None, :])
                out[done + r] = scale * wtab[lags].sum()
        done += nb
    return out


def expected_self_energy(params: StableParams, H: float, t: float, x: float) -> float:
    """E[I_t] under the pinned law: 2 int_0^t int_0^r g(1,0) (r-s)^(2H-2-1/rho)
    g(t-r, x) ds dr; closed form in terms of the Beta function when x = 0.

    Raises DivergentRegimeError when rho <= 1/(2H-1) (the expectation is
    infinite exactly there).
    """
    _check_H(H)
    if t <= 0:
        raise InvalidParameterError("t must be positive")
    rho = params.rho
    kappa = 2.0 * H - 1.0 - 1.0 / rho
    if kappa <= 0:
        raise DivergentRegimeError(
            f"self-energy expectation diverges for rho={rho}, H={H} "
            f"(requires rho > 1/(2H-1) = {1.0 / (2.0 * H - 1.0):g})"
        )
    g1 = density_at_origin(params)
    if x == 0.0:
        return (
            2.0 * g1**2 * beta_fn(2.0 * H - 1.0 / rho, 1.0 - 1.0 / rho)
            * t ** (2.0 * H - 2.0 / rho) / kappa
        )
    integrand = lambda r: transition_density(params, t - r, x) * r**kappa
    val, _ = integrate.quad(integrand, 0.0, t, epsabs=1e-11, epsrel=1e-9, limit=200)
    return 2.0 * g1 * val / kappa


def finiteness_diagnostic(params: StableParams, H: float) -> SelfEnergyRegime:
    """FINITE iff rho > 1/(2H-1) (equivalently alpha + 2H > 2); otherwise the
    self-energy is infinite a.s. on {L_t > 0}."""
    _check_H(H)
    if not (1.0 < params.rho <= 2.0):
        raise InvalidParameterError("diagnostic defined for rho in (1, 2]")
    return SelfEnergyRegime.FINITE if params.rho > 1.0 / (2.0 * H - 1.0) else SelfEnergyRegime.INFINITE


@dataclass(frozen=True)
class DivergenceReport:
    eps_schedule: tuple[float, ...]
    conditional_means: tuple[float, ...]
    stderrs: tuple[float, ...]
    n_conditioned: tuple[int, ...]
    classification: str  # PLATEAU | GROWING | UNDETERMINED
    last_ratio: float | None


def divergence_probe(
    params: StableParams,
    H: float,
    t: float,
    x: float,
    eps_schedule,
    paths_per_eps: int,
    rng: np.random.Generator,
) -> DivergenceReport:
    """Conditional means of I_(t,eps) given L_(t,eps) > 0 along an eps schedule,
    with the step coupled as dt = eps^rho / 4 per level.

    PLATEAU if the last two conditional means differ by < 10%, GROWING
    otherwise; UNDETERMINED for schedules shorter than two levels.
    """
    eps_schedule = tuple(float(e) for e in eps_schedule)
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise InvalidParameterError("eps schedule must be strictly decreasing")
    means, errs, counts = [], [], []
    for lvl, eps in enumerate(eps_schedule):
        m = max(1, math.ceil(t / (eps**params.rho / 4.0)))
        dt = t / m
        vals = self_energy_samples(params, H, t, x, eps, dt, paths_per_eps, rng)
        pos = vals[vals > 0.0]
        counts.append(len(pos))
        if len(pos) == 0:
            means.append(0.0)
            errs.append(0.0)
        else:
            means.append(float(pos.mean()))
            errs.append(float(pos.std(ddof=1) / math.sqrt(len(pos))) if len(pos) > 1 else 0.0)
    if len(eps_schedule) < 2 or means[-2] == 0.0:
        verdict, ratio = "UNDETERMINED", None
    else:
        ratio = means[-1] / means[-2]
        verdict = "PLATEAU" if abs(ratio - 1.0) < 0.10 else "GROWING"
    return DivergenceReport(
        eps_schedule=eps_schedule,
        conditional_means=tuple(means),
        stderrs=tuple(errs),
        n_conditioned=tuple(counts),
        classification=verdict,
        last_ratio=ratio,
    )


def richardson(eps_pair, value_pair) -> float:
    """First-order-in-eps extrapolation from two (eps, value) levels."""
    (e1, e2), (v1, v2) = eps_pair, value_pair
    if e1 == e2:
        raise InvalidParameterError("extrapolation needs distinct eps levels")
    return (e1 * v2 - e2 * v1) / (e1 - e2)
