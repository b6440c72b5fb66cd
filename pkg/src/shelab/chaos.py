"""Second-moment chaos apparatus for the noisy heat equation.

The order-n contribution to the second moment is a_n = n! ||f_n||^2 where
f_n is the symmetrized iterated heat kernel and the norm is taken in the
n-fold tensor power of the |s-t|^(2H-2) Hilbert space.  Orders n <= 3 are
computed by singularity-exact grid contraction; higher orders use
importance-sampled Monte Carlo on ordered sectors with Dirichlet spacing
proposals that cancel the (s_(i+1) - s_i)^(-1/rho) kernel singularities.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import InvalidParameterError
from .kernels import TemporalKernel, cell_kernel_table
from .stable import StableParams, density_at_origin, transition_density

__all__ = [
    "ChaosKernelSpec",
    "ChaosNormEstimate",
    "SeriesReport",
    "TcBracket",
    "dirichlet_simplex_integral",
    "f_n_eval",
    "chaos_norm",
    "bound_formulas",
    "second_moment_series",
    "tc_bracket",
    "stratonovich_mean_series",
]


@dataclass(frozen=True)
class ChaosKernelSpec:
    n: int
    rho: float
    t: float
    x: float

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameterError("chaos order n must be >= 1")
        if self.t <= 0:
            raise InvalidParameterError("t must be positive")
        if not (0.0 < self.rho <= 2.0):
            raise InvalidParameterError("rho must lie in (0, 2]")


@dataclass(frozen=True)
class ChaosNormEstimate:
    value: float
    stderr: float
    method: str
    n: int
    undetermined: bool = False


@dataclass(frozen=True)
class SeriesReport:
    terms: tuple[float, ...]
    stderrs: tuple[float, ...]
    partial_sums: tuple[float, ...]
    classification: str  # CONVERGENT | DIVERGENT | UNDETERMINED
    growth_rate: float | None


def dirichlet_simplex_integral(alphas, t: float) -> float:
    """int over {0 < s_1 < ... < s_m < t} of prod (s_i - s_(i-1))^(-alpha_i)
    = prod Gamma(1 - alpha_i) / Gamma(m - sum alpha_i + 1) * t^(m - sum alpha_i)."""
    alphas = np.asarray(alphas, dtype=float)
    if np.any(alphas >= 1.0):
        raise InvalidParameterError("all exponents must satisfy alpha_i < 1")
    if t <= 0:
        raise InvalidParameterError("t must be positive")
    m = len(alphas)
    total = float(alphas.sum())
    logval = float(gammaln(1.0 - alphas).sum()) - float(gammaln(m - total + 1.0))
    return math.exp(logval) * t ** (m - total)


def f_n_eval(spec: ChaosKernelSpec, s) -> float:
    """Symmetrized kernel value on the ordered sector 0 < s_1 < ... < s_n < t:
    (1/n!) g(t - s_n, x) prod_(i=2..n) g(s_i - s_(i-1), 0)."""
    s = np.asarray(s, dtype=float)
    if len(s) != spec.n:
        raise InvalidParameterError("point dimension must equal the chaos order")
    if np.any(np.diff(s) <= 0) or s[0] <= 0 or s[-1] >= spec.t:
        raise InvalidParameterError("point must lie strictly inside the ordered sector")
    params = StableParams(spec.rho)
    val = transition_density(params, spec.t - s[-1], spec.x)
    g1 = density_at_origin(params)
    for gap in np.diff(s):
        val *= g1 * gap ** (-1.0 / spec.rho)
    return val / math.factorial(spec.n)


# ---------------------------------------------------------------------------
# quadrature route (n <= 3): singularity-exact grid contraction
# ---------------------------------------------------------------------------


def _gap_average_table(rho: float, dt: float, m: int) -> np.ndarray:
    """avg[k] = cell-pair average of g(|s'-s|, 0) at lag k, exact for the
    power kernel g(u, 0) = g1 |u|^(-1/rho) via its double antiderivative."""
    g1 = density_at_origin(StableParams(rho))
    e = 2.0 - 1.0 / rho
    psi = lambda u: g1 * np.abs(u) ** e / ((1.0 - 1.0 / rho) * e)
    k = np.arange(m, dtype=float)
    return (psi((k + 1) * dt) - 2.0 * psi(k * dt) + psi((k - 1) * dt)) / dt**2


def _end_average_vector(spec: ChaosKernelSpec, dt: float, m: int) -> np.ndarray:
    """avg over cell_j of g(t - s, x); exact power average at x = 0."""
    params = StableParams(spec.rho)
    if spec.x == 0.0:
        g1 = density_at_origin(params)
        e = 1.0 - 1.0 / spec.rho
        j = np.arange(m, dtype=float)
        hi = spec.t - j * dt
        lo = spec.t - (j + 1) * dt
        return g1 * (hi**e - np.clip(lo, 0.0, None) ** e) / (dt * e)
    nodes, weights = np.polynomial.legendre.leggauss(4)
    out = np.empty(m)
    for j in range(m):
        a, b = j * dt, (j + 1) * dt
        ss = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        vals = [transition_density(params, spec.t - s, spec.x) for s in ss]
        out[j] = 0.5 * np.dot(weights, vals)
    return out


def _chaos_norm_n1(spec: ChaosKernelSpec, H: float, m: int = 512) -> float:
    """a_1 = int int g(t-s, x) g(t-v, x) |s-v|^(2H-2) ds dv by grid
    contraction with exact cell weights on both singular factors."""
    dt = spec.t / m
    e = _end_average_vector(spec, dt, m)
    w = cell_kernel_table(TemporalKernel(H, spec.t), m)
    return float(e @ w @ e)


def _chaos_norm_grid(spec: ChaosKernelSpec, H: float, m: int) -> float:
    """a_n for n in {2, 3} via cell-averaged kernel tensors:
    a_n = n! * sum_(I,J) F_I F_J prod_i W_(I_i, J_i)."""
    dt = spec.t / m
    gap = _gap_average_table(spec.rho, dt, m)
    end = _end_average_vector(spec, dt, m)
    w = cell_kernel_table(TemporalKernel(H, spec.t), m)
    idx = np.arange(m)
    if spec.n == 2:
        i, j = np.meshgrid(idx, idx, indexing="ij")
        f = gap[np.abs(i - j)] * end[np.maximum(i, j)] / 2.0
        return 2.0 * float(np.sum(f * (w @ f @ w)))
    if spec.n == 3:
        i, j, k = np.meshgrid(idx, idx, idx, indexing="ij")
        srt = np.sort(np.stack([i, j, k], axis=-1), axis=-1)
        a, b, c = srt[..., 0], srt[..., 1], srt[..., 2]
        f = gap[b - a] * gap[c - b] * end[c] / 6.0
        g = np.einsum("ia,jb,kc,abc->ijk", w, w, w, f, optimize=True)
        return 6.0 * float(np.sum(f * g))
    raise InvalidParameterError("grid contraction implemented for n in {1, 2, 3}")


# ---------------------------------------------------------------------------
# Monte Carlo route (any n): Dirichlet importance sampling on ordered sectors
# ---------------------------------------------------------------------------


def _sample_ordered(spec: ChaosKernelSpec, n_samples: int, rng: np.random.Generator):
    """Ordered points and importance weights w with E[w * delta_s] = h(s) ds
    on the sector, h(s) = g(t-s_n, x) prod g(s_i - s_(i-1), 0).

    Spacings (s_1, s_2-s_1, ..., t-s_n) follow Dirichlet(1, a, ..., a) with
    a = 1 - 1/rho, which cancels every power singularity of h exactly; the
    weight is then constant at x = 0.
    """
    n, rho, t = spec.n, spec.rho, spec.t
    if rho <= 1.0:
        raise InvalidParameterError("MC chaos norms require rho > 1")
    a = 1.0 - 1.0 / rho
    g1 = density_at_origin(StableParams(rho))
    gaps = rng.dirichlet(np.concatenate([[1.0], np.full(n, a)]), size=n_samples) * t
    s = np.cumsum(gaps[:, :-1], axis=1)
    logc = n * math.log(g1) + n * a * math.log(t) + n * gammaln(a) - gammaln(1.0 + n * a)
    w = np.full(n_samples, math.exp(logc))
    if spec.x != 0.0:
        from .stable import _standard_density

        # g(lg, x) / (g1 lg^(-1/rho)) = g_std(|x| lg^(-1/rho)) / g1, which
        # lies in [0, 1] and stays finite even for vanishing gaps
        last_gap = gaps[:, -1]
        with np.errstate(divide="ignore", over="ignore"):
            zs = np.abs(spec.x) * last_gap ** (-1.0 / rho)
        ratio = np.array(
            [0.0 if not np.isfinite(z) or z > 1e6 else _standard_density(rho, z)[0] / g1 for z in zs]
        )
        w = w * ratio
    return s, w


def _chaos_norm_mc(
    spec: ChaosKernelSpec, H: float, n_samples: int, rng: np.random.Generator
) -> tuple[float, float]:
    """a_n = sum over permutations sigma of the ordered-sector double
    integral of h(s) h(v) prod |s_i - v_sigma(i)|^(2H-2); the sigma sum is
    exact for n <= 5 and estimated by one uniform sigma times n! beyond."""
    n = spec.n
    s, ws = _sample_ordered(spec, n_samples, rng)
    v, wv = _sample_ordered(spec, n_samples, rng)
    p = 2.0 * H - 2.0
    if n <= 5:
        ksum = np.zeros(n_samples)
        for sigma in itertools.permutations(range(n)):
            ksum += np.prod(np.abs(s - v[:, list(sigma)]) ** p, axis=1)
    else:
        sigmas = np.array([rng.permutation(n) for _ in range(n_samples)])
        vperm = np.take_along_axis(v, sigmas, axis=1)
        ksum = math.factorial(n) * np.prod(np.abs(s - vperm) ** p, axis=1)
    vals = ws * wv * ksum
    # batch-mean stderr: single-sample variance is heavy-tailed near H = 3/4
    nb = 32
    usable = (n_samples // nb) * nb
    bm = vals[:usable].reshape(nb, -1).mean(axis=1)
    return float(vals.mean()), float(bm.std(ddof=1) / math.sqrt(nb))


def chaos_norm(
    spec: ChaosKernelSpec,
    H: float,
    method: str = "auto",
    budget: int = 200_000,
    rng: np.random.Generator | None = None,
    rel_tol: float = 0.25,
) -> ChaosNormEstimate:
    """a_n = n! ||f_n||^2 in the H-kernel tensor norm.

    method 'quadrature' (n <= 3, deterministic), 'mc' (any n), or 'auto'.
    MC results whose standard error exceeds rel_tol relative are flagged
    undetermined rather than silently returned.
    """
    if not (0.5 < H < 1.0):
        raise InvalidParameterError(f"H must lie in (1/2, 1), got {H}")
    if method == "auto":
        method = "quadrature" if spec.n <= 3 else "mc"
    if method == "quadrature":
        if spec.n > 3:
            raise InvalidParameterError("quadrature route supports n <= 3 only")
        # two grid levels + Richardson step for the leading O(m^(-1/2))
        # cell-averaging bias of the singular factors
        evaluate = _chaos_norm_n1 if spec.n == 1 else _chaos_norm_grid
        m_hi = {1: 1024, 2: 384, 3: 128}[spec.n]
        v_lo = evaluate(spec, H, m_hi // 2)
        v_hi = evaluate(spec, H, m_hi)
        r = 2.0**-0.5
        val = (v_hi - r * v_lo) / (1.0 - r)
        return ChaosNormEstimate(value=val, stderr=abs(v_hi - v_lo), method="quadrature", n=spec.n)
    if method != "mc":
        raise InvalidParameterError(f"unknown method {method!r}")
    if rng is None:
        rng = np.random.default_rng()
    val, err = _chaos_norm_mc(spec, H, budget, rng)
    flag = val > 0 and err > rel_tol * abs(val)
    return ChaosNormEstimate(value=val, stderr=err, method="mc", n=spec.n, undetermined=flag)


# ---------------------------------------------------------------------------
# Gamma-function bound formulas and series classification
# ---------------------------------------------------------------------------


def bound_formulas(n: int, rho: float, H: float, t: float, C: float) -> tuple[float, float]:
    """Closed-form lower/upper envelopes for a_n with caller-supplied C.

    lower = C^(2n) n! G(1-1/rho)^(2(n-1)) / G(n(1-1/rho)+1/rho+2)^2
            * t^(2n(H-1/rho)+2/rho+2)
    upper = C^(2n) (n!)^(2H-1) G(1-1/(2H))^(2nH) / G(n(1-1/(2H))+1)^(2H)
            * t^(n(2H-1))        (stated for rho = 2)
    """
    if C <= 0:
        raise InvalidParameterError("C must be positive")
    if not (0.5 < H < 1.0) or not (0.0 < rho <= 2.0):
        raise InvalidParameterError("need rho in (0, 2] and H in (1/2, 1)")
    a = 1.0 - 1.0 / rho
    log_lower = (
        2 * n * math.log(C)
        + gammaln(n + 1)
        + 2 * (n - 1) * gammaln(a)
        - 2 * gammaln(n * a + 1.0 / rho + 2.0)
        + (2 * n * (H - 1.0 / rho) + 2.0 / rho + 2.0) * math.log(t)
    )
    b = 1.0 - 1.0 / (2.0 * H)
    log_upper = (
        2 * n * math.log(C)
        + (2 * H - 1.0) * gammaln(n + 1)
        + 2 * n * H * gammaln(b)
        - 2.0 * H * gammaln(n * b + 1.0)
        + n * (2.0 * H - 1.0) * math.log(t)
    )
    return math.exp(log_lower), math.exp(log_upper)


def _fit_growth(terms: np.ndarray) -> float | None:
    """limsup a_n^(1/n) proxy: least-squares slope of log a_n over the top
    half of the computed orders, exponentiated."""
    n = len(terms)
    if n < 2 or np.any(terms[n // 2 :] <= 0):
        return None
    ns = np.arange(1, n + 1)
    lo = n // 2
    slope = np.polyfit(ns[lo:], np.log(terms[lo:]), 1)[0]
    return float(math.exp(slope))


def _classify(rate: float | None) -> str:
    if rate is None:
        return "UNDETERMINED"
    if rate < 0.9:
        return "CONVERGENT"
    if rate > 1.1:
        return "DIVERGENT"
    return "UNDETERMINED"


def second_moment_series(
    rho: float,
    H: float,
    t: float,
    x: float,
    n_max: int,
    budget: int = 200_000,
    rng: np.random.Generator | None = None,
) -> SeriesReport:
    """a_n for n <= n_max with growth-rate fit and phase classification.

    CONVERGENT if the fitted rate is < 0.9, DIVERGENT if > 1.1, otherwise
    UNDETERMINED (honest dead zone near criticality); MC failures at high
    orders also yield UNDETERMINED.
    """
    if n_max < 3:
        raise InvalidParameterError("n_max must be >= 3")
    if rng is None:
        rng = np.random.default_rng()
    terms, errs = [], []
    undet = False
    for n in range(1, n_max + 1):
        est = chaos_norm(ChaosKernelSpec(n=n, rho=rho, t=t, x=x), H, "auto", budget, rng)
        terms.append(est.value)
        errs.append(est.stderr)
        undet = undet or est.undetermined
    terms = np.array(terms)
    rate = _fit_growth(terms)
    verdict = "UNDETERMINED" if undet else _classify(rate)
    return SeriesReport(
        terms=tuple(terms),
        stderrs=tuple(errs),
        partial_sums=tuple(np.cumsum(terms)),
        classification=verdict,
        growth_rate=rate,
    )


@dataclass(frozen=True)
class TcBracket:
    t_lo: float
    t_hi: float
    rate_at_unit_t: float
    n_max: int
    low_confidence: bool
    classification_lo: str
    classification_hi: str


def tc_bracket(
    H: float,
    x: float,
    n_max: int,
    budget: int = 200_000,
    rng: np.random.Generator | None = None,
) -> TcBracket:
    """Bracket for the L^2 blow-up time at rho = 2.

    For x = 0 the terms scale exactly as a_n(t) = a_n(1) t^(n(2H-1)), so the
    fitted growth rate is r(t) = r(1) t^(2H-1) and the dead-zone edges map
    to closed-form t values; endpoints are re-classified to confirm.
    """
    if x != 0.0:
        raise InvalidParameterError("bracketing uses exact t-scaling, defined at x = 0")
    rho = 2.0
    if rng is None:
        rng = np.random.default_rng()
    terms = []
    for n in range(1, n_max + 1):
        est = chaos_norm(ChaosKernelSpec(n=n, rho=rho, t=1.0, x=0.0), H, "auto", budget, rng)
        terms.append(est.value)
    r1 = _fit_growth(np.array(terms))
    if r1 is None or r1 <= 0:
        raise InvalidParameterError("growth fit failed; increase n_max or budget")
    ex = 1.0 / (2.0 * H - 1.0)
    t_lo = (0.9 / r1) ** ex
    t_hi = (1.1 / r1) ** ex
    cl_lo = _classify(r1 * (0.99 * t_lo) ** (2.0 * H - 1.0))
    cl_hi = _classify(r1 * (1.01 * t_hi) ** (2.0 * H - 1.0))
    return TcBracket(
        t_lo=t_lo,
        t_hi=t_hi,
        rate_at_unit_t=r1,
        n_max=n_max,
        low_confidence=n_max <= 3,
        classification_lo=cl_lo,
        classification_hi=cl_hi,
    )


def stratonovich_mean_series(rho: float, H: float, t: float, n_max: int, C: float) -> tuple[SeriesReport, SeriesReport]:
    """Lower/upper envelope series for the mean of a Stratonovich solution:
    term_n(lower) = t^(2n(alpha+H-1)) C^(2n) (2n)! / (2^n n! Gamma(2n alpha + 1)),
    term_n(upper) = t^(2n(alpha+H-1)) C^(2n) (2n)! / (2^n n! Gamma(2n(alpha+H-1))),
    with alpha = 1 - 1/rho; term_0 = 1 in both.  Ratio-test classification
    with the same dead zone as the chaos series."""
    if not (1.0 < rho <= 2.0):
        raise InvalidParameterError("rho must lie in (1, 2]")
    if C <= 0 or t <= 0:
        raise InvalidParameterError("C and t must be positive")
    alpha = 1.0 - 1.0 / rho
    beta = alpha + H - 1.0

    def terms(denom_arg):
        out = [1.0]
        for n in range(1, n_max + 1):
            logv = (
                2 * n * beta * math.log(t)
                + 2 * n * math.log(C)
                + gammaln(2 * n + 1)
                - n * math.log(2.0)
                - gammaln(n + 1)
                - gammaln(denom_arg(n))
            )
            out.append(math.exp(logv))
        return np.array(out)

    def report(vals):
        # successive ratios behave like c * n^gamma for these Gamma-product
        # series; fit gamma on the top half to decide whether the ratio
        # escapes to infinity, then apply the usual dead zone to its limit
        if len(vals) >= 5:
            ratios = vals[1:] / vals[:-1]
            ns = np.arange(1, len(ratios) + 1, dtype=float)
            lo = len(ratios) // 2
            gamma = np.polyfit(np.log(ns[lo:]), np.log(ratios[lo:]), 1)[0]
            last = float(ratios[-1])
            if gamma > 0.1:
                verdict = "DIVERGENT"
            elif last < 0.9:
                verdict = "CONVERGENT"
            elif last > 1.1:
                verdict = "DIVERGENT"
            else:
                verdict = "UNDETERMINED"
            rate = last
        else:
            verdict, rate = "UNDETERMINED", None
        return SeriesReport(
            terms=tuple(vals),
            stderrs=tuple(0.0 for _ in vals),
            partial_sums=tuple(np.cumsum(vals)),
            classification=verdict,
            growth_rate=rate,
        )

    lower = terms(lambda n: 2 * n * alpha + 1.0)
    if beta <= 0:
        raise InvalidParameterError("upper envelope requires alpha + H > 1")
    upper = terms(lambda n: 2 * n * beta)
    return report(lower), report(upper)
