import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaln

from shelab.chaos import (
    ChaosKernelSpec,
    bound_formulas,
    chaos_norm,
    dirichlet_simplex_integral,
    f_n_eval,
    second_moment_series,
    stratonovich_mean_series,
    tc_bracket,
)
from shelab.errors import InvalidParameterError


class TestDirichlet:
    def test_order_one_volume(self):
        assert dirichlet_simplex_integral((0.0,), 1.0) == pytest.approx(1.0)

    def test_half_half_pi(self):
        assert dirichlet_simplex_integral((0.5, 0.5), 1.0) == pytest.approx(math.pi, abs=1e-12)
        assert dirichlet_simplex_integral((0.5, 0.5), 2.0) == pytest.approx(2 * math.pi, abs=1e-12)

    def test_plain_simplex_volume(self):
        # all exponents zero: volume of the ordered simplex is t^m / m!
        assert dirichlet_simplex_integral((0.0,) * 4, 2.0) == pytest.approx(16.0 / 24.0)

    def test_rejects_alpha_ge_one(self):
        with pytest.raises(InvalidParameterError):
            dirichlet_simplex_integral((0.5, 1.0), 1.0)

    def test_vs_mc_order_3(self, rng):
        alphas = (0.3, 0.5, 0.2)
        t = 1.0
        n = 300_000
        u = np.sort(rng.uniform(0, t, size=(n, 3)), axis=1)
        gaps = np.diff(np.concatenate([np.zeros((n, 1)), u], axis=1), axis=1)
        vals = np.prod(gaps ** (-np.array(alphas)), axis=1)
        mc = vals.mean() * t**3 / 6.0
        assert mc == pytest.approx(dirichlet_simplex_integral(alphas, t), rel=0.02)


class TestKernelEval:
    def test_n1_gaussian(self):
        spec = ChaosKernelSpec(n=1, rho=2.0, t=1.0, x=0.0)
        assert f_n_eval(spec, (0.5,)) == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=1e-9)

    def test_n2_cauchy(self):
        spec = ChaosKernelSpec(n=2, rho=1.0, t=1.0, x=0.0)
        ref = 0.5 * (1.0 / (0.5 * math.pi)) * (1.0 / (0.25 * math.pi))
        assert f_n_eval(spec, (0.25, 0.5)) == pytest.approx(ref, rel=1e-9)

    def test_rejects_unordered(self):
        spec = ChaosKernelSpec(n=2, rho=2.0, t=1.0, x=0.0)
        with pytest.raises(InvalidParameterError):
            f_n_eval(spec, (0.5, 0.25))

    def test_terminal_singularity_scaling(self):
        # for rho < 2 the kernel blows up like (t - s_n)^(-1/rho)
        spec = ChaosKernelSpec(n=1, rho=1.5, t=1.0, x=0.0)
        r = f_n_eval(spec, (1.0 - 1e-6,)) / f_n_eval(spec, (1.0 - 4e-6,))
        assert r == pytest.approx(4.0 ** (1 / 1.5), rel=1e-3)


class TestChaosNorm:
    def test_n1_mc_vs_quadrature(self, rng):
        for rho, H, t, x in [(2.0, 0.75, 1.0, 0.0), (2.0, 0.8, 0.5, 0.5), (1.5, 0.85, 1.0, 0.0)]:
            spec = ChaosKernelSpec(n=1, rho=rho, t=t, x=x)
            q = chaos_norm(spec, H, "quadrature")
            mc = chaos_norm(spec, H, "mc", budget=150_000, rng=rng)
            comb = math.hypot(q.stderr, mc.stderr)
            assert abs(q.value - mc.value) <= 3 * comb + 0.005 * q.value

    def test_n2_two_seeds_agree(self):
        spec = ChaosKernelSpec(n=2, rho=2.0, t=1.0, x=0.0)
        a = chaos_norm(spec, 0.75, "mc", budget=100_000, rng=np.random.default_rng(1))
        b = chaos_norm(spec, 0.75, "mc", budget=100_000, rng=np.random.default_rng(2))
        assert abs(a.value - b.value) <= 3 * math.hypot(a.stderr, b.stderr)

    def test_t_scaling_n1(self):
        # a_1(t) = a_1(1) t^(2H - 2/rho) by substitution (x = 0)
        H, rho = 0.8, 2.0
        q1 = chaos_norm(ChaosKernelSpec(n=1, rho=rho, t=1.0, x=0.0), H, "quadrature").value
        q2 = chaos_norm(ChaosKernelSpec(n=1, rho=rho, t=0.25, x=0.0), H, "quadrature").value
        assert q2 / q1 == pytest.approx(0.25 ** (2 * H - 1.0), rel=1e-4)

    def test_a_n_nondecreasing_in_t(self):
        for n in (1, 2):
            lo = chaos_norm(ChaosKernelSpec(n=n, rho=2.0, t=0.3, x=0.0), 0.75, "quadrature").value
            hi = chaos_norm(ChaosKernelSpec(n=n, rho=2.0, t=0.8, x=0.0), 0.75, "quadrature").value
            assert lo < hi

    def test_quadrature_rejects_high_order(self):
        with pytest.raises(InvalidParameterError):
            chaos_norm(ChaosKernelSpec(n=4, rho=2.0, t=1.0, x=0.0), 0.75, "quadrature")


class TestBounds:
    def test_log_gamma_recomputation(self):
        n, rho, H, t, C = 1, 2.0, 0.75, 1.0, 1.0
        lower, upper = bound_formulas(n, rho, H, t, C)
        a = 0.5
        ref_lower = math.exp(gammaln(2) + 0 * gammaln(a) - 2 * gammaln(a + 0.5 + 2.0))
        assert lower == pytest.approx(ref_lower, rel=1e-12)
        b = 1.0 - 1.0 / (2 * H)
        ref_upper = math.exp(0.5 * gammaln(2) + 2 * H * gammaln(b) - 2 * H * gammaln(b + 1.0))
        assert upper == pytest.approx(ref_upper, rel=1e-12)

    def test_lower_ratio_diverges_rho_lt_2(self):
        l49 = bound_formulas(49, 1.5, 0.8, 1.0, 1.0)[0]
        l50 = bound_formulas(50, 1.5, 0.8, 1.0, 1.0)[0]
        l9 = bound_formulas(9, 1.5, 0.8, 1.0, 1.0)[0]
        l10 = bound_formulas(10, 1.5, 0.8, 1.0, 1.0)[0]
        assert l50 / l49 > l10 / l9 > 1.0

    def test_upper_ratio_geometric_rho_2(self):
        # the ratio limit carries a fixed Gamma-constant on top of the
        # geometric factor C^2 t^(2H-1): Gamma(b)^(2H) * b^(1-2H), b = 1-1/(2H)
        H, t, C = 0.75, 1.0, 1.0
        u199 = bound_formulas(199, 2.0, H, t, C)[1]
        u200 = bound_formulas(200, 2.0, H, t, C)[1]
        b = 1.0 - 1.0 / (2 * H)
        const = math.gamma(b) ** (2 * H) * b ** (1.0 - 2 * H)
        assert u200 / u199 == pytest.approx(const * C**2 * t ** (2 * H - 1), rel=0.05)

    def test_upper_envelope_holds_with_calibrated_constant(self):
        rho, H, t = 2.0, 0.75, 0.5
        a = [
            chaos_norm(ChaosKernelSpec(n=n, rho=rho, t=t, x=0.0), H, "quadrature").value
            for n in (1, 2, 3)
        ]
        c_up = math.sqrt(a[0] / bound_formulas(1, rho, H, t, 1.0)[1])
        for n in (2, 3):
            assert a[n - 1] <= bound_formulas(n, rho, H, t, c_up)[1]

    @pytest.mark.xfail(
        strict=True,
        reason=(
            "with both constants calibrated at n=1 the lower envelope already "
            "exceeds the upper envelope at n=2 (36.4 > 0.59 at rho=2, H=0.75, "
            "t=0.5), so no measured a_2 can lie between them; the lower-bound "
            "constant is existential and cannot be fixed by n=1 calibration"
        ),
    )
    def test_sandwich_with_calibrated_constants(self):
        rho, H, t = 2.0, 0.75, 0.5
        a = [
            chaos_norm(ChaosKernelSpec(n=n, rho=rho, t=t, x=0.0), H, "quadrature").value
            for n in (1, 2, 3)
        ]
        lo1, up1 = bound_formulas(1, rho, H, t, 1.0)
        c_lo = math.sqrt(a[0] / lo1)
        c_up = math.sqrt(a[0] / up1)
        for n in (2, 3):
            lower = bound_formulas(n, rho, H, t, c_lo)[0]
            upper = bound_formulas(n, rho, H, t, c_up)[1]
            assert lower <= a[n - 1] <= upper


class TestSeries:
    def test_convergent_small_t(self, rng):
        rep = second_moment_series(2.0, 0.75, 0.1, 0.0, 5, budget=100_000, rng=rng)
        assert rep.classification == "CONVERGENT"
        assert np.all(np.diff(rep.partial_sums) >= 0)
        assert np.all(np.asarray(rep.terms) >= 0)

    def test_divergent_large_t(self, rng):
        rep = second_moment_series(2.0, 0.75, 16.0, 0.0, 5, budget=100_000, rng=rng)
        assert rep.classification == "DIVERGENT"

    def test_n_max_validation(self, rng):
        with pytest.raises(InvalidParameterError):
            second_moment_series(2.0, 0.75, 0.1, 0.0, 2, rng=rng)


class TestTcBracket:
    def test_bracket_endpoints(self, rng):
        br = tc_bracket(0.75, 0.0, 5, budget=100_000, rng=rng)
        assert 0.0 < br.t_lo < br.t_hi < math.inf
        assert br.classification_lo == "CONVERGENT"
        assert br.classification_hi == "DIVERGENT"
        assert not br.low_confidence

    def test_low_confidence_flag(self, rng):
        br = tc_bracket(0.75, 0.0, 3, budget=50_000, rng=rng)
        assert br.low_confidence


class TestStratonovich:
    def test_alpha_half_small_t_lower_convergent(self):
        # alpha = 1/2: the lower-series ratio tends to 2 t^(2(alpha+H-1)),
        # below 1 for small t
        lower, _ = stratonovich_mean_series(2.0, 0.8, 0.05, 30, 1.0)
        assert lower.classification == "CONVERGENT"
        assert np.all(np.diff(lower.partial_sums) > 0)

    def test_upper_envelope_ratio_grows(self):
        # the upper envelope's ratio grows like n^(1-2(alpha+H-1)), which is
        # unbounded whenever alpha + H - 1 < 1/2 (always, for rho <= 2)
        _, upper = stratonovich_mean_series(2.0, 0.8, 0.05, 30, 1.0)
        assert upper.classification == "DIVERGENT"

    def test_lower_divergent_when_alpha_below_half(self):
        # alpha = 0.4 (rho = 5/3): the lower series has ratio growing like
        # n^(1 - 2 alpha), unbounded
        lower, _ = stratonovich_mean_series(5.0 / 3.0, 0.9, 1.0, 60, 1.0)
        assert lower.classification == "DIVERGENT"

    def test_empty_partial_sum(self):
        lower, upper = stratonovich_mean_series(2.0, 0.8, 1.0, 0, 1.0)
        assert lower.partial_sums[0] == 1.0
        assert upper.partial_sums[0] == 1.0


@given(
    n=st.integers(1, 30),
    rho=st.floats(1.1, 2.0),
    H=st.floats(0.55, 0.95),
    t=st.floats(0.1, 4.0),
)
@settings(max_examples=40, deadline=None)
def test_bounds_positive(n, rho, H, t):
    lower, upper = bound_formulas(n, rho, H, t, 1.0)
    assert lower > 0 and upper > 0
