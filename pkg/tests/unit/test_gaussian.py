"""Unit tests for Gaussian calculus, constants and quadrature."""

import math

import numpy as np
import pytest
from hypothesis import given, settings as hypothesis_settings
from hypothesis import strategies as st

from lab.core.constants import (
    ConstantsTable,
    alpha_exponent,
    c_constant,
    k_constant,
    tabulated_k,
)
from lab.core.gaussian import (
    abs_moment,
    central_moment_even,
    enumerate_pairings,
    exp_moment,
    gaussian_sample,
    holder_telescoping_check,
    lq_estimate,
    mc_mean,
    mixed_moment_rhs,
    spawn_rng,
    translation_identity_residual,
    wick_integral,
)
from lab.core.quadrature import expect_standard_normal, gauss_hermite_rule, tensor_grid
from lab.exceptions import InvalidArgumentError, NumericalOverflowError, ResourceLimitError
from lab.models.gaussian import GaussianMeasureSpec


class TestConstants:
    """Test cases for K(p), C(p) and alpha(p)."""

    def test_known_values(self):
        """Test K(2) = 1 and K(1) = sqrt(2/pi)."""
        assert k_constant(2.0) == pytest.approx(1.0, rel=1e-14)
        assert k_constant(1.0) == pytest.approx(math.sqrt(2.0 / math.pi), rel=1e-14)

    def test_alpha_and_c(self):
        """Test alpha and C branch at p = 2."""
        assert alpha_exponent(1.5) == 2.0
        assert alpha_exponent(4.0) == 4.0
        assert c_constant(2.0, 3.0) == 1.0
        assert c_constant(4.0, 1.0) == pytest.approx(k_constant(4.0))

    def test_rejects_small_p(self):
        """Test p < 1 is outside the domain."""
        with pytest.raises(InvalidArgumentError):
            k_constant(0.5)

    @given(st.floats(min_value=1.0, max_value=40.0))
    def test_inline_matches_tabulated(self, p):
        """Test the two K(p) computations agree."""
        assert k_constant(p) == pytest.approx(tabulated_k(p), rel=1e-12)

    def test_table_agrees(self):
        """Test every table row reports agreement."""
        table = ConstantsTable.build([1.0, 2.0, 3.0, 4.0, 8.0], trace=2.0)
        assert all(row.agrees for row in table.rows)
        assert table.as_dict()[8.0].alpha == 8.0


class TestMoments:
    """Test cases for closed-form moments."""

    def test_abs_moment_second(self):
        """Test E|l_a|^2 = h |a|^2."""
        assert abs_moment(3.0, 2.0, 0.5) == pytest.approx(4.5)

    def test_abs_moment_matches_k(self):
        """Test ||l_a||_p = K(p) sqrt(h) |a|."""
        p, h, a = 3.0, 2.0, 1.7
        assert abs_moment(a, p, h) ** (1 / p) == pytest.approx(k_constant(p) * math.sqrt(h) * a)

    def test_exp_moment_real_and_imaginary(self):
        """Test exp moments of pure real and pure imaginary shifts."""
        u = np.array([1.0, 0.0])
        assert exp_moment(u, [0.0, 0.0], 2.0) == pytest.approx(math.exp(1.0))
        assert exp_moment([0.0, 0.0], u, 2.0) == pytest.approx(math.exp(-1.0))

    def test_mixed_moment_reduces_at_b_zero(self):
        """Test b = 0 recovers the absolute moment."""
        value = mixed_moment_rhs(1.3, 0.0, 0.0, 3.0, 0.7)
        assert value == pytest.approx(abs_moment(1.3, 3.0, 0.7), rel=1e-8)

    def test_mixed_moment_even_p(self):
        """Test p = 2 against the closed form e^{h|b|^2/2}(h|a|^2 + h^2 <a,b>^2)."""
        h, na, dot, nb = 0.5, 1.0, 0.3, 0.6
        expected = math.exp(0.5 * h * nb ** 2) * (h * na ** 2 + (h * dot) ** 2)
        assert mixed_moment_rhs(na, dot, nb, 2.0, h) == pytest.approx(expected, rel=1e-12)

    def test_mixed_moment_cauchy_schwarz(self):
        """Test an impossible inner product is rejected."""
        with pytest.raises(InvalidArgumentError):
            mixed_moment_rhs(1.0, 2.0, 1.0, 2.0, 1.0)

    def test_central_moment(self):
        """Test E y^4 = 3 and E y^6 = 15."""
        assert central_moment_even(2) == pytest.approx(3.0)
        assert central_moment_even(3) == pytest.approx(15.0)


class TestWick:
    """Test cases for pairings and Wick sums."""

    @pytest.mark.parametrize("two_p,count", [(2, 1), (4, 3), (6, 15), (8, 105)])
    def test_pairing_counts(self, two_p, count):
        """Test (2p-1)!! pairings."""
        assert len(enumerate_pairings(two_p)) == count

    def test_odd_order_rejected(self):
        """Test odd orders are rejected."""
        with pytest.raises(InvalidArgumentError):
            enumerate_pairings(3)
        with pytest.raises(InvalidArgumentError):
            wick_integral([[1.0]], 1.0)
        assert wick_integral([[1.0]], 1.0, allow_odd=True) == 0.0

    def test_wick_repeated_vector(self):
        """Test E l_a^{2p} = (2p-1)!! h^p |a|^{2p}."""
        a = [0.6, 0.8]
        assert wick_integral([a] * 4, 2.0) == pytest.approx(3.0 * 4.0)

    @hypothesis_settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(min_value=-2, max_value=2), min_size=3, max_size=3))
    def test_wick_matches_quadrature(self, coords):
        """Test the Wick sum of l_a l_b l_a l_b against a direct expectation."""
        a = np.array(coords)
        b = np.array([1.0, -0.5, 0.25])
        nodes, weights = tensor_grid(3, 8)
        values = (nodes @ a) ** 2 * (nodes @ b) ** 2
        assert wick_integral([a, b, a, b], 1.0) == pytest.approx(float(weights @ values), rel=1e-9, abs=1e-9)


class TestSampling:
    """Test cases for seeded Gaussian sampling."""

    def test_deterministic_and_thread_independent(self):
        """Test shards make the batch independent of the thread count."""
        spec = GaussianMeasureSpec(dim=3, variance=2.0)
        one = gaussian_sample(spec, seed=5, count=1000, shard_size=128, threads=1)
        four = gaussian_sample(spec, seed=5, count=1000, shard_size=128, threads=4)
        assert np.array_equal(one.samples, four.samples)

    def test_streams_differ(self):
        """Test distinct streams give distinct draws."""
        spec = GaussianMeasureSpec(dim=2, variance=1.0)
        a = gaussian_sample(spec, seed=5, count=10, stream=0)
        b = gaussian_sample(spec, seed=5, count=10, stream=1)
        assert not np.array_equal(a.samples, b.samples)

    def test_variance(self, gaussian_batch):
        """Test the sample covariance is near the identity."""
        cov = np.cov(gaussian_batch.samples.T)
        assert np.max(np.abs(cov - np.eye(8))) < 0.05

    def test_bad_count(self):
        """Test sample count bounds."""
        with pytest.raises(InvalidArgumentError):
            gaussian_sample(GaussianMeasureSpec(dim=1, variance=1.0), seed=0, count=0)

    def test_spawn_rng_keys(self):
        """Test auxiliary streams are reproducible and independent."""
        assert spawn_rng(3, 1).random() == spawn_rng(3, 1).random()
        assert spawn_rng(3, 1).random() != spawn_rng(3, 2).random()


class TestEstimators:
    """Test cases for Monte Carlo estimators."""

    def test_mc_mean(self):
        """Test mean and standard error."""
        mean, stderr = mc_mean(np.array([1.0, 3.0]))
        assert mean == 2.0
        assert stderr == pytest.approx(1.0)

    def test_mc_mean_rejects_nonfinite(self):
        """Test non-finite values raise."""
        with pytest.raises(NumericalOverflowError):
            mc_mean(np.array([1.0, np.inf]))

    def test_lq_estimate_constant(self):
        """Test a constant sample has zero jackknife error."""
        estimate, stderr = lq_estimate(np.full(50, -2.0), 3.0)
        assert estimate == pytest.approx(2.0)
        assert stderr == pytest.approx(0.0, abs=1e-12)


class TestTranslation:
    """Test cases for the translation identity."""

    def test_linear_symbol_residual(self, trig):
        """Test the residual is within a few standard errors of zero."""
        h = 1.0
        batch = gaussian_sample(GaussianMeasureSpec(dim=8, variance=h), seed=2, count=50_000)
        a = np.zeros(8)
        a[0] = 0.3
        residual, stderr = translation_identity_residual(trig, a, h, batch)
        assert residual <= 5 * stderr + 1e-12

    def test_variance_mismatch(self, trig, gaussian_batch):
        """Test the batch variance must equal h."""
        with pytest.raises(InvalidArgumentError):
            translation_identity_residual(trig, np.zeros(8), 2.0, gaussian_batch)


class TestHolder:
    """Test cases for the telescoped Hoelder bound."""

    def test_bound_holds(self):
        """Test both bounds dominate the difference of products."""
        rng = np.random.default_rng(0)
        f = rng.uniform(-1, 1, size=(3, 40))
        g = f + 0.1 * rng.uniform(-1, 1, size=(3, 40))
        report = holder_telescoping_check(f, g, 2.0, np.full(40, 1 / 40))
        assert report.passed
        precise, coarse = report.rows
        assert precise.bound <= coarse.bound + 1e-12

    def test_weights_validated(self):
        """Test weights must be a probability vector."""
        with pytest.raises(InvalidArgumentError):
            holder_telescoping_check([[1.0]], [[1.0]], 1.0, [0.5])


class TestQuadrature:
    """Test cases for Gauss-Hermite rules."""

    def test_rule_normalized(self):
        """Test weights sum to one and reproduce E v^2 = 1."""
        nodes, weights = gauss_hermite_rule(10)
        assert weights.sum() == pytest.approx(1.0)
        assert weights @ nodes ** 2 == pytest.approx(1.0)

    def test_order_bounds(self):
        """Test orders outside 1..512 are rejected."""
        with pytest.raises(InvalidArgumentError):
            gauss_hermite_rule(0)

    def test_tensor_grid_budget(self):
        """Test the grid budget is enforced."""
        with pytest.raises(ResourceLimitError):
            tensor_grid(4, 40, budget=1000)
        nodes, weights = tensor_grid(0, 40)
        assert nodes.shape == (1, 0)
        assert weights.tolist() == [1.0]

    def test_expect_with_kink(self):
        """Test E|v| = sqrt(2/pi) through the split integrator."""
        value, _ = expect_standard_normal(np.abs, kink=0.0)
        assert value == pytest.approx(math.sqrt(2.0 / math.pi), rel=1e-9)

    def test_expect_smooth(self):
        """Test E cos(v) = e^{-1/2}."""
        value, _ = expect_standard_normal(np.cos)
        assert value == pytest.approx(math.exp(-0.5), rel=1e-12)
