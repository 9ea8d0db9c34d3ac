"""Unit tests for the stochastic-extension service."""

import math

import numpy as np
import pytest

from lab.core.constants import k_constant
from lab.core.gaussian import gaussian_sample
from lab.core.geometry import coordinate_chain, rotated_chain
from lab.exceptions import InvalidArgumentError
from lab.models.gaussian import GaussianMeasureSpec
from lab.models.hilbert import Subspace, TraceClassOperator
from lab.services.extension_service import (
    ExtensionService,
    qa_rate_bound,
    residual_norms,
    sm_rate_bound,
)


@pytest.fixture
def service():
    return ExtensionService(seed=3, mc_samples=4000, max_samples=4000)


@pytest.fixture
def chain():
    return coordinate_chain(8, [0, 1, 2, 4, 8])


class TestBounds:
    """Test cases for the closed-form rate bounds."""

    def test_residual_norms(self):
        """Test |v - pi_E v| column by column."""
        E = Subspace.coordinate(3, 1)
        norms = residual_norms(E, np.array([[3.0, 1.0], [4.0, 0.0], [0.0, 0.0]]))
        assert norms.tolist() == pytest.approx([4.0, 0.0])

    def test_sm_rate_bound_extremes(self, frame, eps):
        """Test the S_m bound at the zero and full subspaces."""
        zero = sm_rate_bound(2.0, 2.0, 1.0, Subspace.zero(8), frame, eps.values)
        assert zero == pytest.approx(2.0 * eps.total)
        assert sm_rate_bound(2.0, 2.0, 1.0, Subspace.full(8), frame, eps.values) == 0.0

    def test_qa_rate_bound(self, operator):
        """Test the S(Q_A) bound at p = 2 reduces to sqrt(h sum lambda |u - pi u|^2)."""
        E = Subspace.coordinate(8, 2)
        tail = float(np.sum(operator.eigenvalues[2:]))
        assert qa_rate_bound(1.0, 2.0, 0.5, E, operator) == pytest.approx(math.sqrt(0.5 * tail))
        assert qa_rate_bound(1.0, 2.0, 0.5, E, TraceClassOperator.zero(8)) == 0.0

    def test_prodscal_bound_single_factor(self, geometric_direction):
        """Test one linear factor gives K(p) h^{1/2} |a - pi a|."""
        E = Subspace.coordinate(8, 3)
        bound = ExtensionService.prodscal_bound(geometric_direction[None, :], [1], E, 3.0, 2.0)
        gap = float(np.linalg.norm(geometric_direction[3:]))
        assert bound == pytest.approx(k_constant(3.0) * math.sqrt(2.0) * gap)


class TestLqDistance:
    """Test cases for L^q distances."""

    def test_full_subspace_is_zero(self, service, trig):
        """Test the top of a full chain gives zero without sampling."""
        batch = gaussian_sample(GaussianMeasureSpec(dim=8, variance=1.0), 0, 10)
        assert service.lq_distance(trig, Subspace.full(8), 2.0, 1.0, batch) == (0.0, 0.0)

    def test_variance_mismatch(self, service, trig):
        """Test the batch variance must equal h."""
        batch = gaussian_sample(GaussianMeasureSpec(dim=8, variance=1.0), 0, 10)
        with pytest.raises(InvalidArgumentError):
            service.lq_distance(trig, Subspace.zero(8), 2.0, 0.5, batch)

    def test_adaptive_stops_at_cap(self, service):
        """Test the batch never grows past the sample cap."""
        _, _, count = service.adaptive_lq(lambda b: b.samples[:, 0], 2, 1.0, 2.0, 1e-9, stream=1)
        assert count == 4000


class TestRates:
    """Test cases for chain rate checks."""

    def test_sm_rate(self, service, trig, chain, within_sigma):
        """Test the S_m rate along a coordinate chain."""
        report = service.sm_rate_check(trig, chain, q=2.0, h=1.0)
        assert [row.params["n"] for row in report.rows] == [0.0, 1.0, 2.0, 4.0, 8.0]
        assert all(within_sigma(row) for row in report.rows)
        assert report.lhs[-1] == 0.0
        monotone = service.chain_monotonicity(report)
        assert monotone.check_id == "sm_rate_monotone"
        assert all(within_sigma(row) for row in monotone.rows)

    def test_sm_cauchy(self, service, trig, chain, within_sigma):
        """Test consecutive-step differences."""
        report = service.sm_cauchy_check(trig, chain, q=1.0, h=1.0)
        assert len(report.rows) == 4
        assert all(within_sigma(row) for row in report.rows)

    def test_sm_rate_requires_claim(self, service, quadratic, chain):
        """Test symbols without an S_1 claim are rejected."""
        with pytest.raises(InvalidArgumentError):
            service.sm_rate_check(quadratic, chain, q=2.0, h=1.0)

    def test_qa_rate_rotated_chain(self, service, trig, within_sigma):
        """Test the S(Q_A) rate along a rotated chain."""
        report = service.qa_rate_check(trig, rotated_chain(8, [1, 3, 6], seed=2), p=4.0, h=0.5)
        assert all(within_sigma(row) for row in report.rows)
        assert all(row.note is None for row in report.rows)

    def test_projection_moment(self, service, operator, within_sigma):
        """Test the projected Q_A moment at p = 2 with its exact value."""
        report = service.qa_projection_moment_check(operator, Subspace.coordinate(8, 4), p=2.0, h=1.0)
        assert [row.label for row in report.rows] == ["bound", "e_free_bound", "exact"]
        assert all(within_sigma(row) for row in report.rows)

    def test_derivative_extension(self, service, trig, chain, within_sigma):
        """Test first and second derivative extension rates."""
        x = np.full(8, 0.2)
        for k in (1, 2):
            report = service.derivative_extension_rate(trig, x, k, chain, p=2.0, h=1.0)
            assert report.check_id == f"derivative_extension_k{k}"
            assert all(within_sigma(row) for row in report.rows)

    def test_derivative_extension_order(self, service, trig, chain):
        """Test k = 0 is rejected."""
        with pytest.raises(InvalidArgumentError):
            service.derivative_extension_rate(trig, np.zeros(8), 0, chain, p=2.0, h=1.0)


class TestScalarProducts:
    """Test cases for products of scalar products."""

    def test_prodscal_rate(self, service, geometric_direction, chain, within_sigma):
        """Test the rate of a product of two linear factors."""
        b = np.zeros(8)
        b[2] = 0.5
        report = service.prodscal_rate_check([geometric_direction, b], [1, 1], chain, p=2.0, h=1.0)
        assert all(within_sigma(row) for row in report.rows)

    def test_prodscal_oracle_single(self, service, geometric_direction, chain, within_sigma):
        """Test one linear factor against K(p) h^{1/2} |pi a - a|."""
        report = service.prodscal_oracle_check([geometric_direction], [1], chain, p=1.5, h=1.0)
        assert all(row.note == "closed form" for row in report.rows)
        assert all(within_sigma(row) for row in report.rows)

    def test_prodscal_oracle_wick(self, service, geometric_direction, chain, within_sigma):
        """Test a squared factor against the Wick distance at p = 2."""
        report = service.prodscal_oracle_check([geometric_direction], [2], chain, p=2.0, h=1.0)
        assert all(row.note == "wick" for row in report.rows)
        assert all(within_sigma(row) for row in report.rows)

    def test_prodscal_oracle_unavailable(self, service, geometric_direction, chain):
        """Test there is no oracle for a product at p != 2."""
        with pytest.raises(InvalidArgumentError):
            service.prodscal_oracle_check([geometric_direction], [2], chain, p=3.0, h=1.0)

    def test_nm_bound(self, service, within_sigma):
        """Test the weighted L^1 bound and the folded-normal closed form."""
        a = np.zeros(4)
        a[0] = 0.8
        ys = [np.zeros(8), np.eye(8)[0], 5.0 * np.eye(8)[0]]
        report = service.nm_bound_check([a], [], [1], [], h=1.0, ys=ys)
        assert len(report.rows) == 6
        assert all(within_sigma(row) for row in report.rows)

    def test_nm_bound_validation(self, service):
        """Test exponents must match the directions."""
        with pytest.raises(InvalidArgumentError):
            service.nm_bound_check([np.ones(2)], [], [1, 1], [], h=1.0, ys=[np.zeros(4)])


class TestTaylorAndContraction:
    """Test cases for extended Taylor expansions and contraction."""

    def test_extended_taylor(self, service, trig, chain, within_sigma):
        """Test the integral-remainder identity and term-wise convergence."""
        report = service.extended_taylor_residual(trig, np.full(8, 0.1), 2, chain, p=2.0, h=1.0)
        assert report.rows[0].label == "identity"
        assert report.rows[0].passed
        assert report.metadata["identity_residual"] < 1e-8
        assert all(within_sigma(row) for row in report.rows)

    def test_extended_taylor_remainder_bound(self, service, trig, chain):
        """Test remainder rows are gated by the F bound plus the term bounds over i!."""
        report = service.extended_taylor_residual(trig, np.full(8, 0.1), 2, chain, p=2.0, h=1.0)
        for step in range(len(chain.steps)):
            rows = {row.label: row for row in report.rows if row.label.startswith(f"E{step} ")}
            remainder = rows[f"E{step} remainder"]
            expected = rows[f"E{step} F"].bound + rows[f"E{step} term1"].bound + rows[f"E{step} term2"].bound / 2.0
            assert remainder.bound is not None
            assert remainder.bound == pytest.approx(expected)
            assert remainder.measured <= remainder.bound + 5.0 * remainder.stderr + remainder.tolerance

    def test_extended_taylor_order(self, service, trig, chain):
        """Test k must stay below the claimed depth."""
        with pytest.raises(InvalidArgumentError):
            service.extended_taylor_residual(trig, np.zeros(8), 3, chain, p=2.0, h=1.0)

    def test_contraction(self, service, trig, quadratic):
        """Test ||F||_p <= sup |F| for a bounded symbol."""
        report = service.contraction_property_check(trig, [1.0, 2.0, 4.0], h=1.0)
        assert report.passed
        with pytest.raises(InvalidArgumentError):
            service.contraction_property_check(quadratic, [2.0], h=1.0)
