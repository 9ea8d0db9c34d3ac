"""Unit tests for projections, quadratic forms and chains."""

import numpy as np
import pytest

from lab.core.geometry import (
    a_norm,
    ba_operator,
    complement_norm,
    coordinate_chain,
    injective_completion,
    project,
    project_rows,
    q_form,
    q_form_rows,
    q_polar,
    random_orthogonal,
    rotated_chain,
    trace_in_frame,
)
from lab.exceptions import InvalidArgumentError
from lab.models.hilbert import OrthonormalFrame, Subspace, TraceClassOperator


class TestProjections:
    """Test cases for orthogonal projections."""

    def test_project_coordinate(self):
        """Test projection onto span(e_0, e_1)."""
        x = np.array([1.0, 2.0, 3.0])
        assert np.allclose(project(Subspace.coordinate(3, 2), x), [1.0, 2.0, 0.0])

    def test_project_is_idempotent(self):
        """Test pi_E pi_E = pi_E on a rotated subspace."""
        chain = rotated_chain(6, [3], seed=4)
        x = np.arange(6, dtype=float)
        once = project(chain.top, x)
        assert np.allclose(project(chain.top, once), once)

    def test_project_rows_shape_check(self):
        """Test row projection validates its input."""
        with pytest.raises(InvalidArgumentError):
            project_rows(Subspace.coordinate(3, 1), np.zeros((2, 4)))

    def test_complement_norm(self):
        """Test |pi_S x| for S = E_2 minus E_1."""
        x = np.array([3.0, 4.0, 12.0])
        assert complement_norm(Subspace.coordinate(3, 1), Subspace.coordinate(3, 2), x) == pytest.approx(4.0)


class TestQuadraticForms:
    """Test cases for Q_A and its polar form."""

    def test_q_form_diagonal(self, operator):
        """Test Q_A(e_j) = lambda_j."""
        e2 = np.eye(8)[2]
        assert q_form(operator, e2) == pytest.approx(0.25)
        assert a_norm(operator, e2) == pytest.approx(0.5)

    def test_q_form_rows_match_scalar(self, operator):
        """Test vectorized Q_A agrees with the scalar form."""
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((5, 8))
        assert np.allclose(q_form_rows(operator, pts), [q_form(operator, p) for p in pts])

    def test_polarization(self, operator):
        """Test <Ax, y> = (Q(x+y) - Q(x-y)) / 4."""
        rng = np.random.default_rng(1)
        x, y = rng.standard_normal(8), rng.standard_normal(8)
        expected = 0.25 * (q_form(operator, x + y) - q_form(operator, x - y))
        assert q_polar(operator, x, y) == pytest.approx(expected)

    def test_trace_in_rotated_frame(self, operator):
        """Test the trace does not depend on the frame."""
        frame = OrthonormalFrame.canonical(8).rotated(random_orthogonal(8, seed=3))
        assert trace_in_frame(operator, frame) == pytest.approx(operator.trace)


class TestOrthogonalMaps:
    """Test cases for random rotations and chains."""

    def test_random_orthogonal_deterministic(self):
        """Test the same seed gives the same matrix."""
        a = random_orthogonal(5, seed=11)
        b = random_orthogonal(5, seed=11)
        assert np.array_equal(a.matrix, b.matrix)
        assert np.allclose(a.matrix @ a.matrix.T, np.eye(5))

    def test_coordinate_chain_ranks(self):
        """Test coordinate chain sizes."""
        assert coordinate_chain(8, [1, 2, 4, 8]).ranks == [1, 2, 4, 8]

    def test_rotated_chain_nested(self):
        """Test rotated chain steps extend each other."""
        chain = rotated_chain(6, [1, 3, 6], seed=2)
        assert np.allclose(chain.steps[1].basis[:, :1], chain.steps[0].basis)

    def test_rotated_chain_size_check(self):
        """Test chain sizes beyond D are rejected."""
        with pytest.raises(InvalidArgumentError):
            rotated_chain(3, [4], seed=0)


class TestMeasurableNorms:
    """Test cases for B_A operators."""

    def test_ba_operator(self, eps):
        """Test A = diag(epsilon)."""
        assert ba_operator(eps).trace == pytest.approx(eps.total)

    def test_injective_completion(self):
        """Test completion has trivial kernel and keeps A on its range."""
        A = TraceClassOperator.diagonal([1.0, 0.0, 0.0])
        completed = injective_completion(A)
        assert completed.rank == 3
        assert q_form(completed, [1.0, 0.0, 0.0]) == pytest.approx(1.0)
        assert q_form(completed, [0.0, 1.0, 0.0]) == pytest.approx(np.exp(-1.0))
