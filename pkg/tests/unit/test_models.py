"""Unit tests for Data Models."""

import json

import numpy as np
import pytest
from pydantic import ValidationError

from lab.exceptions import ConfigInvalidError, InvalidArgumentError
from lab.models.experiment import CheckSummary, ExperimentConfig, Operation, RunManifest
from lab.models.gaussian import GaussianMeasureSpec, Pairing, SampleBatch
from lab.models.hilbert import (
    EpsilonSequence,
    OrthogonalMap,
    OrthonormalFrame,
    Subspace,
    SubspaceChain,
    TraceClassOperator,
)
from lab.models.reports import ConvergenceReport, ExperimentReport, ReportRow


def _config(**updates):
    data = {"experiment_id": "unit", "operation": "constants", "seed": 1, "dim": 8, "chain": {"sizes": [1, 2, 4]}}
    data.update(updates)
    return data


class TestOrthonormalFrame:
    """Test cases for OrthonormalFrame."""

    def test_canonical_frame(self):
        """Test canonical frame vectors are the identity."""
        frame = OrthonormalFrame.canonical(4)
        assert np.array_equal(frame.vectors(), np.eye(4))
        assert frame.groups() == [(0,), (1,), (2,), (3,)]

    def test_phase_space_groups(self):
        """Test phase-space frame groups position and momentum slots."""
        frame = OrthonormalFrame.phase_space(3)
        assert frame.dim == 6
        assert frame.groups() == [(0, 3), (1, 4), (2, 5)]

    def test_repeated_phase_index_rejected(self):
        """Test an index shared by two pairs is rejected."""
        with pytest.raises(ValidationError):
            OrthonormalFrame(dim=4, phase_pairing=[(0, 1), (1, 2)])

    def test_non_orthonormal_basis_rejected(self):
        """Test a skewed basis is rejected."""
        with pytest.raises(ValidationError):
            OrthonormalFrame(dim=2, basis=[[1.0, 1.0], [0.0, 1.0]])

    def test_vector_out_of_range(self):
        """Test frame index bounds."""
        with pytest.raises(InvalidArgumentError):
            OrthonormalFrame.canonical(3).vector(3)

    def test_rotated_frame(self):
        """Test rotating a frame keeps it orthonormal and the pairing intact."""
        c, s = np.cos(0.4), np.sin(0.4)
        phi = OrthogonalMap(matrix=[[c, -s], [s, c]])
        frame = OrthonormalFrame(dim=2, phase_pairing=[(0, 1)]).rotated(phi)
        assert np.allclose(frame.vector(0), [c, s])
        assert frame.phase_pairing == [(0, 1)]


class TestSubspace:
    """Test cases for Subspace and SubspaceChain."""

    def test_from_vectors_drops_dependent(self):
        """Test QR orthonormalization removes a dependent vector."""
        subspace = Subspace.from_vectors([[1, 0, 0], [0, 1, 0], [2, 0, 0]], dim=3)
        assert subspace.rank == 2

    def test_from_vectors_dependent_before_independent(self):
        """Test a dependent vector ahead of an independent one keeps the full span."""
        subspace = Subspace.from_vectors([[1, 0, 0], [2, 0, 0], [0, 1, 0]], dim=3)
        assert subspace.rank == 2
        projector = subspace.basis @ subspace.basis.T
        assert np.allclose(projector @ np.array([1.0, 0.0, 0.0]), [1.0, 0.0, 0.0])
        assert np.allclose(projector @ np.array([0.0, 1.0, 0.0]), [0.0, 1.0, 0.0])
        assert np.allclose(projector @ np.array([0.0, 0.0, 1.0]), 0.0)

    def test_zero_and_full(self):
        """Test extreme subspaces."""
        assert Subspace.zero(5).rank == 0
        assert Subspace.full(5).rank == 5

    def test_coordinate_out_of_range(self):
        """Test coordinate subspace size bounds."""
        with pytest.raises(InvalidArgumentError):
            Subspace.coordinate(3, 4)

    def test_chain_must_be_nested(self):
        """Test a chain whose bases do not extend is rejected."""
        first = Subspace(basis=np.eye(3)[:, [1]])
        second = Subspace.coordinate(3, 2)
        with pytest.raises(ValidationError):
            SubspaceChain(ambient_dim=3, steps=[first, second])

    def test_chain_ranks(self):
        """Test ranks and top of a coordinate chain."""
        chain = SubspaceChain(ambient_dim=4, steps=[Subspace.coordinate(4, n) for n in (0, 1, 3)])
        assert chain.ranks == [0, 1, 3]
        assert chain.top.rank == 3


class TestTraceClassOperator:
    """Test cases for TraceClassOperator."""

    def test_geometric_trace(self):
        """Test trace of the geometric operator."""
        op = TraceClassOperator.geometric(10, 0.5)
        assert op.trace == pytest.approx(2.0 * (1 - 0.5 ** 10))
        assert op.max_eigenvalue == 1.0

    def test_rank_one(self):
        """Test a a^T has eigenvalue |a|^2."""
        op = TraceClassOperator.rank_one([3.0, 4.0])
        assert op.rank == 1
        assert op.trace == pytest.approx(25.0)
        assert np.allclose(op.matrix(), [[9.0, 12.0], [12.0, 16.0]])

    def test_rank_one_of_zero(self):
        """Test the zero vector gives the zero operator."""
        assert TraceClassOperator.rank_one([0.0, 0.0]).rank == 0

    def test_diagonal_drops_zeros_and_sorts(self):
        """Test diagonal spectrum is sorted and zero eigenvalues dropped."""
        op = TraceClassOperator.diagonal([0.1, 0.0, 0.5])
        assert list(op.eigenvalues) == [0.5, 0.1]

    def test_negative_spectrum_rejected(self):
        """Test negative eigenvalues are rejected."""
        with pytest.raises(InvalidArgumentError):
            TraceClassOperator.diagonal([1.0, -0.1])

    def test_from_matrix_round_trip(self):
        """Test spectral decomposition reproduces the matrix."""
        mat = np.array([[2.0, 1.0], [1.0, 2.0]])
        assert np.allclose(TraceClassOperator.from_matrix(mat).matrix(), mat)

    def test_plus_and_scaled(self):
        """Test operator sum and scaling."""
        a = TraceClassOperator.diagonal([1.0, 0.0])
        b = TraceClassOperator.diagonal([0.0, 2.0])
        assert a.plus(b).trace == pytest.approx(3.0)
        assert a.scaled(0.0).rank == 0
        with pytest.raises(InvalidArgumentError):
            a.scaled(-1.0)

    def test_conjugate_keeps_spectrum(self):
        """Test conjugation by a rotation keeps eigenvalues."""
        c, s = np.cos(1.0), np.sin(1.0)
        phi = OrthogonalMap(matrix=[[c, -s], [s, c]])
        op = TraceClassOperator.diagonal([1.0, 0.25]).conjugate(phi)
        assert np.allclose(op.eigenvalues, [1.0, 0.25])
        assert np.allclose(op.matrix(), phi.matrix.T @ np.diag([1.0, 0.25]) @ phi.matrix)


class TestEpsilonSequence:
    """Test cases for EpsilonSequence."""

    def test_cached_sums(self):
        """Test cached totals."""
        eps = EpsilonSequence.of([0.5, 0.25, 0.25])
        assert eps.total == pytest.approx(1.0)
        assert eps.total_sq == pytest.approx(0.375)

    def test_inconsistent_cache_rejected(self):
        """Test a cached sum that disagrees with the values is rejected."""
        with pytest.raises(ValidationError):
            EpsilonSequence(values=[1.0, 1.0], total=3.0, total_sq=2.0)

    def test_group_values_take_pair_max(self):
        """Test phase pairs count once with the larger weight."""
        eps = EpsilonSequence.of([0.5, 0.1, 0.2, 0.4])
        frame = OrthonormalFrame(dim=4, phase_pairing=[(0, 2), (1, 3)])
        assert list(eps.group_values(frame)) == [0.5, 0.4]
        assert eps.group_sum(frame) == pytest.approx(0.9)

    def test_plus_length_mismatch(self):
        """Test adding sequences of different lengths."""
        with pytest.raises(InvalidArgumentError):
            EpsilonSequence.of([1.0]).plus(EpsilonSequence.of([1.0, 2.0]))


class TestGaussianModels:
    """Test cases for Gaussian measure models."""

    def test_spec_requires_positive_variance(self):
        """Test h > 0."""
        with pytest.raises(ValidationError):
            GaussianMeasureSpec(dim=2, variance=0.0)

    def test_pairing_validation(self):
        """Test pairings must be canonical partitions."""
        assert Pairing(pairs=[(1, 3), (2, 4)]).order == 2
        with pytest.raises(ValidationError):
            Pairing(pairs=[(1, 2), (1, 3)])
        with pytest.raises(ValidationError):
            Pairing(pairs=[(2, 1)])

    def test_sample_batch_shape_and_readonly(self):
        """Test SampleBatch validates its shape and freezes samples."""
        spec = GaussianMeasureSpec(dim=2, variance=1.0)
        batch = SampleBatch(spec=spec, seed=0, count=3, samples=np.zeros((3, 2)))
        with pytest.raises(ValueError):
            batch.samples[0, 0] = 1.0
        with pytest.raises(ValidationError):
            SampleBatch(spec=spec, seed=0, count=2, samples=np.zeros((3, 2)))


class TestReportModels:
    """Test cases for report models."""

    def test_compare_pass_and_fail(self):
        """Test the pass rule measured <= bound + 3 stderr + tolerance."""
        assert ReportRow.compare("a", 1.2, 1.0, stderr=0.1).passed
        assert not ReportRow.compare("b", 1.4, 1.0, stderr=0.1).passed
        assert ReportRow.compare("c", 1.0 + 1e-9, 1.0, tolerance=1e-8).passed

    def test_compare_nan_and_missing_bound(self):
        """Test NaN always fails and a missing bound always passes."""
        assert not ReportRow.compare("nan", float("nan"), 1.0).passed
        assert ReportRow.compare("free", 5.0, None).passed

    def test_report_passed_and_worst(self):
        """Test aggregate pass flag and worst row."""
        rows = [ReportRow.compare("x", 0.5, 1.0), ReportRow.compare("y", 0.9, 1.0)]
        report = ExperimentReport(check_id="c", operation="op", rows=rows)
        assert report.passed
        assert report.worst.label == "y"
        assert not ExperimentReport(check_id="c", operation="op", error="boom").passed

    def test_convergence_sides(self):
        """Test lhs/rhs accessors."""
        report = ConvergenceReport(
            check_id="c", operation="op", rows=[ReportRow.compare("n=1", 0.2, 0.3)]
        )
        assert report.lhs == [0.2]
        assert report.rhs == [0.3]


class TestExperimentConfig:
    """Test cases for ExperimentConfig."""

    def test_defaults(self):
        """Test default grids and method."""
        config = ExperimentConfig.from_dict(_config())
        assert config.operation == Operation.CONSTANTS
        assert config.method.mc_samples == 100_000
        assert config.p_grid == [1.0, 2.0, 4.0]

    def test_chain_exceeding_dim(self):
        """Test the chain must fit inside D."""
        with pytest.raises(ConfigInvalidError) as exc:
            ExperimentConfig.from_dict(_config(chain={"sizes": [4, 16]}))
        assert "chain size" in str(exc.value)

    def test_invalid_exponent_reports_field(self):
        """Test the offending field is named."""
        with pytest.raises(ConfigInvalidError) as exc:
            ExperimentConfig.from_dict(_config(p_grid=[0.5]))
        assert exc.value.field == "p_grid"

    def test_direction_length_checked(self):
        """Test explicit directions must match D."""
        symbol = {"id": "s", "family": "trig", "directions": [{"kind": "explicit", "coords": [1.0, 0.0]}]}
        with pytest.raises(ConfigInvalidError):
            ExperimentConfig.from_dict(_config(symbols=[symbol]))

    def test_duplicate_symbol_ids(self):
        """Test symbol ids are unique."""
        symbol = {"id": "s", "family": "constant"}
        with pytest.raises(ConfigInvalidError):
            ExperimentConfig.from_dict(_config(symbols=[symbol, symbol]))

    def test_config_hash_stable(self):
        """Test the hash depends only on content."""
        a = ExperimentConfig.from_dict(_config())
        b = ExperimentConfig.from_dict(_config())
        c = ExperimentConfig.from_dict(_config(seed=2))
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()

    def test_load_with_overrides(self, tmp_path):
        """Test nested overrides merge into the method block."""
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(_config(method={"quadrature_order": 20})))
        config = ExperimentConfig.load(path, overrides={"seed": 9, "method": {"mc_samples": 50}})
        assert config.seed == 9
        assert config.method.quadrature_order == 20
        assert config.method.mc_samples == 50

    def test_load_bad_json_reports_line(self, tmp_path):
        """Test malformed JSON reports its line."""
        path = tmp_path / "bad.json"
        path.write_text('{\n  "seed": 1,\n  oops\n}')
        with pytest.raises(ConfigInvalidError) as exc:
            ExperimentConfig.load(path)
        assert exc.value.line == 3

    def test_load_missing_file(self, tmp_path):
        """Test a missing config file."""
        with pytest.raises(ConfigInvalidError):
            ExperimentConfig.load(tmp_path / "absent.json")


class TestRunManifest:
    """Test cases for RunManifest."""

    def test_failed_checks(self):
        """Test manifest pass flag follows the checks."""
        ok = CheckSummary(experiment_id="e", check_id="a", operation="op", passed=True, rows=1)
        bad = CheckSummary(experiment_id="e", check_id="b", operation="op", passed=False, rows=1)
        manifest = RunManifest(config_hash="h", code_version="1", seed=0, checks=[ok, bad])
        assert not manifest.passed
        assert [c.check_id for c in manifest.failed_checks] == ["b"]
