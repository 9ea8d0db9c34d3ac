"""Unit tests for the experiment runner."""

import hashlib
import json

import numpy as np
import pytest

from lab.exceptions import InvalidArgumentError, LabError
from lab.models.experiment import ExperimentConfig, Operation
from lab.models.reports import ExperimentReport
from lab.services.experiment_service import (
    EXPAND_CHECKS,
    EXTEND_CHECKS,
    HEAT_CHECKS,
    SYMBOL_CHECKS,
    ExperimentContext,
    ExperimentService,
    _tag,
)

TRIG_SPEC = {
    "id": "trig",
    "family": "trig",
    "depth": 3,
    "directions": [{"kind": "geometric", "ratio": 0.5, "scale": 0.5}],
}
SQUARE_SPEC = {"id": "square", "family": "poly_scalar", "directions": [{"kind": "basis", "index": 0}], "exponents": [2]}


def _config(**updates) -> ExperimentConfig:
    data = {
        "experiment_id": "consts",
        "operation": "constants",
        "seed": 0,
        "dim": 8,
        "chain": {"sizes": [1, 2, 4]},
        "p_grid": [1.0, 2.0, 4.0],
    }
    data.update(updates)
    return ExperimentConfig.from_dict(data)


def _write_preset(directory, experiment_id: str) -> None:
    payload = {"experiment_id": experiment_id, "operation": "constants", "seed": 9, "dim": 4, "chain": {"sizes": [1, 2]}}
    (directory / f"{experiment_id}.json").write_text(json.dumps(payload), encoding="utf-8")


@pytest.fixture
def service(tmp_path):
    return ExperimentService(out_dir=tmp_path, threads=2)


class TestExperimentContext:
    """Test cases for ExperimentContext."""

    def test_symbols_and_filters(self):
        """Test symbols are built by id and grouped by claim."""
        ctx = ExperimentContext(_config(symbols=[TRIG_SPEC, SQUARE_SPEC]))
        assert list(ctx.symbols) == ["trig", "square"]
        assert [f.label for f in ctx.smeps_symbols()] == ["trig"]
        assert [f.label for f in ctx.qa_symbols()] == ["trig"]
        assert [f.label for f in ctx.heat_symbols()] == ["trig", "square"]
        assert ctx.eps.dim == 8

    def test_chain_kinds(self):
        """Test coordinate and rotated chains."""
        assert ExperimentContext(_config()).chain.ranks == [1, 2, 4]
        rotated = ExperimentContext(_config(chain={"kind": "rotated", "sizes": [2, 3], "seed": 1})).chain
        assert rotated.ranks == [2, 3]

    def test_points_are_seeded(self):
        """Test evaluation points depend only on the seed."""
        first = ExperimentContext(_config(seed=4)).points(5)
        assert first.shape == (5, 8)
        assert np.array_equal(first, ExperimentContext(_config(seed=4)).points(5))
        assert not np.array_equal(first, ExperimentContext(_config(seed=5)).points(5))

    def test_method_follows_config(self):
        """Test the heat method echoes the config."""
        ctx = ExperimentContext(_config(seed=3, method={"quadrature_order": 20, "mc_samples": 500}))
        assert ctx.method.quadrature_order == 20
        assert ctx.method.mc_samples == 500
        assert ctx.method.seed == 3


class TestCheckSelection:
    """Test cases for check registration and selection."""

    def test_tag(self):
        """Test check ids are suffixed per symbol."""
        report = ExperimentReport(check_id="sm_rate", operation="sm_rate_check")
        assert _tag(report, "trig", "q2").check_id == "sm_rate.trig.q2"
        assert _tag(report, "").check_id == "sm_rate"

    def test_checks_for_operation(self, service):
        """Test one operation selects its own checks."""
        assert [name for name, _ in service.checks_for(_config())] == ["constants"]
        names = [name for name, _ in service.checks_for(_config(operation="heat"))]
        assert names == [name for name, _ in HEAT_CHECKS]

    def test_verify_all_selects_everything(self, service):
        """Test verify-all spans every group."""
        selected = service.checks_for(_config(operation="verify-all"))
        expected = 5 + len(SYMBOL_CHECKS) + len(EXTEND_CHECKS) + len(HEAT_CHECKS) + len(EXPAND_CHECKS)
        assert len(selected) == expected

    def test_checks_filter(self, service):
        """Test the checks list restricts the run."""
        selected = service.checks_for(_config(operation="expand", checks=["generator"]))
        assert [name for name, _ in selected] == ["generator"]

    def test_unknown_check(self, service):
        """Test unknown check names are rejected."""
        with pytest.raises(InvalidArgumentError, match="bogus"):
            service.checks_for(_config(checks=["bogus"]))


class TestRunChecks:
    """Test cases for run_checks and run."""

    def test_run_checks(self, service):
        """Test reports carry the experiment id."""
        reports = service.run_checks(_config())
        assert len(reports) == 1
        assert reports[0].experiment_id == "consts"
        assert reports[0].passed

    def test_errors_become_reports(self, service):
        """Test lab and unexpected failures are captured per check."""

        def lab_failure(ctx):
            raise LabError("no budget")

        def crash(ctx):
            raise RuntimeError("boom")

        service.register_check(Operation.CONSTANTS, "lab_failure", lab_failure)
        service.register_check(Operation.CONSTANTS, "crash", crash)
        reports = service.run_checks(_config(checks=["lab_failure", "crash", "constants"]))
        errors = {r.check_id: r.error for r in reports}
        assert errors["lab_failure"] == "no budget"
        assert errors["crash"] == "RuntimeError: boom"
        assert errors["constants"] is None
        assert not all(r.passed for r in reports)

    def test_empty_check_is_skipped(self, service):
        """Test a check with nothing to do produces no report."""
        reports = service.run_checks(_config(operation="symbols", checks=["smeps_claim"]))
        assert reports == []

    def test_commutation_grid_size(self, service):
        """Test commutation runs at fifty points regardless of trials."""
        config = _config(operation="heat", checks=["commutation"], trials=8, symbols=[TRIG_SPEC])
        (report,) = service.run_checks(config)
        assert len(report.rows) == 2 * 50
        assert report.rows[-1].label == "finite-difference x49"

    def test_basis_independence_points(self, service):
        """Test the rotated-frame Laplacian comparison uses twenty points."""
        config = _config(operation="symbols", checks=["basis_independence"], symbols=[TRIG_SPEC])
        (report,) = service.run_checks(config)
        assert report.check_id == "laplacian_basis_independence.trig"
        assert [row.params["points"] for row in report.rows] == [20.0, 20.0]

    def test_run_writes_outputs(self, service, tmp_path):
        """Test run writes CSV, JSON and manifest files."""
        config = _config()
        manifest = service.run(config)
        assert manifest.passed
        assert manifest.experiments == ["consts"]
        assert manifest.config_hash == config.config_hash()
        assert (tmp_path / "consts__constants.csv").exists()
        assert (tmp_path / "consts__constants.json").exists()
        assert json.loads((tmp_path / "manifest.json").read_text())["seed"] == 0
        assert manifest.checks[0].csv_path == "consts__constants.csv"


class TestPresets:
    """Test cases for presets and verify_all."""

    def test_bundled_presets_parse(self, service):
        """Test every bundled preset validates under a new seed."""
        configs = service.load_presets(seed=17)
        assert {c.operation for c in configs} == {op for op in Operation if op != Operation.VERIFY_ALL}
        assert all(c.seed == 17 for c in configs)

    def test_empty_directory(self, service, tmp_path):
        """Test a directory without presets is rejected."""
        with pytest.raises(InvalidArgumentError):
            service.load_presets(seed=0, presets_dir=tmp_path)

    def test_verify_all(self, service, tmp_path, mocker):
        """Test verify_all runs presets in sorted order and hashes them together."""
        presets = tmp_path / "presets"
        presets.mkdir()
        _write_preset(presets, "b_consts")
        _write_preset(presets, "a_consts")
        out = tmp_path / "out"
        spy = mocker.spy(service, "run_checks")
        manifest = service.verify_all(seed=2, out_dir=out, presets_dir=presets)
        assert spy.call_count == 2
        assert manifest.experiments == ["a_consts", "b_consts"]
        assert manifest.passed
        configs = service.load_presets(seed=2, presets_dir=presets)
        digest = hashlib.sha256("".join(c.config_hash() for c in configs).encode("ascii")).hexdigest()
        assert manifest.config_hash == digest
        assert (out / "a_consts__constants.csv").exists()
