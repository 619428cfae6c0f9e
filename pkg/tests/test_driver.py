import json
import shutil

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uq_adapt.cli import EXIT_ERROR, EXIT_EXHAUSTED, EXIT_OK, main
from uq_adapt.clustering import ClusterResult
from uq_adapt.driver import (
    LevelRecord,
    RunState,
    check_convergence,
    qoi_average,
    resume,
    run_adaptive,
    snapshot,
    tracker_values,
    uq_report,
)
from uq_adapt.evaluator import evaluate_batch
from uq_adapt.param_space import ConfigError, benchmark_config, serialize_config
from uq_adapt.rundir import RunDirectoryError
from uq_adapt.sensitivity import SobolResult

SMALL = benchmark_config(n_mc=1000, sobol_n=256)


def recs(values, key="c1.S1", k=1):
    return [LevelRecord(level=i + 1, ns=10 * (i + 1), k_retained=k, kernel="poly", tracked={key: v})
            for i, v in enumerate(values)]


class Counter:
    """Built-in evaluator that counts expensive calls and can die after ``die_after`` of them."""

    def __init__(self, die_after=None):
        self.calls, self.die_after = 0, die_after

    def __call__(self, H, sample_ids=None, d=None, on_record=None):
        out = []
        for r in range(len(H)):
            if self.die_after is not None and self.calls >= self.die_after:
                raise KeyboardInterrupt("simulated kill")
            out += evaluate_batch(H[r:r + 1], sample_ids=[sample_ids[r]], d=d, on_record=on_record)
            self.calls += 1
        return out


# -- stopping rule -------------------------------------------------------------


def test_convergence_arithmetic_examples():
    c = check_convergence(recs([0.30, 0.34, 0.30, 0.34, 0.30]), 5, 1e-4, 1.0)
    assert c.variances["c1.S1"] == pytest.approx(4.8e-4, rel=1e-10)
    assert not c.converged
    m = check_convergence(recs([84, 84, 85, 84, 84], key="mode0"), 5, 1e-4, 1.0)
    assert m.variances["mode0"] == pytest.approx(0.2, rel=1e-12)
    assert m.converged


def test_constant_traces_converge_and_short_history_raises():
    assert check_convergence(recs([0.5] * 6), 5, 0.0, 0.0).converged
    with pytest.raises(ValueError):
        check_convergence(recs([0.5] * 4), 5, 1e-4, 1.0)


def test_k_change_defers_convergence():
    rs = recs([0.5] * 5)
    rs[2] = LevelRecord(3, 30, 2, "poly", {"c1.S1": 0.5, "c2.S1": 0.1})
    c = check_convergence(rs, 5, 1.0, 1.0)
    assert not c.converged and "changed" in c.reason


def test_undefined_indices_are_null_and_block_convergence():
    nan = np.full(2, np.nan)
    flat = SobolResult(1, nan, np.full((2, 2), np.nan), nan.copy(), 0.0, 8)
    cl = ClusterResult(np.zeros(3, dtype=int), np.zeros((2, 1)), np.array([100.0, 0.0]), 0.0)
    t = tracker_values([flat], cl)
    assert t["c1.S1"] is None and t["c1.S1_2"] is None and t["mode0"] == 100.0
    rec = LevelRecord(1, 10, 1, "poly", t)
    assert LevelRecord.from_json(rec.to_json()) == rec
    assert "NaN" not in rec.to_json()
    rs = recs([0.5] * 5)
    rs[0] = LevelRecord(1, 10, 1, "poly", {"c1.S1": None})
    assert not check_convergence(rs, 5, 1.0, 1.0).converged
    assert check_convergence(rs + recs([0.5]), 5, 1.0, 1.0).converged


@settings(max_examples=50)
@given(st.lists(st.floats(0, 1), min_size=5, max_size=8), st.floats(0, 1e-2), st.floats(0, 1e-2))
def test_convergence_monotone_in_threshold(values, t1, t2):
    lo, hi = sorted([t1, t2])
    if check_convergence(recs(values), 5, lo, 1.0).converged:
        assert check_convergence(recs(values), 5, hi, 1.0).converged


# -- QoI ---------------------------------------------------------------------


def test_qoi_average():
    assert qoi_average([1.0, 2.0, 3.0, 6.0]) == 3.0
    assert qoi_average([0.085]) == 0.085
    X = np.random.default_rng(0).uniform(0, 1, (329, 7))
    direct = [sum(X[j, c] for j in range(329)) / 329 for c in range(7)]
    np.testing.assert_allclose(qoi_average(X), direct, rtol=1e-12)
    with pytest.raises(ValueError):
        qoi_average([])


# -- runs --------------------------------------------------------------------


@pytest.fixture(scope="module")
def short_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "a"
    ev = Counter()
    state, report = run_adaptive(SMALL, out, evaluate=ev, max_levels=3)
    return out, state, report, ev


def test_level_cap_gives_exhausted(short_run):
    out, state, report, ev = short_run
    assert state.status == "exhausted" and report.status == "exhausted"
    assert state.level == 3 and state.ns == 30
    assert ev.calls == state.n_evaluations == SMALL.ncon * 3
    assert state.sample_ids == list(range(1, 31))
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "exhausted" and len(man["levels"]) == 3
    assert (out / "report.json").exists()


def test_report_contents(short_run):
    _, state, report, _ = short_run
    assert sum(report.histogram_counts) == SMALL.n_mc
    assert sum(report.mode_shares) == pytest.approx(100.0)
    assert set(report.traces) == set(state.records[-1].tracked)
    assert all(len(v) == 3 for v in report.traces.values())
    one = uq_report(state, n_mc=1)
    assert one.qoi_variance == 0.0 and sum(one.histogram_counts) == 1
    at = uq_report(state, at=state.H[:2])
    for r, rec in enumerate(at.reconstructions):
        # training inputs snap back to their stored fields through the surrogate + pre-image
        np.testing.assert_allclose(rec["x"], state.X[r], rtol=1e-6)


def test_determinism(short_run, tmp_path):
    out, state, report, _ = short_run
    s2, r2 = run_adaptive(SMALL, tmp_path / "b", max_levels=3)
    assert s2.records == state.records
    assert r2 == report
    for lvl in (1, 2, 3):
        for name in ("inputs.csv", "outputs.csv", "scores.csv", "sobol.csv", "variogram.csv"):
            assert (out / f"level_{lvl}" / name).read_bytes() == (tmp_path / "b" / f"level_{lvl}" / name).read_bytes()


def test_snapshot_resume_snapshot_identical(short_run, tmp_path):
    _, state, report, _ = short_run
    snapshot(state, tmp_path / "s1")
    back = resume(tmp_path / "s1")
    snapshot(back, tmp_path / "s2")
    files = sorted(p.relative_to(tmp_path / "s1") for p in (tmp_path / "s1").rglob("*") if p.is_file())
    assert files
    for f in files:
        assert (tmp_path / "s1" / f).read_bytes() == (tmp_path / "s2" / f).read_bytes(), f
    assert back.records == state.records
    np.testing.assert_array_equal(back.H, state.H)
    np.testing.assert_array_equal(back.X, state.X)
    assert uq_report(back) == report


def test_resume_refuses_changed_ncon(short_run):
    out = short_run[0]
    with pytest.raises(RunDirectoryError, match="ncon"):
        resume(out, SMALL.with_overrides(ncon=7))


def test_checksum_corruption_detected(short_run, tmp_path):
    dst = tmp_path / "c"
    shutil.copytree(short_run[0], dst)
    p = dst / "level_2" / "outputs.csv"
    p.write_text(p.read_text().replace("0.", "1.", 1))
    with pytest.raises(RunDirectoryError, match="checksum"):
        resume(dst)


def test_kill_and_resume_reuses_journal(short_run, tmp_path):
    out = tmp_path / "k"
    # dies after 24 evaluations: levels 1-2 complete, 4 samples of level 3 journaled
    with pytest.raises(KeyboardInterrupt):
        run_adaptive(SMALL, out, evaluate=Counter(die_after=24), max_levels=3)
    state = resume(out)
    assert state.level == 2 and len(state.journal) == 24
    ev = Counter()
    state, report = run_adaptive(SMALL, out, evaluate=ev, state=state, max_levels=3)
    assert ev.calls == 6
    ref = short_run[1]
    np.testing.assert_array_equal(state.X, ref.X)
    assert state.records == ref.records
    assert report == short_run[2]


def test_scramble_rejected():
    with pytest.raises(ConfigError):
        run_adaptive(SMALL.with_overrides(scramble=True), max_levels=1)


def test_new_state_empty():
    s = RunState.new(SMALL)
    assert s.ns == 0 and s.level == 0 and s.status == "running"
    with pytest.raises(ValueError):
        uq_report(s)


# -- CLI ---------------------------------------------------------------------


def test_cli_exit_codes(tmp_path, capsys):
    cfg = SMALL.with_overrides(s=2, max_levels=2, var_s=0.0, var_m=0.0)
    path = tmp_path / "cfg.json"
    path.write_text(serialize_config(cfg))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "r")]) == EXIT_EXHAUSTED
    assert "exhausted" in capsys.readouterr().out
    assert main(["report", "--out", str(tmp_path / "r")]) == EXIT_OK
    assert (tmp_path / "r" / "report_sobol.csv").exists()
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "x")]) == EXIT_ERROR
    assert main(["report", "--out", str(tmp_path / "missing")]) == EXIT_ERROR
    assert "error:" in capsys.readouterr().err
