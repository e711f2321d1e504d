import json

import numpy as np
import pytest

from mrfq.experiment import (
    ExperimentConfig, ExperimentError, child_seeds, crossover_table, learner_scaling, loglog_slope,
    maxfind_scaling, mean_by, rows_csv, run_experiment, strip_timing, trial_seeds,
)
from mrfq.model import dump_model, figure1_model


def test_trial_seeds_derivation():
    a, b = trial_seeds(7, 2, 5)
    child = np.random.SeedSequence(7).spawn(5)[2].spawn(2)
    assert (a, b) == tuple(int(c.generate_state(1)[0]) for c in child)
    assert trial_seeds(7, 2, 5) == (a, b)
    assert len(set(child_seeds(7, 10))) == 10


def test_config_errors(tmp_path):
    with pytest.raises(ExperimentError):
        ExperimentConfig(model_path=str(tmp_path / "missing.json"))
    with pytest.raises(ExperimentError):
        ExperimentConfig(tau_mode="fixed")


def test_run_experiment_classical_and_outputs(tmp_path):
    dump_model(figure1_model(), tmp_path / "m.json")
    cfg = ExperimentConfig(model_path=str(tmp_path / "m.json"), m_count=50_000, trials=3, seed=2,
                           out_json=str(tmp_path / "r.json"), out_csv=str(tmp_path / "r.csv"))
    rep = run_experiment(cfg)
    assert rep["recovery"]["trials"] == 3
    assert rep["ground_truth_edges"][0] == [1, 2]
    assert json.loads((tmp_path / "r.json").read_text())["recovery"] == rep["recovery"]
    assert (tmp_path / "r.csv").read_text().splitlines()[0].startswith("trial,exact")


def test_run_experiment_quantum_ledger():
    rep = run_experiment(ExperimentConfig(m_count=50_000, trials=2, learner="quantum", seed=3))
    assert rep["mean_ledger"]["oracle_calls"] > 0 and rep["mean_ledger"]["trials"] == 2


def test_run_experiment_deterministic_after_strip():
    cfg = ExperimentConfig(m_count=10_000, trials=2, seed=5)
    assert strip_timing(run_experiment(cfg)) == strip_timing(run_experiment(cfg))


def test_all_trials_failing_raises():
    # theoretical tau on the preset works, so force failure with an impossible fixed tau
    cfg = ExperimentConfig(m_count=100, trials=2, tau_mode="fixed", tau=-1.0)
    with pytest.raises(ExperimentError):
        run_experiment(cfg)


def test_strip_timing_recursive():
    obj = {"a": 1, "wall_time": 2.0, "b": [{"wall_time": 1, "c": 3}]}
    assert strip_timing(obj) == {"a": 1, "b": [{"c": 3}]}


def test_maxfind_scaling_rows_and_slope():
    rows = maxfind_scaling([64, 256, 1024, 4096], trials=10, seed=1)
    calls = mean_by(rows, "K", "oracle_calls")
    assert abs(loglog_slope(list(calls), list(calls.values())) - 0.5) <= 0.1
    assert all(r["success"] == 1 for r in rows)
    classical = mean_by(maxfind_scaling([64, 256, 1024], trials=2, mode="classical"), "K", "oracle_calls")
    assert loglog_slope(list(classical), list(classical.values())) == pytest.approx(1.0)
    assert rows_csv(rows).splitlines()[0] == "n,K,mode,oracle_calls,classical_equiv_cost,success"


def test_learner_scaling_feeds_slope_fit():
    rows = learner_scaling([8, 12, 16, 20], r=3, trials=2, m_count=5000, seed=0)
    assert len(rows) == 8
    calls = mean_by(rows, "n", "oracle_calls")
    slope = loglog_slope(list(calls), list(calls.values()))
    assert np.isfinite(slope) and slope > 0


def test_crossover_table_shape():
    table = crossover_table([3, 4, 5], [2, 4, 8], [0.1, 0.01, 0.001])
    assert len(table) == 27
    for row in table:
        assert row["crossover_n"] == pytest.approx(row["crossover_n_closed_form"])
