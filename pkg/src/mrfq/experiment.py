"""Trial harness, scaling benchmarks and crossover tables used by the CLI.

Seeds: a master seed feeds ``numpy.random.SeedSequence``; trial k uses
``SeedSequence(master).spawn(trials)[k]``, which is split again into a
sampler seed and a learner seed (``spawn(2)``).  Each child is turned into
an int with ``generate_state(1)[0]``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .empirics import SampleIndex
from .greedy import calibrate_tau, make_plan, recover_graph
from .model import (
    MrfModel, derived_constants, figure1_model, load_model, neighborhoods, random_model,
    validate_model,
)
from .qmaxfind import (
    QueryLedger, code_space, durr_hoyer_accounting, durr_hoyer_amplitude, linear_scan_max, learn_neighborhood_quantum,
    log2_crossover, log2_crossover_closed_form, recover_graph_quantum,
)
from .sampler import EXACT_LIMIT, exact_joint, gibbs_sample, sample_exact


class ExperimentError(RuntimeError):
    pass


def child_seeds(master: int | None, count: int) -> list[int]:
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(master).spawn(count)]


def trial_seeds(master: int | None, trial: int, trials: int) -> tuple[int, int]:
    child = np.random.SeedSequence(master).spawn(trials)[trial]
    a, b = child.spawn(2)
    return int(a.generate_state(1)[0]), int(b.generate_state(1)[0])


@dataclass
class ExperimentConfig:
    model_path: str | None = None
    generator: dict | None = None  # {"preset": "figure1"} or random_model kwargs
    m_count: int = 100_000
    sampler: str = "exact"  # exact | gibbs
    burn_in: int = 1000
    thinning: int = 1
    learner: str = "classical"  # classical | quantum
    tau_mode: str = "auto"  # auto | theoretical | fixed
    tau: float | None = None
    cap_L: int | None = None
    w: float = 0.1
    mode: str = "accounting"
    rule: str = "and"
    trials: int = 20
    seed: int = 0
    out_json: str | None = None
    out_csv: str | None = None

    def __post_init__(self):
        if self.model_path is None and self.generator is None:
            self.generator = {"preset": "figure1"}
        if self.model_path is not None and not Path(self.model_path).exists():
            raise ExperimentError(f"model file {self.model_path} not found")
        if self.tau_mode == "fixed" and self.tau is None:
            raise ExperimentError("tau_mode=fixed needs tau")

    def to_dict(self) -> dict:
        return asdict(self)


def build_model(config: ExperimentConfig) -> MrfModel:
    if config.model_path is not None:
        model = load_model(config.model_path)
    else:
        model = generate_model(config.generator)
    violations = validate_model(model)
    if violations:
        raise ExperimentError("model fails validation: " + "; ".join(v.message for v in violations))
    return model


def generate_model(spec: dict) -> MrfModel:
    spec = dict(spec)
    if spec.pop("preset", None) == "figure1":
        return figure1_model(**spec)
    return random_model(**spec)


def _tau_for(config: ExperimentConfig, index: SampleIndex, tau_theory: float | None) -> float:
    if config.tau_mode == "fixed":
        return float(config.tau)
    if config.tau_mode == "theoretical":
        if tau_theory is None:
            raise ExperimentError("theoretical tau unavailable (degenerate constants)")
        return tau_theory
    return calibrate_tau(index)


def run_trial(config: ExperimentConfig, model: MrfModel, trial: int) -> dict:
    sample_seed, learn_seed = trial_seeds(config.seed, trial, config.trials)
    start = time.perf_counter()
    if config.sampler == "gibbs" or model.n > EXACT_LIMIT:
        samples = gibbs_sample(model, config.m_count, config.burn_in, config.thinning, sample_seed)
    else:
        samples = sample_exact(exact_joint(model), config.m_count, sample_seed)
    index = SampleIndex(samples)
    try:
        consts = derived_constants(model, config.w)
        tau_theory = consts.tau
    except ValueError:
        consts, tau_theory = None, None
    tau = _tau_for(config, index, tau_theory)
    plan = make_plan(model.r, tau, model.n, cap_L=config.cap_L, tau_theoretical=tau_theory)
    ledger = None
    if config.learner == "quantum":
        graph, ledger = recover_graph_quantum(
            index, model.r, plan, config.w, config.mode, learn_seed, config.rule
        )
    else:
        graph = recover_graph(index, model.r, plan, rule=config.rule)
    truth = model.edges()
    found = graph.edges
    tp = len(found & truth)
    return {
        "trial": trial,
        "sample_seed": sample_seed,
        "learner_seed": learn_seed,
        "tau": tau,
        "tau_theoretical": tau_theory,
        "cap_L": plan.cap_L,
        "exact": found == truth,
        "precision": tp / len(found) if found else 1.0,
        "recall": tp / len(truth) if truth else 1.0,
        "edges": [[a + 1, b + 1] for a, b in sorted(found)],
        "asymmetries": [[a + 1, b + 1] for a, b in graph.asymmetries],
        "ledger": ledger.to_dict() if ledger else None,
        "graph": graph.to_dict(),
        "wall_time": time.perf_counter() - start,
    }


def _run_one(args):
    config, model, trial = args
    try:
        return run_trial(config, model, trial)
    except Exception as exc:  # recorded per trial; see run_experiment
        return {"trial": trial, "error": repr(exc), "exact": False}


def run_experiment(config: ExperimentConfig, workers: int = 1) -> dict:
    model = build_model(config)
    jobs = [(config, model, k) for k in range(config.trials)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            trials = list(pool.map(_run_one, jobs))
    else:
        trials = [_run_one(j) for j in jobs]
    failed = [t for t in trials if "error" in t]
    if len(failed) == len(trials):
        raise ExperimentError(f"all {len(trials)} trials failed; first: {failed[0]['error']}")
    ok = [t for t in trials if "error" not in t]
    successes = sum(t["exact"] for t in ok)
    report = {
        "config": config.to_dict(),
        "versions": {"mrfq": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "ground_truth_edges": [[a + 1, b + 1] for a, b in sorted(model.edges())],
        "recovery": {"successes": successes, "trials": len(trials), "rate": successes / len(trials)},
        "failed_trials": len(failed),
        "mean_precision": float(np.mean([t["precision"] for t in ok])),
        "mean_recall": float(np.mean([t["recall"] for t in ok])),
        "trials": trials,
    }
    ledgers = [t["ledger"] for t in ok if t.get("ledger")]
    if ledgers:
        report["mean_ledger"] = {
            k: float(np.mean([led[k] for led in ledgers]))
            for k in ("oracle_calls", "grover_iterations", "classical_equiv_cost", "searches", "model_time")
        }
        report["mean_ledger"]["trials"] = len(ledgers)
    if config.out_json:
        Path(config.out_json).write_text(report_json(report))
    if config.out_csv:
        Path(config.out_csv).write_text(trials_csv(trials))
    return report


def strip_timing(obj):
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in ("wall_time",)}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def trials_csv(trials: list[dict]) -> str:
    buf = io.StringIO()
    cols = ["trial", "exact", "precision", "recall", "tau", "oracle_calls", "classical_equiv_cost", "error"]
    w = csv.writer(buf)
    w.writerow(cols)
    for t in trials:
        led = t.get("ledger") or {}
        w.writerow([
            t["trial"], t.get("exact"), t.get("precision"), t.get("recall"), t.get("tau"),
            led.get("oracle_calls"), led.get("classical_equiv_cost"), t.get("error", ""),
        ])
    return buf.getvalue()


# -- scaling ---------------------------------------------------------------

SCALING_COLUMNS = ("n", "K", "mode", "oracle_calls", "classical_equiv_cost", "success")


def maxfind_scaling(k_list, trials: int, mode: str = "accounting", eta: float = 0.1, seed: int = 0):
    """One maximum-finding run per trial over K random values; rows per run."""
    rows = []
    for K in k_list:
        for s in child_seeds(seed + int(K), trials):
            rng = np.random.default_rng(s)
            vals = rng.random(K)
            if mode == "amplitude":
                idx, led = durr_hoyer_amplitude(vals, eta, rng)
            elif mode == "classical":
                idx, led = linear_scan_max(vals)
            else:
                idx, led = durr_hoyer_accounting(vals, eta=eta, seed=rng)
            rows.append({
                "n": "", "K": K, "mode": mode, "oracle_calls": led.oracle_calls,
                "classical_equiv_cost": led.classical_equiv_cost,
                "success": int(idx == int(np.argmax(vals))),
            })
    return rows


def learner_scaling(
    n_list, r: int, trials: int, d: int = 3, m_count: int = 20_000, w: float = 0.1,
    mode: str = "accounting", seed: int = 0, alpha: float = 0.4, beta: float = 0.8,
):
    """Quantum learner on node 0 of random models; one row per (n, trial)."""
    rows = []
    for n in n_list:
        for s in child_seeds(seed + int(n), trials):
            ss = np.random.SeedSequence(s).spawn(3)
            model_seed, sample_seed, learn_seed = (int(c.generate_state(1)[0]) for c in ss)
            model = random_model(n, r, min(d, n - 1), alpha, beta, seed=model_seed)
            if n <= EXACT_LIMIT:
                samples = sample_exact(exact_joint(model), m_count, sample_seed)
            else:
                samples = gibbs_sample(model, m_count, 500, 1, sample_seed)
            index = SampleIndex(samples)
            plan = make_plan(r, calibrate_tau(index), n)
            res, led = learn_neighborhood_quantum(index, r, 0, plan, w, mode, learn_seed)
            truth = tuple(sorted(neighborhoods(model)[0][0]))
            rows.append({
                "n": n, "K": code_space(r - 1, n), "mode": mode, "oracle_calls": led.oracle_calls,
                "classical_equiv_cost": led.classical_equiv_cost, "success": int(res.neighbors == truth),
            })
    return rows


def rows_csv(rows: list[dict], columns=SCALING_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns))
    w.writeheader()
    for row in rows:
        w.writerow({c: row.get(c, "") for c in columns})
    return buf.getvalue()


def read_rows(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def loglog_slope(xs, ys) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)
    return float(slope)


def mean_by(rows: list[dict], key: str, value: str) -> dict[float, float]:
    groups: dict[float, list[float]] = {}
    for row in rows:
        groups.setdefault(float(row[key]), []).append(float(row[value]))
    return {k: float(np.mean(v)) for k, v in sorted(groups.items())}


def crossover_table(
    r_list, L_list, w_list, c3: float = 1.0, c4: float = 1.0, scaling_rows: list[dict] | None = None
) -> list[dict]:
    """Predicted crossover n per (r, L, w); measured query ratios appended when rows are given."""
    measured = None
    if scaling_rows:
        calls = mean_by(scaling_rows, "K", "oracle_calls")
        classic = mean_by(scaling_rows, "K", "classical_equiv_cost")
        measured = ";".join(f"K={int(k)}:{calls[k] / classic[k]:.4g}" for k in calls)
    out = []
    for r in r_list:
        for L in L_list:
            for w in w_list:
                lx = log2_crossover(L, r, w, c3)
                lc = log2_crossover_closed_form(L, r, w, c4)
                row = {
                    "r": r, "L": L, "w": w,
                    "log2_crossover_n": lx,
                    "crossover_n": 2.0**lx if lx < 1023 else math.inf,
                    "crossover_n_closed_form": 2.0**lc if lc < 1023 else math.inf,
                }
                if measured is not None:
                    row["measured_query_ratio"] = measured
                out.append(row)
    return out
