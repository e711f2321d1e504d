"""Command-line entry point: ``mrfq <subcommand> ...``.

Node indices on the command line and in every file are 1-based.
Exit codes: 0 ok, 1 usage error, 2 validation failure, 3 experiment failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .empirics import EmpiricalProbCache, SampleIndex
from .experiment import (
    ExperimentConfig, ExperimentError, crossover_table, learner_scaling, loglog_slope,
    maxfind_scaling, mean_by, read_rows, report_json, rows_csv, run_experiment,
)
from .greedy import calibrate_tau, learn_neighborhood, make_plan, recover_graph
from .model import (
    DegenerateConstantsError, StructuralError, derived_constants, dump_model, figure1_model,
    load_model, random_model, validate_model,
)
from .qmaxfind import learn_neighborhood_quantum, predict_costs
from .sampler import SampleSet, exact_joint, gibbs_sample, sample_exact

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_FAILED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _nodes(text: str | None) -> tuple[int, ...]:
    """1-based comma list -> 0-based tuple."""
    return tuple(v - 1 for v in _ints(text)) if text else ()


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    return int(os.environ.get("MRF_SEED", 0))


def _out(args, path: str | None, default: str) -> Path:
    p = Path(path) if path else Path(default)
    if not p.is_absolute() and args.out_dir:
        p = Path(args.out_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _emit(args, payload, path: Path | None = None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is not None:
        path.write_text(text)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)


def _model_meta(text: str) -> tuple[int, int]:
    n, r = _ints(text)
    return n, r


def _tau(args, samples: SampleIndex, model_path: str | None, w: float) -> tuple[float, float | None]:
    theory = None
    if model_path:
        try:
            theory = derived_constants(load_model(model_path), w).tau
        except DegenerateConstantsError:
            theory = None
    if args.tau is not None:
        return args.tau, theory
    if args.tau_theoretical:
        if theory is None:
            raise UsageError("--tau-theoretical needs --model with non-degenerate constants")
        return theory, theory
    return calibrate_tau(samples), theory


# -- subcommands -----------------------------------------------------------

def cmd_gen_model(args) -> int:
    if args.preset == "figure1":
        model = figure1_model(**({"alpha": args.alpha} if args.alpha else {}))
    else:
        if args.n is None or args.r is None or args.d is None:
            raise UsageError("random models need --n, --r and --d")
        model = random_model(
            args.n, args.r, args.d, args.alpha or 0.4, args.beta, args.density, _seed(args)
        )
    violations = validate_model(model)
    if violations:
        for v in violations:
            print(f"condition {v.condition}: {v.message}", file=sys.stderr)
        return EXIT_INVALID
    path = _out(args, args.out, "model.json")
    dump_model(model, path)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    model = load_model(args.model)
    violations = validate_model(model)
    payload = {"violations": [{"condition": v.condition, "where": [i + 1 for i in v.where],
                               "message": v.message} for v in violations]}
    try:
        c = derived_constants(model, args.w)
        payload["constants"] = {"gamma": c.gamma, "delta": c.delta, "tau": c.tau, "L": c.cap_L,
                                "log2_sample_bound": c.log2_sample_bound}
    except DegenerateConstantsError as exc:
        payload["constants"] = {"error": str(exc)}
    _emit(args, payload)
    return EXIT_INVALID if violations else EXIT_OK


def cmd_sample(args) -> int:
    model = load_model(args.model)
    seed = _seed(args)
    if args.gibbs:
        samples = gibbs_sample(model, args.count, args.burn_in, args.thin, seed)
    else:
        samples = sample_exact(exact_joint(model), args.count, seed)
    path = _out(args, args.out, "samples.bin")
    samples.save(path)
    if args.csv:
        samples.to_csv(_out(args, args.csv, "samples.csv"))
    print(f"wrote {path} (M={samples.m_count}, n={samples.n}, seed={seed})")
    return EXIT_OK


def cmd_vhat(args) -> int:
    samples = SampleSet.load(args.samples)
    cache = EmpiricalProbCache(samples, args.u - 1, _nodes(args.s))
    i_set = _nodes(args.i)
    payload = {
        "u": args.u, "S": list(_ints(args.s or "")), "I": list(_ints(args.i)),
        "v_hat": cache.v_hat(i_set),
        "breakdown": [{**row, "x_I": list(row["x_I"]), "x_S": list(row["x_S"])}
                      for row in cache.breakdown(i_set)],
    }
    _emit(args, payload)
    return EXIT_OK


def _plan(args, index: SampleIndex, n: int, r: int, w: float, selection="first"):
    tau, theory = _tau(args, index, args.model, w)
    return make_plan(r, tau, n, cap_L=args.cap_L, selection=selection, tau_theoretical=theory)


def cmd_learn(args) -> int:
    n, r = _model_meta(args.model_meta)
    index = SampleIndex(SampleSet.load(args.samples))
    plan = _plan(args, index, n, r, 0.1)
    res = learn_neighborhood(index, r, args.u - 1, plan)
    _emit(args, res.one_based(), _out(args, args.out, "result.json"))
    return EXIT_OK


def cmd_recover(args) -> int:
    n, r = _model_meta(args.model_meta)
    index = SampleIndex(SampleSet.load(args.samples))
    plan = _plan(args, index, n, r, 0.1)
    graph = recover_graph(index, r, plan, rule=args.rule, workers=args.threads or 1)
    _emit(args, graph.to_dict(), _out(args, args.out, "graph.json"))
    return EXIT_OK


def cmd_qlearn(args) -> int:
    n, r = _model_meta(args.model_meta)
    index = SampleIndex(SampleSet.load(args.samples))
    plan = _plan(args, index, n, r, args.eta_budget)
    res, ledger = learn_neighborhood_quantum(
        index, r, args.u - 1, plan, args.eta_budget, args.mode, _seed(args)
    )
    payload = res.one_based()
    payload["ledger"] = ledger.to_dict()
    _emit(args, payload, _out(args, args.out, "qresult.json"))
    return EXIT_OK


def cmd_bench_scaling(args) -> int:
    seed = _seed(args)
    if args.k_list:
        rows = maxfind_scaling(_ints(args.k_list), args.trials, args.mode, args.eta, seed)
    else:
        if args.mode == "classical":
            raise UsageError("--mode classical applies to --k-list only")
        if not args.n_list or args.r is None:
            raise UsageError("bench-scaling needs --k-list, or --n-list with --r")
        rows = learner_scaling(_ints(args.n_list), args.r, args.trials, m_count=args.count,
                               w=args.eta_budget, mode=args.mode, seed=seed)
    path = _out(args, args.out, "scaling.csv")
    path.write_text(rows_csv(rows))
    calls = mean_by(rows, "K", "oracle_calls")
    if len(calls) > 1:
        print(f"log-log slope of mean oracle calls vs K: {loglog_slope(list(calls), list(calls.values())):.3f}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_crossover(args) -> int:
    rows_in = read_rows(args.scaling) if args.scaling else None
    table = crossover_table(_ints(args.r_list), _floats(args.L_list), _floats(args.w_list),
                            args.c3, args.c4, rows_in)
    if args.n is not None:
        pred = predict_costs(args.n, max(_ints(args.r_list)), args.d, args.count, min(_floats(args.w_list)),
                             args.alpha, args.beta, cap_L=max(_floats(args.L_list)))
        print(json.dumps(pred, indent=2, default=str), file=sys.stderr)
    if args.format == "csv":
        cols = list(table[0])
        print(",".join(cols))
        for row in table:
            print(",".join(str(row[c]) for c in cols))
    else:
        _emit(args, table)
    return EXIT_OK


def cmd_report(args) -> int:
    if args.config:
        config = ExperimentConfig(**json.loads(Path(args.config).read_text()))
    else:
        gen = {"preset": args.preset} if args.preset else None
        config = ExperimentConfig(
            model_path=args.model, generator=gen, m_count=args.count, learner=args.learner,
            tau_mode=args.tau_mode, tau=args.tau, cap_L=args.cap_L, w=args.eta_budget,
            mode=args.mode, trials=args.trials, seed=_seed(args),
            out_json=str(_out(args, args.out, "report.json")),
            out_csv=str(_out(args, args.csv, "report.csv")),
        )
    report = run_experiment(config, workers=args.threads or os.cpu_count() or 1)
    rec = report["recovery"]
    print(f"exact recovery {rec['successes']}/{rec['trials']}")
    if "mean_ledger" in report:
        print("mean ledger: " + json.dumps(report["mean_ledger"]))
    if config.out_json:
        print(f"wrote {config.out_json}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def _tau_flags(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--tau", type=float)
    g.add_argument("--tau-theoretical", action="store_true")
    g.add_argument("--tau-auto", action="store_true", help="largest-gap calibration (default)")
    p.add_argument("--cap-L", type=int)
    p.add_argument("--model", help="model file, needed for --tau-theoretical")


def _global_flags(p, suppress: bool) -> None:
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--seed", type=int, help="master seed (fallback: $MRF_SEED, then 0)",
                   **(kw or {"default": None}))
    p.add_argument("--threads", type=int, **(kw or {"default": None}))
    p.add_argument("--out-dir", **(kw or {"default": None}))
    p.add_argument("--format", choices=("json", "csv"), **(kw or {"default": "json"}))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mrfq", description=__doc__.splitlines()[0])
    _global_flags(p, suppress=False)
    # global flags are accepted after the subcommand too
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    s = add("gen-model", help="write a preset or random model")
    s.add_argument("--preset", choices=("figure1",))
    s.add_argument("--n", type=int)
    s.add_argument("--r", type=int)
    s.add_argument("--d", type=int)
    s.add_argument("--alpha", type=float)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--density", type=float, default=1.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_gen_model)

    s = add("validate", help="check non-degeneracy and print derived constants")
    s.add_argument("--model", required=True)
    s.add_argument("--w", type=float, default=0.1)
    s.set_defaults(func=cmd_validate)

    s = add("sample", help="draw samples from a model")
    s.add_argument("--model", required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--out")
    s.add_argument("--csv")
    s.add_argument("--gibbs", action="store_true")
    s.add_argument("--burn-in", type=int, default=1000)
    s.add_argument("--thin", type=int, default=1)
    s.set_defaults(func=cmd_sample)

    s = add("vhat", help="print v_hat and its per-configuration terms")
    s.add_argument("--samples", required=True)
    s.add_argument("--u", type=int, required=True)
    s.add_argument("--s", default="")
    s.add_argument("--i", required=True)
    s.set_defaults(func=cmd_vhat)

    for name, func, helptext in (
        ("learn", cmd_learn, "classical neighborhood of one node"),
        ("recover", cmd_recover, "classical recovery of the whole graph"),
        ("qlearn", cmd_qlearn, "simulated-quantum neighborhood of one node"),
    ):
        s = add(name, help=helptext)
        s.add_argument("--samples", required=True)
        s.add_argument("--model-meta", required=True, help="n,r")
        if name != "recover":
            s.add_argument("--u", type=int, required=True)
        else:
            s.add_argument("--rule", choices=("and", "or"), default="and")
        if name == "qlearn":
            s.add_argument("--mode", choices=("amplitude", "accounting"), default="accounting")
            s.add_argument("--eta-budget", type=float, default=0.1)
        _tau_flags(s)
        s.add_argument("--out")
        s.set_defaults(func=func)

    s = add("bench-scaling", help="oracle-call scaling rows as CSV")
    s.add_argument("--k-list", help="raw max-finding over these search-space sizes")
    s.add_argument("--n-list", help="quantum learner on random models of these sizes")
    s.add_argument("--r", type=int)
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--count", type=int, default=20_000)
    s.add_argument("--mode", choices=("amplitude", "accounting", "classical"), default="accounting",
                   help="classical is a linear scan baseline (--k-list only)")
    s.add_argument("--eta", type=float, default=0.1)
    s.add_argument("--eta-budget", type=float, default=0.1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_bench_scaling)

    s = add("crossover", help="predicted quantum/classical crossover size")
    s.add_argument("--r-list", default="3,4,5")
    s.add_argument("--L-list", default="2,4,8")
    s.add_argument("--w-list", default="0.1,0.01,0.001")
    s.add_argument("--c3", type=float, default=1.0)
    s.add_argument("--c4", type=float, default=1.0)
    s.add_argument("--scaling", help="CSV from bench-scaling")
    s.add_argument("--n", type=int, help="also print every cost formula at this n")
    s.add_argument("--d", type=int, default=3)
    s.add_argument("--count", type=int, default=100_000)
    s.add_argument("--alpha", type=float, default=0.3)
    s.add_argument("--beta", type=float, default=1.0)
    s.set_defaults(func=cmd_crossover)

    s = add("report", help="run seeded trials end to end and write a report")
    s.add_argument("--config", help="ExperimentConfig JSON")
    s.add_argument("--model")
    s.add_argument("--preset", choices=("figure1",))
    s.add_argument("--count", type=int, default=100_000)
    s.add_argument("--learner", choices=("classical", "quantum"), default="classical")
    s.add_argument("--tau-mode", choices=("auto", "theoretical", "fixed"), default="auto")
    s.add_argument("--tau", type=float)
    s.add_argument("--cap-L", type=int)
    s.add_argument("--mode", choices=("amplitude", "accounting"), default="accounting")
    s.add_argument("--eta-budget", type=float, default=0.1)
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--out")
    s.add_argument("--csv")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mrfq: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StructuralError, DegenerateConstantsError) as exc:
        print(f"mrfq: invalid model: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ExperimentError, OSError, ValueError) as exc:
        print(f"mrfq: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
