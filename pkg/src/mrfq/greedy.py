"""Greedy neighborhood recovery with a fixed search order, plus pruning.

Search order: subset sizes l = r-1 down to 1; within a size, candidates in
lexicographic order.  After every successful find the size resets to r-1.
"""
from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np

from .empirics import EmpiricalProbCache, SampleIndex, as_index
from .sampler import SampleSet

SELECTIONS = ("first", "max")


@dataclass(frozen=True)
class SearchPlan:
    """Learner settings.  ``u=None`` makes a template for :func:`recover_graph`.

    ``selection="first"`` accepts the first passing candidate in
    lexicographic order; ``"max"`` scans the whole size class and takes the
    largest v_hat (ties to the lexicographically smallest subset), which is
    what exact maximum finding returns.
    """

    tau: float
    cap_L: int
    order: tuple[int, ...]
    u: int | None = None
    selection: str = "first"
    tau_theoretical: float | None = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.cap_L < 1:
            raise ValueError(f"cap_L must be >= 1, got {self.cap_L}")
        if not self.order or any(b >= a for a, b in zip(self.order, self.order[1:])) or self.order[-1] < 1:
            raise ValueError(f"order must be strictly decreasing positive sizes, got {self.order}")
        if self.selection not in SELECTIONS:
            raise ValueError(f"selection must be one of {SELECTIONS}")

    def for_node(self, u: int) -> "SearchPlan":
        return replace(self, u=u)


def make_plan(
    r: int,
    tau: float,
    n: int,
    cap_L: float | None = None,
    u: int | None = None,
    selection: str = "first",
    theoretical_L: float | None = None,
    tau_theoretical: float | None = None,
) -> SearchPlan:
    """Plan with cap_L = min(theoretical L, n-1, user cap)."""
    caps = [n - 1]
    if cap_L is not None:
        caps.append(cap_L)
    if theoretical_L is not None:
        caps.append(theoretical_L)
    cap = max(1, int(math.floor(min(caps))))
    return SearchPlan(
        tau=tau, cap_L=cap, order=tuple(range(r - 1, 0, -1)), u=u,
        selection=selection, tau_theoretical=tau_theoretical,
    )


class Found(NamedTuple):
    subset: tuple[int, ...]
    v: float


@dataclass
class NeighborhoodResult:
    u: int
    neighbors: tuple[int, ...]
    superset_trace: list[tuple[tuple[int, ...], float, int]]
    pruned: list[tuple[int, float]]
    retained: list[tuple[int, float]]
    stats: dict = field(default_factory=dict)

    @property
    def superset(self) -> tuple[int, ...]:
        return tuple(sorted(v for sub, _, _ in self.superset_trace for v in sub))

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        d["neighbors"] = list(self.neighbors)
        d["superset_trace"] = [
            {"subset": list(s), "v_hat": v, "size": l} for s, v, l in self.superset_trace
        ]
        d["pruned"] = [{"node": i, "v_hat": v} for i, v in self.pruned]
        d["retained"] = [{"node": i, "v_hat": v} for i, v in self.retained]
        if not timing:
            d["stats"] = {k: v for k, v in d["stats"].items() if k != "wall_time"}
        return d

    def one_based(self, timing: bool = True) -> dict:
        """to_dict with every node index shifted to the 1-based file convention."""
        d = self.to_dict(timing)
        d["u"] += 1
        d["neighbors"] = [v + 1 for v in d["neighbors"]]
        for t in d["superset_trace"]:
            t["subset"] = [v + 1 for v in t["subset"]]
        for key in ("pruned", "retained"):
            for t in d[key]:
                t["node"] += 1
        return d


def enumerate_candidates(n: int, u: int, s_set: Sequence[int], l: int) -> Iterator[tuple[int, ...]]:
    excluded = set(s_set) | {u}
    return itertools.combinations([v for v in range(n) if v not in excluded], l)


def find_subset_classical(
    cache: EmpiricalProbCache, n: int, l: int, tau: float, selection: str = "first"
) -> Found | None:
    """Scan size-l candidates; evaluations are tallied on ``cache.evaluations``."""
    best = None
    for cand in enumerate_candidates(n, cache.u, cache.s_set, l):
        v = cache.v_hat(cand)
        if selection == "first":
            if v > tau:
                return Found(cand, v)
        elif best is None or v > best.v:
            best = Found(cand, v)
    if best is not None and best.v > tau:
        return best
    return None


Finder = Callable[[EmpiricalProbCache, int, int, float], "Found | None"]


def run_greedy(index: SampleIndex, u: int, plan: SearchPlan, finder: Finder) -> NeighborhoodResult:
    """Superset growth then a single pruning pass; shared by both learners."""
    start = time.perf_counter()
    n = index.n
    s_list: list[int] = []
    trace = []
    evaluations = 0
    finds = 0
    cap_terminated = False
    while len(s_list) <= plan.cap_L:
        cache = EmpiricalProbCache(index, u, s_list)
        found = None
        for l in plan.order:
            found = finder(cache, n, l, plan.tau)
            finds += 1
            if found is not None:
                break
        evaluations += cache.evaluations
        if found is None:
            break
        s_list.extend(found.subset)
        trace.append((found.subset, found.v, len(found.subset)))
        if len(s_list) > plan.cap_L:
            cap_terminated = True
    current = sorted(s_list)
    pruned, retained = [], []
    for i in sorted(s_list):
        rest = [v for v in current if v != i]
        cache = EmpiricalProbCache(index, u, rest)
        v = cache.v_hat((i,))
        evaluations += 1
        if v < plan.tau:
            current = rest
            pruned.append((i, v))
        else:
            retained.append((i, v))
    return NeighborhoodResult(
        u=u,
        neighbors=tuple(current),
        superset_trace=trace,
        pruned=pruned,
        retained=retained,
        stats={
            "v_hat_evaluations": evaluations,
            "subset_searches": finds,
            "cap_terminated": cap_terminated,
            "tau": plan.tau,
            "tau_theoretical": plan.tau_theoretical,
            "cap_L": plan.cap_L,
            "selection": plan.selection,
            "prune_rule": "single-pass-immediate",
            "wall_time": time.perf_counter() - start,
        },
    )


def learn_neighborhood(
    samples: SampleSet | SampleIndex, r: int, u: int, plan: SearchPlan
) -> NeighborhoodResult:
    index = as_index(samples)
    if not 0 <= u < index.n:
        raise ValueError(f"u={u} outside [0, {index.n})")
    if plan.order[0] > r - 1:
        raise ValueError(f"plan searches size {plan.order[0]} but r={r}")

    def finder(cache, n, l, tau):
        return find_subset_classical(cache, n, l, tau, plan.selection)

    return run_greedy(index, u, plan.for_node(u), finder)


@dataclass
class GraphRecovery:
    neighborhoods: dict[int, tuple[int, ...]]
    results: dict[int, NeighborhoodResult]
    asymmetries: list[tuple[int, int]]
    edges: set[tuple[int, int]]
    rule: str

    def to_dict(self, timing: bool = True, one_based: bool = True) -> dict:
        k = 1 if one_based else 0
        return {
            "rule": self.rule,
            "edges": [[a + k, b + k] for a, b in sorted(self.edges)],
            "asymmetries": [[a + k, b + k] for a, b in self.asymmetries],
            "neighborhoods": {str(u + k): [v + k for v in nb] for u, nb in self.neighborhoods.items()},
            "results": [
                (self.results[u].one_based(timing) if one_based else self.results[u].to_dict(timing))
                for u in sorted(self.results)
            ],
        }


def symmetrize(neigh: dict[int, Sequence[int]], rule: str = "and") -> tuple[set, list]:
    directed = {(u, v) for u, nb in neigh.items() for v in nb}
    asym = sorted({(min(a, b), max(a, b)) for a, b in directed if (b, a) not in directed})
    if rule == "and":
        edges = {(a, b) for a, b in directed if a < b and (b, a) in directed}
    elif rule == "or":
        edges = {(min(a, b), max(a, b)) for a, b in directed}
    else:
        raise ValueError(f"unknown symmetrization rule {rule!r}")
    return edges, asym


def recover_graph(
    samples: SampleSet | SampleIndex,
    r: int,
    plan: SearchPlan,
    rule: str = "and",
    workers: int = 1,
    learner: Callable | None = None,
) -> GraphRecovery:
    index = as_index(samples)
    learner = learner or (lambda u: learn_neighborhood(index, r, u, plan))
    nodes = range(index.n)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = dict(zip(nodes, pool.map(learner, nodes)))
    else:
        results = {u: learner(u) for u in nodes}
    neigh = {u: res.neighbors for u, res in results.items()}
    edges, asym = symmetrize(neigh, rule)
    return GraphRecovery(neigh, results, asym, edges, rule)


def singleton_values(samples: SampleSet | SampleIndex) -> dict[tuple[int, int], float]:
    index = as_index(samples)
    out = {}
    for u in range(index.n):
        cache = EmpiricalProbCache(index, u, ())
        for i in range(u + 1, index.n):
            out[u, i] = cache.v_hat((i,))
    return out


def calibrate_tau(samples: SampleSet | SampleIndex) -> float:
    """Threshold at the midpoint of the widest gap in sorted pairwise v_hat at S = {}.

    Zero is included as the floor so a model whose pairs are all dependent
    still gets a gap between noise and signal.
    """
    vals = np.sort(np.array([0.0, *singleton_values(samples).values()]))
    if vals.size < 2:
        raise ValueError("need at least two nodes to calibrate tau")
    gaps = np.diff(vals)
    k = int(np.argmax(gaps))
    tau = float(0.5 * (vals[k] + vals[k + 1]))
    if tau <= 0:
        raise ValueError("all pairwise v_hat are zero; cannot calibrate tau")
    return tau
