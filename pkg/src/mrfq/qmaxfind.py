"""Simulated quantum maximum finding and the quantum neighborhood learner.

Two fidelities share one interface:

* ``amplitude``: Durr-Hoyer with the Boyer-Brassard-Hoyer-Tapp schedule,
  every Grover iterate applied to an explicit real statevector of size N.
* ``accounting``: the threshold walk is simulated classically (exact argmax)
  and each round is charged ceil(c0 * sqrt(N / t)) oracle calls, t being the
  number of strictly better entries.

Candidates are ordered by (value desc, index asc), so ties go to the lowest
code, which is the lexicographically smallest subset.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .empirics import EmpiricalProbCache, SampleIndex, as_index
from .greedy import Found, NeighborhoodResult, SearchPlan, enumerate_candidates, run_greedy
from .sampler import SampleSet

AMPLITUDE_LIMIT = 1 << 14
MODES = ("amplitude", "accounting")
BBHT_GROWTH = 6 / 5
# Durr-Hoyer running-time bound that gives success probability >= 1/2
DH_SQRT = 22.5
DH_LOGSQ = 1.4


def code_bits(n: int) -> int:
    return max(1, math.ceil(math.log2(n)))


@dataclass(frozen=True)
class SubsetString:
    indices: tuple[int, ...]
    n: int

    @property
    def l(self) -> int:
        return len(self.indices)

    @property
    def code(self) -> int:
        b = code_bits(self.n)
        code = 0
        for j in self.indices:
            code = (code << b) | j
        return code

    @property
    def in_h(self) -> bool:
        return all(a < b for a, b in zip(self.indices, self.indices[1:]))


def encode_subset(indices: Sequence[int], n: int) -> SubsetString:
    indices = tuple(int(j) for j in indices)
    if any(j < 0 or j >= n for j in indices):
        raise ValueError(f"indices {indices} outside [0, {n})")
    return SubsetString(indices, n)


def decode_string(code: int, l: int, n: int, u: int | None = None) -> tuple[int, ...] | None:
    """Subset for ``code``, or None for strings outside H_l (out of range,
    not strictly increasing, or containing ``u``)."""
    b = code_bits(n)
    mask = (1 << b) - 1
    fields = tuple((code >> (b * (l - 1 - k))) & mask for k in range(l))
    if any(j >= n or j == u for j in fields):
        return None
    if any(y <= x for x, y in zip(fields, fields[1:])):
        return None
    return fields


def code_space(l: int, n: int) -> int:
    return 1 << (l * code_bits(n))


class Membership(NamedTuple):
    member: bool
    comparisons: int
    qubit_ops: int


def membership_check(string: SubsetString) -> Membership:
    comparisons = max(string.l - 1, 0)
    return Membership(string.in_h, comparisons, comparisons * code_bits(string.n))


@dataclass
class QueryLedger:
    mode: str
    oracle_calls: int = 0
    grover_iterations: int = 0
    measurements: int = 0
    classical_equiv_cost: int = 0
    searches: int = 0
    model_time: float = 0.0

    def absorb(self, other: "QueryLedger") -> None:
        self.oracle_calls += other.oracle_calls
        self.grover_iterations += other.grover_iterations
        self.measurements += other.measurements
        self.classical_equiv_cost += other.classical_equiv_cost
        self.searches += other.searches
        self.model_time += other.model_time

    def to_dict(self) -> dict:
        return asdict(self)


def _better_mask(values: np.ndarray, y: int) -> np.ndarray:
    idx = np.arange(values.size)
    return (values > values[y]) | ((values == values[y]) & (idx < y))


def uniform_state(size: int) -> np.ndarray:
    return np.full(size, 1.0 / math.sqrt(size))


def grover_iterate(state: np.ndarray, marked: np.ndarray) -> np.ndarray:
    """Oracle phase flip on ``marked`` then inversion about the mean."""
    flipped = np.where(marked, -state, state)
    return 2.0 * flipped.mean() - flipped


def grover_matrix(marked: np.ndarray) -> np.ndarray:
    size = marked.size
    oracle = np.diag(np.where(marked, -1.0, 1.0))
    diffusion = np.full((size, size), 2.0 / size) - np.eye(size)
    return diffusion @ oracle


def dh_budget(size: int, eta: float) -> int:
    reps = max(1, math.ceil(math.log2(1 / eta)))
    return math.ceil(reps * (DH_SQRT * math.sqrt(size) + DH_LOGSQ * math.log2(max(size, 2)) ** 2))


def durr_hoyer_amplitude(
    values: Sequence[float],
    eta: float = 0.1,
    seed: int | np.random.Generator | None = None,
    limit: int = AMPLITUDE_LIMIT,
) -> tuple[int, QueryLedger]:
    """Statevector Durr-Hoyer maximum finding.

    The threshold walk runs until the oracle-call budget
    ceil(log2(1/eta)) * (22.5 sqrt(N) + 1.4 log2(N)^2) is spent; each
    ceil(log2 1/eta) block of that budget alone succeeds with probability
    at least 1/2.  Every Grover iterate and every measured-candidate value
    lookup is one oracle call.
    """
    values = np.asarray(values, dtype=float)
    size = values.size
    if size == 0:
        raise ValueError("durr_hoyer_amplitude needs at least one value")
    if size > limit:
        raise ValueError(f"N={size} exceeds the amplitude-mode limit {limit}; use accounting mode")
    rng = np.random.default_rng(seed)
    ledger = QueryLedger("amplitude", classical_equiv_cost=size, searches=1)
    budget = dh_budget(size, eta)
    y = int(rng.integers(size))
    ledger.oracle_calls += 1
    ledger.measurements += 1
    m = 1.0
    marked = _better_mask(values, y)
    while ledger.oracle_calls < budget:
        j = int(rng.integers(math.ceil(m)))
        j = min(j, budget - ledger.oracle_calls - 1)
        state = uniform_state(size)
        for _ in range(j):
            state = grover_iterate(state, marked)
        ledger.grover_iterations += j
        probs = state * state
        i = int(rng.choice(size, p=probs / probs.sum()))
        ledger.oracle_calls += j + 1
        ledger.measurements += 1
        if marked[i]:
            y = i
            marked = _better_mask(values, y)
            m = 1.0
        else:
            m = min(BBHT_GROWTH * m, math.sqrt(size))
    return y, ledger


def durr_hoyer_accounting(
    value_oracle: Callable[[int], float] | Sequence[float] | np.ndarray,
    n_range: int | None = None,
    eta: float = 0.1,
    seed: int | np.random.Generator | None = None,
    c0: float = 1.0,
) -> tuple[int, QueryLedger]:
    """Idealized Durr-Hoyer: exact argmax, probabilistic query charge."""
    if callable(value_oracle):
        if n_range is None:
            raise ValueError("n_range required with a callable oracle")
        values = np.array([value_oracle(i) for i in range(n_range)], dtype=float)
    else:
        values = np.asarray(value_oracle, dtype=float)
    size = values.size
    if size == 0:
        raise ValueError("durr_hoyer_accounting needs at least one value")
    rng = np.random.default_rng(seed)
    ledger = QueryLedger("accounting", classical_equiv_cost=size, searches=1)
    y = int(rng.integers(size))
    ledger.oracle_calls += 1
    idx = np.arange(size)
    while True:
        better = idx[_better_mask(values, y)]
        t = better.size
        if t == 0:
            charge = math.ceil(c0 * math.sqrt(size)) * max(1, math.ceil(math.log2(1 / eta)))
            ledger.oracle_calls += charge
            ledger.grover_iterations += charge
            break
        charge = math.ceil(c0 * math.sqrt(size / t))
        ledger.oracle_calls += charge
        ledger.grover_iterations += charge
        ledger.measurements += 1
        y = int(better[rng.integers(t)])
    return y, ledger


def linear_scan_max(values: Sequence[float] | np.ndarray) -> tuple[int, QueryLedger]:
    """Classical exhaustive scan: one oracle call per entry, same tie order."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("linear_scan_max needs at least one value")
    best = int(np.argmax(values))
    return best, QueryLedger("classical", oracle_calls=values.size, classical_equiv_cost=values.size, searches=1)


# -- cost model ------------------------------------------------------------

def _lg(x: float) -> float:
    return math.log2(max(x, 2))


@dataclass(frozen=True)
class CostModel:
    """Closed-form costs with the hidden constants (and polylog factors) set to
    ``scale``.  |S| and s are floored at 1 so every formula is positive."""

    scale: float = 1.0

    def membership(self, l: int, n: int) -> float:
        return self.scale * l * code_bits(n)

    def prob_prep(self, m_count: int, n: int, r: int) -> float:
        return self.scale * (2 ** (r - 1) * m_count + m_count * _lg(n))

    def joint_prep(self, s_size: int, m_count: int, n: int, s: int, r: int) -> float:
        return self.scale * max(s_size, 1) * m_count * (_lg(n) + max(s, 1) * 2 ** (r - 1))

    def v_oracle(self, s_size: int, m_count: int, n: int, s: int, r: int) -> float:
        return self.scale * max(s_size, 1) * m_count * (max(s, 1) * 2 ** (r - 1) + _lg(n))

    def subset_find(self, s_size: int, s: int, r: int, m_count: int, n: int, w: float) -> float:
        return (
            self.scale * max(s_size, 1) * max(s, 1) * 2 ** (r - 1) * m_count
            * math.sqrt(n ** (r - 1)) * math.log2(1 / w)
        )

    def log2_quantum_total(self, cap_L: float, m_count: int, n: int, r: int, w: float) -> float:
        return (
            math.log2(self.scale) + cap_L + math.log2(m_count) + (r + 1) / 2 * math.log2(n)
            + math.log2(math.log2(1 / w))
        )

    def quantum_total(self, cap_L: float, m_count: int, n: int, r: int, w: float) -> float:
        x = self.log2_quantum_total(cap_L, m_count, n, r, w)
        return 2.0**x if x < 1023 else math.inf

    def classical_total(self, m_count: int, n: int, r: int) -> float:
        return self.scale * m_count * float(n) ** r


def log2_crossover(cap_L: float, r: int, w: float, c3: float = 1.0) -> float:
    """log2 n solving 2^L M n^((r+1)/2) log(1/w) = C3 M n^r."""
    if r < 2:
        raise ValueError("crossover needs r >= 2")
    return 2.0 / (r - 1) * (cap_L + math.log2(math.log2(1 / w)) - math.log2(c3))


def log2_crossover_closed_form(cap_L: float, r: int, w: float, c4: float = 1.0) -> float:
    """log2 of C4 * (2^(2L) log^2(1/w))^(1/(r-1))."""
    if r < 2:
        raise ValueError("crossover needs r >= 2")
    return math.log2(c4) + (2 * cap_L + 2 * math.log2(math.log2(1 / w))) / (r - 1)


def _pow2(x: float) -> float:
    return 2.0**x if x < 1023 else math.inf


def predict_costs(
    n: int,
    r: int,
    d: int,
    m_count: int,
    w: float,
    alpha: float,
    beta: float,
    cap_L: float | None = None,
    gamma: float | None = None,
    s_size: int | None = None,
    s_configs: int | None = None,
    c3: float = 1.0,
    c4: float = 1.0,
    cost: CostModel = CostModel(),
) -> dict:
    """Evaluate every cost formula plus the crossover size.

    Without a model, gamma defaults to its worst case beta * sum_l C(d, l-1).
    ``cap_L`` replaces the theoretical L = 8 / tau^2 (which is astronomical)
    when given; both are reported.
    """
    from .model import gamma_bound, tau_from

    gamma = gamma_bound(beta, r, d) if gamma is None else gamma
    tau = tau_from(alpha, gamma, r, d)
    theoretical_L = 8 / tau**2
    L = theoretical_L if cap_L is None else cap_L
    s_size = max(1, int(min(L, n - 1))) if s_size is None else s_size
    s_configs = min(2**min(s_size, 60), m_count) if s_configs is None else s_configs
    lx = log2_crossover(L, r, w, c3)
    lc = log2_crossover_closed_form(L, r, w, c4)
    return {
        "inputs": {"n": n, "r": r, "d": d, "M": m_count, "w": w, "alpha": alpha, "beta": beta},
        "gamma": gamma,
        "tau": tau,
        "L_theoretical": theoretical_L,
        "L": L,
        "membership": cost.membership(r - 1, n),
        "prob_prep": cost.prob_prep(m_count, n, r),
        "joint_prep": cost.joint_prep(s_size, m_count, n, s_configs, r),
        "v_oracle": cost.v_oracle(s_size, m_count, n, s_configs, r),
        "subset_find": cost.subset_find(s_size, s_configs, r, m_count, n, w),
        "log2_quantum_total": cost.log2_quantum_total(L, m_count, n, r, w),
        "quantum_total": cost.quantum_total(L, m_count, n, r, w),
        "classical_total": cost.classical_total(m_count, n, r),
        "log2_crossover_n": lx,
        "crossover_n": _pow2(lx),
        "log2_crossover_n_closed_form": lc,
        "crossover_n_closed_form": _pow2(lc),
    }


# -- subset finding and the learner ----------------------------------------

def find_subset_quantum(
    cache: EmpiricalProbCache,
    n: int,
    l: int,
    tau: float,
    eta: float,
    mode: str = "accounting",
    seed: int | np.random.Generator | None = None,
    c0: float = 1.0,
    cost: CostModel = CostModel(),
    limit: int = AMPLITUDE_LIMIT,
) -> tuple[Found | None, QueryLedger]:
    """Maximum finding over the size-l code space; non-member codes score -inf."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    size = code_space(l, n)
    if mode == "amplitude" and size > limit:
        raise ValueError(
            f"code space {size} exceeds the amplitude-mode limit {limit}; use accounting mode"
        )
    cands = list(enumerate_candidates(n, cache.u, cache.s_set, l))
    if not cands:
        return None, QueryLedger(mode)
    values = np.full(size, -np.inf)
    for cand in cands:
        values[encode_subset(cand, n).code] = cache.v_hat(cand)
    if mode == "amplitude":
        best, ledger = durr_hoyer_amplitude(values, eta, seed, limit)
    else:
        best, ledger = durr_hoyer_accounting(values, eta=eta, seed=seed, c0=c0)
    ledger.classical_equiv_cost = len(cands)
    ledger.model_time = ledger.oracle_calls * cost.v_oracle(
        len(cache.s_set), cache.m, n, len(cache.s_codes), l + 1
    )
    if values[best] > tau:
        return Found(decode_string(best, l, n, cache.u), float(values[best])), ledger
    return None, ledger


def learn_neighborhood_quantum(
    samples: SampleSet | SampleIndex,
    r: int,
    u: int,
    plan: SearchPlan,
    w: float = 0.1,
    mode: str = "accounting",
    seed: int | None = None,
    c0: float = 1.0,
    cost: CostModel = CostModel(),
) -> tuple[NeighborhoodResult, QueryLedger]:
    """Greedy loop with each subset search done by simulated maximum finding.

    Each search succeeds with probability 1 - w / (2 L (r-1)), L = plan.cap_L.
    """
    index = as_index(samples)
    if r < 2:
        raise ValueError("r must be >= 2")
    eta = w / (2 * plan.cap_L * (r - 1))
    rng = np.random.default_rng(seed)
    total = QueryLedger(mode)

    def finder(cache, n, l, tau):
        found, ledger = find_subset_quantum(cache, n, l, tau, eta, mode, rng, c0, cost)
        total.absorb(ledger)
        return found

    result = run_greedy(index, u, plan.for_node(u), finder)
    result.stats["selection"] = "max"
    result.stats["eta_per_search"] = eta
    result.stats["mode"] = mode
    return result, total


def recover_graph_quantum(
    samples: SampleSet | SampleIndex,
    r: int,
    plan: SearchPlan,
    w: float = 0.1,
    mode: str = "accounting",
    seed: int | None = None,
    rule: str = "and",
    c0: float = 1.0,
):
    """Per-node quantum learning with seeds split from ``seed``; returns (GraphRecovery, ledger)."""
    from .greedy import recover_graph

    index = as_index(samples)
    seeds = np.random.SeedSequence(seed).spawn(index.n)
    ledgers: dict[int, QueryLedger] = {}

    def learner(u):
        res, led = learn_neighborhood_quantum(
            index, r, u, plan, w, mode, np.random.default_rng(seeds[u]), c0
        )
        ledgers[u] = led
        return res

    graph = recover_graph(index, r, plan, rule=rule, learner=learner)
    total = QueryLedger(mode)
    for u in sorted(ledgers):
        total.absorb(ledgers[u])
    return graph, total
