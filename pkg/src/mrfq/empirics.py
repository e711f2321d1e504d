"""Empirical and exact versions of the information quantity v_{u,I|S}.

    v = sum p(x_u) p(x_I) | p(x_u, x_I, x_S) - p(x_u, x_S) p(x_I, x_S) / p(x_S) |

The empirical sum runs over (x_u, x_I, x_S) triples observed in the samples.
The exact version sums over every configuration with p(x_S) > 0.

One pass over a SampleSet collapses it to its distinct rows with counts
(:class:`SampleIndex`); every later query works on that compressed table.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import config_index, index_config
from .sampler import JointTable, SampleSet


class SampleIndex:
    """Distinct sample rows and their multiplicities."""

    def __init__(self, samples: SampleSet):
        if samples.m_count == 0:
            raise ValueError("empty sample set")
        rows, counts = np.unique(samples.data, axis=0, return_counts=True)
        self.n = samples.n
        self.m_count = samples.m_count
        self.rows = rows
        self.counts = counts.astype(np.int64)

    def codes(self, nodes: Sequence[int]) -> np.ndarray:
        nodes = list(nodes)
        if not nodes:
            return np.zeros(len(self.rows), dtype=np.int64)
        return config_index(self.rows[:, nodes])


def as_index(samples: SampleSet | SampleIndex) -> SampleIndex:
    return samples if isinstance(samples, SampleIndex) else SampleIndex(samples)


def empirical_prob(samples: SampleSet | SampleIndex, nodes: Sequence[int]) -> dict[tuple[int, ...], float]:
    nodes = tuple(nodes)
    if not nodes:
        raise ValueError("empirical_prob needs at least one node")
    if len(set(nodes)) != len(nodes):
        raise ValueError(f"repeated node in {nodes}")
    index = as_index(samples)
    if min(nodes) < 0 or max(nodes) >= index.n:
        raise ValueError(f"nodes {nodes} outside [0, {index.n})")
    counts = np.bincount(index.codes(nodes), weights=index.counts, minlength=1 << len(nodes))
    return {
        index_config(k, len(nodes)): float(c) / index.m_count
        for k, c in enumerate(counts) if c > 0
    }


@dataclass(frozen=True)
class ConditioningContext:
    u: int
    s_set: tuple[int, ...]
    s_configs: dict[tuple[int, ...], int]

    @property
    def s(self) -> int:
        return len(self.s_configs)


def _check_disjoint(u: int, s_set: Iterable[int], i_set: Iterable[int]) -> None:
    s_set, i_set = set(s_set), set(i_set)
    if not i_set:
        raise ValueError("empty candidate set I")
    if u in i_set or s_set & i_set:
        raise ValueError(f"I={sorted(i_set)} overlaps u={u} or S={sorted(s_set)}")


def _terms(m: int, c_u, c_i, c_uis, c_us, c_is, c_s):
    """Shared scalar expression; operands may be ints or int arrays."""
    return (c_u / m) * (c_i / m) * abs(c_uis / m - (c_us / m) * (c_is / m) / (c_s / m))


class EmpiricalProbCache:
    """Empirical tables for a fixed (u, S); answers v_hat for any disjoint I."""

    def __init__(self, samples: SampleSet | SampleIndex, u: int, s_set: Sequence[int] = ()):
        self.index = as_index(samples)
        self.u = int(u)
        self.s_set = tuple(sorted(int(v) for v in s_set))
        if self.u in self.s_set:
            raise ValueError(f"u={u} inside S={self.s_set}")
        idx = self.index
        self.m = idx.m_count
        self.xu = idx.codes((self.u,))
        s_codes = idx.codes(self.s_set)
        uniq, self.s_id = np.unique(s_codes, return_inverse=True)
        self.s_id = self.s_id.reshape(-1)
        self.s_codes = uniq
        self.count_u = np.bincount(self.xu, weights=idx.counts, minlength=2).astype(np.int64)
        self.count_s = np.bincount(self.s_id, weights=idx.counts, minlength=len(uniq)).astype(np.int64)
        self.count_us = np.bincount(
            self.s_id * 2 + self.xu, weights=idx.counts, minlength=2 * len(uniq)
        ).astype(np.int64)
        self.evaluations = 0

    @property
    def context(self) -> ConditioningContext:
        k = len(self.s_set)
        return ConditioningContext(
            self.u,
            self.s_set,
            {index_config(int(c), k): int(n) for c, n in zip(self.s_codes, self.count_s)},
        )

    def _tables(self, i_set: Sequence[int]):
        i_set = tuple(i_set)
        _check_disjoint(self.u, self.s_set, i_set)
        l = len(i_set)
        xi = self.index.codes(i_set)
        w = self.index.counts
        n_s = len(self.s_codes)
        count_i = np.bincount(xi, weights=w, minlength=1 << l).astype(np.int64)
        is_key = self.s_id * (1 << l) + xi
        count_is = np.bincount(is_key, weights=w, minlength=n_s << l).astype(np.int64)
        uis_key = is_key * 2 + self.xu
        keys, inv = np.unique(uis_key, return_inverse=True)
        count_uis = np.bincount(inv.reshape(-1), weights=w).astype(np.int64)
        xu = keys & 1
        is_k = keys >> 1
        xi_k = is_k & ((1 << l) - 1)
        s_k = is_k >> l
        return l, keys, xu, xi_k, s_k, (
            self.count_u[xu], count_i[xi_k], count_uis,
            self.count_us[s_k * 2 + xu], count_is[is_k], self.count_s[s_k],
        )

    def v_hat(self, i_set: Sequence[int]) -> float:
        self.evaluations += 1
        *_, counts = self._tables(i_set)
        return math.fsum(_terms(self.m, *counts).tolist())

    def breakdown(self, i_set: Sequence[int]) -> list[dict]:
        """Per observed (x_u, x_I, x_S) contribution, for debugging output."""
        l, keys, xu, xi_k, s_k, counts = self._tables(i_set)
        terms = _terms(self.m, *counts)
        k = len(self.s_set)
        return [
            {
                "x_u": 1 if a else -1,
                "x_I": index_config(int(b), l),
                "x_S": index_config(int(self.s_codes[c]), k) if k else (),
                "count": int(counts[2][j]),
                "term": float(terms[j]),
            }
            for j, (a, b, c) in enumerate(zip(xu, xi_k, s_k))
        ]

    def consistent(self, i_set: Sequence[int]) -> bool:
        """Check sum_{x_I} p(x_u, x_I, x_S) == p(x_u, x_S) for every observed (x_u, x_S)."""
        l, keys, xu, xi_k, s_k, counts = self._tables(i_set)
        summed = np.bincount(s_k * 2 + xu, weights=counts[2], minlength=self.count_us.size)
        return bool(np.array_equal(summed.astype(np.int64), self.count_us))


def v_hat(samples: SampleSet | SampleIndex, u: int, s_set: Sequence[int], i_set: Sequence[int]) -> float:
    return EmpiricalProbCache(samples, u, s_set).v_hat(i_set)


def brute_force_v_hat(samples: SampleSet, u: int, s_set: Sequence[int], i_set: Sequence[int]) -> float:
    """Reference v_hat: plain loops over every sample row, no shared state."""
    _check_disjoint(u, s_set, i_set)
    m = samples.m_count
    if m == 0:
        raise ValueError("empty sample set")
    s_set, i_set = tuple(s_set), tuple(i_set)
    rows = samples.data.tolist()
    c_u, c_i, c_s, c_us, c_is, c_uis = (Counter() for _ in range(6))
    for row in rows:
        a = row[u]
        b = tuple(row[j] for j in i_set)
        c = tuple(row[j] for j in s_set)
        c_u[a] += 1
        c_i[b] += 1
        c_s[c] += 1
        c_us[a, c] += 1
        c_is[b, c] += 1
        c_uis[a, b, c] += 1
    terms = [
        _terms(m, c_u[a], c_i[b], n_abc, c_us[a, c], c_is[b, c], c_s[c])
        for (a, b, c), n_abc in c_uis.items()
    ]
    return math.fsum(terms)


def true_v(table: JointTable, u: int, s_set: Sequence[int], i_set: Sequence[int]) -> float:
    """Exact v_{u,I|S} from the full joint table."""
    s_set, i_set = tuple(s_set), tuple(i_set)
    _check_disjoint(u, s_set, i_set)
    keep = (u, *i_set, *s_set)
    cube = table.probs.reshape((2,) * table.n)
    drop = tuple(ax for ax in range(table.n) if ax not in keep)
    marg = cube.sum(axis=drop) if drop else cube
    # marg axes are in ascending node order; move them to (u, I..., S...)
    order = sorted(keep)
    marg = np.transpose(marg, [order.index(v) for v in keep])
    l = len(i_set)
    ax_i = tuple(range(1, 1 + l))
    ax_s = tuple(range(1 + l, 1 + l + len(s_set)))
    p_uis = marg
    p_us = marg.sum(axis=ax_i, keepdims=True)
    p_is = marg.sum(axis=0, keepdims=True)
    p_s = marg.sum(axis=(0, *ax_i), keepdims=True)
    p_u = marg.sum(axis=ax_i + ax_s, keepdims=True)
    p_i = marg.sum(axis=(0, *ax_s), keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = np.abs(p_uis - np.where(p_s > 0, p_us * p_is / p_s, 0.0))
    terms = np.broadcast_to(p_u * p_i, marg.shape) * np.where(np.broadcast_to(p_s, marg.shape) > 0, dev, 0.0)
    return float(terms.sum())


def threshold_test(v_value: float, tau: float) -> bool:
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return v_value > tau
