"""Exact and Gibbs sampling from the MRF joint distribution.

All randomness goes through ``numpy.random.default_rng`` (PCG64), so a seed
fixes the output on every platform numpy supports.

Configuration encoding for the full joint table follows the clique tensors:
node 0 is the most-significant bit, node n-1 the least, +1 -> 1, -1 -> 0.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .model import MrfModel, config_index

EXACT_LIMIT = 20
MAGIC = b"MRFS"
_HEADER = struct.Struct("<4sHIQq")  # magic, version, n, M, seed
_VERSION = 1


@dataclass(frozen=True)
class SampleSet:
    n: int
    data: np.ndarray
    seed: int | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.int8).reshape(-1, self.n)
        if data.size and not np.all(np.abs(data) == 1):
            raise ValueError("sample entries must be -1 or +1")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def m_count(self) -> int:
        return self.data.shape[0]

    def columns(self, nodes) -> np.ndarray:
        return self.data[:, list(nodes)]

    def packed(self) -> np.ndarray:
        """Bit-packed view (+1 -> 1) along the node axis."""
        return np.packbits(self.data > 0, axis=1)

    @classmethod
    def from_packed(cls, packed: np.ndarray, n: int, seed: int | None = None) -> "SampleSet":
        bits = np.unpackbits(packed, axis=1, count=n)
        return cls(n, bits.astype(np.int8) * 2 - 1, seed)

    def save(self, path: str | Path) -> None:
        seed = -1 if self.seed is None else int(self.seed)
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, _VERSION, self.n, self.m_count, seed))
            fh.write(self.data.tobytes(order="C"))

    @classmethod
    def load(cls, path: str | Path) -> "SampleSet":
        raw = Path(path).read_bytes()
        if len(raw) < _HEADER.size:
            raise ValueError(f"{path}: truncated sample file")
        magic, version, n, m, seed = _HEADER.unpack_from(raw)
        if magic != MAGIC or version != _VERSION:
            raise ValueError(f"{path}: not a sample file (magic={magic!r}, version={version})")
        body = np.frombuffer(raw, dtype=np.int8, offset=_HEADER.size)
        if body.size != n * m:
            raise ValueError(f"{path}: expected {n * m} entries, found {body.size}")
        return cls(n, body.reshape(m, n).copy(), None if seed < 0 else seed)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.data.tolist())


@dataclass(frozen=True)
class JointTable:
    n: int
    probs: np.ndarray
    log_z: float

    def configs(self) -> np.ndarray:
        return all_configs(self.n)

    def marginal(self, nodes) -> dict[tuple[int, ...], float]:
        out: dict[tuple[int, ...], float] = {}
        cfg = self.configs()[:, list(nodes)]
        for row, p in zip(map(tuple, cfg.tolist()), self.probs):
            out[row] = out.get(row, 0.0) + float(p)
        return out


def all_configs(n: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return (((idx[:, None] >> shifts) & 1) * 2 - 1).astype(np.int8)


def log_potential(model: MrfModel, configs: np.ndarray) -> np.ndarray:
    """Unnormalized log-probability of each configuration row."""
    total = np.zeros(configs.shape[0])
    for c in model.cliques:
        total += c.entries[config_index(configs[:, list(c.vertices)])]
    return total


def exact_joint(model: MrfModel, limit: int = EXACT_LIMIT) -> JointTable:
    if model.n > limit:
        raise ValueError(
            f"n={model.n} exceeds the exact-mode limit {limit}; use gibbs_sample instead"
        )
    logp = log_potential(model, all_configs(model.n))
    log_z = float(logsumexp(logp))
    probs = np.exp(logp - log_z)
    probs /= probs.sum()
    return JointTable(model.n, probs, log_z)


def sample_exact(table: JointTable, m_count: int, seed: int | None = None) -> SampleSet:
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(table.probs)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, rng.random(m_count), side="right")
    idx = np.minimum(idx, table.probs.size - 1)
    shifts = np.arange(table.n - 1, -1, -1, dtype=np.int64)
    data = ((idx[:, None] >> shifts) & 1) * 2 - 1
    return SampleSet(table.n, data.astype(np.int8), seed)


class _SiteConditionals:
    """Per-node lookup of the cliques touching it, for single-site updates."""

    def __init__(self, model: MrfModel):
        self.terms = []
        for u in range(model.n):
            terms = []
            for c in model.cliques_containing(u):
                pos = c.vertices.index(u)
                l = c.size
                others = [v for v in c.vertices if v != u]
                weights = np.array(
                    [1 << (l - 1 - k) for k, v in enumerate(c.vertices) if v != u], dtype=np.int64
                )
                terms.append((np.array(others, dtype=np.int64), weights, 1 << (l - 1 - pos), c.entries))
            self.terms.append(terms)

    def logit(self, u: int, state: np.ndarray) -> np.ndarray:
        """log p(x_u=+1 | rest) - log p(x_u=-1 | rest), one value per chain."""
        out = np.zeros(state.shape[0])
        for others, weights, ubit, entries in self.terms[u]:
            base = (state[:, others] > 0).astype(np.int64) @ weights if others.size else 0
            out += entries[base + ubit] - entries[base]
        return out


def conditional_plus(model: MrfModel, u: int, config: np.ndarray) -> float:
    """p(x_u = +1 | all other nodes) for a single configuration."""
    logit = _SiteConditionals(model).logit(u, np.asarray(config, dtype=np.int8)[None, :])[0]
    return float(1.0 / (1.0 + np.exp(-logit)))


def gibbs_sample(
    model: MrfModel,
    m_count: int,
    burn_in: int = 1000,
    thinning: int = 1,
    seed: int | None = None,
    chains: int = 64,
) -> SampleSet:
    """Systematic-scan Gibbs sampler.

    ``chains`` independent chains advance in lockstep (vectorized); after
    ``burn_in`` sweeps each chain emits one sample every ``thinning`` sweeps.
    Samples are interleaved chain-major per emission round and trimmed to
    ``m_count``.
    """
    diagnostics = {"burn_in": burn_in, "thinning": thinning, "chains": chains, "warnings": []}
    if burn_in == 0:
        diagnostics["warnings"].append("burn_in=0: samples start from the uniform initial state")
    if thinning == 0:
        diagnostics["warnings"].append("thinning=0 treated as 1")
    step = max(thinning, 1)
    chains = max(1, min(chains, m_count)) if m_count else 1
    rng = np.random.default_rng(seed)
    cond = _SiteConditionals(model)
    state = rng.choice(np.array([-1, 1], dtype=np.int8), size=(chains, model.n))

    def sweep():
        for u in range(model.n):
            p = 1.0 / (1.0 + np.exp(-cond.logit(u, state)))
            state[:, u] = np.where(rng.random(chains) < p, 1, -1)

    for _ in range(burn_in):
        sweep()
    rounds = -(-m_count // chains) if m_count else 0
    out = np.empty((rounds * chains, model.n), dtype=np.int8)
    for k in range(rounds):
        for _ in range(step):
            sweep()
        out[k * chains:(k + 1) * chains] = state
    return SampleSet(model.n, out[:m_count], seed, diagnostics)


def empirical_joint(samples: SampleSet) -> np.ndarray:
    """Frequency of each full configuration, indexed like JointTable.probs."""
    counts = np.bincount(config_index(samples.data), minlength=1 << samples.n)
    return counts / max(samples.m_count, 1)


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
