"""Binary r-wise Markov random fields over bounded-degree hypergraphs.

Node indices are 0-based everywhere in the Python API.  The JSON model file
uses 1-based indices; :func:`load_model` / :func:`dump_model` are the only
places that convert.

Tensor entry layout: a clique ``(v_0, ..., v_{l-1})`` stores ``2**l`` weights.
The weight for configuration ``(x_0, ..., x_{l-1})`` sits at index
``sum(b_k << (l - 1 - k))`` with ``b_k = 0`` for ``x_k = -1`` and ``b_k = 1``
for ``x_k = +1``; the last vertex is the least-significant bit.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np


class StructuralError(ValueError):
    """Malformed model: bad index ranges, tensor shapes, duplicate cliques."""


class DegenerateConstantsError(ValueError):
    """gamma is zero, so the threshold constant is undefined."""


def config_index(configs: np.ndarray) -> np.ndarray:
    """Map rows of +/-1 values to their integer encoding (last column = LSB)."""
    configs = np.asarray(configs)
    bits = (configs > 0).astype(np.int64)
    width = bits.shape[-1]
    weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
    return bits @ weights


def index_config(index: int, width: int) -> tuple[int, ...]:
    """Inverse of :func:`config_index` for a single configuration."""
    return tuple(1 if (index >> (width - 1 - k)) & 1 else -1 for k in range(width))


@dataclass(frozen=True)
class CliqueTensor:
    vertices: tuple[int, ...]
    entries: np.ndarray

    def __post_init__(self):
        verts = tuple(int(v) for v in self.vertices)
        entries = np.array(self.entries, dtype=float).reshape(-1)
        if not verts:
            raise StructuralError("clique has no vertices")
        if any(b <= a for a, b in zip(verts, verts[1:])):
            raise StructuralError(f"clique vertices {verts} not strictly increasing")
        if entries.size != 1 << len(verts):
            raise StructuralError(
                f"clique {verts} needs {1 << len(verts)} entries, got {entries.size}"
            )
        if not np.all(np.isfinite(entries)):
            raise StructuralError(f"clique {verts} has non-finite entries")
        entries.flags.writeable = False
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "entries", entries)

    @property
    def size(self) -> int:
        return len(self.vertices)

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.entries)))

    def weight(self, config: Sequence[int]) -> float:
        return float(self.entries[int(config_index(np.asarray(config)))])

    @classmethod
    def from_function(cls, vertices: Sequence[int], fn) -> "CliqueTensor":
        """Tabulate ``fn(*x)`` over all +/-1 configurations of ``vertices``."""
        l = len(vertices)
        entries = [fn(*index_config(k, l)) for k in range(1 << l)]
        return cls(tuple(vertices), np.array(entries, dtype=float))


@dataclass(frozen=True)
class MrfModel:
    n: int
    r: int
    cliques: tuple[CliqueTensor, ...]
    alpha: float
    beta: float
    _nbrs: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cliques = tuple(self.cliques)
        object.__setattr__(self, "cliques", cliques)
        if self.n < 1:
            raise StructuralError(f"n must be positive, got {self.n}")
        if self.r < 1:
            raise StructuralError(f"r must be positive, got {self.r}")
        seen = set()
        for c in cliques:
            if c.size > self.r:
                raise StructuralError(f"clique {c.vertices} larger than r={self.r}")
            if c.vertices[0] < 0 or c.vertices[-1] >= self.n:
                raise StructuralError(f"clique {c.vertices} outside [0, {self.n})")
            if c.vertices in seen:
                raise StructuralError(f"duplicate clique {c.vertices}")
            seen.add(c.vertices)
        nbrs = [set() for _ in range(self.n)]
        for c in cliques:
            for a in c.vertices:
                nbrs[a].update(c.vertices)
        for u in range(self.n):
            nbrs[u].discard(u)
        object.__setattr__(self, "_nbrs", tuple(frozenset(s) for s in nbrs))

    def clique(self, vertices: Sequence[int]) -> CliqueTensor | None:
        key = tuple(vertices)
        for c in self.cliques:
            if c.vertices == key:
                return c
        return None

    def cliques_containing(self, u: int) -> list[CliqueTensor]:
        return [c for c in self.cliques if u in c.vertices]

    def edges(self) -> set[tuple[int, int]]:
        return {(a, b) for c in self.cliques for a, b in itertools.combinations(c.vertices, 2)}

    @property
    def degree(self) -> int:
        return max((len(s) for s in self._nbrs), default=0)


class Violation(NamedTuple):
    condition: int
    where: tuple[int, ...]
    message: str


def maximal_hyperedges(model: MrfModel) -> set[tuple[int, ...]]:
    sets = [frozenset(c.vertices) for c in model.cliques]
    out = set()
    for c, s in zip(model.cliques, sets):
        if not any(s < other for other in sets):
            out.add(c.vertices)
    return out


def neighborhoods(model: MrfModel) -> tuple[dict[int, frozenset[int]], int]:
    nbrs = {u: model._nbrs[u] for u in range(model.n)}
    return nbrs, model.degree


def validate_model(model: MrfModel) -> list[Violation]:
    """Check (alpha, beta)-non-degeneracy; an empty list means the model passes.

    Condition 2 counts entries of the hyperedge's own tensor and of every
    clique it contains, e.g. for (1,2,5): theta^125, theta^12, ..., theta^5.
    """
    out = []
    nonzero = [c for c in model.cliques if np.any(c.entries != 0)]
    for a, b in sorted(model.edges()):
        if not any(a in c.vertices and b in c.vertices for c in nonzero):
            out.append(Violation(1, (a, b), f"edge {(a, b)} has no clique with a non-zero tensor"))
    for h in sorted(maximal_hyperedges(model)):
        hs = set(h)
        best = max(c.max_abs for c in model.cliques if set(c.vertices) <= hs)
        if best < model.alpha:
            out.append(
                Violation(2, h, f"max |entry| {best:.6g} on hyperedge {h} below alpha={model.alpha}")
            )
    for c in model.cliques:
        if c.max_abs > model.beta:
            out.append(
                Violation(3, c.vertices, f"|entry| {c.max_abs:.6g} on {c.vertices} exceeds beta={model.beta}")
            )
    return out


@dataclass(frozen=True)
class DerivedConstants:
    gamma: float
    delta: float
    tau: float
    cap_L: float
    log2_sample_bound: float
    w: float

    @property
    def sample_bound(self) -> float:
        """Minimum M; ``inf`` when it overflows a double (the usual case)."""
        return 2.0**self.log2_sample_bound if self.log2_sample_bound < 1023 else math.inf


def gamma_of(model: MrfModel) -> float:
    per_node = np.zeros(model.n)
    for c in model.cliques:
        for v in c.vertices:
            per_node[v] += c.max_abs
    return float(per_node.max())


def tau_from(alpha: float, gamma: float, r: int, d: int) -> float:
    if gamma <= 0:
        raise DegenerateConstantsError("gamma = 0: threshold undefined (all tensors zero)")
    delta = 0.5 * math.exp(-2 * gamma)
    # C(d, r-1) vanishes when d < r-1; such a node cannot host an r-clique anyway
    binom = max(math.comb(d, r - 1), 1)
    denom = r ** (2 * r) * 2 ** (r + 1) * binom * gamma * math.exp(2 * gamma)
    return 2 * alpha**2 * delta ** (r - 1) / denom


def log2_sample_bound(tau: float, delta: float, cap_L: float, r: int, n: int, w: float) -> float:
    """log2 of 60 * 2^(2L) / (tau^2 delta^(2L)) * (log 1/w + log(L+r) + (L+r) log 2n + 1)."""
    bracket = math.log2(1 / w) + math.log2(cap_L + r) + (cap_L + r) * math.log2(2 * n) + 1
    return (
        math.log2(60) + 2 * cap_L - 2 * math.log2(tau) - 2 * cap_L * math.log2(delta)
        + math.log2(bracket)
    )


def derived_constants(model: MrfModel, w: float = 0.1) -> DerivedConstants:
    gamma = gamma_of(model)
    tau = tau_from(model.alpha, gamma, model.r, model.degree)
    delta = 0.5 * math.exp(-2 * gamma)
    cap_L = 8 / tau**2
    return DerivedConstants(
        gamma=gamma,
        delta=delta,
        tau=tau,
        cap_L=cap_L,
        log2_sample_bound=log2_sample_bound(tau, delta, cap_L, model.r, model.n, w),
        w=w,
    )


def gamma_bound(beta: float, r: int, d: int) -> float:
    return beta * sum(math.comb(d, l - 1) for l in range(1, r + 1))


# -- serialization ---------------------------------------------------------

def model_to_dict(model: MrfModel) -> dict:
    return {
        "n": model.n,
        "r": model.r,
        "alpha": model.alpha,
        "beta": model.beta,
        "cliques": [
            {"vertices": [v + 1 for v in c.vertices], "entries": [float(e) for e in c.entries]}
            for c in model.cliques
        ],
    }


def model_from_dict(doc: dict) -> MrfModel:
    try:
        cliques = tuple(
            CliqueTensor(tuple(int(v) - 1 for v in c["vertices"]), np.array(c["entries"], dtype=float))
            for c in doc["cliques"]
        )
        return MrfModel(
            n=int(doc["n"]), r=int(doc["r"]), cliques=cliques,
            alpha=float(doc["alpha"]), beta=float(doc["beta"]),
        )
    except (KeyError, TypeError) as exc:
        raise StructuralError(f"malformed model document: {exc!r}") from exc


def dump_model(model: MrfModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")


def load_model(path: str | Path) -> MrfModel:
    return model_from_dict(json.loads(Path(path).read_text()))


# -- presets ---------------------------------------------------------------

FIGURE1_COUPLINGS = {
    (1, 2): 0.3, (1, 3): 0.35, (1, 5): 0.3, (2, 4): 0.3,
    (2, 5): 0.3, (3, 4): 0.35, (4, 5): 0.3,
}
FIGURE1_TRIPLES = {(1, 2, 5): 0.2, (2, 4, 5): 0.2}
FIGURE1_FIELDS = {1: 0.05, 2: -0.05, 3: 0.05, 4: 0.0, 5: 0.05}


def figure1_model(alpha: float = 0.3, beta: float = 1.0) -> MrfModel:
    """The 5-node, 3-wise example: hyperedges (1,2,5), (2,4,5), (1,3), (3,4).

    Weights are fixed Ising-style products (field * x, coupling * x_i x_j,
    triple * x_i x_j x_k); indices in the tables above are 1-based.
    """
    cliques = []
    for v, h in FIGURE1_FIELDS.items():
        cliques.append(CliqueTensor.from_function((v - 1,), lambda x, h=h: h * x))
    for (a, b), j in FIGURE1_COUPLINGS.items():
        cliques.append(CliqueTensor.from_function((a - 1, b - 1), lambda x, y, j=j: j * x * y))
    for (a, b, c), k in FIGURE1_TRIPLES.items():
        cliques.append(
            CliqueTensor.from_function((a - 1, b - 1, c - 1), lambda x, y, z, k=k: k * x * y * z)
        )
    return MrfModel(n=5, r=3, cliques=tuple(cliques), alpha=alpha, beta=beta)


def random_model(
    n: int,
    r: int,
    d: int,
    alpha: float,
    beta: float,
    density: float = 1.0,
    seed: int | None = None,
    max_tries: int = 2000,
) -> MrfModel:
    """Random bounded-degree r-wise model.

    Hyperedges of size 2..r are added while every node's degree stays <= d
    and no hyperedge contains another.  Each hyperedge gets a tensor with
    entries uniform on [-beta, -alpha] U [alpha, beta].  ``density`` scales
    how many hyperedges are attempted (1.0 ~ enough to saturate the degree
    bound on average).
    """
    if r < 2:
        raise StructuralError("r must be at least 2 for a random model")
    if d >= n:
        raise StructuralError(f"degree bound d={d} infeasible for n={n} (need d <= n-1)")
    if d < r - 1:
        raise StructuralError(f"degree bound d={d} cannot host an r={r} clique (need d >= r-1)")
    if not 0 < alpha <= beta:
        raise StructuralError(f"need 0 < alpha <= beta, got alpha={alpha}, beta={beta}")
    rng = np.random.default_rng(seed)
    nbrs = [set() for _ in range(n)]
    edges: list[frozenset] = []
    target = max(1, int(round(density * n * d / max(r - 1, 1) / 2)))
    tries = 0
    while len(edges) < target and tries < max_tries:
        tries += 1
        size = int(rng.integers(2, r + 1))
        h = frozenset(int(v) for v in rng.choice(n, size=size, replace=False))
        if any(h <= e or e <= h for e in edges):
            continue
        if any(len(nbrs[v] | (h - {v})) > d for v in h):
            continue
        edges.append(h)
        for v in h:
            nbrs[v] |= h - {v}
    cliques = []
    for h in sorted(edges, key=lambda e: tuple(sorted(e))):
        size = len(h)
        mags = rng.uniform(alpha, beta, size=1 << size)
        signs = rng.choice([-1.0, 1.0], size=1 << size)
        cliques.append(CliqueTensor(tuple(sorted(h)), mags * signs))
    return MrfModel(n=n, r=r, cliques=tuple(cliques), alpha=alpha, beta=beta)
