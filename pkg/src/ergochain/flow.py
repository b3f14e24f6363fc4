"""Infinite flow graph of a chain and the ergodicity pattern it predicts.

Pair flows ``W_ij(k) + W_ji(k)`` are accumulated over a finite horizon, both
in total and over dyadic windows ``[0, 1), [1, 2), [2, 4), ...``. Whether a
series diverges is decided analytically when the model carries a
:class:`~ergochain.schedules.DivergenceDescriptor`; otherwise an edge is
declared when the last two complete windows each carry more than
``threshold`` flow.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import schedules
from .errors import FlowMismatchWarning, InvalidPartition, NoClosedForm
from .rng import BLOCK_SIZE, step_rng
from .schedules import DivergenceDescriptor
from .stochastic import complement, index_set

DEFAULT_THRESHOLD = 0.1
DEFAULT_HORIZON = 2**14

EXPECTED = "expected"
SAMPLED = "sampled"


def window_index(k: int) -> int:
    """Dyadic window of step k: 0 for k = 0, else ``floor(log2 k) + 1``."""
    return int(k).bit_length()


def window_bounds(w: int) -> tuple[int, int]:
    if w == 0:
        return 0, 1
    return 2 ** (w - 1), 2**w


@dataclass
class FlowAccumulator:
    """Truncated pair-flow series of a chain.

    ``pair_sums[i, j]`` (symmetric, zero diagonal) is the sum over steps
    ``k < horizon`` of ``W_ij(k) + W_ji(k)``; ``window_sums[w]`` holds the same
    sum restricted to dyadic window ``w``.
    """

    m: int
    horizon: int = 0
    pair_sums: np.ndarray = None
    window_sums: list = field(default_factory=list)
    mode: str = EXPECTED
    seed: int | None = None

    def __post_init__(self):
        if self.pair_sums is None:
            self.pair_sums = np.zeros((self.m, self.m))

    def add(self, k: int, W) -> None:
        if k != self.horizon:
            raise ValueError(f"steps must be added in order; expected {self.horizon}, got {k}")
        W = np.asarray(W)
        F = W + W.T
        np.fill_diagonal(F, 0.0)
        self.pair_sums += F
        w = window_index(k)
        while len(self.window_sums) <= w:
            self.window_sums.append(np.zeros((self.m, self.m)))
        self.window_sums[w] += F
        self.horizon += 1

    def complete_windows(self) -> list[np.ndarray]:
        return [ws for w, ws in enumerate(self.window_sums) if window_bounds(w)[1] <= self.horizon]

    def to_json(self):
        return {
            "m": self.m,
            "horizon": self.horizon,
            "mode": self.mode,
            "seed": self.seed,
            "pair_sums": {f"{i + 1}-{j + 1}": float(self.pair_sums[i, j]) for i in range(self.m) for j in range(i + 1, self.m)},
        }


def accumulate_flows(model, horizon: int, mode: str = EXPECTED, seed: int | None = None, trial: int = 0) -> FlowAccumulator:
    """Pair-flow series of ``model`` over ``horizon`` steps.

    In ``expected`` mode the matrices are ``E[W(k)]`` (raises
    :class:`~ergochain.errors.NoClosedForm` if unavailable); in ``sampled``
    mode they follow one sample path, the one trial ``trial`` of ``seed`` sees
    in the simulator.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    acc = FlowAccumulator(model.m, mode=mode, seed=seed)
    if mode == EXPECTED:
        for k in range(horizon):
            acc.add(k, model.expected(k))
    elif mode == SAMPLED:
        if seed is None:
            raise ValueError("sampled mode needs a seed")
        block, row = divmod(trial, BLOCK_SIZE)
        for k in range(horizon):
            W = model.sample_batch(k, step_rng(seed, k, block), row + 1)[row]
            acc.add(k, W)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return acc


def cut_flow_series(acc: FlowAccumulator, S) -> float:
    s = list(index_set(S, acc.m))
    t = list(complement(s, acc.m))
    return float(acc.pair_sums[np.ix_(s, t)].sum())


@dataclass(frozen=True)
class InfiniteFlowGraph:
    m: int
    edges: frozenset
    provenance: tuple = ()

    def has_edge(self, i, j) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def to_json(self):
        prov = dict(self.provenance)
        adjacency = {str(i + 1): [] for i in range(self.m)}
        for i, j in sorted(self.edges):
            adjacency[str(i + 1)].append(j + 1)
            adjacency[str(j + 1)].append(i + 1)
        return {
            "m": self.m,
            "edges": [[i + 1, j + 1] for i, j in sorted(self.edges)],
            "adjacency": adjacency,
            "provenance": {f"{i + 1}-{j + 1}": prov[(i, j)] for i, j in sorted(prov)},
        }


def classify_edges(acc: FlowAccumulator, descriptor: DivergenceDescriptor | None = None,
                   threshold: float = DEFAULT_THRESHOLD) -> InfiniteFlowGraph:
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    windows = acc.complete_windows()
    edges = set()
    provenance = []
    for i in range(acc.m):
        for j in range(i + 1, acc.m):
            tag = descriptor.tag(i, j) if descriptor is not None else schedules.UNKNOWN
            if tag != schedules.UNKNOWN:
                provenance.append(((i, j), {"source": "analytic", "tag": tag}))
                if tag == schedules.DIVERGENT:
                    edges.add((i, j))
                continue
            growing = len(windows) >= 2 and all(ws[i, j] > threshold for ws in windows[-2:])
            provenance.append(((i, j), {
                "source": "empirical",
                "tag": schedules.DIVERGENT if growing else schedules.SUMMABLE,
                "horizon": acc.horizon,
                "threshold": threshold,
            }))
            if growing:
                edges.add((i, j))
    return InfiniteFlowGraph(acc.m, frozenset(edges), tuple(provenance))


@dataclass(frozen=True)
class ErgodicityPattern:
    """Partition of ``range(m)`` in canonical order (blocks sorted, ordered by
    their smallest member)."""

    m: int
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(sorted(tuple(sorted(b)) for b in self.blocks))
        flat = [i for b in blocks for i in b]
        if any(len(b) == 0 for b in blocks) or sorted(flat) != list(range(self.m)):
            raise InvalidPartition(f"{self.blocks} is not a partition of range({self.m})")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_labels(cls, labels):
        groups = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, []).append(i)
        return cls(len(labels), tuple(groups.values()))

    @classmethod
    def singletons(cls, m):
        return cls(m, tuple((i,) for i in range(m)))

    @property
    def tau(self) -> int:
        return len(self.blocks)

    def labels(self) -> list[int]:
        lab = [0] * self.m
        for r, b in enumerate(self.blocks):
            for i in b:
                lab[i] = r
        return lab

    def same_class(self, i, j) -> bool:
        lab = self.labels()
        return lab[i] == lab[j]

    def refines(self, other: "ErgodicityPattern") -> bool:
        """Every block of ``self`` lies inside one block of ``other``."""
        lab = other.labels()
        return all(len({lab[i] for i in b}) == 1 for b in self.blocks)

    def to_json(self):
        return [[i + 1 for i in b] for b in self.blocks]

    def __str__(self):
        return "{" + ", ".join("{" + ",".join(str(i + 1) for i in b) + "}" for b in self.blocks) + "}"


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1


def partition_from_pairs(m: int, pairs) -> ErgodicityPattern:
    uf = UnionFind(m)
    for i, j in pairs:
        uf.union(i, j)
    return ErgodicityPattern.from_labels([uf.find(i) for i in range(m)])


def connected_components(graph: InfiniteFlowGraph) -> ErgodicityPattern:
    return partition_from_pairs(graph.m, graph.edges)


def infinite_flow_graph(model, mode=EXPECTED, horizon=DEFAULT_HORIZON, threshold=DEFAULT_THRESHOLD,
                        seed=None, use_descriptor=True) -> InfiniteFlowGraph:
    acc = accumulate_flows(model, horizon, mode, seed)
    descriptor = model.descriptor() if use_descriptor else None
    return classify_edges(acc, descriptor, threshold)


def predict_ergodicity_pattern(model, mode=EXPECTED, horizon=DEFAULT_HORIZON, threshold=DEFAULT_THRESHOLD,
                               seed=None, cross_check=True) -> ErgodicityPattern:
    """Connected components of the infinite flow graph.

    With ``cross_check`` and a seed, the graph of one sample path is also
    built and a :class:`FlowMismatchWarning` is issued if the two patterns
    differ (they should agree for the models this library targets).
    """
    pattern = connected_components(infinite_flow_graph(model, mode, horizon, threshold, seed))
    other = SAMPLED if mode == EXPECTED else EXPECTED
    if cross_check and (seed is not None or other == EXPECTED):
        try:
            alt = connected_components(infinite_flow_graph(model, other, horizon, threshold, seed))
        except NoClosedForm:
            return pattern
        if alt != pattern:
            warnings.warn(
                f"{mode} flow pattern {pattern} differs from {other} pattern {alt}",
                FlowMismatchWarning,
                stacklevel=2,
            )
    return pattern
