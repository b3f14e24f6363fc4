"""Random chain models.

A model draws independent stochastic matrices ``W(k)``. Built-in models are
driven by a fixed number of uniforms per trial and step
(``n_uniforms``); :meth:`ChainModel.transform` maps a ``(n, n_uniforms)``
array of uniforms to ``n`` matrices at once. This keeps batched simulation
fast and lets wrappers (finite modifications, diagonal approximations,
link failures) reuse the exact randomness of the model they wrap.

Where the distribution of ``W(k)`` is known, models also expose
``expected(k)`` and ``row_second_moments(k)``; the latter is the tensor
``R[l, a, b] = E[W_la(k) W_lb(k)]`` from which both ``E[W^T W]`` and the
feedback quantities follow.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import schedules
from .errors import DegenerateSchedule, DimensionMismatch, NoClosedForm, NonBinaryFailureMatrix
from .schedules import DivergenceDescriptor, Rate
from .stochastic import _frozen, validate_stochastic

_SCHEDULE_TOL = 1e-12
_CACHE_STEPS = 1 << 16


def _eye_batch(n, m):
    return np.broadcast_to(np.eye(m), (n, m, m)).copy()


def _all_pairs(m):
    return [(i, j) for i in range(m) for j in range(i + 1, m)]


class ChainModel:
    """Interface shared by all models.

    Subclasses set ``kind``, ``m`` and ``n_uniforms`` and implement
    :meth:`transform`. Models with a finite outcome set only need
    :meth:`outcomes` for the closed-form expectations.
    """

    kind = "abstract"
    m: int
    n_uniforms: int | None = 0
    deterministic = False

    def transform(self, k: int, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample_batch(self, k: int, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.n_uniforms is None:
            return np.stack([np.asarray(self._draw(k, rng), dtype=float) for _ in range(n)])
        return self.transform(k, rng.random((n, self.n_uniforms)))

    def _draw(self, k, rng):
        raise NotImplementedError

    def sample(self, k: int, rng: np.random.Generator) -> np.ndarray:
        return _frozen(self.sample_batch(k, rng, 1)[0])

    def outcomes(self, k: int):
        """Finite support of ``W(k)`` as ``[(probability, matrix), ...]``."""
        raise NoClosedForm(f"model '{self.kind}' has no closed-form distribution")

    def expected(self, k: int) -> np.ndarray:
        return sum(p * W for p, W in self.outcomes(k))

    def row_second_moments(self, k: int) -> np.ndarray:
        return sum(p * np.einsum("la,lb->lab", W, W) for p, W in self.outcomes(k))

    def second_moment(self, k: int) -> np.ndarray:
        """``H(k) = E[W(k)^T W(k)]``"""
        return self.row_second_moments(k).sum(axis=0)

    @property
    def has_closed_form(self) -> bool:
        try:
            self.expected(0)
        except NoClosedForm:
            return False
        return True

    def pair_flow_terms(self):
        """Per pair, a list of rates asymptotically equivalent (up to constants)
        to ``E[W_ij(k) + W_ji(k)]``, or ``None`` when not known in closed form.

        Only the summability of these rates is meaningful.
        """
        return None

    def descriptor(self) -> DivergenceDescriptor | None:
        terms = self.pair_flow_terms()
        if terms is None:
            return None
        return DivergenceDescriptor.from_terms(self.m, terms)

    def describe(self) -> dict:
        return {"kind": self.kind, "m": self.m}


def expected_matrix(model: ChainModel, k: int) -> np.ndarray:
    return validate_stochastic(model.expected(k))


# ---------------------------------------------------------------- gossip


class EdgeClass:
    """Pairs sharing one activation schedule; ``rate=None`` marks the pairs
    that split whatever probability the other classes leave over."""

    def __init__(self, pairs, rate: Rate | None):
        self.pairs = tuple(sorted((min(i, j), max(i, j)) for i, j in pairs))
        for i, j in self.pairs:
            if i == j:
                raise ValueError(f"self-loop ({i}, {j}) in edge class")
        self.rate = rate

    def __repr__(self):
        return f"EdgeClass({len(self.pairs)} pairs, {self.rate})"


class GossipSchedule:
    """Link activation probabilities ``P(k)`` built from edge classes."""

    def __init__(self, m: int, classes: Sequence[EdgeClass]):
        self.m = m
        self.classes = tuple(classes)
        seen = set()
        for c in self.classes:
            for p in c.pairs:
                if p in seen:
                    raise ValueError(f"pair {p} appears in two edge classes")
                if p[1] >= m:
                    raise ValueError(f"pair {p} outside a model of size {m}")
                seen.add(p)
        self._remainder = [c for c in self.classes if c.rate is None]
        if len(self._remainder) > 1:
            raise ValueError("at most one remainder edge class is allowed")

    def __call__(self, k: int) -> np.ndarray:
        P = np.zeros((self.m, self.m))
        used = 0.0
        for c in self.classes:
            if c.rate is None:
                continue
            v = c.rate(k)
            for i, j in c.pairs:
                P[i, j] = v
            used += v * len(c.pairs)
        if self._remainder:
            rest = self._remainder[0].pairs
            left = 1.0 - used
            if left < -_SCHEDULE_TOL:
                raise DegenerateSchedule(f"explicit activation mass {used!r} exceeds 1 at step {k}")
            for i, j in rest:
                P[i, j] = max(left, 0.0) / len(rest)
        return P

    def pair_flow_terms(self):
        terms = {p: [] for p in _all_pairs(self.m)}
        explicit_limit = 0.0
        for c in self.classes:
            if c.rate is not None:
                explicit_limit += c.rate.limit() * len(c.pairs)
                for p in c.pairs:
                    terms[p] = [c.rate]
        for c in self._remainder:
            left = 1.0 - explicit_limit
            for p in c.pairs:
                terms[p] = [schedules.constant(left / len(c.pairs))] if left > _SCHEDULE_TOL else None
        return terms

    def describe(self):
        return [
            {"pairs": [[i + 1, j + 1] for i, j in c.pairs], "rate": "remainder" if c.rate is None else c.rate.describe()}
            for c in self.classes
        ]


def averaging_matrix(m: int, i: int, j: int) -> np.ndarray:
    """``I - (e_i - e_j)(e_i - e_j)^T / 2``"""
    W = np.eye(m)
    W[i, i] = W[j, j] = W[i, j] = W[j, i] = 0.5
    return W


class Gossip(ChainModel):
    """Pairwise averaging over one randomly activated link per step."""

    kind = "gossip"
    n_uniforms = 1

    def __init__(self, m: int, schedule: GossipSchedule | Callable[[int], np.ndarray]):
        if m < 2:
            raise ValueError("gossip needs at least two agents")
        self.m = m
        self.schedule = schedule
        self._support_cache = {}

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_support_cache"] = {}
        return state

    def activation(self, k: int) -> np.ndarray:
        P = np.triu(np.asarray(self.schedule(k), dtype=float), 1)
        if P.shape != (self.m, self.m):
            raise DimensionMismatch(f"schedule returned shape {P.shape}")
        if np.any(P < 0):
            raise DegenerateSchedule(f"negative activation probability at step {k}")
        total = P.sum()
        if abs(total - 1.0) > _SCHEDULE_TOL:
            raise DegenerateSchedule(f"activation probabilities sum to {total!r} at step {k}")
        return P

    def _support(self, k):
        hit = self._support_cache.get(k)
        if hit is not None:
            return hit
        P = self.activation(k)
        rows, cols = np.nonzero(P)
        out = (rows, cols, P[rows, cols], np.cumsum(P[rows, cols]))
        if len(self._support_cache) >= _CACHE_STEPS:
            self._support_cache.clear()
        self._support_cache[k] = out
        return out

    def transform(self, k, u):
        rows, cols, probs, cum = self._support(k)
        idx = np.searchsorted(cum, u[:, 0] * cum[-1], side="right")
        idx = np.minimum(idx, len(probs) - 1)
        i, j = rows[idx], cols[idx]
        n = u.shape[0]
        W = _eye_batch(n, self.m)
        ar = np.arange(n)
        W[ar, i, i] = 0.5
        W[ar, j, j] = 0.5
        W[ar, i, j] = 0.5
        W[ar, j, i] = 0.5
        return W

    def outcomes(self, k):
        rows, cols, probs, _ = self._support(k)
        return [(p, averaging_matrix(self.m, i, j)) for i, j, p in zip(rows, cols, probs)]

    def second_moment(self, k):
        # averaging matrices are symmetric and idempotent: W^T W = W
        return self.expected(k)

    def expected(self, k):
        P = self.activation(k)
        S = P + P.T
        # I - 1/2 sum P_ij (e_i - e_j)(e_i - e_j)^T
        return np.eye(self.m) - 0.5 * (np.diag(S.sum(axis=1)) - S)

    def pair_flow_terms(self):
        if isinstance(self.schedule, GossipSchedule):
            return self.schedule.pair_flow_terms()
        return None

    def describe(self):
        d = {"kind": self.kind, "m": self.m}
        if isinstance(self.schedule, GossipSchedule):
            d["edges"] = self.schedule.describe()
        return d


def gossip_sample(m, schedule, k, rng):
    return Gossip(m, schedule).sample(k, rng)


# ------------------------------------------------------- broadcast gossip


def ring_graph(m):
    A = np.zeros((m, m), dtype=bool)
    for i in range(m):
        A[i, (i + 1) % m] = A[(i + 1) % m, i] = True
    np.fill_diagonal(A, False)
    return A


def path_graph(m):
    A = np.zeros((m, m), dtype=bool)
    for i in range(m - 1):
        A[i, i + 1] = A[i + 1, i] = True
    return A


def complete_graph(m):
    A = np.ones((m, m), dtype=bool)
    np.fill_diagonal(A, False)
    return A


def graph_from_edges(m, edges):
    A = np.zeros((m, m), dtype=bool)
    for i, j in edges:
        if i == j:
            raise ValueError(f"self-loop at {i}")
        A[i, j] = A[j, i] = True
    return A


class BroadcastGossip(ChainModel):
    """One uniformly chosen agent broadcasts; its neighbours move toward it.

    ``topology`` is one adjacency matrix, a list of them used periodically, or a
    callable ``k -> adjacency``. ``mixing`` gives the step size at time k.
    """

    kind = "broadcast_gossip"
    n_uniforms = 1

    def __init__(self, m: int, topology, mixing: Rate | Callable[[int], float]):
        self.m = m
        if callable(topology):
            self._graphs = None
            self._topology = topology
        else:
            arr = np.asarray(topology, dtype=bool)
            if arr.ndim == 2:
                arr = arr[None]
            if arr.shape[1:] != (m, m):
                raise DimensionMismatch(f"topology shape {arr.shape[1:]} for m={m}")
            for A in arr:
                if np.any(np.diag(A)):
                    raise ValueError("broadcast topology has a self-loop")
                if not np.array_equal(A, A.T):
                    raise ValueError("broadcast topology must be undirected")
            self._graphs = arr
            self._topology = None
        self.mixing = mixing

    def graph(self, k: int) -> np.ndarray:
        if self._graphs is not None:
            return self._graphs[k % len(self._graphs)]
        A = np.asarray(self._topology(k), dtype=bool)
        if np.any(np.diag(A)):
            raise ValueError(f"topology at step {k} has a self-loop")
        return A

    def gamma(self, k: int) -> float:
        g = float(self.mixing(k))
        if not 0.0 < g <= 1.0:
            raise DegenerateSchedule(f"mixing parameter {g!r} at step {k} outside (0, 1]")
        return g

    def transform(self, k, u):
        A = self.graph(k).astype(float)
        g = self.gamma(k)
        n = u.shape[0]
        b = np.minimum((u[:, 0] * self.m).astype(np.intp), self.m - 1)
        mask = g * A[b]  # (n, m): step size for each receiving row
        W = _eye_batch(n, self.m)
        diag = np.arange(self.m)
        W[:, diag, diag] -= mask
        W[np.arange(n)[:, None], diag[None, :], b[:, None]] += mask
        return W

    def broadcast_matrix(self, k, i):
        u = np.array([[(i + 0.5) / self.m]])
        return self.transform(k, u)[0]

    def outcomes(self, k):
        return [(1.0 / self.m, self.broadcast_matrix(k, i)) for i in range(self.m)]

    def expected(self, k):
        A = self.graph(k).astype(float)
        L = np.diag(A.sum(axis=1)) - A
        return np.eye(self.m) - (self.gamma(k) / self.m) * L

    def pair_flow_terms(self):
        if self._graphs is None or not isinstance(self.mixing, Rate):
            return None
        present = self._graphs.any(axis=0)
        return {(i, j): ([self.mixing * (2.0 / self.m)] if present[i, j] else []) for i, j in _all_pairs(self.m)}

    def describe(self):
        d = {"kind": self.kind, "m": self.m}
        if isinstance(self.mixing, Rate):
            d["mixing"] = self.mixing.describe()
        if self._graphs is not None:
            d["topology"] = [
                [[i + 1, j + 1] for i, j in _all_pairs(self.m) if A[i, j]] for A in self._graphs
            ]
        return d


def broadcast_sample(m, topology, mixing, k, rng):
    return BroadcastGossip(m, topology, mixing).sample(k, rng)


# ------------------------------------------------------------ link failure


def link_failure_compose(W, F) -> np.ndarray:
    """``U = W * (ee^T - F) + diag((W * F) e)`` with ``*`` entrywise.

    Works on single matrices and on ``(n, m, m)`` batches.
    """
    W = np.asarray(W, dtype=float)
    F = np.asarray(F)
    if F.shape != W.shape:
        raise DimensionMismatch(f"failure pattern shape {F.shape} vs matrix shape {W.shape}")
    if not np.all((F == 0) | (F == 1)):
        raise NonBinaryFailureMatrix("failure matrix entries must be 0 or 1")
    F = F.astype(float)
    U = W * (1.0 - F)
    lost = (W * F).sum(axis=-1)
    m = W.shape[-1]
    diag = np.arange(m)
    U[..., diag, diag] += lost
    return U


def uniform_failure_sample(p_k: float, m: int, rng: np.random.Generator) -> np.ndarray:
    """Off-diagonal i.i.d. Bernoulli(p_k) failures, zero diagonal."""
    if not 0.0 <= p_k <= 1.0:
        raise ValueError(f"failure probability {p_k!r} outside [0, 1]")
    F = (rng.random((m, m)) < p_k).astype(np.int8)
    np.fill_diagonal(F, 0)
    return F


class LinkFailure(ChainModel):
    """A base model whose links fail independently with probability ``p_k``.

    Pass either ``failure`` (``k -> p_k``) or ``survival`` (``k -> 1 - p_k``).
    Giving the survival schedule as a :class:`Rate` lets the flow graph be
    classified exactly when failures become almost certain.
    """

    kind = "link_failure"

    def __init__(self, base: ChainModel, failure=None, survival=None):
        if (failure is None) == (survival is None):
            raise ValueError("give exactly one of failure or survival")
        self.base = base
        self.m = base.m
        self.failure = failure
        self.survival = survival
        self.n_uniforms = None if base.n_uniforms is None else base.n_uniforms + self.m * self.m
        self.deterministic = False

    def p(self, k: int) -> float:
        p = 1.0 - float(self.survival(k)) if self.survival is not None else float(self.failure(k))
        if not -1e-15 <= p <= 1.0 + 1e-15:
            raise DegenerateSchedule(f"failure probability {p!r} at step {k} outside [0, 1]")
        return min(max(p, 0.0), 1.0)

    def _failures(self, k, u):
        n = u.shape[0]
        F = (u.reshape(n, self.m, self.m) < self.p(k)).astype(np.int8)
        diag = np.arange(self.m)
        F[:, diag, diag] = 0
        return F

    def transform(self, k, u):
        nb = self.base.n_uniforms
        W = self.base.transform(k, u[:, :nb])
        return link_failure_compose(W, self._failures(k, u[:, nb:]))

    def sample_batch(self, k, rng, n):
        if self.n_uniforms is not None:
            return super().sample_batch(k, rng, n)
        W = self.base.sample_batch(k, rng, n)
        return link_failure_compose(W, self._failures(k, rng.random((n, self.m * self.m))))

    def expected(self, k):
        p = self.p(k)
        return p * np.eye(self.m) + (1.0 - p) * self.base.expected(k)

    def row_second_moments(self, k):
        p = self.p(k)
        q = 1.0 - p
        R = self.base.row_second_moments(k)
        m = self.m
        out = np.empty_like(R)
        for l in range(m):
            Rl = R[l]
            others = [s for s in range(m) if s != l]
            for a in range(m):
                for b in range(m):
                    if a != l and b != l:
                        out[l, a, b] = (q if a == b else q * q) * Rl[a, b]
                    elif a == l and b == l:
                        v = Rl[l, l]
                        v += 2 * p * sum(Rl[l, s] for s in others)
                        v += p * sum(Rl[s, s] for s in others)
                        v += p * p * sum(Rl[s, t] for s in others for t in others if s != t)
                        out[l, a, b] = v
                    else:
                        c = b if a == l else a  # the off-diagonal column
                        v = q * Rl[l, c] + p * q * sum(Rl[s, c] for s in others if s != c)
                        out[l, a, b] = v
        return out

    def _survival_terms(self):
        if isinstance(self.survival, Rate):
            return [self.survival]
        if isinstance(self.failure, Rate):
            if self.failure.kind == "constant":
                return [schedules.constant(1.0 - self.failure.c)]
            lim = self.failure.limit()
            if lim < 1.0:
                return [schedules.constant(1.0 - lim)]
        return None

    def pair_flow_terms(self):
        surv = self._survival_terms()
        base = self.base.pair_flow_terms()
        pairs = _all_pairs(self.m)
        if surv is not None and schedules.sum_tag(surv) == schedules.SUMMABLE:
            # pair flows are at most 2 * (1 - p_k)
            return {p: surv for p in pairs}
        if base is None:
            return None
        return {p: schedules.product_terms(surv, base[p]) for p in pairs}

    def describe(self):
        d = {"kind": self.kind, "m": self.m, "base": self.base.describe()}
        if isinstance(self.survival, Rate):
            d["survival"] = self.survival.describe()
        if isinstance(self.failure, Rate):
            d["failure"] = self.failure.describe()
        return d


# ------------------------------------------------------------ permutation


class Permutation(ChainModel):
    """Uniformly random permutation matrix each step (Fisher-Yates)."""

    kind = "permutation"

    def __init__(self, m: int):
        if m < 1:
            raise ValueError("m must be positive")
        self.m = m
        self.n_uniforms = max(m - 1, 0)

    def permutations(self, u):
        n = u.shape[0]
        perm = np.tile(np.arange(self.m), (n, 1))
        ar = np.arange(n)
        for step, i in enumerate(range(self.m - 1, 0, -1)):
            j = np.minimum((u[:, step] * (i + 1)).astype(np.intp), i)
            tmp = perm[ar, i].copy()
            perm[ar, i] = perm[ar, j]
            perm[ar, j] = tmp
        return perm

    def transform(self, k, u):
        perm = self.permutations(u)
        n = u.shape[0]
        W = np.zeros((n, self.m, self.m))
        W[np.arange(n)[:, None], np.arange(self.m)[None, :], perm] = 1.0
        return W

    def expected(self, k):
        return np.full((self.m, self.m), 1.0 / self.m)

    def row_second_moments(self, k):
        R = np.zeros((self.m, self.m, self.m))
        for l in range(self.m):
            R[l] = np.eye(self.m) / self.m
        return R

    def pair_flow_terms(self):
        return {p: [schedules.constant(2.0 / self.m)] for p in _all_pairs(self.m)}


def permutation_sample(m, rng):
    return Permutation(m).sample(0, rng)


# ------------------------------------------------------------ simplex row


class SimplexRow(ChainModel):
    """3x3 chain with absorbing rows 1 and 3 and a uniform simplex middle row."""

    kind = "simplex_row"
    n_uniforms = 2
    m = 3

    def transform(self, k, u):
        s = np.sort(u, axis=1)
        row = np.stack([s[:, 0], s[:, 1] - s[:, 0], 1.0 - s[:, 1]], axis=1)
        W = np.zeros((u.shape[0], 3, 3))
        W[:, 0, 0] = 1.0
        W[:, 2, 2] = 1.0
        W[:, 1, :] = row
        return W

    def expected(self, k):
        return np.array([[1.0, 0, 0], [1 / 3, 1 / 3, 1 / 3], [0, 0, 1.0]])

    def row_second_moments(self, k):
        R = np.zeros((3, 3, 3))
        R[0, 0, 0] = 1.0
        R[2, 2, 2] = 1.0
        # flat Dirichlet on the 2-simplex: E[u_a^2] = 1/6, E[u_a u_b] = 1/12
        R[1] = np.full((3, 3), 1 / 12) + np.eye(3) * (1 / 6 - 1 / 12)
        return R

    def pair_flow_terms(self):
        third = [schedules.constant(1 / 3)]
        return {(0, 1): third, (1, 2): third, (0, 2): []}


def simplex_row_sample(rng):
    return SimplexRow().sample(0, rng)


# ----------------------------------------------------- deterministic chains


class DeterministicChain(ChainModel):
    deterministic = True
    n_uniforms = 0

    def matrix(self, k: int) -> np.ndarray:
        raise NotImplementedError

    def transform(self, k, u):
        return np.broadcast_to(self.matrix(k), (u.shape[0], self.m, self.m)).copy()

    def outcomes(self, k):
        return [(1.0, self.matrix(k))]


class HarmonicPair(DeterministicChain):
    """2x2 doubly stochastic chain with off-diagonal weight ``1/(k+2)``."""

    kind = "harmonic_pair"
    m = 2

    def matrix(self, k):
        if k < 0:
            raise ValueError("step must be nonnegative")
        a = 1.0 / (k + 2)
        return np.array([[1.0 - a, a], [a, 1.0 - a]])

    def pair_flow_terms(self):
        # 2/(k+2) has the same summability as 2/(k+1)
        return {(0, 1): [schedules.power(2.0, 1.0)]}


def harmonic_pair_matrix(k: int) -> np.ndarray:
    return _frozen(HarmonicPair().matrix(k))


class DeterministicSequence(DeterministicChain):
    """Fixed matrices repeated periodically, or any ``k -> matrix`` callable."""

    kind = "deterministic_sequence"

    def __init__(self, matrices):
        if callable(matrices):
            self._fn = matrices
            self._mats = None
            self.m = np.asarray(matrices(0)).shape[0]
        else:
            mats = [validate_stochastic(M) for M in matrices]
            if not mats:
                raise ValueError("need at least one matrix")
            self.m = mats[0].shape[0]
            if any(M.shape != (self.m, self.m) for M in mats):
                raise DimensionMismatch("matrices in a sequence must share one size")
            self._mats = mats
            self._fn = None

    @classmethod
    def identity(cls, m):
        return cls([np.eye(m)])

    def matrix(self, k):
        if self._mats is not None:
            return self._mats[k % len(self._mats)]
        return np.asarray(self._fn(k), dtype=float)

    def pair_flow_terms(self):
        if self._mats is None:
            return None
        flows = np.mean([M + M.T for M in self._mats], axis=0)
        return {(i, j): ([schedules.constant(flows[i, j])] if flows[i, j] > 0 else []) for i, j in _all_pairs(self.m)}

    def describe(self):
        d = {"kind": self.kind, "m": self.m}
        if self._mats is not None:
            d["matrices"] = [M.tolist() for M in self._mats]
        return d


class IdentityPrefix(ChainModel):
    """``base`` with its first ``steps`` matrices replaced by the identity.

    Consumes the same uniforms as ``base`` so later steps match it exactly
    under a shared seed.
    """

    kind = "identity_prefix"

    def __init__(self, base: ChainModel, steps: int):
        if steps < 0:
            raise ValueError("steps must be nonnegative")
        self.base = base
        self.steps = steps
        self.m = base.m
        self.n_uniforms = base.n_uniforms
        self.deterministic = base.deterministic

    def transform(self, k, u):
        if k < self.steps:
            return _eye_batch(u.shape[0], self.m)
        return self.base.transform(k, u)

    def sample_batch(self, k, rng, n):
        if k < self.steps:
            return _eye_batch(n, self.m)
        return self.base.sample_batch(k, rng, n)

    def expected(self, k):
        return np.eye(self.m) if k < self.steps else self.base.expected(k)

    def row_second_moments(self, k):
        if k < self.steps:
            R = np.zeros((self.m, self.m, self.m))
            for l in range(self.m):
                R[l, l, l] = 1.0
            return R
        return self.base.row_second_moments(k)

    def outcomes(self, k):
        return [(1.0, np.eye(self.m))] if k < self.steps else self.base.outcomes(k)

    def pair_flow_terms(self):
        return self.base.pair_flow_terms()

    def describe(self):
        return {"kind": self.kind, "steps": self.steps, "base": self.base.describe()}


class CustomModel(ChainModel):
    """User-supplied sampler ``(k, rng) -> matrix`` with optional expectation."""

    kind = "custom"
    n_uniforms = None

    def __init__(self, m: int, sampler, expected=None, name="custom"):
        self.m = m
        self._sampler = sampler
        self._expected = expected
        self.kind = name

    def _draw(self, k, rng):
        return self._sampler(k, rng)

    def expected(self, k):
        if self._expected is None:
            raise NoClosedForm(f"model '{self.kind}' has no expected matrix")
        return np.asarray(self._expected(k), dtype=float)

    def row_second_moments(self, k):
        raise NoClosedForm(f"model '{self.kind}' has no closed-form second moments")


def identity_chain(m: int) -> DeterministicSequence:
    return DeterministicSequence.identity(m)
