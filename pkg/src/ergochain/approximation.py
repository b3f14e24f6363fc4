"""Perturbations of chains that keep ergodicity classes intact.

The constructions here act on single matrices (cut-zero approximation,
diagonal approximation, mixing perturbation) and on whole chains
(:class:`DiagonalApproximation`, :func:`l1_chain_distance`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import schedules
from .errors import DimensionMismatch, InvalidPartition, NoClosedForm, NotBlockDiagonal
from .flow import EXPECTED, SAMPLED, ErgodicityPattern, window_bounds, window_index
from .models import ChainModel, DeterministicSequence, IdentityPrefix, _all_pairs
from .rng import step_rng
from .stochastic import complement, index_set

L1_CLOSE = "l1_close"
DIVERGING = "diverging"
UNKNOWN = "unknown"


def cut_zero_approximation(A, S) -> np.ndarray:
    """Zero the weights crossing the cut ``(S, complement)`` and move them onto
    the diagonal."""
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    s = index_set(S, m)
    return _fold(A, ErgodicityPattern(m, (s, complement(s, m))))


def _check_pattern(pattern, m):
    if not isinstance(pattern, ErgodicityPattern):
        pattern = ErgodicityPattern(m, tuple(tuple(b) for b in pattern))
    if pattern.m != m:
        raise InvalidPartition(f"pattern over {pattern.m} indices for a {m}x{m} matrix")
    return pattern


def _fold(W, pattern):
    """Block-diagonal part of ``W`` (works on batches) with the removed mass
    added to the diagonal."""
    lab = np.asarray(pattern.labels())
    same = lab[:, None] == lab[None, :]
    out = np.where(same, W, 0.0)
    lost = np.where(same, 0.0, W).sum(axis=-1)
    diag = np.arange(W.shape[-1])
    out[..., diag, diag] += lost
    return out


def diagonal_approximation(W, pattern) -> np.ndarray:
    """Keep only within-block weights of ``W``; each row's cross-block mass
    goes to its diagonal entry. Indices stay in their original order."""
    W = np.asarray(W, dtype=float)
    return _fold(W, _check_pattern(pattern, W.shape[-1]))


def block_permutation(pattern: ErgodicityPattern) -> list[int]:
    """Index order that lists block 1 first, then block 2, ... ; applying it to
    rows and columns of a diagonal approximation makes it block diagonal."""
    return [i for b in pattern.blocks for i in b]


def blocks_of(W, pattern) -> list[np.ndarray]:
    W = np.asarray(W)
    return [W[np.ix_(b, b)] for b in _check_pattern(pattern, W.shape[0]).blocks]


@dataclass(frozen=True)
class MixingSchedule:
    """``d(k)`` in ``[0, 1/2]`` and the step ``switch_on`` before which the
    perturbed chain is the identity."""

    d: Callable[[int], float]
    switch_on: int = 0


def mixing_perturbation(Wtilde, pattern, schedule: MixingSchedule, k: int) -> np.ndarray:
    """Blend each diagonal block with the uniform averaging matrix of its size.

    Block ``r`` becomes ``(1 - d(k)) W_r + d(k)/m_r * ones``; before
    ``schedule.switch_on`` the result is the identity.
    """
    Wtilde = np.asarray(Wtilde, dtype=float)
    m = Wtilde.shape[0]
    pattern = _check_pattern(pattern, m)
    lab = np.asarray(pattern.labels())
    if np.any(Wtilde[lab[:, None] != lab[None, :]] != 0):
        raise NotBlockDiagonal("matrix has weight between blocks of the pattern")
    if k < schedule.switch_on:
        return np.eye(m)
    d = float(schedule.d(k))
    if not 0.0 <= d <= 0.5:
        raise ValueError(f"mixing weight d({k}) = {d!r} outside [0, 1/2]")
    U = (1.0 - d) * Wtilde
    for b in pattern.blocks:
        U[np.ix_(b, b)] += d / len(b)
    return U


class DiagonalApproximation(ChainModel):
    """Chain of diagonal approximations of ``base`` w.r.t. a fixed pattern.

    Uses the same uniforms as ``base``, so a shared seed gives matched paths.
    """

    kind = "diagonal_approximation"

    def __init__(self, base: ChainModel, pattern: ErgodicityPattern):
        self.base = base
        self.m = base.m
        self.pattern = _check_pattern(pattern, base.m)
        self.n_uniforms = base.n_uniforms
        self.deterministic = base.deterministic
        lab = np.asarray(self.pattern.labels())
        # row l of the folded matrix is T_l applied to row l of W
        self._maps = np.zeros((self.m, self.m, self.m))
        for l in range(self.m):
            for c in range(self.m):
                a = c if lab[c] == lab[l] else l
                self._maps[l, a, c] = 1.0

    def transform(self, k, u):
        return _fold(self.base.transform(k, u), self.pattern)

    def sample_batch(self, k, rng, n):
        return _fold(self.base.sample_batch(k, rng, n), self.pattern)

    def outcomes(self, k):
        return [(p, _fold(W, self.pattern)) for p, W in self.base.outcomes(k)]

    def expected(self, k):
        return _fold(self.base.expected(k), self.pattern)

    def row_second_moments(self, k):
        R = self.base.row_second_moments(k)
        return np.einsum("lac,lcd,lbd->lab", self._maps, R, self._maps)

    def pair_flow_terms(self):
        terms = self.base.pair_flow_terms()
        if terms is None:
            return None
        lab = self.pattern.labels()
        return {(i, j): (terms[(i, j)] if lab[i] == lab[j] else []) for i, j in _all_pairs(self.m)}

    def describe(self):
        return {"kind": self.kind, "pattern": self.pattern.to_json(), "base": self.base.describe()}


@dataclass
class ChainDistanceReport:
    horizon: int
    per_entry_partial_sums: np.ndarray
    window_sums: list
    verdict: str
    provenance: str

    @property
    def total(self) -> float:
        return float(self.per_entry_partial_sums.sum())

    def complete_windows(self):
        return [ws for w, ws in enumerate(self.window_sums) if window_bounds(w)[1] <= self.horizon]

    def to_json(self):
        return {
            "horizon": self.horizon,
            "total": self.total,
            "per_entry_partial_sums": self.per_entry_partial_sums.tolist(),
            "last_complete_windows": [float(w.sum()) for w in self.complete_windows()[-2:]],
            "verdict": self.verdict,
            "provenance": self.provenance,
        }


def _is_identity_chain(model):
    if isinstance(model, DeterministicSequence) and model._mats is not None:
        return all(np.array_equal(M, np.eye(model.m)) for M in model._mats)
    return False


def _strip_prefix(model):
    while isinstance(model, IdentityPrefix):
        model = model.base
    return model


def _relation_verdict(A: ChainModel, B: ChainModel):
    """Exact verdict for pairs of chains whose difference has a known form."""
    if A is B or _strip_prefix(A) is _strip_prefix(B):
        return L1_CLOSE
    for X, Y in ((A, B), (B, A)):
        if isinstance(X, DiagonalApproximation) and _strip_prefix(X.base) is _strip_prefix(Y):
            # entrywise change is twice the cross-block mass
            terms = Y.pair_flow_terms()
            if terms is None:
                return None
            lab = X.pattern.labels()
            cross = [t for (i, j), ts in terms.items() if lab[i] != lab[j] for t in (ts or [])]
            if any(terms[(i, j)] is None for i, j in terms if lab[i] != lab[j]):
                return None
            return DIVERGING if schedules.sum_tag(cross) == schedules.DIVERGENT else L1_CLOSE
        if _is_identity_chain(X):
            # |W - I| sums to twice the off-diagonal mass
            terms = Y.pair_flow_terms()
            if terms is None or any(ts is None for ts in terms.values()):
                return None
            flat = [t for ts in terms.values() for t in ts]
            return DIVERGING if schedules.sum_tag(flat) == schedules.DIVERGENT else L1_CLOSE
    return None


def l1_chain_distance(A: ChainModel, B: ChainModel, horizon: int, mode: str = EXPECTED,
                      seed: int | None = None, threshold: float = 0.1) -> ChainDistanceReport:
    """Truncated series ``sum_k |A_ij(k) - B_ij(k)|`` per entry.

    In ``sampled`` mode both chains are driven by the same stream (matched
    randomness); in ``expected`` mode their expected matrices are compared.
    """
    if A.m != B.m:
        raise DimensionMismatch(f"chains of size {A.m} and {B.m}")
    m = A.m
    sums = np.zeros((m, m))
    windows = []
    for k in range(horizon):
        if mode == EXPECTED:
            D = np.abs(A.expected(k) - B.expected(k))
        elif mode == SAMPLED:
            if seed is None:
                raise ValueError("sampled mode needs a seed")
            D = np.abs(A.sample_batch(k, step_rng(seed, k), 1)[0] - B.sample_batch(k, step_rng(seed, k), 1)[0])
        else:
            raise ValueError(f"unknown mode {mode!r}")
        sums += D
        w = window_index(k)
        while len(windows) <= w:
            windows.append(np.zeros((m, m)))
        windows[w] += D
    verdict = _relation_verdict(A, B)
    if verdict is not None:
        provenance = "analytic"
    else:
        provenance = "empirical"
        done = [ws for w, ws in enumerate(windows) if window_bounds(w)[1] <= horizon]
        if len(done) < 2:
            verdict = UNKNOWN
        elif all(ws.sum() > threshold for ws in done[-2:]):
            verdict = DIVERGING
        elif done[-1].sum() <= threshold:
            verdict = L1_CLOSE
        else:
            verdict = UNKNOWN
    return ChainDistanceReport(horizon, sums, windows, verdict, provenance)


def lp_entry_series(A: ChainModel, B: ChainModel, horizon: int, p: float) -> np.ndarray:
    """``sum_k |A_ij(k) - B_ij(k)|**p`` per entry for deterministic chains."""
    if not (A.deterministic and B.deterministic):
        raise ValueError("lp series are only defined here for deterministic chains")
    out = np.zeros((A.m, A.m))
    for k in range(horizon):
        out += np.abs(A.expected(k) - B.expected(k)) ** p
    return out


def max_deviation(model: ChainModel, pattern, k: int, samples: int, seed: int) -> float:
    """Monte Carlo estimate of ``E[max_ij |W~_ij(k) - W_ij(k)|]``."""
    W = model.sample_batch(k, step_rng(seed, k, 0, purpose=1), samples)
    D = np.abs(_fold(W, _check_pattern(pattern, model.m)) - W)
    return float(D.max(axis=(1, 2)).mean())


def proof_mixing_schedule(model: ChainModel, pattern, pi_min: float, horizon: int,
                          samples: int = 256, seed: int = 0) -> MixingSchedule:
    """Mixing schedule ``d(k) = min(1/2, 4 m^2 / pi_min * M(k))`` with ``M(k)``
    the measured expected max deviation of the diagonal approximation.

    ``switch_on`` is the first step after which ``M(k) <= pi_min / (8 m^2)``
    for every measured step below ``horizon``. Test construction only.
    """
    m = model.m
    try:
        M = np.array([
            np.abs(_fold(model.expected(k), _check_pattern(pattern, m)) - model.expected(k)).max()
            if model.deterministic else max_deviation(model, pattern, k, samples, seed)
            for k in range(horizon)
        ])
    except NoClosedForm:
        M = np.array([max_deviation(model, pattern, k, samples, seed) for k in range(horizon)])
    bound = pi_min / (8 * m * m)
    bad = np.nonzero(M > bound)[0]
    switch_on = int(bad[-1]) + 1 if len(bad) else 0
    scale = 4 * m * m / pi_min

    def d(k):
        return min(0.5, scale * M[k]) if k < horizon else 0.0

    return MixingSchedule(d, switch_on)
