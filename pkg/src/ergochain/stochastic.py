"""Row-stochastic matrices and the flow functionals built on them.

Matrices are plain ``numpy`` arrays. Everything returned by
:func:`validate_stochastic` is marked read-only so it can be shared freely.
Indices are 0-based in this API; scenario files and reports use 1-based
indices.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import (
    DimensionMismatch,
    EqualIndices,
    NegativeEntry,
    NonFiniteEntry,
    NonSquare,
    RowSumViolation,
    TrivialCut,
)

DEFAULT_TOLERANCE = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def validate_stochastic(entries, tolerance: float = DEFAULT_TOLERANCE) -> np.ndarray:
    """Check ``entries`` is row-stochastic and return a normalized copy.

    Entries in ``[-tolerance, 0)`` are clipped to zero and each row is divided
    by its sum, provided the raw sum lies within ``tolerance`` of one. Anything
    further off is an error rather than something to repair.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    a = np.array(entries, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise NonSquare(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteEntry("matrix has non-finite entries")
    if np.any(a < -tolerance):
        i, j = np.argwhere(a < -tolerance)[0]
        raise NegativeEntry(f"entry ({i}, {j}) = {a[i, j]!r} is negative")
    a[a < 0] = 0.0
    sums = a.sum(axis=1)
    bad = np.abs(sums - 1.0) > tolerance
    if np.any(bad):
        i = int(np.argmax(bad))
        raise RowSumViolation(f"row {i} sums to {sums[i]!r}")
    a /= sums[:, None]
    return _frozen(a)


def is_stochastic(a, tolerance: float = DEFAULT_TOLERANCE) -> bool:
    a = np.asarray(a)
    return bool(
        a.ndim == 2
        and a.shape[0] == a.shape[1]
        and np.all(a >= -tolerance)
        and np.allclose(a.sum(axis=1), 1.0, rtol=0, atol=tolerance)
    )


def is_doubly_stochastic(a, tolerance: float = DEFAULT_TOLERANCE) -> bool:
    a = np.asarray(a)
    return is_stochastic(a, tolerance) and is_stochastic(a.T, tolerance)


def index_set(members: Iterable[int], m: int) -> tuple[int, ...]:
    """Validate a nontrivial cut ``S`` of ``range(m)``; returns it sorted."""
    s = tuple(sorted(set(int(i) for i in members)))
    if not s or len(s) >= m:
        raise TrivialCut(f"cut {s} is empty or the whole index set of size {m}")
    if s[0] < 0 or s[-1] >= m:
        raise TrivialCut(f"cut {s} has indices outside [0, {m})")
    return s


def complement(s: Iterable[int], m: int) -> tuple[int, ...]:
    inside = set(s)
    return tuple(i for i in range(m) if i not in inside)


def cut_flow(M, S) -> float:
    """Total weight crossing the cut, sum over i in S, j outside of M_ij + M_ji."""
    M = np.asarray(M)
    m = M.shape[0]
    s = list(index_set(S, m))
    t = list(complement(s, m))
    return float(M[np.ix_(s, t)].sum() + M[np.ix_(t, s)].sum())


def pair_flow(M, i: int, j: int) -> float:
    if i == j:
        raise EqualIndices(f"pair flow needs distinct indices, got ({i}, {j})")
    M = np.asarray(M)
    m = M.shape[0]
    if not (0 <= i < m and 0 <= j < m):
        raise IndexError(f"indices ({i}, {j}) outside [0, {m})")
    return float(M[i, j] + M[j, i])


def apply(M, x) -> np.ndarray:
    """One step of the dynamics, ``x -> M @ x``."""
    M = np.asarray(M)
    x = np.asarray(x, dtype=float)
    if x.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"vector of length {x.shape[0]} for a {M.shape[0]}x{M.shape[1]} matrix")
    return M @ x


def l1_matrix_distance(A, B) -> float:
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise DimensionMismatch(f"shapes {A.shape} and {B.shape} differ")
    return float(np.abs(A - B).sum())


def spread(x) -> float:
    x = np.asarray(x)
    return float(x.max() - x.min())
