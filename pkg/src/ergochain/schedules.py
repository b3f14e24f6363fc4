"""Closed-form time schedules ``k -> c * (k+1)**(-a) * r**k``.

``constant(c)``, ``power(c, a)`` and ``geometric(c, r)`` are the three named
forms used in scenario files. All of them are :class:`Rate` instances, which
are closed under multiplication, so the summability of a product of schedules
(e.g. a failure survival probability times a gossip activation probability)
can be decided exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DIVERGENT = "divergent"
SUMMABLE = "summable"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class Rate:
    c: float
    a: float = 0.0
    r: float = 1.0

    def __post_init__(self):
        if self.c < 0 or self.r < 0:
            raise ValueError(f"rate parameters must be nonnegative: {self}")

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        with np.errstate(under="ignore"):
            out = self.c * np.power(k + 1.0, -self.a) * np.power(self.r, k)
        return float(out) if out.ndim == 0 else out

    def __mul__(self, other):
        if isinstance(other, Rate):
            return Rate(self.c * other.c, self.a + other.a, self.r * other.r)
        return Rate(self.c * float(other), self.a, self.r)

    __rmul__ = __mul__

    @property
    def kind(self) -> str:
        if self.r != 1.0:
            return "geometric" if self.a == 0 else "mixed"
        return "constant" if self.a == 0 else "power"

    def limit(self) -> float:
        """Value of the schedule as ``k -> infinity``."""
        if self.c == 0:
            return 0.0
        if self.r < 1 or (self.r == 1 and self.a > 0):
            return 0.0
        if self.r == 1 and self.a == 0:
            return self.c
        if self.r == 1:  # a < 0
            return float("inf")
        return float("inf")

    def series_tag(self) -> str:
        """Whether the series of the schedule over k >= 0 diverges."""
        if self.c == 0 or self.r < 1:
            return SUMMABLE
        if self.r > 1:
            return DIVERGENT
        return DIVERGENT if self.a <= 1 else SUMMABLE

    def describe(self) -> dict:
        if self.kind == "constant":
            return {"constant": self.c}
        if self.kind == "power":
            return {"power": {"c": self.c, "a": self.a}}
        if self.kind == "geometric":
            return {"geometric": {"c": self.c, "r": self.r}}
        return {"mixed": {"c": self.c, "a": self.a, "r": self.r}}


def constant(c: float) -> Rate:
    return Rate(float(c))


def power(c: float, a: float) -> Rate:
    """``c * (k+1)**(-a)``"""
    return Rate(float(c), float(a))


def geometric(c: float, r: float) -> Rate:
    """``c * r**k``"""
    return Rate(float(c), 0.0, float(r))


def sum_tag(terms) -> str:
    """Series tag of a finite sum of nonnegative rates (``None`` = unknown)."""
    if terms is None:
        return UNKNOWN
    tags = [t.series_tag() for t in terms]
    if DIVERGENT in tags:
        return DIVERGENT
    return SUMMABLE


def product_terms(left, right):
    """Distribute a product of two sums of rates."""
    if left is None or right is None:
        return None
    return [a * b for a in left for b in right]


@dataclass(frozen=True)
class DivergenceDescriptor:
    """Per-pair analytic verdict on whether ``sum_k E[W_ij(k) + W_ji(k)]``
    diverges. Pairs are 0-based with ``i < j``; missing pairs are unknown."""

    m: int
    tags: tuple = ()

    @classmethod
    def from_terms(cls, m, terms_by_pair):
        tags = []
        for (i, j), terms in sorted(terms_by_pair.items()):
            tags.append(((i, j), sum_tag(terms)))
        return cls(m, tuple(tags))

    def tag(self, i, j) -> str:
        if i > j:
            i, j = j, i
        return dict(self.tags).get((i, j), UNKNOWN)

    def is_complete(self) -> bool:
        known = {p for p, t in self.tags if t != UNKNOWN}
        return len(known) == self.m * (self.m - 1) // 2
