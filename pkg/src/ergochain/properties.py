"""Checks for the hypotheses of the ergodicity results.

Common steady state in expectation, (weak) feedback coefficients and the M2
diagnostic series. Coefficients are reported as the smallest observed ratio
over the checked steps rather than as booleans.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import DimensionMismatch, NoClosedForm
from .flow import window_bounds, window_index
from .rng import ESTIMATOR, block_ranges, step_rng

NULLSPACE_TOL = 1e-10
_ZERO = 1e-15

CLOSED_FORM = "closed_form"
MONTE_CARLO = "monte_carlo"


# ------------------------------------------------------------ steady state


@dataclass
class SteadyStateReport:
    pi: np.ndarray | None
    residuals: np.ndarray
    steps: tuple

    @property
    def pi_min(self) -> float | None:
        return None if self.pi is None else float(self.pi.min())

    @property
    def positive(self) -> bool:
        return self.pi is not None and self.pi_min > _ZERO

    def to_json(self):
        return {
            "pi": None if self.pi is None else self.pi.tolist(),
            "positive": self.positive,
            "pi_min": self.pi_min,
            "max_residual": float(self.residuals.max()) if len(self.residuals) else 0.0,
            "steps": list(self.steps),
        }


def _nullspace(A, tol=NULLSPACE_TOL):
    _, s, vt = np.linalg.svd(A)
    scale = max(1.0, s[0]) if len(s) else 1.0
    rank = int(np.sum(s > tol * scale))
    return vt[rank:].T


def find_common_steady_state(model, steps) -> SteadyStateReport:
    """Stochastic vector ``pi`` with ``pi^T E[W(k)] = pi^T`` for all ``k`` in
    ``steps``, if one exists.

    When the common fixed space has dimension above one, the returned vector
    maximises its smallest entry, so ``positive`` is false only when no
    positive common steady state exists.
    """
    steps = tuple(steps)
    if not steps:
        raise ValueError("need at least one step")
    m = model.m
    Es = [np.asarray(model.expected(k), dtype=float) for k in steps]
    A = np.vstack([E.T - np.eye(m) for E in Es])
    N = _nullspace(A)
    pi = None
    if N.shape[1] == 1:
        v = N[:, 0]
        v = v / v.sum() if abs(v.sum()) > _ZERO else v
        if np.all(v >= -NULLSPACE_TOL):
            pi = np.clip(v, 0.0, None)
            pi /= pi.sum()
    elif N.shape[1] > 1:
        # maximise t subject to N c >= t, e^T N c = 1
        d = N.shape[1]
        cost = np.zeros(d + 1)
        cost[-1] = -1.0
        A_ub = np.hstack([-N, np.ones((m, 1))])
        A_eq = np.append(N.sum(axis=0), 0.0)[None, :]
        res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(m), A_eq=A_eq, b_eq=[1.0],
                      bounds=[(None, None)] * (d + 1), method="highs")
        if res.status == 0 and res.x[-1] >= -NULLSPACE_TOL:
            pi = np.clip(N @ res.x[:-1], 0.0, None)
            pi /= pi.sum()
    if pi is None:
        residuals = np.full(len(steps), np.nan)
    else:
        residuals = np.array([np.abs(pi @ E - pi).sum() for E in Es])
    return SteadyStateReport(pi, residuals, steps)


# ---------------------------------------------------------------- feedback


@dataclass
class FeedbackReport:
    """Smallest ratio ``left / right`` over the checked ``(k, i, j)``.

    ``gamma`` is ``inf`` with status ``vacuous`` when every right side is
    zero, and ``0`` with witnesses when some left side is zero while its
    right side is positive.
    """

    property: str
    gamma: float
    status: str
    witnesses: list
    argmin: tuple | None
    vacuous: int
    estimator: str
    samples: int = 0
    standard_error: float | None = None
    left_standard_errors: np.ndarray | None = field(default=None, repr=False)

    @property
    def gamma_weak(self):
        return self.gamma if self.property == "weak" else None

    @property
    def gamma_strong(self):
        return self.gamma if self.property == "strong" else None

    def to_json(self):
        return {
            "property": self.property,
            "gamma": "vacuous" if math.isinf(self.gamma) else self.gamma,
            "status": self.status,
            "witnesses": [[k, i + 1, j + 1] for k, i, j in self.witnesses[:10]],
            "witness_count": len(self.witnesses),
            "argmin": None if self.argmin is None else [self.argmin[0], self.argmin[1] + 1, self.argmin[2] + 1],
            "vacuous_pairs": self.vacuous,
            "estimator": self.estimator,
            "samples": self.samples,
            "standard_error": self.standard_error,
        }


def _left_sides(R, prop):
    if prop == "weak":
        return R.sum(axis=0)  # E[W^T W]_ij = E[W^i^T W^j]
    m = R.shape[0]
    d = np.arange(m)
    D = R[d, d, :]  # D[i, j] = E[W_ii W_ij]
    return D + D.T


def _sample_moments(model, k, n, seed):
    W = model.sample_batch(k, step_rng(seed, k, 0, purpose=ESTIMATOR), n)
    R_samples = np.einsum("nla,nlb->nlab", W, W)
    return W, R_samples


def _feedback(model, steps, estimator, prop, samples, seed):
    steps = tuple(steps)
    if not steps:
        raise ValueError("need at least one step")
    if estimator not in (CLOSED_FORM, MONTE_CARLO):
        raise ValueError(f"unknown estimator {estimator!r}")
    if estimator == MONTE_CARLO and samples < 2:
        raise ValueError("monte carlo estimation needs at least two samples")
    m = model.m
    iu = np.triu_indices(m, 1)
    best = math.inf
    argmin = None
    se_at_min = None
    witnesses = []
    vacuous = 0
    left_se_all = []
    for k in steps:
        if estimator == CLOSED_FORM:
            left = _left_sides(model.row_second_moments(k), prop)
            E = model.expected(k)
            left_se = None
        else:
            W, Rs = _sample_moments(model, k, samples, seed)
            per = np.stack([_left_sides(r, prop) for r in Rs])
            left = per.mean(axis=0)
            left_se = per.std(axis=0, ddof=1) / math.sqrt(samples)
            left_se_all.append(left_se[iu])
            E = W.mean(axis=0)
        right = E + E.T
        for i, j in zip(*iu):
            r = right[i, j]
            if r <= _ZERO:
                vacuous += 1
                continue
            l = max(left[i, j], 0.0)
            ratio = l / r
            if l <= _ZERO:
                witnesses.append((k, int(i), int(j)))
            if ratio < best:
                best = ratio
                argmin = (k, int(i), int(j))
                se_at_min = None if left_se is None else float(left_se[i, j] / r)
    if math.isinf(best):
        status = "vacuous"
    elif witnesses:
        best, status = 0.0, "fails"
    else:
        status = "holds_on_range"
    return FeedbackReport(
        property=prop,
        gamma=float(best),
        status=status,
        witnesses=witnesses,
        argmin=argmin,
        vacuous=vacuous,
        estimator=estimator,
        samples=samples if estimator == MONTE_CARLO else 0,
        standard_error=se_at_min,
        left_standard_errors=np.array(left_se_all) if left_se_all else None,
    )


def weak_feedback_coefficient(model, steps, estimator=CLOSED_FORM, samples=0, seed=0) -> FeedbackReport:
    """``min E[W^i^T W^j] / E[W_ij + W_ji]`` over the checked steps and pairs."""
    return _feedback(model, steps, estimator, "weak", samples, seed)


def feedback_coefficient(model, steps, estimator=CLOSED_FORM, samples=0, seed=0) -> FeedbackReport:
    """``min E[W_ii W_ij + W_jj W_ji] / E[W_ij + W_ji]`` over the checked steps
    and pairs."""
    return _feedback(model, steps, estimator, "strong", samples, seed)


def is_doubly_stochastic_in_expectation(model, steps, tol=1e-12) -> bool:
    return all(np.allclose(model.expected(k).sum(axis=0), 1.0, atol=tol) for k in steps)


# ---------------------------------------------------------------------- M2

BOUNDED = "bounded-looking"
GROWING = "growing"
UNKNOWN = "unknown"


@dataclass
class M2Report:
    t0: int
    horizon: int
    trials: int
    partial_series: float
    terms: np.ndarray = field(repr=False)
    window_sums: list = field(default_factory=list)
    H_estimator: int = 0
    verdict: str = UNKNOWN

    def complete_windows(self):
        return [(w, s) for w, s in enumerate(self.window_sums) if window_bounds(w)[1] <= self.horizon]

    def to_json(self):
        return {
            "t0": self.t0,
            "horizon": self.horizon,
            "trials": self.trials,
            "partial_series": self.partial_series,
            "window_sums": [float(s) for s in self.window_sums],
            "H_estimator": self.H_estimator,
            "verdict": self.verdict,
        }


def _second_moment(model, k, samples, seed):
    if samples == 0:
        return model.second_moment(k)
    W = model.sample_batch(k, step_rng(seed, k, 0, purpose=ESTIMATOR), samples)
    return np.einsum("nla,nlb->ab", W, W) / samples


def m2_block_terms(model, X0, t0, horizon, seed, block, n):
    """Per step and initial vector (columns of ``X0``), the summed squared
    pair differences over the ``n`` trajectories of one trial block."""
    X0 = np.asarray(X0, dtype=float)
    X = np.broadcast_to(X0, (n,) + X0.shape).copy()
    m, c = X0.shape
    out = np.zeros((horizon - t0, c, m, m))
    for t, k in enumerate(range(t0, horizon)):
        diff = X[:, :, None, :] - X[:, None, :, :]  # (n, i, j, c)
        out[t] = np.einsum("nijc,nijc->cij", diff, diff)
        W = model.sample_batch(k, step_rng(seed, k, block), n)
        X = W @ X
    return out


def m2_verdict(window_sums, horizon, total, threshold=0.1, ratio=1e-3):
    done = [s for w, s in enumerate(window_sums) if window_bounds(w)[1] <= horizon]
    if total == 0 or (done and done[-1] < ratio * total):
        return BOUNDED
    if len(done) >= 2 and all(s > threshold for s in done[-2:]):
        return GROWING
    return UNKNOWN


def m2_diagnostic(model, x0, t0: int, horizon: int, trials: int, seed: int = 0,
                  h_samples: int | None = None, workers: int = 1) -> M2Report:
    """Truncated series ``sum_k sum_{i<j} H_ij(k) E[(x_i(k) - x_j(k))^2]``
    for ``k`` in ``[t0, horizon)``.

    ``H`` is exact when the model has closed-form second moments; otherwise
    it is estimated from ``h_samples`` draws per step (default 256).
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.m,):
        raise DimensionMismatch(f"initial vector of length {x0.shape} for m={model.m}")
    return m2_diagnostics(model, x0[:, None], t0, horizon, trials, seed, h_samples, workers)[0]


def m2_diagnostics(model, X0, t0, horizon, trials, seed=0, h_samples=None, workers=1) -> list[M2Report]:
    """:func:`m2_diagnostic` for every column of ``X0``, sharing the sampled
    matrices across columns."""
    X0 = np.asarray(X0, dtype=float)
    if X0.ndim != 2 or X0.shape[0] != model.m:
        raise DimensionMismatch(f"initial vectors of shape {X0.shape} for m={model.m}")
    if trials < 1:
        raise ValueError("trials must be positive")
    if horizon <= t0:
        raise ValueError("horizon must exceed t0")
    jobs = [(model, X0, t0, horizon, seed, b, n) for b, _, n in block_ranges(trials)]
    parts = map_jobs(_m2_job, jobs, workers)
    sq = parts[0]
    for p in parts[1:]:
        sq = sq + p
    sq /= trials
    samples = 0
    if h_samples is None:
        try:
            model.second_moment(t0)
        except NoClosedForm:
            samples = 256
    else:
        samples = h_samples
    iu = np.triu_indices(model.m, 1)
    terms = np.empty((X0.shape[1], horizon - t0))
    for t, k in enumerate(range(t0, horizon)):
        H = _second_moment(model, k, samples, seed)
        terms[:, t] = (H[iu] * sq[t][:, iu[0], iu[1]]).sum(axis=1)
    reports = []
    for col in terms:
        windows = []
        for t, k in enumerate(range(t0, horizon)):
            w = window_index(k)
            while len(windows) <= w:
                windows.append(0.0)
            windows[w] += col[t]
        total = float(col.sum())
        reports.append(M2Report(t0, horizon, trials, total, col, windows, samples, m2_verdict(windows, horizon, total)))
    return reports


def _m2_job(job):
    return m2_block_terms(*job)


def map_jobs(fn, jobs, workers=1):
    """``[fn(j) for j in jobs]``, in a process pool when ``workers > 1``."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))
