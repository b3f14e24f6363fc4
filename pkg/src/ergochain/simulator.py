"""Trajectories of ``x(k+1) = W(k) x(k)`` and the empirical ergodicity pattern.

All basis initial vectors are run at once: the state of a trial is the
matrix ``X(k) = W(k-1) ... W(t0)`` whose column ``l`` is the trajectory
started from ``e_l``. Trials are grouped in blocks of
:data:`~ergochain.rng.BLOCK_SIZE`; block ``b`` reads the streams
``step_rng(seed, k, b)``, so results are the same for any worker count.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, HypothesisWarning, NoClosedForm
from .flow import (DEFAULT_HORIZON, DEFAULT_THRESHOLD, EXPECTED, ErgodicityPattern, partition_from_pairs,
                   predict_ergodicity_pattern)
from .properties import find_common_steady_state, map_jobs, weak_feedback_coefficient
from .rng import BLOCK_SIZE, block_ranges, step_rng

DEFAULT_EPSILON = 1e-6
DEFAULT_AGREEMENT = 0.99
DEFAULT_WINDOW = 0.1
DEFAULT_T0 = (0, 7)


def window_start(t0: int, horizon: int, fraction: float = DEFAULT_WINDOW) -> int:
    """First step of the final window (the last ``fraction`` of the run)."""
    length = max(1, math.ceil(fraction * (horizon - t0)))
    return horizon - length


def log_checkpoints(t0: int, horizon: int, count: int = 60) -> list[int]:
    pts = np.unique(np.round(np.geomspace(1, horizon - t0 + 1, count)).astype(int) - 1 + t0)
    return [int(p) for p in pts if t0 <= p <= horizon]


@dataclass
class BlockStats:
    """Final-window statistics for ``n`` trials and ``c`` initial vectors.

    ``pair_gaps[n, c, i, j]`` is the largest ``|x_i - x_j|`` over the window;
    ``cauchy_gaps[n, c, i]`` is ``max - min`` of ``x_i`` over the window.
    """

    x_final: np.ndarray
    pair_gaps: np.ndarray
    cauchy_gaps: np.ndarray
    checkpoints: list
    states: np.ndarray | None = None


def simulate_block(model, X0, t0, horizon, seed, block, n, window=DEFAULT_WINDOW, checkpoints=()):
    """Run ``n`` trials of block ``block`` from the columns of ``X0``."""
    m = model.m
    X0 = np.asarray(X0, dtype=float)
    X = np.broadcast_to(X0, (n,) + X0.shape).copy()
    start = window_start(t0, horizon, window)
    checkpoints = sorted(set(checkpoints))
    saved = []
    lo = hi = gap = None
    ck = iter(checkpoints)
    nxt = next(ck, None)
    diag = np.arange(m)
    for k in range(t0, horizon + 1):
        if k == nxt:
            saved.append(X.copy())
            nxt = next(ck, None)
        if k >= start:
            d = np.abs(X[:, :, None, :] - X[:, None, :, :]).transpose(0, 3, 1, 2)
            if lo is None:
                lo, hi, gap = X.copy(), X.copy(), d
            else:
                np.minimum(lo, X, out=lo)
                np.maximum(hi, X, out=hi)
                np.maximum(gap, d, out=gap)
        if k == horizon:
            break
        W = model.sample_batch(k, step_rng(seed, k, block), n)
        if W.shape[1:] != (m, m):
            raise DimensionMismatch(f"model produced {W.shape[1:]} matrices for m={m}")
        # x + (W - I)(x - x_1 e): identity steps and consensus states stay exact
        D = W.copy()
        D[:, diag, diag] -= 1.0
        X = X + D @ (X - X[:, :1, :])
    cauchy = (hi - lo).transpose(0, 2, 1)
    states = np.stack(saved, axis=1) if saved else None
    return BlockStats(X, gap, cauchy, checkpoints, states)


def _block_job(args):
    return simulate_block(*args)


def _run_blocks(model, X0, t0, horizon, seed, trials, window, workers):
    jobs = [(model, X0, t0, horizon, seed, b, n, window) for b, _, n in block_ranges(trials)]
    return map_jobs(_block_job, jobs, workers)


# -------------------------------------------------------------- trajectory


@dataclass
class TrajectoryReport:
    t0: int
    horizon: int
    x0: np.ndarray
    x_final: np.ndarray
    checkpoints: list
    states: np.ndarray = field(repr=False)
    pair_gaps: np.ndarray = field(repr=False)
    cauchy_gaps: np.ndarray = field(repr=False)
    seed: int | None = None
    trial: int = 0

    @property
    def spread_series(self) -> np.ndarray:
        return self.states.max(axis=1) - self.states.min(axis=1)

    @property
    def max_pair_gap(self) -> float:
        return float(self.pair_gaps.max())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        m = len(self.x0)
        w.writerow(["step"] + [f"x_{i + 1}" for i in range(m)] + ["spread"])
        for k, x, s in zip(self.checkpoints, self.states, self.spread_series):
            w.writerow([k] + [repr(float(v)) for v in x] + [repr(float(s))])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    def to_json(self):
        return {
            "t0": self.t0,
            "horizon": self.horizon,
            "seed": self.seed,
            "trial": self.trial,
            "x0": self.x0.tolist(),
            "x_final": self.x_final.tolist(),
            "final_spread": float(self.x_final.max() - self.x_final.min()),
            "max_pair_gap_final_window": self.max_pair_gap,
            "cauchy_gaps": self.cauchy_gaps.tolist(),
        }


def run_trajectory(model, x0, t0: int, horizon: int, seed: int = 0, trial: int = 0,
                   checkpoints=None, window: float = DEFAULT_WINDOW) -> TrajectoryReport:
    """One trajectory from ``x(t0) = x0`` up to ``x(horizon)``.

    Trial ``trial`` of ``seed`` sees the same matrices here, in the flow
    accumulator's sampled mode and in :func:`empirical_ergodicity_pattern`.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.m,):
        raise DimensionMismatch(f"initial vector of length {x0.shape} for m={model.m}")
    if horizon <= t0:
        raise ValueError("horizon must exceed t0")
    block, row = divmod(trial, BLOCK_SIZE)
    if checkpoints is None:
        checkpoints = log_checkpoints(t0, horizon)
    checkpoints = sorted(set(checkpoints) | {t0, horizon})
    st = simulate_block(model, x0[:, None], t0, horizon, seed, block, row + 1, window, checkpoints)
    return TrajectoryReport(
        t0=t0,
        horizon=horizon,
        x0=x0,
        x_final=st.x_final[row, :, 0],
        checkpoints=checkpoints,
        states=st.states[row, :, :, 0],
        pair_gaps=st.pair_gaps[row, 0],
        cauchy_gaps=st.cauchy_gaps[row, 0],
        seed=seed,
        trial=trial,
    )


# ------------------------------------------------------ empirical pattern


@dataclass
class EmpiricalResult:
    pattern: ErgodicityPattern
    evidence: np.ndarray  # fraction of runs with gap < epsilon, per pair
    stability: float  # fraction of runs in which every coordinate settles
    coordinate_stability: np.ndarray
    runs: int
    # indexed [t0, trial, initial vector]
    max_pair_gaps: np.ndarray = field(repr=False)
    final_spreads: np.ndarray = field(repr=False)
    max_cauchy_gaps: np.ndarray = field(repr=False)
    epsilon: float = DEFAULT_EPSILON
    agreement: float = DEFAULT_AGREEMENT
    t0_set: tuple = ()

    def to_json(self):
        m = self.pattern.m
        return {
            "pattern": self.pattern.to_json(),
            "runs": self.runs,
            "epsilon": self.epsilon,
            "agreement": self.agreement,
            "stability": self.stability,
            "coordinate_stability": self.coordinate_stability.tolist(),
            "pair_evidence": {
                f"{i + 1}-{j + 1}": float(self.evidence[i, j]) for i in range(m) for j in range(i + 1, m)
            },
            "per_trial": self.trial_summary(),
        }

    def trial_summary(self):
        """Quantiles over trials of the worst value over initial vectors,
        one entry per start time."""
        def q(a):
            a = a.max(axis=1)
            return {"min": float(a.min()), "median": float(np.median(a)), "max": float(a.max())}

        return [
            {"t0": t0, "max_pair_gap": q(g), "final_spread": q(s), "max_cauchy_gap": q(c)}
            for t0, g, s, c in zip(self.t0_set, self.max_pair_gaps, self.final_spreads, self.max_cauchy_gaps)
        ]


def empirical_pattern(model, trials: int, horizon: int, t0_set=DEFAULT_T0, epsilon=DEFAULT_EPSILON,
                      seed: int = 0, agreement=DEFAULT_AGREEMENT, window=DEFAULT_WINDOW,
                      workers: int = 1) -> EmpiricalResult:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if trials < 1:
        raise ValueError("trials must be positive")
    m = model.m
    close = np.zeros((m, m))
    settled = 0
    coord = np.zeros(m)
    runs = 0
    gaps, spreads, cauchy = [], [], []
    for t0 in sorted(t0_set):
        if horizon <= t0:
            raise ValueError(f"horizon {horizon} does not exceed start time {t0}")
        blocks = _run_blocks(model, np.eye(m), t0, horizon, seed, trials, window, workers)
        for st in blocks:
            n = st.pair_gaps.shape[0]
            close += (st.pair_gaps < epsilon).sum(axis=(0, 1))
            ok = st.cauchy_gaps < epsilon  # (n, c, m)
            settled += int(ok.all(axis=2).sum())
            coord += ok.sum(axis=(0, 1))
            runs += n * m
        gaps.append(np.concatenate([st.pair_gaps.max(axis=(2, 3)) for st in blocks]))
        spreads.append(np.concatenate([np.ptp(st.x_final, axis=1) for st in blocks]))
        cauchy.append(np.concatenate([st.cauchy_gaps.max(axis=2) for st in blocks]))
    evidence = close / runs
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m) if evidence[i, j] >= agreement]
    return EmpiricalResult(
        pattern=partition_from_pairs(m, pairs),
        evidence=evidence,
        stability=settled / runs,
        coordinate_stability=coord / runs,
        runs=runs,
        max_pair_gaps=np.stack(gaps),
        final_spreads=np.stack(spreads),
        max_cauchy_gaps=np.stack(cauchy),
        epsilon=epsilon,
        agreement=agreement,
        t0_set=tuple(sorted(t0_set)),
    )


def empirical_ergodicity_pattern(model, trials: int, t0_set=DEFAULT_T0, horizon: int = 2000,
                                 epsilon=DEFAULT_EPSILON, seed_base: int = 0, **kw) -> ErgodicityPattern:
    """Partition induced by the transitive closure of "gap below ``epsilon``
    in at least ``agreement`` of the runs", over every trial, start time and
    basis initial vector."""
    return empirical_pattern(model, trials, horizon, t0_set, epsilon, seed_base, **kw).pattern


# ------------------------------------------------------------ verification


@dataclass
class VerificationConfig:
    trials: int = 100
    horizon: int = 4000
    t0_set: tuple = DEFAULT_T0
    epsilon: float = DEFAULT_EPSILON
    agreement: float = DEFAULT_AGREEMENT
    window: float = DEFAULT_WINDOW
    seed: int = 0
    flow_mode: str = EXPECTED
    flow_horizon: int = DEFAULT_HORIZON
    threshold: float = DEFAULT_THRESHOLD
    hypothesis_steps: int = 32
    workers: int = 1


@dataclass
class VerificationReport:
    predicted: ErgodicityPattern
    empirical: ErgodicityPattern
    match: bool
    refines: bool
    evidence: np.ndarray
    stability: float
    coordinate_stability: np.ndarray
    hypothesis_notes: list
    detail: EmpiricalResult = field(repr=False, default=None)

    def to_json(self):
        m = self.predicted.m
        return {
            "predicted": self.predicted.to_json(),
            "empirical": self.empirical.to_json(),
            "match": self.match,
            "empirical_refines_predicted": self.refines,
            "stability": self.stability,
            "coordinate_stability": self.coordinate_stability.tolist(),
            "pair_evidence": {
                f"{i + 1}-{j + 1}": float(self.evidence[i, j]) for i in range(m) for j in range(i + 1, m)
            },
            "hypothesis_notes": self.hypothesis_notes,
        }


def hypothesis_notes(model, steps) -> list[str]:
    """Reasons the prediction may not apply (weak feedback or a positive
    common steady state missing on ``steps``)."""
    notes = []
    try:
        fb = weak_feedback_coefficient(model, steps)
        if fb.gamma == 0:
            k, i, j = fb.witnesses[0]
            notes.append(f"weak feedback fails: gamma_weak = 0 (witness k={k}, pair {i + 1}-{j + 1})")
        ss = find_common_steady_state(model, steps)
        if ss.pi is None:
            notes.append("no common steady state in expectation")
        elif not ss.positive:
            notes.append(f"common steady state is not positive (pi_min = {ss.pi_min:g})")
    except NoClosedForm:
        notes.append("hypotheses not checked: model has no closed-form moments")
    return notes


def verify_prediction(model, config: VerificationConfig | None = None) -> VerificationReport:
    """Compare the flow-graph prediction with the empirical pattern."""
    config = config or VerificationConfig()
    notes = hypothesis_notes(model, range(config.hypothesis_steps))
    for note in notes:
        if not note.startswith("hypotheses not checked"):
            warnings.warn(note, HypothesisWarning, stacklevel=2)
    mode = config.flow_mode
    if mode == EXPECTED and not model.has_closed_form:
        mode = "sampled"
    predicted = predict_ergodicity_pattern(model, mode, config.flow_horizon, config.threshold, seed=config.seed)
    emp = empirical_pattern(model, config.trials, config.horizon, config.t0_set, config.epsilon, config.seed,
                            config.agreement, config.window, config.workers)
    return VerificationReport(
        predicted=predicted,
        empirical=emp.pattern,
        match=predicted == emp.pattern,
        refines=emp.pattern.refines(predicted),
        evidence=emp.evidence,
        stability=emp.stability,
        coordinate_stability=emp.coordinate_stability,
        hypothesis_notes=notes,
        detail=emp,
    )
