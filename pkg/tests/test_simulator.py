import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergochain import schedules
from ergochain.errors import DimensionMismatch, HypothesisWarning
from ergochain.flow import ErgodicityPattern
from ergochain.models import (BroadcastGossip, EdgeClass, Gossip, GossipSchedule, HarmonicPair, IdentityPrefix,
                              LinkFailure, Permutation, SimplexRow, _all_pairs, identity_chain, ring_graph)
from ergochain.simulator import (VerificationConfig, empirical_ergodicity_pattern, empirical_pattern,
                                 log_checkpoints, run_trajectory, verify_prediction, window_start)


def uniform_gossip(m):
    return Gossip(m, GossipSchedule(m, [EdgeClass(_all_pairs(m), None)]))


def cliques(cross):
    within = [(i, j) for i, j in _all_pairs(6) if (i < 3) == (j < 3)]
    xs = [(i, j) for i, j in _all_pairs(6) if (i < 3) != (j < 3)]
    return Gossip(6, GossipSchedule(6, [EdgeClass(xs, cross), EdgeClass(within, None)]))


def harmonic_gap(K):
    """Exact ``|x_1 - x_2|`` after K steps from x(1) = (1, 0)."""
    gap = Fraction(1)
    for k in range(1, K + 1):
        gap *= 1 - Fraction(2, k + 2)
    return gap


MODELS = [
    uniform_gossip(4),
    cliques(schedules.geometric(1 / 18, 0.5)),
    BroadcastGossip(5, ring_graph(5), schedules.power(1, 1)),
    LinkFailure(uniform_gossip(3), failure=schedules.constant(0.5)),
    Permutation(3),
    SimplexRow(),
    HarmonicPair(),
]


# -------------------------------------------------------------- trajectories


def test_identity_trajectory():
    rep = run_trajectory(identity_chain(3), [0.2, 0.5, 0.9], 0, 50)
    np.testing.assert_array_equal(rep.x_final, [0.2, 0.5, 0.9])
    np.testing.assert_allclose(rep.spread_series, 0.7)


@pytest.mark.parametrize("K", [10, 100, 1000])
def test_harmonic_gap_matches_telescoping_product(K):
    rep = run_trajectory(HarmonicPair(), [1.0, 0.0], 1, K + 1)
    exact = harmonic_gap(K)
    assert exact == Fraction(2, (K + 1) * (K + 2))
    gap = abs(rep.x_final[0] - rep.x_final[1])
    assert abs(gap - float(exact)) <= 1e-9 * float(exact)


def test_two_agent_gossip_agrees_after_one_step():
    for seed in range(5):
        rep = run_trajectory(uniform_gossip(2), [0.0, 1.0], 0, 1, seed=seed)
        np.testing.assert_array_equal(rep.x_final, [0.5, 0.5])


def test_trajectory_errors():
    with pytest.raises(DimensionMismatch):
        run_trajectory(HarmonicPair(), [1.0, 0, 0], 0, 5)
    with pytest.raises(ValueError):
        run_trajectory(HarmonicPair(), [1.0, 0], 5, 5)


def test_checkpoints_and_window():
    cps = log_checkpoints(0, 1000)
    assert cps[0] == 0 and cps[-1] == 1000 and cps == sorted(set(cps))
    assert window_start(0, 4000) == 3600
    assert window_start(0, 5) == 4


def test_csv_export(tmp_path):
    rep = run_trajectory(cliques(schedules.constant(0.0)), np.eye(6)[0], 0, 100, seed=3)
    text = rep.to_csv()
    lines = text.split("\n")
    assert lines[0] == "step,x_1,x_2,x_3,x_4,x_5,x_6,spread"
    assert "\r" not in text and text.endswith("\n")
    assert len(lines) - 2 == len(rep.checkpoints)  # header and trailing newline
    first = [float(v) for v in lines[1].split(",")]
    assert first == [0, 1, 0, 0, 0, 0, 0, 1]
    path = tmp_path / "t.csv"
    rep.write_csv(path)
    assert path.read_bytes() == text.encode("utf-8")
    j = rep.to_json()
    assert j["final_spread"] == pytest.approx(np.ptp(rep.x_final))


def test_trajectory_is_deterministic_and_matches_trial_rows():
    model = cliques(schedules.geometric(1 / 18, 0.5))
    a = run_trajectory(model, np.eye(6)[2], 7, 300, seed=9, trial=70)
    b = run_trajectory(model, np.eye(6)[2], 7, 300, seed=9, trial=70)
    np.testing.assert_array_equal(a.states, b.states)
    emp = empirical_pattern(model, 71, 300, t0_set=(7,), seed=9)
    assert emp.final_spreads[0, 70, 2] == pytest.approx(np.ptp(a.x_final), abs=0)


# -------------------------------------------------------------- invariants


@settings(max_examples=25)
@given(st.sampled_from(MODELS), st.integers(0, 2**16), st.integers(0, 10), st.data())
def test_range_contraction(model, seed, t0, data):
    x0 = np.array(data.draw(st.lists(st.floats(-5, 5), min_size=model.m, max_size=model.m)))
    rep = run_trajectory(model, x0, t0, t0 + 60, seed=seed, checkpoints=range(t0, t0 + 61))
    assert np.all(rep.states >= x0.min() - 1e-12)
    assert np.all(rep.states <= x0.max() + 1e-12)
    assert np.all(rep.spread_series <= np.ptp(x0) + 1e-12)


@settings(max_examples=25)
@given(st.sampled_from(MODELS), st.integers(0, 2**16), st.sampled_from([0.0, 1.0, -2.5, 0.25, 3.0]))
def test_consensus_is_invariant(model, seed, c):
    rep = run_trajectory(model, np.full(model.m, c), 0, 80, seed=seed, checkpoints=range(81))
    assert np.all(rep.states == c)


@settings(max_examples=25)
@given(st.sampled_from(MODELS), st.integers(0, 2**16), st.floats(-3, 3), st.floats(-3, 3), st.data())
def test_affine_equivariance(model, seed, a, b, data):
    x0 = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=model.m, max_size=model.m)))
    r1 = run_trajectory(model, x0, 0, 60, seed=seed, checkpoints=range(61))
    r2 = run_trajectory(model, a * x0 + b, 0, 60, seed=seed, checkpoints=range(61))
    np.testing.assert_allclose(r2.states, a * r1.states + b, atol=1e-12)


# -------------------------------------------------------------- empirical


def test_empirical_identity_is_singletons():
    assert empirical_ergodicity_pattern(identity_chain(3), 2, horizon=50) == ErgodicityPattern.singletons(3)


def test_empirical_complete_gossip_single_block():
    p = empirical_ergodicity_pattern(uniform_gossip(3), 20, horizon=2000, seed_base=1)
    assert p.to_json() == [[1, 2, 3]]


def test_empirical_decoupled_cliques():
    res = empirical_pattern(cliques(schedules.constant(0.0)), 20, 2000, seed=2)
    assert res.pattern.to_json() == [[1, 2, 3], [4, 5, 6]]
    assert res.evidence[0, 3] == 0.0
    assert res.stability == 1.0
    assert res.runs == 2 * 20 * 6
    assert res.max_pair_gaps.shape == (2, 20, 6)
    assert len(res.to_json()["per_trial"]) == 2


def test_empirical_evidence_in_unit_interval():
    res = empirical_pattern(BroadcastGossip(4, ring_graph(4), schedules.power(1, 2)), 10, 400, seed=0)
    assert np.all((res.evidence >= 0) & (res.evidence <= 1))
    assert np.all((res.coordinate_stability >= 0) & (res.coordinate_stability <= 1))


def test_empirical_errors():
    with pytest.raises(ValueError):
        empirical_pattern(HarmonicPair(), 1, 10, epsilon=0)
    with pytest.raises(ValueError):
        empirical_pattern(HarmonicPair(), 0, 10)
    with pytest.raises(ValueError):
        empirical_pattern(HarmonicPair(), 1, 7, t0_set=(0, 7))


def test_empirical_independent_of_workers():
    model = cliques(schedules.geometric(1 / 18, 0.5))
    a = empirical_pattern(model, 130, 300, seed=4, workers=1)
    b = empirical_pattern(model, 130, 300, seed=4, workers=4)
    np.testing.assert_array_equal(a.max_pair_gaps, b.max_pair_gaps)
    np.testing.assert_array_equal(a.evidence, b.evidence)


def test_finite_modification_keeps_pattern():
    base = HarmonicPair()
    mod = IdentityPrefix(base, 5)
    a = empirical_ergodicity_pattern(base, 2, horizon=20000)
    b = empirical_ergodicity_pattern(mod, 2, horizon=20000)
    assert a == b == ErgodicityPattern(2, ((0, 1),))


# -------------------------------------------------------------- verification


SMALL = VerificationConfig(trials=20, horizon=1500, flow_horizon=256)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_empirical_refines_prediction(model):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HypothesisWarning)
        rep = verify_prediction(model, SMALL)
    assert rep.refines
    assert rep.to_json()["empirical_refines_predicted"] is True


def test_verify_two_cliques_matches():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rep = verify_prediction(cliques(schedules.geometric(1 / 18, 0.5)), SMALL)
    assert rep.match and rep.stability >= 0.99
    assert rep.predicted.to_json() == [[1, 2, 3], [4, 5, 6]]


def test_verify_permutation_warns_and_is_unstable():
    with pytest.warns(HypothesisWarning, match="weak feedback"):
        rep = verify_prediction(Permutation(3), SMALL)
    assert rep.stability < 0.5
    assert rep.hypothesis_notes


def test_verify_simplex_row_warns_and_middle_coordinate_unstable():
    with pytest.warns(HypothesisWarning, match="not positive"):
        rep = verify_prediction(SimplexRow(), SMALL)
    assert rep.coordinate_stability[0] == 1.0 and rep.coordinate_stability[2] == 1.0
    assert rep.coordinate_stability[1] < 0.5
    traj = run_trajectory(SimplexRow(), [0, 0.5, 1], 0, 2000, seed=1)
    assert traj.x_final[0] == 0 and traj.x_final[2] == 1
    assert traj.cauchy_gaps[1] > 0.1
