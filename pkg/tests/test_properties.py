import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergochain import schedules
from ergochain.approximation import DiagonalApproximation
from ergochain.errors import DimensionMismatch, NoClosedForm
from ergochain.flow import ErgodicityPattern
from ergochain.models import (BroadcastGossip, CustomModel, DeterministicSequence, EdgeClass, Gossip, GossipSchedule,
                              HarmonicPair, LinkFailure, Permutation, SimplexRow, _all_pairs, complete_graph,
                              identity_chain, ring_graph)
from ergochain.properties import (BOUNDED, CLOSED_FORM, GROWING, MONTE_CARLO, UNKNOWN, feedback_coefficient,
                                  find_common_steady_state, is_doubly_stochastic_in_expectation, m2_diagnostic,
                                  m2_diagnostics, m2_verdict, weak_feedback_coefficient)


def uniform_gossip(m):
    return Gossip(m, GossipSchedule(m, [EdgeClass(_all_pairs(m), None)]))


def cliques():
    within = [(i, j) for i, j in _all_pairs(6) if (i < 3) == (j < 3)]
    cross = [(i, j) for i, j in _all_pairs(6) if (i < 3) != (j < 3)]
    return Gossip(6, GossipSchedule(6, [EdgeClass(cross, schedules.geometric(1 / 18, 0.5)),
                                        EdgeClass(within, None)]))


# ------------------------------------------------------------ steady state


@pytest.mark.parametrize("model", [
    uniform_gossip(4), cliques(), BroadcastGossip(5, ring_graph(5), schedules.power(1, 1)),
    LinkFailure(uniform_gossip(3), failure=schedules.constant(0.5)), Permutation(4), HarmonicPair(),
    identity_chain(3),
], ids=lambda m: m.kind)
def test_doubly_stochastic_models_have_uniform_steady_state(model):
    assert is_doubly_stochastic_in_expectation(model, range(8))
    rep = find_common_steady_state(model, range(8))
    np.testing.assert_allclose(rep.pi, np.full(model.m, 1 / model.m), atol=1e-12)
    assert rep.positive and rep.pi_min == pytest.approx(1 / model.m)
    assert np.all(rep.residuals <= 1e-10)


def test_simplex_row_has_no_positive_steady_state():
    rep = find_common_steady_state(SimplexRow(), range(4))
    assert not rep.positive
    if rep.pi is not None:
        assert rep.pi[1] == pytest.approx(0.0, abs=1e-12)
        assert np.all(rep.residuals <= 1e-10)
    assert not is_doubly_stochastic_in_expectation(SimplexRow(), range(2))


def test_single_step_symmetric_chain():
    rep = find_common_steady_state(DeterministicSequence([[[.75, .25], [.25, .75]]]), [0])
    np.testing.assert_allclose(rep.pi, [.5, .5], atol=1e-12)
    assert rep.to_json()["positive"] is True


def test_non_uniform_steady_state():
    E = np.array([[.5, .5, 0], [.25, .5, .25], [0, .5, .5]])
    rep = find_common_steady_state(DeterministicSequence([E]), [0])
    np.testing.assert_allclose(rep.pi, [.25, .5, .25], atol=1e-12)


def test_no_common_steady_state():
    A = np.array([[.5, .5], [.5, .5]])
    B = np.array([[.9, .1], [.3, .7]])  # fixed vector (3/4, 1/4)
    rep = find_common_steady_state(DeterministicSequence([A, B]), [0, 1])
    assert rep.pi is None and not rep.positive
    assert rep.to_json()["pi"] is None


def test_steady_state_needs_closed_form():
    with pytest.raises(NoClosedForm):
        find_common_steady_state(CustomModel(2, lambda k, rng: np.eye(2)), [0])
    with pytest.raises(ValueError):
        find_common_steady_state(HarmonicPair(), [])


@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_steady_state_residuals_small_when_reported(m, seed):
    rng = np.random.default_rng(seed)
    E = rng.random((m, m)) + 0.05
    E /= E.sum(axis=1, keepdims=True)
    rep = find_common_steady_state(DeterministicSequence([E]), [0])
    assert rep.pi is not None and rep.positive
    assert rep.residuals.max() <= 1e-10
    assert rep.pi.sum() == pytest.approx(1.0)


# ---------------------------------------------------------------- feedback


def test_permutation_fails_both_feedback_properties():
    weak = weak_feedback_coefficient(Permutation(3), range(2))
    assert weak.gamma_weak == 0 and weak.status == "fails" and weak.witnesses
    strong = feedback_coefficient(Permutation(3), range(2))
    assert strong.gamma_strong == 0 and strong.witnesses
    assert weak.to_json()["witnesses"][0][1] >= 1


def test_gossip_two_agents_ratio_half():
    g = uniform_gossip(2)
    assert weak_feedback_coefficient(g, range(3)).gamma_weak == pytest.approx(0.5)
    assert feedback_coefficient(g, range(3)).gamma_strong == pytest.approx(0.5)


def test_identity_is_vacuous():
    rep = feedback_coefficient(identity_chain(3), range(4))
    assert rep.status == "vacuous" and math.isinf(rep.gamma)
    assert rep.to_json()["gamma"] == "vacuous"
    assert rep.vacuous == 12


@pytest.mark.parametrize("gamma", [0.1, 0.5, 0.9])
def test_diagonal_lower_bound_gives_weak_feedback(gamma):
    # broadcast diagonals are at least 1 - gamma
    b = BroadcastGossip(4, complete_graph(4), schedules.constant(gamma))
    assert weak_feedback_coefficient(b, range(3)).gamma_weak >= min(gamma, 1 - gamma) / 4 - 1e-15
    lf = LinkFailure(uniform_gossip(4), failure=schedules.constant(0.3))
    assert weak_feedback_coefficient(lf, range(3)).gamma_weak >= 0.5 / 4


@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_gossip_weak_feedback_lower_bound(m, seed):
    rng = np.random.default_rng(seed)
    P = np.triu(rng.random((m, m)) + 0.01, 1)
    P /= P.sum()
    g = Gossip(m, lambda k: P)
    rep = weak_feedback_coefficient(g, [0])
    pmin = P[np.triu_indices(m, 1)].min()
    assert rep.gamma_weak >= 0.5 * pmin / m
    assert rep.gamma_weak >= 0.5 / m - 1e-15


def test_feedback_is_stronger_on_gossip():
    g = cliques()
    weak = weak_feedback_coefficient(g, range(6)).gamma_weak
    strong = feedback_coefficient(g, range(6)).gamma_strong
    assert 0 < strong <= weak + 1e-12


def test_monte_carlo_feedback_close_to_closed_form():
    model = BroadcastGossip(4, ring_graph(4), schedules.constant(0.4))
    exact = weak_feedback_coefficient(model, range(2)).gamma_weak
    mc = weak_feedback_coefficient(model, range(2), MONTE_CARLO, samples=20000, seed=1)
    assert mc.estimator == MONTE_CARLO and mc.samples == 20000
    assert abs(mc.gamma_weak - exact) <= 5 * mc.standard_error + 1e-3


def test_monte_carlo_standard_errors_shrink_by_root_two():
    model = LinkFailure(uniform_gossip(3), failure=schedules.constant(0.4))
    ratios = []
    for n in (4000, 8000, 16000):
        rep = weak_feedback_coefficient(model, range(3), MONTE_CARLO, samples=n, seed=7)
        ratios.append(float(np.mean(rep.left_standard_errors)))
    for a, b in zip(ratios, ratios[1:]):
        assert a / b == pytest.approx(math.sqrt(2), rel=0.1)


def test_feedback_argument_validation():
    with pytest.raises(ValueError):
        weak_feedback_coefficient(HarmonicPair(), [])
    with pytest.raises(ValueError):
        weak_feedback_coefficient(HarmonicPair(), [0], estimator="exact")
    with pytest.raises(ValueError):
        weak_feedback_coefficient(HarmonicPair(), [0], MONTE_CARLO, samples=1)


def test_weak_feedback_of_diagonal_approximation():
    base = cliques()
    pattern = ErgodicityPattern(6, ((0, 1, 2), (3, 4, 5)))
    rep = weak_feedback_coefficient(DiagonalApproximation(base, pattern), range(4))
    assert rep.status == "holds_on_range" and rep.gamma_weak > 0


# --------------------------------------------------------------------- M2


def test_m2_identity_is_zero():
    rep = m2_diagnostic(identity_chain(3), [1.0, 0, 0], 0, 64, 4)
    assert rep.partial_series == 0 and np.all(rep.terms == 0)
    assert rep.verdict == BOUNDED


def test_m2_consensus_initial_is_zero():
    rep = m2_diagnostic(cliques(), [0.3] * 6, 0, 128, 8)
    assert rep.partial_series == 0


def test_m2_harmonic_pair_bounded():
    rep = m2_diagnostic(HarmonicPair(), [1.0, 0.0], 1, 2**12, 1)
    # spread after K steps is 2/((K+1)(K+2)) and H_12 <= 1
    bound = sum((2.0 / ((k + 1) * (k + 2))) ** 2 for k in range(1, 2**12)) * 2 + 1
    assert 0 < rep.partial_series <= bound
    assert rep.verdict == BOUNDED
    assert np.all(rep.terms >= 0)
    assert np.all(np.diff(np.cumsum(rep.terms)) >= 0)


def test_m2_multiple_initials_share_paths():
    X0 = np.eye(6)
    reps = m2_diagnostics(cliques(), X0, 7, 256, 16, seed=3)
    for c in range(6):
        single = m2_diagnostic(cliques(), X0[:, c], 7, 256, 16, seed=3)
        assert single.partial_series == pytest.approx(reps[c].partial_series, rel=1e-12)


def test_m2_worker_independence():
    a = m2_diagnostic(cliques(), np.eye(6)[0], 0, 200, 130, seed=5, workers=1)
    b = m2_diagnostic(cliques(), np.eye(6)[0], 0, 200, 130, seed=5, workers=3)
    np.testing.assert_array_equal(a.terms, b.terms)


def test_m2_monte_carlo_h_for_sampler_only_models():
    model = CustomModel(2, lambda k, rng: np.full((2, 2), 0.5))
    rep = m2_diagnostic(model, [1.0, 0.0], 0, 8, 2)
    assert rep.H_estimator == 256
    # after one averaging step the spread is zero; the first term is H_12 * 1
    assert rep.partial_series == pytest.approx(0.5)


def test_m2_errors():
    with pytest.raises(DimensionMismatch):
        m2_diagnostic(HarmonicPair(), [1.0, 0, 0], 0, 8, 1)
    with pytest.raises(ValueError):
        m2_diagnostic(HarmonicPair(), [1.0, 0], 0, 8, 0)
    with pytest.raises(ValueError):
        m2_diagnostic(HarmonicPair(), [1.0, 0], 8, 8, 1)


def test_m2_verdict_rules():
    assert m2_verdict([1.0, 0.5, 0.25, 1e-5], 8, 1.75) == BOUNDED
    assert m2_verdict([1.0, 1.0, 1.0, 1.0], 8, 4.0) == GROWING
    assert m2_verdict([1.0, 0.05], 2, 1.05) == UNKNOWN
    assert m2_verdict([0.0], 1, 0.0) == BOUNDED


def test_m2_report_json():
    j = m2_diagnostic(HarmonicPair(), [1.0, 0.0], 1, 16, 1).to_json()
    assert set(j) == {"t0", "horizon", "trials", "partial_series", "window_sums", "H_estimator", "verdict"}
