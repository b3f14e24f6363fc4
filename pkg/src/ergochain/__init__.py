"""Ergodicity classes of random stochastic chains.

Simulate ``x(k+1) = W(k) x(k)`` for independent random stochastic matrices,
predict the ergodicity classes from the infinite flow graph and check the
prediction empirically.
"""

from .approximation import (DiagonalApproximation, MixingSchedule, cut_zero_approximation,
                            diagonal_approximation, l1_chain_distance, mixing_perturbation)
from .errors import *  # noqa: F401,F403
from .flow import (ErgodicityPattern, FlowAccumulator, InfiniteFlowGraph, accumulate_flows, classify_edges,
                   connected_components, cut_flow_series, infinite_flow_graph, predict_ergodicity_pattern)
from .models import (BroadcastGossip, ChainModel, CustomModel, DeterministicSequence, EdgeClass, Gossip,
                     GossipSchedule, HarmonicPair, IdentityPrefix, LinkFailure, Permutation, SimplexRow,
                     expected_matrix, identity_chain, link_failure_compose)
from .properties import (feedback_coefficient, find_common_steady_state, m2_diagnostic,
                         weak_feedback_coefficient)
from .schedules import Rate, constant, geometric, power
from .simulator import (VerificationConfig, empirical_ergodicity_pattern, empirical_pattern, run_trajectory,
                        verify_prediction)
from .stochastic import (apply, cut_flow, l1_matrix_distance, pair_flow, validate_stochastic)

__version__ = "0.1.0"
