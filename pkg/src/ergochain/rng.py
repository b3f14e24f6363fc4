"""Counter-based random streams.

Every random matrix W(k) is drawn from a stream identified by
``(seed, purpose, trial block, k)``. The stream is a Philox generator whose
key is the seed and whose counter holds the remaining coordinates, so any step
of any trial can be regenerated without replaying earlier steps and the
results do not depend on how trials are split across workers.

Trials are grouped into blocks of :data:`BLOCK_SIZE`. Inside a block, trial
``t`` reads row ``t`` of a ``(n, d)`` uniform array, and rows are prefix
stable, so a block may be evaluated partially.
"""

from __future__ import annotations

import numpy as np

BLOCK_SIZE = 64

# stream purposes
TRAJECTORY = 0
ESTIMATOR = 1

_MASK64 = (1 << 64) - 1


def _key(seed: int) -> list[int]:
    seed = int(seed)
    if seed < 0:
        raise ValueError("seeds must be nonnegative")
    return [seed & _MASK64, (seed >> 64) & _MASK64]


def step_rng(seed: int, k: int, block: int = 0, purpose: int = TRAJECTORY) -> np.random.Generator:
    """Generator for step ``k`` of trial block ``block``."""
    # word 0 is left for Philox's own increment while drawing
    counter = [0, int(purpose), int(block), int(k)]
    return np.random.Generator(np.random.Philox(key=_key(seed), counter=counter))


def block_ranges(trials: int, block_size: int = BLOCK_SIZE):
    """Yield ``(block_index, first_trial, n_trials)`` covering ``trials``."""
    for b, start in enumerate(range(0, trials, block_size)):
        yield b, start, min(block_size, trials - start)


def derive_seed(seed: int, *labels: int) -> int:
    """Deterministic child seed for an independent sub-experiment."""
    ss = np.random.SeedSequence([int(seed), *[int(x) for x in labels]])
    return int(ss.generate_state(2, dtype=np.uint64)[0])
