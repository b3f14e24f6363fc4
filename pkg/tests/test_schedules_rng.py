import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergochain import schedules
from ergochain.rng import BLOCK_SIZE, ESTIMATOR, TRAJECTORY, block_ranges, derive_seed, step_rng
from ergochain.schedules import DIVERGENT, SUMMABLE, UNKNOWN, DivergenceDescriptor, Rate


def test_named_forms_evaluate():
    assert schedules.constant(0.3)(7) == pytest.approx(0.3)
    assert schedules.power(2.0, 1.0)(3) == pytest.approx(0.5)
    assert schedules.geometric(1 / 18, 0.5)(2) == pytest.approx(1 / 72)
    np.testing.assert_allclose(schedules.power(1, 2)(np.arange(3)), [1, 0.25, 1 / 9])


@pytest.mark.parametrize("rate,tag", [
    (schedules.constant(0.1), DIVERGENT),
    (schedules.constant(0.0), SUMMABLE),
    (schedules.power(1, 1), DIVERGENT),
    (schedules.power(1, 0.5), DIVERGENT),
    (schedules.power(1, 1.0001), SUMMABLE),
    (schedules.power(1, 2), SUMMABLE),
    (schedules.geometric(1, 0.5), SUMMABLE),
    (schedules.geometric(1, 1.0), DIVERGENT),
    (Rate(1.0, 0.5, 0.99), SUMMABLE),
])
def test_series_tags(rate, tag):
    assert rate.series_tag() == tag


@given(st.floats(0.01, 5), st.floats(0, 3), st.floats(0.1, 1),
       st.floats(0.01, 5), st.floats(0, 3), st.floats(0.1, 1), st.integers(0, 200))
def test_product_is_pointwise(c1, a1, r1, c2, a2, r2, k):
    x, y = Rate(c1, a1, r1), Rate(c2, a2, r2)
    assert (x * y)(k) == pytest.approx(x(k) * y(k), rel=1e-9, abs=1e-300)


def test_rate_rejects_negative():
    with pytest.raises(ValueError):
        Rate(-1.0)


def test_sum_and_product_tags():
    assert schedules.sum_tag([]) == SUMMABLE
    assert schedules.sum_tag(None) == UNKNOWN
    assert schedules.sum_tag([schedules.power(1, 2), schedules.power(1, 1)]) == DIVERGENT
    prod = schedules.product_terms([schedules.geometric(1, 0.5)], [schedules.constant(1.0)])
    assert schedules.sum_tag(prod) == SUMMABLE
    assert schedules.product_terms(None, []) is None


def test_descriptor_lookup():
    d = DivergenceDescriptor.from_terms(3, {(0, 1): [schedules.constant(1)], (1, 2): []})
    assert d.tag(1, 0) == DIVERGENT
    assert d.tag(1, 2) == SUMMABLE
    assert d.tag(0, 2) == UNKNOWN
    assert not d.is_complete()


def test_step_rng_is_reproducible_and_distinct():
    a = step_rng(5, 10).random(8)
    b = step_rng(5, 10).random(8)
    np.testing.assert_array_equal(a, b)
    others = [step_rng(6, 10), step_rng(5, 11), step_rng(5, 10, block=1), step_rng(5, 10, purpose=ESTIMATOR)]
    for g in others:
        assert not np.array_equal(a, g.random(8))
    assert TRAJECTORY != ESTIMATOR


def test_step_rng_rows_are_prefix_stable():
    full = step_rng(3, 4).random((BLOCK_SIZE, 3))
    part = step_rng(3, 4).random((10, 3))
    np.testing.assert_array_equal(full[:10], part)


def test_step_rng_rejects_negative_seed():
    with pytest.raises(ValueError):
        step_rng(-1, 0)


def test_large_seed_accepted():
    step_rng(2**100 + 3, 0).random()


def test_block_ranges_cover():
    assert list(block_ranges(130)) == [(0, 0, 64), (1, 64, 64), (2, 128, 2)]
    assert list(block_ranges(0)) == []


def test_derive_seed_deterministic():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert derive_seed(1, 2) != derive_seed(1, 3)
