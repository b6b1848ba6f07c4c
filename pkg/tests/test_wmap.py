import math
import warnings
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixzone import (
    DegenerateRowWarning,
    DimensionMismatch,
    StateMatrix,
    compute_wmap,
    log_raw_weight,
    plan_activation,
    raw_weight,
)

from .conftest import EXAMPLE_WMAP


def exact_weight(ingress, egress, p):
    return Fraction(ingress) ** egress * Fraction(str(p))


@pytest.mark.parametrize("ingress, egress, p, expected", [
    (10, 10, 0.30, 3.0e9),
    (3, 9, 0.40, 7873.2),
    (2, 3, 0.60, 4.8),
])
def test_raw_weight_matches_exact_arithmetic(ingress, egress, p, expected):
    assert float(exact_weight(ingress, egress, p)) == pytest.approx(expected, rel=1e-15)
    assert raw_weight(ingress, egress, p) == pytest.approx(expected, rel=1e-12)


@given(st.integers(0, 50), st.floats(0, 1))
def test_one_to_any_power(k, p):
    assert raw_weight(1, k, p) == p


def test_zero_to_zero_is_one():
    assert raw_weight(0, 0, 0.3) == 0.3
    assert raw_weight(0, 2, 0.3) == 0.0
    assert log_raw_weight(0, 0, 0.3) == pytest.approx(math.log(0.3))
    assert log_raw_weight(0, 2, 0.3) == -math.inf


def test_overflowing_weight_is_inf():
    assert raw_weight(10, 400, 0.5) == math.inf
    assert math.isfinite(log_raw_weight(10, 400, 0.5))


@given(st.integers(1, 12), st.integers(0, 12), st.floats(1e-6, 1.0))
def test_log_domain_equivalence(ingress, egress, p):
    direct = raw_weight(ingress, egress, p)
    via_log = math.exp(log_raw_weight(ingress, egress, p))
    assert via_log == pytest.approx(direct, rel=1e-9)


def test_example_wmap_reproduction(example_state, example_p):
    wm = compute_wmap(example_state, example_p)
    np.testing.assert_allclose(wm.normalized[1:], EXAMPLE_WMAP[1:], atol=1e-3)
    assert wm.normalized[0, 0] == pytest.approx(0.00003, abs=1e-5)
    assert wm.normalized[0, 1] == pytest.approx(0.898, abs=1e-3)
    assert wm.normalized[0, 2] == pytest.approx(0.089, abs=1e-3)
    assert wm.normalized[0, 3] == pytest.approx(0.0117, abs=5e-4)
    assert not wm.degenerate.any()
    assert wm.raw[0, 1] == pytest.approx(3.0e9)
    assert wm.raw[1, 2] == pytest.approx(7873.2)


def test_example_wmap_against_exact_fractions(example_state, example_p):
    for i in range(4):
        row = [exact_weight(example_state.ingress[i], example_state.egress[j], example_p.p[i, j]) for j in range(4)]
        total = sum(row)
        expected = [float(w / total) for w in row]
        np.testing.assert_allclose(compute_wmap(example_state, example_p).normalized[i], expected, rtol=1e-12)


def test_symmetric_small_case():
    wm = compute_wmap(StateMatrix([1, 1], [1, 1]), [[0.5, 0.5], [0.5, 0.5]])
    np.testing.assert_allclose(wm.normalized, 0.5)


def test_two_gate_hand_case():
    wm = compute_wmap(StateMatrix([2, 2], [3, 1]), [[0.6, 0.4], [0.5, 0.5]])
    np.testing.assert_allclose(wm.normalized[0], [4.8 / 5.6, 0.8 / 5.6], rtol=1e-12)


def test_dimension_mismatch(example_p):
    with pytest.raises(DimensionMismatch):
        compute_wmap(StateMatrix([1, 2], [3, 4]), example_p)


def test_large_counts_do_not_overflow(example_p):
    wm = compute_wmap(StateMatrix([500, 400, 300, 200], [450, 350, 250, 150]), example_p)
    assert np.all(np.isfinite(wm.normalized))
    np.testing.assert_allclose(wm.normalized.sum(axis=1), 1.0, atol=1e-9)


@pytest.mark.parametrize("n", range(2, 9))
def test_evaluation_count_is_n_squared(n):
    rng = np.random.default_rng(n)
    p = rng.dirichlet(np.ones(n), size=n)
    wm = compute_wmap(StateMatrix(rng.integers(0, 12, n), rng.integers(0, 12, n)), p)
    assert wm.evaluations == n * n


counts = st.integers(2, 8).flatmap(lambda n: st.tuples(
    st.lists(st.integers(1, 15), min_size=n, max_size=n),
    st.lists(st.integers(0, 15), min_size=n, max_size=n),
    st.lists(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n), min_size=n, max_size=n),
))


@settings(max_examples=200)
@given(counts)
def test_normalized_rows_sum_to_one(case):
    ingress, egress, p = case
    wm = compute_wmap(StateMatrix(ingress, egress), np.array(p))
    np.testing.assert_allclose(wm.normalized.sum(axis=1), 1.0, atol=1e-9)
    assert np.all((wm.normalized >= 0) & (wm.normalized <= 1))


@settings(max_examples=200)
@given(counts, st.data())
def test_row_scaling_is_divided_out(case, data):
    ingress, egress, p = case
    p = np.array(p)
    i = data.draw(st.integers(0, len(ingress) - 1))
    c = data.draw(st.floats(0.1, 10.0))
    scaled = p.copy()
    scaled[i] *= c
    state = StateMatrix(ingress, egress)
    np.testing.assert_allclose(
        compute_wmap(state, scaled).normalized[i], compute_wmap(state, p).normalized[i], atol=1e-9
    )


@settings(max_examples=200)
@given(counts, st.data())
def test_monotone_in_probability(case, data):
    ingress, egress, p = case
    p = np.array(p)
    n = len(ingress)
    i, j = data.draw(st.integers(0, n - 1)), data.draw(st.integers(0, n - 1))
    bumped = p.copy()
    bumped[i, j] += data.draw(st.floats(0.0, 2.0))
    state = StateMatrix(ingress, egress)
    assert compute_wmap(state, bumped).normalized[i, j] >= compute_wmap(state, p).normalized[i, j] - 1e-12


def test_zero_ingress_row_is_degenerate(example_p):
    wm = compute_wmap(StateMatrix([0, 3, 6, 8], [7, 10, 9, 8]), example_p)
    assert wm.degenerate.tolist() == [True, False, False, False]
    assert np.all(wm.normalized[0] == 0)


# -- activation plan ---------------------------------------------------------

def test_example_activation_plan(example_state, example_p, zone):
    plan = plan_activation(compute_wmap(example_state, example_p), example_state, zone)
    assert plan.as_dict() == {"ingress": {2: 7, 3: 4, 4: 2}, "egress": {1: 3, 3: 1, 4: 2}}
    assert plan.ingress[0] == 0 and plan.egress[1] == 0
    # (1,4) is below threshold once its weight is recomputed as 0.0117.
    assert plan.triggers == {(1, 1), (1, 3), (1, 4), (2, 1), (2, 2), (3, 1), (3, 3), (4, 1), (4, 4)}
    assert (1, 3) in plan.triggers  # gate-3 egress activation


def test_full_lanes_get_no_transceivers(example_p, zone):
    state = StateMatrix([10, 12, 10, 11], [10, 10, 15, 10])
    plan = plan_activation(compute_wmap(state, example_p), state, zone)
    assert plan.empty


def test_tiny_threshold_gives_empty_plan(example_state, example_p, zone):
    plan = plan_activation(compute_wmap(example_state, example_p), example_state, replace(zone, wmap_threshold=1e-9))
    assert plan.empty and not plan.triggers


def test_zero_threshold_disables_activation(example_p, zone):
    state = StateMatrix.zeros(4)
    plan = plan_activation(compute_wmap(state, example_p), state, replace(zone, wmap_threshold=0.0))
    assert plan.empty


def test_empty_zone_demands_full_padding(example_p, zone):
    state = StateMatrix.zeros(4)
    with pytest.warns(DegenerateRowWarning):
        plan = plan_activation(compute_wmap(state, example_p), state, zone)
    assert plan.ingress.tolist() == [10] * 4
    assert plan.egress.tolist() == [10] * 4
    assert plan.degenerate_rows == (1, 2, 3, 4)


@settings(max_examples=100)
@given(counts, st.floats(0.01, 0.99))
def test_plan_counts_follow_capacity_rule(case, thr):
    ingress, egress, p = case
    p = np.array(p)
    p = p / p.sum(axis=1, keepdims=True)
    from mixzone import make_zone
    zone = make_zone(p, wmap_threshold=thr)
    state = StateMatrix(ingress, egress)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateRowWarning)
        plan = plan_activation(compute_wmap(state, p), state, zone)
    marked_in = {i - 1 for i, _ in plan.triggers}
    marked_out = {j - 1 for _, j in plan.triggers}
    for g in range(len(ingress)):
        exp_in = max(0, 10 - ingress[g]) if g in marked_in else 0
        exp_out = max(0, 10 - egress[g]) if g in marked_out else 0
        assert plan.ingress[g] == exp_in
        assert plan.egress[g] == exp_out
