import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixzone import (
    AdversarySettings,
    Kind,
    Lane,
    Observation,
    ScoreMatrix,
    TooLarge,
    Trace,
    TravelTime,
    TravelTimeModel,
    WrongLane,
    anonymity_metrics,
    attack,
    build_scores,
    count_feasible_mappings,
    entropy_bits,
    link_greedy,
    link_ml,
    prune,
    score_pair,
    validate_transition_matrix,
)
from .oracles import brute_force_count, brute_force_ml


# -- score_pair / pruning --------------------------------------------------------

def _o(t, gate, lane, name="x"):
    return Observation(t, gate, Lane(lane), name)


@pytest.fixture
def tt():
    return TravelTimeModel.uniform(4, 10.0, 20.0)


def test_score_inside_support(example_p, tt):
    s = score_pair(_o(0.0, 2, "ingress"), _o(15.0, 3, "egress"), example_p, tt)
    assert s == pytest.approx(0.40 * 0.1)


def test_score_outside_support_is_zero(example_p, tt):
    assert score_pair(_o(0.0, 2, "ingress"), _o(25.0, 3, "egress"), example_p, tt) == 0.0
    assert score_pair(_o(0.0, 2, "ingress"), _o(5.0, 3, "egress"), example_p, tt) == 0.0


def test_zero_probability_scores_zero(tt):
    P = validate_transition_matrix(np.eye(4))
    assert score_pair(_o(0.0, 1, "ingress"), _o(15.0, 2, "egress"), P, tt) == 0.0


def test_wrong_lane(example_p, tt):
    with pytest.raises(WrongLane):
        score_pair(_o(0.0, 1, "egress"), _o(15.0, 2, "egress"), example_p, tt)


def test_prune_rare_exits(example_p, tt):
    obs = [_o(0.0, g, "ingress", f"i{g}") for g in range(1, 5)]
    obs += [_o(15.0, g, "egress", f"e{g}") for g in range(1, 5)]
    sm = prune(build_scores(obs, example_p, tt), example_p, tt, min_probability=0.05)
    assert not sm.feasible.diagonal().any()
    assert sm.feasible[~np.eye(4, dtype=bool)].all()


def test_prune_off_keeps_window(example_p, tt):
    obs = [_o(0.0, 1, "ingress", "a"), _o(100.0, 2, "egress", "b"), _o(12.0, 3, "egress", "c")]
    sm = build_scores(obs, example_p, tt, horizon=1000.0)
    out = prune(sm, example_p, tt, time_feasibility=False, min_probability=0.0)
    np.testing.assert_array_equal(out.feasible, sm.window)
    np.testing.assert_array_equal(out.scores, sm.scores)


def test_dwell_widens_support(example_p, tt):
    obs = [_o(0.0, 2, "ingress", "a"), _o(25.0, 3, "egress", "b")]
    sm = build_scores(obs, example_p, tt, horizon=100.0)
    assert not prune(sm, example_p, tt).feasible[0, 0]
    assert prune(sm, example_p, tt, dwell=10.0).feasible[0, 0]


def test_pruning_never_adds_mappings(example_p, tt):
    rng = np.random.default_rng(3)
    obs = [_o(float(rng.uniform(0, 20)), int(rng.integers(1, 5)), "ingress", f"i{k}") for k in range(5)]
    obs += [_o(float(rng.uniform(15, 40)), int(rng.integers(1, 5)), "egress", f"e{k}") for k in range(5)]
    sm = build_scores(obs, example_p, tt, horizon=100.0)
    loose = prune(sm, example_p, tt, time_feasibility=False)
    strict = prune(sm, example_p, tt, min_probability=0.2)
    both = prune(sm, example_p, tt, min_probability=0.35)
    c = [count_feasible_mappings(m.feasible) for m in (loose, strict, both)]
    assert c[0] >= c[1] >= c[2]


# -- linking ----------------------------------------------------------------------

def test_ml_two_by_two():
    a = link_ml([[0.9, 0.1], [0.2, 0.8]])
    assert a.mapping == {0: 0, 1: 1}
    assert a.score == pytest.approx(0.72)


def test_ml_equal_scores_full_permutation():
    a = link_ml(np.full((4, 4), 0.3))
    assert sorted(a.mapping) == [0, 1, 2, 3]
    assert sorted(a.mapping.values()) == [0, 1, 2, 3]
    assert a.score == pytest.approx(0.3 ** 4)
    assert link_ml(np.full((4, 4), 0.3)) == a


def test_greedy_matches_ml_on_easy_case():
    assert link_greedy([[0.9, 0.1], [0.2, 0.8]]).mapping == {0: 0, 1: 1}


def test_greedy_differs_from_ml():
    s = [[0.5, 0.4], [0.5, 0.0]]
    g = link_greedy(s)
    assert g.mapping == {0: 0}
    assert g.score == pytest.approx(0.5)
    m = link_ml(s)
    assert m.mapping == {0: 1, 1: 0}
    assert m.score == pytest.approx(0.20)


def test_empty_and_zero_matrices():
    assert len(link_greedy(np.zeros((0, 0)))) == 0
    assert len(link_ml(np.zeros((0, 0)))) == 0
    assert len(link_ml(np.zeros((3, 3)))) == 0


def test_ml_leaves_unscorable_egress_unmatched():
    a = link_ml([[0.5, 0.0, 0.2], [0.4, 0.0, 0.0]])
    assert 1 not in a.mapping
    assert a.mapping == {0: 1, 2: 0}


def random_score_matrix(rng):
    r, c = rng.integers(1, 7, size=2)
    s = rng.uniform(0.01, 1.0, size=(r, c))
    s[rng.random((r, c)) < rng.uniform(0, 0.5)] = 0.0
    return s


def test_ml_matches_enumeration():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        s = random_score_matrix(rng)
        a = link_ml(s)
        assert (len(a), a.log_score) == brute_force_ml(s)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
def test_ml_scale_invariant(seed, c):
    s = random_score_matrix(np.random.default_rng(seed))
    assert link_ml(s).pairs == link_ml(s * c).pairs


# -- mapping counts ------------------------------------------------------------

def test_count_small_cases():
    assert count_feasible_mappings(np.ones((3, 3))) == 6
    F = np.ones((3, 3))
    F[0, 0] = 0
    assert count_feasible_mappings(F) == 4
    assert count_feasible_mappings([[1]]) == 1
    assert count_feasible_mappings(np.ones((8, 8))) == math.factorial(8)


def test_count_too_large():
    with pytest.raises(TooLarge):
        count_feasible_mappings(np.ones((9, 9)))


def test_count_matches_enumeration():
    rng = np.random.default_rng(77)
    for _ in range(100):
        r, c = rng.integers(1, 7, size=2)
        F = rng.random((r, c)) < rng.uniform(0.2, 1.0)
        assert count_feasible_mappings(F) == brute_force_count(F)


# -- metrics -----------------------------------------------------------------------

def test_entropy_uniform_four():
    h, d = entropy_bits([0.25] * 4)
    assert h == pytest.approx(2.0)
    assert d == pytest.approx(1.0)


def test_entropy_two_of_four():
    h, d = entropy_bits([0.5, 0.5, 0, 0])
    assert h == pytest.approx(1.0)
    assert d == pytest.approx(1.0)


def test_entropy_example_row():
    # Independently: scipy.stats.entropy([0.00003, 0.898, 0.089, 0.0117], base=2) = 0.52436
    h, d = entropy_bits([0.00003, 0.898, 0.089, 0.0117])
    assert h == pytest.approx(0.52, abs=0.02)
    assert d == pytest.approx(0.26, abs=0.01)
    assert h == pytest.approx(0.5243640771991094, rel=1e-9)


def test_entropy_single_and_empty():
    assert entropy_bits([0, 0.7, 0]) == (0.0, 0.0)
    assert all(math.isnan(v) for v in entropy_bits([0, 0]))


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12))
def test_entropy_bounds(w):
    k = sum(1 for x in w if x > 0)
    h, d = entropy_bits(w)
    if k == 0:
        assert math.isnan(h)
    else:
        assert -1e-12 <= h <= math.log2(k) + 1e-9 if k > 1 else h == 0.0
        assert 0.0 <= d <= 1.0


def _single_entity_trace(with_decoys: bool):
    obs = [_o(0.0, 2, "ingress", "in0"), _o(15.0, 3, "egress", "out0")]
    truth = {"out0": "in0"}
    kinds = {"in0": Kind.REAL, "out0": Kind.REAL}
    if with_decoys:
        for k in range(3):
            obs += [_o(1.0 + k, 2, "ingress", f"vin{k}"), _o(14.0 + k, 3, "egress", f"vout{k}")]
            truth[f"vout{k}"] = f"vin{k}"
            kinds[f"vin{k}"] = kinds[f"vout{k}"] = Kind.VIRTUAL
    return Trace(tuple(sorted(obs)), truth, kinds, seed=0)


def test_attack_single_entity(example_p, tt):
    ml, greedy = attack(_single_entity_trace(False), example_p, tt)
    assert ml.linkage_accuracy == 1.0
    assert greedy.linkage_accuracy == 1.0
    assert ml.mean_entropy == 0.0
    assert ml.feasible_mapping_count == 1


def test_decoys_raise_entropy(example_p, tt):
    base = attack(_single_entity_trace(False), example_p, tt)[0]
    padded = attack(_single_entity_trace(True), example_p, tt)[0]
    assert padded.linkage_accuracy <= 1.0
    assert padded.mean_entropy > base.mean_entropy
    assert padded.mean_degree > base.mean_degree
    assert 0 <= padded.decoy_capture_rate <= 1


def test_links_to_decoys_count_as_failures(example_p, tt):
    trace = _single_entity_trace(True)
    sm = build_scores(trace.observations, example_p, tt)
    real_col = [o.pseudonym for o in sm.egress].index("out0")
    decoy_row = [o.pseudonym for o in sm.ingress].index("vin0")
    forced = type(link_ml(sm))(((decoy_row, real_col),), 0.0)
    rep = anonymity_metrics(sm, trace.ground_truth, trace.kinds, assignment=forced)
    assert rep.linkage_accuracy == 0.0
    assert rep.decoy_capture_rate == 1.0


def test_attack_settings_validation():
    with pytest.raises(ValueError):
        AdversarySettings(min_probability=2.0)
    with pytest.raises(ValueError):
        AdversarySettings(dwell=-1.0)


def test_truncnorm_scores(example_p):
    tn = TravelTime(10.0, 40.0, "truncnorm", mean=20.0, std=5.0)
    model = TravelTimeModel(tuple(tuple(tn for _ in range(4)) for _ in range(4)))
    near = score_pair(_o(0.0, 1, "ingress"), _o(20.0, 2, "egress"), example_p, model)
    far = score_pair(_o(0.0, 1, "ingress"), _o(38.0, 2, "egress"), example_p, model)
    assert near > far > 0
