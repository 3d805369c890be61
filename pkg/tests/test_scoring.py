import math

import numpy as np
import pytest

from topoprune.scoring import (
    EffectiveInterval,
    activity,
    aggregate_consistency,
    analytic_mass,
    build_epi,
    consistency_matrix,
    cosine_baseline,
    plan_overlap,
    project_intervals,
    prune_plan,
)
from topoprune.zigzag import PersistenceInterval


def eff(p, b, d):
    return EffectiveInterval(p=p, birth_layer=b, death_layer=d)


def iv(b, d, p=0):
    return PersistenceInterval(p=p, birth=b, death=d)


# -- projection ----------------------------------------------------------------

def test_projection_layer_spaces():
    out = project_intervals([iv(1, 5)], 3)
    assert out == [eff(0, 1, 3)]
    assert out[0].tau == 2


def test_projection_rounds_outward_at_intersections():
    assert project_intervals([iv(2, 4)], 3) == [eff(0, 1, 3)]
    assert project_intervals([iv(2, 2)], 2) == [eff(0, 1, 2)]


def test_projection_never_shortens():
    rng = np.random.default_rng(0)
    for _ in range(200):
        L = int(rng.integers(2, 9))
        b = int(rng.integers(1, 2 * L))
        d = int(rng.integers(b, 2 * L))
        e = project_intervals([iv(b, d)], L)[0]
        assert 1 <= e.birth_layer <= e.death_layer <= L
        assert (e.death_layer - e.birth_layer) * 2 >= d - b - 1


def test_projection_rejects_out_of_range():
    with pytest.raises(ValueError):
        project_intervals([iv(1, 6)], 3)


# -- raster --------------------------------------------------------------------

def test_single_gaussian_peaks_at_its_center():
    raster = build_epi([eff(1, 2, 5)], 6, 1)
    am = np.unravel_index(np.argmax(raster.cells), raster.cells.shape)
    assert raster.u_centers[am[0]] == 2.0
    assert raster.v_centers[am[1]] == 3.0


def test_mass_identity_within_two_percent():
    effs = [eff(0, 1, 8), eff(0, 2, 3), eff(0, 5, 6), eff(0, 3, 5), eff(0, 2, 2)]
    raster = build_epi(effs, 8, 0)
    mass = raster.total_mass() * raster.cell_size ** 2
    expected = analytic_mass(raster)
    assert abs(mass - expected) / expected < 0.02


def test_sigma_formula_matches_fraction_of_range():
    raster = build_epi([eff(0, 1, 11)], 12, 0, sigma_scale=0.1)
    assert raster.sigma == pytest.approx(1.0)


def test_sigma_floor_on_degenerate_range():
    raster = build_epi([eff(0, 2, 2)], 4, 0)
    assert raster.sigma == pytest.approx(1e-6)


def test_empty_dimension_flagged_zero_raster():
    raster = build_epi([eff(0, 1, 2)], 4, 1)
    assert raster.empty
    assert raster.total_mass() == 0.0


def test_weight_ramp_vanishes_on_zero_persistence():
    raster = build_epi([eff(0, 2, 2), eff(0, 1, 4)], 4, 0)
    assert raster.weights.tolist() == [0.0, 1.0]


def test_cells_nonnegative_and_padded():
    raster = build_epi([eff(0, 1, 4), eff(0, 2, 4)], 4, 0)
    assert (raster.cells >= 0).all()
    assert raster.u_centers[0] <= 1 - 4 * raster.sigma
    assert raster.u_centers[-1] >= 4 + 4 * raster.sigma
    assert raster.v_centers[-1] >= 3 + 4 * raster.sigma


# -- activity ------------------------------------------------------------------

def test_activity_concentrates_on_narrow_feature():
    raster = build_epi([eff(0, 2, 5)], 6, 0)  # sigma = 0.3, well under spacing
    act, z, fallback = activity({0: raster})
    assert not fallback
    assert act[1] > 0.99
    assert act.sum() == pytest.approx(1.0, abs=1e-9)


def test_activity_symmetry():
    raster = build_epi([eff(0, 1, 2), eff(0, 3, 4)], 3, 0)
    act, _, _ = activity({0: raster})
    assert act[0] == pytest.approx(act[2], abs=1e-9)
    assert act.sum() == pytest.approx(1.0, abs=1e-9)


def test_activity_uniform_fallback_on_empty():
    raster = build_epi([], 5, 0)
    act, z, fallback = activity({0: raster})
    assert fallback
    assert np.allclose(act, 0.2)


# -- consistency ---------------------------------------------------------------

def test_consistency_rows_sum_to_one():
    effs = [eff(0, 1, 3), eff(0, 2, 4), eff(0, 2, 2)]
    raster = build_epi(effs, 4, 0)
    S, defined = consistency_matrix(raster, 4)
    for row, ok in zip(S, defined):
        if ok:
            assert row.sum() == pytest.approx(1.0, abs=1e-9)
        else:
            assert row.sum() == 0.0


def test_consistency_single_feature_reaches_death_layer():
    raster = build_epi([eff(0, 1, 3)], 3, 0)  # tight sigma via degenerate range
    S, defined = consistency_matrix(raster, 3)
    assert defined[0]
    assert S[0, 2] > S[0, 0] and S[0, 2] > S[0, 1]


def test_consistency_undefined_row_flagged():
    raster = build_epi([eff(0, 2, 2)], 8, 0)  # dirac at (2, 0), sigma floor
    S, defined = consistency_matrix(raster, 8)
    assert defined[1]
    assert not defined[6]
    assert S[6].sum() == 0.0


def test_consistency_zero_below_diagonal():
    raster = build_epi([eff(0, 1, 3), eff(0, 3, 4)], 4, 0)
    S, _ = consistency_matrix(raster, 4)
    for ell in range(4):
        for ell2 in range(ell):
            assert S[ell, ell2] == 0.0


# -- aggregation ---------------------------------------------------------------

def test_aggregate_alpha_zero_is_mean():
    S = np.array([[0.2, 0.5, 0.3], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    defined = np.array([True, True, True])
    out = aggregate_consistency(S, defined, 0.0)
    assert out[0] == pytest.approx((0.5 + 0.3) / 2)
    assert out[1] == pytest.approx(0.0)


def test_aggregate_point_mass_next_layer():
    # two layers: the one off-diagonal term carries all the weight
    S = np.zeros((2, 2))
    S[0, 1] = 1.0
    defined = np.array([True, False])
    for alpha in (0.0, 1.0, 2.5):
        out = aggregate_consistency(S, defined, alpha)
        assert out[0] == pytest.approx(1.0)
        assert out[1] == 0.0


def test_aggregate_rejects_negative_alpha():
    with pytest.raises(ValueError):
        aggregate_consistency(np.eye(2), np.array([True, True]), -1.0)


def test_aggregate_bounded_unit_interval():
    rng = np.random.default_rng(3)
    for _ in range(20):
        raw = rng.random((5, 5))
        S = raw / raw.sum(axis=1, keepdims=True)
        out = aggregate_consistency(S, np.ones(5, dtype=bool), float(rng.uniform(0, 3)))
        assert ((out >= 0) & (out <= 1)).all()


# -- pruning -------------------------------------------------------------------

def scores_fixture():
    return {0: np.array([0.1, 0.5, 0.9, 0.4, 0.2, 0.05]),
            1: np.array([0.0, 0.3, 0.2, 0.8, 0.1, 0.0])}


def test_threshold_epsilon_one_keeps_argmax_only():
    plan = prune_plan(scores_fixture(), mode="threshold", epsilon=1.0)
    assert plan.pruned == (3,)


def test_threshold_monotone_nested():
    prev = set()
    for epsilon in [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1]:
        plan = prune_plan(scores_fixture(), mode="threshold", epsilon=epsilon)
        assert prev <= set(plan.pruned)
        prev = set(plan.pruned)


def test_threshold_protects_endpoints():
    s = {0: np.array([1.0, 0.1, 0.1, 1.0])}
    plan = prune_plan(s, mode="threshold", epsilon=0.5)
    assert plan.pruned == ()
    unprotected = prune_plan(s, mode="threshold", epsilon=0.5, protect_endpoints=False)
    assert unprotected.pruned == (1, 4)


def test_sparsity_exact_cardinality():
    rng = np.random.default_rng(8)
    for L, target in [(32, 0.5), (28, 0.6), (8, 0.375), (10, 0.2)]:
        s = {0: rng.random(L)}
        plan = prune_plan(s, mode="sparsity", target_sparsity=target)
        assert len(plan.pruned) == math.floor(target * L)
        assert 1 not in plan.pruned and L not in plan.pruned


def test_sparsity_ties_prune_deeper_first():
    s = {0: np.array([0.0, 0.5, 0.5, 0.5, 0.0])}
    plan = prune_plan(s, mode="sparsity", target_sparsity=0.4)
    assert plan.pruned == (3, 4)


def test_sparsity_backfills_past_protected():
    # top scores sit on protected endpoints; backfill keeps cardinality
    s = {0: np.array([1.0, 0.1, 0.2, 0.3, 1.0])}
    plan = prune_plan(s, mode="sparsity", target_sparsity=0.4)
    assert len(plan.pruned) == 2
    assert plan.pruned == (3, 4)


def test_combined_is_dominant_dimension():
    plan = prune_plan(scores_fixture(), mode="threshold", epsilon=1.0)
    assert plan.combined_scores.tolist() == [0.1, 0.5, 0.9, 0.8, 0.2, 0.05]


def test_prune_plan_validation():
    with pytest.raises(ValueError):
        prune_plan(scores_fixture(), mode="threshold", epsilon=0.0)
    with pytest.raises(ValueError):
        prune_plan(scores_fixture(), mode="sparsity", target_sparsity=1.0)
    with pytest.raises(ValueError):
        prune_plan(scores_fixture(), mode="nope")


# -- overlap ---------------------------------------------------------------------

def make_plan(pruned, L=8):
    plan = prune_plan({0: np.zeros(L)}, mode="sparsity", target_sparsity=0.0)
    plan.pruned = tuple(pruned)
    return plan


def test_overlap_identical_and_disjoint():
    assert plan_overlap(make_plan([3, 4]), make_plan([3, 4])) == 1.0
    assert plan_overlap(make_plan([2, 3]), make_plan([5, 6])) == 0.0
    assert plan_overlap(make_plan([]), make_plan([])) == 1.0


def test_overlap_jaccard_value():
    assert plan_overlap(make_plan([3, 4]), make_plan([4, 5])) == pytest.approx(1 / 3)


def test_overlap_reference_mode():
    assert plan_overlap(make_plan([3, 4]), make_plan([4, 5]),
                        mode="reference") == pytest.approx(0.5)


def test_overlap_rejects_mismatched_layers():
    with pytest.raises(ValueError):
        plan_overlap(make_plan([1], L=8), make_plan([1], L=6))


# -- cosine baseline -------------------------------------------------------------

def test_cosine_identical_and_negated():
    rng = np.random.default_rng(4)
    base = rng.normal(size=(5, 16))
    coords = np.stack([base, base, -base])
    scores, defined = cosine_baseline(coords)
    assert defined.all()
    assert scores[0] == pytest.approx(1.0)
    assert scores[1] == pytest.approx(-1.0)


def test_cosine_orthogonal_random_concentrates_near_zero():
    rng = np.random.default_rng(5)
    d = 256
    coords = rng.normal(size=(2, 64, d))
    scores, defined = cosine_baseline(coords)
    assert defined[0]
    assert abs(scores[0]) < 5 / math.sqrt(d)


def test_cosine_skips_zero_norm_tokens():
    coords = np.zeros((2, 3, 4))
    coords[0, 0] = [1, 0, 0, 0]
    coords[1, 0] = [1, 0, 0, 0]
    scores, defined = cosine_baseline(coords)
    assert defined[0]
    assert scores[0] == pytest.approx(1.0)
    all_zero = np.zeros((2, 2, 3))
    scores2, defined2 = cosine_baseline(all_zero)
    assert not defined2[0]
