import numpy as np
import pytest

from geomonge.errors import MassMismatch, ParamUndefined
from geomonge.kantorovich import DiscreteMeasure, TransportPlan, solve_kantorovich
from geomonge.monge import assemble_monge_map, fix_common_mass, monotone_rearrangement_1d, verify_cost_identity
from geomonge.rays import ray_system_for, rays_from_plan
from geomonge.space import build_segment


def test_translation():
    s = np.array([0, 0.25, 0.5, 0.75, 1])
    r = monotone_rearrangement_1d((s, np.full(5, 0.2)), (s + 2, np.full(5, 0.2)))
    assert r.is_pure_map and r.mapping == {i: i for i in range(5)}
    assert r.cost == pytest.approx(2.0)


def test_two_atoms_monotone_choice():
    r = monotone_rearrangement_1d(([0, 1], [0.5, 0.5]), ([2, 5], [0.5, 0.5]))
    assert r.mapping == {0: 0, 1: 1} and r.cost == pytest.approx(3.0)


def test_forced_split():
    r = monotone_rearrangement_1d(([0], [1.0]), ([1, 3], [0.5, 0.5]))
    assert not r.is_pure_map and r.cost == pytest.approx(2.0)
    assert [(i, j) for i, j, _ in r.pairs] == [(0, 0), (0, 1)]


def test_mass_mismatch():
    with pytest.raises(MassMismatch):
        monotone_rearrangement_1d(([0], [1.0]), ([1], [0.5]))


def test_single_ray_matches_1d():
    sp = build_segment(11)
    mu = DiscreteMeasure.from_atoms(11, {0: 0.5, 2: 0.5})
    nu = DiscreteMeasure.from_atoms(11, {6: 0.25, 9: 0.75})
    plan = solve_kantorovich(sp, mu, nu)
    rs = ray_system_for(sp, plan)
    tm = assemble_monge_map(rs, mu, nu, plan)
    x = sp.labels[:, 0]
    ref = monotone_rearrangement_1d((x[[0, 2]], [0.5, 0.5]), (x[[6, 9]], [0.25, 0.75]))
    assert tm.cost == pytest.approx(ref.cost)
    assert tm.is_pure_map == ref.is_pure_map
    assert all(tm.forward)
    assert tm.split_mass == pytest.approx(0.25)
    assert np.allclose(tm.coupling.right_marginal.weights, nu.weights)


def test_identity_map():
    sp = build_segment(6)
    mu = DiscreteMeasure(np.full(6, 1 / 6))
    plan = solve_kantorovich(sp, mu, mu)
    rs = ray_system_for(sp, plan)
    tm = assemble_monge_map(rs, mu, mu, plan)
    assert tm.cost == 0 and tm.is_pure_map and all(x == y for x, y in tm.assignment.items())
    assert verify_cost_identity(rs, tm)[:2] == (0.0, 0.0)


def test_cost_identity_translation():
    sp = build_segment(9)
    plan = TransportPlan(9, [(i, i + 3, 1 / 6) for i in range(6)])
    rs = rays_from_plan(sp, plan)
    lhs, rhs, defect = verify_cost_identity(rs, plan)
    assert lhs == pytest.approx(6 * (3 / 8) / 6) and defect < 1e-12


def test_cost_identity_random_single_ray():
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = int(rng.integers(3, 11))
        sp = build_segment(n)
        w = rng.random(n)
        v = rng.random(n)
        mu = DiscreteMeasure(w / w.sum())
        nu = DiscreteMeasure(v / v.sum())
        plan = solve_kantorovich(sp, mu, nu)
        rs = ray_system_for(sp, plan)
        assert verify_cost_identity(rs, plan)[2] < 1e-9
        assert verify_cost_identity(rs, assemble_monge_map(rs, mu, nu, plan))[2] < 1e-9


def test_param_undefined():
    sp = build_segment(10)
    rs = rays_from_plan(sp, TransportPlan(10, [(0, 3, 1.0)]))
    with pytest.raises(ParamUndefined):
        verify_cost_identity(rs, TransportPlan(10, [(6, 8, 1.0)]))


def test_common_mass_examples():
    sp = build_segment(12)
    mu = DiscreteMeasure(np.r_[np.full(8, 1 / 8), np.zeros(4)])
    nu = DiscreteMeasure(np.r_[np.zeros(4), np.full(8, 1 / 8)])
    plan = solve_kantorovich(sp, mu, nu)
    rs = ray_system_for(sp, plan)
    fixed = fix_common_mass(rs, plan)
    assert fixed.cost_cache == pytest.approx(plan.cost_cache, abs=1e-12)
    assert np.allclose(fixed.diagonal_mass(), np.minimum(mu.weights, nu.weights))
    assert np.allclose(fixed.left_marginal.weights, mu.weights)
    assert np.allclose(fixed.right_marginal.weights, nu.weights)


def test_common_mass_equal_measures():
    sp = build_segment(5)
    mu = DiscreteMeasure(np.full(5, 0.2))
    # an equal-cost plan that moves mass around instead of leaving it
    plan = TransportPlan(5, [(0, 1, 0.2), (1, 2, 0.2), (2, 3, 0.2), (3, 4, 0.2), (4, 0, 0.0), (4, 4, 0.2)])
    plan = TransportPlan(5, [(0, 1, 0.2), (1, 2, 0.2), (2, 3, 0.2), (3, 4, 0.2), (4, 4, 0.2)])
    nu = plan.right_marginal
    rs = rays_from_plan(sp, plan)
    fixed = fix_common_mass(rs, plan)
    assert np.allclose(fixed.diagonal_mass(), np.minimum(mu.weights, nu.weights))
    assert fixed.cost_cache == pytest.approx(plan.cost(sp))
