import numpy as np
import pytest

from geomonge.disintegration import (cell_lengths, check_equintegrability, check_regularity, disintegrate,
                                     evolution_profile, evolve_set)
from geomonge.errors import MassOffRays
from geomonge.kantorovich import DiscreteMeasure, TransportPlan
from geomonge.rays import rays_from_plan
from geomonge.scenarios import segment_levels
from geomonge.space import build_segment


@pytest.fixture
def ray5(seg5):
    return rays_from_plan(seg5, TransportPlan(5, [(0, 4, 1.0)]))


def two_rays():
    sp = build_segment(10)
    return sp, rays_from_plan(sp, TransportPlan(10, [(0, 3, 0.5), (6, 9, 0.5)]))


def test_cells():
    assert cell_lengths([0, 0.25, 0.5, 0.75, 1.0]) == pytest.approx([0.25] * 5)
    assert cell_lengths([0, 1, 3]) == pytest.approx([1, 1.5, 2])


def test_uniform_single_ray(ray5):
    fam = disintegrate(DiscreteMeasure(np.full(5, 0.2)), ray5)
    assert fam.m.tolist() == [1.0]
    assert fam.conditionals[0] == pytest.approx([0.2] * 5)
    assert fam.densities[0] == pytest.approx([0.8] * 5)
    assert fam.H[0] == pytest.approx([0, 0.2, 0.4, 0.6, 0.8])
    assert fam.endpoint_mass == pytest.approx(0.4)


def test_dirac_spike(ray5):
    fam = disintegrate(DiscreteMeasure.from_atoms(5, {2: 1.0}), ray5)
    assert np.count_nonzero(fam.densities[0]) == 1


def test_two_ray_masses():
    sp, rs = two_rays()
    mu = DiscreteMeasure.from_atoms(10, {1: 0.3, 7: 0.7})
    fam = disintegrate(mu, rs)
    assert fam.m == pytest.approx([0.3, 0.7])
    assert np.allclose(fam.reassemble(10), mu.weights)


def test_mass_off_rays():
    sp, rs = two_rays()
    mu = DiscreteMeasure.from_atoms(10, {4: 1.0})
    with pytest.raises(MassOffRays):
        disintegrate(mu, rs)
    assert disintegrate(mu, rs, strict=False).off_ray_mass == 1.0


def test_evolve_examples(ray5):
    assert evolve_set([0, 1], 0.25, ray5).points == (1, 2)
    assert evolve_set([0, 1], 0.0, ray5).points == (0, 1)
    ev = evolve_set([0, 1], 1.5, ray5)
    assert ev.points == () and ev.dropped == 2


def test_evolve_composition(ray5):
    for s in (0.0, 0.25, 0.5):
        for t in (0.25, 0.5):
            lhs = evolve_set(evolve_set([0, 1, 2], s, ray5).points, t, ray5).points
            assert set(lhs) <= set(evolve_set([0, 1, 2], s + t, ray5).points)


def test_initial_point_evolutions_disjoint(ray5):
    A = [ray5.a_map[2]]
    ts = [0.0, 0.25, 0.5, 0.75]
    sets = [set(evolve_set(A, t, ray5).points) for t in ts]
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            assert not sets[i] & sets[j]


def test_profile_decays(ray5):
    mu = DiscreteMeasure(np.full(5, 0.2))
    prof = evolution_profile(range(5), mu, ray5, np.linspace(0, 1.25, 6))
    assert np.all(np.diff(prof.masses) <= 1e-15)
    assert prof.masses[0] == pytest.approx(1.0) and prof.masses[-1] == 0
    assert evolution_profile([], mu, ray5, [0, 0.5]).masses.tolist() == [0, 0]


def test_regularity_uniform_and_dirac():
    rep = check_regularity(segment_levels())
    assert rep.passed
    assert all(r["atom_max"] == 1.0 / r["n"] for r in rep.levels)
    bad = check_regularity(segment_levels(dirac=True))
    assert not bad.passed and not bad.atoms_ok


def test_regularity_linear_density():
    levels = []
    for n in (10, 20, 40, 80):
        sp = build_segment(n)
        x = sp.labels[:, 0]
        w = 2 * x * cell_lengths(x)
        rs = rays_from_plan(sp, TransportPlan(n, [(0, n - 1, 1.0)]))
        levels.append((sp, disintegrate(DiscreteMeasure(w / w.sum()), rs)))
    rep = check_regularity(levels)
    assert rep.passed
    assert rep.levels[-1]["density_sup"] == pytest.approx(2.0, rel=0.1)


def test_equintegrability():
    eps = [0.05, 0.1, 0.5]
    deltas = [0.001, 0.01, 0.05, 0.1, 0.5]
    flat = [(np.full(n, 1 / n), np.ones(n)) for n in (10, 100)]
    res = check_equintegrability(flat, eps, deltas)
    assert res.passed and res.deltas[0.05] == 0.05
    spikes = []
    for n in (10, 100, 1000, 10000):
        r = np.zeros(n)
        r[0] = n
        spikes.append((np.full(n, 1 / n), r))
    res = check_equintegrability(spikes, [0.5], deltas)
    assert not res.passed and res.witness["cells"][0] == 0
    bounded = [(np.full(n, 1 / n), 1 + np.arange(n) % 3) for n in (9, 90)]
    res = check_equintegrability(bounded, [0.3], [0.1, 0.2])
    assert res.deltas[0.3] == 0.1
