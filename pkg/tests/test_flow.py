import numpy as np
import pytest

from geomonge.disintegration import ConditionalFamily, disintegrate, plan_families
from geomonge.errors import DivisionByZeroCell, MissingDensity, OrderViolation
from geomonge.flow import boundary, build_current, density_rho, solve_transport_equation
from geomonge.kantorovich import DiscreteMeasure, TransportPlan, solve_kantorovich
from geomonge.rays import ray_system_for, rays_from_plan
from geomonge.space import build_segment


@pytest.fixture
def unit_ray():
    sp = build_segment(11)
    return sp, rays_from_plan(sp, TransportPlan(11, [(0, 10, 1.0)]))


def family(rs, masses):
    return ConditionalFamily.from_masses(rs.all_rays(), masses)


def interval_family(rs, coef):
    """Family whose interval densities equal ``coef`` on ray 0 (for exact test fixtures)."""
    n = len(rs.rays[0])
    fam = family(rs, [np.full(n, 1.0 / n)])
    fam.densities[0] = np.asarray(coef, float)
    return fam


def test_constant_omega_zero(unit_ray):
    sp, rs = unit_ray
    cur = build_current(rs, disintegrate(DiscreteMeasure(np.full(11, 1 / 11)), rs))
    assert cur.action(np.random.default_rng(0).random(11), np.full(11, 3.0)) == 0.0
    assert cur.action(np.zeros(11), sp.labels[:, 0]) == 0.0


def test_unit_ray_length(unit_ray):
    sp, rs = unit_ray
    cur = build_current(rs, interval_family(rs, np.ones(11)))
    assert cur.action(np.ones(11), sp.labels[:, 0]) == pytest.approx(1.0)


def test_boundary_unit_q(unit_ray):
    sp, rs = unit_ray
    b = boundary(build_current(rs, interval_family(rs, np.ones(11))))
    expect = np.zeros(11)
    expect[0], expect[10] = -1, 1
    assert np.allclose(b.measure, expect)
    assert not b.interior.any()


def test_boundary_triangle(unit_ray):
    sp, rs = unit_ray
    q = np.r_[np.arange(6), np.arange(4, -1, -1)].astype(float)
    cur = build_current(rs, interval_family(rs, q))
    b = boundary(cur)
    c = cur.coef[0]
    peak = c.max()
    assert np.abs(b.interior).sum() == pytest.approx(2 * peak - c[0] - c[-1])
    assert b.endpoint[0] == pytest.approx(-c[0]) and b.endpoint[10] == pytest.approx(c[-1])
    # total variation of the zero-padded coefficients
    assert b.total_variation == pytest.approx(np.abs(np.diff(np.r_[0, c, 0])).sum())


def test_zero_quotient_mass(unit_ray):
    sp, rs = unit_ray
    fam = family(rs, [np.zeros(11)])
    assert not boundary(build_current(rs, fam)).measure.any()


def test_missing_density(unit_ray):
    sp, rs = unit_ray
    fam = family(rs, [np.ones(11)])
    fam.densities = None
    with pytest.raises(MissingDensity):
        build_current(rs, fam)


def test_translation_plateau(unit_ray):
    sp, rs = unit_ray
    plan = TransportPlan(11, [(i, i + 3, 0.25) for i in range(4)])
    fm, fn = plan_families(rs, plan)
    sol = solve_transport_equation(rs, fm, fn)
    assert sol.l1_norm == pytest.approx(plan.cost(sp))
    assert sol.stokes_defect <= 1e-12


def test_equal_measures_zero(unit_ray):
    sp, rs = unit_ray
    fam = family(rs, [np.full(11, 1 / 11)])
    sol = solve_transport_equation(rs, fam, fam)
    assert not np.any(sol.current.coef[0]) and sol.l1_norm == 0


def test_order_violation(unit_ray):
    sp, rs = unit_ray
    a = family(rs, [np.eye(11)[8]])
    b = family(rs, [np.eye(11)[2]])
    with pytest.raises(OrderViolation):
        solve_transport_equation(rs, a, b)


def test_stokes_random_single_ray():
    rng = np.random.default_rng(5)
    for _ in range(30):
        n = int(rng.integers(3, 15))
        sp = build_segment(n, length=float(rng.random() + 0.5))
        w, v = rng.random(n), rng.random(n)
        mu, nu = DiscreteMeasure(w / w.sum()), DiscreteMeasure(v / v.sum())
        plan = solve_kantorovich(sp, mu, nu)
        rs = ray_system_for(sp, plan)
        fm, fn = plan_families(rs, plan)
        sol = solve_transport_equation(rs, fm, fn)
        moved = sum(m * sp.dL[x, y] for x, y, m in plan.entries if x != y)
        assert sol.stokes_defect <= 1e-12
        assert sol.l1_norm == pytest.approx(moved, abs=1e-9)


def test_mass_bound():
    rng = np.random.default_rng(2)
    sp = build_segment(15)
    rs = rays_from_plan(sp, TransportPlan(15, [(0, 14, 1.0)]))
    cur = build_current(rs, disintegrate(DiscreteMeasure(rng.random(15) / 7.5), rs))
    for _ in range(20):
        h = rng.normal(size=15)
        omega = np.cumsum(rng.normal(size=15)) / 10
        assert abs(cur.action(h, omega)) <= cur.mass_bound(h, omega, sp.d) + 1e-12


def test_rho(unit_ray):
    sp, rs = unit_ray
    plan = TransportPlan(11, [(i, i + 3, 0.25) for i in range(4)])
    fm, fn = plan_families(rs, plan)
    U = solve_transport_equation(rs, fm, fn).current
    ones = interval_family(rs, np.ones(11))
    rho = density_rho(U, ones)
    assert np.allclose(rho[0], U.coef[0] * U.m[0])
    twos = interval_family(rs, np.full(11, 2.0))
    assert np.allclose(density_rho(U, twos)[0], U.coef[0] * U.m[0] / 2)
    holes = interval_family(rs, np.r_[np.ones(3), np.zeros(8)])
    with pytest.raises(DivisionByZeroCell) as ei:
        density_rho(U, holes)
    assert ei.value.details["cells"]
