from math import pi, sinh

import numpy as np
import pytest

from geomonge.disintegration import ConditionalFamily, cell_lengths, disintegrate
from geomonge.errors import DomainError
from geomonge.kantorovich import DiscreteMeasure, TransportPlan
from geomonge.mcp import (McpParams, c_K_bound, c_K_scaling, mcp_contract_check, s_K, total_variation, tv_bound,
                          verify_density_bounds, verify_tv_bound)
from geomonge.rays import rays_from_plan
from geomonge.scenarios import envelope_family
from geomonge.space import build_segment


@pytest.fixture(scope="module")
def seg_rays():
    sp = build_segment(21)
    return sp, rays_from_plan(sp, TransportPlan(21, [(0, 20, 1.0)]))


def test_s_K_branches():
    assert s_K(McpParams(0, 2), 3.7) == 3.7
    assert s_K(McpParams(1, 2), pi / 2) == pytest.approx(1.0, abs=1e-12)
    assert s_K(McpParams(-1, 2), 1.0) == pytest.approx(sinh(1.0), abs=1e-12)
    for K in (-1, 0, 1):
        assert s_K(McpParams(K), 0.0) == 0.0


def test_s_K_domain():
    with pytest.raises(DomainError):
        s_K(McpParams(1), pi)
    with pytest.raises(DomainError):
        s_K(McpParams(0), -0.1)
    with pytest.raises(ValueError):
        McpParams(0, 0.5)


def test_s_K_slope_and_K_limit():
    h = 1e-7
    for K in (-1, 0, 1):
        assert s_K(McpParams(K), h) / h == pytest.approx(1.0, abs=1e-6)
    for t in np.linspace(0, 10, 41):
        for K in (1e-6, -1e-6):
            gap = abs(s_K(McpParams(K), t) - t)
            # Taylor remainder of sin/sinh; the flat 1e-5 only holds up to t ~ 3.9
            assert gap <= abs(K) * t**3 / 6 * (1 + abs(K) * t**2 / 10) + 1e-12
            if t <= 3:
                assert gap <= 1e-5


def test_c_K_closed_forms():
    for t in (0.1, 0.5, 1.0, 3.0):
        assert c_K_bound(McpParams(0, 1), t) == pytest.approx(1 / t, rel=1e-8)
        assert c_K_bound(McpParams(0, 2), t) == pytest.approx(2 / t, rel=1e-8)


def test_c_K_scaling_bounded():
    mesh = np.geomspace(1e-4, 2.0, 30)
    for K in (-1, 0, 1):
        for N in (1, 2, 3.5):
            C = c_K_scaling(McpParams(K, N), mesh)
            assert np.isfinite(C) and C < 10


def test_uniform_N1_passes(seg_rays):
    sp, rs = seg_rays
    fam = disintegrate(DiscreteMeasure(np.full(21, 1 / 21)), rs)
    rep = verify_density_bounds(rs, fam, McpParams(0, 1))
    assert rep.passed and rep.violations == []


def test_target_mode_equality(seg_rays):
    sp, rs = seg_rays
    fam = disintegrate(DiscreteMeasure(np.full(21, 1 / 21)), rs)
    assert verify_density_bounds(rs, fam, McpParams(0, 1), target=20).passed


@pytest.mark.parametrize("K", [-1.0, 0.0, 1.0])
@pytest.mark.parametrize("N", [1.0, 2.0, 3.0, 4.5])
def test_envelope_passes(seg_rays, K, N):
    sp, rs = seg_rays
    p = McpParams(K, N)
    fam = envelope_family(rs, p)
    assert verify_density_bounds(rs, fam, p).passed
    assert verify_tv_bound(fam, rs, p).passed


def test_interior_zero_untestable(seg_rays):
    sp, rs = seg_rays
    w = np.full(21, 1 / 20)
    w[10] = 0
    fam = disintegrate(DiscreteMeasure(w), rs)
    rep = verify_density_bounds(rs, fam, McpParams(0, 1))
    assert rep.passed and rep.untestable == 20


def test_sawtooth_fails_both(seg_rays):
    sp, rs = seg_rays
    w = np.where(np.arange(21) % 2, 1.0, 20.0)
    fam = ConditionalFamily.from_masses(rs.all_rays(), [w / w.sum()])
    p = McpParams(0, 2)
    assert not verify_density_bounds(rs, fam, p).passed
    assert not verify_tv_bound(fam, rs, p).passed


def test_tv_constant():
    assert total_variation(np.ones(7)) == 0
    # l = 1/2: 2 (1 + 2 (1/(1/2) - 1)) c_0(1) = 6
    assert tv_bound(McpParams(0, 1), 1.0) == pytest.approx(6.0)


def test_contraction_lebesgue(seg_rays):
    sp, _ = seg_rays
    eta = DiscreteMeasure(np.full(21, 1 / 21))
    res = mcp_contract_check(sp, eta, 0, range(21), [0.0, 0.3, 0.5, 1.0], McpParams(0, 1))
    assert res.passed
    assert res.table[0]["max_excess"] <= 1 / 21
    # at t=1 every point maps to itself: tight
    assert res.table[-1]["max_excess"] == pytest.approx(0.0, abs=1e-15)


def test_contraction_fails_on_heavy_origin_side():
    sp = build_segment(11)
    w = np.r_[np.zeros(5), np.full(6, 1 / 6)]
    res = mcp_contract_check(sp, DiscreteMeasure(w), 0, range(11), [0.5], McpParams(0, 1))
    assert not res.passed
