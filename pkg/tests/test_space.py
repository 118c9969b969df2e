import numpy as np
import pytest

from geomonge.errors import AmbiguousGeodesic, InfiniteDistance
from geomonge.space import (FiniteGeodesicSpace, build_counterexample_space, build_segment, counterexample_maps,
                            counterexample_sets, geodesic_between, rational_alpha, validate_structure)


def test_segment_examples():
    s = build_segment(2, 1.0)
    assert s.d[0, 1] == s.dL[0, 1] == 1.0
    s = build_segment(5, 1.0)
    assert s.dL[0, 1] == pytest.approx(0.25) and s.dL[0, 4] == 1.0
    s = build_segment(3, 2.0)
    assert s.dL[0, 1] + s.dL[1, 2] == s.dL[0, 2] == 2.0


@pytest.mark.parametrize("bad", [0, 1, 2.5])
def test_segment_rejects(bad):
    with pytest.raises(ValueError):
        build_segment(bad)


def test_space_is_read_only(seg5):
    with pytest.raises(ValueError):
        seg5.dL[0, 1] = 3.0


def test_validate_segment_clean():
    for n in (2, 5, 17, 64, 200):
        rep = validate_structure(build_segment(n))
        assert rep.triangle_ok and not rep.additivity_violations and rep.non_branching
        assert len(rep.finite_components) == 1


def test_y_space_branches(y_space):
    rep = validate_structure(y_space)
    assert not rep.non_branching
    w = rep.branching_witnesses[0]
    assert len(w) == 4


def test_triangle_violation_reported():
    D = np.array([[0, 1, 5.0], [1, 0, 1], [5.0, 1, 0]])
    rep = validate_structure(FiniteGeodesicSpace(D, D))
    assert not rep.triangle_ok and rep.additivity_violations


def test_geodesic_segment(seg5):
    g = geodesic_between(seg5, 0, 4)
    assert g.points == (0, 1, 2, 3, 4)
    assert g.params == pytest.approx((0, 0.25, 0.5, 0.75, 1.0))
    assert geodesic_between(seg5, 2, 2).points == (2,)
    back = geodesic_between(seg5, 4, 0)
    assert back.points == g.reversed().points
    assert back.params == pytest.approx(g.reversed().params)


def test_geodesic_errors():
    D = np.array([[0, 1.0], [1.0, 0]])
    L = np.array([[0, np.inf], [np.inf, 0]])
    with pytest.raises(InfiniteDistance):
        geodesic_between(FiniteGeodesicSpace(D, L), 0, 1)
    # a 4-cycle: two incomparable chains between opposite corners
    C = np.array([[0, 1, 2, 1], [1, 0, 1, 2], [2, 1, 0, 1], [1, 2, 1, 0.0]])
    with pytest.raises(AmbiguousGeodesic):
        geodesic_between(FiniteGeodesicSpace(C, C), 0, 2)


def test_rational_alpha():
    assert rational_alpha(64) == 39
    assert rational_alpha(5) == 3


def test_counterexample_space(cx_space):
    sp = cx_space
    m = sp.meta
    ci = m["c_index"]
    rate = m["rate"]
    M = m["strip_res"]
    # neighbours on one line in the lower half cost the base rate
    assert sp.dL[ci[0, 1], ci[0, 2]] == pytest.approx(rate / M, rel=1e-9)
    # the upper half costs four times as much
    assert sp.dL[ci[0, M - 2], ci[0, M - 1]] == pytest.approx(4 * rate / M, rel=1e-9)
    assert np.all(np.diag(sp.dL) == 0)
    fin = np.isfinite(sp.dL)
    assert np.all(sp.dL[fin] >= sp.d[fin] - 1e-12)


def test_counterexample_maps_cost_ratio(cx_space):
    A, B = counterexample_sets(cx_space)
    plus, minus = counterexample_maps(cx_space)
    assert set(plus) == set(minus) == set(A)
    assert set(plus.values()) == set(minus.values()) <= set(B)
    cp = sum(cx_space.dL[a, plus[a]] for a in A)
    cm = sum(cx_space.dL[a, minus[a]] for a in A)
    assert cp / cm == pytest.approx(1.5, rel=1e-9)


def test_counterexample_components():
    glued = build_counterexample_space(8, glue=True)
    cut = build_counterexample_space(8, glue=False)
    assert len(validate_structure(glued).finite_components) == 1
    assert len(validate_structure(cut).finite_components) > 1


def test_counterexample_rejects_coarse():
    with pytest.raises(ValueError):
        build_counterexample_space(8, strip_res=12)
