"""Measure-contraction checks along rays: s_K, density-ratio and TV bounds."""

from dataclasses import dataclass, field
from math import pi, sin, sinh, sqrt

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, EndpointMissing
from .space import geodesic_between


@dataclass(frozen=True)
class McpParams:
    K: float = 0.0
    N: float = 1.0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")

    @property
    def horizon(self):
        return pi / sqrt(self.K) if self.K > 0 else np.inf


def s_K(params, t):
    """Comparison sine: sin, identity or sinh branch by the sign of K."""
    K = float(params.K)
    t = float(t)
    if t < 0:
        raise DomainError(f"s_K needs t >= 0, got {t}")
    if K > 0:
        if t >= pi / sqrt(K):
            raise DomainError(f"t={t} outside [0, pi/sqrt(K)) for K={K}", t=t, K=K)
        return sin(sqrt(K) * t) / sqrt(K)
    if K == 0:
        return t
    return sinh(sqrt(-K) * t) / sqrt(-K)


def _pow_ratio(num, den, e):
    """(num/den)^e with 0/0 = 1 and x^0 = 1."""
    if e == 0:
        return 1.0
    if den == 0:
        return 1.0 if num == 0 else np.inf
    return (num / den) ** e


def c_K_bound(params, t, rtol=1e-10):
    """c_K(t) = s_K(t/2)^(N-1) / 2 / int_0^{t/2} s_K^(N-1)."""
    if t <= 0:
        raise DomainError("c_K needs t > 0")
    if t >= params.horizon:
        raise DomainError(f"t={t} outside the s_K domain", t=t)
    e = params.N - 1
    integral, _ = quad(lambda u: s_K(params, u) ** e, 0.0, t / 2, epsabs=0.0, epsrel=rtol, limit=200)
    return s_K(params, t / 2) ** e / 2 / integral


def c_K_scaling(params, ts):
    """max t * c_K(t) over ``ts``: the constant C in c_K(t) <= C / t."""
    return max(t * c_K_bound(params, t) for t in ts)


@dataclass
class McpReport:
    passed: bool
    rays: list
    violations: list
    untestable: int = 0
    notes: list = field(default_factory=list)

    def to_json(self):
        return {"passed": self.passed, "rays": self.rays, "violations": self.violations[:50],
                "n_violations": len(self.violations), "untestable": self.untestable}


def _ray_ends(rs, k):
    ray = rs.all_rays()[k]
    inner = [p for p in ray.points if p in rs.T_points]
    if k < len(rs.rays) and inner:
        a = rs.a_map.get(inner[0])
        b = rs.b_map.get(inner[0])
        if a is None or b is None:
            raise EndpointMissing(f"ray {k} lacks an initial or final point", ray=k)
    return ray


def verify_density_bounds(rs, q_family, params, target=None, tol=1e-6):
    """Two-sided density-ratio bounds along every ray with mass.

    For params s < t on a ray with ends a, b:
        (s_K(b - t) / s_K(b - s))^(N-1) <= q(t)/q(s) <= (s_K(t - a) / s_K(s - a))^(N-1)
    within a multiplicative slack ``1 + tol``. With ``target`` (a point index)
    only the lower bound is checked, with distances measured to the target.
    Pairs with a zero density are counted as untestable.
    """
    e = params.N - 1
    space = rs.space
    rows, viol = [], []
    untestable = 0
    for k in range(q_family.n_rays):
        if q_family.m[k] <= 0:
            continue
        _ray_ends(rs, k)
        t = np.asarray(q_family.params[k])
        q = np.asarray(q_family.densities[k])
        pts = q_family.points[k]
        if target is None:
            da = t - t[0]
            db = t[-1] - t
        else:
            db = space.dL[list(pts), target]
            da = None
        sk_b = [s_K(params, max(v, 0.0)) for v in db]
        sk_a = None if da is None else [s_K(params, max(v, 0.0)) for v in da]
        worst = 0.0
        for i in range(t.size):
            for j in range(i + 1, t.size):
                if q[i] <= 0 or q[j] <= 0:
                    untestable += 1
                    continue
                ratio = q[j] / q[i]
                lo = _pow_ratio(sk_b[j], sk_b[i], e)
                hi = np.inf if sk_a is None else _pow_ratio(sk_a[j], sk_a[i], e)
                if target is not None and db[j] <= 0:
                    continue
                gap = max(lo / ratio, ratio / hi if np.isfinite(hi) else 0.0)
                worst = max(worst, gap)
                if gap > 1 + tol:
                    viol.append({"ray": k, "i": i, "j": j, "ratio": ratio, "lower": lo, "upper": hi})
        rows.append({"ray": k, "worst_gap": worst})
    return McpReport(not viol, rows, viol, untestable)


def total_variation(q):
    return float(np.abs(np.diff(np.asarray(q))).sum())


def tv_bound(params, length):
    """2 (1 + 2 (s_K(2l)/s_K(l) - 1)) c_K(2l) with l half the ray length."""
    l = length / 2
    return 2 * (1 + 2 * (s_K(params, 2 * l) / s_K(params, l) - 1)) * c_K_bound(params, 2 * l)


def verify_tv_bound(q_family, rs, params):
    """Total variation of each normalized conditional density against the assembled bound."""
    rows, viol = [], []
    for k in range(q_family.n_rays):
        if q_family.m[k] <= 0:
            continue
        _ray_ends(rs, k)
        t = q_family.params[k]
        length = float(t[-1] - t[0])
        tv = total_variation(q_family.densities[k])
        bound = tv_bound(params, length)
        rows.append({"ray": k, "tv": tv, "bound": bound})
        if tv > bound * (1 + 1e-9):
            viol.append({"ray": k, "tv": tv, "bound": bound})
    return McpReport(not viol, rows, viol)


@dataclass
class ContractionResult:
    passed: bool
    table: list
    max_snap: float


def mcp_contract_check(space, eta, x_bar, A, ts, params, tol=1e-9):
    """Discrete contraction of ``eta`` restricted to A towards ``x_bar``.

    Every a in A moves along its geodesic from x_bar; at time t it sits at
    the path point whose param is nearest to t * d(x_bar, a). The pushed
    measure t {s_K(t d)/s_K(d)}^(N-1) eta(a) must stay below eta pointwise.
    Snapping can merge images, so each point is allowed an excess of one
    contribution (the largest landing there).
    """
    e = params.N - 1
    eta_w = np.asarray(eta.weights)
    paths = {}
    for a in sorted(set(int(v) for v in A)):
        if eta_w[a] > 0:
            paths[a] = geodesic_between(space, x_bar, a)
    table = []
    ok = True
    max_snap = 0.0
    for t in ts:
        rhs = np.zeros(space.n)
        biggest = np.zeros(space.n)
        for a, path in paths.items():
            d = path.params[-1]
            par = np.asarray(path.params)
            i = int(np.argmin(np.abs(par - t * d)))
            max_snap = max(max_snap, abs(par[i] - t * d))
            if d > 0:
                factor = t * _pow_ratio(s_K(params, t * d), s_K(params, d), e)
            else:
                factor = t
            c = factor * eta_w[a]
            p = path.points[i]
            rhs[p] += c
            biggest[p] = max(biggest[p], c)
        excess = rhs - eta_w
        slack = biggest + tol
        bad = np.nonzero(excess > slack)[0]
        worst = float(np.max(excess - biggest)) if rhs.size else 0.0
        table.append({"t": float(t), "max_excess": float(np.max(excess)), "max_excess_beyond_snap": worst,
                      "violations": bad.tolist()})
        ok &= bad.size == 0
    return ContractionResult(bool(ok), table, max_snap)
