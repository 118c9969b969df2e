"""Per-ray monotone rearrangement and the glued Monge map."""

from dataclasses import dataclass, field

import numpy as np

from .errors import MassMismatch, ParamUndefined, RayMismatch
from .kantorovich import TransportPlan
from .rays import split_plan


@dataclass
class Rearrangement:
    """Monotone (north-west corner) coupling of two 1D atomic measures.

    ``pairs`` holds ``(source index, target index, mass)`` into the two
    input arrays; ``mapping`` is filled only when no source atom splits.
    """

    pairs: list
    cost: float
    is_pure_map: bool
    mapping: dict | None

    def forward(self, s_params, t_params, tol=1e-12):
        return all(t_params[j] >= s_params[i] - tol for i, j, _ in self.pairs)


def monotone_rearrangement_1d(mu_1d, nu_1d, rtol=1e-9):
    """Couple sorted atoms by their cumulative distributions.

    T(s) = sup{t : F(t) <= H(s)} with H(s) = mu((-inf, s)), F likewise for nu.
    Among equal-cost couplings the monotone one is returned.
    """
    s, a = (np.asarray(v, dtype=np.float64) for v in mu_1d)
    t, b = (np.asarray(v, dtype=np.float64) for v in nu_1d)
    if np.any(np.diff(s) < 0) or np.any(np.diff(t) < 0):
        raise ValueError("params must be sorted")
    ta, tb = a.sum(), b.sum()
    if abs(ta - tb) > rtol * max(1.0, ta, tb):
        raise MassMismatch(f"totals differ: {ta!r} vs {tb!r}", mu=ta, nu=tb)
    eps = 1e-14 * max(1.0, ta)
    ra, rb = a.copy(), b.copy()
    i = j = 0
    pairs = []
    while i < ra.size and j < rb.size:
        if ra[i] <= eps:
            i += 1
            continue
        if rb[j] <= eps:
            j += 1
            continue
        m = min(ra[i], rb[j])
        pairs.append((i, j, float(m)))
        ra[i] -= m
        rb[j] -= m
        # the exhausted side advances; ties advance both
        if ra[i] <= eps:
            i += 1
        if rb[j] <= eps:
            j += 1
    targets = {}
    for i, j, _ in pairs:
        targets.setdefault(i, set()).add(j)
    pure = all(len(v) == 1 for v in targets.values())
    cost = float(sum(abs(t[j] - s[i]) * m for i, j, m in pairs))
    mapping = {i: next(iter(v)) for i, v in targets.items()} if pure else None
    return Rearrangement(pairs, cost, pure, mapping)


@dataclass
class TransportMap:
    assignment: dict
    coupling: TransportPlan
    is_pure_map: bool
    cost: float
    per_ray_cost: list
    forward: list
    fallback_plan: TransportPlan | None = None
    split_mass: float = 0.0
    notes: list = field(default_factory=list)

    def to_json(self):
        return {
            "assignment": [[int(x), int(y)] for x, y in sorted(self.assignment.items())],
            "fallback": None if self.fallback_plan is None else self.fallback_plan.to_json(),
            "cost": self.cost,
            "is_pure_map": self.is_pure_map,
            "split_mass": self.split_mass,
        }


def _check_marginals(plan, mu, nu, rtol=1e-9):
    scale = max(1.0, mu.total)
    for name, got, want in (("mu", plan.left_marginal.weights, mu.weights), ("nu", plan.right_marginal.weights, nu.weights)):
        if np.max(np.abs(got - want)) > rtol * scale:
            raise MassMismatch(f"plan marginal does not match {name}")


def assemble_monge_map(rs, mu, nu, plan):
    """Glue per-ray monotone rearrangements into one map.

    Moving plan mass is split by ray; on each ray the source and target
    parts are recoupled monotonically in arclength coordinates. Diagonal
    mass stays put (identity off the transport set).
    """
    _check_marginals(plan, mu, nu)
    space = rs.space
    per_ray, staying = split_plan(rs, plan)
    rays = rs.all_rays()
    entries = list(staying)
    per_ray_cost, forward = [], []
    for ray, ents in zip(rays, per_ray):
        if not ents:
            per_ray_cost.append(0.0)
            forward.append(True)
            continue
        pos = {p: i for i, p in enumerate(ray.points)}
        a = np.zeros(len(ray))
        b = np.zeros(len(ray))
        for x, y, m in ents:
            a[pos[x]] += m
            b[pos[y]] += m
        par = np.asarray(ray.params)
        re = monotone_rearrangement_1d((par, a), (par, b))
        per_ray_cost.append(re.cost)
        forward.append(re.forward(par, par, tol=space.tol))
        entries.extend((ray.points[i], ray.points[j], m) for i, j, m in re.pairs)
    coupling = TransportPlan(space.n, entries).with_cost(space)
    legs = {}
    for x, y, m in coupling.entries:
        legs.setdefault(x, []).append((y, m))
    pure = all(len(v) == 1 for v in legs.values())
    assignment = {x: v[0][0] for x, v in legs.items() if len(v) == 1}
    # mass a pure map would have to reroute: everything off each atom's largest leg
    split = sum(sum(m for _, m in v) - max(m for _, m in v) for v in legs.values())
    notes = []
    if rs.kind != "rays":
        notes.append("rays taken from the plan-driven chain cover")
    return TransportMap(
        assignment=assignment,
        coupling=coupling,
        is_pure_map=pure,
        cost=coupling.cost_cache,
        per_ray_cost=per_ray_cost,
        forward=forward,
        fallback_plan=None if pure else coupling,
        split_mass=float(split),
        notes=notes,
    )


def verify_cost_identity(rs, map_or_plan, mu=None, nu=None):
    """Cost two ways: sum dL * mass, and sum of ray params against (nu - mu) per ray.

    Returns ``(lhs, rhs, defect)``.
    """
    plan = map_or_plan.coupling if isinstance(map_or_plan, TransportMap) else map_or_plan
    space = rs.space
    lhs = plan.cost(space)
    lookup = rs.ray_lookup()
    params = rs.param_maps()
    rhs = 0.0
    for x, y, m in plan.entries:
        if x == y:
            continue
        k = rs.ray_of_pair(x, y, lookup, params)
        if k is None:
            missing = y if y not in lookup else x
            raise ParamUndefined(f"point {missing} carries moving mass but lies on no ray", point=missing)
        rhs += (params[k][y] - params[k][x]) * m
    return lhs, rhs, abs(lhs - rhs)


def fix_common_mass(rs, plan):
    """Equal-cost plan whose diagonal carries exactly mu ^ nu.

    Whenever mass arrives at x and other mass leaves x, the two legs are
    merged into one pair and the overlap stays at x. On a monotone support
    x lies between the outer points, so the cost does not change. The moving
    remainder is then recoupled monotonically on each ray.
    """
    space = rs.space
    moving = {}
    stay = np.zeros(plan.n)
    for x, y, m in plan.entries:
        if x == y:
            stay[x] += m
        else:
            moving[(x, y)] = moving.get((x, y), 0.0) + m
    eps = 1e-15 * max(1.0, plan.total)
    for x in range(plan.n):
        while True:
            ins = sorted((w, m) for (w, z), m in moving.items() if z == x and m > eps)
            outs = sorted((z, m) for (w, z), m in moving.items() if w == x and m > eps)
            if not ins or not outs:
                break
            (w, mi), (z, mo) = ins[0], outs[0]
            m = min(mi, mo)
            for key, left in (((w, x), mi - m), ((x, z), mo - m)):
                if left > eps:
                    moving[key] = left
                else:
                    del moving[key]
            stay[x] += m
            if w == z:
                stay[w] += m
            else:
                moving[(w, z)] = moving.get((w, z), 0.0) + m
    merged = TransportPlan(plan.n, [(x, y, m) for (x, y), m in moving.items()] + [(i, i, stay[i]) for i in np.nonzero(stay)[0]])
    try:
        out = assemble_monge_map(rs, merged.left_marginal, merged.right_marginal, merged).coupling
    except RayMismatch:
        out = merged
    return out.with_cost(space)
