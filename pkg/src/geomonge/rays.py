"""Transport rays from a monotone support.

Pipeline: support -> cycle closure -> oriented relation G -> transport sets
-> endpoints -> ray classes with a cross-section and arclength params.
Pairs are index tuples ``(x, y)``; relations are stored as frozensets.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import BranchingDetected, EquivalenceFailure, NonmonotoneInput, RayMismatch
from .space import GeodesicPath


def _min_plus_power(W, steps):
    """Cheapest walks using at most ``steps`` edges (zero-length walk included)."""
    n = W.shape[0]
    D = np.full((n, n), np.inf)
    np.fill_diagonal(D, 0.0)
    for _ in range(steps):
        nxt = D.copy()
        for k in range(n):
            np.minimum(nxt, D[:, k:k + 1] + W[k:k + 1, :], out=nxt)
        D = nxt
    return D


def close_cycles(space, support, max_chain=None):
    """Zero-defect cycle closure of a support set.

    ``(x_a, y_b)`` joins the closure when a chain of support pairs from ``a``
    to ``b`` closes into a cycle with zero defect. ``max_chain`` bounds the
    number of chain links (``None``: unbounded, i.e. full shortest paths).
    A negative cycle raises NONMONOTONE_INPUT.
    """
    pairs = sorted({(int(x), int(y)) for x, y in support})
    if not pairs:
        return frozenset()
    dL, tol = space.dL, space.tol
    xs = np.array([p[0] for p in pairs])
    ys = np.array([p[1] for p in pairs])
    if not np.all(np.isfinite(dL[xs, ys])):
        raise ValueError("support contains a pair at infinite distance")
    C = dL[np.ix_(xs, ys)]
    diag = np.diag(C)
    with np.errstate(invalid="ignore"):
        W = C.T - diag[:, None]
    if max_chain is None:
        D = _kernels.min_plus_closure(W, tol=tol)
    else:
        D = _min_plus_power(W, int(max_chain))
    low = np.min(np.diag(D))
    if low < -tol:
        k = int(np.argmin(np.diag(D)))
        raise NonmonotoneInput("negative-defect cycle found during closure", pair=pairs[k], value=float(low))
    with np.errstate(invalid="ignore"):
        closing = D + C - diag[None, :]  # closing[a, b]: chain a -> b, then back via dL(x_a, y_b)
    if np.any(closing < -tol):
        a, b = np.argwhere(closing < -tol)[0]
        raise NonmonotoneInput("negative-defect cycle found during closure", pair=pairs[a], value=float(closing[a, b]))
    hit = np.argwhere(np.abs(closing) <= tol)
    return frozenset((int(xs[a]), int(ys[b])) for a, b in hit)


def build_G(space, gamma_prime):
    """All ordered (x, y) sitting additively inside some (w, z) of the closure."""
    dL, tol = space.dL, space.tol
    out = set()
    for w, z in sorted(gamma_prime):
        out.add((w, z))
        if w == z:
            continue
        with np.errstate(invalid="ignore"):
            mid = np.nonzero(np.abs(dL[w] + dL[:, z] - dL[w, z]) <= tol)[0]
        pw = dL[w, mid]
        pz = dL[mid, z]
        with np.errstate(invalid="ignore"):
            ok = np.abs(pw[:, None] + dL[np.ix_(mid, mid)] + pz[None, :] - dL[w, z]) <= tol
        for i, j in np.argwhere(ok):
            out.add((int(mid[i]), int(mid[j])))
    return frozenset(out)


def _strict_neighbours(G):
    succ, pred = {}, {}
    for x, y in G:
        if x != y:
            succ.setdefault(x, set()).add(y)
            pred.setdefault(y, set()).add(x)
    return succ, pred


def transport_sets(G):
    """(T, Te): points with strict predecessor and successor / with either."""
    succ, pred = _strict_neighbours(G)
    T = frozenset(set(succ) & set(pred))
    Te = frozenset(set(succ) | set(pred))
    return T, Te


def endpoints(G, T=None):
    """Initial and final points a(x), b(x) for x in T (empty maps off T)."""
    succ, pred = _strict_neighbours(G)
    if T is None:
        T, _ = transport_sets(G)
    a_map, b_map = {}, {}
    for x in sorted(T):
        first = sorted(w for w in pred.get(x, ()) if not pred.get(w))
        last = sorted(z for z in succ.get(x, ()) if not succ.get(z))
        if len(first) > 1 or len(last) > 1:
            raise BranchingDetected(f"point {x} has {len(first)} initial and {len(last)} final points",
                                    point=x, initial=first, final=last)
        if first:
            a_map[x] = first[0]
        if last:
            b_map[x] = last[0]
    return a_map, b_map


@dataclass
class RaySystem:
    space: object
    G: frozenset
    T_points: frozenset
    Te_points: frozenset
    a_map: dict
    b_map: dict
    section: list
    quotient: dict
    rays: list
    endpoint_rays: list = field(default_factory=list)
    kind: str = "rays"
    notes: list = field(default_factory=list)

    @property
    def R(self):
        return self.G | frozenset((y, x) for x, y in self.G)

    def all_rays(self):
        return list(self.rays) + list(self.endpoint_rays)

    def ray_lookup(self):
        """point -> sorted list of ray indices (into ``all_rays()``) containing it."""
        out = {}
        for k, ray in enumerate(self.all_rays()):
            for p in ray.points:
                out.setdefault(p, []).append(k)
        return out

    def param_maps(self):
        return [dict(zip(r.points, r.params)) for r in self.all_rays()]

    def ray_of_pair(self, x, y, lookup=None, params=None):
        """Index of the first ray carrying x before y, or None."""
        lookup = self.ray_lookup() if lookup is None else lookup
        params = self.param_maps() if params is None else params
        for k in lookup.get(x, ()):
            if y in params[k] and params[k][y] >= params[k][x] - self.space.tol:
                return k
        return None

    def to_json(self):
        def ray_json(r):
            return {"points": list(r.points), "params": list(r.params)}

        return {
            "n": int(self.space.n),
            "tol": float(self.space.tol),
            "kind": self.kind,
            "section": list(self.section),
            "rays": [ray_json(r) for r in self.rays],
            "endpoint_rays": [ray_json(r) for r in self.endpoint_rays],
            "a": {str(k): v for k, v in sorted(self.a_map.items())},
            "b": {str(k): v for k, v in sorted(self.b_map.items())},
            "notes": list(self.notes),
        }

    @classmethod
    def from_json(cls, space, data):
        def ray(r):
            return GeodesicPath(tuple(int(p) for p in r["points"]), tuple(float(t) for t in r["params"]))

        rays = [ray(r) for r in data["rays"]]
        ends = [ray(r) for r in data.get("endpoint_rays", [])]
        G = set()
        for r in rays + ends:
            G.update((x, y) for i, x in enumerate(r.points) for y in r.points[i:])
        G = frozenset(G)
        T, Te = transport_sets(G)
        section = [int(s) for s in data["section"]]
        quotient = {p: k for k, r in enumerate(rays) for p in r.points if p in T}
        return cls(space, G, T, Te, {int(k): v for k, v in data["a"].items()}, {int(k): v for k, v in data["b"].items()},
                   section, quotient, rays, ends, kind=data.get("kind", "rays"), notes=list(data.get("notes", [])))


def _order_by_rep(dL, rep, pts, Gset):
    params = []
    for z in pts:
        if (rep, z) in Gset:
            params.append(dL[rep, z])
        elif (z, rep) in Gset:
            params.append(-dL[z, rep])
        else:
            return None
    order = np.lexsort((np.asarray(pts), np.asarray(params)))
    return [pts[i] for i in order], [float(params[i]) for i in order]


def build_ray_system(space, G):
    """Partition the transport set into rays and parametrize each one.

    Raises BRANCHING_DETECTED if some relation class R(x), x in T, is not a
    chain, and EQUIVALENCE_FAILURE if R is not transitive on T.
    """
    dL, tol = space.dL, space.tol
    Gset = frozenset(G)
    T, Te = transport_sets(Gset)
    a_map, b_map = endpoints(Gset, T)
    succ, pred = _strict_neighbours(Gset)

    # local chain test: everything related to x must be totally ordered by G
    for x in sorted(T):
        rel = sorted(succ.get(x, set()) | pred.get(x, set()) | {x})
        got = _order_by_rep(dL, x, rel, Gset)
        pts, par = got
        for u, v, pu, pv in zip(pts[:-1], pts[1:], par[:-1], par[1:]):
            if (u, v) not in Gset or pv - pu <= tol:
                raise BranchingDetected(f"points related to {x} are not a chain", point=x, witness=(u, v))

    # classes of R restricted to T (union-find), then a transitivity audit
    parent = {x: x for x in T}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for x, y in Gset:
        if x != y and x in T and y in T:
            rx, ry = find(x), find(y)
            if rx != ry:
                parent[max(rx, ry)] = min(rx, ry)
    classes = {}
    for x in sorted(T):
        classes.setdefault(find(x), []).append(x)
    for members in classes.values():
        for i, u in enumerate(members):
            for v in members[i + 1:]:
                if (u, v) not in Gset and (v, u) not in Gset:
                    mid = next((w for w in members if ((u, w) in Gset or (w, u) in Gset) and ((w, v) in Gset or (v, w) in Gset)), None)
                    raise EquivalenceFailure(f"R is not transitive on {u}, {mid}, {v}", triple=(u, mid, v))

    rays, section, quotient = [], [], {}
    covered = set()
    taken = set()
    for k, root in enumerate(sorted(classes, key=lambda r: min(classes[r]))):
        members = classes[root]
        pts = set(members)
        pts.update(a_map[x] for x in members if x in a_map)
        pts.update(b_map[x] for x in members if x in b_map)
        got = _order_by_rep(dL, min(members), sorted(pts), Gset)
        if got is None:
            raise EquivalenceFailure(f"ray of {min(members)} contains points unrelated to it", rep=min(members))
        order, params = got
        # smallest point of the closed ray; endpoints shared with an earlier ray are skipped
        rep = min(p for p in order if p not in taken or p in members)
        taken.add(rep)
        shift = params[order.index(rep)]
        params = [t - shift for t in params]
        rays.append(GeodesicPath(tuple(order), tuple(params)))
        section.append(rep)
        for x in members:
            quotient[x] = k
        covered.update((u, v) for i, u in enumerate(order) for v in order[i:])

    # G-pairs between two non-interior points that no ray carries
    endpoint_rays = []
    notes = []
    for x, y in sorted(Gset):
        if x != y and (x, y) not in covered and x not in T and y not in T:
            endpoint_rays.append(GeodesicPath((x, y), (0.0, float(dL[x, y]))))
    if endpoint_rays:
        notes.append(f"{len(endpoint_rays)} isolated endpoint pair(s) kept outside the cross-section")
    return RaySystem(space, Gset, T, Te, a_map, b_map, section, quotient, rays, endpoint_rays, notes=notes)


def rays_from_plan(space, plan, max_chain=None):
    """Closure, G and ray system for the support of ``plan``."""
    gp = close_cycles(space, plan.support(), max_chain=max_chain)
    G = build_G(space, gp)
    return build_ray_system(space, G)


# -- structure audit ----------------------------------------------------------


@dataclass
class AxiomReport:
    """Violations per axiom; every list empty means the structure is sound."""

    violations: dict
    sizes: dict

    @property
    def passed(self):
        return not any(self.violations.values())

    def to_json(self):
        return {"passed": self.passed, "sizes": self.sizes,
                "violations": {k: [list(v) for v in vs[:20]] for k, vs in sorted(self.violations.items())},
                "counts": {k: len(vs) for k, vs in sorted(self.violations.items())}}


def check_structure_axioms(space, plan, limit=50):
    """Exhaustive audit of the support -> closure -> G -> R chain.

    Checks support <= closure <= G, closure idempotence, monotonicity of the
    closure (no negative cycle), G as a partial order on Te, and R as an
    equivalence on T. Cubic in |Te|; meant for small fixtures.
    """
    support = frozenset(plan.support())
    viol = {k: [] for k in ("sandwich", "idempotence", "monotone", "G_reflexive", "G_antisymmetric",
                            "G_transitive", "R_reflexive", "R_transitive")}
    gp = close_cycles(space, support)
    viol["sandwich"] += sorted(support - gp)
    G = build_G(space, gp)
    viol["sandwich"] += sorted(gp - G)
    try:
        again = close_cycles(space, gp)
        viol["idempotence"] += sorted(again ^ gp)
    except NonmonotoneInput as e:
        viol["monotone"].append(tuple(e.details.get("pair", ())))
    T, Te = transport_sets(G)
    te = sorted(Te)
    for x in te:
        if (x, x) not in G:
            viol["G_reflexive"].append((x,))
    for x, y in sorted(G):
        if x < y and (y, x) in G:
            viol["G_antisymmetric"].append((x, y))
    succ = {}
    for x, y in G:
        succ.setdefault(x, set()).add(y)
    for x in te:
        for y in sorted(succ.get(x, ())):
            for z in sorted(succ.get(y, ())):
                if (x, z) not in G and len(viol["G_transitive"]) < limit:
                    viol["G_transitive"].append((x, y, z))
    R = G | frozenset((y, x) for x, y in G)
    rel = {}
    for x, y in R:
        if x in T and y in T:
            rel.setdefault(x, set()).add(y)
    for x in sorted(T):
        if (x, x) not in R:
            viol["R_reflexive"].append((x,))
        for y in sorted(rel.get(x, ())):
            for z in sorted(rel.get(y, ())):
                if (x, z) not in R and len(viol["R_transitive"]) < limit:
                    viol["R_transitive"].append((x, y, z))
    sizes = {"support": len(support), "closure": len(gp), "G": len(G), "T": len(T), "Te": len(Te)}
    return AxiomReport(viol, sizes)


# -- chain cover --------------------------------------------------------------


def _as_chain(dL, pts, tol):
    """Order ``pts`` along a single geodesic, or None if they do not lie on one."""
    pts = sorted(set(pts))
    if len(pts) == 1:
        return pts, [0.0]
    sub = dL[np.ix_(pts, pts)]
    i, j = np.unravel_index(np.argmax(sub), sub.shape)
    e1, e2 = pts[i], pts[j]
    par = sub[i]
    if np.any(np.abs(par + sub[:, j] - sub[i, j]) > tol):
        return None
    if np.any(np.abs(np.abs(par[:, None] - par[None, :]) - sub) > tol):
        return None
    order = np.lexsort((np.asarray(pts), par))
    return [pts[k] for k in order], [float(par[k]) for k in order]


def chain_cover(space, plan):
    """Fallback ray system driven by the plan's moving pairs.

    Each off-diagonal pair is a geodesic segment; pairs are merged greedily
    (in sorted order) while their union stays a single, consistently oriented
    geodesic chain. Used when the full transport set branches, e.g. at tree
    junctions. Every plan pair then lies forward on exactly one chain.
    """
    from .space import between_mask

    dL, tol = space.dL, space.tol
    groups = []  # (ordered points, params, orientation anchor)
    for x, y, _ in plan.entries:
        if x == y:
            continue
        seg = sorted(np.nonzero(between_mask(space, x, y))[0].tolist())
        if _as_chain(dL, seg, tol) is None:
            seg = sorted({x, y})
        placed = False
        for g in groups:
            got = _as_chain(dL, g["pts"] | set(seg), tol)
            if got is None:
                continue
            order, par = got
            pos = dict(zip(order, par))
            # orientation: every pair must move forward; flip if the group's do
            fwd = [pos[v] - pos[u] for u, v in g["pairs"] + [(x, y)]]
            if all(f > tol for f in fwd) or all(f < -tol for f in fwd):
                g["pts"] |= set(seg)
                g["pairs"].append((x, y))
                placed = True
                break
        if not placed:
            groups.append({"pts": set(seg), "pairs": [(x, y)]})

    rays, section = [], []
    Gset = set()
    taken = set()
    for g in groups:
        order, par = _as_chain(dL, g["pts"], tol)
        u, v = g["pairs"][0]
        if par[order.index(v)] < par[order.index(u)]:
            order = order[::-1]
            par = [par[0] + par[-1] - t for t in par[::-1]]
        rep = min(p for p in order if p not in taken or p in order[1:-1])
        taken.add(rep)
        base = par[order.index(rep)]
        par = [t - base for t in par]
        rays.append(GeodesicPath(tuple(order), tuple(float(t) for t in par)))
        section.append(rep)
        Gset.update((order[i], order[j]) for i in range(len(order)) for j in range(i, len(order)))
    Gset = frozenset(Gset)
    T, Te = transport_sets(Gset)
    quotient = {}
    for k, r in enumerate(rays):
        for p in r.points[1:-1]:
            quotient.setdefault(p, k)
    a_map = {p: r.points[0] for r in rays for p in r.points[1:-1]}
    b_map = {p: r.points[-1] for r in rays for p in r.points[1:-1]}
    return RaySystem(space, Gset, T, Te, a_map, b_map, section, quotient, rays, [], kind="chain_cover",
                     notes=["chains built from plan pairs; the transport relation branches"])


def ray_system_for(space, plan, max_chain=None):
    """Ray system of ``plan``; falls back to the chain cover on branching."""
    try:
        return rays_from_plan(space, plan, max_chain=max_chain)
    except (BranchingDetected, EquivalenceFailure):
        return chain_cover(space, plan)


def split_plan(rs, plan):
    """Assign each moving plan entry to the ray carrying it.

    Returns ``(per_ray, staying)``: per-ray lists of (x, y, mass) and the
    list of diagonal entries. RAY_MISMATCH if some moving pair is on no ray.
    """
    lookup = rs.ray_lookup()
    params = rs.param_maps()
    per_ray = [[] for _ in params]
    staying = []
    for x, y, m in plan.entries:
        if x == y:
            staying.append((x, y, m))
            continue
        k = rs.ray_of_pair(x, y, lookup, params)
        if k is None:
            raise RayMismatch(f"plan pair ({x}, {y}) is not carried by any ray", pair=(x, y))
        per_ray[k].append((x, y, m))
    return per_ray, staying
