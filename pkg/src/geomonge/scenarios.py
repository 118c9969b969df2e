"""Built-in scenarios, seeded fixtures and the staged pipeline behind ``geomonge run``."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .disintegration import check_regularity, disintegrate, evolution_profile, plan_families
from .errors import GeoMongeError
from .flow import boundary, build_current, solve_transport_equation
from .kantorovich import (DiscreteMeasure, TransportPlan, certify_monotone, enumerate_vertex_couplings,
                          solve_kantorovich)
from .mcp import McpParams, c_K_bound, mcp_contract_check, verify_density_bounds, verify_tv_bound
from .monge import assemble_monge_map, fix_common_mass, verify_cost_identity
from .rays import ray_system_for, rays_from_plan
from .space import (build_counterexample_space, build_segment, counterexample_maps, counterexample_sets,
                    from_weighted_edges)

ALL_STAGES = ("oracle", "certify", "rays", "disint", "monge", "flow", "mcp")
TOL_COST = 1e-9
TOL_STOKES = 1e-12


def make_rng(seed, stream=0):
    """Counter-based generator: Philox4x64-10 keyed by (seed, stream)."""
    key = (int(seed) & (2**64 - 1)) | (int(stream) << 64)
    return np.random.Generator(np.random.Philox(key=key))


# -- fixtures -----------------------------------------------------------------


def random_tree_space(rng, n, path=False, tol=1e-9):
    """Random tree (or path) on n vertices with edge lengths in {1/4, ..., 6/4}."""
    edges = []
    for i in range(1, n):
        parent = i - 1 if path else int(rng.integers(0, i))
        edges.append((parent, i, int(rng.integers(1, 7)) / 4))
    return from_weighted_edges(n, edges, tol=tol, meta={"kind": "path" if path else "tree", "edges": edges})


def random_rational_measures(rng, n, den=12, max_atoms=3, overlap=0.3):
    """Two measures of total 1 with weights in (1/den) Z and at most ``max_atoms`` atoms each."""
    k_mu = int(rng.integers(1, max_atoms + 1))
    k_nu = int(rng.integers(1, max_atoms + 1))
    perm = rng.permutation(n)
    mu_pts = perm[:k_mu]
    if rng.random() < overlap:
        nu_pts = perm[k_mu - 1:k_mu - 1 + k_nu]
    else:
        nu_pts = perm[k_mu:k_mu + k_nu]

    def counts(k):
        return 1 + rng.multinomial(den - k, np.full(k, 1.0 / k))

    mu = DiscreteMeasure.from_atoms(n, list(zip(mu_pts.tolist(), (counts(k_mu) / den).tolist())))
    nu = DiscreteMeasure.from_atoms(n, list(zip(nu_pts.tolist(), (counts(len(nu_pts)) / den).tolist())))
    return mu, nu


def random_tree_instance(seed, n_max=12):
    rng = make_rng(seed, stream=1)
    n = int(rng.integers(4, n_max + 1))
    space = random_tree_space(rng, n, path=bool(rng.random() < 0.25))
    mu, nu = random_rational_measures(rng, n)
    return space, mu, nu


def block_instance(seed, n=24):
    """Segment with two overlapping blocks of uniform-ish mass."""
    rng = make_rng(seed, stream=2)
    space = build_segment(n)
    i0 = int(rng.integers(0, n // 2))
    i1 = int(rng.integers(i0 + 2, min(n, i0 + n // 2) + 1))
    j0 = int(rng.integers(i0 + 1, i1))
    j1 = int(rng.integers(max(j0 + 1, i1 - 1), n + 1))
    wa = rng.integers(1, 4, size=i1 - i0).astype(float)
    wb = rng.integers(1, 4, size=j1 - j0).astype(float)
    mu = np.zeros(n)
    nu = np.zeros(n)
    mu[i0:i1] = wa / wa.sum()
    nu[j0:j1] = wb / wb.sum()
    return space, DiscreteMeasure(mu), DiscreteMeasure(nu)


def intro_instance(seed, n=20):
    """Segment [-1, 1]; mu on the negative half, nu on the positive half, 3 + 3 atoms."""
    rng = make_rng(seed, stream=3)
    base = build_segment(n, length=2.0)
    space = type(base)(base.d, base.dL, tol=base.tol, labels=base.labels - 1.0, meta={"kind": "segment", "shift": -1.0})
    half = n // 2
    neg = np.sort(rng.choice(half, size=3, replace=False))
    pos = np.sort(rng.choice(np.arange(half, n), size=3, replace=False))
    a = rng.integers(1, 6, size=3).astype(float)
    b = rng.integers(1, 6, size=3).astype(float)
    mu = DiscreteMeasure.from_atoms(n, list(zip(neg.tolist(), (a / a.sum()).tolist())))
    nu = DiscreteMeasure.from_atoms(n, list(zip(pos.tolist(), (b / b.sum()).tolist())))
    return space, mu, nu


def segment_levels(ns=(10, 20, 40, 80), dirac=False):
    """(space, family) per refinement level for uniform mu, optionally plus a fixed Dirac at 0.5."""
    levels = []
    for n in ns:
        space = build_segment(n)
        w = np.full(n, 1.0 / n)
        if dirac:
            w = 0.5 * w
            w[int(np.argmin(np.abs(space.labels[:, 0] - 0.5)))] += 0.5
        plan = TransportPlan(n, [(0, n - 1, 1.0)])
        rs = rays_from_plan(space, plan)
        levels.append((space, disintegrate(DiscreteMeasure(w), rs, strict=False)))
    return levels


def envelope_family(rs, params, k=0):
    """Conditional density on ray k proportional to s_K(b - t)^(N - 1): tight on the lower bound."""
    from .disintegration import ConditionalFamily, cell_lengths
    from .mcp import s_K

    rays = rs.all_rays()
    masses = []
    for j, r in enumerate(rays):
        t = np.asarray(r.params)
        if j != k:
            masses.append(np.zeros(t.size))
            continue
        q = np.array([s_K(params, t[-1] - v) ** (params.N - 1) if params.N > 1 else 1.0 for v in t])
        w = q * cell_lengths(t)
        masses.append(w / w.sum())
    return ConditionalFamily.from_masses(rays, masses)


# -- pipeline -----------------------------------------------------------------


@dataclass
class Scenario:
    name: str
    seed: int = 0
    stages: tuple = ALL_STAGES
    options: dict = field(default_factory=dict)


@dataclass
class Report:
    data: dict
    tables: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.data["passed"]


def _flag(ok):
    return "PASS" if ok else "FAIL"


def _err(e):
    return {"error": getattr(e, "code", type(e).__name__), "message": str(e)}


def run_pipeline(space, mu, nu, stages=ALL_STAGES, plan=None, max_cycle=4, mcp_params=None, label=""):
    """oracle -> certify -> rays -> disint -> monge -> flow -> mcp; returns (sections, checks, tables)."""
    out, checks, tables = {}, {}, {}
    pre = f"{label}." if label else ""
    oracle = None
    if "oracle" in stages:
        try:
            oracle = solve_kantorovich(space, mu, nu)
            out["oracle"] = {"cost": oracle.cost_cache, "n_entries": len(oracle)}
        except GeoMongeError as e:
            out["oracle"] = _err(e)
            checks[pre + "oracle"] = "FAIL"
    if plan is None:
        plan = oracle
    if plan is None:
        return out, checks, tables
    plan = plan.with_cost(space)
    out["plan"] = {"cost": plan.cost_cache, "n_entries": len(plan), "diagonal_mass": float(plan.diagonal_mass().sum())}
    if oracle is not None:
        out["plan"]["excess_over_oracle"] = plan.cost_cache - oracle.cost_cache

    max_chain = None
    if "certify" in stages:
        cert = certify_monotone(space, plan, max_cycle=max_cycle, full=True)
        out["certify"] = cert.to_json()
        checks[pre + "certify"] = _flag(cert.passed)
        if not cert.full_passed:
            # chains in the closure are kept as short as the certified cycles
            max_chain = max_cycle - 1
            out["certify"]["closure_max_chain"] = max_chain

    rs = None
    if any(s in stages for s in ("rays", "disint", "monge", "flow", "mcp")):
        try:
            rs = ray_system_for(space, plan, max_chain=max_chain)
            out["rays"] = {"kind": rs.kind, "n_rays": len(rs.rays), "n_endpoint_rays": len(rs.endpoint_rays),
                           "n_T": len(rs.T_points), "n_Te": len(rs.Te_points), "section": list(rs.section),
                           "ray_lengths": [float(r.params[-1] - r.params[0]) for r in rs.all_rays()], "notes": rs.notes}
        except GeoMongeError as e:
            out["rays"] = _err(e)
            checks[pre + "rays"] = "FAIL"
            return out, checks, tables

    fam_mu = fam_nu = None
    if "disint" in stages and rs is not None:
        try:
            fam = disintegrate(mu, rs, strict=False)
            fam_mu, fam_nu = plan_families(rs, plan)
            out["disint"] = {"m": fam.m.tolist(), "endpoint_mass": fam.endpoint_mass, "off_ray_mass": fam.off_ray_mass,
                             "reassembly_defect": float(np.max(np.abs(fam.reassemble(space.n) + _off(mu, rs) - mu.weights))),
                             "notes": fam.notes}
            rows = []
            for k, (pts, t, c, q) in enumerate(zip(fam.points, fam.params, fam.conditionals, fam.densities)):
                rows.extend((k, p, float(tt), float(cc), float(qq)) for p, tt, cc, qq in zip(pts, t, c, q))
            tables[pre + "density"] = (["ray", "point", "param", "conditional", "density"], rows)
            A = mu.support().tolist()
            ts = np.linspace(0.0, max(out["rays"]["ray_lengths"], default=0.0), 11)
            prof = evolution_profile(A, mu, rs, ts)
            tables[pre + "profile"] = (["ts", "masses"], prof.rows())
        except GeoMongeError as e:
            out["disint"] = _err(e)
            checks[pre + "disint"] = "FAIL"

    if "monge" in stages and rs is not None:
        try:
            tm = assemble_monge_map(rs, mu, nu, plan)
            lhs, rhs, defect = verify_cost_identity(rs, tm)
            out["monge"] = {"cost": tm.cost, "is_pure_map": tm.is_pure_map, "identity_defect": defect,
                            "cost_defect": abs(tm.cost - plan.cost_cache), "forward": all(tm.forward), "notes": tm.notes,
                            "map": tm.to_json()}
            checks[pre + "monge.cost"] = _flag(abs(tm.cost - plan.cost_cache) <= TOL_COST * max(1.0, plan.cost_cache))
            checks[pre + "monge.identity"] = _flag(defect < TOL_COST)
        except GeoMongeError as e:
            out["monge"] = _err(e)
            checks[pre + "monge.cost"] = "FAIL"

    if "flow" in stages and fam_mu is not None:
        try:
            sol = solve_transport_equation(rs, fam_mu, fam_nu)
            moving = sum(m * space.dL[x, y] for x, y, m in plan.entries if x != y)
            out["flow"] = {"l1_norm": sol.l1_norm, "stokes_defect": sol.stokes_defect, "l1_cost_defect": abs(sol.l1_norm - moving),
                           "boundary_tv": boundary(sol.current).total_variation}
            checks[pre + "flow.stokes"] = _flag(sol.stokes_defect <= TOL_STOKES)
            checks[pre + "flow.l1"] = _flag(abs(sol.l1_norm - moving) <= TOL_COST)
            tables[pre + "current"] = (["ray", "t_left", "t_right", "coefficient"], sol.current.cell_table())
        except GeoMongeError as e:
            out["flow"] = _err(e)
            checks[pre + "flow.stokes"] = "FAIL"

    if "mcp" in stages and mcp_params is not None and fam_mu is not None:
        try:
            dens = verify_density_bounds(rs, fam_mu, mcp_params)
            tv = verify_tv_bound(fam_mu, rs, mcp_params)
            out["mcp"] = {"K": mcp_params.K, "N": mcp_params.N, "density": dens.to_json(), "tv": tv.to_json()}
            checks[pre + "mcp.density"] = _flag(dens.passed)
            checks[pre + "mcp.tv"] = _flag(tv.passed)
        except GeoMongeError as e:
            out["mcp"] = _err(e)
    return out, checks, tables


def _off(mu, rs):
    w = np.array(mu.weights)
    lookup = rs.ray_lookup()
    for p in lookup:
        w[p] = 0.0
    return w


# -- built-in scenarios -------------------------------------------------------


def _sc_intro(sc):
    space, mu, nu = intro_instance(sc.seed, n=int(sc.options.get("n", 20)))
    costs = [p.cost_cache for p in enumerate_vertex_couplings(space, mu, nu, max_atoms=6)]
    spread = max(costs) - min(costs)
    sec, checks, tables = run_pipeline(space, mu, nu, sc.stages)
    sec["vertices"] = {"count": len(costs), "costs": costs, "spread": spread}
    checks["vertices.equal_cost"] = _flag(spread <= TOL_COST)
    sec["instance"] = {"mu": mu.atoms(), "nu": nu.atoms()}
    return sec, checks, tables


def _sc_counterexample(sc):
    opts = sc.options
    space = build_counterexample_space(q_denom=int(opts.get("q_denom", 64)), strip_res=int(opts.get("strip_res", 16)))
    A, _ = counterexample_sets(space)
    plus, minus = counterexample_maps(space)
    w = 1.0 / len(A)
    mu = DiscreteMeasure.from_atoms(space.n, {a: w for a in A})
    sec = {"space": {k: space.meta[k] for k in ("q_denom", "alpha_num", "alpha", "strip_res", "rate")} | {"n": space.n}}
    checks, tables = {}, {}
    costs = {}
    for name, T in (("plus", plus), ("minus", minus)):
        plan = TransportPlan(space.n, [(a, T[a], w) for a in A])
        stages = tuple(s for s in sc.stages if s != "oracle")
        s, c, t = run_pipeline(space, mu, plan.right_marginal, stages, plan=plan, max_cycle=4, label=name)
        sec[name] = s
        checks.update(c)
        tables.update(t)
        costs[name] = s["plan"]["cost"]
    ratio = costs["plus"] / costs["minus"]
    sec["ratio"] = ratio
    checks["ratio"] = _flag(abs(ratio - 1.5) <= 0.05 * 1.5)
    if "oracle" in sc.stages:
        orc = solve_kantorovich(space, mu, DiscreteMeasure.from_atoms(space.n, {minus[a]: w for a in A}))
        sec["oracle"] = {"cost": orc.cost_cache, "minus_gap": costs["minus"] - orc.cost_cache}
        checks["oracle.plus_suboptimal"] = _flag(costs["plus"] > orc.cost_cache + 1e-9)
    return sec, checks, tables


def _sc_mcp_segment(sc):
    n = int(sc.options.get("n", 41))
    space = build_segment(n)
    eta = DiscreteMeasure(np.full(n, 1.0 / n))
    target = 0
    plan = TransportPlan(n, [(i, target, 1.0 / n) for i in range(n)])
    params = McpParams(0.0, 1.0)
    sec, checks, tables = run_pipeline(space, eta, plan.right_marginal, tuple(s for s in sc.stages if s != "oracle"),
                                       plan=plan, mcp_params=params)
    rs = rays_from_plan(space, plan)
    fam = disintegrate(eta, rs, strict=False)
    marg = verify_density_bounds(rs, fam, params, target=target)
    ts = np.linspace(0.0, 1.0, 11)
    con = mcp_contract_check(space, eta, target, range(n), ts, params)
    sec["target_bound"] = marg.to_json()
    sec["contraction"] = {"passed": con.passed, "max_snap": con.max_snap, "table": con.table}
    checks["mcp.target"] = _flag(marg.passed)
    checks["mcp.contraction"] = _flag(con.passed)
    env = []
    for K in (-1.0, 0.0, 1.0):
        for N in (1.0, 2.0, 3.0, 4.5):
            p = McpParams(K, N)
            f = envelope_family(rs, p)
            d = verify_density_bounds(rs, f, p)
            t = verify_tv_bound(f, rs, p)
            env.append({"K": K, "N": N, "density": d.passed, "tv": t.passed, "tv_value": t.rays[0]["tv"],
                        "tv_bound": t.rays[0]["bound"], "c_K_1": c_K_bound(p, 1.0)})
            checks[f"envelope.K{K:g}.N{N:g}"] = _flag(d.passed and t.passed)
    sec["envelope"] = env
    return sec, checks, tables


def _sc_identity(sc):
    space = build_segment(int(sc.options.get("n", 12)))
    mu = DiscreteMeasure(np.full(space.n, 1.0 / space.n))
    return run_pipeline(space, mu, mu, sc.stages)


def _sc_random_tree(sc):
    space, mu, nu = random_tree_instance(sc.seed, n_max=int(sc.options.get("n_max", 12)))
    sec, checks, tables = run_pipeline(space, mu, nu, sc.stages)
    sec["instance"] = {"n": space.n, "edges": space.meta["edges"], "mu": mu.atoms(), "nu": nu.atoms()}
    return sec, checks, tables


def _sc_blocks(sc):
    space, mu, nu = block_instance(sc.seed)
    sec, checks, tables = run_pipeline(space, mu, nu, sc.stages)
    plan = solve_kantorovich(space, mu, nu)
    rs = ray_system_for(space, plan)
    fixed = fix_common_mass(rs, plan)
    common = np.minimum(mu.weights, nu.weights)
    sec["common_mass"] = {"cost_defect": abs(fixed.cost_cache - plan.cost_cache),
                          "diagonal_defect": float(np.max(np.abs(fixed.diagonal_mass() - common)))}
    checks["common_mass"] = _flag(sec["common_mass"]["cost_defect"] <= TOL_COST and sec["common_mass"]["diagonal_defect"] <= TOL_COST)
    return sec, checks, tables


def _sc_regularity(sc):
    ns = tuple(int(v) for v in sc.options.get("ns", (10, 20, 40, 80)))
    rep = check_regularity(segment_levels(ns, dirac=bool(sc.options.get("dirac", False))))
    exact = all(abs(r["atom_max"] - 1.0 / r["n"]) == 0.0 for r in rep.levels)
    return {"regularity": rep.to_json(), "atoms_exact": exact}, {"regularity": _flag(rep.passed)}, {}


BUILTIN = {
    "intro-1d": _sc_intro,
    "counterexample": _sc_counterexample,
    "mcp-segment": _sc_mcp_segment,
    "identity": _sc_identity,
    "random-tree": _sc_random_tree,
    "blocks": _sc_blocks,
    "regularity": _sc_regularity,
}


def _sc_files(sc):
    o = sc.options
    space = io.load_space(o["space"])
    mu = io.read_measure(o["mu"], space.n)
    nu = io.read_measure(o["nu"], space.n)
    plan = io.load_plan(o["plan"], space.n) if o.get("plan") else None
    params = McpParams(float(o["K"]), float(o.get("N", 1.0))) if "K" in o else None
    return run_pipeline(space, mu, nu, sc.stages, plan=plan, mcp_params=params)


def run_scenario(sc):
    """Run a built-in scenario (or a file-driven one, name ``files``) into a Report."""
    if sc.name == "files":
        fn = _sc_files
    elif sc.name in BUILTIN:
        fn = BUILTIN[sc.name]
    else:
        raise ValueError(f"unknown scenario {sc.name!r}; choose from {sorted(BUILTIN)} or 'files'")
    unknown = set(sc.stages) - set(ALL_STAGES)
    if unknown:
        raise ValueError(f"unknown stages {sorted(unknown)}")
    sections, checks, tables = fn(sc)
    data = {
        "schema_version": io.SCHEMA_VERSION,
        "scenario": sc.name,
        "seed": int(sc.seed),
        "stages": list(sc.stages),
        "options": {k: v for k, v in sorted(sc.options.items())},
        "results": sections,
        "checks": dict(sorted(checks.items())),
        "passed": all(v == "PASS" for v in checks.values()),
    }
    return Report(data, tables)


def export_report(report, path):
    """Write the JSON report and one CSV sidecar per table (``<stem>.<table>.csv``)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    io.write_json(path, report.data)
    written = [path]
    for name, (header, rows) in sorted(report.tables.items()):
        side = path.with_name(f"{path.stem}.{name}.csv")
        io.write_csv(side, header, rows)
        written.append(side)
    return written
