"""``geomonge`` command line."""

import argparse
import csv
import json
import os
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import io
from .disintegration import ConditionalFamily, cell_lengths, check_regularity, disintegrate, evolve_set
from .errors import GeoMongeError
from .flow import boundary, build_current, density_rho, solve_transport_equation
from .kantorovich import certify_monotone, solve_kantorovich
from .mcp import McpParams, mcp_contract_check, verify_density_bounds, verify_tv_bound
from .monge import assemble_monge_map, verify_cost_identity
from .rays import RaySystem, ray_system_for
from .scenarios import ALL_STAGES, BUILTIN, Scenario, export_report, run_scenario
from .space import FiniteGeodesicSpace, build_counterexample_space, build_segment, validate_structure


def _apply_threads():
    n = os.environ.get("GEOMONGE_THREADS")
    if not n:
        return
    try:
        import warnings

        import numba

        warnings.filterwarnings("ignore", category=numba.NumbaWarning)
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
    except (ImportError, ValueError):
        pass


def _space(args):
    sp = io.load_space(args.space)
    if args.tol is not None:
        sp = FiniteGeodesicSpace(sp.d, sp.dL, tol=args.tol, labels=sp.labels, meta=sp.meta)
    return sp


def _rays(path, space=None):
    data = json.loads(Path(path).read_text())
    if space is None:
        # flow and bound checks only need the point count
        space = SimpleNamespace(n=int(data["n"]), tol=float(data.get("tol", 1e-9)))
    return RaySystem.from_json(space, data)


def _emit(args, obj):
    text = io.dumps(obj)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# -- handlers -----------------------------------------------------------------


def cmd_space_validate(args):
    sp = _space(args)
    rep = validate_structure(sp)
    _emit(args, {"n": sp.n, "triangle_ok": rep.triangle_ok, "non_branching": rep.non_branching,
                 "additivity_violations": rep.additivity_violations, "branching_witnesses": rep.branching_witnesses,
                 "finite_components": rep.finite_components, "exhaustive": rep.exhaustive, "notes": rep.notes})
    return 0 if rep.triangle_ok else 1


def cmd_space_gen(args):
    tol = args.tol if args.tol is not None else None
    if args.kind == "segment":
        sp = build_segment(args.n, length=args.length, **({"tol": tol} if tol is not None else {}))
    else:
        sp = build_counterexample_space(q_denom=args.q_denom, strip_res=args.strip_res, **({"tol": tol} if tol is not None else {}))
    _emit(args, io.space_to_json(sp))
    return 0


def cmd_kanto_solve(args):
    sp = _space(args)
    plan = solve_kantorovich(sp, io.read_measure(args.mu, sp.n), io.read_measure(args.nu, sp.n))
    _emit(args, plan.to_json())
    return 0


def cmd_kanto_certify(args):
    sp = _space(args)
    cert = certify_monotone(sp, io.load_plan(args.plan, sp.n), max_cycle=args.max_cycle)
    _emit(args, cert.to_json())
    return 0 if cert.passed else 1


def cmd_rays_build(args):
    sp = _space(args)
    rs = ray_system_for(sp, io.load_plan(args.plan, sp.n), max_chain=args.max_chain)
    _emit(args, rs.to_json())
    return 0


def cmd_disint_run(args):
    sp = _space(args)
    rs = ray_system_for(sp, io.load_plan(args.plan, sp.n))
    fam = disintegrate(io.read_measure(args.mu, sp.n), rs, strict=not args.lenient)
    _emit(args, fam.to_json())
    return 0


def cmd_disint_evolve(args):
    rs = _rays(args.rays)
    A = io.load_point_set(args.set)
    rows = []
    for t in args.t:
        ev = evolve_set(A, t, rs)
        rows.append({"t": t, "points": list(ev.points), "dropped": ev.dropped, "off_ray": ev.off_ray})
    _emit(args, {"evolution": rows})
    return 0


def cmd_disint_regularity(args):
    path = Path(args.levels)
    cfg = json.loads(path.read_text())
    levels = []
    for lv in cfg["levels"]:
        sp = io.load_space(path.parent / lv["space"])
        rs = _rays(path.parent / lv["rays"], sp)
        levels.append((sp, disintegrate(io.read_measure(path.parent / lv["mu"], sp.n), rs, strict=False)))
    rep = check_regularity(levels)
    _emit(args, rep.to_json())
    return 0 if rep.passed else 1


def cmd_monge_solve(args):
    sp = _space(args)
    mu = io.read_measure(args.mu, sp.n)
    nu = io.read_measure(args.nu, sp.n)
    plan = solve_kantorovich(sp, mu, nu)
    rs = ray_system_for(sp, plan)
    tm = assemble_monge_map(rs, mu, nu, plan)
    out = tm.to_json()
    out["identity_defect"] = verify_cost_identity(rs, tm)[2]
    out["oracle_cost"] = plan.cost_cache
    _emit(args, out)
    return 0


def _csv_out(args, header, rows):
    if args.out:
        io.write_csv(args.out, header, rows)
    else:
        wr = csv.writer(sys.stdout, lineterminator="\n")
        wr.writerow(header)
        wr.writerows(rows)


def cmd_flow_current(args):
    rs = _rays(args.rays)
    fam = disintegrate(io.read_measure(args.eta, rs.space.n), rs, strict=False)
    cur = build_current(rs, fam)
    b = boundary(cur)
    sys.stderr.write(f"boundary total variation {float(b.total_variation)!r}\n")
    _csv_out(args, ["ray", "t_left", "t_right", "coefficient"], cur.cell_table())
    return 0


def cmd_flow_solve(args):
    rs = _rays(args.rays)
    n = rs.space.n
    mu = disintegrate(io.read_measure(args.mu, n), rs, strict=False)
    nu = disintegrate(io.read_measure(args.nu, n), rs, strict=False)
    sol = solve_transport_equation(rs, mu, nu)
    sys.stderr.write(f"stokes defect {float(sol.stokes_defect)!r}, L1 norm {float(sol.l1_norm)!r}\n")
    rows = sol.current.cell_table()
    header = ["ray", "t_left", "t_right", "coefficient"]
    if args.rho:
        rho = density_rho(sol.current, mu)
        flat = [float(v) for r in rho for v in r]
        rows = [row + (v,) for row, v in zip(rows, flat)]
        header.append("rho")
    _csv_out(args, header, rows)
    return 0


def cmd_mcp_check(args):
    sp = _space(args)
    eta = io.read_measure(args.eta, sp.n)
    A = io.load_point_set(args.set) if args.set else eta.support().tolist()
    params = McpParams(args.K, args.N)
    ts = np.linspace(0.0, 1.0, args.steps + 1)
    res = mcp_contract_check(sp, eta, args.xbar, A, ts, params)
    _emit(args, {"passed": res.passed, "max_snap": res.max_snap, "table": res.table})
    return 0 if res.passed else 1


def _read_q(path, rs):
    rays = rs.all_rays()
    dens = [np.zeros(len(r)) for r in rays]
    pos = [{p: i for i, p in enumerate(r.points)} for r in rays]
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            k = int(row["ray"])
            dens[k][pos[k][int(row["point_index"])]] = float(row["density"])
    masses = [q * cell_lengths(r.params) for q, r in zip(dens, rays)]
    return ConditionalFamily.from_masses(rays, masses)


def cmd_mcp_bounds(args):
    rs = _rays(args.rays)
    fam = _read_q(args.q, rs)
    params = McpParams(args.K, args.N)
    d = verify_density_bounds(rs, fam, params)
    t = verify_tv_bound(fam, rs, params)
    _emit(args, {"density": d.to_json(), "tv": t.to_json(), "passed": d.passed and t.passed})
    return 0 if d.passed and t.passed else 1


def cmd_run(args):
    options = {}
    for kv in args.set or []:
        k, _, v = kv.partition("=")
        try:
            options[k] = json.loads(v)
        except json.JSONDecodeError:
            options[k] = v
    stages = tuple(args.stages.split(",")) if args.stages else ALL_STAGES
    rep = run_scenario(Scenario(args.scenario, seed=args.seed, stages=stages, options=options))
    if args.out:
        for p in export_report(rep, args.out):
            sys.stderr.write(f"wrote {p}\n")
    else:
        sys.stdout.write(io.dumps(rep.data))
    return 0 if rep.passed else 1


# -- parser -------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for randomized fixtures")
    common.add_argument("--tol", type=float, default=None, help="override the space tolerance")
    common.add_argument("--out", default=None, help="output file (default: stdout)")

    p = argparse.ArgumentParser(prog="geomonge", description="Monge maps on finite geodesic spaces via transport rays.")
    sub = p.add_subparsers(dest="cmd", required=True)

    def group(name, help_):
        g = sub.add_parser(name, help=help_).add_subparsers(dest="sub", required=True)
        return g

    def leaf(g, name, fn, help_=None):
        q = g.add_parser(name, help=help_, parents=[common])
        q.set_defaults(fn=fn)
        return q

    g = group("space", "build or validate spaces")
    q = leaf(g, "validate", cmd_space_validate)
    q.add_argument("space")
    q = leaf(g, "gen", cmd_space_gen)
    q.add_argument("kind", choices=["segment", "counterexample"])
    q.add_argument("--n", type=int, default=20)
    q.add_argument("--length", type=float, default=1.0)
    q.add_argument("--q-denom", type=int, default=64)
    q.add_argument("--strip-res", type=int, default=16)

    g = group("kanto", "optimal plans and certificates")
    q = leaf(g, "solve", cmd_kanto_solve)
    q.add_argument("space"), q.add_argument("mu"), q.add_argument("nu")
    q = leaf(g, "certify", cmd_kanto_certify)
    q.add_argument("space"), q.add_argument("plan")
    q.add_argument("--max-cycle", type=int, default=4)

    g = group("rays", "transport rays")
    q = leaf(g, "build", cmd_rays_build)
    q.add_argument("space"), q.add_argument("plan")
    q.add_argument("--max-chain", type=int, default=None)

    g = group("disint", "disintegration along rays")
    q = leaf(g, "run", cmd_disint_run)
    q.add_argument("space"), q.add_argument("plan"), q.add_argument("mu")
    q.add_argument("--lenient", action="store_true", help="report mass off the rays instead of failing")
    q = leaf(g, "evolve", cmd_disint_evolve)
    q.add_argument("rays"), q.add_argument("set")
    q.add_argument("--t", type=float, nargs="+", required=True)
    q = leaf(g, "regularity", cmd_disint_regularity)
    q.add_argument("levels")

    g = group("monge", "Monge maps")
    q = leaf(g, "solve", cmd_monge_solve)
    q.add_argument("space"), q.add_argument("mu"), q.add_argument("nu")

    g = group("flow", "transport currents")
    q = leaf(g, "current", cmd_flow_current)
    q.add_argument("rays"), q.add_argument("eta")
    q = leaf(g, "solve", cmd_flow_solve)
    q.add_argument("rays"), q.add_argument("mu"), q.add_argument("nu")
    q.add_argument("--rho", action="store_true")

    g = group("mcp", "measure contraction checks")
    q = leaf(g, "check", cmd_mcp_check)
    q.add_argument("space"), q.add_argument("eta")
    q.add_argument("--K", type=float, default=0.0)
    q.add_argument("--N", type=float, default=1.0)
    q.add_argument("--xbar", type=int, default=0)
    q.add_argument("--set", default=None)
    q.add_argument("--steps", type=int, default=10)
    q = leaf(g, "bounds", cmd_mcp_bounds)
    q.add_argument("rays"), q.add_argument("q")
    q.add_argument("--K", type=float, default=0.0)
    q.add_argument("--N", type=float, default=1.0)

    q = sub.add_parser("run", help="run a scenario", parents=[common])
    q.set_defaults(fn=cmd_run)
    q.add_argument("scenario", help=f"one of {', '.join(sorted(BUILTIN))} or 'files'")
    q.add_argument("--stages", default=None, help="comma-separated subset of " + ",".join(ALL_STAGES))
    q.add_argument("--set", action="append", help="scenario option key=value (value parsed as JSON when possible)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    _apply_threads()
    try:
        return args.fn(args)
    except GeoMongeError as e:
        sys.stderr.write(f"error {e.code}: {e}\n")
        return 2
    except (OSError, ValueError, KeyError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
