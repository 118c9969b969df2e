"""Disintegration along rays, evolution of sets, refinement diagnostics."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MassOffRays
from .rays import split_plan


def cell_lengths(params):
    """Midpoint cells around each param; the two end cells are mirrored full cells."""
    t = np.asarray(params, dtype=np.float64)
    if t.size < 2:
        return np.ones_like(t)
    gaps = np.diff(t)
    cells = np.empty_like(t)
    cells[1:-1] = (gaps[:-1] + gaps[1:]) / 2
    cells[0] = gaps[0]
    cells[-1] = gaps[-1]
    return cells


@dataclass
class ConditionalFamily:
    """Quotient measure ``m`` plus one normalized conditional per ray.

    ``conditionals[k][i]`` is the conditional mass at ``params[k][i]``;
    ``H[k][i]`` is the left-continuous distribution function there.
    """

    points: list
    params: list
    m: np.ndarray
    conditionals: list
    densities: list
    H: list
    endpoint_mass: float = 0.0
    off_ray_mass: float = 0.0
    notes: list = field(default_factory=list)

    @classmethod
    def from_masses(cls, rays, masses, endpoint_mass=0.0, off_ray_mass=0.0, notes=None):
        points = [tuple(r.points) for r in rays]
        params = [np.asarray(r.params, dtype=np.float64) for r in rays]
        # exactly rounded totals, so uniform weights give conditionals of exactly 1/n
        m = np.array([math.fsum(np.asarray(w, dtype=np.float64)) for w in masses])
        cond, dens, H = [], [], []
        for w, t, mk in zip(masses, params, m):
            w = np.asarray(w, dtype=np.float64)
            c = w / mk if mk > 0 else np.zeros_like(w)
            cond.append(c)
            dens.append(c / cell_lengths(t))
            H.append(np.concatenate([[0.0], np.cumsum(c)[:-1]]))
        return cls(points, params, m, cond, dens, H, float(endpoint_mass), float(off_ray_mass), list(notes or []))

    @property
    def n_rays(self):
        return len(self.points)

    def reassemble(self, n):
        """sum_y m(y) mu_y as a dense point vector."""
        w = np.zeros(n)
        for pts, c, mk in zip(self.points, self.conditionals, self.m):
            np.add.at(w, np.asarray(pts, dtype=int), mk * c)
        return w

    def interval_density(self, k):
        """Background density on the intervals between consecutive params."""
        q = self.densities[k]
        return (q[:-1] + q[1:]) / 2

    def to_json(self):
        return {
            "m": self.m.tolist(),
            "rays": [
                {"points": list(p), "params": t.tolist(), "mu": c.tolist(), "density": q.tolist(), "H": h.tolist()}
                for p, t, c, q, h in zip(self.points, self.params, self.conditionals, self.densities, self.H)
            ],
            "endpoint_mass": self.endpoint_mass,
            "off_ray_mass": self.off_ray_mass,
            "notes": self.notes,
        }


def disintegrate(mu, rs, strict=True, tol=1e-9):
    """Split ``mu`` along the rays of ``rs``.

    A point lying on several rays (a shared endpoint) is charged to the ray
    with the lowest index. Mass on endpoints is kept in the conditionals and
    also reported as ``endpoint_mass``.
    """
    rays = rs.all_rays()
    lookup = rs.ray_lookup()
    masses = [np.zeros(len(r)) for r in rays]
    pos = [{p: i for i, p in enumerate(r.points)} for r in rays]
    endpoint_mass = 0.0
    off = 0.0
    for x in mu.support():
        w = float(mu.weights[x])
        ks = lookup.get(int(x))
        if not ks:
            off += w
            continue
        k = ks[0]
        masses[k][pos[k][int(x)]] += w
        if int(x) not in rs.T_points:
            endpoint_mass += w
    if strict and off > tol * max(1.0, mu.total):
        raise MassOffRays(f"{off:.3g} of the mass lies outside the transport set", mass=off)
    notes = []
    if endpoint_mass > 0:
        notes.append("mass on ray endpoints is reported separately")
    return ConditionalFamily.from_masses(rays, masses, endpoint_mass, off, notes)


def plan_families(rs, plan):
    """Conditionals of both marginals of ``plan``, split ray by ray.

    Only moving mass is split; diagonal entries are left out of both.
    """
    per_ray, _ = split_plan(rs, plan)
    rays = rs.all_rays()
    src, dst = [], []
    for ray, entries in zip(rays, per_ray):
        pos = {p: i for i, p in enumerate(ray.points)}
        a = np.zeros(len(ray))
        b = np.zeros(len(ray))
        for x, y, mass in entries:
            a[pos[x]] += mass
            b[pos[y]] += mass
        src.append(a)
        dst.append(b)
    return ConditionalFamily.from_masses(rays, src), ConditionalFamily.from_masses(rays, dst)


# -- evolution ----------------------------------------------------------------


@dataclass
class EvolvedSet:
    points: tuple
    dropped: int
    off_ray: int


def evolve_set(A, t, rs):
    """Shift every point of A by arclength t along its ray(s), snapping to the grid.

    Landing farther than half the ray's smallest cell from any param drops
    the point (counted in ``dropped``).
    """
    rays = rs.all_rays()
    lookup = rs.ray_lookup()
    out = set()
    dropped = off = 0
    for x in sorted(set(int(a) for a in A)):
        ks = lookup.get(x)
        if not ks:
            off += 1
            continue
        for k in ks:
            par = np.asarray(rays[k].params)
            snap = np.min(np.diff(par)) / 2 if par.size > 1 else 0.0
            target = par[rays[k].points.index(x)] + t
            i = int(np.argmin(np.abs(par - target)))
            if abs(par[i] - target) <= snap + 1e-12:
                out.add(rays[k].points[i])
            else:
                dropped += 1
    return EvolvedSet(tuple(sorted(out)), dropped, off)


@dataclass
class EvolutionProfile:
    ts: np.ndarray
    masses: np.ndarray

    @property
    def support_count(self):
        return int(np.count_nonzero(self.masses > 0))

    def rows(self):
        return [(float(t), float(m)) for t, m in zip(self.ts, self.masses)]


def evolution_profile(A, mu, rs, ts):
    ts = np.asarray(ts, dtype=np.float64)
    if np.any(np.diff(ts) < 0):
        raise ValueError("sample grid must be sorted")
    masses = np.array([mu.weights[list(evolve_set(A, t, rs).points)].sum() for t in ts])
    return EvolutionProfile(ts, masses)


# -- refinement diagnostics ---------------------------------------------------


def _loglog_slope(ns, vals):
    ns = np.asarray(ns, dtype=np.float64)
    vals = np.asarray(vals, dtype=np.float64)
    if np.all(vals == 0):
        return -np.inf
    if np.any(vals <= 0):
        return np.nan
    return float(np.polyfit(np.log(ns), np.log(vals), 1)[0])


@dataclass
class RegularityReport:
    levels: list
    atom_slope: float
    density_slope: float
    initial_slope: float
    atoms_ok: bool
    density_ok: bool
    initial_ok: bool
    note: str = ("single finite spaces make the atomless and nondegeneracy conditions vacuous; "
                 "they are tested as decay or boundedness along the refinement sequence")

    @property
    def passed(self):
        return self.atoms_ok and self.density_ok and self.initial_ok

    def to_json(self):
        return {
            "levels": self.levels,
            "atom_slope": self.atom_slope,
            "density_slope": self.density_slope,
            "initial_slope": self.initial_slope,
            "atoms_ok": self.atoms_ok,
            "density_ok": self.density_ok,
            "initial_ok": self.initial_ok,
            "passed": self.passed,
            "note": self.note,
        }


def check_regularity(levels, decay_slope=-0.5, growth_slope=0.5):
    """Refinement diagnostics for a sequence of ``(space, family)`` levels.

    Atoms pass when the largest conditional atom decays at least like
    n^decay_slope; densities pass when their sup grows slower than
    n^growth_slope; initial-point mass passes when it decays (or is zero).
    """
    if len(levels) < 2:
        raise ValueError("need at least two refinement levels")
    rows = []
    for space, fam in levels:
        atoms = [float(c.max()) for c, mk in zip(fam.conditionals, fam.m) if mk > 0 and c.size]
        dens = [float(q.max()) for q, mk in zip(fam.densities, fam.m) if mk > 0 and q.size]
        init = sum(float(mk * c[0]) for c, mk in zip(fam.conditionals, fam.m) if c.size)
        rows.append({"n": int(space.n), "atom_max": max(atoms, default=0.0), "density_sup": max(dens, default=0.0),
                     "initial_mass": init})
    ns = [r["n"] for r in rows]
    sa = _loglog_slope(ns, [r["atom_max"] for r in rows])
    sd = _loglog_slope(ns, [r["density_sup"] for r in rows])
    si = _loglog_slope(ns, [r["initial_mass"] for r in rows])
    return RegularityReport(
        levels=rows,
        atom_slope=sa,
        density_slope=sd,
        initial_slope=si,
        atoms_ok=bool(sa <= decay_slope),
        density_ok=bool(sd < growth_slope) or sd == -np.inf,
        initial_ok=bool(si <= decay_slope),
    )


def _worst_mass(weights, dens, delta):
    """Largest density mass over sets of base weight below delta (cells may be cut)."""
    order = np.argsort(-dens, kind="stable")
    w = weights[order]
    r = dens[order]
    cum = np.cumsum(w)
    full = np.searchsorted(cum, delta, side="right")
    mass = float(np.dot(w[:full], r[:full]))
    if full < w.size:
        mass += (delta - (cum[full - 1] if full else 0.0)) * r[full]
    return mass, order[: full + 1].tolist()


@dataclass
class EquiintegrabilityResult:
    passed: bool
    deltas: dict
    witness: dict | None = None


def check_equintegrability(density_sequence, eps_grid, delta_grid):
    """For every eps, the largest delta on the grid such that on every level a set
    of base weight below delta carries density mass at most eps.

    ``density_sequence`` holds one ``(weights, densities)`` pair per level.
    """
    levels = [(np.asarray(w, float), np.asarray(r, float)) for w, r in density_sequence]
    deltas = {}
    witness = None
    for eps in sorted(eps_grid):
        best = None
        worst = None
        for delta in sorted(delta_grid, reverse=True):
            masses = [_worst_mass(w, r, delta) for w, r in levels]
            lvl = int(np.argmax([m for m, _ in masses]))
            if masses[lvl][0] <= eps * (1 + 1e-12):
                best = delta
                break
            worst = {"eps": eps, "delta": delta, "level": lvl, "cells": masses[lvl][1], "mass": masses[lvl][0]}
        deltas[eps] = best
        if best is None and witness is None:
            witness = worst
    return EquiintegrabilityResult(all(v is not None for v in deltas.values()), deltas, witness)
