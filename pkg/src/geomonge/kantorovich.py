"""Desk-scale Kantorovich oracle, cyclical-monotonicity certificates, potentials."""

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import _kernels
from .errors import InfeasibleMass, NegativeCycle, NoFiniteCoupling

MASS_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Nonnegative weights indexed by point; the total is not normalized."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).ravel()
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ValueError("measure weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_atoms(cls, n, atoms):
        w = np.zeros(n)
        for i, m in dict(atoms).items() if isinstance(atoms, dict) else atoms:
            w[int(i)] += float(m)
        return cls(w)

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n))

    @property
    def n(self):
        return self.weights.size

    @property
    def total(self):
        return float(self.weights.sum())

    def support(self):
        return np.nonzero(self.weights > 0)[0]

    def atoms(self):
        return [(int(i), float(self.weights[i])) for i in self.support()]

    def __add__(self, other):
        return DiscreteMeasure(self.weights + other.weights)

    def scaled(self, lam):
        return DiscreteMeasure(self.weights * float(lam))

    def minimum(self, other):
        return DiscreteMeasure(np.minimum(self.weights, other.weights))

    def permuted(self, perm):
        """Relabel: new point ``perm[i]`` carries the old weight of ``i``."""
        w = np.empty_like(self.weights)
        w[np.asarray(perm)] = self.weights
        return DiscreteMeasure(w)


class TransportPlan:
    """Sparse coupling. Entries are merged per pair; nonpositive masses are dropped."""

    def __init__(self, n, entries, cost=None):
        acc = {}
        for i, j, m in entries:
            if m > 0:
                key = (int(i), int(j))
                acc[key] = acc.get(key, 0.0) + float(m)
        self.n = int(n)
        self.entries = tuple((i, j, m) for (i, j), m in sorted(acc.items()))
        left = np.zeros(self.n)
        right = np.zeros(self.n)
        for i, j, m in self.entries:
            left[i] += m
            right[j] += m
        self.left_marginal = DiscreteMeasure(left)
        self.right_marginal = DiscreteMeasure(right)
        self.cost_cache = cost

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        return f"TransportPlan(n={self.n}, entries={len(self.entries)}, cost={self.cost_cache})"

    @property
    def total(self):
        return float(sum(m for _, _, m in self.entries))

    def support(self):
        return [(i, j) for i, j, _ in self.entries]

    def arrays(self):
        if not self.entries:
            return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
        i, j, m = zip(*self.entries)
        return np.array(i), np.array(j), np.array(m)

    def cost(self, space):
        i, j, m = self.arrays()
        return float(np.dot(space.dL[i, j], m)) if m.size else 0.0

    def diagonal_mass(self):
        w = np.zeros(self.n)
        for i, j, m in self.entries:
            if i == j:
                w[i] += m
        return w

    def with_cost(self, space):
        return TransportPlan(self.n, self.entries, cost=self.cost(space))

    def permuted(self, perm):
        perm = np.asarray(perm)
        return TransportPlan(self.n, [(perm[i], perm[j], m) for i, j, m in self.entries], self.cost_cache)

    def to_json(self):
        return {"entries": [[i, j, m] for i, j, m in self.entries], "cost": self.cost_cache}

    @classmethod
    def from_json(cls, n, data):
        return cls(n, [tuple(e) for e in data["entries"]], cost=data.get("cost"))


@dataclass
class PotentialPair:
    phi: np.ndarray
    psi: np.ndarray
    base: int

    def dual_value(self, mu, nu):
        """J(phi, psi) over the finite part of both potentials."""
        with np.errstate(invalid="ignore"):
            a = np.where(mu.weights > 0, self.phi * mu.weights, 0.0)
            b = np.where(nu.weights > 0, self.psi * nu.weights, 0.0)
        return float(a.sum() + b.sum())

    def admissible(self, space, tol=None):
        """phi(x) + psi(y) <= dL(x, y) on all pairs where everything is finite."""
        tol = space.tol if tol is None else tol
        with np.errstate(invalid="ignore"):
            s = self.phi[:, None] + self.psi[None, :]
            ok = np.isfinite(s) & np.isfinite(space.dL)
            return bool(np.all(s[ok] <= space.dL[ok] + tol))


@dataclass
class MonotoneCertificate:
    passed: bool
    max_cycle: int
    n_checked: int
    cycle: list | None = None
    defect: float = 0.0
    full_passed: bool | None = None
    full_min_cycle_value: float | None = None
    notes: list = field(default_factory=list)

    def to_json(self):
        return {
            "passed": self.passed,
            "max_cycle": self.max_cycle,
            "n_checked": self.n_checked,
            "cycle": self.cycle,
            "defect": self.defect,
            "full_passed": self.full_passed,
            "full_min_cycle_value": self.full_min_cycle_value,
        }


# -- oracle -------------------------------------------------------------------


def _check_totals(mu, nu):
    scale = max(1.0, mu.total, nu.total)
    if abs(mu.total - nu.total) > MASS_RTOL * scale:
        raise InfeasibleMass(f"total masses differ: {mu.total!r} vs {nu.total!r}", mu=mu.total, nu=nu.total)


def _forest_flows(rows, cols, src, dst):
    """Flows on a bipartite forest with given row/column sums (leaf peeling).

    Returns None when the edge set contains a cycle.
    """
    m = len(rows)
    adj = {}
    for e, (r, c) in enumerate(zip(rows, cols)):
        adj.setdefault(("r", r), set()).add(e)
        adj.setdefault(("c", c), set()).add(e)
    rem = {("r", r): v for r, v in src.items()}
    rem.update({("c", c): v for c, v in dst.items()})
    flow = [None] * m
    leaves = sorted(k for k, es in adj.items() if len(es) == 1)
    done = 0
    while leaves:
        node = leaves.pop(0)
        if len(adj[node]) != 1:
            continue
        (e,) = adj[node]
        flow[e] = rem[node]
        other = ("c", cols[e]) if node[0] == "r" else ("r", rows[e])
        rem[other] -= flow[e]
        adj[node].discard(e)
        adj[other].discard(e)
        done += 1
        if len(adj[other]) == 1:
            leaves.append(other)
            leaves.sort()
    if done < m:
        return None
    return flow


def solve_kantorovich(space, mu, nu):
    """Minimize sum dL(x, y) pi(x, y) over couplings of mu and nu (exact LP)."""
    _check_totals(mu, nu)
    I, J = mu.support(), nu.support()
    if I.size == 0:
        return TransportPlan(space.n, [], cost=0.0)
    C = space.dL[np.ix_(I, J)]
    fin = np.isfinite(C)
    if not fin.any(1).all() or not fin.any(0).all():
        raise NoFiniteCoupling("some atom has no finite-cost partner")
    ri, ci = np.nonzero(fin)
    nvar = ri.size
    A = np.zeros((I.size + J.size, nvar))
    A[ri, np.arange(nvar)] = 1.0
    A[I.size + ci, np.arange(nvar)] = 1.0
    b = np.concatenate([mu.weights[I], nu.weights[J]])
    # one balance row is redundant; drop it so the system has full rank
    res = linprog(C[ri, ci], A_eq=A[:-1], b_eq=b[:-1], bounds=(0, None), method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10, "presolve": False})
    if res.status == 2:
        raise NoFiniteCoupling("every coupling uses an infinite-cost pair")
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    x = res.x
    keep = x > 1e-13 * max(1.0, mu.total)
    rows, cols = ri[keep].tolist(), ci[keep].tolist()
    flows = _forest_flows(rows, cols, dict(enumerate(mu.weights[I])), dict(enumerate(nu.weights[J])))
    if flows is None or min(flows) < -1e-12 * max(1.0, mu.total):
        flows = x[keep].tolist()
    entries = [(I[r], J[c], f) for r, c, f in zip(rows, cols, flows)]
    plan = TransportPlan(space.n, entries)
    return plan.with_cost(space)


def enumerate_vertex_couplings(space, mu, nu, max_atoms=6):
    """All vertices of the transport polytope (spanning-forest bases), deduplicated."""
    _check_totals(mu, nu)
    I, J = mu.support(), nu.support()
    if I.size + J.size > max_atoms:
        raise ValueError(f"{I.size + J.size} atoms exceed the enumeration limit {max_atoms}")
    edges = [(r, c) for r in range(I.size) for c in range(J.size)]
    k = I.size + J.size - 1
    seen = {}
    for subset in itertools.combinations(range(len(edges)), k):
        rows = [edges[e][0] for e in subset]
        cols = [edges[e][1] for e in subset]
        flows = _forest_flows(rows, cols, dict(enumerate(mu.weights[I])), dict(enumerate(nu.weights[J])))
        if flows is None or min(flows) < -1e-12:
            continue
        entries = tuple(sorted((int(I[r]), int(J[c]), f) for r, c, f in zip(rows, cols, flows) if f > 1e-15))
        key = tuple((i, j) for i, j, _ in entries)
        if key not in seen:
            seen[key] = TransportPlan(space.n, entries).with_cost(space)
    return [seen[key] for key in sorted(seen)]


# -- certification ------------------------------------------------------------


def support_cost_matrix(space, pairs):
    """C[a, b] = dL(x_a, y_b) for support pairs (x_a, y_a)."""
    xs = np.array([p[0] for p in pairs], dtype=int)
    ys = np.array([p[1] for p in pairs], dtype=int)
    return space.dL[np.ix_(xs, ys)]


def _shift_graph(C):
    # W[a, b] = C[b, a] - C[a, a]; a negative closed walk is a violating cycle
    with np.errstate(invalid="ignore"):
        return C.T - np.diag(C)[:, None]


def certify_monotone(space, plan, max_cycle=4, full=True, tol=None, backend=None):
    """Bounded-length cyclical monotonicity check of the plan's support.

    Cycles of distinct support pairs of length 2..max_cycle are scanned by
    length, then lexicographically; the first violation is reported. With
    ``full=True`` a negative-cycle search on the support graph decides
    monotonicity at every length.
    """
    if max_cycle < 2:
        raise ValueError("max_cycle must be at least 2")
    pairs = plan.support() if isinstance(plan, TransportPlan) else list(plan)
    if not pairs:
        raise ValueError("cannot certify an empty plan")
    tol = space.tol if tol is None else tol
    C = support_cost_matrix(space, pairs)
    cyc, defect, checked = _kernels.first_violating_cycle(C, max_cycle, tol, backend=backend)
    cert = MonotoneCertificate(
        passed=cyc is None,
        max_cycle=int(max_cycle),
        n_checked=int(checked),
        cycle=None if cyc is None else [list(pairs[k]) for k in cyc],
        defect=float(defect),
    )
    if full:
        D = _kernels.min_plus_closure(_shift_graph(C), backend=backend, tol=tol)
        low = float(np.min(np.diag(D)))
        cert.full_min_cycle_value = low if np.isfinite(low) else None
        cert.full_passed = bool(low >= -tol)
    return cert


def compute_potential(space, plan, base):
    """Potential with phi(base) = 0 and phi(x) - phi(y) = dL(x, y) on support pairs.

    phi(x) = min_k [P_k + dL(x, y_k) - dL(x_k, y_k)], where P_k is the
    cheapest chain from the pseudo-pair (base, base) to support pair k.
    Points outside the finite component of ``base`` get +inf.
    """
    pairs = [(int(base), int(base))] + [p for p in plan.support()]
    C = support_cost_matrix(space, pairs)
    D = _kernels.min_plus_closure(_shift_graph(C), tol=space.tol)
    if np.min(np.diag(D)) < -space.tol:
        raise NegativeCycle("support is not cyclically monotone", min_cycle=float(np.min(np.diag(D))))
    P = D[0]
    xs = np.array([p[0] for p in pairs])
    ys = np.array([p[1] for p in pairs])
    with np.errstate(invalid="ignore"):
        cand = P[None, :] + space.dL[:, ys] - space.dL[xs, ys][None, :]
    cand = np.where(np.isnan(cand), np.inf, cand)
    phi = cand.min(1)
    phi[base] = 0.0 if np.isfinite(phi[base]) else phi[base]
    psi = np.where(np.isfinite(phi), -phi, -np.inf)
    return PotentialPair(phi=phi, psi=psi, base=int(base))


def slackness_defect(space, pot, plan):
    """max |phi(x) - phi(y) - dL(x, y)| over support pairs where phi is finite."""
    worst = 0.0
    for i, j, _ in plan.entries:
        if np.isfinite(pot.phi[i]) and np.isfinite(pot.phi[j]):
            worst = max(worst, abs(pot.phi[i] - pot.phi[j] - space.dL[i, j]))
    return worst
