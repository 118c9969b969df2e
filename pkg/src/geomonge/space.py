"""Finite geodesic metric spaces: builders, structure validation, geodesics.

A space carries two distance matrices: ``d`` (ambient, always finite) and
``dL`` (the geodesic cost, possibly ``INFINITY``). Geodesics are maximal
additive chains in ``dL``.
"""

from dataclasses import dataclass, field
from math import gcd, sqrt

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from . import _kernels
from .errors import AmbiguousGeodesic, InfiniteDistance

INFINITY = np.inf
GOLDEN = (sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class FiniteGeodesicSpace:
    d: np.ndarray
    dL: np.ndarray
    tol: float = 1e-9
    labels: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.array(self.d, dtype=np.float64)
        dL = np.array(self.dL, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or dL.shape != d.shape:
            raise ValueError("d and dL must be square matrices of equal shape")
        if self.labels is not None:
            lab = np.array(self.labels, dtype=np.float64)
            if lab.ndim == 1:
                lab = lab[:, None]
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)
        d.setflags(write=False)
        dL.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "dL", dL)
        object.__setattr__(self, "tol", float(self.tol))

    @property
    def n(self):
        return self.d.shape[0]

    def is_d_equal_dL(self):
        return bool(np.array_equal(self.d, self.dL))


@dataclass(frozen=True)
class GeodesicPath:
    points: tuple
    params: tuple

    def __len__(self):
        return len(self.points)

    def reversed(self):
        total = self.params[-1]
        return GeodesicPath(tuple(reversed(self.points)), tuple(total - p for p in reversed(self.params)))


@dataclass
class StructureReport:
    triangle_ok: bool
    additivity_violations: list
    branching_witnesses: list
    finite_components: list
    exhaustive: bool = True
    notes: list = field(default_factory=list)

    @property
    def non_branching(self):
        return not self.branching_witnesses


# -- builders -----------------------------------------------------------------


def build_segment(n_points, length=1.0, tol=1e-9):
    """Equally spaced points on ``[0, length]`` with d = dL = |x - y|."""
    if int(n_points) != n_points or n_points < 2:
        raise ValueError(f"build_segment needs at least 2 points, got {n_points}")
    if not length > 0:
        raise ValueError("length must be positive")
    x = np.linspace(0.0, float(length), int(n_points))
    D = np.abs(x[:, None] - x[None, :])
    return FiniteGeodesicSpace(D, D, tol=tol, labels=x[:, None], meta={"kind": "segment", "length": float(length)})


def from_weighted_edges(n, edges, tol=1e-9, labels=None, meta=None):
    """Shortest-path space of an undirected weighted graph; d = dL."""
    rows, cols, w = zip(*edges) if edges else ((), (), ())
    G = coo_matrix((np.asarray(w, float), (np.asarray(rows, int), np.asarray(cols, int))), shape=(n, n)).tocsr()
    D = dijkstra(G, directed=False)
    return FiniteGeodesicSpace(D, D, tol=tol, labels=labels, meta=dict(meta or {}))


def rational_alpha(q_denom):
    """Numerator p coprime to q_denom with p/q_denom closest to the golden ratio conjugate."""
    target = GOLDEN * q_denom
    cands = [p for p in range(1, q_denom) if gcd(p, q_denom) == 1]
    return min(cands, key=lambda p: (abs(p - target), p))


def _torus_dist(P, Q):
    diff = np.abs(P[:, None, :] - Q[None, :, :])
    diff = np.minimum(diff, 1.0 - diff)
    return np.sqrt((diff ** 2).sum(-1))


def build_counterexample_space(q_denom=64, strip_res=16, branch_res=1, branches=(-2, -1, 1, 2), glue=True, tol=1e-6):
    """Discretized torus gluing where cyclical monotonicity does not imply optimality.

    The main torus ``C`` is cut into ``q_denom`` lines of slope ``(alpha, 1)``
    with ``strip_res`` levels each (level 0 lies on the gluing circle S).
    Edges above height 1/2 cost four times their length. Every branch torus
    ``C^i`` contributes ``q_denom`` lines from S back to S, shifted by
    ``i * alpha``. ``alpha = p / q_denom`` approximates (sqrt 5 - 1)/2.

    The default of 16 levels is the grid on which the T+ plan passes the
    4-cycle certificate; at 24 and 32 levels a short cycle through a branch
    hop beats it.

    With ``glue=False`` every branch gets its own copy of S, which leaves the
    pieces as separate finite-dL components.
    """
    q = int(q_denom)
    M = int(strip_res)
    r = int(branch_res)
    if q < 2:
        raise ValueError("q_denom must be at least 2")
    if M < 16 or M % 8:
        raise ValueError(f"strip_res={M} too coarse: needs a multiple of 8, at least 16, to resolve A and B")
    if r < 0:
        raise ValueError("branch_res must be nonnegative")
    p = rational_alpha(q)
    alpha = p / q

    c_index = np.arange(q * M).reshape(q, M)  # c_index[j, k]: line j, level k
    coords = [np.column_stack([(np.arange(q)[:, None] / q + alpha * np.arange(M)[None, :] / M).ravel() % 1.0,
                               np.tile(np.arange(M) / M, q)])]
    comp = [np.zeros(q * M, dtype=int)]
    s_of = {0: c_index[:, 0]}  # gluing circle seen from each component
    rows, cols, wts = [], [], []

    step = sqrt(1.0 + alpha * alpha) / M
    for j in range(q):
        for k in range(M):
            a = c_index[j, k]
            b = c_index[j, k + 1] if k + 1 < M else c_index[(j + p) % q, 0]
            rows.append(a)
            cols.append(b)
            wts.append(step * (4.0 if k + 1 > M // 2 else 1.0))

    nxt = q * M
    branch_index = {}
    for ci, i in enumerate(branches, start=1):
        if glue:
            s_pts = c_index[:, 0]
        else:
            s_pts = np.arange(nxt, nxt + q)
            coords.append(np.column_stack([np.arange(q) / q, np.zeros(q)]))
            comp.append(np.full(q, ci))
            nxt += q
        s_of[i] = s_pts
        inner = np.arange(nxt, nxt + q * r).reshape(q, r)
        branch_index[i] = inner
        if r:
            hs = np.arange(1, r + 1) / (r + 1)
            xs = (np.arange(q)[:, None] / q + i * alpha * hs[None, :]) % 1.0
            coords.append(np.column_stack([xs.ravel(), np.tile(hs, q)]))
            comp.append(np.full(q * r, ci))
        nxt += q * r
        bstep = sqrt(1.0 + (i * alpha) ** 2) / (r + 1)
        for j in range(q):
            chain = [s_pts[j], *inner[j].tolist(), s_pts[(j + i * p) % q]]
            for u, v in zip(chain[:-1], chain[1:]):
                rows.append(u)
                cols.append(v)
                wts.append(bstep)

    n = nxt
    X = np.vstack(coords)
    comp = np.concatenate(comp)
    G = coo_matrix((np.array(wts), (np.array(rows), np.array(cols))), shape=(n, n)).tocsr()
    dL = dijkstra(G, directed=False)

    # ambient distance: torus distance within a piece, through S across pieces
    is_s = np.zeros(n, dtype=bool)
    is_s[c_index[:, 0]] = True
    d = np.empty((n, n))
    pieces = [0, *range(1, len(branches) + 1)]
    members = {c: np.nonzero(comp == c)[0] for c in pieces}
    if glue:
        S = X[c_index[:, 0]]
        for c in pieces[1:]:
            members[c] = np.concatenate([members[c], c_index[:, 0]])
        to_s = {c: _torus_dist(X[members[c]], S) for c in pieces}
        for c1 in pieces:
            for c2 in pieces:
                idx1, idx2 = members[c1], members[c2]
                if c1 == c2:
                    block = _torus_dist(X[idx1], X[idx2])
                else:
                    block = (to_s[c1][:, None, :] + to_s[c2][None, :, :]).min(-1)
                    # S points belong to every piece
                    s1 = is_s[idx1]
                    s2 = is_s[idx2]
                    if s1.any():
                        block[s1] = np.minimum(block[s1], _torus_dist(X[idx1[s1]], X[idx2]))
                    if s2.any():
                        block[:, s2] = np.minimum(block[:, s2], _torus_dist(X[idx1], X[idx2[s2]]))
                d[np.ix_(idx1, idx2)] = block
    else:
        d.fill(2.0)
        for c in pieces:
            idx = members[c]
            d[np.ix_(idx, idx)] = _torus_dist(X[idx], X[idx])
    np.fill_diagonal(d, 0.0)
    d = np.minimum(d, d.T)

    meta = {
        "kind": "counterexample",
        "q_denom": q,
        "alpha_num": p,
        "alpha": alpha,
        "strip_res": M,
        "branch_res": r,
        "branches": list(branches),
        "glued": bool(glue),
        "c_index": c_index,
        "branch_index": branch_index,
        "rate": sqrt(1.0 + alpha * alpha),
    }
    return FiniteGeodesicSpace(d, dL, tol=tol, labels=X, meta=meta)


def counterexample_sets(space):
    """Point sets A (heights in (1/2, 5/8)) and B (heights in (7/8, 1)) on the main torus."""
    ci = space.meta["c_index"]
    M = space.meta["strip_res"]
    lv = np.arange(M)
    A = ci[:, (lv * 2 > M) & (lv * 8 < 5 * M)]
    B = ci[:, lv * 8 > 7 * M]
    return np.sort(A.ravel()), np.sort(B.ravel())


def counterexample_maps(space):
    """The two maps A -> B: T+ climbs 3/8 through C+, T- descends 5/8 through S."""
    ci = space.meta["c_index"]
    q, M, p = space.meta["q_denom"], space.meta["strip_res"], space.meta["alpha_num"]
    up = 3 * M // 8
    A, _ = counterexample_sets(space)
    plus, minus = {}, {}
    for x in A:
        j, k = divmod(int(x), M)
        plus[int(x)] = int(ci[j, k + up])
        minus[int(x)] = int(ci[(j - p) % q, k + up])
    return plus, minus


# -- validation ---------------------------------------------------------------


def _finite_components(dL):
    fin = np.isfinite(dL)
    ncomp, lab = connected_components(fin, directed=False)
    return [np.nonzero(lab == c)[0].tolist() for c in range(ncomp)]


def _triangle_violations(M, tol, pivots, limit):
    out = []
    for k in pivots:
        with np.errstate(invalid="ignore"):
            via = M[:, k:k + 1] + M[k:k + 1, :]
            bad = M - via > tol
        if bad.any():
            for i, j in np.argwhere(bad)[: max(limit - len(out), 0)]:
                out.append(((int(i), int(k), int(j)), float(M[i, j] - via[i, j])))
            if len(out) >= limit:
                break
    return out


def validate_structure(space, max_exhaustive=600, max_report=16, seed=0):
    """Discrete checks of the metric assumptions.

    Triangle inequality (for d and dL) and non-branching are exhaustive for
    ``n <= max_exhaustive``. Larger spaces test a deterministic sample of
    pivot / start points and flag ``exhaustive=False``.
    """
    n, tol = space.n, space.tol
    # local compactness is automatic on a finite set; nothing to test
    notes = ["local compactness holds trivially and is not tested"]
    exhaustive = n <= max_exhaustive
    if exhaustive:
        pivots = np.arange(n)
    else:
        rng = np.random.default_rng(seed)
        pivots = np.sort(rng.choice(n, size=max_exhaustive // 8, replace=False))
        notes.append(f"sampled {pivots.size} of {n} pivots")

    viol = _triangle_violations(space.dL, tol, pivots, max_report)
    viol += _triangle_violations(space.d, tol, pivots, max_report - len(viol))
    sym = np.allclose(space.d, space.d.T) and np.array_equal(np.isinf(space.dL), np.isinf(space.dL.T))
    with np.errstate(invalid="ignore"):
        fin = np.isfinite(space.dL)
        below = fin & (space.dL < space.d - tol)
    if below.any():
        i, j = np.argwhere(below)[0]
        notes.append(f"dL < d at ({i},{j})")
    if not sym:
        notes.append("distance matrices not symmetric")

    if exhaustive:
        wit = _kernels.branching_witnesses(space.dL, tol, max_report)
    else:
        # witnesses are searched from the sampled starting points only
        sub = np.unique(np.concatenate([pivots, np.arange(min(n, 64))]))
        wit = np.empty((0, 4), dtype=np.int64)
        for x in sub:
            w = _branching_from(space.dL, int(x), tol)
            if w is not None:
                wit = np.vstack([wit, w])
                if len(wit) >= max_report:
                    break
    return StructureReport(
        triangle_ok=not viol and sym and not below.any(),
        additivity_violations=viol,
        branching_witnesses=[tuple(int(v) for v in row) for row in wit],
        finite_components=_finite_components(space.dL),
        exhaustive=exhaustive,
        notes=notes,
    )


def _branching_from(D, x, tol):
    row = D[x]
    fin = np.isfinite(row)
    with np.errstate(invalid="ignore"):
        between = np.abs(row[:, None] + D - row[None, :]) <= tol
    between &= fin[:, None] & fin[None, :] & np.isfinite(D)
    between[x, :] = False
    between[:, x] = False
    np.fill_diagonal(between, False)
    for z in np.nonzero(between.any(1))[0]:
        ys = np.nonzero(between[z])[0]
        if ys.size < 2:
            continue
        ys = ys[np.argsort(D[z, ys], kind="mergesort")]
        d12 = D[ys[:-1], ys[1:]]
        bad = (d12 <= tol) | ~np.isfinite(d12) | (np.abs(D[z, ys[:-1]] + d12 - D[z, ys[1:]]) > tol)
        hit = np.nonzero(bad)[0]
        if hit.size:
            r = hit[0]
            return np.array([[x, z, ys[r], ys[r + 1]]], dtype=np.int64)
    return None


# -- geodesics ----------------------------------------------------------------


def between_mask(space, x, y):
    dL, tol = space.dL, space.tol
    with np.errstate(invalid="ignore"):
        return np.abs(dL[x] + dL[:, y] - dL[x, y]) <= tol


def geodesic_between(space, x, y):
    """The maximal additive chain from x to y, ordered by distance from x."""
    dL, tol = space.dL, space.tol
    if not np.isfinite(dL[x, y]):
        raise InfiniteDistance(f"dL({x},{y}) is infinite", x=x, y=y)
    if x == y:
        return GeodesicPath((int(x),), (0.0,))
    pts = np.nonzero(between_mask(space, x, y))[0]
    order = np.lexsort((pts, dL[x, pts]))
    pts = pts[order]
    params = dL[x, pts]
    for u, v in zip(pts[:-1], pts[1:]):
        if abs(dL[x, u] + dL[u, v] - dL[x, v]) > tol or dL[u, v] <= tol:
            raise AmbiguousGeodesic(f"points {u} and {v} lie on different geodesics from {x} to {y}", x=x, y=y, witness=(int(u), int(v)))
    return GeodesicPath(tuple(int(p) for p in pts), tuple(float(t) for t in params))
