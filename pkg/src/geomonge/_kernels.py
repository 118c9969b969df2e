"""Hot loops: cycle enumeration, min-plus closure, branching search.

Each kernel has a numba-compiled loop version and a pure-numpy version.
The active backend is chosen once at import from ``GEOMONGE_BACKEND``
(``numba`` or ``numpy``); numba is the default when it imports cleanly.
Both versions return identical results, which the test-suite checks.
"""

import itertools
import os

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAS_NUMBA = False

_requested = os.environ.get("GEOMONGE_BACKEND", "numba").strip().lower()
BACKEND = "numba" if (HAS_NUMBA and _requested != "numpy") else "numpy"


def _njit(fn):
    if HAS_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


# ---------------------------------------------------------------------------
# cyclical monotonicity: first violating cycle in (length, lexicographic) order
# ---------------------------------------------------------------------------


@_njit
def _first_violation_fixed_len(C, L, tol):
    n = C.shape[0]
    stack = np.zeros(L, dtype=np.int64)
    used = np.zeros(n, dtype=np.bool_)
    partial = np.zeros(L + 1, dtype=np.float64)
    checked = 0
    for k0 in range(n):
        stack[0] = k0
        used[k0] = True
        partial[1] = C[k0, k0]
        d = 1
        stack[1] = k0
        while d >= 1:
            c = stack[d] + 1
            while c < n and used[c]:
                c += 1
            if c >= n:
                d -= 1
                if d >= 1:
                    used[stack[d]] = False
                continue
            stack[d] = c
            s = partial[d] + C[c, c] - C[c, stack[d - 1]]
            if d == L - 1:
                checked += 1
                defect = s - C[k0, c]
                if defect > tol:
                    return stack.copy(), defect, checked
                continue
            used[c] = True
            partial[d + 1] = s
            d += 1
            stack[d] = k0
        used[k0] = False
    return np.empty(0, dtype=np.int64), 0.0, checked


def _first_violation_numba(C, max_cycle, tol):
    total = 0
    for L in range(2, max_cycle + 1):
        cyc, defect, checked = _first_violation_fixed_len(C, L, tol)
        total += int(checked)
        if cyc.size:
            return [int(k) for k in cyc], float(defect), total
    return None, 0.0, total


def _first_violation_numpy(C, max_cycle, tol):
    n = C.shape[0]
    diag = np.diag(C)
    idx = np.arange(n)
    total = 0
    for L in range(2, max_cycle + 1):
        if L > n:
            break
        if L == 2:
            for k0 in range(n):
                b = idx[k0 + 1:]
                if b.size == 0:
                    continue
                d = diag[k0] + diag[b] - C[b, k0] - C[k0, b]
                total += b.size
                hit = np.nonzero(d > tol)[0]
                if hit.size:
                    j = hit[0]
                    return [k0, int(b[j])], float(d[j]), total - (b.size - j - 1)
            continue
        for k0 in range(n):
            rest = idx[k0 + 1:]
            for mid in itertools.permutations(rest.tolist(), L - 3):
                prefix = (k0,) + mid
                s = diag[list(prefix)].sum()
                for i in range(1, len(prefix)):
                    s -= C[prefix[i], prefix[i - 1]]
                prev = prefix[-1]
                ok = np.ones(n, dtype=bool)
                ok[: k0 + 1] = False
                ok[list(mid)] = False
                a = idx[ok]
                if a.size < 2:
                    continue
                A, B = np.meshgrid(a, a, indexing="ij")
                valid = A != B
                d = s + diag[A] + diag[B] - C[A, prev] - C[B, A] - C[k0, B]
                total += int(valid.sum())
                hit = np.argwhere(valid & (d > tol))
                if hit.size:
                    i, j = hit[0]
                    # count only cycles up to and including the hit, row-major
                    before = valid.copy()
                    flat = i * a.size + j
                    before.ravel()[flat + 1:] = False
                    total -= int(valid.sum()) - int(before.sum())
                    return list(prefix) + [int(a[i]), int(a[j])], float(d[i, j]), total
    return None, 0.0, total


def first_violating_cycle(C, max_cycle, tol, backend=None):
    """Scan cycles of distinct support pairs for a cyclical-monotonicity violation.

    ``C[a, b]`` is the cost from the source of pair ``a`` to the target of
    pair ``b``. A cycle ``k_0 .. k_{L-1}`` (with ``k_0`` its smallest index)
    violates when ``sum C[k_i, k_i] - sum C[k_{i+1}, k_i] > tol``. Cycles are
    visited by length, then lexicographically; the first violation wins.

    Returns ``(cycle or None, defect, n_checked)``.
    """
    C = np.ascontiguousarray(C, dtype=np.float64)
    backend = backend or BACKEND
    if backend == "numba" and HAS_NUMBA:
        return _first_violation_numba(C, int(max_cycle), float(tol))
    return _first_violation_numpy(C, int(max_cycle), float(tol))


# ---------------------------------------------------------------------------
# min-plus closure (Floyd-Warshall)
# ---------------------------------------------------------------------------


@_njit
def _min_plus_closure_loops(D, eps):
    n = D.shape[0]
    for k in range(n):
        for i in range(n):
            dik = D[i, k]
            if dik == np.inf:
                continue
            for j in range(n):
                v = dik + D[k, j]
                if v < D[i, j] - eps:
                    D[i, j] = v
    return D


def _min_plus_closure_numpy(D, eps):
    n = D.shape[0]
    for k in range(n):
        cand = D[:, k:k + 1] + D[k:k + 1, :]
        np.copyto(D, cand, where=cand < D - eps)
    return D


def min_plus_closure(W, backend=None, tol=0.0):
    """All-pairs shortest walks for an edge-weight matrix (negative weights allowed).

    A negative diagonal entry in the result signals a negative cycle.
    Updates smaller than ``tol / (4 n)`` are skipped: with zero-weight
    cycles, round-off would otherwise compound through the in-place
    updates. Results are then within ``tol / 4`` of the exact values.
    """
    D = np.array(W, dtype=np.float64, copy=True)
    eps = float(tol) / (4 * max(D.shape[0], 1))
    backend = backend or BACKEND
    if backend == "numba" and HAS_NUMBA:
        return _min_plus_closure_loops(D, eps)
    return _min_plus_closure_numpy(D, eps)


# ---------------------------------------------------------------------------
# discrete branching witnesses
# ---------------------------------------------------------------------------


@_njit
def _branching_loops(D, tol, max_witnesses):
    n = D.shape[0]
    out = np.full((max_witnesses, 4), -1, dtype=np.int64)
    found = 0
    ys = np.empty(n, dtype=np.int64)
    keys = np.empty(n, dtype=np.float64)
    for x in range(n):
        for z in range(n):
            if z == x:
                continue
            dxz = D[x, z]
            if dxz == np.inf:
                continue
            m = 0
            for y in range(n):
                if y == z or y == x:
                    continue
                dzy = D[z, y]
                dxy = D[x, y]
                if dzy == np.inf or dxy == np.inf:
                    continue
                if abs(dxz + dzy - dxy) <= tol:
                    ys[m] = y
                    keys[m] = dzy
                    m += 1
            if m < 2:
                continue
            order = np.argsort(keys[:m], kind="mergesort")
            for r in range(m - 1):
                y1 = ys[order[r]]
                y2 = ys[order[r + 1]]
                d12 = D[y1, y2]
                if d12 <= tol or d12 == np.inf or abs(D[z, y1] + d12 - D[z, y2]) > tol:
                    out[found, 0] = x
                    out[found, 1] = z
                    out[found, 2] = y1
                    out[found, 3] = y2
                    found += 1
                    if found >= max_witnesses:
                        return out
                    break
    return out[:found]


def _branching_numpy(D, tol, max_witnesses):
    n = D.shape[0]
    out = []
    finite = np.isfinite(D)
    for x in range(n):
        # add[z, y]: z lies between x and y
        with np.errstate(invalid="ignore"):
            add = np.abs(D[x, :, None] + D - D[x, None, :]) <= tol
        add &= finite[x, :, None] & finite & finite[x, None, :]
        add[:, x] = False
        np.fill_diagonal(add, False)
        add[x, :] = False
        for z in range(n):
            ys = np.nonzero(add[z])[0]
            if ys.size < 2:
                continue
            ys = ys[np.argsort(D[z, ys], kind="mergesort")]
            y1, y2 = ys[:-1], ys[1:]
            d12 = D[y1, y2]
            with np.errstate(invalid="ignore"):
                bad = (d12 <= tol) | ~np.isfinite(d12) | (np.abs(D[z, y1] + d12 - D[z, y2]) > tol)
            hit = np.nonzero(bad)[0]
            if hit.size:
                r = hit[0]
                out.append((x, z, int(y1[r]), int(y2[r])))
                if len(out) >= max_witnesses:
                    return np.array(out, dtype=np.int64)
    return np.array(out, dtype=np.int64).reshape(-1, 4)


def branching_witnesses(D, tol, max_witnesses=16, backend=None):
    """Quadruples ``(x, z, y1, y2)``: z is strictly between x and both y's,
    but y1 and y2 are not on a common continuation beyond z.

    ``D`` is a (sub)matrix of the geodesic distance; indices refer to its rows.
    """
    D = np.ascontiguousarray(D, dtype=np.float64)
    backend = backend or BACKEND
    max_witnesses = max(int(max_witnesses), 1)
    if backend == "numba" and HAS_NUMBA:
        return _branching_loops(D, float(tol), max_witnesses)
    return _branching_numpy(D, float(tol), max_witnesses)
