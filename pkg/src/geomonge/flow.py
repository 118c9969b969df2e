"""Discrete transport currents along rays.

A current stores, per ray, one coefficient per interval between consecutive
ray points. Acting on per-point test tables (h, omega) it gives
``sum_y m(y) sum_k hbar_k (omega_{k+1} - omega_k) c_k`` with ``hbar`` the
interval average of h. Its boundary puts ``c_{i-1} - c_i`` at point i
(``c = 0`` past either end), so summation by parts is exact.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DivisionByZeroCell, MassMismatch, MissingDensity, OrderViolation


@dataclass
class DiscreteCurrent:
    points: list
    params: list
    m: np.ndarray
    coef: list
    n: int
    label: str = "current"

    def action(self, h, omega):
        h = np.asarray(h, dtype=np.float64)
        omega = np.asarray(omega, dtype=np.float64)
        total = 0.0
        for pts, c, mk in zip(self.points, self.coef, self.m):
            if mk == 0 or c.size == 0:
                continue
            idx = np.asarray(pts)
            hb = (h[idx[:-1]] + h[idx[1:]]) / 2
            total += mk * float(np.dot(hb * np.diff(omega[idx]), c))
        return total

    def mass_bound(self, h, omega, d):
        """Lip(omega) * sum m |hbar| |c| dt, with Lip taken against the ambient d."""
        omega = np.asarray(omega, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(omega[:, None] - omega[None, :]) / d
        np.fill_diagonal(ratio, 0.0)
        lip = float(np.nanmax(np.where(np.isfinite(ratio), ratio, 0.0)))
        h = np.asarray(h, dtype=np.float64)
        acc = 0.0
        for pts, t, c, mk in zip(self.points, self.params, self.coef, self.m):
            idx = np.asarray(pts)
            hb = np.abs(h[idx[:-1]] + h[idx[1:]]) / 2
            acc += mk * float(np.dot(hb * np.diff(t), np.abs(c)))
        return lip * acc

    def cell_table(self):
        """Rows ``(ray, t_left, t_right, coefficient)`` for CSV output."""
        rows = []
        for k, (t, c) in enumerate(zip(self.params, self.coef)):
            rows.extend((k, float(t[i]), float(t[i + 1]), float(c[i])) for i in range(c.size))
        return rows


@dataclass
class Boundary:
    measure: np.ndarray
    total_variation: float
    interior: np.ndarray
    endpoint: np.ndarray
    notes: list = field(default_factory=list)


def build_current(rs, eta_family):
    """Flow current of a disintegrated measure: coefficient = interval density."""
    if eta_family.densities is None or any(q is None for q in eta_family.densities):
        raise MissingDensity("family carries no densities")
    coef = [eta_family.interval_density(k) for k in range(eta_family.n_rays)]
    return DiscreteCurrent(list(eta_family.points), list(eta_family.params), eta_family.m.copy(), coef, rs.space.n, "flow")


def boundary(current):
    """Signed boundary measure; endpoint jumps are kept apart from interior terms."""
    out = np.zeros(current.n)
    inner = np.zeros(current.n)
    ends = np.zeros(current.n)
    tv = 0.0
    for pts, c, mk in zip(current.points, current.coef, current.m):
        if mk == 0:
            continue
        padded = np.concatenate([[0.0], c, [0.0]])
        sigma = padded[:-1] - padded[1:]
        idx = np.asarray(pts)
        np.add.at(out, idx, mk * sigma)
        np.add.at(inner, idx[1:-1], mk * sigma[1:-1])
        np.add.at(ends, idx[[0, -1]], mk * sigma[[0, -1]])
        tv += mk * float(np.abs(sigma).sum())
    notes = ["endpoint jumps are reported apart from the interior part"]
    return Boundary(out, tv, inner, ends, notes)


@dataclass
class TransportSolution:
    current: DiscreteCurrent
    l1_norm: float
    stokes_defect: float
    target: np.ndarray


def solve_transport_equation(rs, mu_family, nu_family, tol=1e-12):
    """Current U with boundary mu - nu: coefficient F - H on every interval.

    H and F are the conditional distribution functions of mu and nu on
    the open interval after each point. ``l1_norm`` is sum m (H - F) dt.
    """
    if mu_family.n_rays != nu_family.n_rays:
        raise MassMismatch("families live on different ray systems")
    coef = []
    l1 = 0.0
    for k in range(mu_family.n_rays):
        mm, mn = mu_family.m[k], nu_family.m[k]
        if abs(mm - mn) > 1e-9 * max(1.0, mm):
            raise MassMismatch(f"ray {k} carries {mm!r} of mu but {mn!r} of nu", ray=k)
        H = np.cumsum(mu_family.conditionals[k])[:-1]
        F = np.cumsum(nu_family.conditionals[k])[:-1]
        bad = np.nonzero(F > H + tol)[0]
        if bad.size and mm > 0:
            raise OrderViolation(f"F exceeds H on ray {k}", ray=k, cells=bad.tolist())
        coef.append(F - H)
        l1 += mm * float(np.dot(H - F, np.diff(mu_family.params[k])))
    U = DiscreteCurrent(list(mu_family.points), list(mu_family.params), mu_family.m.copy(), coef, rs.space.n, "U")
    target = mu_family.reassemble(rs.space.n) - nu_family.reassemble(rs.space.n)
    defect = float(np.max(np.abs(boundary(U).measure - target))) if target.size else 0.0
    return TransportSolution(U, l1, defect, target)


def density_rho(U, q_family, tol=0.0):
    """Per-interval rho with rho * q * m_eta = (F - H) * m_U.

    DIVISION_BY_ZERO_CELL lists every interval where q vanishes under a
    nonzero coefficient.
    """
    rho = []
    zero = []
    for k, (c, mk) in enumerate(zip(U.coef, U.m)):
        q = q_family.interval_density(k) * q_family.m[k]
        num = c * mk
        r = np.zeros_like(num)
        nz = q > 0
        r[nz] = num[nz] / q[nz]
        for i in np.nonzero(~nz & (np.abs(num) > tol))[0]:
            zero.append((k, int(i)))
        rho.append(r)
    if zero:
        raise DivisionByZeroCell(f"q vanishes on {len(zero)} interval(s) with nonzero flux", cells=zero)
    return rho
