"""DIRK machinery: Butcher tableaux, stage residuals, banded Jacobians, Newton.

A DIRK stage for the semi-discrete conservation law reads

    G(u) = u - u_known + (a_kk dt / h) * (F_{j+1/2}(u) - F_{j-1/2}(u)) = 0,

where ``u_known`` already holds u^n minus the explicit contributions of the
earlier stages. With frozen reconstruction weights the interface values are
linear in u, so the only nonlinearity left is the flux function itself and
the Jacobian is a cyclic band matrix (tridiagonal for piecewise-constant
data, pentadiagonal for CWENO3).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .core import Problem
from .cweno import BedPair, CellWeightSet, constant_bed, reconstruct_bed

DIRK3_LAMBDA = 0.4358665215
DENSE_LIMIT = 64
ROUNDOFF = 1e-13


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class DegenerateAbscissaeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        c = np.array(self.c, dtype=float)
        s = b.size
        if a.shape != (s, s) or c.shape != (s,):
            raise ValueError("inconsistent tableau shapes")
        if np.any(np.triu(a, 1) != 0.0):
            raise ValueError("tableau is not lower triangular")
        if np.any(np.diag(a) == 0.0):
            raise ValueError("DIRK tableau needs a nonzero diagonal")
        for arr in (a, b, c):
            arr.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def s(self) -> int:
        return self.b.size

    @property
    def stiffly_accurate(self) -> bool:
        return bool(np.array_equal(self.a[-1], self.b))


def dirk3_tableau(lam: float = DIRK3_LAMBDA) -> ButcherTableau:
    """Three-stage, third-order, stiffly accurate DIRK of Alexander."""
    b1 = -1.5 * lam**2 + 4.0 * lam - 0.25
    b2 = 1.5 * lam**2 - 5.0 * lam + 1.25
    a = [
        [lam, 0.0, 0.0],
        [0.5 * (1.0 - lam), lam, 0.0],
        [b1, b2, lam],
    ]
    return ButcherTableau(a, [b1, b2, lam], [lam, 0.5 * (1.0 + lam), 1.0])


def composite_euler_tableau(dirk: ButcherTableau) -> ButcherTableau:
    """Chain of backward-Euler substeps through the sorted abscissae of ``dirk``."""
    c = np.sort(dirk.c)
    theta = np.diff(np.concatenate([[0.0], c]))
    if np.any(theta <= 0.0):
        raise DegenerateAbscissaeError(f"abscissae must be distinct and positive: {dirk.c}")
    s = c.size
    a = np.tril(np.tile(theta, (s, 1)))
    return ButcherTableau(a, theta, c)


# -- cyclic band matrices ------------------------------------------------------

@dataclass
class CyclicBandedMatrix:
    """Square matrix whose row i has entries only in columns (i + d) mod n, |d| <= hb.

    ``bands[hb + d, i]`` stores M[i, (i + d) mod n]; entries that wrap around
    are the periodic corner couplings.
    """

    bands: np.ndarray
    half_bandwidth: int

    def __post_init__(self):
        self.bands = np.asarray(self.bands, dtype=float)
        if self.bands.shape[0] != 2 * self.half_bandwidth + 1:
            raise ValueError("bands has the wrong number of diagonals")
        if self.n <= 2 * self.half_bandwidth:
            raise ValueError(f"n={self.n} too small for half bandwidth {self.half_bandwidth}")

    @property
    def n(self) -> int:
        return self.bands.shape[1]

    @classmethod
    def identity(cls, n: int, half_bandwidth: int = 1) -> "CyclicBandedMatrix":
        bands = np.zeros((2 * half_bandwidth + 1, n))
        bands[half_bandwidth] = 1.0
        return cls(bands, half_bandwidth)

    @classmethod
    def from_dense(cls, dense: np.ndarray, half_bandwidth: int) -> "CyclicBandedMatrix":
        n = dense.shape[0]
        rows = np.arange(n)
        bands = np.empty((2 * half_bandwidth + 1, n))
        for d in range(-half_bandwidth, half_bandwidth + 1):
            bands[half_bandwidth + d] = dense[rows, (rows + d) % n]
        return cls(bands, half_bandwidth)

    def to_dense(self) -> np.ndarray:
        n, hb = self.n, self.half_bandwidth
        dense = np.zeros((n, n))
        rows = np.arange(n)
        for d in range(-hb, hb + 1):
            dense[rows, (rows + d) % n] += self.bands[hb + d]
        return dense

    def matvec(self, x: np.ndarray) -> np.ndarray:
        hb = self.half_bandwidth
        out = np.zeros_like(np.asarray(x, dtype=float))
        for d in range(-hb, hb + 1):
            out += self.bands[hb + d] * np.roll(x, -d)
        return out

    def norm_inf(self) -> float:
        return float(np.max(np.sum(np.abs(self.bands), axis=0)))


def _dense_solve(m: CyclicBandedMatrix, rhs: np.ndarray) -> np.ndarray:
    dense = m.to_dense()
    with warnings.catch_warnings():
        # singularity is reported through SingularMatrixError below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(dense, check_finite=False)
    scale = max(np.max(np.abs(dense)), np.finfo(float).tiny)
    if np.min(np.abs(np.diag(lu))) < 1e-14 * scale:
        raise SingularMatrixError("matrix is numerically singular")
    return scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)


def _lapack_band(m: CyclicBandedMatrix) -> np.ndarray:
    """Non-cyclic part of ``m`` in LAPACK gbtrf storage (with kl extra rows)."""
    hb, n = m.half_bandwidth, m.n
    ab = np.zeros((3 * hb + 1, n))
    # gbtrf layout: ab[kl + ku + i - j, j] = M[i, j]
    for d in range(-hb, hb + 1):
        row = 2 * hb - d
        if d >= 0:
            ab[row, d:] = m.bands[hb + d, : n - d]
        else:
            ab[row, : n + d] = m.bands[hb + d, -d:]
    return ab


def cyclic_banded_solve(m: CyclicBandedMatrix, rhs) -> np.ndarray:
    """Solve M x = rhs for a cyclic band matrix.

    Small systems go through dense LU. Larger ones factor the non-cyclic band
    with LAPACK and fold the corner blocks back in with a Woodbury correction
    of rank 2 * half_bandwidth.
    """
    rhs = np.asarray(rhs, dtype=float)
    if m.n <= DENSE_LIMIT:
        return _dense_solve(m, rhs)

    n, hb = m.n, m.half_bandwidth
    lu, piv, info = lapack.dgbtrf(_lapack_band(m), hb, hb)
    scale = max(float(np.max(np.abs(m.bands))), np.finfo(float).tiny)
    if info > 0 or np.min(np.abs(lu[2 * hb])) < 1e-14 * scale:
        raise SingularMatrixError("band factorization hit a near-zero pivot")

    # corner rows: the first hb rows couple to the last hb columns and vice versa
    k = 2 * hb
    U = np.zeros((n, k))
    C = np.zeros((k, n))
    for r in range(hb):
        U[r, r] = 1.0
        U[n - hb + r, hb + r] = 1.0
        for d in range(-hb, hb + 1):
            col = r + d
            if col < 0:
                C[r, n + col] = m.bands[hb + d, r]
            row = n - hb + r
            col = row + d
            if col >= n:
                C[hb + r, col - n] = m.bands[hb + d, row]

    block = np.column_stack([rhs, U])
    sol, info = lapack.dgbtrs(lu, hb, hb, block, piv)
    if info != 0:
        raise SingularMatrixError(f"dgbtrs failed with info={info}")
    y, Z = sol[:, 0], sol[:, 1:]
    cap = np.eye(k) + C @ Z
    try:
        corr = np.linalg.solve(cap, C @ y)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("Woodbury capacitance matrix is singular") from exc
    return y - Z @ corr


# -- stage residuals and Jacobians ---------------------------------------------

def interface_flux(values, problem: Problem, alpha: float,
                   weights: Optional[CellWeightSet] = None) -> np.ndarray:
    """Lax-Friedrichs flux at every x_{j+1/2}; piecewise constant data if ``weights`` is None."""
    bed = constant_bed(values) if weights is None else reconstruct_bed(values, weights)
    return _lxf(bed, problem, alpha)


def _lxf(bed: BedPair, problem: Problem, alpha: float) -> np.ndarray:
    f = problem.flux
    return 0.5 * (f(bed.u_plus) + f(bed.u_minus) - alpha * (bed.u_plus - bed.u_minus))


def flux_difference(flux: np.ndarray) -> np.ndarray:
    return flux - np.roll(flux, 1)


def stage_residual(u_guess, u_known, a_kk: float, dt: float, h: float,
                   flux_eval: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """G(u) = u - u_known + (a_kk dt / h) * (F_{j+1/2} - F_{j-1/2})."""
    u = np.asarray(u_guess, dtype=float)
    return u - u_known + (a_kk * dt / h) * flux_difference(flux_eval(u))


def assemble_jacobian(u_point, a_kk: float, dt: float, h: float, problem: Problem,
                      alpha: float, weights: Optional[CellWeightSet] = None) -> CyclicBandedMatrix:
    """Exact derivative of ``stage_residual`` with frozen reconstruction weights.

    ``weights=None`` selects piecewise-constant data (half bandwidth 1);
    otherwise the CWENO edge coefficients give half bandwidth 2.
    """
    u = np.asarray(u_point, dtype=float)
    n = u.size
    r = a_kk * dt / h
    df = problem.flux_derivative
    if weights is None:
        gm = 0.5 * (df(u) + alpha)
        gp = 0.5 * (df(np.roll(u, -1)) - alpha)
        bands = np.empty((3, n))
        bands[0] = -r * np.roll(gm, 1)
        bands[1] = 1.0 + r * (gm - np.roll(gp, 1))
        bands[2] = r * gp
        return CyclicBandedMatrix(bands, 1)

    bed = reconstruct_bed(u, weights)
    gm = 0.5 * (df(bed.u_minus) + alpha)
    gp = 0.5 * (df(bed.u_plus) - alpha)
    wm = weights.w_minus
    wp_next = np.roll(weights.w_plus, -1, axis=0)
    # D[:, d + 1] = dF_{j+1/2} / du_{j+d}, d = -1..2
    D = np.zeros((n, 4))
    D[:, 0:3] += gm[:, None] * wm
    D[:, 1:4] += gp[:, None] * wp_next
    D_prev = np.roll(D, 1, axis=0)
    bands = np.zeros((5, n))
    # row j, offset e: D[j, e] - D[j-1, e+1]
    for e in range(-2, 3):
        val = np.zeros(n)
        if -1 <= e <= 2:
            val += D[:, e + 1]
        if -2 <= e <= 1:
            val -= D_prev[:, e + 2]
        bands[e + 2] = r * val
    bands[2] += 1.0
    return CyclicBandedMatrix(bands, 2)


# -- Newton --------------------------------------------------------------------

@dataclass(frozen=True)
class NewtonReport:
    iterations: int
    final_residual_norm: float
    converged: bool


class NewtonDivergenceError(RuntimeError):
    def __init__(self, message: str, report: Optional[NewtonReport] = None):
        super().__init__(message)
        self.report = report


def newton_solve(residual: Callable[[np.ndarray], np.ndarray],
                 jacobian: Callable[[np.ndarray], CyclicBandedMatrix],
                 guess, tol: float, max_iter: int = 50, residual_scale: float = 1.0):
    """Newton iteration with a direct cyclic banded solve per step.

    Converged when both ``|G|_inf / residual_scale`` and the relative update
    ``|du|_inf / |u|_inf`` are at most ``tol``. A residual already at
    round-off level also stops the loop, since a further update could only
    confirm it; an affine residual therefore finishes after one iteration.
    A guess whose scaled residual is below ``tol`` is returned untouched.

    The reported ``final_residual_norm`` is the unscaled infinity norm.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    u = np.array(guess, dtype=float)
    res = residual(u)
    rnorm = float(np.max(np.abs(res)))
    if rnorm <= tol * residual_scale:
        return u, NewtonReport(0, rnorm, True)
    for it in range(1, max_iter + 1):
        delta = cyclic_banded_solve(jacobian(u), -res)
        u = u + delta
        res = residual(u)
        rnorm = float(np.max(np.abs(res)))
        if not np.isfinite(rnorm):
            return u, NewtonReport(it, rnorm, False)
        unorm = float(np.max(np.abs(u)))
        dnorm = float(np.max(np.abs(delta)))
        if rnorm <= ROUNDOFF * max(unorm, 1.0):
            return u, NewtonReport(it, rnorm, True)
        if rnorm <= tol * residual_scale and dnorm <= tol * unorm:
            return u, NewtonReport(it, rnorm, True)
    return u, NewtonReport(max_iter, rnorm, False)
