"""Third-order CWENO reconstruction on a uniform periodic mesh.

All functions are vectorized: stencil arguments may be scalars or arrays of
the same shape. Polynomials are handled in the scaled variable
xi = (x - x_j) / h, so h only appears through b*h and c*h**2.

Once the nonlinear weights of a cell are known, the reconstruction at the
two cell edges collapses to two fixed 3-point coefficient vectors
(``w_minus`` at x_{j+1/2}, ``w_plus`` at x_{j-1/2}) acting on
(u_{j-1}, u_j, u_{j+1}). Frozen weights therefore make the boundary values
linear in the cell averages.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

# edge values of the three candidate polynomials, as coefficients of (u_{j-1}, u_j, u_{j+1})
_OPT_RIGHT = np.array([-1.0, 5.0, 2.0]) / 6.0
_OPT_LEFT = np.array([2.0, 5.0, -1.0]) / 6.0
_PL_RIGHT = np.array([-0.5, 1.5, 0.0])
_PL_LEFT = np.array([0.5, 0.5, 0.0])
_PR_RIGHT = np.array([0.0, 0.5, 0.5])
_PR_LEFT = np.array([0.0, 1.5, -0.5])


@dataclass(frozen=True)
class LinearWeights:
    c0: float = 0.5
    cL: float = 0.25
    cR: float = 0.25

    def __post_init__(self):
        for name in ("c0", "cL", "cR"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"linear weight {name}={v} outside (0, 1)")
        if abs(self.c0 + self.cL + self.cR - 1.0) > 1e-14:
            raise ValueError("linear weights must sum to 1")


DEFAULT_WEIGHTS = LinearWeights()


class PolyCoeffs(NamedTuple):
    """a + b (x - x_j) + c (x - x_j)**2."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray


class CellWeightSet(NamedTuple):
    """Nonlinear weights and the collapsed edge coefficients of each cell.

    ``w_minus[j]`` reconstructs the value at the right edge of cell j and
    ``w_plus[j]`` the value at its left edge; both have shape (n, 3).
    """

    w0: np.ndarray
    wL: np.ndarray
    wR: np.ndarray
    w_minus: np.ndarray
    w_plus: np.ndarray


class BedPair(NamedTuple):
    """Boundary extrapolated data at every interface x_{j+1/2}."""

    u_minus: np.ndarray
    u_plus: np.ndarray


def optimal_poly(u_m, u_c, u_p, h) -> PolyCoeffs:
    u_m, u_c, u_p = (np.asarray(v, dtype=float) for v in (u_m, u_c, u_p))
    a = (-u_p + 26.0 * u_c - u_m) / 24.0
    b = (u_p - u_m) / (2.0 * h)
    c = (u_p - 2.0 * u_c + u_m) / (2.0 * h * h)
    return PolyCoeffs(a, b, c)


def central_poly(u_m, u_c, u_p, h, linear: LinearWeights = DEFAULT_WEIGHTS) -> PolyCoeffs:
    """Coefficients A, B, C of P_0 = (P_opt - cL P_L - cR P_R) / c0."""
    u_m, u_c, u_p = (np.asarray(v, dtype=float) for v in (u_m, u_c, u_p))
    a, _, c = optimal_poly(u_m, u_c, u_p, h)
    c0, cL, cR = linear.c0, linear.cL, linear.cR
    A = a / c0 - (cL + cR) / c0 * u_c
    B = ((1.0 - 2.0 * cR) * u_p - (2.0 * cL - 2.0 * cR) * u_c + (2.0 * cL - 1.0) * u_m) / (2.0 * c0 * h)
    C = c / c0
    return PolyCoeffs(A, B, C)


def smoothness_indicators(u_m, u_c, u_p, h=1.0):
    """Jiang-Shu indicators (I_L, I_0, I_R) of the left, central and right candidates."""
    u_m, u_c, u_p = (np.asarray(v, dtype=float) for v in (u_m, u_c, u_p))
    bh = 0.5 * (u_p - u_m)
    ch2 = 0.5 * (u_p - 2.0 * u_c + u_m)
    I_L = (u_c - u_m) ** 2
    I_R = (u_p - u_c) ** 2
    I_0 = bh * bh + (52.0 / 3.0) * ch2 * ch2
    return I_L, I_0, I_R


def nonlinear_weights(indicators, linear: LinearWeights, eps: float, tau: int = 2):
    """Normalized weights (w0, wL, wR) from C_k / (eps + I_k)**tau."""
    I_L, I_0, I_R = indicators
    a0 = linear.c0 / (eps + np.asarray(I_0)) ** tau
    aL = linear.cL / (eps + np.asarray(I_L)) ** tau
    aR = linear.cR / (eps + np.asarray(I_R)) ** tau
    s = a0 + aL + aR
    return a0 / s, aL / s, aR / s


def edge_coefficients(w0, wL, wR, linear: LinearWeights = DEFAULT_WEIGHTS):
    """Collapse w0 P_0 + wL P_L + wR P_R at both cell edges into (n, 3) vectors."""
    p0_right = (_OPT_RIGHT - linear.cL * _PL_RIGHT - linear.cR * _PR_RIGHT) / linear.c0
    p0_left = (_OPT_LEFT - linear.cL * _PL_LEFT - linear.cR * _PR_LEFT) / linear.c0
    w0, wL, wR = (np.asarray(w, dtype=float)[..., None] for w in (w0, wL, wR))
    w_minus = w0 * p0_right + wL * _PL_RIGHT + wR * _PR_RIGHT
    w_plus = w0 * p0_left + wL * _PL_LEFT + wR * _PR_LEFT
    return w_minus, w_plus


def cell_weight_set(u_m, u_c, u_p, h: float, linear: LinearWeights = DEFAULT_WEIGHTS,
                    eps: Optional[float] = None, tau: int = 2) -> CellWeightSet:
    """Nonlinear weights of the given (predictor) stencils and their edge coefficients."""
    if eps is None:
        eps = h * h
    ind = smoothness_indicators(u_m, u_c, u_p, h)
    w0, wL, wR = nonlinear_weights(ind, linear, eps, tau)
    w_minus, w_plus = edge_coefficients(w0, wL, wR, linear)
    return CellWeightSet(np.asarray(w0), np.asarray(wL), np.asarray(wR), w_minus, w_plus)


def weights_from_state(values, h: float, linear: LinearWeights = DEFAULT_WEIGHTS,
                       eps: Optional[float] = None, tau: int = 2) -> CellWeightSet:
    """Per-cell weight sets built from the periodic stencils of ``values``."""
    u = np.asarray(values, dtype=float)
    return cell_weight_set(np.roll(u, 1), u, np.roll(u, -1), h, linear, eps, tau)


def _stencils(u):
    return np.stack([np.roll(u, 1), u, np.roll(u, -1)], axis=1)


def reconstruct_bed(values, weights: CellWeightSet) -> BedPair:
    """Apply frozen edge coefficients to ``values``; linear in ``values``."""
    u = np.asarray(values, dtype=float)
    if weights.w_minus.shape != (u.size, 3):
        raise ValueError(f"weights for {weights.w_minus.shape[0]} cells, state has {u.size}")
    st = _stencils(u)
    edge_right = np.einsum("ij,ij->i", weights.w_minus, st)
    edge_left = np.einsum("ij,ij->i", weights.w_plus, st)
    return BedPair(edge_right, np.roll(edge_left, -1))


def standard_cweno_bed(values, h: float, linear: LinearWeights = DEFAULT_WEIGHTS,
                       eps: Optional[float] = None, tau: int = 2) -> BedPair:
    """Fully nonlinear CWENO3: weights from the reconstructed data itself."""
    return reconstruct_bed(values, weights_from_state(values, h, linear, eps, tau))


def constant_bed(values) -> BedPair:
    """First-order (piecewise constant) boundary values."""
    u = np.asarray(values, dtype=float)
    return BedPair(u, np.roll(u, -1))
