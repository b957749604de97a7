"""One step of the implicit predictor / frozen-weight corrector scheme.

Pipeline of a time step from u^n:

1. ``predictor_step``: composite backward Euler through the sorted DIRK
   abscissae with piecewise-constant data (IE).
2. ``corrector_step``: DIRK3 stages with CWENO3 boundary values whose
   nonlinear weights come from the matching predictor stage (D3P1).
3. Time smoothness indicators from the cubic continuous extension of the
   corrector plus space-time jump indicators, then a cell-wise nonlinear
   blend of D3P1 and IE.
4. The cell-wise blend leaks mass through the interfaces; the defect is
   redistributed to the two neighbours in proportion to the high-order
   weights (Q3P1).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .core import Problem, StateVector, range_wave_speed
from .cweno import DEFAULT_WEIGHTS, CellWeightSet, LinearWeights, weights_from_state
from .irk import (
    ButcherTableau,
    NewtonDivergenceError,
    NewtonReport,
    assemble_jacobian,
    composite_euler_tableau,
    dirk3_tableau,
    flux_difference,
    interface_flux,
    newton_solve,
)

log = logging.getLogger(__name__)

DIRK3 = dirk3_tableau()
COMPOSITE_EULER = composite_euler_tableau(DIRK3)


@dataclass(frozen=True)
class SchemeConfig:
    linear: LinearWeights = DEFAULT_WEIGHTS
    eps_t_exponent: int = 2
    blend_tau: int = 2
    conservative_correction: bool = True
    explicit_predictor: bool = False
    newton_tol: Optional[float] = None  # None: dt**3
    newton_max_iter: int = 50
    # C_L = dt**2 is capped so that C_H = 1 - C_L stays positive for dt >= 1
    c_low_cap: float = 0.5

    def tolerance(self, dt: float) -> float:
        return self.newton_tol if self.newton_tol is not None else dt**3


@dataclass(eq=False)
class StageBundle:
    """States, interface fluxes and weight sets of all stages of one step.

    ``end_flux`` is the time-combined interface flux sum_k b_k F^(k). For the
    corrector ``end_state`` is rebuilt from it as
    u^n - dt/h * sum_k b_k (F^(k)_{j+1/2} - F^(k)_{j-1/2}); for the predictor it
    is the last substep state itself. The two agree up to the Newton tolerance,
    but only the substep state inherits the TVD property exactly (a substep
    whose guess is accepted without iterating simply repeats its predecessor).
    """

    tableau: ButcherTableau
    stage_states: List[np.ndarray]
    stage_fluxes: List[np.ndarray]
    stage_weight_sets: List[Optional[CellWeightSet]]
    end_state: np.ndarray
    end_flux: np.ndarray
    newton_reports: List[NewtonReport] = field(default_factory=list)


def _finish(u_n, tableau, states, fluxes, weight_sets, reports, dt, h,
            end_from_last_stage=False) -> StageBundle:
    end_flux = sum(b * F for b, F in zip(tableau.b, fluxes))
    if end_from_last_stage:
        end_state = np.array(states[-1], dtype=float)
    else:
        end_state = u_n - (dt / h) * flux_difference(end_flux)
    return StageBundle(tableau, states, fluxes, weight_sets, end_state, end_flux, reports)


def _solve_stage(u_known, guess, a_kk, dt, h, problem, alpha, weights, tol, max_iter, label):
    r = a_kk * dt / h

    def residual(u):
        return u - u_known + r * flux_difference(interface_flux(u, problem, alpha, weights))

    def jacobian(u):
        return assemble_jacobian(u, a_kk, dt, h, problem, alpha, weights)

    # residual measured in rate form G / (a_kk dt), so tol bounds the local error by a_kk dt tol
    u, report = newton_solve(residual, jacobian, guess, tol, max_iter, residual_scale=a_kk * dt)
    if not report.converged:
        raise NewtonDivergenceError(
            f"{label}: Newton did not converge in {report.iterations} iterations "
            f"(residual {report.final_residual_norm:.3e}, tol {tol:.3e}, dt {dt:.4g})",
            report,
        )
    return u, report


def predictor_step(u_n: StateVector, dt: float, problem: Problem, alpha: float,
                   config: SchemeConfig = SchemeConfig()) -> StageBundle:
    """Composite backward (or, optionally, forward) Euler with piecewise-constant data."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    h = u_n.grid.h
    u0 = np.asarray(u_n.values, dtype=float)
    tab = COMPOSITE_EULER
    tol = config.tolerance(dt)
    states, fluxes, reports = [], [], []
    prev = u0
    for k, theta in enumerate(tab.b):
        if config.explicit_predictor:
            F = interface_flux(prev, problem, alpha)
            u = prev - (theta * dt / h) * flux_difference(F)
        else:
            u, rep = _solve_stage(prev, prev, theta, dt, h, problem, alpha, None, tol,
                                  config.newton_max_iter, f"predictor stage {k + 1}")
            reports.append(rep)
            F = interface_flux(u, problem, alpha)
        states.append(u)
        fluxes.append(F)
        prev = u
    return _finish(u0, tab, states, fluxes, [None] * tab.s, reports, dt, h,
                   end_from_last_stage=True)


def corrector_step(u_n: StateVector, predictor: StageBundle, dt: float, problem: Problem,
                   alpha: float, config: SchemeConfig = SchemeConfig()) -> StageBundle:
    """DIRK3 with CWENO3 weights frozen from the matching predictor stage."""
    if len(predictor.stage_states) != DIRK3.s:
        raise ValueError("predictor must provide one state per DIRK3 stage")
    h = u_n.grid.h
    u0 = np.asarray(u_n.values, dtype=float)
    tab = DIRK3
    tol = config.tolerance(dt)
    states, fluxes, wsets, reports = [], [], [], []
    for k in range(tab.s):
        weights = weights_from_state(predictor.stage_states[k], h, config.linear)
        u_known = u0.copy()
        for ell in range(k):
            u_known -= (tab.a[k, ell] * dt / h) * flux_difference(fluxes[ell])
        u, rep = _solve_stage(u_known, predictor.stage_states[k], tab.a[k, k], dt, h, problem,
                              alpha, weights, tol, config.newton_max_iter,
                              f"corrector stage {k + 1}")
        states.append(u)
        fluxes.append(interface_flux(u, problem, alpha, weights))
        wsets.append(weights)
        reports.append(rep)
    return _finish(u0, tab, states, fluxes, wsets, reports, dt, h)


# -- continuous extension and indicators ----------------------------------------

class CeCubic(NamedTuple):
    """P(s) = p0 + p1 s + p2 s**2 + p3 s**3 in normalized time s = (t - t^n) / dt."""

    p0: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray

    def __call__(self, s):
        return self.p0 + s * (self.p1 + s * (self.p2 + s * self.p3))

    def derivative(self, s):
        return self.p1 + s * (2.0 * self.p2 + 3.0 * self.p3 * s)


def ce_cubic(u_n, stage_derivatives, c, dt: float) -> CeCubic:
    """Cubic with P(0) = u_n and dP/dt(t^n + c_k dt) = K_k for each stage k.

    ``stage_derivatives`` has shape (3,) or (3, n); the conditions become
    dP/ds(c_k) = dt K_k in normalized time.
    """
    c = np.asarray(c, dtype=float)
    if np.unique(c).size != c.size:
        raise ValueError("abscissae must be distinct")
    K = np.asarray(stage_derivatives, dtype=float)
    # rows: dP/ds(c_k) = p1 + 2 c_k p2 + 3 c_k^2 p3
    V = np.column_stack([np.ones_like(c), 2.0 * c, 3.0 * c * c])
    p = np.linalg.solve(V, dt * K.reshape(3, -1))
    shape = K.shape[1:]
    p1, p2, p3 = (row.reshape(shape) for row in p)
    return CeCubic(np.asarray(u_n, dtype=float) + 0.0 * p1, p1, p2, p3)


def time_smoothness_indicator(ce: CeCubic, dt: float = 1.0):
    """sum_l dt^(2l-1) * int_{t^n}^{t^n+dt} (d^l P/dt^l)^2 dt, evaluated in normalized time.

    The dt powers cancel exactly under s = (t - t^n) / dt, so only the
    normalized coefficients enter and ``dt`` is accepted for symmetry only.
    """
    p1, p2, p3 = ce.p1, ce.p2, ce.p3
    first = p1 * p1 + (4.0 / 3.0) * p2 * p2 + 1.8 * p3 * p3 + 2.0 * p1 * p2 + 2.0 * p1 * p3 + 3.0 * p2 * p3
    second = 4.0 * p2 * p2 + 12.0 * p2 * p3 + 12.0 * p3 * p3
    third = 36.0 * p3 * p3
    return first + second + third


def space_time_indicators(u_n, stage1, stage2, u_np1):
    """Squared jumps to the left and right neighbour summed over four time levels."""
    I_minus = np.zeros_like(np.asarray(u_n, dtype=float))
    I_plus = np.zeros_like(I_minus)
    for level in (u_n, stage1, stage2, u_np1):
        v = np.asarray(level, dtype=float)
        I_plus += (np.roll(v, -1) - v) ** 2
        I_minus += (np.roll(v, 1) - v) ** 2
    return I_minus, I_plus


# -- blending in time ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BlendWeights:
    wH: np.ndarray
    wL: np.ndarray
    cH: float
    cL: float
    eps_t: float
    I3: np.ndarray
    I_t: Optional[np.ndarray] = None
    I_x_minus: Optional[np.ndarray] = None
    I_x_plus: Optional[np.ndarray] = None


def blend_weights(I3, dt: float, eps_t: float, tau: int = 2, c_low: Optional[float] = None,
                  c_low_cap: float = 0.5, **indicators) -> BlendWeights:
    """Weights C_L / eps_t^tau (low) and C_H / (eps_t + I3)^tau (high), normalized.

    C_L defaults to min(dt**2, c_low_cap) and C_H = 1 - C_L.
    """
    if dt <= 0 or eps_t <= 0:
        raise ValueError("dt and eps_t must be positive")
    I3 = np.asarray(I3, dtype=float)
    cL = min(dt * dt, c_low_cap) if c_low is None else float(c_low)
    cH = 1.0 - cL
    # ratio wL~/wH~ written without forming eps_t**-tau, which can overflow
    ratio = (cL / cH) * ((eps_t + I3) / eps_t) ** tau
    wH = 1.0 / (1.0 + ratio)
    wL = ratio / (1.0 + ratio)
    return BlendWeights(wH, wL, cH, cL, eps_t, I3, **indicators)


def blend(u_d3p1, u_ie, w: BlendWeights) -> np.ndarray:
    u_d3p1 = np.asarray(u_d3p1, dtype=float)
    u_ie = np.asarray(u_ie, dtype=float)
    return (w.wH / w.cH) * (u_d3p1 - w.cL * u_ie) + w.wL * u_ie


def mass_defect(w: BlendWeights, flux_d3p1, flux_ie, dt: float, h: float) -> np.ndarray:
    """Mass lost by the cell-wise blend through each interface x_{j+1/2}."""
    dwH = w.wH - np.roll(w.wH, -1)
    dwL = w.wL - np.roll(w.wL, -1)
    return (dt / (w.cH * h)) * (dwH * flux_d3p1 + (w.cH * dwL - w.cL * dwH) * flux_ie)


def _split(wH):
    """Share of the defect at x_{j+1/2} that goes to cell j (cell j+1 gets the rest)."""
    total = wH + np.roll(wH, -1)
    safe = np.where(total > 0.0, total, 1.0)
    return np.where(total > 0.0, wH / safe, 0.5)


def redistribute(u_b, mu, wH) -> np.ndarray:
    u_b = np.asarray(u_b, dtype=float)
    share = _split(np.asarray(wH, dtype=float))
    return u_b + share * mu + np.roll((1.0 - share) * mu, 1)


def q3p1_flux(w: BlendWeights, flux_d3p1, flux_ie) -> np.ndarray:
    """Interface flux that makes the corrected blend a conservative update."""
    wH, wL = w.wH, w.wL
    wHn, wLn = np.roll(wH, -1), np.roll(wL, -1)
    total = wH + wHn
    reduced = 2.0 * wH * wHn / total
    mixed = (wL * wHn + wH * wLn) / total
    return (reduced * flux_d3p1 + (w.cH * mixed - w.cL * reduced) * flux_ie) / w.cH


# -- full step -------------------------------------------------------------------

@dataclass(eq=False)
class StepDiagnostics:
    alpha: float
    dt: float
    predictor: StageBundle
    corrector: StageBundle
    weights: Optional[BlendWeights] = None
    u_blend: Optional[np.ndarray] = None
    mass_defect: Optional[np.ndarray] = None

    @property
    def newton_reports(self) -> List[NewtonReport]:
        return list(self.predictor.newton_reports) + list(self.corrector.newton_reports)

    @property
    def newton_iterations(self) -> List[int]:
        return [r.iterations for r in self.newton_reports]


def blending_stage(u_n: StateVector, pred: StageBundle, corr: StageBundle, dt: float,
                   config: SchemeConfig = SchemeConfig()) -> BlendWeights:
    """Indicators of the corrector step and the resulting blending weights."""
    h = u_n.grid.h
    u0 = np.asarray(u_n.values, dtype=float)
    K = np.stack([-flux_difference(F) / h for F in corr.stage_fluxes])
    ce = ce_cubic(u0, K, DIRK3.c, dt)
    I_t = time_smoothness_indicator(ce, dt)
    I_xm, I_xp = space_time_indicators(u0, corr.stage_states[0], corr.stage_states[1],
                                       corr.end_state)
    I3 = I_t + I_xm + I_xp
    eps_t = dt ** config.eps_t_exponent
    return blend_weights(I3, dt, eps_t, config.blend_tau, c_low_cap=config.c_low_cap,
                         I_t=I_t, I_x_minus=I_xm, I_x_plus=I_xp)


def q3p1_step(u_n: StateVector, dt: float, problem: Problem,
              config: SchemeConfig = SchemeConfig(), alpha: Optional[float] = None):
    """Advance ``u_n`` by ``dt``; returns the new state and a StepDiagnostics."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    h = u_n.grid.h
    if alpha is None:
        alpha = range_wave_speed(problem, u_n.values)
    pred = predictor_step(u_n, dt, problem, alpha, config)
    corr = corrector_step(u_n, pred, dt, problem, alpha, config)
    w = blending_stage(u_n, pred, corr, dt, config)
    # the flux-form IE state keeps blend + redistribution an exact conservative update
    u_ie = np.asarray(u_n.values, dtype=float) - (dt / h) * flux_difference(pred.end_flux)
    u_b = blend(corr.end_state, u_ie, w)
    mu = mass_defect(w, corr.end_flux, pred.end_flux, dt, h)
    u_new = redistribute(u_b, mu, w.wH) if config.conservative_correction else u_b
    diag = StepDiagnostics(alpha, dt, pred, corr, w, u_b, mu)
    return u_n.with_values(u_new, u_n.time + dt), diag


def d3p1_step(u_n: StateVector, dt: float, problem: Problem,
              config: SchemeConfig = SchemeConfig(), alpha: Optional[float] = None):
    """Unblended corrector: predictor followed by the frozen-weight DIRK3."""
    if alpha is None:
        alpha = range_wave_speed(problem, u_n.values)
    pred = predictor_step(u_n, dt, problem, alpha, config)
    corr = corrector_step(u_n, pred, dt, problem, alpha, config)
    return u_n.with_values(corr.end_state, u_n.time + dt), StepDiagnostics(alpha, dt, pred, corr)


def ie_step(u_n: StateVector, dt: float, problem: Problem,
            config: SchemeConfig = SchemeConfig(), alpha: Optional[float] = None):
    """Composite implicit Euler predictor on its own."""
    if alpha is None:
        alpha = range_wave_speed(problem, u_n.values)
    pred = predictor_step(u_n, dt, problem, alpha, config)
    empty = StageBundle(DIRK3, [], [], [], pred.end_state, pred.end_flux)
    return u_n.with_values(pred.end_state, u_n.time + dt), StepDiagnostics(alpha, dt, pred, empty)
