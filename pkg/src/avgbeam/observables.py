"""Hill-equation machinery, dispersion, and the collective offset observable.

The linear channels of the deviation dynamics all reduce to Hill
equations u'' + K(t) u = 0; this module builds their principal
solutions, the associated Green function and particular solutions, the
dispersion response to a momentum error, and the transverse offset
integrals driven by the ensemble moments along a reference run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .dynamics import JacobiSeries, MomentsSeries, TrajectorySeries, _matvec, _mdot, _third_contract, _field_xi
from .errors import (
    MismatchedGrid,
    OutOfSpan,
    ResidualTooLarge,
    WronskianDrift,
)
from .lattice import Lattice, field_gradient, field_mixed
from .minkowski import METRIC_SIGNATURE


@dataclass
class PrincipalSolutions:
    """Cosine-like and sine-like fundamental pair of u'' + K(t)u = 0.

    C has C(0)=1, C'(0)=0; S has S(0)=0, S'(0)=1.  The Wronskian
    C S' - C' S stays 1 in the absence of damping; drift beyond 1e-9 is
    a construction failure, not data.
    """

    t: np.ndarray
    C: np.ndarray
    Cp: np.ndarray
    S: np.ndarray
    Sp: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        if not (self.C[0] == 1.0 and self.Cp[0] == 0.0
                and self.S[0] == 0.0 and self.Sp[0] == 1.0):
            raise ValueError("principal solutions must start from the unit initial data")
        drift = self.wronskian_drift()
        if drift > 1e-9:
            raise WronskianDrift(f"Wronskian deviates from 1 by {drift}")

    def wronskian_drift(self) -> float:
        return float(np.max(np.abs(self.C * self.Sp - self.Cp * self.S - 1.0)))


@dataclass
class DispersionResult:
    """Dispersion function and the offset it induces for delta = dp/p0."""

    D: np.ndarray
    delta: float
    offset: np.ndarray


@dataclass
class OffsetSeries:
    """Transverse offset integrals along a reference grid.

    off1/off3 carry the per-deviation offsets, avg1/avg3 the
    ensemble-averaged observable; temporal and longitudinal components
    vanish in the regime considered.
    """

    t: np.ndarray
    off1: np.ndarray
    off3: np.ndarray
    avg1: np.ndarray
    avg3: np.ndarray

    def __post_init__(self):
        n = len(self.t)
        for name in ("off1", "off3", "avg1", "avg3"):
            if len(getattr(self, name)) != n:
                raise MismatchedGrid(f"{name} length does not match the grid")


def _uniform_step(t: np.ndarray) -> float:
    if len(t) < 2:
        raise ValueError("grid needs at least two points")
    h = float(t[1] - t[0])
    if not np.allclose(np.diff(t), h, rtol=0.0, atol=1e-12 * max(1.0, abs(h))):
        raise ValueError("grid must be uniform")
    return h


def principal_solutions(t: np.ndarray, K: np.ndarray,
                        config=None) -> PrincipalSolutions:
    """Integrate the fundamental pair of u'' + K(t)u = 0 on the grid.

    K is sampled on the same grid; RK4 stages use the midpoint average
    of adjacent samples.  Raises WronskianDrift if the fundamental pair
    loses its unit Wronskian beyond 1e-9 anywhere on the grid.
    """
    t = np.asarray(t, dtype=float)
    K = np.asarray(K, dtype=float)
    if len(K) != len(t):
        raise MismatchedGrid(f"K has {len(K)} samples, grid has {len(t)}")
    if not np.all(np.isfinite(K)):
        raise ValueError("K must be finite on the grid")
    h = _uniform_step(t)
    if config is not None and abs(config.step - abs(h)) > 1e-12:
        raise MismatchedGrid("config step does not match the grid spacing")
    n = len(t) - 1
    # u = (C, S), du = (C', S'): both columns advance through the same
    # stage matrix, which is what keeps the Wronskian pinned.
    u = np.array([1.0, 0.0])
    du = np.array([0.0, 1.0])
    us = np.empty((n + 1, 2))
    dus = np.empty((n + 1, 2))
    us[0] = u
    dus[0] = du
    half, sixth = 0.5 * h, h / 6.0
    for k in range(n):
        k0 = K[k]
        km = 0.5 * (K[k] + K[k + 1])
        k1 = K[k + 1]
        a1 = -k0 * u
        d2 = du + half * a1
        a2 = -km * (u + half * du)
        d3 = du + half * a2
        a3 = -km * (u + half * d2)
        d4 = du + h * a3
        a4 = -k1 * (u + h * d3)
        u = u + sixth * (du + 2.0 * d2 + 2.0 * d3 + d4)
        du = du + sixth * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        us[k + 1] = u
        dus[k + 1] = du
    return PrincipalSolutions(t=t.copy(), C=us[:, 0], Cp=dus[:, 0],
                              S=us[:, 1], Sp=dus[:, 1], K=K.copy())


def _interp_checked(ps: PrincipalSolutions, value: float):
    lo, hi = ps.t[0], ps.t[-1]
    if value < lo - 1e-12 or value > hi + 1e-12:
        raise OutOfSpan(f"parameter {value} outside principal-solution span [{lo}, {hi}]")
    return (float(np.interp(value, ps.t, ps.C)), float(np.interp(value, ps.t, ps.S)))


def green_function(ps: PrincipalSolutions, t: float, t_tilde: float) -> float:
    """Green kernel S(t)C(t~) - C(t)S(t~); linear between grid points."""
    c_t, s_t = _interp_checked(ps, t)
    c_tt, s_tt = _interp_checked(ps, t_tilde)
    return s_t * c_tt - c_t * s_tt


def particular_solution(ps: PrincipalSolutions, p: np.ndarray) -> np.ndarray:
    """Particular response P(t) = int_0^t p(s) G(t,s) ds on the grid.

    The Green integral separates into S * int(pC) - C * int(pS), each
    accumulated by trapezoids, which avoids the quadratic kernel sweep.
    A finite-difference residual p - (P'' + K P) above 1e-6 max|p|
    raises ResidualTooLarge.
    """
    p = np.asarray(p, dtype=float)
    if len(p) != len(ps.t):
        raise MismatchedGrid(f"driver has {len(p)} samples, grid has {len(ps.t)}")
    h = _uniform_step(ps.t)
    ic = cumulative_trapezoid(p * ps.C, dx=h, initial=0.0)
    isn = cumulative_trapezoid(p * ps.S, dx=h, initial=0.0)
    P = ps.S * ic - ps.C * isn
    if len(P) >= 3:
        dd = (P[2:] - 2.0 * P[1:-1] + P[:-2]) / (h * h)
        resid = p[1:-1] - (dd + ps.K[1:-1] * P[1:-1])
        bound = 1e-6 * float(np.max(np.abs(p)))
        worst = float(np.max(np.abs(resid)))
        if worst > bound:
            raise ResidualTooLarge(
                f"particular-solution residual {worst} exceeds {bound}"
            )
    return P


def dispersion(ps: PrincipalSolutions, rho_series: np.ndarray,
               delta: float) -> DispersionResult:
    """Dispersion function for a momentum error delta = dp/p0.

    rho_series is the bending radius along the grid; straight sections
    carry rho = inf and contribute nothing to the driver 1/rho.
    """
    if delta < 0.0:
        raise ValueError(f"momentum spread must be nonnegative, got {delta}")
    rho = np.asarray(rho_series, dtype=float)
    if len(rho) != len(ps.t):
        raise MismatchedGrid(f"rho series has {len(rho)} samples, grid has {len(ps.t)}")
    if np.any(rho == 0.0):
        raise ValueError("zero bending radius in rho series")
    with np.errstate(divide="ignore"):
        p = 1.0 / rho
    p[~np.isfinite(rho)] = 0.0
    D = particular_solution(ps, p)
    return DispersionResult(D=D, delta=delta, offset=delta * D)


def momentum_spread(xi_run: JacobiSeries, p0: float = 1.0) -> float:
    """delta = dp/p0 with dp the peak spatial deviation over the run."""
    if not p0 > 0.0:
        raise ValueError("reference momentum must be positive")
    r = np.sqrt(xi_run.xi[:, 1] ** 2 + xi_run.xi[:, 2] ** 2 + xi_run.xi[:, 3] ** 2)
    return float(np.max(r)) / p0


# ---------------------------------------------------------------------------
# collective offset integrals

def _check_common_grid(reference: TrajectorySeries, moments_along: MomentsSeries):
    if len(moments_along) != len(reference) or not np.array_equal(moments_along.t, reference.t):
        raise MismatchedGrid("moment series and reference are on different grids")


def _avg_integrand(lattice: Lattice, reference: TrajectorySeries,
                   moments_along: MomentsSeries) -> np.ndarray:
    """F^i_m (<y^m> eta(V,V) - <yyy>^m_(VV)) along the run, all rows."""
    V = reference.v
    F = field_mixed(lattice, reference.x[:, 2], _field_xi(reference.x))
    vv = _mdot(V, V)
    Vl = V * METRIC_SIGNATURE
    th = _third_contract(moments_along.third, Vl, Vl)
    return _matvec(F, moments_along.first * vv[:, None] - th)


def averaged_offset(lattice: Lattice, reference: TrajectorySeries,
                    moments_along: MomentsSeries) -> OffsetSeries:
    """Ensemble-averaged transverse offsets along the reference run.

    The velocity-dependent deviation terms average to zero over the
    bunch, leaving the moment-driven integrand; a point bunch therefore
    produces an identically vanishing observable, so the magnitude of
    the result measures how far the bunch is from its single-particle
    idealization.  Depends only on the reference, the field along it,
    and the first and third moments.
    """
    _check_common_grid(reference, moments_along)
    h = _uniform_step(reference.t)
    integ = _avg_integrand(lattice, reference, moments_along)
    avg1 = cumulative_trapezoid(integ[:, 1], dx=h, initial=0.0)
    avg3 = cumulative_trapezoid(integ[:, 3], dx=h, initial=0.0)
    return OffsetSeries(t=reference.t.copy(), off1=avg1.copy(), off3=avg3.copy(),
                        avg1=avg1, avg3=avg3)


def born_offset(lattice: Lattice, reference: TrajectorySeries,
                moments_along: MomentsSeries, xi_run: JacobiSeries) -> OffsetSeries:
    """First-order (Born) offset for one deviation solution.

    Adds to the averaged integrand the deviation-velocity cross term
    with epsilon = <y> - dX/dt and the field-gradient term xi^l d_l of
    the averaged integrand; both are linear in (xi, dxi), so averaging
    over a sign-symmetric family of deviation runs recovers
    averaged_offset.
    """
    _check_common_grid(reference, moments_along)
    if len(xi_run) != len(reference) or not np.array_equal(xi_run.t, reference.t):
        raise MismatchedGrid("deviation run and reference are on different grids")
    h = _uniform_step(reference.t)
    V = reference.v
    xi = xi_run.xi
    dxi = xi_run.dxi
    F = field_mixed(lattice, reference.x[:, 2], _field_xi(reference.x))
    G = field_gradient(lattice, reference.x[:, 2], _field_xi(reference.x))
    eps = moments_along.first - V
    vv = _mdot(V, V)
    Vl = V * METRIC_SIGNATURE
    th = _third_contract(moments_along.third, Vl, Vl)
    moment_slot = moments_along.first * vv[:, None] - th
    base = _matvec(F, moment_slot)
    # 2 dxi^j X'^k * (1/2)(F_j eps_k + F_k eps_j)
    cross = (_matvec(F, dxi) * _mdot(eps, V)[:, None]
             + _matvec(F, V) * _mdot(eps, dxi)[:, None])
    dF = (G[:, 0, :, :] * xi[:, 0, None, None]
          + G[:, 1, :, :] * xi[:, 1, None, None]
          + G[:, 2, :, :] * xi[:, 2, None, None]
          + G[:, 3, :, :] * xi[:, 3, None, None])
    grad = _matvec(dF, moment_slot)
    integ = base + cross + grad
    off1 = cumulative_trapezoid(integ[:, 1], dx=h, initial=0.0)
    off3 = cumulative_trapezoid(integ[:, 3], dx=h, initial=0.0)
    avg1 = cumulative_trapezoid(base[:, 1], dx=h, initial=0.0)
    avg3 = cumulative_trapezoid(base[:, 3], dx=h, initial=0.0)
    return OffsetSeries(t=reference.t.copy(), off1=off1, off3=off3,
                        avg1=avg1, avg3=avg3)
