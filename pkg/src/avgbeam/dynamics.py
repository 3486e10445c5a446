"""Fixed-step integration of reference orbits and deviation transport.

Parameterization and units
--------------------------
Trajectories x(t) are parameterized by proper time t in meters (c = 1);
velocities v = dx/dt live on the unit hyperboloid.  The integrator is
the classical fixed-step RK4 scheme throughout: deterministic, no
adaptive control, so identical inputs give identical output bytes.

Moment transport
----------------
Averaged runs reuse the ensemble shape along the trajectory: the
centered deviations of the supplied moments from the monomials of the
launch velocity,

    D1 = first - v(0),      D3 = third - v(0) x v(0) x v(0),

are frozen, and at every right-hand-side evaluation the moment slots are
rebuilt around the current velocity as first = v + D1 and
third = v x v x v + D3.  A point (delta) ensemble has D identically
zero, so an averaged run collapses onto the single-particle geodesic
bit for bit (the zero-deviation case takes the same monomial code path
as integrate_lorentz).

All array reductions in the right-hand sides are written as elementwise
operations plus fixed-order length-4 sums, so per-sample results do not
depend on how many trajectories are batched together.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .connections import FrameMode, INERTIAL, frame_gradient, inertial_acceleration
from .ensemble import MomentSet
from .errors import (
    MismatchedSampling,
    OffShellInitial,
    OutOfLattice,
    ReferenceSpanExceeded,
    StepTooLarge,
    UnsupportedElement,
)
from .lattice import (
    ConstantE,
    Dipole,
    Element,
    Lattice,
    NormalQuadDipole,
    RFCavity,
    SkewQuadDipole,
    curvature_radius,
    field_gradient,
    field_mixed,
)
from .minkowski import METRIC_SIGNATURE, check_on_shell, velocity_monomials3


@dataclass(frozen=True)
class TrajectoryState:
    """Event and 4-velocity at parameter value t."""

    t: float
    x: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class JacobiState:
    """Deviation vector and its rate at parameter value t."""

    t: float
    xi: np.ndarray
    dxi: np.ndarray


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integration settings.

    step is the RK4 step in the run parameter (meters).  boundary_align
    controls whether piecewise profiles snap their grids onto element
    boundaries; trajectory runs always evaluate the hard-edged field at
    the current position.
    """

    step: float
    scheme: str = "rk4"
    boundary_align: bool = True

    def __post_init__(self):
        if not self.step > 0.0:
            raise ValueError(f"integrator step must be positive, got {self.step}")
        if self.scheme != "rk4":
            raise ValueError("only the classical fixed-step 'rk4' scheme is provided")


@dataclass
class TrajectorySeries:
    """Trajectory samples on a uniform parameter grid."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray

    def __len__(self):
        return len(self.t)

    def state(self, k: int) -> TrajectoryState:
        return TrajectoryState(t=float(self.t[k]), x=self.x[k].copy(), v=self.v[k].copy())

    @property
    def final(self) -> TrajectoryState:
        return self.state(len(self.t) - 1)

    def norm_drift(self) -> float:
        """max_k |eta(v_k, v_k) - 1| over the run."""
        vv = (self.v[:, 0] * self.v[:, 0] - self.v[:, 1] * self.v[:, 1]
              - self.v[:, 2] * self.v[:, 2] - self.v[:, 3] * self.v[:, 3])
        return float(np.max(np.abs(vv - 1.0)))


@dataclass
class JacobiSeries:
    """Deviation samples on a uniform parameter grid.

    epsilon stores the first-moment offset from the reference velocity
    when the run was driven by ensemble moments.  decoupling_ok is False
    when |eta(Xdot, dxi)| exceeded 1e-2 |dxi| somewhere, the regime in
    which the transverse/longitudinal split loses meaning.
    """

    t: np.ndarray
    xi: np.ndarray
    dxi: np.ndarray
    epsilon: np.ndarray | None = None
    decoupling_ok: bool = True

    def __len__(self):
        return len(self.t)

    def state(self, k: int) -> JacobiState:
        return JacobiState(t=float(self.t[k]), xi=self.xi[k].copy(), dxi=self.dxi[k].copy())

    @property
    def final(self) -> JacobiState:
        return self.state(len(self.t) - 1)


@dataclass
class MomentsSeries:
    """Ensemble moments sampled along a trajectory grid."""

    t: np.ndarray
    first: np.ndarray
    third: np.ndarray

    def __len__(self):
        return len(self.t)


TRAJECTORY_HEADER = "t,x0,x1,x2,x3,v0,v1,v2,v3"
JACOBI_HEADER = "t,xi0,xi1,xi2,xi3,dxi0,dxi1,dxi2,dxi3"


def _write_rows(path, header, columns):
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        n = len(columns[0])
        for k in range(n):
            fh.write(",".join(repr(float(c[k])) for c in columns) + "\n")


def write_trajectory_csv(series: TrajectorySeries, path):
    cols = [series.t] + [series.x[:, i] for i in range(4)] + [series.v[:, i] for i in range(4)]
    _write_rows(path, TRAJECTORY_HEADER, cols)


def read_trajectory_csv(path) -> TrajectorySeries:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return TrajectorySeries(t=data[:, 0], x=data[:, 1:5], v=data[:, 5:9])


def write_jacobi_csv(series: JacobiSeries, path):
    cols = [series.t] + [series.xi[:, i] for i in range(4)] + [series.dxi[:, i] for i in range(4)]
    _write_rows(path, JACOBI_HEADER, cols)


def read_jacobi_csv(path) -> JacobiSeries:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return JacobiSeries(t=data[:, 0], xi=data[:, 1:5], dxi=data[:, 5:9])


# ---------------------------------------------------------------------------
# right-hand sides (batch-stable elementwise algebra)

def _matvec(F, v):
    """F^i_j v^j as four fixed-order elementwise products."""
    return (F[..., :, 0] * v[..., 0, None]
            + F[..., :, 1] * v[..., 1, None]
            + F[..., :, 2] * v[..., 2, None]
            + F[..., :, 3] * v[..., 3, None])


def _mdot(a, b):
    return (a[..., 0] * b[..., 0] - a[..., 1] * b[..., 1]
            - a[..., 2] * b[..., 2] - a[..., 3] * b[..., 3])


def _third_contract(third, al, bl):
    """third^{m s l} a_s b_l with lowered inputs, fixed 16-term order."""
    out = None
    for s in range(4):
        for l in range(4):
            term = third[..., :, s, l] * (al[..., s] * bl[..., l])[..., None]
            out = term if out is None else out + term
    return out


def _field_xi(x):
    """Deviation used for field lookup: transverse offsets of the orbit."""
    xi = np.zeros_like(x)
    xi[..., 1] = x[..., 1]
    xi[..., 3] = x[..., 3]
    return xi


def _rhs_force(lattice: Lattice):
    """Direct force form: a = -F v sqrt(eta(v, v))."""

    def rhs(x, v):
        F = field_mixed(lattice, x[..., 2], _field_xi(x))
        s = _mdot(v, v)
        return -_matvec(F, v) * np.sqrt(s)[..., None]

    return rhs


def _rhs_monomial(lattice: Lattice):
    """Connection form with monomial slots; equals the force form on shell."""

    def rhs(x, v):
        F = field_mixed(lattice, x[..., 2], _field_xi(x))
        s = _mdot(v, v)
        return -_matvec(F, v) * (s * (3.0 - s) * 0.5)[..., None]

    return rhs


def _rhs_moments(lattice: Lattice, D1, D3):
    """Connection form with comoving moment slots v + D1, v^3 + D3."""

    def rhs(x, v):
        F = field_mixed(lattice, x[..., 2], _field_xi(x))
        first = v + D1
        third = velocity_monomials3(v) + D3
        vv = _mdot(v, v)
        yv = _mdot(first, v)
        Fv = _matvec(F, v)
        Fy = _matvec(F, first)
        vl = v * METRIC_SIGNATURE
        Fth = _matvec(F, _third_contract(third, vl, vl))
        return -(Fv * yv[..., None] + 0.5 * (Fy * vv[..., None] - Fth))

    return rhs


def _step_count(t0: float, t_end: float, step: float):
    span = t_end - t0
    if span == 0.0:
        raise ValueError("integration span is zero")
    n = int(math.ceil(abs(span) / step - 1e-9))
    return max(n, 1), math.copysign(step, span)


def _check_step(lattice_or_element, step: float):
    min_len = (lattice_or_element.min_length()
               if isinstance(lattice_or_element, Lattice)
               else lattice_or_element.length)
    if step > min_len / 4.0 + 1e-15:
        raise StepTooLarge(
            f"step {step} exceeds a quarter of the shortest element length {min_len}"
        )


def _rk4_trajectory(rhs, x0, v0, t0, h, nsteps):
    x = x0.copy()
    v = v0.copy()
    xs = np.empty((nsteps + 1,) + x.shape)
    vs = np.empty_like(xs)
    xs[0] = x
    vs[0] = v
    half = 0.5 * h
    sixth = h / 6.0
    for k in range(nsteps):
        a1 = rhs(x, v)
        x2v = v + half * a1
        a2 = rhs(x + half * v, x2v)
        x3v = v + half * a2
        a3 = rhs(x + half * x2v, x3v)
        x4v = v + h * a3
        a4 = rhs(x + h * x3v, x4v)
        x = x + sixth * (v + 2.0 * x2v + 2.0 * x3v + x4v)
        v = v + sixth * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        xs[k + 1] = x
        vs[k + 1] = v
    return xs, vs


def integrate_lorentz(lattice: Lattice, initial: TrajectoryState, t_end: float,
                      config: IntegratorConfig, form: str = "connection") -> TrajectorySeries:
    """Track the single-particle orbit through the lattice fields.

    form selects how the acceleration is evaluated: "connection"
    (default) contracts the velocity-slot connection, "force" uses the
    direct F v sqrt(eta(v,v)) expression.  The two are the same equation
    on the hyperboloid and agree to integrator tolerance.

    Raises OffShellInitial for an off-shell launch velocity and
    StepTooLarge when the step underresolves the shortest element.
    """
    if form not in ("connection", "force"):
        raise ValueError(f"unknown form '{form}'")
    check_on_shell(initial.v, tol=1e-9, exc=OffShellInitial, label="initial velocity")
    _check_step(lattice, config.step)
    n, h = _step_count(initial.t, t_end, config.step)
    rhs = _rhs_monomial(lattice) if form == "connection" else _rhs_force(lattice)
    x0 = np.asarray(initial.x, dtype=float).reshape(1, 4)
    v0 = np.asarray(initial.v, dtype=float).reshape(1, 4)
    xs, vs = _rk4_trajectory(rhs, x0, v0, initial.t, h, n)
    t = initial.t + np.arange(n + 1) * h
    return TrajectorySeries(t=t, x=xs[:, 0, :], v=vs[:, 0, :])


def moment_deviations(moments: MomentSet, reference_velocity):
    """Centered moment deviations D1, D3 relative to a launch velocity."""
    vref = np.asarray(reference_velocity, dtype=float)
    D1 = moments.first - vref
    D3 = moments.third - velocity_monomials3(vref)
    return D1, D3


def integrate_averaged_geodesic(lattice: Lattice, moments: MomentSet,
                                initial: TrajectoryState, t_end: float,
                                config: IntegratorConfig,
                                deviations_from=None) -> TrajectorySeries:
    """Geodesic of the moment-averaged connection with comoving moments.

    deviations_from optionally pins the velocity against which the
    centered deviations are computed (default: the launch velocity), so
    perturbed companions of a reference run evolve in the same field.
    """
    check_on_shell(initial.v, tol=1e-9, exc=OffShellInitial, label="initial velocity")
    _check_step(lattice, config.step)
    vref = initial.v if deviations_from is None else deviations_from
    D1, D3 = moment_deviations(moments, vref)
    if not D1.any() and not D3.any():
        # exact point ensemble: identical code path as integrate_lorentz
        rhs = _rhs_monomial(lattice)
    else:
        rhs = _rhs_moments(lattice, D1, D3)
    n, h = _step_count(initial.t, t_end, config.step)
    x0 = np.asarray(initial.x, dtype=float).reshape(1, 4)
    v0 = np.asarray(initial.v, dtype=float).reshape(1, 4)
    xs, vs = _rk4_trajectory(rhs, x0, v0, initial.t, h, n)
    t = initial.t + np.arange(n + 1) * h
    return TrajectorySeries(t=t, x=xs[:, 0, :], v=vs[:, 0, :])


def comoving_moments_along(series: TrajectorySeries, moments: MomentSet,
                           reference_velocity=None) -> MomentsSeries:
    """Moment series along a run under the frozen-shape transport rule."""
    vref = series.v[0] if reference_velocity is None else np.asarray(reference_velocity)
    D1, D3 = moment_deviations(moments, vref)
    first = series.v + D1
    third = velocity_monomials3(series.v) + D3
    return MomentsSeries(t=series.t.copy(), first=first, third=third)


# ---------------------------------------------------------------------------
# mean-field transport defect

_FD_INTERIOR = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_FD_FORWARD = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0


def _series_derivative(q: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite-difference d/dt of a sampled series."""
    n = len(q)
    if n < 5:
        raise MismatchedSampling("defect evaluation needs at least 5 grid points")
    dq = np.empty_like(q)
    for k in (0, 1):
        dq[k] = sum(c * q[k + j] for j, c in enumerate(_FD_FORWARD)) / h
    for k in (n - 2, n - 1):
        dq[k] = -sum(c * q[k - j] for j, c in enumerate(_FD_FORWARD)) / h
    body = (q[0:-4] * _FD_INTERIOR[0] + q[1:-3] * _FD_INTERIOR[1]
            + q[2:-2] * _FD_INTERIOR[2] + q[3:-1] * _FD_INTERIOR[3]
            + q[4:] * _FD_INTERIOR[4]) / h
    dq[2:-2] = body
    return dq


def mean_field_defect(lattice: Lattice, moments_along: MomentsSeries,
                      curve: TrajectorySeries):
    """Norm of the mean-velocity transport defect along a curve.

    Evaluates |dV/dt + Gamma(V, V)| with V the first-moment series and
    Gamma the moment-averaged connection at the sampled events; dV/dt
    uses fourth-order finite differences.  For a point ensemble riding
    its own geodesic this vanishes to integrator tolerance, and its
    magnitude scales with the squared support diameter of the ensemble.
    """
    if len(moments_along) != len(curve) or not np.array_equal(moments_along.t, curve.t):
        raise MismatchedSampling("moment series and curve are sampled on different grids")
    h = float(curve.t[1] - curve.t[0])
    V = moments_along.first
    dV = _series_derivative(V, h)
    F = field_mixed(lattice, curve.x[:, 2], _field_xi(curve.x))
    vv = _mdot(V, V)
    Fv = _matvec(F, V)
    Vl = V * METRIC_SIGNATURE
    Fth = _matvec(F, _third_contract(moments_along.third, Vl, Vl))
    first_dot = _mdot(moments_along.first, V)
    gamma_vv = Fv * first_dot[..., None] + 0.5 * (_matvec(F, moments_along.first) * vv[..., None] - Fth)
    defect = dV + gamma_vv
    return curve.t.copy(), np.sqrt(np.sum(defect * defect, axis=-1))


# ---------------------------------------------------------------------------
# deviation (Jacobi) transport along a reference run

def integrate_jacobi_full(lattice: Lattice, moments: MomentSet,
                          reference: TrajectorySeries, initial: JacobiState,
                          config: IntegratorConfig,
                          frame: FrameMode = INERTIAL,
                          mode: str = "full",
                          t_end: float | None = None) -> JacobiSeries:
    """Transport a deviation vector along a reference run.

    Integrates the linearized geodesic deviation system
    ddxi + 2 Gamma(X)(dxi, Xdot) + xi^l d_l Gamma(X)(Xdot, Xdot) + A = 0
    with Gamma the moment-averaged connection, d_l Gamma taken through
    the analytic field gradients, and A the frame force of ``frame``.
    The reference is re-integrated alongside on the same grid (same
    arithmetic as integrate_averaged_geodesic), so the supplied series
    only fixes the launch state and admissible span.

    mode "full" keeps the moment slots comoving (first = Xdot + D1);
    mode "linearized" substitutes the reference velocity for the first
    moment, the standard small-spread reduction.  The first-moment
    offset series epsilon and a transverse-longitudinal decoupling flag
    are recorded on the output.
    """
    if mode not in ("full", "linearized"):
        raise ValueError(f"unknown jacobi mode '{mode}'")
    _check_step(lattice, config.step)
    ref0 = reference.state(0)
    check_on_shell(ref0.v, tol=1e-9, exc=OffShellInitial, label="reference velocity")
    ref_span = abs(float(reference.t[-1] - reference.t[0]))
    span = ref_span if t_end is None else t_end - initial.t
    if abs(span) > ref_span + 1e-9:
        raise ReferenceSpanExceeded(
            f"requested span {span} exceeds reference span {ref_span}"
        )
    n, h = _step_count(initial.t, initial.t + span, config.step)
    ref_h = reference.t[1] - reference.t[0] if len(reference) > 1 else h
    if abs(abs(ref_h) - config.step) > 1e-12:
        raise MismatchedSampling(
            f"reference grid step {ref_h} does not match integrator step {config.step}"
        )

    D1, D3 = moment_deviations(moments, ref0.v)
    ref_rhs = (_rhs_monomial(lattice) if (not D1.any() and not D3.any())
               else _rhs_moments(lattice, D1, D3))
    fgrad = frame_gradient(frame)

    def accel(x, v, xi, dxi):
        x2 = x[..., 2]
        fxi = _field_xi(x)
        F = field_mixed(lattice, x2, fxi)
        G = field_gradient(lattice, x2, fxi)
        if mode == "linearized":
            first = v
            third = velocity_monomials3(v)
        else:
            first = v + D1
            third = velocity_monomials3(v) + D3
        vl = v * METRIC_SIGNATURE
        dxl = dxi * METRIC_SIGNATURE
        # 2 Gamma(dxi, v)
        two_g = (_matvec(F, dxi) * _mdot(first, v)[..., None]
                 + _matvec(F, v) * _mdot(first, dxi)[..., None]
                 + _matvec(F, first) * _mdot(dxi, v)[..., None]
                 - _matvec(F, _third_contract(third, dxl, vl)))
        # xi^l d_l Gamma (v, v) through the field gradient
        dF = (G[..., 0, :, :] * xi[..., 0, None, None]
              + G[..., 1, :, :] * xi[..., 1, None, None]
              + G[..., 2, :, :] * xi[..., 2, None, None]
              + G[..., 3, :, :] * xi[..., 3, None, None])
        vv = _mdot(v, v)
        grad_term = (_matvec(dF, v) * _mdot(first, v)[..., None]
                     + 0.5 * (_matvec(dF, first) * vv[..., None]
                              - _matvec(dF, _third_contract(third, vl, vl))))
        acc = -(two_g + grad_term)
        if fgrad.any():
            # frame force: xi^l dGamma_f (v v + 2 v dxi), arc mode entry only
            coeff = fgrad[1, 1, 2, 2]
            acc[..., 1] -= xi[..., 1] * coeff * (v[..., 2] * v[..., 2]
                                                 + 2.0 * v[..., 2] * dxi[..., 2])
        return acc

    x = np.asarray(ref0.x, dtype=float).reshape(1, 4)
    v = np.asarray(ref0.v, dtype=float).reshape(1, 4)
    xi = np.asarray(initial.xi, dtype=float).reshape(1, 4)
    dxi = np.asarray(initial.dxi, dtype=float).reshape(1, 4)
    xis = np.empty((n + 1, 4))
    dxis = np.empty((n + 1, 4))
    xis[0] = xi[0]
    dxis[0] = dxi[0]
    worst_coupling = 0.0
    half = 0.5 * h
    sixth = h / 6.0
    for k in range(n):
        a1 = ref_rhs(x, v)
        j1 = accel(x, v, xi, dxi)
        v2, dxi2 = v + half * a1, dxi + half * j1
        x2_, xi2_ = x + half * v, xi + half * dxi
        a2 = ref_rhs(x2_, v2)
        j2 = accel(x2_, v2, xi2_, dxi2)
        v3, dxi3 = v + half * a2, dxi + half * j2
        x3_, xi3_ = x + half * v2, xi + half * dxi2
        a3 = ref_rhs(x3_, v3)
        j3 = accel(x3_, v3, xi3_, dxi3)
        v4, dxi4 = v + h * a3, dxi + h * j3
        x4_, xi4_ = x + h * v3, xi + h * dxi3
        a4 = ref_rhs(x4_, v4)
        j4 = accel(x4_, v4, xi4_, dxi4)
        x = x + sixth * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v = v + sixth * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        xi = xi + sixth * (dxi + 2.0 * dxi2 + 2.0 * dxi3 + dxi4)
        dxi = dxi + sixth * (j1 + 2.0 * j2 + 2.0 * j3 + j4)
        xis[k + 1] = xi[0]
        dxis[k + 1] = dxi[0]
        coupling = abs(float(_mdot(v, dxi)[0]))
        scale = float(np.sqrt(np.sum(dxi * dxi)))
        if scale > 0.0:
            worst_coupling = max(worst_coupling, coupling / scale)
    t = initial.t + np.arange(n + 1) * h
    eps = np.tile(D1, (n + 1, 1))
    return JacobiSeries(t=t, xi=xis, dxi=dxis, epsilon=eps,
                        decoupling_ok=worst_coupling < 1e-2)


# ---------------------------------------------------------------------------
# closed-form linear channels (path-length parameterization)

def _transverse_strengths(element: Element, rho: float | None):
    if not isinstance(element, (Dipole, NormalQuadDipole, SkewQuadDipole)):
        raise UnsupportedElement(
            f"transverse channel defined only for bending elements, got '{element.kind}'"
        )
    r = curvature_radius(element) if rho is None else rho
    inv2 = 1.0 / (r * r)
    if isinstance(element, Dipole):
        return inv2, 0.0
    if isinstance(element, NormalQuadDipole):
        return inv2 - element.b1, element.b1
    return inv2 + element.b1, -element.b1


def integrate_transverse_linear(element: Element, rho: float | None,
                                initial: JacobiState, l_end: float,
                                config: IntegratorConfig) -> JacobiSeries:
    """Linear transverse deviation channels in path length l.

    Horizontal and vertical obey u'' + K u = 0 with K = (1/rho^2, 0)
    for a dipole, (1/rho^2 - b1, b1) for a normal gradient and
    (1/rho^2 + b1, -b1) for a skew gradient; temporal and longitudinal
    components drift freely.  rho = None takes the design radius 1/b0.
    """
    kh, kv = _transverse_strengths(element, rho)
    if l_end < initial.t:
        raise ValueError("path length must advance forward through the element")
    if initial.t < -1e-9 or l_end > element.length + 1e-9:
        raise OutOfLattice(
            f"span [{initial.t}, {l_end}] leaves element of length {element.length}"
        )
    _check_step(element, config.step)
    r_design = curvature_radius(element) if rho is None else rho
    amp = float(np.sqrt(initial.xi[1] ** 2 + initial.xi[3] ** 2))
    if amp > 0.1 * abs(r_design):
        warnings.warn(
            f"transverse amplitude {amp} exceeds a tenth of the bending radius "
            f"{r_design}; linearization is suspect", RuntimeWarning)
    freq = np.array([0.0, kh, 0.0, kv])

    def rhs(xi, dxi):
        return -freq * xi

    xi = np.asarray(initial.xi, dtype=float).copy()
    dxi = np.asarray(initial.dxi, dtype=float).copy()
    n, h = _step_count(initial.t, l_end, config.step)
    xis = np.empty((n + 1, 4))
    dxis = np.empty((n + 1, 4))
    xis[0] = xi
    dxis[0] = dxi
    half, sixth = 0.5 * h, h / 6.0
    for k in range(n):
        j1 = rhs(xi, dxi)
        d2 = dxi + half * j1
        j2 = rhs(xi + half * dxi, d2)
        d3 = dxi + half * j2
        j3 = rhs(xi + half * d2, d3)
        d4 = dxi + h * j3
        j4 = rhs(xi + h * d3, d4)
        xi = xi + sixth * (dxi + 2.0 * d2 + 2.0 * d3 + d4)
        dxi = dxi + sixth * (j1 + 2.0 * j2 + 2.0 * j3 + j4)
        xis[k + 1] = xi
        dxis[k + 1] = dxi
    t = initial.t + np.arange(n + 1) * h
    return JacobiSeries(t=t, xi=xis, dxi=dxis)


def integrate_longitudinal(element: Element, gamma_of_t, initial: JacobiState,
                           t_end: float, config: IntegratorConfig) -> JacobiSeries:
    """Longitudinal deviation dynamics for accelerating elements.

    ConstantE: ddxi0 = ddxi2 = -e2 dxi2 (uniform field, no gradient).
    RFCavity: ddxi2 = +2 gamma(t) e2_0 xi2 and ddxi0 = -2 gamma(t) e2_0
    xi2, the linearized dynamics at the zero-crossing phase of the
    cavity.  Transverse components propagate freely.  gamma_of_t is a
    scalar or a series on the output grid (linearly interpolated at the
    RK4 stage midpoints).
    """
    if not isinstance(element, (ConstantE, RFCavity)):
        raise UnsupportedElement(
            f"longitudinal channel defined only for const_e and rf, got '{element.kind}'"
        )
    _check_step(element, config.step)
    n, h = _step_count(initial.t, t_end, config.step)
    gamma_of_t = np.asarray(gamma_of_t, dtype=float)
    if gamma_of_t.ndim == 0:
        gammas = np.full(n + 1, float(gamma_of_t))
    else:
        if len(gamma_of_t) != n + 1:
            raise MismatchedSampling(
                f"gamma series has {len(gamma_of_t)} points, run grid has {n + 1}"
            )
        gammas = gamma_of_t

    def gamma_at(k, theta):
        if theta <= 0.0:
            return gammas[k]
        if theta >= 1.0:
            return gammas[min(k + 1, n)]
        return gammas[k] * (1.0 - theta) + gammas[min(k + 1, n)] * theta

    if isinstance(element, ConstantE):
        e2 = element.e2

        def rhs(k, theta, xi, dxi):
            acc = np.zeros(4)
            acc[0] = -e2 * dxi[2]
            acc[2] = -e2 * dxi[2]
            return acc
    else:
        e20 = element.e2_0

        def rhs(k, theta, xi, dxi):
            g = gamma_at(k, theta)
            acc = np.zeros(4)
            acc[0] = -2.0 * g * e20 * xi[2]
            acc[2] = 2.0 * g * e20 * xi[2]
            return acc

    xi = np.asarray(initial.xi, dtype=float).copy()
    dxi = np.asarray(initial.dxi, dtype=float).copy()
    xis = np.empty((n + 1, 4))
    dxis = np.empty((n + 1, 4))
    xis[0] = xi
    dxis[0] = dxi
    half, sixth = 0.5 * h, h / 6.0
    for k in range(n):
        j1 = rhs(k, 0.0, xi, dxi)
        d2 = dxi + half * j1
        j2 = rhs(k, 0.5, xi + half * dxi, d2)
        d3 = dxi + half * j2
        j3 = rhs(k, 0.5, xi + half * d2, d3)
        d4 = dxi + h * j3
        j4 = rhs(k, 1.0, xi + h * d3, d4)
        xi = xi + sixth * (dxi + 2.0 * d2 + 2.0 * d3 + d4)
        dxi = dxi + sixth * (j1 + 2.0 * j2 + 2.0 * j3 + j4)
        xis[k + 1] = xi
        dxis[k + 1] = dxi
    t = initial.t + np.arange(n + 1) * h
    return JacobiSeries(t=t, xi=xis, dxi=dxis)
