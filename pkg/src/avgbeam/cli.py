"""Command-line front end.

Every subcommand reads plain-text inputs (lattice and beam files), runs
one deterministic computation, and writes one text artifact (CSV or
JSON) with full round-trip float formatting, so identical invocations
produce byte-identical outputs.  Units follow the library convention:
lengths in meters, dipole and electric strengths in 1/m, gradients in
1/m^2, with the charge-to-mass ratio absorbed into the field.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .connections import ArcAdapted, INERTIAL
from .dynamics import (
    IntegratorConfig,
    JacobiState,
    TrajectoryState,
    comoving_moments_along,
    integrate_averaged_geodesic,
    integrate_jacobi_full,
    integrate_longitudinal,
    integrate_lorentz,
    integrate_transverse_linear,
    write_jacobi_csv,
    write_trajectory_csv,
)
from .ensemble import (
    compute_moments,
    energy_stats,
    parse_beam_definition,
    project_to_hyperboloid,
    realize_beam,
)
from .errors import AvgBeamError
from .lattice import load_lattice, inverse_rho_profile, transverse_k_profile
from .observables import averaged_offset, dispersion, principal_solutions
from .oracle import gaussian_beam_family, theorem1_scan, validate_field_gradients


def _four_floats(text: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"expected 4 comma-separated floats, got '{text}'")
    return np.array([float(p) for p in parts])


def _alpha_list(text: str):
    vals = [float(p) for p in text.split(",") if p.strip()]
    if not vals:
        raise argparse.ArgumentTypeError("expected a comma-separated list of alphas")
    return vals


def _load_beam(path: str):
    with open(path) as fh:
        return parse_beam_definition(fh.read())


def _add_common(p, span_help="integration span in proper time (m)"):
    p.add_argument("--lattice", required=True, help="lattice file path")
    p.add_argument("--step", type=float, required=True, help="integrator step (m)")
    p.add_argument("--span", type=float, required=True, help=span_help)
    p.add_argument("--out", required=True, help="output artifact path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="avgbeam",
        description="Beam dynamics through moment-averaged connections "
                    "(lengths in m, dipole/electric strengths in 1/m, "
                    "gradients in 1/m^2).",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="single-particle reference trajectory")
    _add_common(p)
    p.add_argument("--beam", required=True, help="beam file (initial velocity = its mean)")
    p.add_argument("--form", choices=("connection", "force"), default="connection",
                   help="right-hand side form of the force law")

    p = sub.add_parser("avg-track", help="geodesic of the moment-averaged connection")
    _add_common(p)
    p.add_argument("--beam", required=True, help="beam file providing the moments")

    p = sub.add_parser("jacobi", help="deviation transport along an averaged reference")
    _add_common(p)
    p.add_argument("--beam", required=True, help="beam file providing the moments")
    p.add_argument("--xi0", type=_four_floats, required=True,
                   help="initial deviation xi (4 floats, m)")
    p.add_argument("--dxi0", type=_four_floats, required=True,
                   help="initial deviation rate dxi/dt (4 floats)")
    p.add_argument("--mode", choices=("full", "linearized"), default="full",
                   help="moment slots comoving (full) or reference-velocity (linearized)")
    p.add_argument("--frame", choices=("inertial", "arc"), default="inertial",
                   help="reference frame mode")
    p.add_argument("--rho", type=float, default=None,
                   help="bending radius for the arc frame (m)")

    p = sub.add_parser("transverse", help="linear transverse channel of the first element")
    _add_common(p, span_help="path length span l (m)")
    p.add_argument("--xi0", type=_four_floats, required=True, help="initial deviation (m)")
    p.add_argument("--dxi0", type=_four_floats, required=True, help="initial deviation slope")
    p.add_argument("--rho", type=float, default=None,
                   help="bending radius override (m); default 1/b0 of the element")

    p = sub.add_parser("longitudinal", help="longitudinal channel of the first element")
    _add_common(p)
    p.add_argument("--xi0", type=_four_floats, required=True, help="initial deviation (m)")
    p.add_argument("--dxi0", type=_four_floats, required=True, help="initial deviation rate")
    p.add_argument("--gamma", type=float, default=1.0,
                   help="constant Lorentz factor entering the RF focusing strength")

    p = sub.add_parser("moments", help="velocity moments and support statistics of a beam")
    p.add_argument("--beam", required=True, help="beam file path")
    p.add_argument("--out", required=True, help="output JSON path")

    p = sub.add_parser("offset", help="averaged transverse offset along a reference run")
    _add_common(p)
    p.add_argument("--beam", required=True, help="beam file providing the moments")

    p = sub.add_parser("dispersion", help="dispersion function of the lattice optics")
    p.add_argument("--lattice", required=True, help="lattice file path")
    p.add_argument("--step", type=float, required=True, help="grid step (m), must align with element boundaries")
    p.add_argument("--delta", type=float, required=True, help="momentum error dp/p0")
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("scan-alpha", help="bunch-size scaling of the averaged dynamics")
    p.add_argument("--lattice", required=True, help="lattice file path")
    p.add_argument("--alphas", type=_alpha_list, required=True,
                   help="decreasing comma-separated support diameters")
    p.add_argument("--span", type=float, required=True, help="lab path length (m)")
    p.add_argument("--seed", type=int, required=True, help="ensemble RNG seed")
    p.add_argument("--out", required=True, help="output JSON path")
    p.add_argument("--step", type=float, default=1e-3, help="integrator step (m)")
    p.add_argument("--n", type=int, default=10000, help="samples per ensemble")
    p.add_argument("--gamma", type=float, default=100.0,
                   help="Lorentz factor of the beam mean velocity")
    p.add_argument("--comparison", choices=("lab-time", "proper-time"),
                   default="lab-time", help="endpoint comparison convention")

    p = sub.add_parser("validate", help="finite-difference check of field gradients")
    p.add_argument("--lattice", required=True, help="lattice file path")
    p.add_argument("--out", required=True, help="output JSON path")
    p.add_argument("--fd-step", type=float, default=1e-5,
                   help="finite-difference step (m)")
    return ap


def _initial_state(defn) -> TrajectoryState:
    return TrajectoryState(t=0.0, x=np.zeros(4), v=defn.central_velocity())


def _averaged_reference(lattice, defn, args):
    ens = realize_beam(defn)
    moments = compute_moments(ens)
    v0 = project_to_hyperboloid(moments.first[1:4])
    state = TrajectoryState(t=0.0, x=np.zeros(4), v=v0)
    cfg = IntegratorConfig(step=args.step)
    series = integrate_averaged_geodesic(lattice, moments, state, args.span, cfg)
    return series, moments, cfg


def _run(args) -> int:
    if args.command == "track":
        lattice = load_lattice(args.lattice)
        defn = _load_beam(args.beam)
        cfg = IntegratorConfig(step=args.step)
        series = integrate_lorentz(lattice, _initial_state(defn), args.span, cfg,
                                   form=args.form)
        write_trajectory_csv(series, args.out)

    elif args.command == "avg-track":
        lattice = load_lattice(args.lattice)
        series, _, _ = _averaged_reference(lattice, _load_beam(args.beam), args)
        write_trajectory_csv(series, args.out)

    elif args.command == "jacobi":
        lattice = load_lattice(args.lattice)
        reference, moments, cfg = _averaged_reference(lattice, _load_beam(args.beam), args)
        frame = INERTIAL if args.frame == "inertial" else ArcAdapted(rho=args.rho)
        xi_run = integrate_jacobi_full(
            lattice, moments, reference,
            JacobiState(t=0.0, xi=args.xi0, dxi=args.dxi0),
            cfg, frame=frame, mode=args.mode,
        )
        write_jacobi_csv(xi_run, args.out)

    elif args.command == "transverse":
        lattice = load_lattice(args.lattice)
        series = integrate_transverse_linear(
            lattice.elements[0], args.rho,
            JacobiState(t=0.0, xi=args.xi0, dxi=args.dxi0),
            args.span, IntegratorConfig(step=args.step),
        )
        write_jacobi_csv(series, args.out)

    elif args.command == "longitudinal":
        lattice = load_lattice(args.lattice)
        series = integrate_longitudinal(
            lattice.elements[0], args.gamma,
            JacobiState(t=0.0, xi=args.xi0, dxi=args.dxi0),
            args.span, IntegratorConfig(step=args.step),
        )
        write_jacobi_csv(series, args.out)

    elif args.command == "moments":
        defn = _load_beam(args.beam)
        ens = realize_beam(defn)
        moments = compute_moments(ens)
        stats = energy_stats(ens)
        payload = {
            "vol": float(moments.vol),
            "first": [float(c) for c in moments.first],
            "third": [[[float(v) for v in row] for row in mat] for mat in moments.third],
            "energy": float(stats.energy),
            "alpha": float(stats.alpha),
        }
        with open(args.out, "w", newline="\n") as fh:
            fh.write(json.dumps(payload, indent=2) + "\n")

    elif args.command == "offset":
        lattice = load_lattice(args.lattice)
        reference, moments, _ = _averaged_reference(lattice, _load_beam(args.beam), args)
        along = comoving_moments_along(reference, moments)
        off = averaged_offset(lattice, reference, along)
        with open(args.out, "w", newline="\n") as fh:
            fh.write("t,off1,off3,avg1,avg3\n")
            for k in range(len(off.t)):
                fh.write(",".join(repr(float(c)) for c in
                                  (off.t[k], off.off1[k], off.off3[k],
                                   off.avg1[k], off.avg3[k])) + "\n")

    elif args.command == "dispersion":
        lattice = load_lattice(args.lattice)
        l, K = transverse_k_profile(lattice, "horizontal", args.step)
        _, inv_rho = inverse_rho_profile(lattice, args.step)
        with np.errstate(divide="ignore"):
            rho = np.where(inv_rho == 0.0, np.inf, 1.0 / inv_rho)
        ps = principal_solutions(l, K)
        result = dispersion(ps, rho, args.delta)
        with open(args.out, "w", newline="\n") as fh:
            fh.write("t,C,S,D,off\n")
            for k in range(len(l)):
                fh.write(",".join(repr(float(c)) for c in
                                  (l[k], ps.C[k], ps.S[k], result.D[k],
                                   result.offset[k])) + "\n")

    elif args.command == "scan-alpha":
        lattice = load_lattice(args.lattice)
        gamma = args.gamma
        mean_spatial = np.array([0.0, np.sqrt(gamma * gamma - 1.0), 0.0])
        family = gaussian_beam_family(mean_spatial, n=args.n, seed=args.seed)
        report = theorem1_scan(lattice, family, args.alphas, args.span,
                               IntegratorConfig(step=args.step),
                               comparison=args.comparison)
        with open(args.out, "w", newline="\n") as fh:
            fh.write(report.to_json() + "\n")

    elif args.command == "validate":
        lattice = load_lattice(args.lattice)
        probes = []
        start = 0.0
        for el in lattice.elements:
            mid = start + 0.5 * el.length
            probes.append(np.array([0.0, 0.0, mid, 0.0]))
            probes.append(np.array([0.0, 0.01, mid, 0.02]))
            start += el.length
        err = validate_field_gradients(lattice, probes, step=args.fd_step)
        payload = {"max_relative_error": float(err), "probes": len(probes)}
        with open(args.out, "w", newline="\n") as fh:
            fh.write(json.dumps(payload, indent=2) + "\n")

    else:  # pragma: no cover - argparse enforces the choices
        raise AssertionError(f"unhandled command {args.command}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except (AvgBeamError, OSError, ValueError) as exc:
        print(f"avgbeam: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
