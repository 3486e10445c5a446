"""Weighted velocity ensembles and their hyperboloid moments.

A bunch is modeled as a weighted cloud of unit 4-velocities, a discrete
quadrature of the underlying one-particle distribution.  The invariant
measure on the mass shell is absorbed into the weights, so every moment
is a plain weighted average over the sample list:

    vol            = sum_a w_a
    first^i        = sum_a w_a y_a^i / vol
    third^{m s l}  = sum_a w_a y_a^m y_a^s y_a^l / vol

Reductions are performed in a fixed, documented order so results are bit
reproducible: sums run sequentially over the sample index (a cumulative
sum, left to right), and averaged quantities are accumulated relative to
the first sample,

    mean = q_0 + (sum_a w_a (q_a - q_0)) / vol,

which keeps a single-point (delta) ensemble exactly equal to its sample.
Third moments are computed once per sorted index triple and mirrored, so
the stored tensor is totally symmetric bit for bit.

Energy statistics follow the support of the cloud: ``energy`` is the
minimum Lorentz factor min_a y_a^0 and ``alpha`` the Euclidean diameter
max_{a,b} |y_a - y_b| over all four components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DuplicateKey,
    EmptyEnsemble,
    InvalidCount,
    OffShell,
    ParseError,
    ZeroWeight,
)
from .minkowski import norm_residual, velocity_monomials3

_SORTED_TRIPLES = [
    (m, s, l) for m in range(4) for s in range(m, 4) for l in range(s, 4)
]

# On-shell construction tolerance.  Scaled by (y0)^2 because computing
# eta(y,y) at Lorentz factor gamma cancels terms of size gamma^2, so even
# a correctly rounded square root leaves a residual ~ gamma^2 * eps.
_SHELL_TOL = 1e-12


def _sequential_sum(values: np.ndarray) -> float:
    """Left-to-right sum over the leading axis (documented reduction order)."""
    if len(values) == 1:
        return float(values[0])
    return float(np.cumsum(values)[-1])


def project_to_hyperboloid(spatial) -> np.ndarray:
    """Lift a spatial 3-velocity onto the unit hyperboloid.

    Returns (sqrt(1 + |v|^2), v1, v2, v3), which satisfies eta(y, y) = 1
    exactly up to rounding and y0 >= 1.
    """
    v = np.asarray(spatial, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected 3 spatial components, got shape {v.shape}")
    s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
    return np.array([math.sqrt(1.0 + s), v[0], v[1], v[2]])


def _check_sample(y: np.ndarray, w: float):
    res = norm_residual(y)
    if abs(res) > _SHELL_TOL * max(1.0, y[0] * y[0]):
        raise OffShell(
            f"sample off the unit hyperboloid: eta(y,y)-1 = {res:.3e}"
        )
    if y[0] < 1.0 - 1e-12:
        raise OffShell(f"sample has y0 = {y[0]} < 1, wrong hyperboloid sheet")
    if w < 0.0:
        raise ValueError(f"sample weight must be nonnegative, got {w}")


@dataclass(frozen=True)
class VelocitySample:
    """One weighted support point of the velocity distribution."""

    y: np.ndarray
    w: float = 1.0

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.shape != (4,):
            raise ValueError(f"4-velocity must have shape (4,), got {y.shape}")
        _check_sample(y, float(self.w))
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", float(self.w))


class BeamEnsemble:
    """Immutable weighted collection of on-shell velocity samples.

    Parameters
    ----------
    ys : array-like, shape (n, 4)
        Sample 4-velocities, each on the unit hyperboloid.
    ws : array-like, shape (n,), optional
        Nonnegative weights, default all ones.
    label : str
        Free-form tag carried through outputs.
    """

    def __init__(self, ys, ws=None, label: str = ""):
        ys = np.array(ys, dtype=float)
        if ys.ndim != 2 or ys.shape[1] != 4:
            raise ValueError(f"ensemble velocities must have shape (n,4), got {ys.shape}")
        if len(ys) == 0:
            raise EmptyEnsemble("ensemble must contain at least one sample")
        ws = np.ones(len(ys)) if ws is None else np.array(ws, dtype=float)
        if ws.shape != (len(ys),):
            raise ValueError("weights must match the number of samples")
        for a in range(len(ys)):
            _check_sample(ys[a], ws[a])
        ys.setflags(write=False)
        ws.setflags(write=False)
        self.ys = ys
        self.ws = ws
        self.label = label

    @classmethod
    def from_samples(cls, samples, label: str = "") -> "BeamEnsemble":
        samples = list(samples)
        if not samples:
            raise EmptyEnsemble("ensemble must contain at least one sample")
        return cls([s.y for s in samples], [s.w for s in samples], label=label)

    def __len__(self) -> int:
        return len(self.ys)

    def sample(self, a: int) -> VelocitySample:
        return VelocitySample(self.ys[a].copy(), float(self.ws[a]))


@dataclass(frozen=True)
class MomentSet:
    """Zeroth, first and third velocity moments of an ensemble.

    third is totally symmetric; first[0] is the mean Lorentz factor and
    cannot drop below 1 for an on-shell ensemble.  No renormalization is
    applied: first is generally slightly inside the hyperboloid, and the
    identity eta_sl third^{m s l} = first^m holds only as a consequence
    of the samples being on shell, it is never assumed.
    """

    vol: float
    first: np.ndarray
    third: np.ndarray

    def __post_init__(self):
        first = np.asarray(self.first, dtype=float)
        third = np.asarray(self.third, dtype=float)
        if first.shape != (4,) or third.shape != (4, 4, 4):
            raise ValueError("moment shapes must be (4,) and (4,4,4)")
        if not self.vol > 0.0:
            raise ZeroWeight(f"ensemble volume must be positive, got {self.vol}")
        if first[0] < 1.0 - 1e-9:
            raise ValueError(f"mean Lorentz factor {first[0]} < 1")
        first.setflags(write=False)
        third.setflags(write=False)
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "third", third)


@dataclass(frozen=True)
class EnergyStats:
    """Support statistics: minimum Lorentz factor and velocity diameter."""

    energy: float
    alpha: float

    def __post_init__(self):
        if self.energy < 1.0 - 1e-12:
            raise ValueError(f"minimum Lorentz factor {self.energy} < 1")
        if self.alpha < 0.0:
            raise ValueError("support diameter cannot be negative")


def delta_moments(y) -> MomentSet:
    """Moments of a single-point distribution at 4-velocity y."""
    y = np.asarray(y, dtype=float)
    return MomentSet(vol=1.0, first=y.copy(), third=velocity_monomials3(y))


def compute_moments(ensemble: BeamEnsemble) -> MomentSet:
    """Weighted moments with the documented shifted sequential reduction."""
    return moments_from_arrays(ensemble.ys, ensemble.ws)


def moments_from_arrays(ys: np.ndarray, ws: np.ndarray) -> MomentSet:
    """Moment arithmetic on raw (n,4) velocity and (n,) weight arrays.

    Same reduction order as compute_moments; callers are responsible for
    the samples being on shell.
    """
    vol = _sequential_sum(ws)
    if vol <= 0.0:
        raise ZeroWeight("total ensemble weight is zero")

    first = np.empty(4)
    for i in range(4):
        col = ys[:, i]
        first[i] = col[0] + _sequential_sum(ws * (col - col[0])) / vol

    third = np.zeros((4, 4, 4))
    for m, s, l in _SORTED_TRIPLES:
        prod = (ys[:, m] * ys[:, s]) * ys[:, l]
        val = prod[0] + _sequential_sum(ws * (prod - prod[0])) / vol
        third[m, s, l] = val
        third[m, l, s] = val
        third[s, m, l] = val
        third[s, l, m] = val
        third[l, m, s] = val
        third[l, s, m] = val
    return MomentSet(vol=vol, first=first, third=third)


def energy_stats(ensemble: BeamEnsemble, chunk: int = 256) -> EnergyStats:
    """Exact support statistics; the diameter scan is chunked, O(n^2)."""
    ys = ensemble.ys
    energy = ys[0, 0]
    for a in range(1, len(ys)):
        if ys[a, 0] < energy:
            energy = ys[a, 0]

    best = 0.0
    for start in range(0, len(ys), chunk):
        block = ys[start : start + chunk]
        d2 = np.zeros((len(block), len(ys)))
        for c in range(4):
            diff = block[:, c : c + 1] - ys[None, :, c]
            d2 += diff * diff
        m = float(np.max(d2))
        if m > best:
            best = m
    return EnergyStats(energy=float(energy), alpha=math.sqrt(best))


def sample_gaussian_beam(mean_spatial, sigma, n: int, seed: int,
                         label: str = "gaussian") -> BeamEnsemble:
    """Draw n unit-weight samples around a spatial mean velocity.

    Spatial components are drawn componentwise normal with the given
    sigmas and lifted onto the hyperboloid; sigma = 0 reproduces the mean
    exactly, giving a delta ensemble.  Sampling uses a seeded PCG64
    generator, so identical arguments give identical ensembles.
    """
    if n <= 0 or int(n) != n:
        raise InvalidCount(f"sample count must be a positive integer, got {n}")
    mean_spatial = np.asarray(mean_spatial, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if mean_spatial.shape != (3,) or sigma.shape != (3,):
        raise ValueError("mean and sigma must each have 3 spatial components")
    if np.any(sigma < 0.0):
        raise ValueError("sigma components must be nonnegative")
    rng = np.random.default_rng(seed)
    draws = mean_spatial + sigma * rng.standard_normal((int(n), 3))
    ys = np.empty((int(n), 4))
    for a in range(int(n)):
        ys[a] = project_to_hyperboloid(draws[a])
    return BeamEnsemble(ys, label=label)


# ---------------------------------------------------------------------------
# serialization

ENSEMBLE_HEADER = "y0,y1,y2,y3,w"


def write_ensemble_csv(ensemble: BeamEnsemble, path):
    """Write samples as CSV with full round-trip float formatting."""
    with open(path, "w", newline="\n") as fh:
        fh.write(ENSEMBLE_HEADER + "\n")
        for a in range(len(ensemble)):
            row = [repr(float(v)) for v in ensemble.ys[a]]
            row.append(repr(float(ensemble.ws[a])))
            fh.write(",".join(row) + "\n")


def read_ensemble_csv(path, label: str = "") -> BeamEnsemble:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != ENSEMBLE_HEADER:
            raise ParseError(1, f"expected header '{ENSEMBLE_HEADER}', got '{header}'")
        ys, ws = [], []
        for ln, raw in enumerate(fh, start=2):
            raw = raw.strip()
            if not raw:
                continue
            parts = raw.split(",")
            if len(parts) != 5:
                raise ParseError(ln, f"expected 5 comma-separated values, got {len(parts)}")
            try:
                vals = [float(p) for p in parts]
            except ValueError:
                raise ParseError(ln, f"non-numeric value in '{raw}'") from None
            ys.append(vals[:4])
            ws.append(vals[4])
    if not ys:
        raise EmptyEnsemble("ensemble file contains no samples")
    return BeamEnsemble(np.array(ys), np.array(ws), label=label)


# ---------------------------------------------------------------------------
# beam definition files (key=value lines)

@dataclass(frozen=True)
class BeamDefinition:
    """Parsed beam description: distribution family plus parameters."""

    distribution: str
    mean: np.ndarray
    sigma: np.ndarray | None = None
    n: int = 1
    seed: int = 0

    def central_velocity(self) -> np.ndarray:
        """Design 4-velocity: the stated spatial mean lifted on shell."""
        return project_to_hyperboloid(self.mean)


def parse_beam_definition(text: str) -> BeamDefinition:
    """Parse 'key=value' lines describing a beam.

    Keys: distribution (gaussian|delta), mean (three floats), and for
    gaussian beams sigma (three floats), n (int) and seed (int).
    '#' starts a comment; blank lines are skipped.
    """
    fields = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(ln, f"expected key=value, got '{line}'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in fields:
            raise DuplicateKey(ln, f"duplicate key '{key}'")
        fields[key] = (ln, value)

    def take(key, required=True):
        if key not in fields:
            if required:
                raise ParseError(0, f"missing required key '{key}'")
            return None
        return fields.pop(key)[1]

    dist = take("distribution")
    if dist not in ("gaussian", "delta"):
        raise ParseError(0, f"unknown distribution '{dist}'")
    mean = _parse_triplet(take("mean"), "mean")
    if dist == "delta":
        n = take("n", required=False)
        defn = BeamDefinition(distribution="delta", mean=mean,
                              n=_parse_int(n, "n") if n is not None else 1)
    else:
        sigma = _parse_triplet(take("sigma"), "sigma")
        n = _parse_int(take("n"), "n")
        seed = _parse_int(take("seed"), "seed")
        defn = BeamDefinition(distribution="gaussian", mean=mean,
                              sigma=sigma, n=n, seed=seed)
    if fields:
        ln, _ = next(iter(fields.values()))
        raise ParseError(ln, f"unknown key '{next(iter(fields))}'")
    return defn


def _parse_triplet(value: str, name: str) -> np.ndarray:
    parts = [p for p in value.split(",") if p.strip() != ""]
    if len(parts) != 3:
        raise ParseError(0, f"{name} needs 3 comma-separated floats, got '{value}'")
    try:
        return np.array([float(p) for p in parts])
    except ValueError:
        raise ParseError(0, f"non-numeric component in {name}: '{value}'") from None


def _parse_int(value: str, name: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(0, f"{name} must be an integer, got '{value}'") from None


def realize_beam(defn: BeamDefinition) -> BeamEnsemble:
    """Instantiate the ensemble described by a beam definition."""
    if defn.distribution == "delta":
        n = max(1, int(defn.n))
        y = project_to_hyperboloid(defn.mean)
        return BeamEnsemble(np.tile(y, (n, 1)), label="delta")
    return sample_gaussian_beam(defn.mean, defn.sigma, defn.n, defn.seed)
