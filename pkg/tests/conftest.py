"""Shared fixtures: small lattices and integrator configs reused across tests."""

import numpy as np
import pytest

from avgbeam import (
    Dipole,
    Drift,
    IntegratorConfig,
    Lattice,
    NormalQuadDipole,
    TrajectoryState,
)

SQRT2 = np.sqrt(2.0)


@pytest.fixture
def circle_lattice():
    # b0 = 1 bends the reference-speed orbit on a unit circle that stays
    # inside x2 in [0.2, 2.2], well within the 2.4 m element.
    return Lattice.from_elements([Dipole(length=2.4, b0=1.0)])


@pytest.fixture
def circle_state():
    return TrajectoryState(
        t=0.0,
        x=np.array([0.0, 0.0, 1.2, 0.0]),
        v=np.array([SQRT2, 0.0, 1.0, 0.0]),
    )


@pytest.fixture
def cfg_fine():
    return IntegratorConfig(step=1e-3)


@pytest.fixture
def fodo_lattice():
    cell = [
        NormalQuadDipole(length=0.5, b0=0.2, b1=1.5),
        Drift(length=0.5),
        NormalQuadDipole(length=0.5, b0=0.2, b1=-1.5),
        Drift(length=0.5),
    ]
    return Lattice.from_elements(cell * 4)
