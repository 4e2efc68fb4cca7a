import math

import numpy as np
import pytest

from fiberqed.config import RunConfig
from fiberqed.fiber import C_UM_PER_US, AtomSpec, BranchSpec, FiberSpec
from fiberqed.forces import FiberForceModel, ModelFlags
from fiberqed.modes import ModeSuperposition
from fiberqed.response import DriveSpec

LAMBDA = 0.78
OMEGA_A = 2.0 * math.pi * C_UM_PER_US / LAMBDA
GAMMA = 37.6991


@pytest.fixture
def atom():
    return AtomSpec(OMEGA_A, GAMMA, LAMBDA, 2.27369)


@pytest.fixture
def caption_config():
    return RunConfig.caption()


@pytest.fixture
def caption_model(caption_config):
    return caption_config.model()


def threshold_model(wave="travelling", detuning=-3.0 * GAMMA, amplitude=0.3, planar=False, offset=-2e4):
    """Drive in HG_00 plus one branch HG_10 just below resonance (threshold gradients non-zero)."""
    atom = AtomSpec(OMEGA_A, GAMMA, LAMBDA, 2.27369)
    branch = BranchSpec(0, OMEGA_A + offset, ModeSuperposition.hg(1, 0, 10.0))
    fiber = FiberSpec(50.0, 1e-4 * OMEGA_A / C_UM_PER_US, (branch,), bulk_Gamma_F=GAMMA)
    drive = DriveSpec(ModeSuperposition.hg(0, 0, 10.0), amplitude * GAMMA, 1.0, detuning,
                      wave, atom.k_A(C_UM_PER_US), "peak")
    return FiberForceModel(atom, fiber, drive, 1.0, ModelFlags(planar=planar))


@pytest.fixture
def threshold_fiber_model():
    return threshold_model()


def random_points(n, seed, half=15.0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-half, half, size=(n, 3)) * np.array([1.0, 1.0, 0.05])
