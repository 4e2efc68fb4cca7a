"""The pure-Python kernel path gives the same trajectories as the compiled one."""
import json
import os
import subprocess
import sys

import numpy as np

import fiberqed

SCRIPT = r"""
import json
import fiberqed
from fiberqed.config import RunConfig
from fiberqed.langevin import simulate_trajectory
cfg = RunConfig.caption()
ic = cfg.integrator(t_max=10.0, noise_mode="paper_compat", seed=3)
tr = simulate_trajectory(cfg.model(), ic, *cfg.initial_state())
print(json.dumps({"numba": fiberqed.USE_NUMBA, "r": tr.r[-1].tolist(), "v": tr.v[-1].tolist()}))
"""


def run(disable):
    env = dict(os.environ)
    env.pop("FIBERQED_NO_NUMBA", None)
    if disable:
        env["FIBERQED_NO_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.splitlines()[-1])


def test_fallback_matches_compiled():
    slow = run(True)
    assert slow["numba"] is False
    fast = run(False)
    assert fast["numba"] is fiberqed.USE_NUMBA
    np.testing.assert_allclose(slow["r"], fast["r"], rtol=1e-12)
    np.testing.assert_allclose(slow["v"], fast["v"], rtol=1e-12)


def test_kernel_python_functions_available():
    from fiberqed import kernels
    assert callable(kernels.integrate.py_func)
