"""Compare compiled kernels against the pure-Python fallback.

Each backend runs in its own interpreter because ``FIBERQED_NO_NUMBA`` is
read at import time. Usage::

    python3 benchmarks/bench_kernels.py [--steps 2000] [--grid 101]
"""
import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
import fiberqed
from fiberqed.config import RunConfig
from fiberqed.langevin import simulate_trajectory
from fiberqed.modes import profile_value_grad

steps, grid = int(sys.argv[1]), int(sys.argv[2])
cfg = RunConfig.caption()
model = cfg.model()
ic = cfg.integrator(t_max=steps * 0.05, noise_mode="paper_compat", seed=1, stop_on_exit=False)
r0, v0 = cfg.initial_state()
simulate_trajectory(model, cfg.integrator(t_max=0.1), r0, v0)  # compile / warm up
t0 = time.perf_counter()
tr = simulate_trajectory(model, ic, r0, v0)
t_sim = time.perf_counter() - t0

g = np.linspace(-25, 25, grid)
xx, yy = np.meshgrid(g, g, indexing="ij")
mode = model.drive.profile
profile_value_grad(mode, xx[:2, :2], yy[:2, :2])
t0 = time.perf_counter()
f, gx, gy = profile_value_grad(mode, xx, yy)
t_grid = time.perf_counter() - t0
print(json.dumps({"numba": fiberqed.USE_NUMBA, "t_sim": t_sim, "t_grid": t_grid,
                  "final": tr.r[-1].tolist(), "fsum": float(np.abs(f).sum())}))
"""


def run(steps, grid, disable):
    env = dict(os.environ)
    env.pop("FIBERQED_NO_NUMBA", None)
    if disable:
        env["FIBERQED_NO_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", WORKER, str(steps), str(grid)],
                         env=env, check=True, capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--grid", type=int, default=101)
    a = ap.parse_args()
    jit = run(a.steps, a.grid, False)
    py = run(a.steps, a.grid, True)
    print(f"{'task':<28}{'numba [s]':>12}{'fallback [s]':>14}{'speedup':>10}")
    for key, name in (("t_sim", f"trajectory ({a.steps} steps)"), ("t_grid", f"mode grid ({a.grid}^2)")):
        print(f"{name:<28}{jit[key]:>12.4f}{py[key]:>14.4f}{py[key] / jit[key]:>10.1f}")
    dr = max(abs(x - y) for x, y in zip(jit["final"], py["final"]))
    print(f"max |r_final difference| = {dr:.3g}; grid |f| sums {jit['fsum']:.12g} vs {py['fsum']:.12g}")


if __name__ == "__main__":
    main()
