"""Per-step ratio versus tail envelope of the gain convergence curve.

For each system of the random test suite, reports the worst one-step
ratio error(T+1)/error(T) above the 1e-12 floor, the worst 2n-step ratio of
the tail envelope max_{s >= T} error(s), and the closed-loop poles.  One-step
ratios above one come from oscillating (complex or negative) closed-loop
poles and early transients; the envelope still decays geometrically.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from conftest import random_suite  # noqa: E402

from lqrtransfer.ddlqr import convergence_curve  # noqa: E402
from lqrtransfer.lti import CostSpec, impulse_response, solve_riccati  # noqa: E402

FLOOR = 1e-12

if __name__ == "__main__":
    fails = 0
    for i, model in enumerate(random_suite()):
        n = model.n
        cost = CostSpec(np.eye(model.l), np.eye(model.m))
        diag = convergence_curve(impulse_response(model, 80 + n), cost, n, range(1, 61))
        e = diag.errors
        keep = (e[:-1] > FLOOR) & (e[1:] > FLOOR)
        step = (e[1:][keep] / e[:-1][keep]).max(initial=0.0)
        env = np.maximum.accumulate(e[::-1])[::-1]
        ek = env[2 * n:] > FLOOR
        window = (env[2 * n:][ek] / env[:-2 * n][ek]).max(initial=0.0)
        poles = np.linalg.eigvals(model.A - model.B @ solve_riccati(model, cost).K_star)
        fails += step > 0.99
        flag = "  <-- ratio > 0.99" if step > 0.99 else ""
        print(f"{i:2d} n={n} m={model.m} l={model.l} mu={diag.mu_hat:.3f} R2={diag.r2:.3f} "
              f"step={step:.3f} env={window:.3f} |poles|max={np.abs(poles).max():.2f} "
              f"complex={bool(np.any(np.abs(poles.imag) > 1e-9))}{flag}")
    print(f"one-step ratio test fails on {fails}/50 systems")
