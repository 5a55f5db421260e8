"""
Regret of moment-robust MPC on a double integrator
==================================================

Two receding-horizon controllers drive the same double integrator from
``x0 = [10, 0]`` under the same Laplace disturbance sequence:

* the *informed* controller tightens with the true (sampled) quantile;
* the *robust* controller only trusts the first two moments.

We follow the accumulated cost difference (closed-loop regret) and the gap
between the two optimal values over 200 steps of 0.05 s.
"""

import numpy as np

from drsmpc import ExperimentConfig, build_controller, run_paired
from drsmpc.regret import convergence_report, regret_series

cfg = ExperimentConfig()
star = build_controller(cfg, cfg.informed_mode, "fully_informed")
dagger = build_controller(cfg, cfg.dr_mode, "dr")
print("tightening constants, stage 1 rows")
print("  informed:", np.round(star.tightening.psis[:4], 3))
print("  robust:  ", np.round(dagger.tightening.psis[:4], 3))

run = run_paired(cfg, star, dagger)
series = regret_series(run.star, run.dagger, cfg.model().Q, cfg.model().R)
print(f"\n{run.solves} QPs solved, worst KKT residual {run.kkt_max:.1e}")

# A coarse text plot of both series.
print(f"\n{'t [s]':>6} {'regret':>10} {'gap':>10}  active (informed | robust)")
for k in list(range(0, 30, 3)) + list(range(30, 201, 20)):
    print(f"{k * cfg.dt:6.2f} {series.closed_loop[k]:10.3f} {series.gap[k]:10.4f}  "
          f"{run.star.active_sets[k]} | {run.dagger.active_sets[k]}")

# Early on the robust controller brakes harder, so its realized cost is lower
# while the informed one still moves fast; later the robust one pays for the
# detour.  Once neither controller has an active constraint, both apply the
# same linear law and the gap shrinks geometrically.
rep = convergence_report(series)
print(f"\nconstraints released for good at t = {series.phi_entry * cfg.dt:.2f} s")
print(f"fitted decay rate of |gap|: {np.exp(rep.gap_decay_slope):.3f} per step")
print(f"largest regret increment over the last 20 steps: {rep.regret_increment_tail_max:.2e}")
print(f"final regret: {series.closed_loop[-1]:.3f}")
