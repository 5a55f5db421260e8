"""
A dense active-set QP solver, step by step
==========================================

Every MPC step solves ``min 1/2 u'Hu + h'u  s.t.  Mu <= b``.  The solver
starts at the unconstrained minimizer and adds violated rows one at a time,
dropping rows whose multipliers would turn negative.
"""

import numpy as np

from drsmpc import QPData, kkt_residuals, solve_active_set

# A two-variable problem: pull towards (2, 2) inside the unit box.
H = 2 * np.eye(2)
h = np.array([-4.0, -4.0])
M = np.vstack([np.eye(2), -np.eye(2)])
b = np.ones(4)
sol = solve_active_set(QPData(H, h, 0.0, M, b))
print("optimizer     ", sol.u)
print("active rows   ", sol.active_set)
print("multipliers   ", sol.mu)
print("KKT residuals ", sol.kkt)

# Warm-starting from a previous active set usually saves iterations when the
# data moves only slightly, as it does between consecutive MPC steps.
h2 = h + np.array([0.1, -0.05])
cold = solve_active_set(QPData(H, h2, 0.0, M, b))
warm = solve_active_set(QPData(H, h2, 0.0, M, b), warm_start=sol.active_set)
print("\niterations cold / warm:", cold.iterations, "/", warm.iterations)

# Residuals grow linearly with a perturbation of the optimizer.
for eps in [1e-6, 1e-4, 1e-2]:
    r = kkt_residuals(QPData(H, h, 0.0, M, b), sol.u + eps, sol.mu)
    print(f"perturbation {eps:.0e}: stationarity {r.stationarity:.2e}, primal {r.primal:.2e}")

# Infeasible data raises with a small set of conflicting rows.
from drsmpc import InfeasibleError

try:
    solve_active_set(QPData(H, h, 0.0, np.array([[1.0, 0.0], [-1.0, 0.0]]), [0.0, -1.0]))
except InfeasibleError as err:
    print("\ninfeasible, conflicting rows:", err.certificate)
