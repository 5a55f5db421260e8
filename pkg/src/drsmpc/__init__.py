"""Distributionally robust stochastic MPC with moment-based ambiguity sets."""
from .conservatism import ConservatismResult, build_lifted_diff, conservatism, tightened_pair
from .errors import (ConfigurationError, DRSMPCError, EmptySetError, InfeasibleError,
                     IterationLimitError, LICQError, ValidationError)
from .harness import (ExperimentConfig, PairedTrajectories, ViolationStats, build_controller,
                      export, horizon_conservatism, load_config, run_monte_carlo, run_paired,
                      sample_noise, summary)
from .lti_model import (PredictionMatrices, SystemModel, build_prediction_matrices, double_integrator,
                        propagate_covariance, propagate_mean, propagate_moments, solve_riccati, step)
from .polytope import Polytope, box, chebyshev_center, erode, support_value, volume
from .qp import (QPData, QPSolution, assemble_constraints, assemble_cost, build_horizon_constraints,
                 kkt_residuals, solve_active_set, solve_equality_kkt)
from .regret import (ControllerHistory, closed_loop_regret, convergence_report, detect_phi_entry,
                     gap_closed_form, gap_unconstrained, lambda_terms, regret_series,
                     suboptimality_gap)
from .tightening import (RiskAllocation, TighteningMode, allocate_uniform, psi_dr, psi_empirical,
                         psi_gaussian, tighten, tighten_rows)

__version__ = "0.1.0"
