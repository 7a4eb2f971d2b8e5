"""Numerical toolkit for group restricted isometries of block-diagonal random
matrices, chaos-process concentration and chaining estimates."""

__version__ = "0.1.0"

from .chaining import (MetricPointSet, VOperator, build_rip_metric_set, covering_number, dudley_gamma,
                       gamma_phi_p_upper, gamma_split_estimate, gamma_u_quantities, v_distance, v_frobenius)
from .chaos import (MatrixFamily, TailCurve, alpha_star, chaos_sup_statistic, decoupled_chaos,
                    decoupling_comparison, empirical_moment_curve, empirical_tail, hw_bound_alpha,
                    tail_regime_fit, tails_from_moments_bound, uniform_hw_bound)
from .distributions import (DistributionSpec, PhiFunction, estimate_psi_alpha_norm, estimate_tau_phi,
                            increment_tail_check, phi_conjugate, sample, weibull_tail)
from .errors import (BlockRipError, CapacityError, ConvergenceError, DivergenceError, FitDomainError,
                     ParameterDomainError, ValidationError)
from .group_model import (GroupPartition, GroupSparseVector, best_group_approx, coherence_mu,
                          enumerate_group_supports, group_l0, mixed_norm)
from .matrices import (BlockDiagonalMatrix, OrthogonalBasis, block_apply, extreme_eigen_sym, frobenius_norm,
                       haar_orthogonal, opnorm_2_2, opnorm_2_inf, random_block_diagonal)
from .recovery import RecoveryProblem, group_hard_threshold, group_iht, group_ista, recovery_experiment
from .rip import RicEstimate, exact_group_ric, mc_group_ric_lower, phase_transition, recovery_gate
from .rng import RngStream
