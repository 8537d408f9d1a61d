"""Penalized generalized simultaneous component analysis of coupled binary and quantitative data."""
__version__ = "1.0.0"

from .evaluation import EvalReport, bayes_error, estimated_rank, evaluate_estimates, evaluate_fit, rmse
from .exceptions import DataError, GscaError, InvalidArgumentError, NumericError, SaturationWarning
from .links_losses import (CoupledData, LinkKind, binary_nll, grad_f1, grad_f2, inverse_link,
                           joint_gradient, joint_nll, lipschitz_bound, quantitative_nll)
from .model_selection import (CvErrorResult, CvResult, FoldAssignment, GridSpec, cv_error,
                              diagonal_folds, effective_lambda, fit_path, lambda_bounds,
                              lambda_for_rank, lambda_grid, lambda_path, rmse_path)
from .penalties import (PenaltyFamily, PenaltySpec, penalty_value, scalar_prox, supergradient,
                        thresholding_curve, weighted_svt)
from .simulation import (SimGroundTruth, SimParams, drop_uninformative_binary_columns,
                         load_marginals, marginals_to_offsets, sca_full_information,
                         simulate_coupled)
from .solver import (FitConfig, ModelFit, decompose_Z, fit_exact_rank, fit_gsca,
                     majorization_target, objective, quadratic_majorizer, update_mu,
                     update_sigma2, update_Z)
