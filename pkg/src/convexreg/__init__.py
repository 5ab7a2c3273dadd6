"""Distributionally robust convex regression and benchmark baselines."""

from .baselines import (KernelModel, LseConfig, fit_convex_lse,
                        fit_linear_absolute, fit_linear_squared,
                        kernel_predict, kernel_predict_many, loo_criterion,
                        select_bandwidth)
from .data import (CsvSchema, PreprocessPlan, SyntheticSpec, f_star,
                   generate_synthetic, load_and_preprocess, split_indices,
                   stream, write_dataset_csv, write_market_like_csv)
from .estimators import (ConvexLeastSquaresRegressor, GaussianKernelRegressor,
                         LinearMedianRegressor, RobustConvexRegressor)
from .exceptions import (FitError, InvalidArgumentError, LpSolveError,
                         QpConvergenceError, SolveError)
from .fitting import (DrcrLpIndex, FitConfig, build_drcr_lp, default_radius,
                      fit_drcr, worst_case_loss_oracle)
from .lp import (LinearProgram, LPSolution, ResidualReport, SolverOptions,
                 certify, lp_to_text, solve_lp,
                 validate_infeasibility_certificate)
from .model import (AffinePiece, Dataset, FitMeta, LossReport, MaxAffineModel,
                    dual_objective, empirical_l1, empirical_l2,
                    gradient_sup_norm, load_model, loss_report, predict,
                    predict_many, save_model)

__version__ = "0.1.0"
