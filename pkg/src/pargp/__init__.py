"""Parallel hold-out cross-validation for Gaussian process covariance models."""
from .covariance import BACKEND as KERNEL_BACKEND
from .covariance import cov_matrix, cross_cov, cross_cov_matrix, exp_cov
from .cvloss import CvReport, SubsetResult, cv_loss, tilde_cv
from .errors import (AllSubsetsEmpty, EmptySubset, NotPositiveDefinite, PargpError, RankDeficient,
                     TooLargeForExactML)
from .estimate import (CandidateSet, FitResult, fit_grid, fit_ml, make_grid, make_lhs,
                       resample_compare)
from .kriging import KrigingSystem, build_system, gls_estimate, krige, neg2_log_likelihood
from .model import (CovParams, CovParamsFull, Dataset, Location, Observation, Observations, Rect,
                    Role, split_roles, to_prediction_params)
from .parallel import EvalPlan, EvalTrace, SubsetPool, evaluate_parallel, schedule
from .partition import (Partition, PartitionConfig, SubsetData, assign_subsets, predict_local,
                        recursive_partition)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND", "cov_matrix", "cross_cov", "cross_cov_matrix", "exp_cov",
    "CvReport", "SubsetResult", "cv_loss", "tilde_cv",
    "AllSubsetsEmpty", "EmptySubset", "NotPositiveDefinite", "PargpError", "RankDeficient",
    "TooLargeForExactML",
    "CandidateSet", "FitResult", "fit_grid", "fit_ml", "make_grid", "make_lhs", "resample_compare",
    "KrigingSystem", "build_system", "gls_estimate", "krige", "neg2_log_likelihood",
    "CovParams", "CovParamsFull", "Dataset", "Location", "Observation", "Observations", "Rect",
    "Role", "split_roles", "to_prediction_params",
    "EvalPlan", "EvalTrace", "SubsetPool", "evaluate_parallel", "schedule",
    "Partition", "PartitionConfig", "SubsetData", "assign_subsets", "predict_local",
    "recursive_partition",
]
