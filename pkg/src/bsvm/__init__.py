"""Scalable variational inference for Bayesian max-margin classification."""

from .exceptions import DataError, InputError, NumericalError, NumericalWarning
from .kernels import KernelComponent, KernelConfig, build_gram
from .nonlinear import (FitResult, SparseGPWorkspace, TrainConfig,
                        VariationalState, build_workspace, elbo, fit_batch,
                        fit_svi)
from .linear import LinearState, elbo_linear, fit_linear_svi, predict_linear
from .prediction import (EvalReport, PredictiveDistribution, auc_score,
                         brier_score, error_rate, predict)
from .inducing import InducingSet, select_kmeans, select_random
from .tuning import hyper_gradient, hyper_gradients, tune_step
from .data import (CvPlan, Dataset, StandardizeParams, load_csv,
                   load_sparse_text, make_cv, save_csv, standardize_apply,
                   standardize_fit)
from .datasets import (load_benchmark, susy_like, synthetic_breast_cancer,
                       synthetic_heart, two_moons, waveform)
from .serialize import (LinearPrimalModel, SparseGPModel, load_model,
                        save_model)
from .pipeline import (TrainOutcome, cross_validate, default_train_config,
                       grid_search_theta, train_model, tune_theta)

__version__ = "0.1.0"
