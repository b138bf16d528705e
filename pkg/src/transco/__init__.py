"""Robust transfer learning under the mean-shift outlier model."""
from .baselines import LassoOptions, lasso_cd, lasso_cv, ols_fit, ptl_fit
from .dataio import (ExperimentConfig, ResultRecord, load_dataset_csv, load_experiment_config,
                     write_results)
from .ipod import Dataset, IpodFit, TuningPath, bic_star, hat_matrix, ipod_bic_path, ipod_fit
from .metrics import DetectionScore, f1_detection, huber_loss, mse_beta, r_squared
from .simgen import SimulationConfig, gen_problem, reference_config
from .thresholding import hard_penalty, hard_threshold, hard_threshold_vec
from .transfer import (SourceEnsemble, TransferFit, TransferState, build_transform, fit_sources,
                       transco_bic_path, transco_fit, transco_full, transco_objective, transco_step)

__version__ = "0.1.0"
