"""Disease progression timelines from cross-sectional biomarker data.

The package estimates the order in which biomarkers turn abnormal, how
far apart those events sit on a [0, 1] disease axis, and where individual
subjects stand on that axis, all from a single cross-sectional table.
A generative single-ordering baseline, a sigmoid-trajectory cohort
simulator and an evaluation harness (bootstrap, cross-validated staging
AUC, simulation experiment grids) round out the toolkit.
"""

from .data import Dataset, load_dataset, residualize, select_biomarkers
from .errors import (
    DataError,
    DebmError,
    DegenerateTimelineError,
    FitError,
    SchemaError,
    StagingError,
)
from .evaluate import (
    BootstrapResult,
    CvAucResult,
    GridConfig,
    auc,
    bootstrap,
    cv_auc,
    event_center_error,
    ordering_error,
    positional_variance_svg,
    run_experiment_grid,
)
from .febm import febm_loglik, febm_optimize, febm_stage
from .mixture import FitBounds, GmmResult, MixtureFit, fit_gmm, init_estimates, posterior
from .model_io import load_model, save_model
from .ordering import (
    Timeline,
    adjacent_swap_costs,
    central_ordering,
    event_centers,
    febm_event_centers,
    kendall_tau,
    prob_kendall_tau,
    subject_ordering,
)
from .pipeline import ProgressionModel, fit_mixtures, fit_model
from .simulate import SimConfig, SimTruth, simulate_cohort
from .staging import CohortStages, StageResult, stage_cohort, stage_subject

__version__ = "0.1.0"

__all__ = [
    "BootstrapResult", "CohortStages", "CvAucResult", "DataError", "Dataset",
    "DebmError", "DegenerateTimelineError", "FitBounds", "FitError", "GmmResult",
    "GridConfig", "MixtureFit", "ProgressionModel", "SchemaError", "SimConfig",
    "SimTruth", "StageResult", "StagingError", "Timeline", "adjacent_swap_costs",
    "auc", "bootstrap",
    "central_ordering", "cv_auc", "event_center_error", "event_centers",
    "febm_event_centers", "febm_loglik", "febm_optimize", "febm_stage",
    "fit_gmm", "fit_mixtures", "fit_model", "init_estimates", "kendall_tau",
    "load_dataset", "load_model", "ordering_error", "positional_variance_svg",
    "posterior", "prob_kendall_tau", "residualize", "run_experiment_grid",
    "save_model", "select_biomarkers", "simulate_cohort", "stage_cohort",
    "stage_subject", "subject_ordering",
]
