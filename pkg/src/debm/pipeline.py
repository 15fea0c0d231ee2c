"""End-to-end model fitting: biomarker table in, disease timeline out."""

from dataclasses import dataclass, field

import numpy as np

from ._util import pmap
from .errors import DataError, FitError
from .febm import febm_optimize
from .mixture import MixtureFit, FitBounds, fit_gmm, init_estimates, posterior
from .ordering import (
    Timeline,
    central_ordering,
    central_ordering_objective,
    event_centers,
    febm_event_centers,
    prior_rank_from_theta,
    subject_ordering,
)
from .staging import stage_cohort

METHODS = ("debm", "febm")


@dataclass
class ProgressionModel:
    """Fitted disease-progression model: mixtures plus a timeline."""

    method: str
    biomarkers: list
    fits: list
    bounds: list
    timeline: Timeline
    seed: int = 0
    diagnostics: dict = field(default_factory=dict)

    def posteriors(self, values):
        """Per-biomarker posterior abnormality probabilities (NaN passes through)."""
        values = np.asarray(values, dtype=float)
        return np.column_stack(
            [posterior(fit, values[:, i]) for i, fit in enumerate(self.fits)]
        )

    def stage(self, values, bins=20, include_zero_stage=True):
        """Stage a cohort value matrix aligned with `self.biomarkers`."""
        return stage_cohort(self.timeline, self.fits, values, bins=bins,
                            include_zero_stage=include_zero_stage)


def fit_mixtures(ds, biomarkers=None, threads=1):
    """Fit the two-class mixture of every biomarker; returns (names, fits, bounds, diags)."""
    ds.require_groups("CN", "AD")
    names = list(biomarkers) if biomarkers is not None else ds.biomarker_names
    if not names:
        raise DataError("no biomarkers to fit")
    known = ds.diagnoses != "MCI"

    def fit_one(name):
        col = np.asarray(ds.biomarkers[name], dtype=float)
        seen = ~np.isnan(col)
        try:
            init, bounds = init_estimates(col[seen & known], ds.diagnoses[seen & known])
            result = fit_gmm(col[seen], init, bounds)
        except (DataError, FitError) as exc:
            raise type(exc)(f"biomarker {name!r}: {exc}") from exc
        return result, bounds

    fitted = pmap(fit_one, names, threads)
    fits = [r.fit for r, _ in fitted]
    bounds = [b for _, b in fitted]
    diags = {
        name: {
            "objective": float(r.objectives[-1]),
            "iterations": int(r.iterations),
            "converged": bool(r.converged),
        }
        for name, (r, _) in zip(names, fitted)
    }
    return names, fits, bounds, diags


def cohort_posteriors(ds, names, fits):
    values = ds.matrix(names)
    post = np.column_stack([posterior(fit, values[:, i]) for i, fit in enumerate(fits)])
    for j in range(post.shape[0]):
        if np.all(np.isnan(post[j])):
            raise DataError(f"subject {ds.subject_ids[j]}: no observed biomarkers")
    return values, post


def fit_model(ds, method="debm", seed=0, threads=1, biomarkers=None,
              fits=None, bounds=None, restarts=0, starts=10):
    """Fit a disease-progression model on a dataset.

    `method` picks how the central ordering and event centers are
    estimated: "debm" ranks subjects' posterior abnormality probabilities
    and aggregates them, "febm" maximizes a single-ordering data
    likelihood.  Pass precomputed `fits` to skip the mixture stage (used
    by resampling loops where mixtures are held fixed).
    """
    if method not in METHODS:
        raise DataError(f"unknown method {method!r}; expected one of {METHODS}")
    if fits is None:
        names, fits, bounds, mix_diags = fit_mixtures(ds, biomarkers, threads)
    else:
        names = list(biomarkers) if biomarkers is not None else ds.biomarker_names
        bounds = list(bounds) if bounds is not None else [None] * len(fits)
        mix_diags = {}
    if len(fits) != len(names):
        raise DataError("one mixture fit per biomarker is required")

    values, post = cohort_posteriors(ds, names, fits)
    theta_pre = np.array([f.theta_pre for f in fits])
    diagnostics = {"mixtures": mix_diags}

    if method == "debm":
        prior_rank = prior_rank_from_theta(theta_pre)
        orderings = [subject_ordering(post[j], prior_rank) for j in range(post.shape[0])]
        rng = np.random.default_rng(seed) if restarts else None
        order = central_ordering(orderings, post, theta_pre, restarts=restarts, rng=rng)
        timeline = event_centers(order, orderings, post)
        diagnostics["ordering_objective"] = central_ordering_objective(order, orderings, post)
    else:
        order = febm_optimize(values, fits, starts=starts, seed=seed)
        timeline = febm_event_centers(order, values, fits)
    return ProgressionModel(
        method=method,
        biomarkers=names,
        fits=fits,
        bounds=bounds,
        timeline=timeline,
        seed=seed,
        diagnostics=diagnostics,
    )
