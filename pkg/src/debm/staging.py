"""Continuous patient staging on an estimated disease timeline.

A subject's stage is the expectation of the event centers under the
posterior over "how many events have happened", so it lives on the same
[0, 1] axis as the timeline itself rather than on a discrete grid.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DataError, StagingError
from .febm import _log_densities, _stage_logweights


@dataclass(frozen=True)
class StageResult:
    """Continuous stage plus the normalized per-event-count weights behind it."""

    stage: float
    weights: np.ndarray  # indexed by event count k (k = 0 first when included)
    k_offset: int = 0    # event count of weights[0]

    def top_weights(self, count=3):
        """(k, weight) pairs of the `count` most probable event counts."""
        idx = np.argsort(-self.weights, kind="stable")[:count]
        return [(int(i) + self.k_offset, float(self.weights[i])) for i in idx]


def _stage_logposteriors(timeline, fits, values, include_zero_stage):
    """log p(k, S, X_j) up to a constant, for k over the included event counts."""
    log_pe, log_pn = _log_densities(values, fits)
    seen = ~np.isnan(np.asarray(values, dtype=float))
    order = list(timeline.ordering)
    log_theta_post = np.array([np.log(fits[i].theta_post) for i in order])
    log_theta_pre = np.array([np.log(fits[i].theta_pre) for i in order])
    # prior factors for missing biomarkers drop out of the products too
    seen_s = seen[:, order]
    lw = _stage_logweights(order, log_pe, log_pn)
    m = lw.shape[0]
    zeros = np.zeros((m, 1))
    prior_prefix = np.concatenate([zeros, np.cumsum(seen_s * log_theta_post, axis=1)], axis=1)
    prior_suffix = np.concatenate(
        [np.cumsum((seen_s * log_theta_pre)[:, ::-1], axis=1)[:, ::-1], zeros], axis=1
    )
    lw = lw + prior_prefix + prior_suffix
    return lw if include_zero_stage else lw[:, 1:]


def stage_subject(timeline, fits, x, include_zero_stage=True):
    """Place one subject on the timeline.

    `x` holds the subject's biomarker values in model order (NaN for
    missing, skipped in every product).  With `include_zero_stage` the
    "no event yet" count participates with center 0, which lets healthy
    subjects land at stage 0 exactly.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (timeline.n_events,):
        raise DataError("subject values must align with the model biomarkers")
    if not np.any(~np.isnan(x)):
        raise StagingError("subject shares no observed biomarker with the model")
    lw = _stage_logposteriors(timeline, fits, x[None, :], include_zero_stage)[0]
    if not np.any(np.isfinite(lw)):
        raise StagingError("all stage weights vanished; cannot stage subject")
    weights = np.exp(lw - logsumexp(lw))
    weights /= weights.sum()
    centers = np.concatenate([[0.0], timeline.centers]) if include_zero_stage else timeline.centers
    return StageResult(
        stage=float(weights @ centers),
        weights=weights,
        k_offset=0 if include_zero_stage else 1,
    )


@dataclass
class CohortStages:
    """Per-subject staging results plus a cohort-level stage histogram."""

    results: list            # StageResult or None where staging failed
    errors: list             # (subject index, message) pairs
    hist_counts: np.ndarray
    hist_edges: np.ndarray

    @property
    def stages(self):
        return np.array([np.nan if r is None else r.stage for r in self.results])


def stage_cohort(timeline, fits, values, bins=20, include_zero_stage=True):
    """Stage every row of a cohort value matrix; failures are collected, not fatal."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise DataError("values must be a subjects-by-biomarkers matrix")
    results, errors = [], []
    for j in range(values.shape[0]):
        try:
            results.append(stage_subject(timeline, fits, values[j], include_zero_stage))
        except (DataError, StagingError) as exc:
            results.append(None)
            errors.append((j, str(exc)))
    stages = np.array([r.stage for r in results if r is not None])
    counts, edges = np.histogram(stages, bins=bins, range=(0.0, 1.0))
    return CohortStages(results=results, errors=errors, hist_counts=counts, hist_edges=edges)
