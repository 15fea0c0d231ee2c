"""Accuracy metrics, bootstrap uncertainty, cross-validated staging AUC, experiments.

Ordering error is Kendall's Tau distance to the ground truth divided by
N-choose-2; event-center error compares centers after matching mean and
standard deviation to the ground truth (only relative spacing carries
information, the absolute scale is anchored by the pseudo-events).
"""

import itertools
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import rankdata

from ._util import derived_rng, pmap
from .errors import DataError
from .ordering import kendall_tau
from .pipeline import fit_mixtures, fit_model
from .simulate import SimConfig, simulate_cohort


def ordering_error(estimated, truth):
    """Normalized Kendall's Tau distance between orderings, in [0, 1]."""
    estimated, truth = list(estimated), list(truth)
    n = len(truth)
    if n < 2:
        raise DataError("ordering error needs at least two events")
    return kendall_tau(estimated, truth) / (n * (n - 1) / 2)


def event_center_error(centers, centers_truth):
    """Summed absolute deviation of standardized event centers.

    `centers` is scaled and translated to match the mean and standard
    deviation of `centers_truth` first, so any positive affine map of the
    truth scores zero.  Both arrays are indexed by biomarker.
    """
    lam = np.asarray(centers, dtype=float)
    gt = np.asarray(centers_truth, dtype=float)
    if lam.shape != gt.shape:
        raise DataError("center arrays must align")
    sd = lam.std()
    if sd == 0:
        raise DataError("estimated centers have zero spread")
    standardized = (lam - lam.mean()) / sd * gt.std() + gt.mean()
    return float(np.sum(np.abs(standardized - gt)))


def auc(positive_scores, negative_scores):
    """Area under the ROC curve via the rank statistic; ties count one half."""
    pos = np.asarray(positive_scores, dtype=float)
    neg = np.asarray(negative_scores, dtype=float)
    if pos.size == 0 or neg.size == 0:
        raise DataError("AUC needs scores from both groups")
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[: pos.size].sum() - pos.size * (pos.size + 1) / 2
    return float(u / (pos.size * neg.size))


@dataclass
class BootstrapResult:
    """Event-by-position frequencies plus event-center spread across resamples."""

    reference: object                # full-data ProgressionModel
    event_names: list                # row order of the matrix (reference ordering)
    positional_variance: np.ndarray  # rows: events, columns: positions; rows sum to 1
    center_mean: np.ndarray          # per event, aligned with event_names
    center_se: np.ndarray
    resamples: int


def bootstrap(ds, resamples=100, method="debm", seed=0, threads=1, fits=None):
    """Re-fit the model on subject-level resamples to measure its stability.

    Each resample draws subjects with replacement and re-runs the full
    pipeline (pass precomputed `fits` to hold the mixture stage fixed).
    Returns the event-by-position frequency matrix, with rows ordered by
    the full-data central ordering, and per-event center mean and
    standard error across resamples.
    """
    if resamples < 2:
        raise DataError("need at least 2 bootstrap resamples")
    reference = fit_model(ds, method=method, seed=seed, threads=1, fits=fits)
    n = len(reference.biomarkers)
    indices = [derived_rng(seed, b).integers(0, ds.n_subjects, ds.n_subjects)
               for b in range(resamples)]

    def one(idx):
        model = fit_model(ds.subset(idx), method=method, seed=seed, threads=1, fits=fits)
        return model.timeline

    timelines = pmap(one, indices, threads)

    ref_order = reference.timeline.ordering
    counts = np.zeros((n, n))
    centers = np.empty((resamples, n))
    for b, tl in enumerate(timelines):
        position_of = np.empty(n, dtype=int)
        position_of[tl.ordering] = np.arange(n)
        for row, event in enumerate(ref_order):
            counts[row, position_of[event]] += 1
        centers[b] = tl.centers_by_biomarker()[ref_order]
    return BootstrapResult(
        reference=reference,
        event_names=[reference.biomarkers[i] for i in ref_order],
        positional_variance=counts / resamples,
        center_mean=centers.mean(axis=0),
        center_se=centers.std(axis=0, ddof=1),
        resamples=resamples,
    )


@dataclass
class CvAucResult:
    auc: float
    stages: np.ndarray     # pooled test-set stage per subject (NaN if staging failed)
    fold_of: np.ndarray
    diagnoses: np.ndarray


def _stratified_folds(diagnoses, folds, rng):
    fold_of = np.empty(len(diagnoses), dtype=int)
    for label in np.unique(diagnoses):
        idx = np.flatnonzero(diagnoses == label)
        idx = idx[rng.permutation(idx.size)]
        fold_of[idx] = np.arange(idx.size) % folds
    return fold_of


def cv_auc(ds, folds=10, method="debm", seed=0, threads=1, include_zero_stage=True):
    """Out-of-fold staging AUC for separating CN from AD subjects.

    Folds are stratified by diagnosis; each fold's model is fit on the
    remaining subjects (all diagnoses) and used to stage the held-out
    ones.  The AUC pools test-set stages across folds.
    """
    diag = ds.diagnoses
    if int((diag == "CN").sum()) < folds or int((diag == "AD").sum()) < folds:
        raise DataError(f"need at least {folds} CN and {folds} AD subjects")
    fold_of = _stratified_folds(diag, folds, derived_rng(seed, 0))

    def one(fold):
        train = np.flatnonzero(fold_of != fold)
        test = np.flatnonzero(fold_of == fold)
        model = fit_model(ds.subset(train), method=method, seed=seed, threads=1)
        staged = model.stage(ds.subset(test).matrix(model.biomarkers),
                             include_zero_stage=include_zero_stage)
        return test, staged.stages

    stages = np.full(ds.n_subjects, np.nan)
    for test, s in pmap(one, range(folds), threads):
        stages[test] = s
    ok = ~np.isnan(stages)
    value = auc(stages[ok & (diag == "AD")], stages[ok & (diag == "CN")])
    return CvAucResult(auc=value, stages=stages, fold_of=fold_of, diagnoses=diag)


def _resample_biomarkers(base_cfg, n_new, rng):
    """Experiment variant where biomarkers are drawn with replacement from the base set."""
    n0 = base_cfg.n_biomarkers
    base_mu = (np.arange(1, n0 + 1) / (n0 + 1) if base_cfg.mu_xi is None
               else np.asarray(base_cfg.mu_xi, dtype=float))
    base_names = (list(base_cfg.names) if base_cfg.names
                  else [f"bm{i + 1:02d}" for i in range(n0)])
    idx = rng.integers(0, n0, size=n_new)
    seen, names = {}, []
    for i in idx:
        seen[i] = seen.get(i, 0) + 1
        names.append(base_names[i] if seen[i] == 1 else f"{base_names[i]}~{seen[i]}")
    return replace(base_cfg, n_biomarkers=n_new, mu_xi=base_mu[idx], names=names)


@dataclass
class GridConfig:
    """One experiment: simulate over a parameter grid, fit, and score."""

    base: SimConfig
    vary: dict                      # SimConfig field -> list of values
    repetitions: int = 10
    methods: tuple = ("debm", "febm")
    seed: int = 0


def run_experiment_grid(grid, threads=1):
    """Simulate/fit/score every grid point; returns (rows, summary).

    Each row is one (grid point, repetition, method) with its ordering
    and event-center errors.  Methods share the simulated cohort and the
    mixture fits within a repetition.  `summary` aggregates mean and
    standard deviation per grid point and method.  Results do not depend
    on execution order or thread count.
    """
    keys = list(grid.vary)
    points = list(itertools.product(*(grid.vary[k] for k in keys)))
    tasks = [(pi, point, rep) for pi, point in enumerate(points)
             for rep in range(grid.repetitions)]

    def one(task):
        pi, point, rep = task
        overrides = dict(zip(keys, point))
        # common random numbers: the cohort seed depends on the repetition
        # only, so grid points are compared on paired draws and trend
        # estimates do not drown in between-cohort noise
        data_seed = int(np.random.SeedSequence([grid.seed, rep]).generate_state(1)[0])
        cfg = grid.base
        if "n_biomarkers" in overrides:
            n_new = int(overrides.pop("n_biomarkers"))
            cfg = _resample_biomarkers(cfg, n_new, derived_rng(grid.seed, rep, 7))
        cfg = replace(cfg, **overrides, seed=data_seed)
        ds, truth = simulate_cohort(cfg)
        names, fits, bounds, _ = fit_mixtures(ds)
        out = []
        for method in grid.methods:
            model = fit_model(ds, method=method, seed=data_seed, fits=fits,
                              bounds=bounds, biomarkers=names)
            out.append({
                **dict(zip(keys, point)),
                "repetition": rep,
                "method": method,
                "seed": data_seed,
                "ordering_error": ordering_error(model.timeline.ordering, truth.ordering),
                "event_center_error": event_center_error(
                    model.timeline.centers_by_biomarker(), truth.mu_xi),
            })
        return out

    rows = [row for chunk in pmap(one, tasks, threads) for row in chunk]

    summary = []
    for pi, point in enumerate(points):
        for method in grid.methods:
            sel = [r for r in rows
                   if r["method"] == method and all(r[k] == v for k, v in zip(keys, point))]
            oe = np.array([r["ordering_error"] for r in sel])
            ce = np.array([r["event_center_error"] for r in sel])
            summary.append({
                **dict(zip(keys, point)),
                "method": method,
                "repetitions": len(sel),
                "ordering_error_mean": float(oe.mean()),
                "ordering_error_std": float(oe.std(ddof=1)) if oe.size > 1 else 0.0,
                "event_center_error_mean": float(ce.mean()),
                "event_center_error_std": float(ce.std(ddof=1)) if ce.size > 1 else 0.0,
            })
    return rows, summary


def _heat_color(v):
    # white -> deep blue ramp
    lo = np.array([255, 255, 255])
    hi = np.array([8, 48, 107])
    rgb = (lo + (hi - lo) * min(max(v, 0.0), 1.0)).astype(int)
    return f"rgb({rgb[0]},{rgb[1]},{rgb[2]})"


def positional_variance_svg(matrix, row_labels, cell=28, label_width=None):
    """Render an event-by-position frequency matrix as a standalone SVG string."""
    matrix = np.asarray(matrix, dtype=float)
    n_rows, n_cols = matrix.shape
    if len(row_labels) != n_rows:
        raise DataError("one label per matrix row is required")
    label_width = label_width or (8 * max(len(str(l)) for l in row_labels) + 16)
    width = label_width + n_cols * cell + 10
    height = (n_rows + 1) * cell + 10
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">'
    ]
    for j in range(n_cols):
        parts.append(
            f'<text x="{label_width + j * cell + cell / 2:.1f}" y="{cell - 8}" '
            f'text-anchor="middle">{j + 1}</text>'
        )
    for i, label in enumerate(row_labels):
        y = (i + 1) * cell
        parts.append(
            f'<text x="{label_width - 6}" y="{y + cell / 2 + 4:.1f}" '
            f'text-anchor="end">{label}</text>'
        )
        for j in range(n_cols):
            v = matrix[i, j]
            parts.append(
                f'<rect x="{label_width + j * cell}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{_heat_color(v)}" stroke="#ccc"/>'
            )
            if v >= 0.005:
                text_fill = "#fff" if v > 0.6 else "#333"
                parts.append(
                    f'<text x="{label_width + j * cell + cell / 2:.1f}" '
                    f'y="{y + cell / 2 + 4:.1f}" text-anchor="middle" '
                    f'fill="{text_fill}">{v:.2f}</text>'
                )
    parts.append("</svg>")
    return "\n".join(parts)
