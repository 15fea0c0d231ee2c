"""Cross-sectional biomarker tables: loading, covariate residualization, selection.

The on-disk format is a plain CSV with a header row; a sidecar schema
(JSON) assigns each column a role.  Missing values are empty cells and
are represented as NaN throughout, never as zeros.
"""

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats as sps

from .errors import DataError, SchemaError

DIAGNOSES = ("CN", "MCI", "AD")

SCHEMA_ROLES = ("id", "diagnosis", "biomarker", "covariate", "ignore")


@dataclass
class Dataset:
    """Subject-by-biomarker value matrix with diagnosis labels and covariates."""

    subject_ids: list
    diagnoses: np.ndarray
    biomarkers: dict
    covariates: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def __post_init__(self):
        m = len(self.subject_ids)
        self.diagnoses = np.asarray(self.diagnoses)
        bad = set(self.diagnoses) - set(DIAGNOSES)
        if bad:
            raise DataError(f"unknown diagnosis labels: {sorted(bad)}")
        if self.diagnoses.shape != (m,):
            raise DataError("diagnoses must align with subject_ids")
        for name, col in {**self.biomarkers, **self.covariates}.items():
            arr = np.asarray(col, dtype=float)
            if arr.shape != (m,):
                raise DataError(f"column {name!r} has length {arr.shape}, expected {m}")

    @property
    def n_subjects(self):
        return len(self.subject_ids)

    @property
    def biomarker_names(self):
        return list(self.biomarkers)

    def matrix(self, names=None):
        """Value matrix (subjects x biomarkers) for the named columns."""
        names = list(self.biomarkers) if names is None else list(names)
        return np.column_stack([np.asarray(self.biomarkers[n], dtype=float) for n in names])

    def subset(self, indices):
        """Row subset (duplicates allowed, e.g. bootstrap resamples)."""
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            subject_ids=[self.subject_ids[i] for i in idx],
            diagnoses=self.diagnoses[idx],
            biomarkers={k: np.asarray(v, dtype=float)[idx] for k, v in self.biomarkers.items()},
            covariates={k: np.asarray(v, dtype=float)[idx] for k, v in self.covariates.items()},
            flags=list(self.flags),
        )

    def require_groups(self, *groups):
        for g in groups:
            if not np.any(self.diagnoses == g):
                raise DataError(f"dataset contains no {g} subjects")


def _column_roles(schema, header):
    """Resolve the sidecar schema into a column -> role mapping."""
    if "id" not in schema or "diagnosis" not in schema:
        raise SchemaError("schema must name an id column and a diagnosis column")
    roles = {schema["id"]: "id", schema["diagnosis"]: "diagnosis"}
    for name in schema.get("biomarkers", []):
        roles[name] = "biomarker"
    for name in schema.get("covariates", []):
        roles[name] = "covariate"
    for name in schema.get("ignore", []):
        roles.setdefault(name, "ignore")
    if len(roles) < 2 + len(schema.get("biomarkers", [])) + len(schema.get("covariates", [])):
        raise SchemaError("schema assigns multiple roles to one column")
    missing = [c for c in roles if c not in header]
    if missing:
        raise SchemaError(f"schema names columns absent from the file: {missing}")
    if not any(r == "biomarker" for r in roles.values()):
        raise SchemaError("schema declares no biomarker columns")
    return roles


def load_dataset(path, schema):
    """Read a CSV biomarker table using a column-role schema.

    `schema` is a mapping with keys `id`, `diagnosis`, `biomarkers`,
    `covariates` (optional), `ignore` (optional) and `log_transform`
    (optional list of biomarker columns to take natural logs of).
    Empty cells become missing values; any non-numeric cell in a numeric
    column is an error naming the row and column.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)

    roles = _column_roles(schema, header)
    col_idx = {name: header.index(name) for name in roles}

    ids, dx = [], []
    numeric = {n: [] for n, r in roles.items() if r in ("biomarker", "covariate")}
    for rownum, row in enumerate(rows, start=2):  # 1-based, counting the header
        if len(row) != len(header):
            raise DataError(f"row {rownum}: expected {len(header)} cells, found {len(row)}")
        label = row[col_idx[schema["diagnosis"]]].strip()
        if label not in DIAGNOSES:
            raise DataError(f"row {rownum}: unknown diagnosis label {label!r}")
        ids.append(row[col_idx[schema["id"]]].strip())
        dx.append(label)
        for name in numeric:
            cell = row[col_idx[name]].strip()
            if cell == "":
                numeric[name].append(math.nan)
                continue
            try:
                numeric[name].append(float(cell))
            except ValueError:
                raise DataError(
                    f"row {rownum}, column {name!r}: non-numeric value {cell!r}"
                ) from None

    biomarkers = {n: np.asarray(numeric[n]) for n, r in roles.items() if r == "biomarker"}
    covariates = {n: np.asarray(numeric[n]) for n, r in roles.items() if r == "covariate"}

    for name in schema.get("log_transform", []):
        if name not in biomarkers:
            raise SchemaError(f"log_transform names unknown biomarker {name!r}")
        col = biomarkers[name]
        bad = np.flatnonzero(col <= 0)
        if bad.size:
            raise DataError(
                f"row {bad[0] + 2}, column {name!r}: non-positive value cannot be log-transformed"
            )
        biomarkers[name] = np.log(col)

    return Dataset(subject_ids=ids, diagnoses=np.asarray(dx), biomarkers=biomarkers,
                   covariates=covariates)


def residualize(ds, biomarker, covariates):
    """Regress covariate effects out of one biomarker column.

    Ordinary least squares is fit on CN subjects only (so the disease
    effect is not absorbed into age or volume coefficients); the residual
    replaces the value for every subject.  Subjects with a missing
    covariate keep their raw value and are flagged on the returned
    dataset.
    """
    if biomarker not in ds.biomarkers:
        raise DataError(f"unknown biomarker {biomarker!r}")
    cov_cols = []
    for name in covariates:
        if name not in ds.covariates:
            raise DataError(f"unknown covariate {name!r}")
        cov_cols.append(np.asarray(ds.covariates[name], dtype=float))
    if not cov_cols:
        raise DataError("no covariates given")

    y = np.asarray(ds.biomarkers[biomarker], dtype=float)
    design = np.column_stack([np.ones(ds.n_subjects)] + cov_cols)
    cov_ok = ~np.isnan(design).any(axis=1)
    fit_mask = (ds.diagnoses == "CN") & cov_ok & ~np.isnan(y)
    n_params = design.shape[1]
    if fit_mask.sum() < n_params + 1:
        raise DataError(
            f"residualize({biomarker!r}): needs at least {n_params + 1} complete CN rows, "
            f"found {int(fit_mask.sum())}"
        )

    coef, _, rank, _ = np.linalg.lstsq(design[fit_mask], y[fit_mask], rcond=None)
    if rank < n_params:
        raise DataError(f"residualize({biomarker!r}): covariate matrix is rank deficient")

    new = y.copy()
    new[cov_ok] = y[cov_ok] - design[cov_ok] @ coef
    flags = list(ds.flags)
    for i in np.flatnonzero(~cov_ok):
        flags.append(
            f"subject {ds.subject_ids[i]}: missing covariate; {biomarker} kept unadjusted"
        )
    biomarkers = dict(ds.biomarkers)
    biomarkers[biomarker] = new
    return replace(ds, biomarkers=biomarkers, flags=flags)


def select_biomarkers(ds, alpha=0.005, bonferroni=True):
    """Biomarkers separating CN from AD by a two-sample Student's t-test.

    Returns the names with p below `alpha` (divided by the number of
    tested biomarkers when `bonferroni` is set), ordered by ascending p;
    ties keep column order.  Zero-pooled-variance biomarkers are skipped
    with a warning.
    """
    ds.require_groups("CN", "AD")
    cn_mask = ds.diagnoses == "CN"
    ad_mask = ds.diagnoses == "AD"
    names = ds.biomarker_names
    threshold = alpha / len(names) if bonferroni else alpha

    pvals = []
    for name in names:
        col = np.asarray(ds.biomarkers[name], dtype=float)
        cn = col[cn_mask & ~np.isnan(col)]
        ad = col[ad_mask & ~np.isnan(col)]
        if cn.size < 2 or ad.size < 2:
            raise DataError(f"biomarker {name!r}: need at least 2 CN and 2 AD values")
        if np.ptp(np.concatenate([cn, ad])) == 0.0:
            warnings.warn(f"biomarker {name!r} has zero pooled variance; skipped")
            continue
        res = sps.ttest_ind(cn, ad, equal_var=True)
        pvals.append((float(res.pvalue), name))

    kept = [(p, n) for p, n in pvals if p < threshold]
    kept.sort(key=lambda t: t[0])  # stable: equal p keeps column order
    return [n for _, n in kept]
