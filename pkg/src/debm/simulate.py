"""Synthetic cross-sectional cohorts with known ground-truth timelines.

Each biomarker follows a sigmoid trajectory over an abstract disease
timeline; a subject is a uniform draw of a disease stage plus per-subject
randomness in the onset point and the normal-state baseline of every
biomarker.  Diagnosis labels are assigned by stage rank so the label
fractions can mimic a recruited cohort.
"""

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import DataError

# Spread of normal-state values at sigma_beta == 1, as a fraction of the
# trajectory range.  This pins the relative sigma_beta scale to a concrete
# reference; only trends across sigma_beta values are meaningful.  0.4
# puts the pre/post-event classes at the heavy overlap typical of real
# cohort biomarkers; much smaller values produce razor-thin components
# that no real cohort exhibits.
CN_SPREAD_FRACTION = 0.4

DEFAULT_FRACTIONS = (417 / 1737, 978 / 1737, 342 / 1737)


def _per_biomarker(value, n, name):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()
    if arr.ndim != 1:
        raise DataError(f"{name} must be a scalar or length-N sequence")
    return arr


@dataclass
class SimConfig:
    """Generator settings; defaults mirror a large AD cohort at N=7 biomarkers."""

    n_biomarkers: int = 7
    n_subjects: int = 1737
    mu_xi: np.ndarray = None          # event centers; default equidistant i/(N+1)
    sigma_xi: float = 2.0             # onset spread, in multiples of the mean center gap
    sigma_beta: float = 1.0           # normal-state spread, 1.0 == reference CN spread
    rho: float = 10.0                 # sigmoid steepness
    rho_jitter: bool = False          # draw unequal rates (log-uniform, mean preserved)
    ranges: float = 1.0               # trajectory range R
    mu_beta: float = 0.0              # normal-state mean
    fractions: tuple = DEFAULT_FRACTIONS  # CN / MCI / AD shares
    psi_range: tuple = (-0.1, 1.1)    # disease-stage support (wider than [0,1] so the
                                      # boundary events see pre- and post-event subjects)
    psi_thresholds: tuple = None      # optional explicit stage cutoffs (cn_hi, mci_hi)
    names: list = None
    seed: int = 0


@dataclass
class SimTruth:
    """Ground truth emitted alongside a simulated cohort."""

    ordering: np.ndarray              # biomarker indices, earliest event first
    mu_xi: np.ndarray                 # true event centers, by biomarker
    psi: np.ndarray                   # per-subject disease stage
    rho: np.ndarray                   # per-biomarker rates actually used
    names: list = field(default_factory=list)
    seed: int = 0


def sigmoid_trajectory(psi, xi, rho, rng_range, beta):
    """Biomarker value at disease stage psi (strictly increasing in psi)."""
    return rng_range / (1.0 + np.exp(-rho * (psi - xi))) + beta


def simulate_cohort(cfg):
    """Draw a cohort per the sigmoid-trajectory model; returns (Dataset, SimTruth).

    Fully reproducible from cfg.seed: identical configs give bit-identical
    cohorts.
    """
    n, m = int(cfg.n_biomarkers), int(cfg.n_subjects)
    if n < 1 or m < 1:
        raise DataError("need at least one biomarker and one subject")
    fractions = np.asarray(cfg.fractions, dtype=float)
    if fractions.shape != (3,) or np.any(fractions < 0) or abs(fractions.sum() - 1.0) > 1e-9:
        raise DataError("cohort fractions must be three non-negative numbers summing to 1")

    if cfg.mu_xi is None:
        mu_xi = np.arange(1, n + 1) / (n + 1)
    else:
        mu_xi = np.asarray(cfg.mu_xi, dtype=float)
        if mu_xi.shape != (n,):
            raise DataError("mu_xi must have one entry per biomarker")
    delta_xi = float(np.mean(np.diff(np.sort(mu_xi)))) if n > 1 else 1.0 / (n + 1)
    if delta_xi <= 0:
        delta_xi = 1.0 / (n + 1)

    sigma_xi = _per_biomarker(cfg.sigma_xi, n, "sigma_xi")
    sigma_beta = _per_biomarker(cfg.sigma_beta, n, "sigma_beta")
    ranges = _per_biomarker(cfg.ranges, n, "ranges")
    mu_beta = _per_biomarker(cfg.mu_beta, n, "mu_beta")
    rho = _per_biomarker(cfg.rho, n, "rho")
    if np.any(sigma_xi < 0) or np.any(sigma_beta < 0):
        raise DataError("sigma_xi and sigma_beta must be non-negative")
    if np.any(rho <= 0) or np.any(ranges <= 0):
        raise DataError("rho and ranges must be positive")

    rng = np.random.default_rng(cfg.seed)
    if cfg.rho_jitter:
        mean_rho = rho.mean()
        rho = np.exp(rng.uniform(np.log(mean_rho / 2), np.log(2 * mean_rho), size=n))
        rho *= mean_rho / rho.mean()

    psi = rng.uniform(cfg.psi_range[0], cfg.psi_range[1], size=m)
    xi = rng.normal(loc=mu_xi, scale=sigma_xi * delta_xi, size=(m, n))
    beta = rng.normal(loc=mu_beta, scale=sigma_beta * CN_SPREAD_FRACTION * ranges, size=(m, n))
    values = sigmoid_trajectory(psi[:, None], xi, rho, ranges, beta)

    if cfg.psi_thresholds is not None:
        cn_hi, mci_hi = cfg.psi_thresholds
        dx = np.where(psi < cn_hi, "CN", np.where(psi < mci_hi, "MCI", "AD"))
    else:
        n_cn = int(round(fractions[0] * m))
        n_ad = int(round(fractions[2] * m))
        n_ad = min(n_ad, m - n_cn)
        order = np.argsort(psi, kind="stable")
        dx = np.empty(m, dtype="<U3")
        dx[order[:n_cn]] = "CN"
        dx[order[n_cn:m - n_ad]] = "MCI"
        if n_ad:
            dx[order[m - n_ad:]] = "AD"

    names = list(cfg.names) if cfg.names else [f"bm{i + 1:02d}" for i in range(n)]
    if len(names) != n or len(set(names)) != n:
        raise DataError("names must be unique and match the biomarker count")

    ds = Dataset(
        subject_ids=[f"sim{j + 1:05d}" for j in range(m)],
        diagnoses=dx,
        biomarkers={name: values[:, i] for i, name in enumerate(names)},
    )
    truth = SimTruth(
        ordering=np.argsort(mu_xi, kind="stable"),
        mu_xi=mu_xi.copy(),
        psi=psi,
        rho=rho,
        names=names,
        seed=cfg.seed,
    )
    return ds, truth
