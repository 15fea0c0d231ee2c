"""Generative event-based model baseline: likelihood, ordering search, discrete staging.

A single event ordering is assumed to hold for the whole cohort; a subject
sits at one of N+1 discrete positions along it (uniform prior), with
biomarkers before the position drawn from their post-event density and
the rest from their pre-event density.  The ordering maximizing the data
likelihood is found by greedy ascent from several starts.
"""

import numpy as np
from scipy.special import logsumexp

from .errors import DataError, FitError
from .mixture import _log_normal_pdf

# Log-likelihood penalty for a pseudo-event column placed on the wrong side
# of a subject's stage.  Large enough to dominate any realistic density
# ratio, small enough to stay exactly representable in double arithmetic.
PSEUDO_LOG_PENALTY = -1.0e4


def _log_densities(values, fits):
    """Per-class log densities of every measurement; missing entries contribute 0."""
    x = np.asarray(values, dtype=float)
    if x.ndim != 2 or x.shape[1] != len(fits):
        raise DataError("values must be a subjects-by-biomarkers matrix matching fits")
    log_pe = np.zeros_like(x)
    log_pn = np.zeros_like(x)
    for i, fit in enumerate(fits):
        col = x[:, i]
        seen = ~np.isnan(col)
        log_pe[seen, i] = _log_normal_pdf(col[seen], fit.mu_post, fit.sigma_post)
        log_pn[seen, i] = _log_normal_pdf(col[seen], fit.mu_pre, fit.sigma_pre)
    return log_pe, log_pn


def _stage_logweights(central, log_pe, log_pn):
    """log p(X_j | k, S) for k = 0..N, one row per subject."""
    e = log_pe[:, central]
    n = log_pn[:, central]
    m = e.shape[0]
    zeros = np.zeros((m, 1))
    prefix = np.concatenate([zeros, np.cumsum(e, axis=1)], axis=1)
    suffix = np.concatenate([np.cumsum(n[:, ::-1], axis=1)[:, ::-1], zeros], axis=1)
    return prefix + suffix


def _loglik_from_densities(central, log_pe, log_pn):
    lw = _stage_logweights(list(central), log_pe, log_pn)
    n_stages = lw.shape[1]
    ll = float(np.sum(logsumexp(lw, axis=1))) - lw.shape[0] * np.log(n_stages)
    if not np.isfinite(ll):
        raise FitError("non-finite event-ordering likelihood")
    return ll


def febm_loglik(central, values, fits):
    """Data log-likelihood of an event ordering (uniform stage prior).

    Missing measurements are skipped in the per-stage products.
    """
    central = np.asarray(central, dtype=int)
    if sorted(central.tolist()) != list(range(len(fits))):
        raise DataError("ordering must be a permutation covering all fitted biomarkers")
    log_pe, log_pn = _log_densities(values, fits)
    return _loglik_from_densities(central, log_pe, log_pn)


def _greedy_ascent(start, loglik):
    current = list(start)
    best = loglik(current)
    n = len(current)
    improved = True
    while improved:
        improved = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                cand = current.copy()
                cand[i], cand[j] = cand[j], cand[i]
                val = loglik(cand)
                if val > best:
                    current, best, improved = cand, val, True
        for src in range(n):
            for dst in range(n):
                if dst == src:
                    continue
                cand = current.copy()
                cand.insert(dst, cand.pop(src))
                val = loglik(cand)
                if val > best:
                    current, best, improved = cand, val, True
    return current, best


def febm_optimize(values, fits, starts=10, seed=0):
    """Maximum-likelihood event ordering by greedy ascent from multiple starts.

    Runs pairwise-swap plus insertion ascent from `starts` seeded random
    permutations and from the ascending-theta_pre ordering, and returns the
    best ordering found.  Deterministic for a fixed seed.
    """
    if len(fits) == 0:
        raise DataError("no fitted biomarkers")
    if len(fits) == 1:
        return np.array([0])
    log_pe, log_pn = _log_densities(values, fits)

    def ll(central):
        return _loglik_from_densities(central, log_pe, log_pn)

    theta_pre = np.asarray([f.theta_pre for f in fits])
    inits = [np.argsort(theta_pre, kind="stable").tolist()]
    rng = np.random.default_rng(seed)
    inits += [rng.permutation(len(fits)).tolist() for _ in range(int(starts))]

    best, best_val = None, -np.inf
    for init in inits:
        cand, val = _greedy_ascent(init, ll)
        if val > best_val:
            best, best_val = cand, val
    return np.asarray(best, dtype=int)


def exhaustive_febm_ordering(values, fits):
    """Brute-force maximum-likelihood ordering (oracle for small N)."""
    from itertools import permutations

    log_pe, log_pn = _log_densities(values, fits)
    best, best_val = None, -np.inf
    for perm in permutations(range(len(fits))):
        val = _loglik_from_densities(list(perm), log_pe, log_pn)
        if val > best_val:
            best, best_val = perm, val
    return np.asarray(best, dtype=int), best_val


def febm_stage(central, fits, x):
    """Most likely discrete stage of one subject; ties resolve to the earlier stage."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    log_pe, log_pn = _log_densities(x, fits)
    lw = _stage_logweights(list(np.asarray(central, dtype=int)), log_pe, log_pn)
    return int(np.argmax(lw[0]))


def _extended_log_densities(values, fits):
    """Log densities with pseudo-event columns prepended/appended.

    Column 0 is abnormal for everyone (post-event density ratio pinned
    high), the last column for no one; real columns shift up by one.
    """
    log_pe, log_pn = _log_densities(values, fits)
    m = log_pe.shape[0]
    always = np.zeros((m, 1))
    never = np.full((m, 1), PSEUDO_LOG_PENALTY)
    log_pe_ext = np.concatenate([always, log_pe, never], axis=1)
    log_pn_ext = np.concatenate([never, log_pn, always], axis=1)
    return log_pe_ext, log_pn_ext
