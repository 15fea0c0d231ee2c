"""Per-biomarker two-Gaussian mixtures of the pre-event and post-event classes.

Fitting is deliberately conservative: initial estimates come from the
easily classifiable tails of the diagnosed groups, and the refinement on
the full cohort is a constrained alternating optimization (Gaussian
parameters, then mixing fractions) whose bounds encode the known bias
direction of the initial estimates.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .errors import DataError, FitError

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

DEFAULT_THETA_BOUNDS = (0.01, 0.99)
THETA_TOL = 1e-3
MAX_OUTER_ITER = 100


@dataclass(frozen=True)
class MixtureFit:
    """Pre/post-event Gaussians with mixing fractions for one biomarker.

    `direction` is +1 when abnormality increases the value (post-event mean
    above pre-event mean), -1 otherwise; the fitting machinery never flips
    values, the sign is implicit in the means.
    """

    mu_pre: float
    sigma_pre: float
    mu_post: float
    sigma_post: float
    theta_pre: float
    theta_post: float
    direction: int = 0

    def __post_init__(self):
        if not (self.sigma_pre > 0 and self.sigma_post > 0):
            raise FitError("standard deviations must be positive")
        if self.mu_pre == self.mu_post:
            raise FitError("degenerate fit: pre- and post-event means coincide")
        if abs(self.theta_pre + self.theta_post - 1.0) > 1e-9:
            raise FitError("mixing fractions must sum to 1")
        object.__setattr__(self, "direction", 1 if self.mu_post > self.mu_pre else -1)


@dataclass(frozen=True)
class FitBounds:
    """Box constraints for the constrained mixture refinement."""

    mu_pre: tuple
    sigma_pre: tuple
    mu_post: tuple
    sigma_post: tuple
    theta: tuple = DEFAULT_THETA_BOUNDS


@dataclass(frozen=True)
class GmmResult:
    fit: MixtureFit
    objectives: np.ndarray  # summed log-likelihood after each outer iteration
    iterations: int
    converged: bool


def _log_normal_pdf(x, mu, sigma):
    z = (x - mu) / sigma
    return -0.5 * z * z - np.log(sigma) - LOG_SQRT_2PI


def _mixture_loglik_terms(x, mu_pre, s_pre, mu_post, s_post, theta_post):
    a = np.log(theta_post) + _log_normal_pdf(x, mu_post, s_post)
    b = np.log1p(-theta_post) + _log_normal_pdf(x, mu_pre, s_pre)
    return a, b


def mixture_loglik(values, fit):
    """Summed log-likelihood of the two-component mixture over `values`."""
    a, b = _mixture_loglik_terms(
        np.asarray(values, dtype=float),
        fit.mu_pre, fit.sigma_pre, fit.mu_post, fit.sigma_post, fit.theta_post,
    )
    return float(np.sum(np.logaddexp(a, b)))


def posterior(fit, x):
    """Posterior probability that a measurement is past its event.

    Bayes rule with the mixing fractions as class priors.  NaN inputs
    (missing measurements) propagate to NaN outputs.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore"):  # NaN inputs are legal and stay NaN
        a, b = _mixture_loglik_terms(
            x, fit.mu_pre, fit.sigma_pre, fit.mu_post, fit.sigma_post, fit.theta_post
        )
        out = np.exp(a - np.logaddexp(a, b))
    return out if out.ndim else float(out)


def init_estimates(values, labels, mean_window=1.0, sigma_factor=2.0,
                   theta_bounds=DEFAULT_THETA_BOUNDS):
    """Initial mixture estimate and optimization bounds from diagnosed subjects.

    Trains an equal-prior Gaussian Bayes classifier on the CN and AD
    groups, drops the misclassified values, and recomputes per-class
    statistics on the survivors.  Because the survivor sets are truncated,
    the recomputed standard deviations are biased low and the means are
    pulled apart; the returned bounds only allow the refinement to move
    parameters against those biases (means toward each other by at most
    `mean_window` survivor-sigmas, sigmas up to `sigma_factor` times the
    survivor estimate).

    Returns (MixtureFit, FitBounds); theta is initialized at one half.
    """
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    keep = ~np.isnan(values)
    values, labels = values[keep], labels[keep]
    cn = values[labels == "CN"]
    ad = values[labels == "AD"]
    if cn.size < 3 or ad.size < 3:
        raise DataError("need at least 3 CN and 3 AD values for initialization")

    stats = {}
    for name, grp in (("CN", cn), ("AD", ad)):
        mu, sd = float(np.mean(grp)), float(np.std(grp, ddof=1))
        if sd <= 0:
            raise FitError(f"{name} values have zero variance; exclude this biomarker")
        stats[name] = (mu, sd)

    def survivors(grp, own, other):
        mu_o, sd_o = stats[own]
        mu_x, sd_x = stats[other]
        # equal class priors: keep values the classifier assigns to their own group
        return grp[_log_normal_pdf(grp, mu_o, sd_o) >= _log_normal_pdf(grp, mu_x, sd_x)]

    cn_kept = survivors(cn, "CN", "AD")
    ad_kept = survivors(ad, "AD", "CN")
    for name, grp in (("CN", cn_kept), ("AD", ad_kept)):
        if grp.size < 2:
            raise FitError(
                f"all {name} values misclassified; exclude this biomarker from the model"
            )

    mu_pre, s_pre = float(np.mean(cn_kept)), float(np.std(cn_kept, ddof=1))
    mu_post, s_post = float(np.mean(ad_kept)), float(np.std(ad_kept, ddof=1))
    if s_pre <= 0 or s_post <= 0 or mu_pre == mu_post:
        raise FitError("degenerate initial estimate; exclude this biomarker")

    def mean_bounds(mu, sd, is_smaller):
        # truncation biases the smaller mean down and the larger mean up
        return (mu, mu + mean_window * sd) if is_smaller else (mu - mean_window * sd, mu)

    fit = MixtureFit(
        mu_pre=mu_pre, sigma_pre=s_pre, mu_post=mu_post, sigma_post=s_post,
        theta_pre=0.5, theta_post=0.5,
    )
    bounds = FitBounds(
        mu_pre=mean_bounds(mu_pre, s_pre, mu_pre < mu_post),
        sigma_pre=(s_pre, sigma_factor * s_pre),
        mu_post=mean_bounds(mu_post, s_post, mu_post < mu_pre),
        sigma_post=(s_post, sigma_factor * s_post),
        theta=tuple(theta_bounds),
    )
    return fit, bounds


def _clamp(value, lo, hi):
    return min(max(value, lo), hi)


def _theta_step(x, fit, lo, hi):
    """One closed-form responsibility-average update of the mixing fraction.

    A single clamped EM step: it never decreases the likelihood, and
    keeping it to one step per outer iteration is what makes the mixing
    fraction stable when the two Gaussians overlap heavily (a full inner
    maximization would chase the flat mean/fraction ridge).
    """
    a, b = _mixture_loglik_terms(
        x, fit.mu_pre, fit.sigma_pre, fit.mu_post, fit.sigma_post, fit.theta_post
    )
    return _clamp(float(np.mean(np.exp(a - np.logaddexp(a, b)))), lo, hi)


def _gaussian_step(x, fit, bounds):
    """Maximize the likelihood over the four Gaussian parameters, theta fixed."""
    theta = fit.theta_post

    def neg_ll_and_grad(params):
        mu_pre, s_pre, mu_post, s_post = params
        a, b = _mixture_loglik_terms(x, mu_pre, s_pre, mu_post, s_post, theta)
        tot = np.logaddexp(a, b)
        r_post = np.exp(a - tot)
        r_pre = np.exp(b - tot)
        z_post = (x - mu_post) / s_post
        z_pre = (x - mu_pre) / s_pre
        grad = np.array([
            np.sum(r_pre * z_pre) / s_pre,
            np.sum(r_pre * (z_pre ** 2 - 1.0)) / s_pre,
            np.sum(r_post * z_post) / s_post,
            np.sum(r_post * (z_post ** 2 - 1.0)) / s_post,
        ])
        return -float(np.sum(tot)), -grad

    x0 = np.array([fit.mu_pre, fit.sigma_pre, fit.mu_post, fit.sigma_post])
    box = [bounds.mu_pre, bounds.sigma_pre, bounds.mu_post, bounds.sigma_post]
    res = minimize(neg_ll_and_grad, x0, jac=True, method="L-BFGS-B", bounds=box)
    mu_pre, s_pre, mu_post, s_post = res.x
    if mu_pre == mu_post:
        return fit
    return replace(fit, mu_pre=float(mu_pre), sigma_pre=float(s_pre),
                   mu_post=float(mu_post), sigma_post=float(s_post))


def _clamped_init(fit, bounds):
    clamped = {
        "mu_pre": _clamp(fit.mu_pre, *bounds.mu_pre),
        "sigma_pre": _clamp(fit.sigma_pre, *bounds.sigma_pre),
        "mu_post": _clamp(fit.mu_post, *bounds.mu_post),
        "sigma_post": _clamp(fit.sigma_post, *bounds.sigma_post),
    }
    theta = _clamp(fit.theta_post, *bounds.theta)
    current = {
        "mu_pre": fit.mu_pre, "sigma_pre": fit.sigma_pre,
        "mu_post": fit.mu_post, "sigma_post": fit.sigma_post,
    }
    if clamped != current or theta != fit.theta_post:
        warnings.warn("initial mixture estimate violated its bounds; clamped")
        fit = replace(fit, theta_pre=1.0 - theta, theta_post=theta, **clamped)
    return fit


def _theta_ml(x, fit, lo, hi, tol=1e-6, max_iter=500):
    """Maximum-likelihood mixing fraction for fixed Gaussians.

    The log-likelihood is concave in the fraction, so the clamped
    responsibility-average iteration converges to the constrained
    maximizer.  Used once, to start the alternation at an unbiased
    fraction; a start far from the truth cannot be walked over by the
    damped per-iteration updates.
    """
    theta = 0.5
    for _ in range(max_iter):
        a, b = _mixture_loglik_terms(
            x, fit.mu_pre, fit.sigma_pre, fit.mu_post, fit.sigma_post, theta
        )
        new = _clamp(float(np.mean(np.exp(a - np.logaddexp(a, b)))), lo, hi)
        if abs(new - theta) < tol:
            return new
        theta = new
    return theta


def fit_gmm(values, init, bounds, theta_tol=THETA_TOL, max_iter=MAX_OUTER_ITER):
    """Refine a mixture on the full cohort by constrained alternating ascent.

    Alternates a bounded quasi-Newton maximization over the four Gaussian
    parameters (mixing fraction held fixed) with one closed-form
    responsibility update of the mixing fraction (Gaussians held fixed),
    accepting a step only when it increases the summed log-likelihood.
    Stops when the mixing fraction moves less than `theta_tol` between
    outer iterations.

    The mixing fraction starts at its maximum-likelihood value under the
    initial Gaussians; an arbitrary start (and the damped updates that
    follow) would leave it badly off whenever the true fraction sits far
    from that start.
    """
    x = np.asarray(values, dtype=float)
    x = x[~np.isnan(x)]
    if x.size < 10:
        raise DataError("need at least 10 non-missing values to fit a mixture")
    if np.ptp(x) == 0.0:
        raise FitError("all values identical: mixture likelihood is degenerate")

    theta0 = _theta_ml(x, init, *bounds.theta)
    fit = _clamped_init(replace(init, theta_pre=1.0 - theta0, theta_post=theta0), bounds)
    obj = mixture_loglik(x, fit)
    if not np.isfinite(obj):
        raise FitError("non-finite mixture likelihood at initialization")

    trace = [obj]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        cand = _gaussian_step(x, fit, bounds)
        cand_obj = mixture_loglik(x, cand)
        if np.isfinite(cand_obj) and cand_obj > obj:
            fit, obj = cand, cand_obj

        prev_theta = fit.theta_post
        theta = _theta_step(x, fit, *bounds.theta)
        cand = replace(fit, theta_pre=1.0 - theta, theta_post=theta)
        cand_obj = mixture_loglik(x, cand)
        if np.isfinite(cand_obj) and cand_obj > obj:
            fit, obj = cand, cand_obj

        trace.append(obj)
        if abs(fit.theta_post - prev_theta) < theta_tol:
            converged = True
            break

    return GmmResult(fit=fit, objectives=np.asarray(trace), iterations=iterations,
                     converged=converged)
