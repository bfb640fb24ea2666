"""Maximum-likelihood fitting with Newton / BFGS ascent.

Newton's method with step halving is the default. It is affine invariant,
so it takes the same path on raw and rescaled covariates. BFGS starts from
an identity Hessian with a unit-length first step and is therefore scale
sensitive; it is what most general-purpose optimizers do and is kept both
as a fallback and to reproduce overflow failures on raw large-valued data.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import (
    ContractViolation,
    NonFiniteLikelihood,
    NonFiniteProbability,
    RankDeficient,
    SingularInformation,
)
from .model import (
    NAIVE,
    STABILIZED,
    ChoiceDataset,
    Coefficients,
    _theta,
    log_likelihood,
    log_likelihood_gradient,
    loglike_derivatives,
    observed_information,
)

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-10
_ARMIJO_C = 1e-4
_MAX_HALVINGS = 60


@dataclass(frozen=True)
class FitOptions:
    max_iterations: int = 200
    gradient_tolerance: float = 1e-8
    initial_beta: Optional[Coefficients] = None
    mode: str = STABILIZED
    method: str = "newton"

    def __post_init__(self):
        if int(self.max_iterations) < 1:
            raise ContractViolation("max_iterations must be >= 1")
        if not self.gradient_tolerance > 0:
            raise ContractViolation("gradient_tolerance must be positive")
        if self.mode not in (NAIVE, STABILIZED):
            raise ContractViolation(f"unknown mode {self.mode!r}")
        if self.method not in ("newton", "bfgs"):
            raise ContractViolation(f"unknown method {self.method!r}")


@dataclass(frozen=True, eq=False)
class FitResult:
    """Estimates in the parameter space of the dataset that was fitted.

    ``covariance`` is the inverse observed information at ``beta_hat``.
    """

    beta_hat: Coefficients
    covariance: np.ndarray
    log_likelihood_value: float
    converged: bool
    iterations: int
    gradient_norm: float
    method: str = "newton"
    parameter_names: tuple = field(default=())

    @property
    def standard_errors(self):
        return np.sqrt(np.diag(self.covariance))


def rank_check(data: ChoiceDataset) -> bool:
    """True iff the stacked design has full column rank.

    The design includes the ones column when the intercept is explicit.
    Singular values below ``1e-10 * max`` count as zero.
    """
    s = np.linalg.svd(data.design, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return False
    return bool(s.size == data.n_params and s[-1] > RANK_RTOL * s[0])


def _covariance(info):
    """Invert the information matrix, refusing (near-)singular ones."""
    try:
        w = np.linalg.eigvalsh(info)
    except np.linalg.LinAlgError as exc:
        raise SingularInformation(str(exc)) from exc
    if not np.all(np.isfinite(w)) or w[0] <= RANK_RTOL * max(abs(w[-1]), 1e-300):
        raise SingularInformation(
            f"observed information is not positive definite (eigenvalues {w[0]:.3g}..{w[-1]:.3g})"
        )
    cov = linalg.cho_solve(linalg.cho_factor(info), np.eye(info.shape[0]))
    return 0.5 * (cov + cov.T)


def _loglike(data, theta, mode, iteration):
    try:
        return log_likelihood(data, theta, mode)
    except NonFiniteProbability as exc:
        raise NonFiniteLikelihood(
            f"non-finite likelihood at iteration {iteration}: {exc}",
            iteration=iteration, beta=theta.copy(), utility=exc.utility,
        ) from exc


def _newton(data, theta, opts):
    """Returns (theta, ll, grad, converged, iterations, fell_back)."""
    tol = opts.gradient_tolerance
    ll = _loglike(data, theta, opts.mode, 0)
    for it in range(opts.max_iterations):
        _, g, info = loglike_derivatives(data, theta)
        if np.max(np.abs(g)) <= tol:
            return theta, ll, g, True, it, False
        try:
            step = linalg.cho_solve(linalg.cho_factor(info), g)
        except (linalg.LinAlgError, ValueError):
            logger.debug("Hessian solve failed at iteration %d, switching to BFGS", it)
            return theta, ll, g, False, it, True
        slope = g @ step
        alpha = 1.0
        for _ in range(_MAX_HALVINGS):
            trial = theta + alpha * step
            ll_new = _loglike(data, trial, opts.mode, it + 1)
            if ll_new >= ll + _ARMIJO_C * alpha * slope:
                break
            # ties at the optimum are round-off, not a bad direction
            if alpha * slope <= 1e-13 * abs(ll) and ll_new >= ll - 1e-13 * abs(ll):
                break
            alpha *= 0.5
        else:
            logger.debug("line search failed at iteration %d", it)
            return theta, ll, g, False, it, True
        theta, ll = trial, ll_new
    g = log_likelihood_gradient(data, theta)
    return theta, ll, g, bool(np.max(np.abs(g)) <= tol), opts.max_iterations, False


def _bfgs(data, theta, opts, max_iter, start_iter=0):
    """BFGS ascent on the log-likelihood with Armijo backtracking."""
    tol = opts.gradient_tolerance
    n = theta.shape[0]
    H = np.eye(n)
    ll = _loglike(data, theta, opts.mode, start_iter)
    g = log_likelihood_gradient(data, theta)
    first = True
    for it in range(start_iter, start_iter + max_iter):
        if np.max(np.abs(g)) <= tol:
            return theta, ll, g, True, it
        d = H @ g
        slope = g @ d
        if slope <= 0:
            H = np.eye(n)
            d, slope = g, g @ g
        alpha = min(1.0, 1.0 / np.linalg.norm(d)) if first else 1.0
        for _ in range(_MAX_HALVINGS):
            trial = theta + alpha * d
            ll_new = _loglike(data, trial, opts.mode, it + 1)
            if ll_new >= ll + _ARMIJO_C * alpha * slope:
                break
            alpha *= 0.5
        else:
            return theta, ll, g, False, it
        g_new = log_likelihood_gradient(data, trial)
        s = trial - theta
        y = g - g_new  # gradient change of the minimized objective -ll
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if first:
                H = np.eye(n) * (sy / (y @ y))
            rho = 1.0 / sy
            V = np.eye(n) - rho * np.outer(s, y)
            H = V @ H @ V.T + rho * np.outer(s, s)
        first = False
        theta, ll, g = trial, ll_new, g_new
    return theta, ll, g, bool(np.max(np.abs(g)) <= tol), start_iter + max_iter


def fit(data: ChoiceDataset, options: FitOptions = FitOptions()) -> FitResult:
    """Maximize the conditional logit log-likelihood.

    Raises
    ------
    RankDeficient
        Stacked covariates (plus ones column for an explicit intercept) are
        collinear, so the maximizer is not unique.
    NonFiniteLikelihood
        ``naive`` mode hit an overflow at some iterate. The failure is
        reported rather than clamped.
    SingularInformation
        The run converged but the information matrix cannot be inverted.
    """
    if not rank_check(data):
        raise RankDeficient("stacked covariate columns are not linearly independent")
    if options.initial_beta is None:
        theta = np.zeros(data.n_params)
    else:
        theta = _theta(data, options.initial_beta).copy()

    if options.method == "newton":
        theta, ll, g, converged, iters, fell_back = _newton(data, theta, options)
        method = "newton"
        if fell_back:
            theta, ll, g, converged, iters = _bfgs(
                data, theta, options, options.max_iterations - iters, iters
            )
            method = "newton+bfgs"
    else:
        theta, ll, g, converged, iters = _bfgs(data, theta, options, options.max_iterations)
        method = "bfgs"

    info = observed_information(data, theta)
    if converged:
        cov = _covariance(info)
    else:
        try:
            cov = _covariance(info)
        except SingularInformation:
            cov = np.full_like(info, np.nan)
        logger.info("fit did not converge after %d iterations (|g|=%.3g)",
                    iters, np.max(np.abs(g)))

    return FitResult(
        beta_hat=Coefficients.from_vector(theta, data.explicit_intercept),
        covariance=cov,
        log_likelihood_value=ll,
        converged=converged,
        iterations=iters,
        gradient_norm=float(np.max(np.abs(g))),
        method=method,
        parameter_names=tuple(data.parameter_names),
    )
