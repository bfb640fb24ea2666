"""Random-utility data generation and the Monte Carlo harness.

Choices are generated by drawing covariates, adding standard Gumbel noise to
each alternative's systematic utility (and to the outside option's zero
utility) and taking the argmax.

Every simulation ``s`` draws from its own substream
``SeedSequence(seed, spawn_key=(s,))``, so results for ``s`` do not depend
on which other simulations ran or in what order.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ContractViolation, NormLogitError
from .model import OUTSIDE, ChoiceDataset, Coefficients, observed_information
from .normalize import NormalizationSpec, derive_normalization
from .optimize import FitOptions, fit
from .stats import KsResult, ks_two_sample

logger = logging.getLogger(__name__)

INTERCEPT = "intercept"
BINOMIAL = "binomial"
LOGNORMAL = "lognormal"
NORMAL = "normal"


@dataclass(frozen=True)
class CovariateSpec:
    """Distribution of one covariate column.

    ``p`` is the binomial success probability; ``mu``/``sigma`` parameterize
    the normal and the underlying normal of the lognormal.
    """

    name: str
    kind: str
    p: float = 0.5
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in (INTERCEPT, BINOMIAL, LOGNORMAL, NORMAL):
            raise ContractViolation(f"unknown covariate kind {self.kind!r}")
        if self.kind == BINOMIAL and not 0 < self.p < 1:
            raise ContractViolation("binomial p must lie in (0, 1)")
        if self.kind in (LOGNORMAL, NORMAL) and not self.sigma > 0:
            raise ContractViolation("sigma must be positive")

    def draw(self, rng, size):
        if self.kind == INTERCEPT:
            return np.ones(size)
        if self.kind == BINOMIAL:
            return rng.binomial(1, self.p, size).astype(float)
        if self.kind == LOGNORMAL:
            return rng.lognormal(self.mu, self.sigma, size)
        return rng.normal(self.mu, self.sigma, size)


BASELINE_BETA = (-3.0, 4.0, -1.7, 0.00006)


def baseline_covariates(sigma4=5000.0):
    return (
        CovariateSpec("x1", INTERCEPT),
        CovariateSpec("x2", BINOMIAL, p=0.5),
        CovariateSpec("x3", LOGNORMAL, mu=0.0, sigma=1.0),
        CovariateSpec("x4", NORMAL, mu=0.0, sigma=sigma4),
    )


@dataclass(frozen=True)
class SimulationConfig:
    """Monte Carlo design. Defaults are the desk-scale baseline layout."""

    n_simulations: int = 200
    n_customers: int = 300
    n_tasks: int = 10
    n_options: int = 5
    covariates: tuple = field(default_factory=baseline_covariates)
    true_beta: tuple = BASELINE_BETA
    outside_option: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("n_simulations", "n_customers", "n_tasks", "n_options"):
            if int(getattr(self, name)) < 1:
                raise ContractViolation(f"{name} must be >= 1")
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "true_beta", tuple(float(b) for b in self.true_beta))
        if len(self.true_beta) != len(self.covariates):
            raise ContractViolation("true_beta length differs from covariate count")
        if int(self.seed) < 0:
            raise ContractViolation("seed must be a nonnegative integer")

    @classmethod
    def baseline(cls, sigma4=5000.0, full_scale=False, **overrides):
        """Baseline four-covariate design and its coefficients.

        ``full_scale`` switches the counts to 10000 simulations of 2000
        customers x 25 tasks.
        """
        kw = dict(covariates=baseline_covariates(sigma4))
        if full_scale:
            kw.update(n_simulations=10000, n_customers=2000, n_tasks=25, n_options=5)
        kw.update(overrides)
        return cls(**kw)

    @property
    def names(self):
        return tuple(c.name for c in self.covariates)

    def simulation_rng(self, s):
        return np.random.default_rng(np.random.SeedSequence(int(self.seed), spawn_key=(int(s),)))


def gumbel_from_uniform(u):
    """Inverse-CDF transform ``-log(-log(u))`` of the standard Gumbel."""
    return -np.log(-np.log(u))


def _open_uniform(rng, size=None):
    u = rng.random(size)
    if size is None:
        while u == 0.0:
            u = rng.random()
        return u
    zero = u == 0.0
    while zero.any():
        u[zero] = rng.random(int(zero.sum()))
        zero = u == 0.0
    return u


def draw_gumbel(rng, size=None):
    """Standard Gumbel draw(s) via the inverse transform of U(0, 1)."""
    return gumbel_from_uniform(_open_uniform(rng, size))


def generate_dataset(config: SimulationConfig, rng, explicit_intercept=False) -> ChoiceDataset:
    """Simulate ``n_customers * n_tasks`` choice tasks.

    With ``explicit_intercept`` the intercept covariate is not stored as a
    column of ones but modeled as ``beta_0``.
    """
    T = config.n_customers * config.n_tasks
    J = config.n_options
    X = np.stack([c.draw(rng, (T, J)) for c in config.covariates], axis=-1)
    u = X @ np.asarray(config.true_beta) + draw_gumbel(rng, (T, J))
    if config.outside_option:
        u = np.column_stack([u, draw_gumbel(rng, T)])
    pick = np.argmax(u, axis=1)
    chosen = np.where(pick == J, OUTSIDE, pick)

    names = config.names
    if explicit_intercept:
        keep = [k for k, c in enumerate(config.covariates) if c.kind != INTERCEPT]
        if len(keep) != len(names) - 1:
            raise ContractViolation("explicit_intercept needs exactly one intercept covariate")
        X = X[:, :, keep]
        names = tuple(names[k] for k in keep)
    task_ids = [f"c{c}-t{t}" for c in range(config.n_customers) for t in range(config.n_tasks)]
    data = ChoiceDataset.from_array(X, chosen, names,
                                    includes_outside_option=config.outside_option,
                                    explicit_intercept=explicit_intercept)
    return ChoiceDataset(data.X, data.task_ptr, data.chosen, names, data.includes_outside_option,
                         explicit_intercept, task_ids, None)


def _config_order(beta: Coefficients, config: SimulationConfig):
    """Coefficient vector in the config's covariate order."""
    if not beta.has_intercept:
        return beta.values
    k0 = next(k for k, c in enumerate(config.covariates) if c.kind == INTERCEPT)
    return np.insert(beta.values, k0, beta.intercept)


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    """Denormalized estimates, one row per attempted simulation.

    Rows of failed or non-converged fits hold NaN and are excluded from
    :meth:`summary`.
    """

    names: tuple
    true_beta: np.ndarray
    per_simulation_estimates: np.ndarray
    standard_errors: np.ndarray
    convergence_flags: np.ndarray
    min_information_eigenvalue: np.ndarray
    failures: tuple

    @property
    def n_simulations(self):
        return self.per_simulation_estimates.shape[0]

    @property
    def converged_estimates(self):
        return self.per_simulation_estimates[self.convergence_flags]

    def summary(self):
        est = self.converged_estimates
        n = est.shape[0]
        mean = est.mean(axis=0) if n else np.full(len(self.names), np.nan)
        sd = est.std(axis=0, ddof=1) if n > 1 else np.full(len(self.names), np.nan)
        return {
            "mean": mean,
            "sd": sd,
            "mcse": sd / np.sqrt(n) if n else sd,
            "n_converged": n,
        }

    def estimates_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sim", "coef", "estimate", "converged"])
            for s in range(self.n_simulations):
                for k, name in enumerate(self.names):
                    w.writerow([s, name, repr(float(self.per_simulation_estimates[s, k])),
                                int(self.convergence_flags[s])])

    def summary_csv(self, path):
        summ = self.summary()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["coef", "true", "mean", "sd", "mcse", "n_converged"])
            for k, name in enumerate(self.names):
                w.writerow([name, repr(float(self.true_beta[k])), repr(float(summ["mean"][k])),
                            repr(float(summ["sd"][k])), repr(float(summ["mcse"][k])),
                            summ["n_converged"]])


def _fit_arm(data, normalization, fit_options, config):
    spec = derive_normalization(normalization, data)
    normed = spec.apply(data)
    res = fit(normed, fit_options)
    den = spec.denormalize(res.beta_hat, res.covariance)
    se = den.standard_errors
    if den.beta.has_intercept:
        k0 = next(k for k, c in enumerate(config.covariates) if c.kind == INTERCEPT)
        se = np.insert(se[1:], k0, se[0])
    min_eig = np.nan
    if res.converged:
        min_eig = float(np.linalg.eigvalsh(observed_information(normed, res.beta_hat))[0])
    return _config_order(den.beta, config), se, res.converged, min_eig


def _simulate_one(args):
    config, s, arms, fit_options = args
    rng = config.simulation_rng(s)
    explicit = any(_needs_explicit_intercept(n) for n in arms)
    data = generate_dataset(config, rng, explicit_intercept=explicit)
    out = []
    K = len(config.covariates)
    for norm in arms:
        try:
            out.append(_fit_arm(data, norm, fit_options, config) + (None,))
        except NormLogitError as exc:
            logger.debug("simulation %d failed: %s", s, exc)
            out.append((np.full(K, np.nan), np.full(K, np.nan), False, np.nan,
                        f"{type(exc).__name__}: {exc}"))
    return out


def _needs_explicit_intercept(norm):
    if isinstance(norm, NormalizationSpec):
        return norm.kind == "centered_scaling"
    return norm in ("zscore", "minmax")


def _run(config, arms, fit_options, n_jobs):
    jobs = [(config, s, arms, fit_options) for s in range(config.n_simulations)]
    if n_jobs and n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(_simulate_one, jobs, chunksize=max(1, len(jobs) // (4 * n_jobs))))
    else:
        rows = [_simulate_one(j) for j in jobs]
    results = []
    for a in range(len(arms)):
        arm = [r[a] for r in rows]
        est = np.array([r[0] for r in arm])
        est[~np.array([r[2] for r in arm])] = np.nan
        results.append(MonteCarloResult(
            names=config.names,
            true_beta=np.asarray(config.true_beta),
            per_simulation_estimates=est,
            standard_errors=np.array([r[1] for r in arm]),
            convergence_flags=np.array([r[2] for r in arm], dtype=bool),
            min_information_eigenvalue=np.array([r[3] for r in arm]),
            failures=tuple(r[4] for r in arm),
        ))
    return results


def run_monte_carlo(config: SimulationConfig,
                    normalization: Union[NormalizationSpec, str] = "varmax",
                    fit_options: FitOptions = FitOptions(),
                    n_jobs: int = 1) -> MonteCarloResult:
    """Simulate, normalize, fit and denormalize ``config.n_simulations`` times.

    ``normalization`` may be a fixed :class:`NormalizationSpec` or the name
    of a data-dependent rule (``"varmax"``, ``"zscore"``, ``"minmax"``,
    ``"none"``) evaluated on each simulated design separately.
    """
    return _run(config, [normalization], fit_options, n_jobs)[0]


@dataclass(frozen=True, eq=False)
class EquivalenceResult:
    raw: MonteCarloResult
    normalized: MonteCarloResult
    ks: dict

    def ks_rows(self):
        return [(name, r.statistic, r.p_value) for name, r in self.ks.items()]


def compare_arms(a: MonteCarloResult, b: MonteCarloResult) -> dict:
    """Per-coefficient two-sample KS test between two Monte Carlo arms."""
    ea, eb = a.converged_estimates, b.converged_estimates
    return {name: ks_two_sample(ea[:, k], eb[:, k]) for k, name in enumerate(a.names)}


def equivalence_experiment(config: SimulationConfig,
                           fit_options: FitOptions = FitOptions(),
                           normalization: Union[NormalizationSpec, str] = "varmax",
                           shared_datasets: bool = True,
                           n_jobs: int = 1) -> EquivalenceResult:
    """Raw fits versus normalized-then-denormalized fits, compared by KS.

    With ``shared_datasets`` both arms fit the same simulated datasets; the
    alternative draws the normalized arm from ``seed + 1``.
    """
    if shared_datasets:
        raw, norm = _run(config, ["none", normalization], fit_options, n_jobs)
    else:
        raw = run_monte_carlo(config, "none", fit_options, n_jobs)
        norm = run_monte_carlo(replace(config, seed=config.seed + 1), normalization,
                               fit_options, n_jobs)
    return EquivalenceResult(raw, norm, compare_arms(raw, norm))
