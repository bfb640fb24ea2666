"""Covariate normalization and analytic recovery of raw-scale estimates.

Two families are supported:

* scaling, ``x* = x / x_m``; the raw coefficients are ``beta = beta* / x_m``
  and the raw covariance is ``diag(1/x_m) Sigma* diag(1/x_m)``.
* centered scaling, ``x* = (x - a) / x_m``, which needs an explicit
  intercept; ``gamma = gamma* / x_m`` and ``beta_0 = beta_0* - a' gamma``.

Both maps are exact reparameterizations of a linear-in-parameters utility,
so the normalized and raw likelihood problems have the same maximizer up to
the map.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractViolation, ImplicitIntercept, ZeroColumn, ZeroNormalizer
from .model import ChoiceDataset, Coefficients

NONE = "none"
SCALING = "scaling"
CENTERED_SCALING = "centered_scaling"
_KINDS = (NONE, SCALING, CENTERED_SCALING)

PAPER_FORMULA = "paper_formula"
FULL_JACOBIAN = "full_jacobian"


def _normalizer(x_m, k=None):
    x_m = np.asarray(x_m, dtype=float)
    if x_m.ndim != 1:
        raise ContractViolation("normalizing vector must be 1-d")
    if k is not None and x_m.shape[0] != k:
        raise ContractViolation(f"normalizer has length {x_m.shape[0]}, expected {k}")
    if np.any(x_m == 0.0):
        raise ZeroNormalizer(f"normalizing vector has zero entries at {np.flatnonzero(x_m == 0).tolist()}")
    if not np.all(np.isfinite(x_m)):
        raise ContractViolation("normalizing vector must be finite")
    return x_m


def varmax(X) -> np.ndarray:
    """Per-column maximum absolute value of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.size == 0:
        raise ContractViolation("varmax needs a nonempty 2-d matrix")
    out = np.max(np.abs(X), axis=0)
    if np.any(out == 0.0):
        raise ZeroColumn(f"all-zero columns {np.flatnonzero(out == 0).tolist()}")
    return out


def apply_scaling(data: ChoiceDataset, x_m) -> ChoiceDataset:
    x_m = _normalizer(x_m, data.n_covariates)
    return data.replace_covariates(data.X / x_m)


def apply_centered_scaling(data: ChoiceDataset, a, x_m) -> ChoiceDataset:
    """``(x - a) / x_m`` row by row. The intercept must be explicit."""
    x_m = _normalizer(x_m, data.n_covariates)
    a = np.asarray(a, dtype=float)
    if a.shape != x_m.shape:
        raise ContractViolation("centering vector length differs from covariate count")
    if not data.explicit_intercept:
        raise ImplicitIntercept(
            "centered scaling requires explicit_intercept=True; an intercept stored "
            "as a covariate column would be centered to zero"
        )
    return data.replace_covariates((data.X - a) / x_m)


def denormalize_scaling(beta_star: Coefficients, x_m) -> Coefficients:
    """Raw-scale coefficients ``beta* / x_m``; an explicit intercept is unchanged."""
    x_m = _normalizer(x_m, beta_star.values.shape[0])
    return Coefficients(beta_star.values / x_m, beta_star.intercept)


def denormalize_cov_scaling(sigma_star, x_m) -> np.ndarray:
    """``Sigma[i, j] = Sigma*[i, j] / (x_m[i] x_m[j])``."""
    sigma_star = np.asarray(sigma_star, dtype=float)
    x_m = _normalizer(x_m, sigma_star.shape[0])
    return sigma_star / np.outer(x_m, x_m)


def denormalize_centered(beta0_star, gamma_star, a, x_m) -> Coefficients:
    gamma_star = np.asarray(gamma_star, dtype=float)
    x_m = _normalizer(x_m, gamma_star.shape[0])
    a = np.asarray(a, dtype=float)
    if a.shape != x_m.shape:
        raise ContractViolation("centering vector length differs from covariate count")
    gamma = gamma_star / x_m
    # shift uses the raw-scale gamma
    return Coefficients(gamma, float(beta0_star) - float(a @ gamma))


def centered_jacobian(a, x_m) -> np.ndarray:
    """Jacobian of ``(b0*, g*) -> (b0* - a'(g*/x_m), g*/x_m)``, intercept first."""
    x_m = _normalizer(x_m)
    a = np.asarray(a, dtype=float)
    k = x_m.shape[0]
    J = np.zeros((k + 1, k + 1))
    J[0, 0] = 1.0
    J[0, 1:] = -a / x_m
    J[1:, 1:] = np.diag(1.0 / x_m)
    return J


def denormalize_cov_centered(sigma_star, a, x_m, method=FULL_JACOBIAN) -> np.ndarray:
    """Raw-scale covariance of ``(beta_0, gamma)`` from a centered-scaling fit.

    ``paper_formula`` divides by ``diag(1, x_m)`` on both sides, i.e. treats
    the intercept shift ``a' gamma`` as a constant. ``full_jacobian`` uses
    the exact delta-method Jacobian, which adds the intercept's dependence on
    ``gamma``. They agree when ``a = 0``.
    """
    sigma_star = np.asarray(sigma_star, dtype=float)
    x_m = _normalizer(x_m)
    if sigma_star.shape != (x_m.shape[0] + 1,) * 2:
        raise ContractViolation("sigma_star must be (K+1)x(K+1) with the intercept first")
    if method == PAPER_FORMULA:
        return denormalize_cov_scaling(sigma_star, np.concatenate([[1.0], x_m]))
    if method == FULL_JACOBIAN:
        J = centered_jacobian(a, x_m)
        out = J @ sigma_star @ J.T
        return 0.5 * (out + out.T)
    raise ContractViolation(f"unknown covariance method {method!r}")


def hadamard_associativity_check(x, y, z, rtol=1e-12) -> bool:
    """Check ``(x * y) . z == x . (y * z)`` to relative tolerance ``rtol``."""
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    if not x.shape == y.shape == z.shape:
        raise ContractViolation("vectors must have equal length")
    left = np.dot(x * y, z)
    right = np.dot(x, y * z)
    # round-off scales with the magnitude of the summands, not the sum
    scale = np.sum(np.abs(x * y * z))
    return bool(abs(left - right) <= rtol * max(scale, np.finfo(float).tiny))


@dataclass(frozen=True, eq=False)
class DenormalizedEstimates:
    beta: Coefficients
    covariance: np.ndarray
    standard_errors: np.ndarray
    covariance_method: str = FULL_JACOBIAN


@dataclass(frozen=True, eq=False)
class NormalizationSpec:
    """Which normalizer to apply and its vectors.

    ``x_m`` and ``a`` have one entry per covariate column (never for an
    explicit intercept). ``a`` is only used by centered scaling.
    """

    kind: str = NONE
    x_m: Optional[np.ndarray] = None
    a: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ContractViolation(f"normalization kind must be one of {_KINDS}")
        if self.kind == NONE:
            return
        if self.x_m is None:
            raise ContractViolation(f"{self.kind} needs x_m")
        object.__setattr__(self, "x_m", _normalizer(self.x_m))
        if self.kind == CENTERED_SCALING:
            if self.a is None:
                raise ContractViolation("centered_scaling needs a")
            a = np.asarray(self.a, dtype=float)
            if a.shape != self.x_m.shape:
                raise ContractViolation("a and x_m lengths differ")
            object.__setattr__(self, "a", a)
        elif self.a is not None:
            raise ContractViolation("a is only valid for centered_scaling")

    # -- data-dependent constructors ---------------------------------------
    @classmethod
    def varmax(cls, data: ChoiceDataset):
        return cls(SCALING, varmax(data.X))

    @classmethod
    def zscore(cls, data: ChoiceDataset):
        """Center on column means, scale by population standard deviation."""
        return cls(CENTERED_SCALING, data.X.std(axis=0), data.X.mean(axis=0))

    @classmethod
    def minmax(cls, data: ChoiceDataset):
        lo, hi = data.X.min(axis=0), data.X.max(axis=0)
        return cls(CENTERED_SCALING, hi - lo, lo)

    # -- application ---------------------------------------------------------
    def apply(self, data: ChoiceDataset) -> ChoiceDataset:
        if self.kind == NONE:
            return data
        if self.kind == SCALING:
            return apply_scaling(data, self.x_m)
        return apply_centered_scaling(data, self.a, self.x_m)

    def _full_xm(self, has_intercept):
        return np.concatenate([[1.0], self.x_m]) if has_intercept else self.x_m

    def forward(self, beta: Coefficients) -> Coefficients:
        """Raw-scale coefficients expressed in the normalized parameterization."""
        if self.kind == NONE:
            return beta
        if self.kind == SCALING:
            return Coefficients(beta.values * self.x_m, beta.intercept)
        if not beta.has_intercept:
            raise ImplicitIntercept("centered scaling needs an explicit intercept")
        return Coefficients(beta.values * self.x_m, beta.intercept + float(self.a @ beta.values))

    def denormalize(self, beta_star: Coefficients, sigma_star,
                    covariance_method=FULL_JACOBIAN) -> DenormalizedEstimates:
        """Map normalized-space estimates and covariance to the raw scale."""
        sigma_star = np.asarray(sigma_star, dtype=float)
        if self.kind == NONE:
            beta, cov = beta_star, sigma_star
        elif self.kind == SCALING:
            beta = denormalize_scaling(beta_star, self.x_m)
            cov = denormalize_cov_scaling(sigma_star, self._full_xm(beta_star.has_intercept))
        else:
            if not beta_star.has_intercept:
                raise ImplicitIntercept("centered-scaling estimates must carry an intercept")
            beta = denormalize_centered(beta_star.intercept, beta_star.values, self.a, self.x_m)
            cov = denormalize_cov_centered(sigma_star, self.a, self.x_m, covariance_method)
        with np.errstate(invalid="ignore"):
            se = np.sqrt(np.diag(cov))
        return DenormalizedEstimates(beta, cov, se, covariance_method)

    def to_dict(self):
        out = {"kind": self.kind}
        if self.x_m is not None:
            out["x_m"] = [float(v) for v in self.x_m]
        if self.a is not None:
            out["a"] = [float(v) for v in self.a]
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("kind", NONE), d.get("x_m"), d.get("a"))


def derive_normalization(rule, data: ChoiceDataset) -> NormalizationSpec:
    """Resolve a named data-dependent rule against ``data``.

    Accepts a ready :class:`NormalizationSpec` (returned unchanged) or one of
    ``"none"``, ``"varmax"``, ``"zscore"``, ``"minmax"``.
    """
    if isinstance(rule, NormalizationSpec):
        return rule
    if rule == NONE:
        return NormalizationSpec()
    if rule == "varmax":
        return NormalizationSpec.varmax(data)
    if rule == "zscore":
        return NormalizationSpec.zscore(data)
    if rule == "minmax":
        return NormalizationSpec.minmax(data)
    raise ContractViolation(f"unknown normalization rule {rule!r}")
