"""Linear conditional logit: data containers, choice probabilities, likelihood.

Utility of inside alternative ``j`` in a task is ``x_j' beta`` (covariate
intercept column) or ``beta_0 + x_j' gamma`` (explicit intercept). The
optional outside option has utility fixed at zero, i.e. it contributes the
``1`` in the softmax denominator.

The dataset is stored flat: one design row per alternative, with
``task_ptr`` marking where each task's rows start. All likelihood
quantities are computed with segment reductions over that layout so tasks
may have different numbers of alternatives.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import ContractViolation, NonFiniteProbability

OUTSIDE = -1
"""Marker stored in ``ChoiceTask.chosen`` when the outside option was chosen."""

NAIVE = "naive"
STABILIZED = "stabilized"
_MODES = (NAIVE, STABILIZED)


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


def _pairwise_colsum(rows):
    """Column sums of a (n, ...) array with numpy's pairwise summation.

    numpy only sums pairwise along the contiguous axis, so the reduction axis
    is moved last before summing.
    """
    rows = np.asarray(rows)
    flat = rows.reshape(rows.shape[0], -1)
    out = np.ascontiguousarray(flat.T).sum(axis=1)
    return out.reshape(rows.shape[1:])


@dataclass(frozen=True, eq=False)
class Alternative:
    covariates: np.ndarray

    def __post_init__(self):
        x = _frozen(self.covariates)
        if x.ndim != 1:
            raise ContractViolation("covariates must be a 1-d vector")
        if not np.all(np.isfinite(x)):
            raise ContractViolation("covariate values must be finite")
        object.__setattr__(self, "covariates", x)

    def __eq__(self, other):
        return isinstance(other, Alternative) and np.array_equal(
            self.covariates, other.covariates
        )


@dataclass(frozen=True, eq=False)
class ChoiceTask:
    """One choice occasion: an ordered set of alternatives and the pick.

    ``chosen`` is an index into ``alternatives`` or :data:`OUTSIDE`.
    """

    alternatives: tuple
    chosen: int

    def __post_init__(self):
        alts = tuple(
            a if isinstance(a, Alternative) else Alternative(a) for a in self.alternatives
        )
        if not alts:
            raise ContractViolation("a task needs at least one alternative")
        k = alts[0].covariates.shape[0]
        if any(a.covariates.shape[0] != k for a in alts):
            raise ContractViolation("alternatives in a task differ in covariate count")
        chosen = int(self.chosen)
        if chosen != OUTSIDE and not 0 <= chosen < len(alts):
            raise ContractViolation(f"chosen={chosen} is not a valid alternative index")
        object.__setattr__(self, "alternatives", alts)
        object.__setattr__(self, "chosen", chosen)

    @property
    def matrix(self):
        return np.vstack([a.covariates for a in self.alternatives])

    def __eq__(self, other):
        return (
            isinstance(other, ChoiceTask)
            and self.chosen == other.chosen
            and self.alternatives == other.alternatives
        )


@dataclass(frozen=True, eq=False)
class Coefficients:
    """Utility weights ``values`` plus an intercept in the explicit form."""

    values: np.ndarray
    intercept: Optional[float] = None

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 1:
            raise ContractViolation("coefficient values must be a 1-d vector")
        if not np.all(np.isfinite(v)):
            raise ContractViolation("coefficient values must be finite")
        object.__setattr__(self, "values", v)
        if self.intercept is not None:
            b0 = float(self.intercept)
            if not np.isfinite(b0):
                raise ContractViolation("intercept must be finite")
            object.__setattr__(self, "intercept", b0)

    @property
    def has_intercept(self):
        return self.intercept is not None

    def as_vector(self):
        """Flat parameter vector, intercept first when present."""
        if self.intercept is None:
            return self.values.copy()
        return np.concatenate([[self.intercept], self.values])

    @classmethod
    def from_vector(cls, theta, intercept=False):
        theta = np.asarray(theta, dtype=float)
        if intercept:
            return cls(theta[1:], float(theta[0]))
        return cls(theta)

    @classmethod
    def zeros(cls, n_covariates, intercept=False):
        return cls(np.zeros(n_covariates), 0.0 if intercept else None)

    def __len__(self):
        return self.values.shape[0] + (self.intercept is not None)

    def __eq__(self, other):
        return (
            isinstance(other, Coefficients)
            and self.intercept == other.intercept
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        b0 = "" if self.intercept is None else f", intercept={self.intercept!r}"
        return f"Coefficients({self.values.tolist()!r}{b0})"


@dataclass(frozen=True, eq=False)
class ChoiceDataset:
    """Stacked long-format choice data.

    Parameters
    ----------
    X : (n_rows, K) array
        One row per alternative, tasks stored contiguously.
    task_ptr : (T + 1,) int array
        Rows of task ``t`` are ``X[task_ptr[t]:task_ptr[t + 1]]``.
    chosen : (T,) int array
        Within-task index of the chosen alternative, or ``OUTSIDE``.
    covariate_names : sequence of str
    includes_outside_option : bool
    explicit_intercept : bool
        Model an intercept ``beta_0`` separately from ``X``. Required for
        centered scaling.
    task_ids, alt_ids : optional sequences of str
        Labels carried through CSV round-trips; generated when omitted.
    """

    X: np.ndarray
    task_ptr: np.ndarray
    chosen: np.ndarray
    covariate_names: tuple = ()
    includes_outside_option: bool = True
    explicit_intercept: bool = False
    task_ids: Optional[tuple] = None
    alt_ids: Optional[tuple] = None
    _row_task: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        X = _frozen(self.X)
        ptr = _frozen(self.task_ptr, dtype=np.intp)
        chosen = _frozen(self.chosen, dtype=np.intp)
        if X.ndim != 2:
            raise ContractViolation("X must be 2-d (rows = alternatives)")
        if not np.all(np.isfinite(X)):
            raise ContractViolation("covariate values must be finite")
        n_tasks = chosen.shape[0]
        if ptr.shape != (n_tasks + 1,) or ptr[0] != 0 or ptr[-1] != X.shape[0]:
            raise ContractViolation("task_ptr does not partition the rows of X")
        sizes = np.diff(ptr)
        if np.any(sizes < 1):
            raise ContractViolation("every task needs at least one alternative")
        if np.any((chosen != OUTSIDE) & ((chosen < 0) | (chosen >= sizes))):
            raise ContractViolation("chosen index out of range")
        if not self.includes_outside_option and np.any(chosen == OUTSIDE):
            raise ContractViolation("outside option chosen but dataset has none")

        names = tuple(self.covariate_names) or tuple(f"x{k + 1}" for k in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ContractViolation("covariate_names length differs from column count")
        task_ids = (
            tuple(str(t) for t in self.task_ids)
            if self.task_ids is not None
            else tuple(str(t) for t in range(n_tasks))
        )
        if len(task_ids) != n_tasks:
            raise ContractViolation("task_ids length differs from task count")
        if self.alt_ids is not None:
            alt_ids = tuple(str(a) for a in self.alt_ids)
            if len(alt_ids) != X.shape[0]:
                raise ContractViolation("alt_ids length differs from row count")
        else:
            alt_ids = tuple(str(j) for n in sizes for j in range(n))

        set_ = object.__setattr__
        set_(self, "X", X)
        set_(self, "task_ptr", ptr)
        set_(self, "chosen", chosen)
        set_(self, "covariate_names", names)
        set_(self, "includes_outside_option", bool(self.includes_outside_option))
        set_(self, "explicit_intercept", bool(self.explicit_intercept))
        set_(self, "task_ids", task_ids)
        set_(self, "alt_ids", alt_ids)
        set_(self, "_row_task", _frozen(np.repeat(np.arange(n_tasks), sizes), np.intp))

    # -- construction -----------------------------------------------------
    @classmethod
    def from_tasks(cls, tasks: Sequence[ChoiceTask], covariate_names=(), *,
                   includes_outside_option=True, explicit_intercept=False):
        tasks = list(tasks)
        if not tasks:
            raise ContractViolation("dataset needs at least one task")
        X = np.vstack([t.matrix for t in tasks])
        ptr = np.concatenate([[0], np.cumsum([len(t.alternatives) for t in tasks])])
        chosen = [t.chosen for t in tasks]
        return cls(X, ptr, chosen, tuple(covariate_names),
                   includes_outside_option, explicit_intercept)

    @classmethod
    def from_array(cls, X, chosen, covariate_names=(), *,
                   includes_outside_option=True, explicit_intercept=False):
        """Build from a (T, J, K) array where every task has J alternatives."""
        X = np.asarray(X, dtype=float)
        T, J, K = X.shape
        return cls(X.reshape(T * J, K), np.arange(T + 1) * J, chosen,
                   tuple(covariate_names), includes_outside_option, explicit_intercept)

    def replace_covariates(self, X):
        """Same tasks and choices, new covariate matrix."""
        return ChoiceDataset(X, self.task_ptr, self.chosen, self.covariate_names,
                             self.includes_outside_option, self.explicit_intercept,
                             self.task_ids, self.alt_ids)

    def subset(self, task_indices):
        """Dataset made of the given tasks (repeats allowed, as in a bootstrap)."""
        idx = np.asarray(task_indices, dtype=np.intp)
        sizes = np.diff(self.task_ptr)[idx]
        rows = np.concatenate([np.arange(self.task_ptr[t], self.task_ptr[t + 1]) for t in idx])
        ptr = np.concatenate([[0], np.cumsum(sizes)])
        return ChoiceDataset(self.X[rows], ptr, self.chosen[idx], self.covariate_names,
                             self.includes_outside_option, self.explicit_intercept)

    # -- views ------------------------------------------------------------
    @property
    def n_tasks(self):
        return self.chosen.shape[0]

    @property
    def n_covariates(self):
        return self.X.shape[1]

    @property
    def n_params(self):
        return self.n_covariates + self.explicit_intercept

    @property
    def parameter_names(self):
        names = list(self.covariate_names)
        return ["(intercept)"] + names if self.explicit_intercept else names

    @property
    def design(self):
        """Design matrix matching ``Coefficients.as_vector`` ordering."""
        if self.explicit_intercept:
            return np.column_stack([np.ones(self.X.shape[0]), self.X])
        return self.X

    @property
    def tasks(self) -> Iterator[ChoiceTask]:
        for t in range(self.n_tasks):
            rows = self.X[self.task_ptr[t]:self.task_ptr[t + 1]]
            yield ChoiceTask(tuple(Alternative(r) for r in rows), int(self.chosen[t]))

    def __len__(self):
        return self.n_tasks

    def __eq__(self, other):
        if not isinstance(other, ChoiceDataset):
            return NotImplemented
        return (
            np.array_equal(self.X, other.X)
            and np.array_equal(self.task_ptr, other.task_ptr)
            and np.array_equal(self.chosen, other.chosen)
            and self.covariate_names == other.covariate_names
            and self.includes_outside_option == other.includes_outside_option
            and self.explicit_intercept == other.explicit_intercept
            and self.task_ids == other.task_ids
            and self.alt_ids == other.alt_ids
        )


def _check_mode(mode):
    if mode not in _MODES:
        raise ContractViolation(f"mode must be one of {_MODES}, got {mode!r}")


def _theta(data: ChoiceDataset, beta) -> np.ndarray:
    if isinstance(beta, Coefficients):
        if beta.values.shape[0] != data.n_covariates:
            raise ContractViolation(
                f"{beta.values.shape[0]} coefficients for {data.n_covariates} covariates"
            )
        if beta.has_intercept != data.explicit_intercept:
            raise ContractViolation("intercept presence does not match the dataset")
        return beta.as_vector()
    theta = np.asarray(beta, dtype=float)
    if theta.shape != (data.n_params,):
        raise ContractViolation(f"parameter vector must have length {data.n_params}")
    return theta


def utility(alt, beta: Coefficients) -> float:
    """Systematic utility ``x' beta`` (plus intercept when present)."""
    x = alt.covariates if isinstance(alt, Alternative) else np.asarray(alt, dtype=float)
    if x.shape != beta.values.shape:
        raise ContractViolation(
            f"alternative has {x.shape[0]} covariates, beta has {beta.values.shape[0]}"
        )
    u = float(np.dot(x, beta.values))
    if beta.intercept is not None:
        u += beta.intercept
    return u


def _softmax(u, outside, mode):
    """Probabilities for one task's utility vector; outside appended last."""
    if mode == STABILIZED:
        m = max(u.max(), 0.0) if outside else u.max()
        e = np.exp(u - m)
        e0 = np.exp(-m) if outside else 0.0
    else:
        with np.errstate(over="ignore"):
            e = np.exp(u)
        bad = ~np.isfinite(e)
        if bad.any():
            raise NonFiniteProbability(u[np.argmax(bad)])
        e0 = 1.0 if outside else 0.0
    s = e.sum() + e0
    if not np.isfinite(s) or s == 0.0:
        raise NonFiniteProbability(u.max())
    p = e / s
    return np.append(p, e0 / s) if outside else p


def choice_probabilities(task: ChoiceTask, beta: Coefficients, outside_option=True,
                         mode=STABILIZED) -> np.ndarray:
    """Softmax choice probabilities for a single task.

    Returns one entry per alternative, followed by the outside-option
    probability when ``outside_option`` is true. ``naive`` mode exponentiates
    utilities directly and raises :class:`NonFiniteProbability` on overflow;
    ``stabilized`` mode shifts by the largest utility first.
    """
    _check_mode(mode)
    u = np.array([utility(a, beta) for a in task.alternatives])
    return _softmax(u, outside_option, mode)


class _Evaluation:
    """Per-row probabilities and chosen log-probabilities for a dataset."""

    __slots__ = ("u", "p", "p_outside", "log_p_chosen")

    def __init__(self, data: ChoiceDataset, theta, mode):
        D = data.design
        starts = data.task_ptr[:-1]
        rt = data._row_task
        outside = data.includes_outside_option
        u = D @ theta
        chosen_rows = starts + data.chosen
        is_out = data.chosen == OUTSIDE

        if mode == STABILIZED:
            m = np.maximum.reduceat(u, starts)
            if outside:
                m = np.maximum(m, 0.0)
            e = np.exp(u - m[rt])
            e0 = np.exp(-m) if outside else np.zeros_like(m)
            s = np.add.reduceat(e, starts) + e0
            log_s = np.log(s) + m
            u_chosen = np.where(is_out, 0.0, u[np.where(is_out, 0, chosen_rows)])
            self.log_p_chosen = u_chosen - log_s
        else:
            with np.errstate(over="ignore"):
                e = np.exp(u)
            bad = ~np.isfinite(e)
            if bad.any():
                raise NonFiniteProbability(u[np.argmax(bad)])
            e0 = np.ones(len(starts)) if outside else np.zeros(len(starts))
            with np.errstate(over="ignore"):
                s = np.add.reduceat(e, starts) + e0
            bad = ~np.isfinite(s) | (s == 0.0)
            if bad.any():
                t = np.argmax(bad)
                raise NonFiniteProbability(u[starts[t]:data.task_ptr[t + 1]].max())
            e_chosen = np.where(is_out, e0, e[np.where(is_out, 0, chosen_rows)])
            with np.errstate(divide="ignore"):
                self.log_p_chosen = np.log(e_chosen / s)
            bad = ~np.isfinite(self.log_p_chosen)
            if bad.any():
                t = np.argmax(bad)
                raise NonFiniteProbability(
                    0.0 if is_out[t] else u[chosen_rows[t]],
                    "chosen-outcome probability underflowed to zero",
                )
        self.u = u
        self.p = e / s[rt]
        self.p_outside = e0 / s


def probabilities(data: ChoiceDataset, beta, mode=STABILIZED):
    """Vectorized probabilities: (per-row inside probabilities, per-task outside)."""
    _check_mode(mode)
    ev = _Evaluation(data, _theta(data, beta), mode)
    return ev.p, ev.p_outside


def log_likelihood(data: ChoiceDataset, beta, mode=STABILIZED) -> float:
    """Sum over tasks of the log-probability of the observed outcome."""
    _check_mode(mode)
    ev = _Evaluation(data, _theta(data, beta), mode)
    return float(np.sum(ev.log_p_chosen))


def _score_rows(data, ev):
    D = data.design
    y = np.zeros(D.shape[0])
    inside = data.chosen != OUTSIDE
    y[(data.task_ptr[:-1] + data.chosen)[inside]] = 1.0
    return (y - ev.p)[:, None] * D


def log_likelihood_gradient(data: ChoiceDataset, beta) -> np.ndarray:
    """Score vector ``sum_t (x_chosen - sum_k P_k x_k)``.

    The outside option has an implicit zero covariate vector, so choosing it
    contributes only the ``- sum_k P_k x_k`` term.
    """
    ev = _Evaluation(data, _theta(data, beta), STABILIZED)
    return _pairwise_colsum(_score_rows(data, ev))


def observed_information(data: ChoiceDataset, beta) -> np.ndarray:
    """Negative Hessian of the log-likelihood.

    Per task this is ``sum_k P_k x_k x_k' - xbar xbar'`` with
    ``xbar = sum_k P_k x_k`` (outside option again has ``x = 0``).
    """
    ev = _Evaluation(data, _theta(data, beta), STABILIZED)
    return _information(data, ev)


def _information(data, ev):
    D = data.design
    starts = data.task_ptr[:-1]
    pd = ev.p[:, None] * D
    xbar = np.add.reduceat(pd, starts, axis=0)
    second = _pairwise_colsum(pd[:, :, None] * D[:, None, :])
    first = _pairwise_colsum(xbar[:, :, None] * xbar[:, None, :])
    info = second - first
    return 0.5 * (info + info.T)


def loglike_derivatives(data: ChoiceDataset, theta, mode=STABILIZED):
    """Log-likelihood, score and observed information in one pass.

    In naive mode the likelihood value is computed naively (and so can raise
    :class:`NonFiniteProbability`); derivatives always use the stabilized
    probabilities.
    """
    theta = _theta(data, theta)
    if mode == NAIVE:
        ll = float(np.sum(_Evaluation(data, theta, NAIVE).log_p_chosen))
    ev = _Evaluation(data, theta, STABILIZED)
    if mode == STABILIZED:
        ll = float(np.sum(ev.log_p_chosen))
    return ll, _pairwise_colsum(_score_rows(data, ev)), _information(data, ev)
