"""Command-line entry point: ``normlogit {fit,simulate,equivalence,overflow-demo}``.

Every command takes ``--config PATH`` (YAML) plus optional ``--seed`` and
``--out`` overrides. Exit codes:

    0  success
    1  overflow-demo did not show the expected contrast
    2  parse or config error
    3  rank deficiency / singular information
    4  non-convergence (or every simulation failed)
    5  overflow in naive mode
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace

import yaml

from .data_io import read_long_csv
from .errors import (
    ConfigError,
    ContractViolation,
    NonFiniteLikelihood,
    NormLogitError,
    RankDeficient,
    SingularInformation,
)
from .model import NAIVE, Coefficients
from .normalize import (
    CENTERED_SCALING,
    FULL_JACOBIAN,
    PAPER_FORMULA,
    SCALING,
    NormalizationSpec,
    derive_normalization,
)
from .optimize import FitOptions, fit
from .simulate import (
    CovariateSpec,
    SimulationConfig,
    equivalence_experiment,
    generate_dataset,
    run_monte_carlo,
    baseline_covariates,
)
from .stats import kde

logger = logging.getLogger("normlogit")

EXIT_OK = 0
EXIT_NO_CONTRAST = 1
EXIT_CONFIG = 2
EXIT_RANK = 3
EXIT_NONCONVERGENCE = 4
EXIT_OVERFLOW = 5

_RULES = ("none", "varmax", "zscore", "minmax")

_SCHEMA = {
    "fit": {"seed", "out", "data", "normalization", "fit"},
    "simulate": {"seed", "out", "simulation", "normalization", "fit", "density"},
    "equivalence": {"seed", "out", "simulation", "normalization", "fit", "equivalence"},
    "overflow-demo": {"seed", "out", "simulation", "fit"},
}
_SECTION_KEYS = {
    "data": {"path", "outside_option", "explicit_intercept"},
    "normalization": {"kind", "x_m", "a", "covariance_method"},
    "fit": {"max_iterations", "gradient_tolerance", "mode", "method", "initial_beta"},
    "simulation": {"preset", "sigma4", "n_simulations", "n_customers", "n_tasks", "n_options",
                   "outside_option", "true_beta", "covariates", "n_jobs"},
    "density": {"grid_points"},
    "equivalence": {"shared_datasets"},
}
_COVARIATE_KEYS = {"name", "kind", "p", "mu", "sigma"}


# -- config --------------------------------------------------------------------
def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def load_config(path, command):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    _check_keys(cfg, _SCHEMA[command], "config")
    for section, value in cfg.items():
        if section in _SECTION_KEYS:
            _check_keys(value, _SECTION_KEYS[section], section)
    return cfg


def _fit_options(cfg, **defaults):
    section = dict(defaults)
    section.update(cfg.get("fit") or {})
    init = section.pop("initial_beta", None)
    try:
        opts = FitOptions(**section)
    except (TypeError, ContractViolation) as exc:
        raise ConfigError(f"fit: {exc}") from None
    return opts, init


def _normalization_rule(cfg, default="none"):
    """A rule name or a fixed NormalizationSpec, plus the covariance method."""
    section = dict(cfg.get("normalization") or {})
    method = section.pop("covariance_method", FULL_JACOBIAN)
    if method not in (FULL_JACOBIAN, PAPER_FORMULA):
        raise ConfigError(f"normalization.covariance_method: unknown {method!r}")
    kind = section.get("kind", default)
    if kind in _RULES:
        if set(section) - {"kind"}:
            raise ConfigError(f"normalization kind {kind!r} is derived from data; drop x_m/a")
        return kind, method
    if kind not in (SCALING, CENTERED_SCALING):
        raise ConfigError(f"normalization.kind: unknown {kind!r}")
    try:
        return NormalizationSpec(kind, section.get("x_m"), section.get("a")), method
    except NormLogitError as exc:
        raise ConfigError(f"normalization: {exc}") from None


def simulation_config(cfg, seed=None) -> SimulationConfig:
    section = dict(cfg.get("simulation") or {})
    section.pop("n_jobs", None)
    preset = section.pop("preset", None)
    sigma4 = section.pop("sigma4", None)
    if preset not in (None, "baseline"):
        raise ConfigError(f"simulation.preset: unknown {preset!r}")
    if preset is None and sigma4 is not None:
        raise ConfigError("simulation.sigma4 only applies to preset: baseline")
    if "covariates" in section:
        covs = []
        for i, c in enumerate(section["covariates"]):
            _check_keys(c, _COVARIATE_KEYS, f"simulation.covariates[{i}]")
            try:
                covs.append(CovariateSpec(**c))
            except (TypeError, ContractViolation) as exc:
                raise ConfigError(f"simulation.covariates[{i}]: {exc}") from None
        section["covariates"] = tuple(covs)
    elif preset == "baseline":
        section["covariates"] = baseline_covariates(5000.0 if sigma4 is None else float(sigma4))
    if seed is not None:
        section["seed"] = seed
    elif "seed" in cfg:
        section["seed"] = cfg["seed"]
    try:
        return SimulationConfig(**section)
    except (TypeError, ContractViolation) as exc:
        raise ConfigError(f"simulation: {exc}") from None


# -- output helpers ----------------------------------------------------------------
def _out_dir(cfg, override):
    out = override or cfg.get("out") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    return repr(float(v))


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _density_files(out, result, grid_points, prefix="density"):
    for k, name in enumerate(result.names):
        col = result.converged_estimates[:, k]
        try:
            curve = kde(col, grid_points)
        except NormLogitError as exc:
            logger.warning("no density for %s: %s", name, exc)
            continue
        curve.to_csv(os.path.join(out, f"{prefix}_{name}.csv"))


# -- commands ------------------------------------------------------------------
def cmd_fit(cfg, out):
    data_cfg = cfg.get("data") or {}
    if "path" not in data_cfg:
        raise ConfigError("data.path is required")
    data = read_long_csv(data_cfg["path"], data_cfg.get("outside_option", True),
                         data_cfg.get("explicit_intercept", False))
    rule, cov_method = _normalization_rule(cfg)
    opts, init = _fit_options(cfg)
    try:
        spec = derive_normalization(rule, data)
        normed = spec.apply(data)
    except NormLogitError as exc:
        raise ConfigError(f"normalization: {exc}") from None
    if init is not None:
        # initial_beta is given on the raw scale
        try:
            init = spec.forward(Coefficients.from_vector(init, data.explicit_intercept))
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"fit.initial_beta: {exc}") from None
        opts = replace(opts, initial_beta=init)

    result = fit(normed, opts)
    den = spec.denormalize(result.beta_hat, result.covariance, cov_method)
    est_star = result.beta_hat.as_vector()
    est = den.beta.as_vector()
    rows = [[name, _fmt(est_star[k]), _fmt(est[k]), _fmt(den.standard_errors[k]),
             _fmt(est[k] / den.standard_errors[k])]
            for k, name in enumerate(data.parameter_names)]
    _write_csv(os.path.join(out, "estimates.csv"),
               ["coef", "estimate_normalized", "estimate", "std_err", "z"], rows)
    _write_json(os.path.join(out, "summary.json"), {
        "log_likelihood": result.log_likelihood_value,
        "iterations": result.iterations,
        "converged": result.converged,
        "gradient_norm": result.gradient_norm,
        "method": result.method,
        "mode": opts.mode,
        "n_tasks": data.n_tasks,
        "normalization": spec.to_dict(),
        "covariance_method": cov_method,
    })
    print(f"log-likelihood {result.log_likelihood_value:.6f}, "
          f"{result.iterations} iterations, converged={result.converged}")
    return EXIT_OK if result.converged else EXIT_NONCONVERGENCE


def cmd_simulate(cfg, out, seed=None):
    config = simulation_config(cfg, seed)
    n_jobs = (cfg.get("simulation") or {}).get("n_jobs", 1)
    rule, _ = _normalization_rule(cfg, default="varmax")
    opts, init = _fit_options(cfg)
    if init is not None:
        raise ConfigError("fit.initial_beta is not supported for simulate")
    result = run_monte_carlo(config, rule, opts, n_jobs=n_jobs)
    result.estimates_csv(os.path.join(out, "estimates.csv"))
    result.summary_csv(os.path.join(out, "summary.csv"))
    grid_points = (cfg.get("density") or {}).get("grid_points", 512)
    _density_files(out, result, grid_points)
    n_ok = int(result.convergence_flags.sum())
    print(f"{n_ok}/{result.n_simulations} simulations converged "
          f"({result.n_simulations - n_ok} failed)")
    return EXIT_OK if n_ok else EXIT_NONCONVERGENCE


def cmd_equivalence(cfg, out, seed=None):
    config = simulation_config(cfg, seed)
    n_jobs = (cfg.get("simulation") or {}).get("n_jobs", 1)
    rule, _ = _normalization_rule(cfg, default="varmax")
    opts, init = _fit_options(cfg)
    if init is not None:
        raise ConfigError("fit.initial_beta is not supported for equivalence")
    shared = (cfg.get("equivalence") or {}).get("shared_datasets", True)
    res = equivalence_experiment(config, opts, rule, shared_datasets=shared, n_jobs=n_jobs)
    res.raw.estimates_csv(os.path.join(out, "raw_estimates.csv"))
    res.normalized.estimates_csv(os.path.join(out, "normalized_estimates.csv"))
    if not (res.raw.convergence_flags.any() and res.normalized.convergence_flags.any()):
        print("an arm has no converged simulations; KS table not written")
        return EXIT_NONCONVERGENCE
    _write_csv(os.path.join(out, "ks.csv"), ["coef", "statistic", "p_value"],
               [[name, _fmt(d), _fmt(p)] for name, d, p in res.ks_rows()])
    for name, d, p in res.ks_rows():
        print(f"{name}: D={d:.4g} p={p:.4g}")
    return EXIT_OK


def cmd_overflow_demo(cfg, out, seed=None):
    """Raw naive fit versus varmax-scaled naive fit on one simulated dataset."""
    config = simulation_config(cfg, seed)
    opts, init = _fit_options(cfg, mode=NAIVE, method="bfgs", max_iterations=1000)
    if init is not None:
        raise ConfigError("fit.initial_beta is not supported for overflow-demo")
    data = generate_dataset(config, config.simulation_rng(0))

    try:
        raw = fit(data, opts)
        raw_line = (f"raw: converged={raw.converged} after {raw.iterations} iterations, "
                    f"log-likelihood {raw.log_likelihood_value:.6f}")
        raw_failed = False
    except NonFiniteLikelihood as exc:
        raw_line = (f"raw: NonFiniteLikelihood at iteration {exc.iteration}, "
                    f"utility {exc.utility!r} overflows exp()")
        raw_failed = True

    spec = NormalizationSpec.varmax(data)
    norm_ok = False
    try:
        res = fit(spec.apply(data), opts)
        est = spec.denormalize(res.beta_hat, res.covariance).beta.values
        norm_ok = res.converged
        norm_line = (f"varmax: converged={res.converged} after {res.iterations} iterations, "
                     f"denormalized beta {[float(f'{b:.6g}') for b in est]}")
    except NonFiniteLikelihood as exc:
        norm_line = f"varmax: NonFiniteLikelihood at iteration {exc.iteration}"

    with open(os.path.join(out, "overflow_report.txt"), "w", encoding="utf-8") as fh:
        fh.write(raw_line + "\n" + norm_line + "\n")
    print(raw_line)
    print(norm_line)
    if not norm_ok:
        return EXIT_NONCONVERGENCE
    if not raw_failed:
        print("no contrast at this scale")
        return EXIT_NO_CONTRAST
    return EXIT_OK


_COMMANDS = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "equivalence": cmd_equivalence,
    "overflow-demo": cmd_overflow_demo,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="normlogit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.command)
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        out = _out_dir(cfg, args.out)
        if args.command == "fit":
            return cmd_fit(cfg, out)
        return _COMMANDS[args.command](cfg, out, args.seed)
    except (ConfigError, ContractViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RankDeficient, SingularInformation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RANK
    except NonFiniteLikelihood as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW


if __name__ == "__main__":
    sys.exit(main())
