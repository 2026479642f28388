"""Monte-Carlo trials and parameter sweeps comparing simulation with theory."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .model import ConfigError, EmpiricalSummary, Prior, ProblemConfig, empirical_mse, empirical_support, generate_instance
from .parallel import parallel_map
from .solver import SolverOptions, solve_box_en
from .theory import SaddleError, predict

log = logging.getLogger(__name__)

ESTIMATORS = ("box_en", "standard_en")
AXES = ("lambda1", "lambda2", "eps2", "delta", "snr")


@dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int
    mse: float
    phi_on: float
    phi_off: float
    iters: int
    kkt_residual: float
    converged: bool


def estimator_config(cfg: ProblemConfig, estimator: str) -> ProblemConfig:
    if estimator == "box_en":
        return cfg
    if estimator == "standard_en":
        return cfg.unboxed()
    raise ConfigError("estimators", f"unknown estimator {estimator!r}")


def with_axis(cfg: ProblemConfig, axis: str, value: float) -> ProblemConfig:
    if axis == "snr":
        if not value > 0:
            raise ConfigError("snr", f"must be > 0 (got {value})")
        return cfg.replace(sigma_z2=cfg.kappa / value)
    if axis not in AXES:
        raise ConfigError("axis", f"unknown axis {axis!r}; choose from {', '.join(AXES)}")
    return cfg.replace(**{axis: value})


def _solve_and_score(inst, cfg, trial, opts, x_init=None):
    rep = solve_box_en(inst.A, inst.y, cfg, opts, x_init)
    on, off = empirical_support(rep.xhat, inst.x0, cfg.xi)
    res = TrialResult(trial, inst.seed, empirical_mse(rep.xhat, inst.x0), on, off,
                      rep.iters, rep.kkt_residual, rep.converged)
    return res, rep.xhat


def _one_trial(args):
    cfg, prior, n, seed, trial, opts = args
    inst = generate_instance(cfg, prior, n, seed + trial)
    return _solve_and_score(inst, cfg, trial, opts)[0]


def simulate(cfg: ProblemConfig, prior: Prior, n: int, trials: int, seed: int,
             estimator: str = "box_en", opts: SolverOptions | None = None, workers: int = 1):
    """Per-trial results (trial ``t`` uses seed ``seed + t``) and their summary."""
    if trials < 1:
        raise ConfigError("trials", f"must be >= 1 (got {trials})")
    opts = opts or SolverOptions()
    ecfg = estimator_config(cfg, estimator)
    rows = parallel_map(_one_trial, [(ecfg, prior, n, seed, t, opts) for t in range(trials)], workers)
    summary = EmpiricalSummary.from_trials([r.mse for r in rows], [r.phi_on for r in rows], [r.phi_off for r in rows])
    return rows, summary


def _sweep_trial(args):
    """All sweep points for one trial seed; lambda sweeps reuse the instance and warm-start."""
    cfg, prior, axis, values, n, seed, trial, estimators, opts = args
    out = {}
    lambda_axis = axis in ("lambda1", "lambda2")
    for est in estimators:
        inst, warm = None, None
        for i, v in enumerate(values):
            try:
                pcfg = estimator_config(with_axis(cfg, axis, v), est)
                if inst is None or not lambda_axis:
                    inst = generate_instance(pcfg, prior, n, seed + trial)
                    warm = None
                res, warm = _solve_and_score(inst, pcfg, trial, opts, warm)
                out[(i, est)] = res
            except ConfigError as exc:
                out[(i, est)] = str(exc)
    return out


@dataclass
class SweepRow:
    axis: str
    value: float
    estimator: str
    status: str
    theory_mse: float = math.nan
    theory_phi_on: float = math.nan
    theory_phi_off: float = math.nan
    emp_mse: float = math.nan
    emp_phi_on: float = math.nan
    emp_phi_off: float = math.nan
    se_mse: float = math.nan
    se_phi_on: float = math.nan
    se_phi_off: float = math.nan
    trials: int = 0
    nonconverged: int = 0


def sweep(cfg: ProblemConfig, prior: Prior, axis: str, values, n: int, trials: int, seed: int,
          estimators=("box_en",), opts: SolverOptions | None = None, workers: int = 1) -> list[SweepRow]:
    """One row per (axis value, estimator), theory next to simulation.

    ``trials=0`` skips simulation.  Failures at a point are written into the
    row's ``status`` and the sweep carries on.
    """
    values = [float(v) for v in values]
    if not values:
        raise ConfigError("values", "need at least one sweep value")
    for est in estimators:
        estimator_config(cfg, est)
    if axis not in AXES:
        raise ConfigError("axis", f"unknown axis {axis!r}; choose from {', '.join(AXES)}")
    opts = opts or SolverOptions()

    per_trial = []
    if trials > 0:
        jobs = [(cfg, prior, axis, values, n, seed, t, tuple(estimators), opts) for t in range(trials)]
        per_trial = parallel_map(_sweep_trial, jobs, workers)

    rows = []
    for i, v in enumerate(values):
        for est in estimators:
            row = SweepRow(axis, v, est, "ok")
            problems = []
            try:
                pred = predict(estimator_config(with_axis(cfg, axis, v), est), prior)
                row.theory_mse, row.theory_phi_on, row.theory_phi_off = pred.mse, pred.phi_on, pred.phi_off
            except (SaddleError, ConfigError, ValueError) as exc:
                problems.append(f"theory_failed: {exc}")
            if per_trial:
                results = [pt[(i, est)] for pt in per_trial]
                errors = [r for r in results if isinstance(r, str)]
                if errors:
                    problems.append(f"simulation_failed: {errors[0]}")
                else:
                    s = EmpiricalSummary.from_trials([r.mse for r in results], [r.phi_on for r in results],
                                                     [r.phi_off for r in results])
                    row.emp_mse, row.emp_phi_on, row.emp_phi_off = s.mse, s.phi_on, s.phi_off
                    row.se_mse, row.se_phi_on, row.se_phi_off = s.std_err_mse, s.std_err_on, s.std_err_off
                    row.trials = s.trials
                    row.nonconverged = sum(not r.converged for r in results)
                    if row.nonconverged:
                        problems.append(f"nonconverged={row.nonconverged}")
            if problems:
                row.status = "; ".join(problems)
                log.warning("sweep point %s=%g (%s): %s", axis, v, est, row.status)
            rows.append(row)
    return rows
