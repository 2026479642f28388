"""Accelerated proximal gradient for the (Box-)Elastic Net.

Solves::

    minimize  ||y - A x||^2 + lambda1 ||x||_1 + lambda2 ||x||^2   s.t.  l <= x <= u

The smooth part ``f(x) = ||y - A x||^2 + lambda2 ||x||^2`` has gradient
``2 A^T (A x - y) + 2 lambda2 x`` and Lipschitz constant
``L = 2 (sigma_max(A)^2 + lambda2)``; the proximal map of the rest is the
saturated soft-threshold, so every iterate is feasible.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .kernels import ThresholdParams, eta
from .model import ProblemConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 50_000
    tol: float = 1e-8
    accelerate: bool = True
    step_rule: str = "lipschitz_constant"  # or "backtracking"

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.step_rule not in ("lipschitz_constant", "backtracking"):
            raise ValueError(f"unknown step_rule {self.step_rule!r}")


@dataclass
class SolveReport:
    xhat: np.ndarray
    iters: int
    objective: float
    kkt_residual: float
    converged: bool


def spectral_norm_sq(A, max_iters: int = 100, rtol: float = 1e-10) -> float:
    """Largest eigenvalue of ``A^T A`` by power iteration from the ones vector."""
    v = np.ones(A.shape[1]) / math.sqrt(A.shape[1])
    est = 0.0
    for _ in range(max_iters):
        w = A.T @ (A @ v)
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        v = w / new
        if abs(new - est) <= rtol * new:
            est = new
            break
        est = new
    return est


def box_en_objective(A, y, x, cfg: ProblemConfig) -> float:
    r = y - A @ x
    return float(r @ r + cfg.lambda1 * np.abs(x).sum() + cfg.lambda2 * (x @ x))


def kkt_residual(A, y, x, cfg: ProblemConfig, step: float) -> float:
    """Scaled fixed-point gap ``||x - prox(x - step*grad f(x))|| / sqrt(n)``."""
    grad = 2.0 * (A.T @ (A @ x - y)) + 2.0 * cfg.lambda2 * x
    p = ThresholdParams(step * cfg.lambda1, cfg.l, cfg.u)
    return float(np.linalg.norm(x - eta(x - step * grad, p)) / math.sqrt(x.size))


def solve_box_en(A, y, cfg: ProblemConfig, opts: SolverOptions | None = None, x_init=None) -> SolveReport:
    """Minimize the Box-EN objective over ``[cfg.l, cfg.u]^n``.

    ``x_init`` warm-starts the iteration (it is clipped into the box).  The
    objective is tracked on the Gram form, and a step that increases it
    resets the momentum and is discarded, so the objective sequence is
    nonincreasing in both modes.
    """
    opts = opts or SolverOptions()
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or y.ndim != 1 or A.shape[0] != y.shape[0]:
        raise ValueError(f"dimension mismatch: A {A.shape}, y {y.shape}")
    n = A.shape[1]
    lam1, lam2 = cfg.lambda1, cfg.lambda2

    G = A.T @ A
    b = A.T @ y
    yy = float(y @ y)
    L = 2.0 * (spectral_norm_sq(A) + lam2)
    # power iteration can undershoot slightly; guard the step
    L_cert = L * (1.0 + 1e-6)
    s_cert = 1.0 / L_cert

    def smooth_parts(x):
        Gx = G @ x
        f = float(x @ Gx - 2.0 * (b @ x) + yy + lam2 * (x @ x))
        g = 2.0 * (Gx - b) + 2.0 * lam2 * x
        return f, g

    def objective(f, x):
        return f + lam1 * float(np.abs(x).sum())

    def residual(x, g):
        p = ThresholdParams(s_cert * lam1, cfg.l, cfg.u)
        return float(np.linalg.norm(x - eta(x - s_cert * g, p)) / math.sqrt(n))

    x = np.zeros(n) if x_init is None else np.clip(np.asarray(x_init, dtype=float), cfg.l, cfg.u)
    fx, gx = smooth_parts(x)
    Fx = objective(fx, x)
    yk, gy, fy = x.copy(), gx.copy(), fx
    t = 1.0
    L_bt = L_cert if opts.step_rule == "lipschitz_constant" else max(L_cert / 64.0, 1e-12)

    converged = residual(x, gx) <= opts.tol
    it = 0
    while not converged and it < opts.max_iters:
        it += 1
        # proximal step from the extrapolated point
        while True:
            s = 1.0 / L_bt
            x_new = eta(yk - s * gy, ThresholdParams(s * lam1, cfg.l, cfg.u))
            f_new, g_new = smooth_parts(x_new)
            if opts.step_rule == "lipschitz_constant":
                break
            d = x_new - yk
            if f_new <= fy + gy @ d + 0.5 * L_bt * (d @ d) + 1e-12 * abs(fy):
                break
            L_bt *= 2.0
        F_new = objective(f_new, x_new)

        if F_new > Fx:
            # restart: drop the step, take a plain gradient step next time
            yk, gy, fy, t = x, gx, fx, 1.0
            if not opts.accelerate:
                log.debug("objective increase without acceleration at iter %d", it)
            continue

        if opts.accelerate:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            mom = (t - 1.0) / t_new
            yk = x_new + mom * (x_new - x)
            gy = g_new + mom * (g_new - gx)  # gradient is affine
            if opts.step_rule == "backtracking":
                fy, _ = smooth_parts(yk)
            t = t_new
        else:
            yk, gy, fy = x_new, g_new, f_new
        x, gx, fx, Fx = x_new, g_new, f_new, F_new
        converged = residual(x, gx) <= opts.tol

    # certify from scratch, not from the running gradient
    res = kkt_residual(A, y, x, cfg, s_cert)
    converged = res <= opts.tol
    if not converged:
        log.warning("solver stopped after %d iterations, kkt residual %.3e > tol %.1e", it, res, opts.tol)
    return SolveReport(xhat=x, iters=it, objective=box_en_objective(A, y, x, cfg),
                       kkt_residual=res, converged=converged)


def solve_standard_en(A, y, cfg: ProblemConfig, opts: SolverOptions | None = None, x_init=None) -> SolveReport:
    """Elastic net without the box: the prox is plain soft-thresholding."""
    return solve_box_en(A, y, cfg.unboxed(), opts, x_init)
