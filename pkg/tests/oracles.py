"""Brute-force references used by the tests.

None of these call into the code paths they are used to check: the grid
searches only evaluate objectives, and the saddle oracle evaluates ``D``
through the quadrature route rather than the truncated-moment route.
"""
import math

import numpy as np
from scipy.integrate import quad

from boxen.theory import Channel, kappa2


def grid_prox(a, lam, l, u, step=1e-4):
    """argmin and min of 0.5 (x - a)^2 + lam |x| over a step-grid of [l, u]."""
    xs = np.arange(l, u + 0.5 * step, step)
    xs = np.append(xs[xs <= u], [0.0, u])  # keep 0 and u exactly on the grid
    vals = 0.5 * (xs - a) ** 2 + lam * np.abs(xs)
    i = int(np.argmin(vals))
    return xs[i], vals[i]


def grid_box_en(A, y, lam1, lam2, lo, hi, step=1e-3):
    """Exhaustive grid minimizer of the two-coordinate (Box-)EN objective."""
    g = np.arange(lo, hi + 0.5 * step, step)
    X1, X2 = np.meshgrid(g, g, indexing="ij")
    R = y[:, None, None] - A[:, 0, None, None] * X1 - A[:, 1, None, None] * X2
    F = (R**2).sum(0) + lam1 * (np.abs(X1) + np.abs(X2)) + lam2 * (X1**2 + X2**2)
    i = np.unravel_index(np.argmin(F), F.shape)
    return np.array([X1[i], X2[i]])


def std_normal_integral(f, lo=-np.inf, hi=np.inf):
    return quad(lambda h: f(h) * math.exp(-0.5 * h * h) / math.sqrt(2 * math.pi), lo, hi,
                epsabs=1e-14, epsrel=1e-13, limit=200)[0]


def d_by_quadrature(tau, beta, cfg, prior):
    from boxen.theory import expected_e

    ch = Channel.at(tau, beta, cfg)
    th = ch.theta
    return (beta * tau * cfg.delta / 2 + beta * cfg.sigma_z2 / (2 * tau) - beta**2 * (th + 1) / (4 * th)
            + (beta / (2 * tau) - beta**2 * cfg.gamma**2 / (4 * th * tau**2)) * kappa2(cfg, prior)
            + 2 * th * expected_e(tau, beta, cfg, prior, method="quadrature"))


def _refine_1d(fn, lo, hi, maximize, resolution, log_first=True, points=41):
    """Grid search, then repeated zoom on the best cell until the spacing is below ``resolution``."""
    sign = -1.0 if maximize else 1.0
    grid = np.logspace(math.log10(lo), math.log10(hi), points) if log_first else np.linspace(lo, hi, points)
    while True:
        vals = np.array([sign * fn(x) for x in grid])
        i = int(np.argmin(vals))
        left = grid[max(i - 1, 0)]
        right = grid[min(i + 1, len(grid) - 1)]
        if right - left < 2 * resolution:
            return grid[i], sign * vals[i]
        grid = np.linspace(left, right, 11)


def grid_saddle(cfg, prior, lo=1e-3, hi=10.0, resolution=1e-5):
    """Nested grid refinement: min over tau of (max over beta of D)."""

    def inner(tau):
        return _refine_1d(lambda b: d_by_quadrature(tau, b, cfg, prior), lo, hi, True, resolution)[1]

    tau, _ = _refine_1d(inner, lo, hi, False, resolution)
    beta, _ = _refine_1d(lambda b: d_by_quadrature(tau, b, cfg, prior), lo, hi, True, resolution)
    return tau, beta
