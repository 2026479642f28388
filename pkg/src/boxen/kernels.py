"""Scalar building blocks for the Box-Elastic Net.

The saturated soft-threshold

    eta(a; lam, l, u) = argmin_{l <= x <= u}  0.5 (x - a)^2 + lam |x|

and its value function ``e_val`` are the proximal map and Moreau envelope
of ``lam |x|`` restricted to the box ``[l, u]``.  Both accept scalars or
numpy arrays for ``a``.  Infinite bounds are allowed (``l=-inf``,
``u=+inf``) and recover the ordinary soft-threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ThresholdParams:
    """Threshold level and box ``[l, u]`` (bounds may be infinite)."""

    lam: float
    l: float = -math.inf
    u: float = math.inf

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not self.l < self.u:
            raise ValueError(f"need l < u, got l={self.l}, u={self.u}")
        if self.l > 0 or self.u < 0:
            raise ValueError(f"box [{self.l}, {self.u}] must contain 0")


def eta(a, p: ThresholdParams):
    """Saturated soft-threshold.

    Branches are tested in the order u-saturation, upper linear, dead zone,
    lower linear, l-saturation; ties go to the first listed branch.
    """
    lam, l, u = p.lam, p.l, p.u
    a_arr = np.asarray(a, dtype=float)
    out = np.select(
        [a_arr > u + lam, a_arr > lam, a_arr >= -lam, a_arr > l - lam],
        [np.full_like(a_arr, u), a_arr - lam, np.zeros_like(a_arr), a_arr + lam],
        default=l,
    )
    return out if out.ndim else float(out)


def e_val(a, p: ThresholdParams):
    """Minimum value of ``0.5 (x - a)^2 + lam |x|`` over ``x in [l, u]``."""
    lam, l, u = p.lam, p.l, p.u
    a_arr = np.asarray(a, dtype=float)
    with np.errstate(invalid="ignore"):
        # inf - inf in the unused saturation branches is masked by np.select
        out = np.select(
            [a_arr > u + lam, a_arr > lam, a_arr >= -lam, a_arr > l - lam],
            [
                0.5 * (u - a_arr) ** 2 + lam * u,
                lam * a_arr - 0.5 * lam**2,
                0.5 * a_arr**2,
                -lam * a_arr - 0.5 * lam**2,
            ],
            default=0.5 * (l - a_arr) ** 2 - lam * l,
        )
    return out if out.ndim else float(out)


def soft_threshold(a, lam):
    """Ordinary soft-threshold ``sign(a) max(|a| - lam, 0)``."""
    return np.sign(a) * np.maximum(np.abs(a) - lam, 0.0)


def clamp(x, l, u):
    """Clip ``x`` to ``[l, u]``; infinite bounds are no-ops."""
    return np.clip(x, l, u)


def q_func(x):
    """Standard-normal upper tail ``P[N(0,1) > x]`` via ``erfc``."""
    out = 0.5 * erfc(np.asarray(x, dtype=float) / SQRT2)
    return out if out.ndim else float(out)


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    out = INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return out if out.ndim else float(out)
