"""Asymptotic predictions for the Box-Elastic Net under matrix uncertainty.

Everything is driven by the scalar channel

    a = c * X0 + s * H,    c = gamma beta / (2 theta tau),  s = beta / (2 theta),
    theta = beta / (2 tau) + lambda2,   threshold lam = lambda1 / (2 theta)

with ``H ~ N(0, 1)`` and ``X0`` drawn from the kappa-mixture of the prior.
The deterministic objective is

    D(tau, beta) = beta tau delta / 2 + beta sigma_z2 / (2 tau)
                   - beta^2 (theta + 1) / (4 theta)
                   + (beta / (2 tau) - beta^2 gamma^2 / (4 theta tau^2)) kappa2
                   + 2 theta E[e(a; lam, l, u)]

and ``(tau*, beta*)`` is its min-max saddle.  Expectations over ``H`` are
computed two independent ways: exactly, from truncated-Gaussian moments on
each of the five branches of ``eta``, and by composite Gauss-Legendre
quadrature split at the branch kinks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .kernels import ThresholdParams, e_val, eta, norm_pdf, q_func
from .model import ConfigError, Prior, ProblemConfig


class SaddleError(RuntimeError):
    """The saddle-point search failed; carries the last bracket for diagnosis."""


# --------------------------------------------------------------------------
# channel parameters and truncated-Gaussian moments


@dataclass(frozen=True)
class Channel:
    theta: float
    scale: float  # s
    shift: float  # c per unit of X0
    lam: float

    @classmethod
    def at(cls, tau: float, beta: float, cfg: ProblemConfig) -> "Channel":
        if not (tau > 0 and beta > 0):
            raise ValueError(f"tau and beta must be > 0, got tau={tau}, beta={beta}")
        theta = beta / (2.0 * tau) + cfg.lambda2
        return cls(
            theta=theta,
            scale=beta / (2.0 * theta),
            shift=cfg.gamma * beta / (2.0 * theta * tau),
            lam=cfg.lambda1 / (2.0 * theta),
        )


def _prob(lo: float, hi: float) -> float:
    """``P[lo < Z < hi]`` for standard normal Z, accurate in both tails."""
    if hi <= lo:
        return 0.0
    if lo >= 0:
        return q_func(lo) - q_func(hi)
    if hi <= 0:
        return q_func(-hi) - q_func(-lo)
    return 1.0 - q_func(hi) - q_func(-lo)


def _xpdf(x: float) -> float:
    return 0.0 if math.isinf(x) else x * norm_pdf(x)


def _moments(lo: float, hi: float) -> tuple[float, float, float]:
    """``E[Z^k; lo < Z < hi]`` for k = 0, 1, 2."""
    if hi <= lo:
        return 0.0, 0.0, 0.0
    m0 = _prob(lo, hi)
    m1 = norm_pdf(lo) - norm_pdf(hi)
    m2 = m0 + _xpdf(lo) - _xpdf(hi)
    return m0, m1, m2


@dataclass(frozen=True)
class AtomMoments:
    """Branch-integrated expectations for one value of X0."""

    e: float  # E[e(a)]
    eta: float  # E[eta(a)]
    eta_sq: float  # E[eta(a)^2]
    p_linear: float  # P[a on a slope-1 branch] = E[eta'(a)]


def atom_moments_exact(c: float, s: float, lam: float, l: float, u: float) -> AtomMoments:
    """Exact expectations over ``a = c + s H`` branch by branch."""
    cuts = [l - lam, -lam, lam, u + lam]
    z = [-math.inf] + [(t - c) / s for t in cuts] + [math.inf]
    e_tot = eta_tot = eta_sq = p_lin = 0.0

    def poly(k0, k1, k2, m):
        # E[k0 + k1 a + k2 a^2 ; branch] with a = c + s Z
        m0, m1, m2 = m
        ea = c * m0 + s * m1
        ea2 = c * c * m0 + 2 * c * s * m1 + s * s * m2
        return k0 * m0 + k1 * ea + k2 * ea2

    # l-saturation
    m = _moments(z[0], z[1])
    if m[0] > 0:
        e_tot += poly(0.5 * l * l - lam * l, -l, 0.5, m)
        eta_tot += l * m[0]
        eta_sq += l * l * m[0]
    # lower slope: eta = a + lam
    m = _moments(z[1], z[2])
    e_tot += poly(-0.5 * lam * lam, -lam, 0.0, m)
    eta_tot += poly(lam, 1.0, 0.0, m)
    eta_sq += poly(lam * lam, 2 * lam, 1.0, m)
    p_lin += m[0]
    # dead zone
    m = _moments(z[2], z[3])
    e_tot += poly(0.0, 0.0, 0.5, m)
    # upper slope: eta = a - lam
    m = _moments(z[3], z[4])
    e_tot += poly(-0.5 * lam * lam, lam, 0.0, m)
    eta_tot += poly(-lam, 1.0, 0.0, m)
    eta_sq += poly(lam * lam, -2 * lam, 1.0, m)
    p_lin += m[0]
    # u-saturation
    m = _moments(z[4], z[5])
    if m[0] > 0:
        e_tot += poly(0.5 * u * u + lam * u, -u, 0.5, m)
        eta_tot += u * m[0]
        eta_sq += u * u * m[0]
    return AtomMoments(e=e_tot, eta=eta_tot, eta_sq=eta_sq, p_linear=p_lin)


# --------------------------------------------------------------------------
# independent quadrature route

QUAD_NODES = 201
_H_CUTOFF = 40.0  # standard-normal mass beyond is below 1e-340


@lru_cache(maxsize=8)
def _legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def _gauss_expect(f, c: float, s: float, lam: float, l: float, u: float, nodes: int = QUAD_NODES) -> float:
    """``E[f(c + s H)]`` by Gauss-Legendre on each branch piece of the H-line."""
    x, w = _legendre(nodes)
    cuts = sorted(
        (t - c) / s for t in (l - lam, -lam, lam, u + lam) if math.isfinite(t) and abs((t - c) / s) < _H_CUTOFF
    )
    edges = [-_H_CUTOFF, *cuts, _H_CUTOFF]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        h = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        total += 0.5 * (hi - lo) * float(w @ (f(c + s * h) * norm_pdf(h)))
    return total


def atom_moments_quadrature(c: float, s: float, lam: float, l: float, u: float, nodes: int = QUAD_NODES) -> AtomMoments:
    p = ThresholdParams(lam, l, u)

    def ex(f):
        return _gauss_expect(f, c, s, lam, l, u, nodes)

    def slope(a):
        return ((a > l - lam) & (a < -lam) | (a > lam) & (a <= u + lam)).astype(float)

    return AtomMoments(
        e=ex(lambda a: e_val(a, p)),
        eta=ex(lambda a: eta(a, p)),
        eta_sq=ex(lambda a: eta(a, p) ** 2),
        p_linear=ex(slope),
    )


# --------------------------------------------------------------------------
# mixture expectations


def _mixture(tau, beta, cfg, prior, method):
    ch = Channel.at(tau, beta, cfg)
    fn = atom_moments_exact if method == "exact" else atom_moments_quadrature
    weights = [1.0 - cfg.kappa] + [cfg.kappa * p for p in prior.probs]
    values = [0.0, *prior.values]
    moms = [fn(ch.shift * v, ch.scale, ch.lam, cfg.l, cfg.u) for v in values]
    return ch, weights, values, moms


def _check_method(method):
    if method not in ("exact", "quadrature"):
        raise ValueError(f"method must be 'exact' or 'quadrature', got {method!r}")


def expected_e(tau: float, beta: float, cfg: ProblemConfig, prior: Prior, method: str = "exact") -> float:
    """``E[e(c X0 + s H; lam, l, u)]`` over the kappa-mixture and H."""
    _check_method(method)
    if method == "quadrature":
        ch = Channel.at(tau, beta, cfg)
        p = ThresholdParams(ch.lam, cfg.l, cfg.u)
        return sum(
            w * _gauss_expect(lambda a: e_val(a, p), ch.shift * v, ch.scale, ch.lam, cfg.l, cfg.u)
            for w, v in zip([1.0 - cfg.kappa] + [cfg.kappa * q for q in prior.probs], [0.0, *prior.values])
        )
    _, weights, _, moms = _mixture(tau, beta, cfg, prior, method)
    return sum(w * m.e for w, m in zip(weights, moms))


def _upsilon_at(tau, beta, cfg, prior, method="exact"):
    _check_method(method)
    if method == "quadrature":
        ch = Channel.at(tau, beta, cfg)
        p = ThresholdParams(ch.lam, cfg.l, cfg.u)
        return sum(
            cfg.kappa * q * v * _gauss_expect(lambda a: eta(a, p), ch.shift * v, ch.scale, ch.lam, cfg.l, cfg.u)
            for v, q in prior.atoms
        )
    _, weights, values, moms = _mixture(tau, beta, cfg, prior, method)
    return sum(w * v * m.eta for w, v, m in zip(weights, values, moms))


def kappa2(cfg: ProblemConfig, prior: Prior) -> float:
    """Limit of ``||x0||^2 / n``."""
    return cfg.kappa * prior.second_moment


def d_objective(tau: float, beta: float, cfg: ProblemConfig, prior: Prior, method: str = "exact") -> float:
    ch = Channel.at(tau, beta, cfg)
    theta, g2, k2 = ch.theta, cfg.gamma**2, kappa2(cfg, prior)
    return (
        beta * tau * cfg.delta / 2.0
        + beta * cfg.sigma_z2 / (2.0 * tau)
        - beta**2 * (theta + 1.0) / (4.0 * theta)
        + (beta / (2.0 * tau) - beta**2 * g2 / (4.0 * theta * tau**2)) * k2
        + 2.0 * theta * expected_e(tau, beta, cfg, prior, method)
    )


def d_gradient(tau: float, beta: float, cfg: ProblemConfig, prior: Prior) -> tuple[float, float]:
    """``(dD/dtau, dD/dbeta)``.

    Rewriting ``2 theta e`` as the per-coordinate minimum of
    ``theta x^2 - beta (H + gamma X0 / tau) x + lambda1 |x|`` plus a term that
    cancels, Danskin's theorem gives the partials from the moments of the
    minimizer ``eta``; ``E[H eta] = s E[eta']`` by Stein's lemma.
    """
    ch, weights, values, moms = _mixture(tau, beta, cfg, prior, "exact")
    g, k2 = cfg.gamma, kappa2(cfg, prior)
    e_sq = sum(w * m.eta_sq for w, m in zip(weights, moms))
    e_x0 = sum(w * v * m.eta for w, v, m in zip(weights, values, moms))
    e_h = ch.scale * sum(w * m.p_linear for w, m in zip(weights, moms))
    base = cfg.sigma_z2 + k2 + e_sq
    d_tau = beta * cfg.delta / 2.0 - beta * base / (2.0 * tau**2) + beta * g * e_x0 / tau**2
    d_beta = tau * cfg.delta / 2.0 + base / (2.0 * tau) - beta / 2.0 - e_h - g * e_x0 / tau
    return d_tau, d_beta


# --------------------------------------------------------------------------
# saddle point


@dataclass(frozen=True)
class SaddlePoint:
    tau: float
    beta: float
    theta: float
    d_value: float
    residual: float


TAU_BRACKET = (1e-4, 1e2)
BETA_BRACKET = (1e-4, 1e2)
MAX_DOUBLINGS = 60


def _bracket_root(fn, lo, hi, name):
    """Expand ``[lo, hi]`` geometrically until ``fn(lo) > 0 > fn(hi)``."""
    f_lo, f_hi = fn(lo), fn(hi)
    for _ in range(MAX_DOUBLINGS):
        if f_lo > 0 and f_hi < 0:
            return lo, hi
        if f_lo <= 0:
            lo /= 2.0
            f_lo = fn(lo)
        if f_hi >= 0:
            hi *= 2.0
            f_hi = fn(hi)
    if f_lo > 0 and f_hi < 0:
        return lo, hi
    raise SaddleError(f"{name} bracket exhausted at [{lo:.3e}, {hi:.3e}] (values {f_lo:.3e}, {f_hi:.3e})")


def _best_beta(tau, cfg, prior, bracket=BETA_BRACKET):
    # D is concave in beta and dD/dbeta > 0 as beta -> 0+
    def slope(b):
        return d_gradient(tau, b, cfg, prior)[1]

    lo, hi = _bracket_root(slope, *bracket, name="beta")
    return brentq(slope, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def solve_saddle(cfg: ProblemConfig, prior: Prior, tol: float = 1e-10,
                 tau_bracket=TAU_BRACKET, beta_bracket=BETA_BRACKET) -> SaddlePoint:
    """Min over tau of max over beta of ``D``.

    The inner maximization is a root of the concave slope in beta.  The outer
    function ``tau -> max_beta D`` is convex, and by the envelope theorem its
    derivative is ``dD/dtau`` at the inner maximizer, so the outer search is a
    root find on that monotone derivative.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    prior.check_box(cfg)

    def outer(t):
        return -d_gradient(t, _best_beta(t, cfg, prior, beta_bracket), cfg, prior)[0]

    lo, hi = _bracket_root(outer, *tau_bracket, name="tau")
    tau = brentq(outer, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    beta = _best_beta(tau, cfg, prior, beta_bracket)
    if not (tau > 0 and beta > 0):
        raise SaddleError(f"non-positive saddle tau={tau}, beta={beta}")
    residual = max(abs(r) for r in d_gradient(tau, beta, cfg, prior))
    if not residual <= tol:
        raise SaddleError(f"stationarity residual {residual:.3e} exceeds tol {tol:.1e} at tau={tau}, beta={beta}")
    theta = beta / (2.0 * tau) + cfg.lambda2
    return SaddlePoint(tau=tau, beta=beta, theta=theta, d_value=d_objective(tau, beta, cfg, prior), residual=residual)


# --------------------------------------------------------------------------
# predictions


def upsilon(sp: SaddlePoint, cfg: ProblemConfig, prior: Prior, method: str = "exact") -> float:
    """``E[eta(c X0 + s H; lam, l, u) X0]`` at the saddle."""
    if not (sp.tau > 0 and sp.beta > 0):
        raise ValueError("invalid saddle point")
    return _upsilon_at(sp.tau, sp.beta, cfg, prior, method)


def upsilon_bernoulli_closed_form(sp: SaddlePoint, cfg: ProblemConfig) -> float:
    """Two-saturation-plus-two-slope expression for the unit-atom prior.

    The mean shift ``c = gamma beta / (2 theta tau)`` sets the integration
    limits; the slope integrals are done by adaptive quadrature.
    """
    tau, beta, theta = sp.tau, sp.beta, sp.theta
    l1, l, u, k = cfg.lambda1, cfg.l, cfg.u, cfg.kappa
    c = cfg.gamma * beta / (2 * theta * tau)

    def pdf(h):
        return math.exp(-0.5 * h * h) / math.sqrt(2 * math.pi)

    def bound(x):
        return max(min(x, _H_CUTOFF), -_H_CUTOFF)

    total = 0.0
    if math.isfinite(u):
        total += k * u * q_func((2 * theta * (u - c) + l1) / beta)
    if math.isfinite(l):
        total += k * l * q_func((2 * theta * (c - l) + l1) / beta)
    upper = quad(lambda h: (c + (beta * h - l1) / (2 * theta)) * pdf(h),
                 bound((l1 - 2 * theta * c) / beta), bound((2 * theta * (u - c) + l1) / beta),
                 epsabs=1e-14, epsrel=1e-12)[0]
    lower = quad(lambda h: (c + (beta * h + l1) / (2 * theta)) * pdf(h),
                 bound((2 * theta * (l - c) - l1) / beta), bound((-2 * theta * c - l1) / beta),
                 epsabs=1e-14, epsrel=1e-12)[0]
    return total + k * (upper + lower)


def support_probabilities(sp: SaddlePoint, cfg: ProblemConfig, prior: Prior) -> tuple[float, float, str | None]:
    """Asymptotic on/off-support success probabilities and a diagnostic note.

    ``eta`` is monotone in ``a``, so ``|eta| >= xi`` is the union of
    ``a >= xi + lam`` (possible iff ``xi <= u``) and ``a <= -xi - lam``
    (possible iff ``-xi >= l``).  Off-support success is the complement of
    the strict event ``|eta| > xi``.
    """
    ch = Channel.at(sp.tau, sp.beta, cfg)
    s, lam, xi = ch.scale, ch.lam, cfg.xi
    note = None
    if xi > cfg.u and -xi < cfg.l:
        note = f"xi={xi} exceeds the box [{cfg.l}, {cfg.u}]; on-support recovery is impossible"

    def p_on(c):
        total = 0.0
        if xi <= cfg.u:
            total += q_func((xi + lam - c) / s)
        if -xi >= cfg.l:
            total += q_func((xi + lam + c) / s)
        return total

    phi_on = sum(p * p_on(ch.shift * v) for v, p in prior.atoms)
    miss = 0.0
    if xi < cfg.u:
        miss += q_func((xi + lam) / s)
    if -xi > cfg.l:
        miss += q_func((xi + lam) / s)
    return min(phi_on, 1.0), 1.0 - miss, note


def support_bernoulli_closed_form(sp: SaddlePoint, cfg: ProblemConfig) -> tuple[float, float]:
    """Closed forms for the unit-atom prior with ``l = 0`` and ``0 < xi < u``."""
    if not (cfg.l == 0 and 0 < cfg.xi < cfg.u):
        raise ValueError("closed form needs l = 0 and 0 < xi < u")
    arg = (2 * sp.theta * cfg.xi + cfg.lambda1) / sp.beta
    return q_func(arg - cfg.gamma / sp.tau), 1.0 - q_func(arg)


@dataclass(frozen=True)
class TheoryPrediction:
    saddle: SaddlePoint
    mse: float
    upsilon: float
    phi_on: float
    phi_off: float
    notes: tuple[str, ...] = field(default=())

    def as_record(self) -> dict:
        return {
            "tau": self.saddle.tau,
            "beta": self.saddle.beta,
            "theta": self.saddle.theta,
            "mse": self.mse,
            "phi_on": self.phi_on,
            "phi_off": self.phi_off,
        }


def mse_from_saddle(sp: SaddlePoint, cfg: ProblemConfig, ups: float) -> float:
    return cfg.delta * sp.tau**2 - cfg.sigma_z2 + 2.0 * (cfg.gamma - 1.0) * ups


def predict(cfg: ProblemConfig, prior: Prior, tol: float = 1e-10) -> TheoryPrediction:
    """Saddle point, predicted MSE, and support-recovery probabilities."""
    sp = solve_saddle(cfg, prior, tol)
    ups = upsilon(sp, cfg, prior)
    mse = mse_from_saddle(sp, cfg, ups)
    if mse < 0:
        raise SaddleError(f"negative predicted MSE {mse:.3e}: saddle point is not trustworthy")
    phi_on, phi_off, note = support_probabilities(sp, cfg, prior)
    return TheoryPrediction(sp, mse, ups, phi_on, phi_off, (note,) if note else ())


def predict_mse(cfg: ProblemConfig, prior: Prior, tol: float = 1e-10) -> float:
    return predict(cfg, prior, tol).mse


def predict_support(cfg: ProblemConfig, prior: Prior, tol: float = 1e-10) -> tuple[float, float]:
    pred = predict(cfg, prior, tol)
    return pred.phi_on, pred.phi_off


__all__ = [
    "AtomMoments", "Channel", "ConfigError", "SaddleError", "SaddlePoint", "TheoryPrediction",
    "atom_moments_exact", "atom_moments_quadrature", "d_gradient", "d_objective", "expected_e",
    "kappa2", "mse_from_saddle", "predict", "predict_mse", "predict_support", "solve_saddle",
    "support_bernoulli_closed_form", "support_probabilities", "upsilon", "upsilon_bernoulli_closed_form",
]
