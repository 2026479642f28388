"""Problem configuration, signal priors, random instances and empirical metrics.

Measurement model::

    y = H x0 + z,        A = gamma H + eps Omega,   gamma^2 + eps^2 = 1

with ``H`` and ``Omega`` iid N(0, 1/n) and the estimator only seeing ``A``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Invalid problem configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ProblemConfig:
    delta: float
    kappa: float
    eps2: float
    sigma_z2: float
    lambda1: float
    lambda2: float
    l: float = 0.0
    u: float = 1.0
    xi: float = 1e-3

    def __post_init__(self):
        checks = [
            ("delta", self.delta > 0, "must be > 0"),
            ("kappa", 0 < self.kappa < 1, "must lie in (0, 1)"),
            ("eps2", 0 <= self.eps2 <= 1, "must lie in [0, 1]"),
            ("sigma_z2", self.sigma_z2 > 0, "must be > 0"),
            ("lambda1", self.lambda1 > 0, "must be > 0"),
            ("lambda2", self.lambda2 > 0, "must be > 0"),
            ("l", self.l <= 0, "must be <= 0"),
            ("u", self.u >= 0, "must be >= 0"),
            ("u", self.l < self.u, "need l < u"),
            ("xi", self.xi > 0, "must be > 0"),
        ]
        for name, ok, msg in checks:
            # NaN fails every comparison, so it is rejected here too
            if not ok:
                raise ConfigError(name, f"{msg} (got {getattr(self, name)})")

    @classmethod
    def from_snr(cls, snr: float, kappa: float, **kw) -> "ProblemConfig":
        if not snr > 0:
            raise ConfigError("snr", f"must be > 0 (got {snr})")
        return cls(kappa=kappa, sigma_z2=kappa / snr, **kw)

    @property
    def gamma(self) -> float:
        return math.sqrt(1.0 - self.eps2)

    @property
    def eps(self) -> float:
        return math.sqrt(self.eps2)

    @property
    def snr(self) -> float:
        return self.kappa / self.sigma_z2

    @property
    def box_is_finite(self) -> bool:
        return math.isfinite(self.l) and math.isfinite(self.u)

    def replace(self, **changes) -> "ProblemConfig":
        return ProblemConfig(**{**asdict(self), **changes})

    def unboxed(self) -> "ProblemConfig":
        """Same problem with the box removed (standard elastic net)."""
        return self.replace(l=-math.inf, u=math.inf)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Prior:
    """Law of the nonzero entries of ``x0`` as finitely many atoms.

    The full entry law is the mixture: 0 with probability ``1 - kappa`` and
    ``values[i]`` with probability ``kappa * probs[i]``.
    """

    values: tuple[float, ...] = (1.0,)
    probs: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.values) != len(self.probs) or not self.values:
            raise ConfigError("prior.atoms", "need matching, nonempty values and probs")
        if any(p < 0 for p in self.probs):
            raise ConfigError("prior.atoms", "probabilities must be nonnegative")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ConfigError("prior.atoms", f"probabilities sum to {sum(self.probs)}, not 1")

    @classmethod
    def from_atoms(cls, atoms, unit_variance: bool = False) -> "Prior":
        values, probs = zip(*atoms)
        prior = cls(values, probs)
        return prior.normalized() if unit_variance else prior

    @classmethod
    def bernoulli(cls) -> "Prior":
        return cls((1.0,), (1.0,))

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.values, self.probs))

    @property
    def second_moment(self) -> float:
        """``E[v^2]`` over the nonzero atoms."""
        return sum(p * v * v for v, p in self.atoms)

    def normalized(self) -> "Prior":
        """Rescale atoms so the nonzero entries have ``E[v^2] = 1``."""
        scale = math.sqrt(self.second_moment)
        return Prior(tuple(v / scale for v in self.values), self.probs)

    def check_box(self, cfg: ProblemConfig) -> None:
        for v in self.values:
            if v == 0.0:
                raise ConfigError("prior.atoms", "atoms are the nonzero values; 0 is not allowed")
            if not cfg.l <= v <= cfg.u:
                raise ConfigError("prior.atoms", f"atom {v} outside box [{cfg.l}, {cfg.u}]")


@dataclass
class Instance:
    n: int
    m: int
    x0: np.ndarray
    H: np.ndarray
    Omega: np.ndarray
    A: np.ndarray
    z: np.ndarray
    y: np.ndarray
    seed: int
    support: np.ndarray = field(repr=False)


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream seeded through ``SeedSequence``; the only RNG used."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def generate_instance(cfg: ProblemConfig, prior: Prior, n: int, seed: int) -> Instance:
    """Draw one problem instance, deterministically from ``seed``.

    Draw order is fixed: support positions, atom values, H, Omega, z.
    Gaussians come from numpy's ziggurat ``standard_normal``.
    """
    if n < 2:
        raise ConfigError("n", f"must be >= 2 (got {n})")
    k = round(cfg.kappa * n)
    m = round(cfg.delta * n)
    if k < 1 or k >= n:
        raise ConfigError("kappa", f"round(kappa*n) = {k} leaves an empty support or off-support")
    if m < 1:
        raise ConfigError("delta", f"round(delta*n) = {m} gives no measurements")
    prior.check_box(cfg)

    rng = make_rng(seed)
    support = np.sort(rng.choice(n, size=k, replace=False))
    x0 = np.zeros(n)
    x0[support] = rng.choice(np.asarray(prior.values), size=k, p=np.asarray(prior.probs))
    scale = 1.0 / math.sqrt(n)
    H = rng.standard_normal((m, n)) * scale
    Omega = rng.standard_normal((m, n)) * scale
    z = rng.standard_normal(m) * math.sqrt(cfg.sigma_z2)
    A = cfg.gamma * H + cfg.eps * Omega
    y = H @ x0 + z
    return Instance(n=n, m=m, x0=x0, H=H, Omega=Omega, A=A, z=z, y=y, seed=seed, support=support)


def empirical_mse(xhat, x0) -> float:
    xhat, x0 = np.asarray(xhat, dtype=float), np.asarray(x0, dtype=float)
    if xhat.shape != x0.shape:
        raise ValueError(f"length mismatch: {xhat.shape} vs {x0.shape}")
    return float(np.mean((xhat - x0) ** 2))


def empirical_support(xhat, x0, xi: float) -> tuple[float, float]:
    """Fractions of correctly declared on-support and off-support entries.

    An entry is declared on-support when ``|xhat_i| >= xi``; off-support
    success counts ``|xhat_i| <= xi``, so an entry at exactly ``xi`` counts
    for both.
    """
    xhat, x0 = np.asarray(xhat, dtype=float), np.asarray(x0, dtype=float)
    if xhat.shape != x0.shape:
        raise ValueError(f"length mismatch: {xhat.shape} vs {x0.shape}")
    if not xi > 0:
        raise ValueError(f"xi must be > 0, got {xi}")
    on = x0 != 0
    if on.all() or not on.any():
        raise ValueError("x0 needs both zero and nonzero entries")
    mag = np.abs(xhat)
    return float(np.mean(mag[on] >= xi)), float(np.mean(mag[~on] <= xi))


@dataclass(frozen=True)
class EmpiricalSummary:
    mse: float
    phi_on: float
    phi_off: float
    trials: int
    std_err_mse: float
    std_err_on: float
    std_err_off: float

    @classmethod
    def from_trials(cls, mse, phi_on, phi_off) -> "EmpiricalSummary":
        cols = [np.asarray(c, dtype=float) for c in (mse, phi_on, phi_off)]
        t = len(cols[0])
        if t < 1:
            raise ValueError("need at least one trial")

        def se(c):
            return float(np.std(c, ddof=1) / math.sqrt(t)) if t > 1 else 0.0

        return cls(
            mse=float(cols[0].mean()),
            phi_on=float(cols[1].mean()),
            phi_off=float(cols[2].mean()),
            trials=t,
            std_err_mse=se(cols[0]),
            std_err_on=se(cols[1]),
            std_err_off=se(cols[2]),
        )
