"""Choose (lambda1, lambda2) from theory predictions.

A full log-spaced grid is evaluated first; each refinement round then lays
a grid of the same shape around the incumbent with a log-span four times
smaller, clipped to the original ranges.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .model import ConfigError, Prior, ProblemConfig
from .parallel import parallel_map
from .theory import SaddleError, predict

log = logging.getLogger(__name__)

SHRINK = 4.0
ROUNDS = 2


@dataclass(frozen=True)
class TuneObjective:
    kind: str = "min_mse"  # or "support_score"
    omega: float | None = None

    def __post_init__(self):
        if self.kind == "min_mse":
            if self.omega is not None:
                raise ValueError("omega only applies to kind='support_score'")
        elif self.kind == "support_score":
            if self.omega is None or not 0.0 <= self.omega <= 1.0:
                raise ValueError(f"support_score needs omega in [0, 1], got {self.omega}")
        else:
            raise ValueError(f"unknown objective kind {self.kind!r}")

    @property
    def maximize(self) -> bool:
        return self.kind == "support_score"

    def score(self, pred) -> float:
        if self.kind == "min_mse":
            return pred.mse
        if self.omega == 1.0:
            return pred.phi_on
        if self.omega == 0.0:
            return pred.phi_off
        return self.omega * pred.phi_on + (1.0 - self.omega) * pred.phi_off

    def better(self, a: float, b: float) -> bool:
        return a > b if self.maximize else a < b


@dataclass(frozen=True)
class LogGrid:
    lo: float
    hi: float
    num: int = 12

    def __post_init__(self):
        if not (self.lo > 0 and self.hi >= self.lo and self.num >= 1):
            raise ValueError(f"bad grid ({self.lo}, {self.hi}, {self.num})")
        if self.num == 1 and self.hi != self.lo:
            raise ValueError("a one-point grid needs lo == hi")

    def values(self) -> np.ndarray:
        if self.num == 1:
            return np.array([self.lo])
        return np.logspace(math.log10(self.lo), math.log10(self.hi), self.num)

    def around(self, center: float, bounds: "LogGrid") -> "LogGrid":
        half = 0.5 * (math.log10(self.hi) - math.log10(self.lo)) / SHRINK
        lo = max(math.log10(center) - half, math.log10(bounds.lo))
        hi = min(math.log10(center) + half, math.log10(bounds.hi))
        return LogGrid(10**lo, 10**hi, self.num)


@dataclass
class TuneResult:
    lambda1_star: float
    lambda2_star: float
    objective_value: float
    grid_trace: list = field(default_factory=list)  # (lambda1, lambda2, objective, round)


def _evaluate(args):
    cfg, prior, objective, l1, l2 = args
    try:
        pred = predict(cfg.replace(lambda1=float(l1), lambda2=float(l2)), prior)
    except (SaddleError, ConfigError, ValueError) as exc:
        log.debug("grid point (%g, %g) invalid: %s", l1, l2, exc)
        return math.nan
    return objective.score(pred)


def tune(cfg: ProblemConfig, prior: Prior, objective: TuneObjective,
         grid_l1: LogGrid, grid_l2: LogGrid, rounds: int = ROUNDS, workers: int = 1) -> TuneResult:
    """Best (lambda1, lambda2) by grid search with log-space refinement.

    ``cfg.lambda1`` and ``cfg.lambda2`` are ignored.  Grid points whose
    saddle solve fails are recorded with a NaN objective and skipped.
    """
    trace = []
    best = None
    g1, g2 = grid_l1, grid_l2
    for rnd in range(rounds + 1):
        pts = [(a, b) for a in g1.values() for b in g2.values()]
        scores = parallel_map(_evaluate, [(cfg, prior, objective, a, b) for a, b in pts], workers)
        for (a, b), sc in zip(pts, scores):
            trace.append((float(a), float(b), float(sc), rnd))
            if math.isnan(sc):
                continue
            if best is None or objective.better(sc, best[2]):
                best = (float(a), float(b), float(sc))
        if best is None:
            raise SaddleError("every grid point failed to produce a prediction")
        log.info("round %d: incumbent lambda1=%.4g lambda2=%.4g objective=%.6g", rnd, *best)
        if g1.num == 1 and g2.num == 1:
            break
        g1 = g1.around(best[0], grid_l1) if g1.num > 1 else g1
        g2 = g2.around(best[1], grid_l2) if g2.num > 1 else g2
    return TuneResult(best[0], best[1], best[2], trace)
