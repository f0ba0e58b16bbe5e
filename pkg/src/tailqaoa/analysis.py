"""Repeated-measurement bounds and time-to-solution for QAOA and annealing."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ising import IsingModel
from .simulator import AnnealConfig, VariationalParams, anneal

DEFAULT_TARGET = 0.99


def default_t_grid() -> list[float]:
    return [float(t) for t in np.geomspace(0.5, 200.0, 16)]


def required_measurements(F: float, eps: float) -> int:
    """Fewest shots ``m`` with ``m > log(eps) / log(1 - F)``.

    This is the number of repetitions after which the solution has been seen
    at least once with probability above ``1 - eps``.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not F > 0.0:
        raise ValueError("success probability must be positive; the solution is unobservable")
    if F > 1.0:
        raise ValueError(f"success probability above 1: {F}")
    if F == 1.0:
        return 1
    bound = math.log(eps) / math.log1p(-F)
    return math.floor(bound) + 1


def canonical_beta(beta: float) -> float:
    """Shift by multiples of pi (the mixer's period) to the representative of least magnitude."""
    k = math.floor(beta / math.pi + 0.5)
    shifted = beta - k * math.pi
    # keep the original when the shift does not strictly shorten it
    return shifted if abs(shifted) < abs(beta) else beta


def qaoa_total_time(params: VariationalParams) -> float:
    """sum_i |gamma_i| + |beta_i| after the canonical beta shift."""
    return float(sum(abs(g) for g in params.gammas)
                 + sum(abs(canonical_beta(b)) for b in params.betas))


def tts(total_time: float, F: float, p_d: float = DEFAULT_TARGET) -> float:
    """Schedule time times the repetitions needed to reach ``p_d``; inf when F = 0."""
    if not 0.0 < p_d < 1.0:
        raise ValueError(f"target probability must lie in (0, 1), got {p_d}")
    if F <= 0.0:
        return math.inf
    if F >= 1.0:
        return 0.0
    return total_time * math.log1p(-p_d) / math.log1p(-F)


@dataclass(frozen=True)
class TtsReport:
    algorithm: str          # "QAOA" or "QA"
    schedule: float | None  # p for QAOA, T for QA; None when no finite TTS exists
    F: float
    p_d: float
    tts: float
    sweep: tuple[tuple[float, float, float], ...] = field(default=(), compare=False)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.tts)

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "schedule": self.schedule, "F": self.F,
                "p_d": self.p_d, "tts": self.tts if self.finite else None}


def _best(algorithm, sweep, p_d) -> TtsReport:
    finite = [row for row in sweep if math.isfinite(row[2])]
    if not finite:
        return TtsReport(algorithm, None, 0.0, p_d, math.inf, tuple(sweep))
    sched, F, value = min(finite, key=lambda row: (row[2], row[0]))
    return TtsReport(algorithm, sched, F, p_d, value, tuple(sweep))


def tts_qaoa(trace, p_d: float = DEFAULT_TARGET) -> TtsReport:
    """Optimal QAOA time to solution over the levels of an optimization trace.

    Levels with F = 0 have infinite TTS and never win.
    """
    if len(trace) == 0:
        raise ValueError("empty optimization trace")
    sweep = []
    for level in trace:
        T_p = qaoa_total_time(level.params)
        sweep.append((level.p, level.F, tts(T_p, level.F, p_d)))
    return _best("QAOA", sweep, p_d)


def tts_qa(m: IsingModel, solutions: Sequence[int], T_grid: Sequence[float] | None = None,
           p_d: float = DEFAULT_TARGET, dt: float = 0.05, workers: int = 1) -> TtsReport:
    """Optimal annealing time to solution over a grid of total times."""
    T_grid = default_t_grid() if T_grid is None else list(T_grid)
    if len(T_grid) == 0:
        raise ValueError("empty annealing time grid")

    def run(T):
        res = anneal(m, solutions, AnnealConfig(float(T), dt, check_convergence=False))
        return float(T), res.success_probability, tts(float(T), res.success_probability, p_d)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            sweep = list(pool.map(run, T_grid))
    else:
        sweep = [run(T) for T in T_grid]
    return _best("QA", sweep, p_d)
