"""Classical outer loop: landscape scans, multistart quasi-Newton, Nelder-Mead, INTERP."""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from .ising import IsingModel
from .simulator import (BATCH_AMPLITUDES, VariationalParams, apply_cost_phase, apply_mixer,
                        expectation, prepare_plus, run_qaoa, success_probability)

FD_STEP = 1e-6
FUNCTION_TOL = 1e-6
STEP_TOL = 1e-6
TIE_TOL = 1e-12
#: A small energy change only ends a descent once the projected gradient is this flat.
GRAD_TOL = 1e-4


@dataclass(frozen=True)
class LevelResult:
    """Best parameters found at one QAOA level."""
    p: int
    gammas: tuple[float, ...]
    betas: tuple[float, ...]
    E: float
    F: float
    evals: int
    seconds: float

    @property
    def params(self) -> VariationalParams:
        return VariationalParams(self.gammas, self.betas)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gammas"] = list(self.gammas)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LevelResult":
        return cls(int(d["p"]), tuple(d["gammas"]), tuple(d["betas"]), float(d["E"]),
                   float(d["F"]), int(d["evals"]), float(d["seconds"]))


#: One entry per level, in increasing p.
OptimizationTrace = list[LevelResult]


def evaluate(m: IsingModel, params: VariationalParams, solutions: Sequence[int]) -> tuple[float, float]:
    """``(E_p, F_p)`` from a fresh simulation."""
    state = run_qaoa(m, params)
    return float(expectation(state, m)), float(success_probability(state, solutions))


class _Objective:
    """E_p as a function of the flat vector (gammas..., betas...), counting calls."""

    def __init__(self, m: IsingModel, budget: int | None = None):
        self.m = m
        self.evals = 0
        self.budget = budget

    def __call__(self, x) -> float:
        if self.budget is not None and self.evals >= self.budget:
            raise _BudgetExhausted
        self.evals += 1
        return float(expectation(run_qaoa(self.m, VariationalParams.from_vector(x)), self.m))


class _BudgetExhausted(Exception):
    pass


def _result(m, x, solutions, evals, t0) -> LevelResult:
    params = VariationalParams.from_vector(x)
    E, F = evaluate(m, params, solutions)
    return LevelResult(params.p, params.gammas, params.betas, E, F, evals, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# landscape
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LandscapeGrid:
    resolution: int
    gamma_axis: np.ndarray
    beta_axis: np.ndarray
    E_values: np.ndarray   # [gamma index, beta index]
    F_values: np.ndarray

    def argmin_E(self) -> tuple[float, float]:
        i, j = np.unravel_index(np.argmin(self.E_values), self.E_values.shape)
        return float(self.gamma_axis[i]), float(self.beta_axis[j])

    def argmax_F(self) -> tuple[float, float]:
        i, j = np.unravel_index(np.argmax(self.F_values), self.F_values.shape)
        return float(self.gamma_axis[i]), float(self.beta_axis[j])

    def rows(self):
        for i, g in enumerate(self.gamma_axis):
            for j, b in enumerate(self.beta_axis):
                yield float(g), float(b), float(self.E_values[i, j]), float(self.F_values[i, j])


def landscape_scan(m: IsingModel, solutions: Sequence[int], resolution: int = 64,
                   workers: int = 1) -> LandscapeGrid:
    """Evaluate E_1 and F_1 on a ``resolution x resolution`` grid over [0, pi]^2."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    axis = np.linspace(0.0, math.pi, resolution)
    plus = prepare_plus(m.n)
    chunk = max(1, BATCH_AMPLITUDES >> m.n)

    def row(gamma):
        base = apply_cost_phase(plus.copy(), gamma, m)
        E = np.empty(resolution)
        F = np.empty(resolution)
        for lo in range(0, resolution, chunk):
            betas = axis[lo:lo + chunk]
            states = apply_mixer(np.tile(base, (len(betas), 1)), betas)
            E[lo:lo + len(betas)] = expectation(states, m)
            F[lo:lo + len(betas)] = success_probability(states, solutions)
        return E, F

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(row, axis))
    else:
        rows = [row(g) for g in axis]
    E = np.array([r[0] for r in rows])
    F = np.array([r[1] for r in rows])
    return LandscapeGrid(resolution, axis, axis.copy(), E, F)


# ---------------------------------------------------------------------------
# multistart projected BFGS
# ---------------------------------------------------------------------------

def fd_gradient(f, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central finite-difference gradient."""
    g = np.empty_like(x)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = step
        g[k] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def _projected(g, x, lower, upper):
    """Gradient with components pushing out of the box removed."""
    out = g.copy()
    out[(x <= lower) & (g > 0)] = 0.0
    out[(x >= upper) & (g < 0)] = 0.0
    return out


def projected_bfgs(f, x0, lower: float = 0.0, upper: float = math.pi, max_iter: int = 500):
    """Quasi-Newton descent kept inside a box by projection.

    Stops when a full quasi-Newton step changes ``f`` by less than
    ``FUNCTION_TOL`` at a point whose projected gradient is below ``GRAD_TOL``,
    or when the projected step is shorter than ``STEP_TOL``.
    Returns ``(x, f(x))``.
    """
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    fx = f(x)
    g = fd_gradient(f, x)
    H = np.eye(len(x))
    for _ in range(max_iter):
        d = -H @ g
        if g @ d >= 0:
            H = np.eye(len(x))
            d = -g
        alpha = 1.0
        while True:
            x_new = np.clip(x + alpha * d, lower, upper)
            s = x_new - x
            f_new = f(x_new)
            if f_new <= fx + 1e-4 * (g @ s) or np.linalg.norm(s) < STEP_TOL:
                break
            alpha *= 0.5
        if np.linalg.norm(s) < STEP_TOL:
            if not np.allclose(H, np.eye(len(x))):
                H = np.eye(len(x))
                continue
            if f_new < fx:
                x, fx = x_new, f_new
            break
        df = fx - f_new
        x, fx = x_new, f_new
        g_new = fd_gradient(f, x)
        # a small decrease only signals convergence after an unshortened step at a flat point
        if (abs(df) < FUNCTION_TOL and alpha == 1.0
                and np.linalg.norm(_projected(g_new, x, lower, upper)) < GRAD_TOL):
            break
        y = g_new - g
        g = g_new
        sy = s @ y
        if sy > 1e-12:
            rho = 1.0 / sy
            I = np.eye(len(x))
            H = (I - rho * np.outer(s, y)) @ H @ (I - rho * np.outer(y, s)) + rho * np.outer(s, s)
    return x, fx


def _pick_best(candidates):
    """Lowest E; ties (within TIE_TOL) go to the lexicographically smallest vector."""
    best_f = min(f for _, f in candidates)
    tied = [tuple(x) for x, f in candidates if f <= best_f + TIE_TOL]
    return np.array(min(tied))


def multistart_optimize(m: IsingModel, solutions: Sequence[int], p: int, n_starts: int = 4000,
                        seed: int = 0, starts=None, workers: int = 1) -> LevelResult:
    """Best of many projected-BFGS descents from uniform random points in [0, pi]^{2p}.

    ``starts`` (shape ``(k, 2p)``, gammas then betas) replaces the random draw.
    """
    if p < 1:
        raise ValueError("QAOA level p must be at least 1")
    t0 = time.perf_counter()
    if starts is None:
        if n_starts < 1:
            raise ValueError("n_starts must be at least 1")
        starts = np.random.default_rng(seed).uniform(0.0, math.pi, size=(n_starts, 2 * p))
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    if starts.shape[1] != 2 * p:
        raise ValueError(f"start points must have length {2 * p}")

    def descend(x0):
        obj = _Objective(m)
        x, fx = projected_bfgs(obj, x0)
        return x, fx, obj.evals

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            runs = list(pool.map(descend, starts))
    else:
        runs = [descend(x0) for x0 in starts]
    best = _pick_best([(x, fx) for x, fx, _ in runs])
    return _result(m, best, solutions, sum(e for *_, e in runs), t0)


# ---------------------------------------------------------------------------
# Nelder-Mead
# ---------------------------------------------------------------------------

def nelder_mead(m: IsingModel, solutions: Sequence[int], start: VariationalParams,
                max_evals: int | None = None, max_iter: int | None = None,
                xtol: float = 1e-6, ftol: float = 1e-6) -> LevelResult:
    """Nelder-Mead on E_p with hard caps of 60p evaluations and 60p iterations.

    Coefficients: reflection 1, expansion 2, contraction 0.5, shrink 0.5.
    The initial simplex is ``start`` plus one vertex per coordinate offset by 0.05.
    """
    t0 = time.perf_counter()
    p = start.p
    max_evals = 60 * p if max_evals is None else max_evals
    max_iter = 60 * p if max_iter is None else max_iter
    f = _Objective(m, budget=max_evals)
    x0 = start.as_vector()
    dim = len(x0)

    simplex = [x0]
    for k in range(dim):
        v = x0.copy()
        v[k] += 0.05
        simplex.append(v)
    values: list[float] = []
    try:
        for v in simplex:
            values.append(f(v))
        sim = np.array(simplex)
        fs = np.array(values)
        it = 0
        while it < max_iter:
            order = np.argsort(fs, kind="stable")
            sim, fs = sim[order], fs[order]
            if (np.max(np.abs(sim[1:] - sim[0])) <= xtol
                    and np.max(np.abs(fs[1:] - fs[0])) <= ftol):
                break
            it += 1
            centroid = sim[:-1].mean(axis=0)
            xr = centroid + (centroid - sim[-1])
            fr = f(xr)
            if fr < fs[0]:
                xe = centroid + 2.0 * (centroid - sim[-1])
                fe = f(xe)
                if fe < fr:
                    sim[-1], fs[-1] = xe, fe
                else:
                    sim[-1], fs[-1] = xr, fr
            elif fr < fs[-2]:
                sim[-1], fs[-1] = xr, fr
            else:
                if fr < fs[-1]:
                    xc = centroid + 0.5 * (xr - centroid)
                    fc = f(xc)
                    accept = fc <= fr
                else:
                    xc = centroid + 0.5 * (sim[-1] - centroid)
                    fc = f(xc)
                    accept = fc < fs[-1]
                if accept:
                    sim[-1], fs[-1] = xc, fc
                else:
                    for k in range(1, len(sim)):
                        sim[k] = sim[0] + 0.5 * (sim[k] - sim[0])
                        fs[k] = f(sim[k])
    except _BudgetExhausted:
        pass
    if len(values) < len(simplex):
        # budget smaller than the initial simplex
        sim = np.array(simplex[:len(values)])
        fs = np.array(values)
    best = sim[int(np.argmin(fs))]
    return _result(m, best, solutions, f.evals, t0)


# ---------------------------------------------------------------------------
# INTERP warm start
# ---------------------------------------------------------------------------

def _interp(values: Sequence[float]) -> list[float]:
    p = len(values)
    padded = [0.0, *values, 0.0]
    return [((i - 1) / p) * padded[i - 1] + ((p - i + 1) / p) * padded[i] for i in range(1, p + 2)]


def interp_start(prev: VariationalParams) -> VariationalParams:
    """Level p+1 starting point by linear interpolation of the level-p optimum."""
    if prev.p < 1:
        raise ValueError("need at least one level to interpolate from")
    return VariationalParams(tuple(_interp(prev.gammas)), tuple(_interp(prev.betas)))


def interp_pipeline(m: IsingModel, solutions: Sequence[int], p_max: int,
                    base: LevelResult) -> OptimizationTrace:
    """From a p=1 optimum, alternate INTERP and Nelder-Mead up to ``p_max``."""
    if base.p != 1:
        raise ValueError("the pipeline starts from a p=1 result")
    if p_max < 1:
        raise ValueError("p_max must be at least 1")
    trace = [base]
    for _ in range(2, p_max + 1):
        trace.append(nelder_mead(m, solutions, interp_start(trace[-1].params)))
    return trace
