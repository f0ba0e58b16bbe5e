"""State-vector simulation: QAOA circuits, annealing schedules, Pauli noise.

States are plain complex128 numpy arrays of length ``2**n``; index bit ``r``
is qubit (route) ``r``. Gate functions act in place and return the array.
Most kernels also accept a batch of states with shape ``(..., 2**n)``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .ising import IsingModel

DEFAULT_MAX_QUBITS = 26
#: Upper bound on amplitudes held at once by the batched kernels.
BATCH_AMPLITUDES = 1 << 22


class SimulationError(RuntimeError):
    pass


def max_qubits() -> int:
    """Memory cap on the register size; ``QAOA_MAX_QUBITS`` overrides the default."""
    env = os.environ.get("QAOA_MAX_QUBITS")
    return int(env) if env else DEFAULT_MAX_QUBITS


@dataclass(frozen=True)
class VariationalParams:
    gammas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if len(self.gammas) != len(self.betas):
            raise ValueError("gammas and betas must have the same length")

    @property
    def p(self) -> int:
        return len(self.gammas)

    def as_vector(self) -> np.ndarray:
        return np.array(self.gammas + self.betas)

    @classmethod
    def from_vector(cls, x) -> "VariationalParams":
        x = np.asarray(x, dtype=float)
        p = len(x) // 2
        return cls(tuple(x[:p]), tuple(x[p:]))


@dataclass(frozen=True)
class NoiseConfig:
    """Per-qubit depolarizing error probability ``eta``.

    ``placement="both"`` inserts an error round after every cost and every
    mixer layer (2p rounds); ``"cost"`` only after the cost layers (p rounds).
    """
    eta: float
    trajectories: int = 2000
    seed: int = 0
    placement: str = "both"

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.trajectories < 1:
            raise ValueError("trajectories must be at least 1")
        if self.placement not in ("both", "cost"):
            raise ValueError(f"unknown noise placement {self.placement!r}")


@dataclass(frozen=True)
class AnnealConfig:
    total_time: float
    dt: float = 0.05
    check_convergence: bool = True

    def __post_init__(self):
        if not self.total_time > 0:
            raise ValueError("total_time must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")


def _n_qubits(state: np.ndarray) -> int:
    n = state.shape[-1].bit_length() - 1
    if 1 << n != state.shape[-1]:
        raise SimulationError(f"state length {state.shape[-1]} is not a power of two")
    return n


def _check_dims(state: np.ndarray, m: IsingModel):
    if state.shape[-1] != 1 << m.n:
        raise SimulationError(f"state has {state.shape[-1]} amplitudes, model expects {1 << m.n}")


def prepare_plus(n: int) -> np.ndarray:
    if n < 1:
        raise SimulationError("need at least one qubit")
    if n > max_qubits():
        raise SimulationError(f"{n} qubits exceeds the memory cap of {max_qubits()} "
                              "(set QAOA_MAX_QUBITS to override)")
    return np.full(1 << n, 2.0 ** (-n / 2), dtype=np.complex128)


def _rows(state: np.ndarray) -> np.ndarray:
    if not state.flags.c_contiguous:
        raise SimulationError("state arrays must be C-contiguous")
    return state.reshape(-1, state.shape[-1])


def apply_cost_phase(state: np.ndarray, gamma, m: IsingModel) -> np.ndarray:
    """Multiply amplitude x by exp(-i gamma (E(x) - offset)).

    ``gamma`` is a scalar or has one entry per state in the batch.
    """
    _check_dims(state, m)
    levels, index = m.phase_levels
    gamma = np.asarray(gamma, dtype=float).reshape(-1, 1)
    phases = np.exp(-1j * gamma * levels)
    _kernels.diagonal(_rows(state), phases, index)
    return state


def apply_mixer(state: np.ndarray, beta) -> np.ndarray:
    """Apply exp(-i beta X) to every qubit, one butterfly pass per qubit.

    ``beta`` is a scalar or has one entry per state in the batch.
    """
    n = _n_qubits(state)
    rows = _rows(state)
    beta = np.broadcast_to(np.asarray(beta, dtype=float).ravel(), (rows.shape[0],))
    _kernels.mixer(rows, np.cos(beta), np.sin(beta), n)
    return state


def run_qaoa(m: IsingModel, params: VariationalParams) -> np.ndarray:
    if params.p < 1:
        raise ValueError("QAOA level p must be at least 1")
    state = prepare_plus(m.n)
    for gamma, beta in zip(params.gammas, params.betas):
        apply_cost_phase(state, gamma, m)
        apply_mixer(state, beta)
    return state


def probabilities(state: np.ndarray) -> np.ndarray:
    return state.real ** 2 + state.imag ** 2


def expectation(state: np.ndarray, m: IsingModel):
    """Cost expectation (offset included); batched states give an array."""
    _check_dims(state, m)
    values = _kernels.weighted_norm(_rows(state), m.energies_float)
    return float(values[0]) if state.ndim == 1 else values.reshape(state.shape[:-1])


def success_probability(state: np.ndarray, solutions: Sequence[int]):
    """Total probability on the solution basis states (given as indices)."""
    if len(solutions) == 0:
        raise ValueError("solution list is empty")
    amps = state[..., list(solutions)]
    return np.sum(amps.real ** 2 + amps.imag ** 2, axis=-1)


def cost_histogram(state: np.ndarray, m: IsingModel) -> dict[int, float]:
    """Probability of measuring each energy level of the cost Hamiltonian."""
    _check_dims(state, m)
    levels, index = m.phase_levels
    weights = np.bincount(index, weights=probabilities(state), minlength=len(levels))
    energies = np.rint(levels + m.offset).astype(int)
    return {int(e): float(w) for e, w in zip(energies, weights)}


def sample(state: np.ndarray, shots: int, seed: int) -> np.ndarray:
    """Measure ``shots`` times in the computational basis; returns basis indices."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    probs = probabilities(state)
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    return rng.choice(len(probs), size=shots, p=probs)


# ---------------------------------------------------------------------------
# depolarizing noise by Monte-Carlo trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoisyResult:
    mean: float
    stderr: float
    trajectories: int
    values: np.ndarray = field(repr=False, compare=False, default=None)


def apply_paulis(states: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Apply per-trajectory single-qubit Paulis in place.

    ``states`` has shape ``(B, 2**n)``; ``codes[b, q]`` is 0 (identity),
    1 (X), 2 (Y) or 3 (Z) for qubit ``q`` of trajectory ``b``.
    """
    B = states.shape[0]
    n = _n_qubits(states)
    for q in range(n):
        col = codes[:, q]
        if not col.any():
            continue
        v = states.reshape(B, 1 << (n - q - 1), 2, 1 << q)
        flip = (col == 1) | (col == 2)
        if flip.any():
            v[flip] = v[flip][:, :, ::-1, :]
        y = col == 2
        if y.any():
            # Y = i X Z: after the flip, |0> picks up -i and |1> picks up +i
            v[y, :, 0, :] *= -1j
            v[y, :, 1, :] *= 1j
        z = col == 3
        if z.any():
            v[z, :, 1, :] *= -1
    return states


def run_noisy(m: IsingModel, params: VariationalParams, solutions: Sequence[int],
              cfg: NoiseConfig) -> NoisyResult:
    """Trajectory-averaged success probability under random Pauli errors.

    Each error round gives every qubit X, Y or Z with probability eta/3 each.
    All random draws come from one generator seeded with ``cfg.seed``, so the
    result does not depend on how trajectories are batched.
    """
    if params.p < 1:
        raise ValueError("QAOA level p must be at least 1")
    n, T = m.n, cfg.trajectories
    rounds_per_layer = 2 if cfg.placement == "both" else 1
    n_rounds = rounds_per_layer * params.p
    rng = np.random.default_rng(cfg.seed)
    if cfg.eta > 0:
        hit = rng.random((T, n_rounds, n)) < cfg.eta
        kind = rng.integers(1, 4, size=(T, n_rounds, n), dtype=np.int8)
        codes = np.where(hit, kind, 0).astype(np.int8)
    else:
        codes = np.zeros((T, n_rounds, n), dtype=np.int8)

    values = np.empty(T)
    chunk = max(1, BATCH_AMPLITUDES >> n)
    plus = prepare_plus(n)
    for start in range(0, T, chunk):
        stop = min(T, start + chunk)
        states = np.tile(plus, (stop - start, 1))
        k = 0
        for gamma, beta in zip(params.gammas, params.betas):
            apply_cost_phase(states, gamma, m)
            apply_paulis(states, codes[start:stop, k]); k += 1
            apply_mixer(states, beta)
            if rounds_per_layer == 2:
                apply_paulis(states, codes[start:stop, k]); k += 1
        values[start:stop] = success_probability(states, solutions)
    # shifted mean: identical trajectories give back their common value exactly
    mean = float(values[0] + np.mean(values - values[0]))
    stderr = float(values.std(ddof=1) / math.sqrt(T)) if T > 1 else 0.0
    return NoisyResult(mean, stderr, T, values)


# ---------------------------------------------------------------------------
# quantum annealing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnnealResult:
    success_probability: float
    steps: int
    delta: float | None = None
    converged: bool | None = None


def _anneal_once(m: IsingModel, solutions, total_time: float, dt: float) -> tuple[float, int]:
    steps = max(1, math.ceil(total_time / dt - 1e-9))
    h = total_time / steps
    state = prepare_plus(m.n)
    # Strang step k: cost phase s_k h/2, mixer, cost phase s_k h/2, with s_k the
    # midpoint schedule value; consecutive half phases are merged.
    s = (np.arange(steps) + 0.5) / steps
    pending = 0.0
    for k in range(steps):
        apply_cost_phase(state, pending + 0.5 * s[k] * h, m)
        # driver is -sum X, so exp(-i (1-s) h (-X)) = exp(-i beta X) with beta = -(1-s) h
        apply_mixer(state, -(1.0 - s[k]) * h)
        pending = 0.5 * s[k] * h
    apply_cost_phase(state, pending, m)
    return float(success_probability(state, solutions)), steps


def anneal(m: IsingModel, solutions: Sequence[int], cfg: AnnealConfig) -> AnnealResult:
    """Linear-schedule annealing from |+>^n; returns the final solution overlap.

    With ``cfg.check_convergence`` the run is repeated at ``dt/2`` and the
    result flagged unconverged if the two differ by more than 1e-3.
    """
    if len(solutions) == 0:
        raise ValueError("solution list is empty")
    f, steps = _anneal_once(m, solutions, cfg.total_time, cfg.dt)
    if not cfg.check_convergence:
        return AnnealResult(f, steps)
    f_half, _ = _anneal_once(m, solutions, cfg.total_time, cfg.dt / 2)
    delta = abs(f_half - f)
    return AnnealResult(f, steps, delta, delta <= 1e-3)
