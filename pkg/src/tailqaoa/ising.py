"""Ising cost Hamiltonian for Exact Cover and classical energy evaluation."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .instance import ExactCoverInstance, from_bitstring

#: Largest n accepted by :func:`spectrum`.
SPECTRUM_LIMIT = 25
SNAP_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class IsingModel:
    """Couplings ``J`` (symmetric, zero diagonal), fields ``h`` and a constant.

    ``energy(x) = sum_{r<r'} J[r,r'] s_r s_r' + sum_r h[r] s_r + offset``
    with ``s_r = 2 x_r - 1``.
    """
    n: int
    J: np.ndarray
    h: np.ndarray
    offset: float

    @cached_property
    def energies(self) -> np.ndarray:
        """Energy of every basis state, offset included, snapped to integers."""
        e = self._raw_energies()
        snapped = np.rint(e)
        if np.max(np.abs(e - snapped), initial=0.0) > SNAP_TOL:
            raise ArithmeticError("Ising energies are not integral; model is inconsistent")
        return snapped.astype(np.int64)

    @cached_property
    def energies_float(self) -> np.ndarray:
        return self.energies.astype(np.float64)

    @cached_property
    def phase_levels(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct values of ``energy - offset`` and each basis state's level index."""
        levels, index = np.unique(self.energies, return_inverse=True)
        return levels.astype(float) - self.offset, index.astype(np.intp)

    def _raw_energies(self) -> np.ndarray:
        idx = np.arange(1 << self.n, dtype=np.int64)
        spins = [(((idx >> r) & 1) * 2 - 1).astype(np.float64) for r in range(self.n)]
        e = np.full(1 << self.n, float(self.offset))
        for r in range(self.n):
            if self.h[r] != 0.0:
                e += self.h[r] * spins[r]
            for q in range(r + 1, self.n):
                if self.J[r, q] != 0.0:
                    e += self.J[r, q] * (spins[r] * spins[q])
        return e

    def to_dict(self) -> dict:
        return {"n": self.n, "J": self.J.tolist(), "h": self.h.tolist(), "offset": float(self.offset)}


def build_ising(inst: ExactCoverInstance) -> IsingModel:
    a = inst.incidence().astype(float)
    per_flight = a.sum(axis=1)
    J_raw = 0.5 * a.T @ a
    h = 0.5 * a.T @ (per_flight - 2.0)
    offset = 0.25 * float(np.sum((per_flight - 2.0) ** 2)) + 0.5 * float(np.trace(J_raw))
    J = J_raw.copy()
    np.fill_diagonal(J, 0.0)
    J.setflags(write=False)
    h.setflags(write=False)
    return IsingModel(inst.n, J, h, offset)


def _as_bits(x, n: int) -> list[int]:
    if isinstance(x, str):
        if len(x) != n:
            raise ValueError(f"bitstring has length {len(x)}, expected {n}")
        index = from_bitstring(x)
        return [(index >> r) & 1 for r in range(n)]
    bits = [int(b) for b in x]
    if len(bits) != n:
        raise ValueError(f"bitstring has length {len(bits)}, expected {n}")
    if any(b not in (0, 1) for b in bits):
        raise ValueError("bits must be 0 or 1")
    return bits


def energy(m: IsingModel, x: str | Sequence[int]) -> int:
    """Ising energy of the route selection ``x`` (route-ordered bits)."""
    s = np.array(_as_bits(x, m.n), dtype=float) * 2 - 1
    e = 0.5 * s @ m.J @ s + m.h @ s + m.offset
    snapped = round(e)
    if abs(e - snapped) > SNAP_TOL:
        raise ArithmeticError(f"non-integral energy {e}")
    return int(snapped)


def penalty_energy(inst: ExactCoverInstance, x: str | Sequence[int]) -> int:
    """Sum over flights of (times covered - 1)^2, computed straight from the routes."""
    bits = _as_bits(x, inst.n)
    covered = [0] * inst.n_flights
    for r, route in enumerate(inst.routes):
        if bits[r]:
            for f in route:
                covered[f] += 1
    return sum((c - 1) ** 2 for c in covered)


def spectrum(m: IsingModel, limit: int = SPECTRUM_LIMIT) -> dict[int, int]:
    """Degeneracy of every energy level."""
    if m.n > limit:
        raise ValueError(f"n={m.n} exceeds the exhaustive limit of {limit}")
    values, counts = np.unique(m.energies, return_counts=True)
    return {int(v): int(c) for v, c in zip(values, counts)}
