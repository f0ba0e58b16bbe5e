"""Exact Cover instances: routes over flights.

Route ``r`` is qubit ``r`` and bit ``r`` of a computational-basis index
(route 0 is the least significant bit).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

#: Exhaustive enumeration is used at or below this many routes, DLX above.
EXHAUSTIVE_LIMIT = 20
#: Default ceiling for :func:`solve_exact`.
ORACLE_LIMIT = 30
#: Rejection rounds for :func:`generate_planted`.
MAX_RESAMPLE_ROUNDS = 1000

Cover = tuple[int, ...]


class InstanceError(ValueError):
    """Raised for malformed or inconsistent instance data."""


class GenerationError(RuntimeError):
    """The planted generator could not make the cover unique."""


@dataclass(frozen=True)
class ExactCoverInstance:
    n_flights: int
    routes: tuple[Cover, ...]
    known_solutions: tuple[Cover, ...] | None = None

    def __post_init__(self):
        _validate(self.n_flights, self.routes, self.known_solutions)

    @property
    def n(self) -> int:
        """Number of routes, i.e. the qubit count."""
        return len(self.routes)

    def incidence(self) -> np.ndarray:
        """Flight-by-route 0/1 matrix ``a[f, r]``."""
        a = np.zeros((self.n_flights, self.n), dtype=np.int64)
        for r, route in enumerate(self.routes):
            a[list(route), r] = 1
        return a

    def to_dict(self) -> dict:
        d = {"n_flights": self.n_flights, "routes": [list(r) for r in self.routes]}
        if self.known_solutions is not None:
            d["known_solutions"] = [list(s) for s in self.known_solutions]
        return d


def make_instance(n_flights: int, routes: Iterable[Iterable[int]],
                  known_solutions: Iterable[Iterable[int]] | None = None) -> ExactCoverInstance:
    """Build an instance from plain nested sequences."""
    routes = tuple(tuple(int(f) for f in r) for r in routes)
    if known_solutions is not None:
        known_solutions = tuple(tuple(sorted(int(i) for i in s)) for s in known_solutions)
    return ExactCoverInstance(int(n_flights), routes, known_solutions)


def _validate(n_flights, routes, known_solutions):
    if not isinstance(n_flights, int) or n_flights < 1:
        raise InstanceError(f"n_flights: expected a positive integer, got {n_flights!r}")
    if len(routes) == 0:
        raise InstanceError("routes: at least one route is required")
    for r, route in enumerate(routes):
        if len(route) == 0:
            raise InstanceError(f"routes[{r}]: empty route")
        seen = set()
        for k, f in enumerate(route):
            if not 0 <= f < n_flights:
                raise InstanceError(f"routes[{r}][{k}]: flight index {f} out of range "
                                    f"[0, {n_flights})")
            if f in seen:
                raise InstanceError(f"routes[{r}][{k}]: duplicate flight {f}")
            seen.add(f)
    if known_solutions is None:
        return
    for s, sol in enumerate(known_solutions):
        for k, r in enumerate(sol):
            if not 0 <= r < len(routes):
                raise InstanceError(f"known_solutions[{s}][{k}]: route index {r} out of range "
                                    f"[0, {len(routes)})")
        if len(set(sol)) != len(sol):
            raise InstanceError(f"known_solutions[{s}]: duplicate route index")
        counts = np.zeros(n_flights, dtype=np.int64)
        for r in sol:
            counts[list(routes[r])] += 1
        if not np.all(counts == 1):
            raise InstanceError(f"known_solutions[{s}]: not an exact cover")


def parse_instance(text: str) -> ExactCoverInstance:
    """Parse the JSON instance format.

    ``{"n_flights": int, "routes": [[int, ...], ...], "known_solutions": [...]}``
    with ``known_solutions`` optional. Errors name the offending location.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"line {exc.lineno} column {exc.colno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(data, dict):
        raise InstanceError("top level: expected a JSON object")
    unknown = set(data) - {"n_flights", "routes", "known_solutions"}
    if unknown:
        raise InstanceError(f"top level: unknown keys {sorted(unknown)}")
    for key in ("n_flights", "routes"):
        if key not in data:
            raise InstanceError(f"top level: missing key {key!r}")
    n_flights = data["n_flights"]
    if isinstance(n_flights, bool) or not isinstance(n_flights, int):
        raise InstanceError(f"n_flights: expected an integer, got {n_flights!r}")
    routes = _int_lists(data["routes"], "routes")
    sols = data.get("known_solutions")
    if sols is not None:
        sols = _int_lists(sols, "known_solutions")
    return make_instance(n_flights, routes, sols)


def _int_lists(value, where):
    if not isinstance(value, list):
        raise InstanceError(f"{where}: expected a list of lists")
    out = []
    for i, item in enumerate(value):
        if not isinstance(item, list):
            raise InstanceError(f"{where}[{i}]: expected a list of integers")
        for k, x in enumerate(item):
            if isinstance(x, bool) or not isinstance(x, int):
                raise InstanceError(f"{where}[{i}][{k}]: expected an integer, got {x!r}")
        out.append(item)
    return out


def dump_instance(inst: ExactCoverInstance) -> str:
    return json.dumps(inst.to_dict(), separators=(", ", ": ")) + "\n"


def load_instance(path) -> ExactCoverInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


# ---------------------------------------------------------------------------
# exact classical oracle
# ---------------------------------------------------------------------------

def solve_exact(inst: ExactCoverInstance, limit: int = ORACLE_LIMIT) -> list[Cover]:
    """All exact covers, each a sorted tuple of route indices, in lexicographic order."""
    if inst.n > limit:
        raise InstanceError(f"{inst.n} routes exceeds the oracle limit of {limit}")
    if inst.n <= EXHAUSTIVE_LIMIT:
        return solve_exhaustive(inst)
    return solve_dlx(inst)


def solve_exhaustive(inst: ExactCoverInstance) -> list[Cover]:
    """Check every one of the 2^n route subsets."""
    n = inst.n
    x = np.arange(1 << n, dtype=np.int64)
    bits = [((x >> r) & 1).astype(np.uint8) for r in range(n)]
    ok = np.ones(1 << n, dtype=bool)
    for f in range(inst.n_flights):
        count = np.zeros(1 << n, dtype=np.uint8)
        for r, route in enumerate(inst.routes):
            if f in route:
                count += bits[r]
        ok &= count == 1
    covers = [tuple(r for r in range(n) if (int(i) >> r) & 1) for i in np.flatnonzero(ok)]
    return sorted(covers)


def solve_dlx(inst: ExactCoverInstance) -> list[Cover]:
    """Knuth's Algorithm X on a dancing-links matrix (flights are columns)."""
    ncol = inst.n_flights
    # node 0 is the root, nodes 1..ncol are column headers
    L = list(range(-1, ncol)); L[0] = ncol
    R = list(range(1, ncol + 2)); R[ncol] = 0
    U = list(range(ncol + 1))
    D = list(range(ncol + 1))
    C = list(range(ncol + 1))
    row_of = [-1] * (ncol + 1)
    size = [0] * (ncol + 1)

    for r, route in enumerate(inst.routes):
        first = None
        for f in sorted(route):
            col = f + 1
            node = len(L)
            C.append(col)
            row_of.append(r)
            U.append(U[col]); D.append(col)
            D[U[col]] = node; U[col] = node
            size[col] += 1
            if first is None:
                L.append(node); R.append(node)
                first = node
            else:
                L.append(L[first]); R.append(first)
                R[L[first]] = node; L[first] = node

    def cover(c):
        R[L[c]] = R[c]; L[R[c]] = L[c]
        i = D[c]
        while i != c:
            j = R[i]
            while j != i:
                D[U[j]] = D[j]; U[D[j]] = U[j]
                size[C[j]] -= 1
                j = R[j]
            i = D[i]

    def uncover(c):
        i = U[c]
        while i != c:
            j = L[i]
            while j != i:
                size[C[j]] += 1
                D[U[j]] = j; U[D[j]] = j
                j = L[j]
            i = U[i]
        R[L[c]] = c; L[R[c]] = c

    found: list[Cover] = []
    partial: list[int] = []

    def search():
        if R[0] == 0:
            found.append(tuple(sorted(partial)))
            return
        c, j = R[0], R[R[0]]
        while j != 0:
            if size[j] < size[c]:
                c = j
            j = R[j]
        if size[c] == 0:
            return
        cover(c)
        r = D[c]
        while r != c:
            partial.append(row_of[r])
            j = R[r]
            while j != r:
                cover(C[j]); j = R[j]
            search()
            j = L[r]
            while j != r:
                uncover(C[j]); j = L[j]
            partial.pop()
            r = D[r]
        uncover(c)

    search()
    return sorted(found)


# ---------------------------------------------------------------------------
# planted-solution generator
# ---------------------------------------------------------------------------

def generate_planted(n_flights: int, n_routes: int, planted_size: int, seed: int,
                     decoy_size: tuple[int, int] | None = None) -> ExactCoverInstance:
    """Random instance whose only exact cover is a planted partition of the flights.

    The flights are split into ``planted_size`` disjoint routes; the other
    ``n_routes - planted_size`` routes are random decoy subsets. Decoy sizes
    are uniform over the planted route sizes unless ``decoy_size`` gives an
    inclusive ``(lo, hi)`` range. Decoy sets that create a second cover are
    resampled, up to ``MAX_RESAMPLE_ROUNDS`` times.
    """
    if planted_size < 1:
        raise InstanceError("planted_size must be at least 1")
    if planted_size > n_routes:
        raise InstanceError(f"planted_size exceeds n_routes ({planted_size} > {n_routes})")
    if n_flights < planted_size:
        raise InstanceError(f"n_flights must be at least planted_size ({n_flights} < {planted_size})")
    if n_routes > ORACLE_LIMIT:
        raise InstanceError(f"n_routes {n_routes} exceeds the oracle limit of {ORACLE_LIMIT}")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_flights)
    cuts = np.sort(rng.choice(np.arange(1, n_flights), size=planted_size - 1, replace=False))
    planted = [tuple(sorted(int(f) for f in part)) for part in np.split(perm, cuts)]
    sizes = [len(p) for p in planted]
    lo, hi = decoy_size if decoy_size is not None else (min(sizes), max(sizes))
    if not 1 <= lo <= hi <= n_flights:
        raise InstanceError(f"decoy size range ({lo}, {hi}) invalid for {n_flights} flights")

    n_decoys = n_routes - planted_size
    for _ in range(MAX_RESAMPLE_ROUNDS):
        decoys = []
        for _ in range(n_decoys):
            k = int(rng.integers(lo, hi + 1))
            decoys.append(tuple(sorted(int(f) for f in rng.choice(n_flights, size=k, replace=False))))
        routes = planted + decoys
        order = rng.permutation(n_routes)
        routes = [routes[i] for i in order]
        where = {int(old): new for new, old in enumerate(order)}
        solution = tuple(sorted(where[i] for i in range(planted_size)))
        candidate = make_instance(n_flights, routes)
        if solve_exact(candidate) == [solution]:
            return make_instance(n_flights, routes, [solution])
    raise GenerationError(f"could not reach a unique cover after {MAX_RESAMPLE_ROUNDS} rounds")


# ---------------------------------------------------------------------------
# route-overlap graph
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemGraph:
    n_vertices: int
    edges: frozenset[tuple[int, int]]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=np.int64)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg


@dataclass(frozen=True)
class ValencyStats:
    mean: float
    std_dev: float


def to_graph(inst: ExactCoverInstance) -> ProblemGraph:
    """Vertices are routes; an edge joins two routes that share a flight."""
    sets = [set(r) for r in inst.routes]
    edges = frozenset((a, b) for a, b in combinations(range(inst.n), 2) if sets[a] & sets[b])
    return ProblemGraph(inst.n, edges)


def valency_stats(g: ProblemGraph) -> ValencyStats:
    if g.n_vertices == 0:
        return ValencyStats(0.0, 0.0)
    deg = g.degrees()
    return ValencyStats(float(deg.mean()), float(deg.std()))


def solution_indices(covers: Sequence[Sequence[int]]) -> list[int]:
    """Basis-state indices of route subsets (route r sets bit r)."""
    return [sum(1 << int(r) for r in cover) for cover in covers]


def to_bitstring(index: int, n: int) -> str:
    """Route-ordered bitstring: character r is the bit of route r."""
    return "".join("1" if (index >> r) & 1 else "0" for r in range(n))


def from_bitstring(bits: str) -> int:
    if any(c not in "01" for c in bits):
        raise ValueError(f"not a bitstring: {bits!r}")
    return sum(1 << r for r, c in enumerate(bits) if c == "1")
