"""Annealer hardware constraints: Chimera topology, chains, ranges and control noise.

Qubits of a Chimera ``C_m`` graph are labelled linearly as
``((row * m + col) * 2 + shore) * 4 + k``. Shore 0 qubits couple vertically to
the same ``k`` in the next row, shore 1 qubits horizontally to the next column,
and inside a unit cell every shore-0 qubit couples to every shore-1 qubit.

Dense QUBOs are embedded with the standard triangular clique layout: logical
variable ``i`` (block ``b = i // 4``, index ``k = i % 4``) owns the horizontal
qubits of row ``b`` in columns ``0..b`` and the vertical qubits of column ``b``
in rows ``b..B-1`` where ``B = ceil(n / 4)``. Every chain has ``B + 1`` qubits
and every pair of chains meets in some unit cell.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from .qubo import IsingProblem
from .solvers.anneal import anneal_spins, coupling_graph
from .solvers.result import SolverRequest, SolverResult, best_read_index

__all__ = [
    "HardwareGraph",
    "Embedding",
    "DeviceRanges",
    "IceModel",
    "EmbeddingCapacityError",
    "chimera",
    "clique_embed",
    "tile_embeddings",
    "validate_embedding",
    "chain_strength_for",
    "embed_problem",
    "device_scale",
    "apply_ice",
    "unembed",
    "parallel_capacity",
    "solve_on_hardware_model",
    "write_embedding",
    "read_embedding",
]


class EmbeddingCapacityError(ValueError):
    pass


@dataclass(frozen=True)
class HardwareGraph:
    m: int
    edges: tuple[tuple[int, int], ...]
    _edge_set: frozenset = field(repr=False, compare=False, default=frozenset())

    @property
    def n_qubits(self) -> int:
        return 8 * self.m * self.m

    @property
    def qubits(self) -> range:
        return range(self.n_qubits)

    def linear(self, row: int, col: int, shore: int, k: int) -> int:
        return ((row * self.m + col) * 2 + shore) * 4 + k

    def coords(self, q: int) -> tuple[int, int, int, int]:
        cell, k = divmod(q, 4)
        cell, shore = divmod(cell, 2)
        row, col = divmod(cell, self.m)
        return row, col, shore, k

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self._edge_set

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.qubits)
        g.add_edges_from(self.edges)
        return g


def chimera(m: int) -> HardwareGraph:
    """Chimera graph of ``m x m`` unit cells, each a K_{4,4}."""
    if m < 1:
        raise ValueError("grid size m must be >= 1")

    def lin(r, c, s, k):
        return ((r * m + c) * 2 + s) * 4 + k

    edges = []
    for r in range(m):
        for c in range(m):
            for k0 in range(4):
                for k1 in range(4):
                    edges.append((lin(r, c, 0, k0), lin(r, c, 1, k1)))
                if r + 1 < m:
                    edges.append((lin(r, c, 0, k0), lin(r + 1, c, 0, k0)))
                if c + 1 < m:
                    edges.append((lin(r, c, 1, k0), lin(r, c + 1, 1, k0)))
    edges = tuple(sorted((min(a, b), max(a, b)) for a, b in edges))
    return HardwareGraph(m=m, edges=edges, _edge_set=frozenset(edges))


@dataclass(frozen=True)
class Embedding:
    """Logical variable ``i`` is represented by the physical qubits ``chains[i]``."""

    chains: tuple[tuple[int, ...], ...]
    chain_strength: float = 1.0
    m: int | None = None  # Chimera grid the qubit labels refer to

    @property
    def n_logical(self) -> int:
        return len(self.chains)

    @property
    def qubits(self) -> tuple[int, ...]:
        """Used physical qubits in ascending order (index space of embedded problems)."""
        return tuple(sorted(q for ch in self.chains for q in ch))

    @property
    def n_physical(self) -> int:
        return sum(len(ch) for ch in self.chains)

    def with_chain_strength(self, strength: float) -> "Embedding":
        return Embedding(self.chains, abs(float(strength)), self.m)


def _blocks(n: int) -> int:
    return max(1, math.ceil(n / 4))


def clique_embed(
    n_logical: int,
    g: HardwareGraph,
    chain_strength: float = 1.0,
    *,
    origin: tuple[int, int] = (0, 0),
    rotated: bool = False,
) -> Embedding:
    """Triangular clique embedding of ``K_n`` with chains of ``ceil(n/4) + 1`` qubits.

    ``origin`` shifts the layout by whole unit cells. ``rotated`` turns it by
    180 degrees inside its ``B x (B + 1)`` bounding box, so a plain and a
    rotated tile with the same origin are disjoint. A single variable needs no
    couplers and gets a one-qubit chain.
    """
    if n_logical < 1:
        raise ValueError("need at least one logical variable")
    B = _blocks(n_logical)
    r0, c0 = origin
    width = B + 1 if rotated else B
    if r0 < 0 or c0 < 0 or r0 + B > g.m or c0 + width > g.m:
        need = B + 1 if rotated else B
        raise EmbeddingCapacityError(
            f"K_{n_logical} needs a {need}-cell wide Chimera block at {origin}; grid C_{g.m} is too small "
            f"(minimum grid m = {B})"
        )

    def place(r, c, s, k):
        if rotated:
            r, c = B - 1 - r, B - c
        return g.linear(r0 + r, c0 + c, s, k)

    if n_logical == 1:
        return Embedding(((place(0, 0, 0, 0),),), abs(chain_strength), g.m)
    chains = []
    for i in range(n_logical):
        b, k = divmod(i, 4)
        horiz = [place(b, c, 1, k) for c in range(b + 1)]
        vert = [place(r, b, 0, k) for r in range(b, B)]
        chains.append(tuple(horiz + vert))
    return Embedding(tuple(chains), abs(chain_strength), g.m)


def tile_embeddings(n_logical: int, g: HardwareGraph) -> list[Embedding]:
    """Disjoint clique embeddings laid out by pairing plain and rotated tiles.

    Each ``B x (B + 1)`` block of cells holds two tiles. This is a concrete
    placement, usually below :func:`parallel_capacity`, which counts qubits.
    """
    B = _blocks(n_logical)
    tiles = []
    for r in range(0, g.m - B + 1, B):
        c = 0
        while c + B + 1 <= g.m:
            tiles.append(clique_embed(n_logical, g, origin=(r, c)))
            tiles.append(clique_embed(n_logical, g, origin=(r, c), rotated=True))
            c += B + 1
        if c + B <= g.m:
            tiles.append(clique_embed(n_logical, g, origin=(r, c)))
    return tiles


def parallel_capacity(n_logical: int, g: HardwareGraph) -> int:
    """How many clique-embedded copies fit in the chip's qubit budget.

    Zero when a single tile does not fit the grid.
    """
    if n_logical < 1 or _blocks(n_logical) > g.m:
        return 0
    per_tile = 1 if n_logical == 1 else n_logical * (_blocks(n_logical) + 1)
    return g.n_qubits // per_tile


def validate_embedding(
    e: Embedding, g: HardwareGraph, logical_edges: Iterable[tuple[int, int]] | None = None
) -> list[str]:
    """Problems with ``e`` on ``g``; an empty list means valid.

    Checks that chains are non-empty, on the graph, vertex-disjoint and
    connected, and that every logical edge (default: all pairs) has a coupler
    between the two chains.
    """
    issues = []
    seen: dict[int, int] = {}
    graph = g.to_networkx()
    for i, chain in enumerate(e.chains):
        if not chain:
            issues.append(f"chain {i} is empty")
            continue
        for q in chain:
            if not 0 <= q < g.n_qubits:
                issues.append(f"chain {i} uses qubit {q} outside the graph")
            elif q in seen:
                issues.append(f"qubit {q} shared by chains {seen[q]} and {i}")
            else:
                seen[q] = i
        if all(0 <= q < g.n_qubits for q in chain) and not nx.is_connected(graph.subgraph(chain)):
            issues.append(f"chain {i} is not connected")
    if logical_edges is None:
        n = e.n_logical
        logical_edges = ((i, j) for i in range(n) for j in range(i + 1, n))
    for i, j in logical_edges:
        if _first_coupler(g, e.chains[i], e.chains[j]) is None:
            issues.append(f"no coupler between chains {i} and {j}")
    return issues


def _first_coupler(g: HardwareGraph, a: Sequence[int], b: Sequence[int]):
    best = None
    for p in a:
        for q in b:
            if g.has_edge(p, q):
                pair = (min(p, q), max(p, q))
                if best is None or pair < best:
                    best = pair
    return best


@dataclass(frozen=True)
class DeviceRanges:
    h_range: tuple[float, float] = (-2.0, 2.0)
    j_range: tuple[float, float] = (-2.0, 1.0)
    precision_bits: int | None = None  # None: no coefficient quantisation


@dataclass(frozen=True)
class IceModel:
    sigma_h: float = 0.01
    sigma_j: float = 0.01

    def __post_init__(self) -> None:
        if self.sigma_h < 0 or self.sigma_j < 0:
            raise ValueError("ICE sigmas must be non-negative")


def chain_strength_for(p: IsingProblem, multiplier: float) -> float:
    """``multiplier * J_m`` with ``J_m`` the largest logical coupler magnitude.

    Problems without couplers use the largest bias magnitude instead.
    """
    J_m = float(np.max(np.abs(p.J), initial=0.0))
    if J_m == 0.0:
        J_m = float(np.max(np.abs(p.h), initial=0.0)) or 1.0
    return abs(multiplier) * J_m


def device_scale(h: np.ndarray, J: np.ndarray, ranges: DeviceRanges) -> float:
    """Largest single factor that maps all coefficients into the device ranges."""
    bounds = []
    hmax = float(np.max(np.abs(h), initial=0.0))
    if hmax > 0:
        bounds.append(min(-ranges.h_range[0], ranges.h_range[1]) / hmax)
    jneg = float(np.max(-J, initial=0.0))
    jpos = float(np.max(J, initial=0.0))
    if jneg > 0:
        bounds.append(-ranges.j_range[0] / jneg)
    if jpos > 0:
        bounds.append(ranges.j_range[1] / jpos)
    return min(bounds) if bounds else 1.0


def _quantize(x: np.ndarray, lo: float, hi: float, bits: int) -> np.ndarray:
    step = (hi - lo) / (2**bits - 1)
    q = np.round((x - lo) / step) * step + lo
    return np.where(x == 0, 0.0, np.clip(q, lo, hi))


def embed_problem(p: IsingProblem, e: Embedding, ranges: DeviceRanges | None = DeviceRanges(), g: HardwareGraph | None = None) -> IsingProblem:
    """Physical Ising problem over ``e.qubits`` (in that order).

    Biases are split equally over chain members, each logical coupler sits on
    the lexicographically first physical coupler between its chains, and chain
    couplers get ``-|J_F|``. With ``ranges`` set the whole problem is then
    multiplied by :func:`device_scale`. The offset is chosen so that for
    chain-consistent states the physical energy equals the scaled logical
    energy.
    """
    if e.n_logical < p.n_vars:
        raise ValueError(f"embedding covers {e.n_logical} variables, problem has {p.n_vars}")
    if g is None:
        if e.m is None:
            raise ValueError("embedding does not record its grid; pass g")
        g = chimera(e.m)
    qubits = e.qubits
    index = {q: i for i, q in enumerate(qubits)}
    n = len(qubits)
    h = np.zeros(n)
    J = np.zeros((n, n))
    jf = abs(e.chain_strength)
    chain_edges = 0
    for v in range(p.n_vars):
        chain = e.chains[v]
        for q in chain:
            h[index[q]] += p.h[v] / len(chain)
        for a_pos, a in enumerate(chain):
            for b in chain[a_pos + 1 :]:
                if g.has_edge(a, b):
                    i, j = sorted((index[a], index[b]))
                    J[i, j] = -jf
                    chain_edges += 1
    rows, cols = np.nonzero(np.triu(p.J, k=1))
    for u, v in zip(rows, cols):
        pair = _first_coupler(g, e.chains[u], e.chains[v])
        if pair is None:
            raise ValueError(f"embedding has no coupler between chains {u} and {v}")
        i, j = sorted((index[pair[0]], index[pair[1]]))
        J[i, j] += p.J[u, v]
    offset = p.offset + jf * chain_edges
    scale = 1.0
    if ranges is not None:
        scale = device_scale(h, J, ranges)
        h, J, offset = h * scale, J * scale, offset * scale
        if ranges.precision_bits is not None:
            h = _quantize(h, *ranges.h_range, ranges.precision_bits)
            J = _quantize(J, *ranges.j_range, ranges.precision_bits)
    return IsingProblem(h=h, J=J, offset=float(offset))


def apply_ice(p: IsingProblem, ice: IceModel, rng: np.random.Generator) -> IsingProblem:
    """Add zero-mean Gaussian errors to every nonzero bias and coupler."""
    h = p.h + np.where(p.h != 0, rng.normal(0.0, ice.sigma_h, p.h.shape), 0.0) if ice.sigma_h else p.h.copy()
    J = np.triu(p.J, k=1)
    if ice.sigma_j:
        J = J + np.where(J != 0, rng.normal(0.0, ice.sigma_j, J.shape), 0.0)
    return IsingProblem(h=h, J=J, offset=p.offset)


def unembed(physical_spins, e: Embedding, logical: IsingProblem | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Majority-vote chains back to logical spins.

    ``physical_spins`` holds one row per sample in the order of ``e.qubits``.
    Tied chains are resolved one at a time in variable order, picking the value
    with the lower logical energy given the chains already decided (undecided
    ones count as zero); without a logical problem ties resolve to +1.

    Returns ``(logical_spins, broken_fraction)`` with one entry per sample.
    """
    S = np.atleast_2d(np.asarray(physical_spins, dtype=np.int64))
    index = {q: i for i, q in enumerate(e.qubits)}
    n_log = e.n_logical
    votes = np.zeros((S.shape[0], n_log), dtype=np.int64)
    broken = np.zeros((S.shape[0], n_log), dtype=bool)
    for v, chain in enumerate(e.chains):
        cols = [index[q] for q in chain]
        sub = S[:, cols]
        votes[:, v] = sub.sum(axis=1)
        broken[:, v] = np.any(sub != sub[:, :1], axis=1)
    out = np.sign(votes)
    tied = out == 0
    if tied.any():
        if logical is not None:
            Jsym = np.triu(logical.J, k=1)
            Jsym = Jsym + Jsym.T
            for v in range(n_log):
                rows = tied[:, v]
                if not rows.any():
                    continue
                fld = logical.h[v] + out[rows] @ Jsym[v]
                out[rows, v] = np.where(fld > 0, -1, 1)
        else:
            out[tied] = 1
    frac = broken.mean(axis=1)
    return out.astype(np.int8), frac


def solve_on_hardware_model(
    p: IsingProblem,
    e: Embedding,
    ice: IceModel | None = None,
    req: SolverRequest = SolverRequest(),
    ranges: DeviceRanges | None = DeviceRanges(),
    g: HardwareGraph | None = None,
    rng: np.random.Generator | None = None,
) -> SolverResult:
    """Anneal the embedded problem and map reads back to logical spins.

    Every read sees its own ICE draw. Reads are reported as logical spins with
    their energies on the noise-free logical problem; ``broken_chain_fraction``
    is averaged over reads.
    """
    start = time.perf_counter()
    phys = embed_problem(p, e, ranges, g)
    h_rows = j_rows = None
    if ice is not None and (ice.sigma_h > 0 or ice.sigma_j > 0):
        if rng is None:
            rng = np.random.default_rng(np.random.SeedSequence(req.seed, spawn_key=(1,)))
        rows, cols, *_ = coupling_graph(phys.J)
        base_j = phys.J[rows, cols]
        R = req.num_reads
        h_rows = phys.h[None, :] + np.where(phys.h != 0, rng.normal(0.0, ice.sigma_h, (R, phys.n_vars)), 0.0)
        j_rows = base_j[None, :] + rng.normal(0.0, ice.sigma_j, (R, base_j.size))
    spins = anneal_spins(phys.h, phys.J, req, h_rows=h_rows, j_rows=j_rows)
    logical, frac = unembed(spins, e, p)
    logical = logical[:, : p.n_vars]
    energies = np.atleast_1d(p.energy(logical))
    k = best_read_index(energies)
    return SolverResult(
        best_bits=logical[k],
        best_energy=float(energies[k]),
        all_reads=[(logical[r], float(energies[r])) for r in range(len(logical))],
        wall_time=time.perf_counter() - start,
        reads_used=len(logical),
        broken_chain_fraction=float(frac.mean()),
        samples=logical,
    )


def write_embedding(e: Embedding) -> str:
    return "".join(f"{i}: {' '.join(str(q) for q in chain)}\n" for i, chain in enumerate(e.chains))


def read_embedding(text: str, chain_strength: float = 1.0, m: int | None = None) -> Embedding:
    chains = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        var, _, rest = line.partition(":")
        chains[int(var)] = tuple(int(q) for q in rest.split())
    if sorted(chains) != list(range(len(chains))):
        raise ValueError("embedding file must list variables 0..n-1")
    return Embedding(tuple(chains[i] for i in range(len(chains))), chain_strength, m)
