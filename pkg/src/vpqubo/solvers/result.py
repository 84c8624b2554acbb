from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..mimo import ChannelInstance, Constellation, vpp_objective, zf_power
from ..qubo import VarInfo, decode_bits


@dataclass(frozen=True)
class SolverRequest:
    """Sampling budget for heuristic solvers.

    ``num_reads`` plays the role of the number of anneals and ``anneal_sweeps``
    the role of the anneal time.
    """

    num_reads: int = 100
    anneal_sweeps: int = 100
    seed: int = 0
    beta_range: tuple[float, float] = (0.1, 10.0)

    def __post_init__(self) -> None:
        if self.num_reads < 1:
            raise ValueError("num_reads must be >= 1")
        if self.anneal_sweeps < 1:
            raise ValueError("anneal_sweeps must be >= 1")


@dataclass(frozen=True)
class SolverResult:
    """Outcome of one solve.

    For QUBO solvers ``all_reads`` holds ``(bits, energy)`` pairs in read order
    and ``best_bits``/``best_energy`` the lowest-energy read. Once a result has
    been tied to a channel (see :func:`select_with_fallback`) ``best_v`` and
    ``best_objective`` hold the chosen perturbation and its transmit power.
    """

    best_bits: np.ndarray | None = None
    best_energy: float | None = None
    best_v: np.ndarray | None = None
    best_objective: float | None = None
    all_reads: list[tuple[np.ndarray, float]] = field(default_factory=list)
    wall_time: float = 0.0
    reads_used: int = 0
    fallback_used: bool = False
    nodes_visited: int | None = None
    broken_chain_fraction: float | None = None
    samples: np.ndarray | None = field(default=None, repr=False)  # reads as one array


def best_read_index(energies: Sequence[float]) -> int:
    """Lowest energy; ties go to the lowest read index."""
    return int(np.argmin(np.asarray(energies, dtype=float)))


def _unique_rows(reads: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if reads.shape[1] <= 62 and np.issubdtype(reads.dtype, np.integer) and reads.min() >= 0 and reads.max() <= 1:
        keys = reads.astype(np.int64) @ (np.int64(1) << np.arange(reads.shape[1], dtype=np.int64))
        _, first = np.unique(keys, return_index=True)
        return reads[first], first
    _, first = np.unique(reads, axis=0, return_index=True)
    return reads[first], first


def select_with_fallback(
    reads,
    ch: ChannelInstance,
    cons: Constellation,
    u,
    var_map: Sequence[VarInfo] | None = None,
    *,
    base: SolverResult | None = None,
) -> SolverResult:
    """Pick the read with the smallest transmit power, or fall back to ZF.

    ``reads`` holds bit vectors (decoded through ``var_map``) or, when
    ``var_map`` is None, perturbation vectors. Every candidate is scored on the
    original objective. If none beats ``||P u||^2`` strictly, ``v = 0`` is
    returned with ``fallback_used`` set.
    """
    reads = np.asarray(reads)
    if reads.size == 0:
        raise ValueError("select_with_fallback needs at least one read")
    reads = np.atleast_2d(reads)
    # score each distinct read once, in order of first occurrence
    uniq, first = _unique_rows(reads)
    order = np.argsort(first)
    uniq, first = uniq[order], first[order]
    candidates = decode_bits(uniq, var_map) if var_map is not None else uniq.astype(complex)
    X = (np.asarray(u, dtype=complex)[None, :] + cons.tau * candidates) @ ch.P.T
    objectives = np.sum(X.real**2 + X.imag**2, axis=1)
    k = best_read_index(objectives)
    v = candidates[k]
    obj = vpp_objective(ch, cons, u, v)
    zf = zf_power(ch, u)
    base = base if base is not None else SolverResult(reads_used=len(reads))
    if not obj < zf:
        return replace(base, best_v=np.zeros(ch.n_r, dtype=complex), best_objective=zf, fallback_used=True)
    return replace(base, best_v=v, best_objective=obj, fallback_used=False)
