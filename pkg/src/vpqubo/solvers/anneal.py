"""Simulated annealing as a classical stand-in for annealer reads.

Each read starts from uniformly random spins and performs ``anneal_sweeps``
Metropolis sweeps (single-spin flips in fixed index order) while the inverse
temperature rises geometrically across ``beta_range``. Read ``r`` draws all of
its randomness from its own Mersenne Twister stream seeded from ``(seed, r)``,
so the first ``N`` reads of a request are identical whatever ``num_reads`` is.
"""

from __future__ import annotations

import time

import numpy as np
from numba import njit

from ..qubo import IsingProblem, QuboProblem, qubo_to_ising
from .result import SolverRequest, SolverResult, best_read_index

#: Problems up to this size without per-read coefficients use the dense kernel.
DENSE_LIMIT = 64

#: Sweep budgets standing in for annealer anneal times (microseconds). Only the
#: ordering is meaningful; sweeps do not model quantum dynamics.
ANNEAL_TIME_SWEEPS = {1: 10, 10: 100, 100: 1000, 299: 3000}


def sweeps_for_anneal_time(anneal_us: float) -> int:
    """Sweep count for a tabulated anneal time."""
    try:
        return ANNEAL_TIME_SWEEPS[anneal_us]
    except KeyError:
        raise ValueError(f"no sweep budget for {anneal_us} us; choose from {sorted(ANNEAL_TIME_SWEEPS)}") from None


# exp(-x) is exactly zero in double precision beyond this
_NO_ACCEPT = 746.0


@njit(cache=True)
def _anneal_csr(h_rows, j_rows, indptr, nbr, edge, betas, seeds):
    n_reads = seeds.shape[0]
    n = indptr.shape[0] - 1
    spins = np.empty((n_reads, n), dtype=np.int8)
    field = np.empty(n)
    s = np.empty(n)
    for r in range(n_reads):
        np.random.seed(seeds[r])
        h = h_rows[r % h_rows.shape[0]]
        jv = j_rows[r % j_rows.shape[0]]
        for i in range(n):
            s[i] = 1.0 if np.random.random() < 0.5 else -1.0
        for i in range(n):
            f = h[i]
            for p in range(indptr[i], indptr[i + 1]):
                f += jv[edge[p]] * s[nbr[p]]
            field[i] = f
        for k in range(betas.shape[0]):
            beta = betas[k]
            for i in range(n):
                de = -2.0 * s[i] * field[i]
                if de > 0.0:
                    x = beta * de
                    if x >= _NO_ACCEPT or np.random.random() >= np.exp(-x):
                        continue
                s[i] = -s[i]
                two_s = 2.0 * s[i]
                for p in range(indptr[i], indptr[i + 1]):
                    field[nbr[p]] += two_s * jv[edge[p]]
        for i in range(n):
            spins[r, i] = np.int8(s[i])
    return spins


@njit(cache=True)
def _anneal_dense(h, Jsym, betas, seeds):
    # same dynamics and random stream as _anneal_csr, for small dense problems
    n_reads = seeds.shape[0]
    n = h.shape[0]
    spins = np.empty((n_reads, n), dtype=np.int8)
    field = np.empty(n)
    s = np.empty(n)
    for r in range(n_reads):
        np.random.seed(seeds[r])
        for i in range(n):
            s[i] = 1.0 if np.random.random() < 0.5 else -1.0
        for i in range(n):
            f = h[i]
            for j in range(n):
                f += Jsym[i, j] * s[j]
            field[i] = f
        for k in range(betas.shape[0]):
            beta = betas[k]
            for i in range(n):
                de = -2.0 * s[i] * field[i]
                if de > 0.0:
                    x = beta * de
                    if x >= _NO_ACCEPT or np.random.random() >= np.exp(-x):
                        continue
                s[i] = -s[i]
                two_s = 2.0 * s[i]
                for j in range(n):
                    field[j] += two_s * Jsym[i, j]
        for i in range(n):
            spins[r, i] = np.int8(s[i])
    return spins


def coupling_graph(J: np.ndarray):
    """Edge list of the nonzero upper-triangular couplers plus CSR adjacency.

    Returns ``(rows, cols, indptr, nbr, edge)``; ``edge[p]`` is the index into
    the edge list for adjacency entry ``p``.
    """
    rows, cols = np.nonzero(np.triu(J, k=1))
    n = J.shape[0]
    src = np.concatenate([rows, cols])
    dst = np.concatenate([cols, rows])
    eid = np.concatenate([np.arange(rows.size), np.arange(rows.size)])
    order = np.lexsort((dst, src))
    src, dst, eid = src[order], dst[order], eid[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)
    return rows, cols, indptr, dst.astype(np.int64), eid.astype(np.int64)


def read_seeds(seed: int, num_reads: int) -> np.ndarray:
    """Per-read stream seeds; prefix-stable in ``num_reads``."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return rng.integers(0, 2**32, size=num_reads, dtype=np.uint32).astype(np.int64)


def beta_schedule(sweeps: int, beta_range=(0.1, 10.0)) -> np.ndarray:
    if sweeps == 1:
        return np.array([float(beta_range[1])])
    return np.geomspace(beta_range[0], beta_range[1], sweeps)


def anneal_spins(
    h: np.ndarray,
    J: np.ndarray,
    req: SolverRequest,
    *,
    h_rows: np.ndarray | None = None,
    j_rows: np.ndarray | None = None,
) -> np.ndarray:
    """Run ``req.num_reads`` anneals and return the final spins, one row per read.

    ``h_rows`` / ``j_rows`` optionally give per-read coefficients (row ``r``
    used by read ``r``); ``j_rows`` columns follow the edge order of
    :func:`coupling_graph`.
    """
    betas = beta_schedule(req.anneal_sweeps, req.beta_range)
    seeds = read_seeds(req.seed, req.num_reads)
    J = np.triu(np.asarray(J, dtype=float), k=1)
    n = J.shape[0]
    if h_rows is None and j_rows is None and n <= DENSE_LIMIT:
        return _anneal_dense(np.ascontiguousarray(h, dtype=float), J + J.T, betas, seeds)
    rows, cols, indptr, nbr, edge = coupling_graph(J)
    h_rows = np.atleast_2d(np.asarray(h, dtype=float) if h_rows is None else h_rows)
    if j_rows is None:
        j_rows = J[rows, cols][None, :]
    j_rows = np.ascontiguousarray(np.atleast_2d(j_rows), dtype=float)
    if j_rows.shape[1] == 0:
        j_rows = np.zeros((1, 1))
    return _anneal_csr(np.ascontiguousarray(h_rows, dtype=float), j_rows, indptr, nbr, edge, betas, seeds)


def solve_sa(problem: QuboProblem | IsingProblem, req: SolverRequest = SolverRequest()) -> SolverResult:
    """Best of ``req.num_reads`` annealing reads.

    QUBO inputs are annealed in spin form and reported as 0/1 bits with QUBO
    energies (offset included); Ising inputs are reported as spins.
    """
    start = time.perf_counter()
    ising = qubo_to_ising(problem) if isinstance(problem, QuboProblem) else problem
    spins = anneal_spins(ising.h, ising.J, req)
    if isinstance(problem, QuboProblem):
        samples = ((spins + 1) // 2).astype(np.int8)
    else:
        samples = spins
    energies = np.atleast_1d(problem.energy(samples))
    k = best_read_index(energies)
    return SolverResult(
        best_bits=samples[k],
        best_energy=float(energies[k]),
        all_reads=[(samples[r], float(energies[r])) for r in range(len(samples))],
        wall_time=time.perf_counter() - start,
        reads_used=len(samples),
        samples=samples,
    )
