"""Exhaustive QUBO minimisation for small problems (the exact oracle)."""

from __future__ import annotations

import time

import numpy as np

from ..qubo import QuboProblem
from .result import SolverResult

MAX_BRUTE_VARS = 24
_LOW_BITS = 12


def _bit_table(n: int) -> np.ndarray:
    # row r is the binary expansion of r, most significant bit first
    idx = np.arange(2**n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(float)


def _enumerate_min(Q: np.ndarray) -> tuple[int, float]:
    n = Q.shape[0]
    if n == 0:
        return 0, 0.0
    k = min(n, _LOW_BITS)
    n_hi = n - k
    lo = _bit_table(k)
    Q_ll = Q[n_hi:, n_hi:]
    e_lo = np.einsum("ij,ij->i", lo @ Q_ll, lo)
    if n_hi == 0:
        j = int(np.argmin(e_lo))
        return j, float(e_lo[j])
    Q_hh = Q[:n_hi, :n_hi]
    Q_hl = Q[:n_hi, n_hi:]
    best_idx, best_e = -1, np.inf
    chunk = max(1, 2**22 // 2**k)
    for start in range(0, 2**n_hi, chunk):
        stop = min(start + chunk, 2**n_hi)
        ids = np.arange(start, stop, dtype=np.int64)
        hi = ((ids[:, None] >> np.arange(n_hi - 1, -1, -1)) & 1).astype(float)
        e_hi = np.einsum("ij,ij->i", hi @ Q_hh, hi)
        E = e_hi[:, None] + e_lo[None, :] + (hi @ Q_hl) @ lo.T
        j = int(np.argmin(E))
        if E.flat[j] < best_e:
            best_e = float(E.flat[j])
            best_idx = (start + j // E.shape[1]) * 2**k + j % E.shape[1]
    return best_idx, best_e


def brute_force_argmin(problem: QuboProblem) -> np.ndarray:
    """Minimising assignment; ties go to the lexicographically smallest bit string."""
    n = problem.n_vars
    if n > MAX_BRUTE_VARS:
        raise ValueError(f"brute force limited to {MAX_BRUTE_VARS} variables, got {n}")
    idx, _ = _enumerate_min(np.triu(problem.Q))
    return ((idx >> np.arange(n - 1, -1, -1)) & 1).astype(np.int8)


def solve_brute_force(problem: QuboProblem) -> SolverResult:
    start = time.perf_counter()
    bits = brute_force_argmin(problem)
    energy = float(problem.energy(bits))
    return SolverResult(
        best_bits=bits,
        best_energy=energy,
        all_reads=[(bits, energy)],
        wall_time=time.perf_counter() - start,
        reads_used=1,
    )
