"""Tree searches over the perturbation lattice: sphere encoder and FSE.

Both work on the real-stacked problem ``min ||A x + p||^2`` with
``A = tau * [[Re P, -Im P], [Im P, Re P]]``, ``p = [Re P u; Im P u]`` and
``x = [Re v; Im v]`` restricted to the box ``[-2^t, 2^t - 1]``. A QR
factorisation ``A = Q R`` turns the objective into
``||R (x - c)||^2 + const`` which is searched level by level from the last
coordinate to the first.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..mimo import ChannelInstance, Constellation, vpp_objective, zf_power
from ..qubo import real_stack
from .result import SolverResult


@dataclass(frozen=True)
class _Lattice:
    R: np.ndarray
    center: np.ndarray
    lo: int
    hi: int

    @property
    def dim(self) -> int:
        return self.R.shape[0]


def _lattice(ch: ChannelInstance, cons: Constellation, u, t: int) -> _Lattice:
    u = np.asarray(u, dtype=complex)
    A = cons.tau * real_stack(ch.P)
    Pu = ch.P @ u
    p = np.concatenate([Pu.real, Pu.imag])
    _, R = np.linalg.qr(A)
    # p lies in range(A), so the unconstrained minimiser is the least-squares solution
    center = -np.linalg.lstsq(A, p, rcond=None)[0]
    return _Lattice(R=R, center=center, lo=-(2**t), hi=2**t - 1)


def _to_complex(x: np.ndarray) -> np.ndarray:
    n = x.size // 2
    return x[:n].astype(float) + 1j * x[n:].astype(float)


def _level_center(lat: _Lattice, x: np.ndarray, i: int) -> float:
    R = lat.R
    tail = R[i, i + 1 :] @ (x[i + 1 :] - lat.center[i + 1 :])
    return lat.center[i] - tail / R[i, i]


def _ordered_candidates(lat: _Lattice, ctr: float) -> np.ndarray:
    vals = np.arange(lat.lo, lat.hi + 1)
    return vals[np.lexsort((vals, np.abs(vals - ctr)))]


def solve_sphere_encoder(ch: ChannelInstance, cons: Constellation, u, t: int = 1) -> SolverResult:
    """Exact minimiser of the transmit power over the box, by depth-first search.

    The search radius starts at the zero-forcing metric and shrinks whenever a
    better leaf is found; candidates at each level are visited nearest-first.
    """
    start = time.perf_counter()
    lat = _lattice(ch, cons, u, t)
    n = lat.dim
    R = lat.R
    best_x = np.zeros(n, dtype=np.int64)
    best = float(np.sum((R @ (best_x - lat.center)) ** 2))
    x = np.zeros(n, dtype=np.int64)
    nodes = 0

    # explicit stack of (level, candidate list, position, partial metric above this level)
    def push(level: int, partial: float):
        ctr = _level_center(lat, x, level)
        return [level, _ordered_candidates(lat, ctr), 0, partial, ctr]

    stack = [push(n - 1, 0.0)]
    while stack:
        frame = stack[-1]
        level, cands, pos, partial, ctr = frame
        if pos >= cands.size:
            stack.pop()
            continue
        frame[2] += 1
        val = cands[pos]
        nodes += 1
        metric = partial + (R[level, level] * (val - ctr)) ** 2
        if metric >= best:
            # candidates are sorted by distance, so the rest of this level is worse
            stack.pop()
            continue
        x[level] = val
        if level == 0:
            best = metric
            best_x = x.copy()
        else:
            stack.append(push(level - 1, metric))

    v = _to_complex(best_x)
    return SolverResult(
        best_v=v,
        best_objective=vpp_objective(ch, cons, u, v),
        wall_time=time.perf_counter() - start,
        reads_used=1,
        nodes_visited=nodes,
    )


def full_enumeration_nodes(n_r: int, t: int) -> int:
    """Node count of an unpruned tree over ``2 n_r`` levels of ``2^(t+1)`` values."""
    b = 2 ** (t + 1)
    return sum(b**k for k in range(1, 2 * n_r + 1))


def solve_fse(ch: ChannelInstance, cons: Constellation, u, t: int = 1, breadth: int = 4) -> SolverResult:
    """Breadth-limited search keeping the ``breadth`` best partial paths per level.

    The result never exceeds the zero-forcing power: if the best leaf is not
    strictly better than ``v = 0``, ZF is returned with ``fallback_used`` set.
    """
    if breadth < 1:
        raise ValueError("breadth must be >= 1")
    start = time.perf_counter()
    lat = _lattice(ch, cons, u, t)
    n, R = lat.dim, lat.R
    vals = np.arange(lat.lo, lat.hi + 1)
    paths = np.zeros((1, n), dtype=np.int64)
    metrics = np.zeros(1)
    nodes = 0
    for level in range(n - 1, -1, -1):
        diff = paths[:, level + 1 :] - lat.center[level + 1 :]
        ctr = lat.center[level] - (diff @ R[level, level + 1 :]) / R[level, level]
        inc = (R[level, level] * (vals[None, :] - ctr[:, None])) ** 2
        cand = (metrics[:, None] + inc).ravel()
        nodes += cand.size
        keep = np.argsort(cand, kind="stable")[:breadth]
        parent, choice = np.divmod(keep, vals.size)
        paths = paths[parent].copy()
        paths[:, level] = vals[choice]
        metrics = cand[keep]
    v = _to_complex(paths[0])
    obj = vpp_objective(ch, cons, u, v)
    zf = zf_power(ch, u)
    fallback = not obj < zf
    if fallback:
        v, obj = np.zeros(ch.n_r, dtype=complex), zf
    return SolverResult(
        best_v=v,
        best_objective=obj,
        wall_time=time.perf_counter() - start,
        reads_used=1,
        fallback_used=fallback,
        nodes_visited=nodes,
    )
