"""QUBO and Ising forms of the perturbation search.

Every real and imaginary part of the perturbation is written with ``t + 1``
binary variables,

    a = sum_{m=1..t} 2^(m-1) q_m - 2^t q_{t+1},

which covers the integers ``[-2^t, 2^t - 1]`` exactly once each. Substituting
this into ``||P (u + tau v)||^2`` gives a quadratic in the bits. Variables are
ordered user-major, then real before imaginary, then bit position.

Q matrices are upper triangular: linear terms on the diagonal, pair terms above
it. The ``offset`` carries the bit-independent part of the objective.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .mimo import ChannelInstance, Constellation

__all__ = [
    "VarInfo",
    "QuboProblem",
    "IsingProblem",
    "bits_to_integer",
    "integer_to_bits",
    "bit_weights",
    "build_qubo",
    "decode_bits",
    "perturbation_weights",
    "encode_perturbation",
    "qubo_energy",
    "ising_energy",
    "qubo_to_ising",
    "ising_to_qubo",
    "logical_qubit_count",
    "real_stack",
    "write_qubo",
    "read_qubo",
]


class VarInfo(NamedTuple):
    user: int
    imag: bool
    bit: int  # 1..t+1; t+1 is the sign bit


@dataclass(frozen=True)
class QuboProblem:
    """Minimise ``q^T Q q + offset`` over ``q`` in {0,1}^n with upper-triangular Q."""

    Q: np.ndarray
    offset: float = 0.0
    var_map: tuple[VarInfo, ...] | None = None
    t: int | None = None

    @property
    def n_vars(self) -> int:
        return self.Q.shape[0]

    def energy(self, q) -> np.ndarray | float:
        return qubo_energy(self.Q, q) + self.offset


@dataclass(frozen=True)
class IsingProblem:
    """Minimise ``sum h_i s_i + sum_{i<j} J_ij s_i s_j + offset`` over spins."""

    h: np.ndarray
    J: np.ndarray  # upper triangular, zero diagonal
    offset: float = 0.0

    @property
    def n_vars(self) -> int:
        return self.h.shape[0]

    def energy(self, s) -> np.ndarray | float:
        return ising_energy(self.h, self.J, s) + self.offset


def bit_weights(t: int) -> np.ndarray:
    if t < 1:
        raise ValueError(f"bit depth t must be >= 1, got {t}")
    w = 2.0 ** np.arange(t + 1)
    w[t] = -(2.0**t)
    return w


def bits_to_integer(bits: Sequence[int]) -> int:
    """Signed value of ``t + 1`` bits; the last bit carries weight ``-2^t``."""
    bits = [int(b) for b in bits]
    if len(bits) < 2:
        raise ValueError("need at least two bits (t >= 1)")
    t = len(bits) - 1
    return sum(b << m for m, b in enumerate(bits[:t])) - (bits[t] << t)


def integer_to_bits(value: int, t: int) -> tuple[int, ...]:
    if not -(2**t) <= value <= 2**t - 1:
        raise ValueError(f"{value} outside [-2^{t}, 2^{t}-1]")
    sign = 1 if value < 0 else 0
    rest = value + (sign << t)
    return tuple((rest >> m) & 1 for m in range(t)) + (sign,)


def logical_qubit_count(n_r: int, t: int) -> int:
    return 2 * n_r * (t + 1)


def real_stack(M: np.ndarray) -> np.ndarray:
    """Real representation ``[[Re, -Im], [Im, Re]]`` of a complex matrix."""
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


def _var_map(n_r: int, t: int) -> tuple[VarInfo, ...]:
    return tuple(
        VarInfo(k, bool(part), m)
        for k in range(n_r)
        for part in (0, 1)
        for m in range(1, t + 2)
    )


def _expansion_matrix(n_r: int, t: int) -> np.ndarray:
    # maps bits to the stacked integer vector [Re v; Im v]
    w = bit_weights(t)
    B = np.zeros((2 * n_r, logical_qubit_count(n_r, t)))
    for k in range(n_r):
        for part in (0, 1):
            col = (2 * k + part) * (t + 1)
            B[part * n_r + k, col : col + t + 1] = w
    return B


def build_qubo(ch: ChannelInstance, cons: Constellation, u, t: int = 1) -> QuboProblem:
    """QUBO whose energy plus offset equals the VPP objective of the decoded bits."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (ch.n_r,):
        raise ValueError(f"u must have length {ch.n_r}")
    A = cons.tau * real_stack(ch.P)
    p = np.concatenate([(ch.P @ u).real, (ch.P @ u).imag])
    B = _expansion_matrix(ch.n_r, t)
    AB = A @ B
    M = AB.T @ AB
    lin = 2.0 * (AB.T @ p)
    Q = np.triu(2.0 * M, k=1)
    Q[np.diag_indices_from(Q)] = np.diag(M) + lin
    return QuboProblem(Q=Q, offset=float(p @ p), var_map=_var_map(ch.n_r, t), t=t)


def perturbation_weights(var_map: Sequence[VarInfo]) -> np.ndarray:
    """Complex matrix ``W`` (n_vars x n_r) with ``v = q @ W``."""
    n_r = max(vi.user for vi in var_map) + 1
    t = max(vi.bit for vi in var_map) - 1
    W = np.zeros((len(var_map), n_r), dtype=complex)
    for i, vi in enumerate(var_map):
        w = -(2**t) if vi.bit == t + 1 else 2 ** (vi.bit - 1)
        W[i, vi.user] = w * (1j if vi.imag else 1)
    return W


def decode_bits(q, var_map: Sequence[VarInfo]) -> np.ndarray:
    """Perturbation vector(s) encoded by ``q`` (0/1 values, one row per assignment)."""
    q = np.asarray(q)
    if q.shape[-1] != len(var_map):
        raise ValueError(f"got {q.shape[-1]} bits for {len(var_map)} variables")
    return q.astype(float) @ perturbation_weights(var_map)


def encode_perturbation(v, t: int) -> np.ndarray:
    """Inverse of :func:`decode_bits` for the standard variable ordering."""
    bits = []
    for vk in np.asarray(v, dtype=complex):
        for part in (vk.real, vk.imag):
            if part != round(part):
                raise ValueError(f"perturbation entry {vk} is not a Gaussian integer")
            bits.extend(integer_to_bits(int(round(part)), t))
    return np.array(bits, dtype=np.int8)


def qubo_energy(Q: np.ndarray, q) -> np.ndarray | float:
    """``q^T Q q`` for one assignment or a batch (rows)."""
    q = np.asarray(q, dtype=float)
    if q.ndim == 1:
        return float(q @ Q @ q)
    return np.einsum("ij,ij->i", q @ Q, q)


def ising_energy(h: np.ndarray, J: np.ndarray, s) -> np.ndarray | float:
    s = np.asarray(s, dtype=float)
    if s.ndim == 1:
        return float(h @ s + s @ J @ s)
    return s @ h + np.einsum("ij,ij->i", s @ J, s)


def qubo_to_ising(p: QuboProblem) -> IsingProblem:
    """Substitute ``q = (s + 1) / 2``."""
    Q = np.triu(p.Q)
    d = np.diag(Q).copy()
    U = np.triu(Q, k=1)
    J = U / 4.0
    h = d / 2.0 + (U.sum(axis=1) + U.sum(axis=0)) / 4.0
    offset = p.offset + d.sum() / 2.0 + U.sum() / 4.0
    return IsingProblem(h=h, J=J, offset=float(offset))


def ising_to_qubo(p: IsingProblem) -> QuboProblem:
    """Substitute ``s = 2q - 1``."""
    J = np.triu(p.J, k=1)
    Q = 4.0 * J
    diag = 2.0 * p.h - 2.0 * (J.sum(axis=1) + J.sum(axis=0))
    Q[np.diag_indices_from(Q)] = diag
    offset = p.offset - p.h.sum() + J.sum()
    return QuboProblem(Q=Q, offset=float(offset))


def write_qubo(p: QuboProblem, fh=None) -> str:
    """Serialise as ``p qubo <n_vars> <n_terms> <offset>`` then ``i j value`` lines."""
    Q = np.triu(p.Q)
    ii, jj = np.nonzero(Q)
    order = np.lexsort((jj, ii))
    out = io.StringIO()
    out.write(f"p qubo {p.n_vars} {len(order)} {p.offset:.17g}\n")
    for k in order:
        out.write(f"{ii[k]} {jj[k]} {Q[ii[k], jj[k]]:.17g}\n")
    text = out.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def read_qubo(text: str) -> QuboProblem:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("c")]
    head = lines[0].split()
    if head[:2] != ["p", "qubo"] or len(head) != 5:
        raise ValueError(f"bad QUBO header: {lines[0]!r}")
    n, n_terms, offset = int(head[2]), int(head[3]), float(head[4])
    Q = np.zeros((n, n))
    for ln in lines[1:]:
        i, j, val = ln.split()
        i, j = int(i), int(j)
        if i > j:
            raise ValueError(f"term ({i}, {j}) below the diagonal")
        Q[i, j] = float(val)
    if len(lines) - 1 != n_terms:
        raise ValueError(f"header declares {n_terms} terms, found {len(lines) - 1}")
    return QuboProblem(Q=Q, offset=offset)
