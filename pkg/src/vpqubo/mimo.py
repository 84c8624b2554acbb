"""Multi-user MIMO downlink model used by vector perturbation precoding.

The base station has ``n_t`` antennas and serves ``n_r`` single-antenna users.
User data ``u`` is perturbed by ``tau * v`` with ``v`` a vector of Gaussian
integers, precoded with the zero-forcing matrix ``P = H^H (H H^H)^-1`` and
normalised by the transmit power scaling ``P_t = ||P (u + tau v)||^2``.
Receivers undo the perturbation with a centred modulo-``tau`` operation.

QAM constellations use odd-integer coordinates (spacing 2), so ``tau`` and the
perturbation lattice stay integer exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "IllConditionedChannelError",
    "DegenerateTransmitError",
    "ChannelInstance",
    "Constellation",
    "constellation",
    "zf_precoder",
    "channel_from_matrix",
    "generate_channel",
    "vpp_objective",
    "zf_power",
    "mod_tau",
    "transmit",
    "receive_decode",
    "noise_variance",
    "ebn0_db",
    "ber",
    "CONDITION_LIMIT",
]

#: Channels whose Gram matrix ``H H^H`` has a larger condition number are rejected.
CONDITION_LIMIT = 1e12


class IllConditionedChannelError(ValueError):
    """Raised when ``H H^H`` is numerically singular."""


class DegenerateTransmitError(ValueError):
    """Raised when the precoded vector has zero power."""


@dataclass(frozen=True)
class ChannelInstance:
    """A downlink channel ``H`` (n_r x n_t) with its zero-forcing precoder ``P``."""

    H: np.ndarray
    P: np.ndarray

    @property
    def n_r(self) -> int:
        return self.H.shape[0]

    @property
    def n_t(self) -> int:
        return self.H.shape[1]


def _gray(n: int) -> int:
    return n ^ (n >> 1)


@dataclass(frozen=True)
class Constellation:
    """Square Gray-mapped QAM alphabet (or BPSK) with odd-integer coordinates.

    Symbols are indexed so that ``bits_per_symbol`` bits map to one point: the
    first half of the bits select the in-phase level and the second half the
    quadrature level, each through a binary-reflected Gray code. BPSK carries
    one bit on the real axis only.
    """

    name: str
    levels: int  # PAM levels per real dimension
    complex_valued: bool
    points: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        amps = self.pam_levels()
        if self.complex_valued:
            pts = (amps[:, None] + 1j * amps[None, :]).ravel()
        else:
            pts = amps.astype(complex)
        object.__setattr__(self, "points", pts)

    def pam_levels(self) -> np.ndarray:
        return np.arange(-(self.levels - 1), self.levels, 2, dtype=float)

    @property
    def bits_per_dim(self) -> int:
        return int(np.log2(self.levels))

    @property
    def bits_per_symbol(self) -> int:
        return self.bits_per_dim * (2 if self.complex_valued else 1)

    @property
    def order(self) -> int:
        return 2**self.bits_per_symbol

    @property
    def delta(self) -> float:
        """Nearest-neighbour spacing."""
        return 2.0

    @property
    def c_max(self) -> float:
        """Largest per-dimension amplitude of the alphabet.

        The modulo is applied to real and imaginary parts separately, so the
        relevant extent is per dimension rather than the complex magnitude.
        """
        return float(self.levels - 1)

    @property
    def tau(self) -> float:
        return 2.0 * (self.c_max + self.delta / 2.0)

    @property
    def average_energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    # -- bit mapping ---------------------------------------------------------
    def _pam_from_bits(self, bits: np.ndarray) -> np.ndarray:
        # bits: (..., bits_per_dim), MSB first, interpreted as a Gray code word
        b = bits.astype(np.int64)
        binary = np.zeros(b.shape[:-1], dtype=np.int64)
        acc = np.zeros(b.shape[:-1], dtype=np.int64)
        for i in range(b.shape[-1]):
            acc = acc ^ b[..., i]
            binary = (binary << 1) | acc
        return 2.0 * binary - (self.levels - 1)

    def _bits_from_pam_index(self, idx: np.ndarray) -> np.ndarray:
        g = np.asarray(idx, dtype=np.int64) ^ (np.asarray(idx, dtype=np.int64) >> 1)
        shifts = np.arange(self.bits_per_dim - 1, -1, -1)
        return ((g[..., None] >> shifts) & 1).astype(np.uint8)

    def modulate(self, bits: np.ndarray) -> np.ndarray:
        """Map a flat bit array (length multiple of bits_per_symbol) to symbols."""
        bits = np.asarray(bits, dtype=np.uint8).reshape(-1, self.bits_per_symbol)
        k = self.bits_per_dim
        re = self._pam_from_bits(bits[:, :k])
        if not self.complex_valued:
            return re.astype(complex)
        im = self._pam_from_bits(bits[:, k:])
        return re + 1j * im

    def _slice_dim(self, x: np.ndarray) -> np.ndarray:
        # boundaries sit on even integers; a value on a boundary goes to the lower level
        idx = np.ceil((x + self.levels) / 2.0) - 1
        return np.clip(idx, 0, self.levels - 1).astype(np.int64)

    def slice(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest-point decisions and demapped bits for received samples ``z``."""
        z = np.asarray(z, dtype=complex)
        amps = self.pam_levels()
        i_re = self._slice_dim(z.real)
        bits_re = self._bits_from_pam_index(i_re)
        if not self.complex_valued:
            return amps[i_re].astype(complex), bits_re.reshape(-1)
        i_im = self._slice_dim(z.imag)
        bits_im = self._bits_from_pam_index(i_im)
        symbols = amps[i_re] + 1j * amps[i_im]
        bits = np.concatenate([bits_re, bits_im], axis=-1)
        return symbols, bits.reshape(-1)

    def random_symbols(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``n`` symbols uniformly; returns ``(symbols, source_bits)``."""
        bits = rng.integers(0, 2, size=n * self.bits_per_symbol, dtype=np.uint8)
        return self.modulate(bits), bits


_CONSTELLATIONS = {
    "BPSK": (2, False),
    "QPSK": (2, True),
    "16QAM": (4, True),
    "64QAM": (8, True),
}


def constellation(name: str) -> Constellation:
    """Look up one of ``BPSK``, ``QPSK``, ``16QAM``, ``64QAM`` (case-insensitive)."""
    key = name.upper().replace("-", "")
    if key not in _CONSTELLATIONS:
        raise ValueError(f"unknown modulation {name!r}; choose from {sorted(_CONSTELLATIONS)}")
    levels, cplx = _CONSTELLATIONS[key]
    return Constellation(key, levels, cplx)


def zf_precoder(H: np.ndarray) -> np.ndarray:
    """Right pseudo-inverse ``H^H (H H^H)^-1``.

    Raises
    ------
    IllConditionedChannelError
        If ``cond(H H^H)`` exceeds :data:`CONDITION_LIMIT`.
    """
    H = np.asarray(H, dtype=complex)
    gram = H @ H.conj().T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise IllConditionedChannelError(f"ill-conditioned channel (cond(HH^H) = {cond:.3g})")
    # (HH^H)^-1 H, conjugate-transposed; HH^H is Hermitian
    return np.linalg.solve(gram, H).conj().T


def channel_from_matrix(H) -> ChannelInstance:
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    n_r, n_t = H.shape
    if n_r > n_t:
        raise ValueError(f"need n_r <= n_t, got n_r={n_r}, n_t={n_t}")
    if not np.all(np.isfinite(H)):
        raise ValueError("channel has non-finite entries")
    return ChannelInstance(H=H, P=zf_precoder(H))


def generate_channel(n_t: int, n_r: int, rng: np.random.Generator) -> ChannelInstance:
    """Draw an i.i.d. CN(0, 1) Rayleigh channel and its ZF precoder.

    Ill-conditioned draws raise :class:`IllConditionedChannelError`; the caller
    decides whether to redraw.
    """
    if not 1 <= n_r <= n_t:
        raise ValueError(f"need 1 <= n_r <= n_t, got n_r={n_r}, n_t={n_t}")
    H = (rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t))) / np.sqrt(2.0)
    return ChannelInstance(H=H, P=zf_precoder(H))


def _check_dims(ch: ChannelInstance, *vectors: np.ndarray) -> None:
    for x in vectors:
        if np.shape(x) != (ch.n_r,):
            raise ValueError(f"expected vector of length {ch.n_r}, got shape {np.shape(x)}")


def vpp_objective(ch: ChannelInstance, cons: Constellation, u, v) -> float:
    """Transmit power scaling ``||P (u + tau v)||^2``."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    _check_dims(ch, u, v)
    x = ch.P @ (u + cons.tau * v)
    return float(np.real(np.vdot(x, x)))


def zf_power(ch: ChannelInstance, u) -> float:
    """``||P u||^2``: the objective at ``v = 0``."""
    x = ch.P @ np.asarray(u, dtype=complex)
    return float(np.real(np.vdot(x, x)))


def noise_variance(snr_db: float) -> float:
    """Per-antenna complex noise variance for a unit-power transmit vector."""
    return float(10.0 ** (-snr_db / 10.0))


def ebn0_db(snr_db: float, cons: Constellation) -> float:
    return float(snr_db - 10.0 * np.log10(cons.bits_per_symbol))


def transmit(
    ch: ChannelInstance,
    cons: Constellation,
    u,
    v,
    snr_db: float,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, float]:
    """Send ``d = u + tau v`` through the channel.

    Returns the received vector ``y = H P d / sqrt(P_t) + n`` and ``P_t``. With
    ``snr_db = inf`` (or ``rng=None``) no noise is added.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    _check_dims(ch, u, v)
    if np.isnan(snr_db) or snr_db == -np.inf:
        raise ValueError(f"invalid snr_db {snr_db}")
    d = u + cons.tau * v
    x = ch.P @ d
    p_t = float(np.real(np.vdot(x, x)))
    if p_t == 0.0:
        raise DegenerateTransmitError("degenerate transmit vector (P_t = 0)")
    y = ch.H @ x / np.sqrt(p_t)
    if rng is not None and np.isfinite(snr_db):
        sigma = np.sqrt(noise_variance(snr_db) / 2.0)
        n = rng.standard_normal(ch.n_r) + 1j * rng.standard_normal(ch.n_r)
        y = y + sigma * n
    return y, p_t


def mod_tau(x, tau: float) -> np.ndarray:
    """Centred modulo into ``[-tau/2, tau/2)``, real and imaginary parts separately."""
    x = np.asarray(x)

    def _m(a):
        return a - tau * np.floor((a + tau / 2.0) / tau)

    if np.iscomplexobj(x):
        return _m(x.real) + 1j * _m(x.imag)
    return _m(x)


def receive_decode(y, p_t: float, cons: Constellation) -> tuple[np.ndarray, np.ndarray]:
    """Undo power scaling, reduce modulo ``tau`` and slice to the alphabet."""
    if not p_t > 0:
        raise ValueError(f"p_t must be positive, got {p_t}")
    z = mod_tau(np.sqrt(p_t) * np.asarray(y, dtype=complex), cons.tau)
    return cons.slice(z)


def ber(records: Sequence) -> float:
    """Total bit errors over total bits for objects with ``bit_errors``/``bits``."""
    if len(records) == 0:
        raise ValueError("ber() needs at least one trial record")
    errors = sum(int(r.bit_errors) for r in records)
    bits = sum(int(r.bits) for r in records)
    if bits == 0:
        raise ValueError("records carry no bits")
    return errors / bits
