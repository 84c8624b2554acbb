"""Coefficient conditioning for QUBOs sent to noisy analog hardware.

Two steps: scale Q so its largest magnitude does not exceed ``t_high``, then
zero every coefficient whose scaled magnitude is below ``10**t_low``. The
pre-processing loss (PPL) measures how much the exact optimum of the conditioned
problem loses when scored on the original Q.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Callable

import numpy as np

from .qubo import QuboProblem, qubo_energy

__all__ = [
    "PreprocessConfig",
    "PreprocessReport",
    "DegenerateReferenceError",
    "scale_factor",
    "preprocess",
    "zeroed_mask",
    "ppl",
]


class DegenerateReferenceError(ZeroDivisionError):
    """The original optimum energy is zero, so PPL is undefined."""


@dataclass(frozen=True)
class PreprocessConfig:
    t_high: float = 6.0
    t_low: float = -2.0  # -inf disables elimination

    def __post_init__(self) -> None:
        if not self.t_high > 0:
            raise ValueError(f"t_high must be positive, got {self.t_high}")
        if not 10.0**self.t_low < self.t_high:
            raise ValueError(f"10**t_low must be below t_high (t_low={self.t_low}, t_high={self.t_high})")

    @property
    def threshold(self) -> float:
        return 0.0 if self.t_low == -math.inf else 10.0**self.t_low


@dataclass(frozen=True)
class PreprocessReport:
    scale_factor: float
    zeroed_count: int
    q_max_before: float
    q_max_after: float
    all_zero: bool = False
    ppl: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def scale_factor(q_max: float, t_high: float) -> float:
    if q_max < 0:
        raise ValueError("q_max must be non-negative")
    return 1.0 if q_max <= t_high else t_high / q_max


def zeroed_mask(Q: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """Boolean mask of nonzero entries the elimination step removes."""
    Q = np.triu(Q)
    scaled = Q * scale_factor(float(np.max(np.abs(Q), initial=0.0)), cfg.t_high)
    return (scaled != 0) & (np.abs(scaled) < cfg.threshold)


def preprocess(p: QuboProblem, cfg: PreprocessConfig = PreprocessConfig()) -> tuple[QuboProblem, PreprocessReport]:
    """Scale, then drop small coefficients; the offset is scaled with Q."""
    Q = np.triu(p.Q)
    q_max = float(np.max(np.abs(Q), initial=0.0))
    sf = scale_factor(q_max, cfg.t_high)
    scaled = Q * sf
    mask = (scaled != 0) & (np.abs(scaled) < cfg.threshold)
    scaled[mask] = 0.0
    out = replace(p, Q=scaled, offset=p.offset * sf)
    q_after = float(np.max(np.abs(scaled), initial=0.0))
    report = PreprocessReport(
        scale_factor=sf,
        zeroed_count=int(mask.sum()),
        q_max_before=q_max,
        q_max_after=q_after,
        all_zero=bool(q_after == 0.0),
    )
    return out, report


def ppl(
    original: QuboProblem,
    pre: QuboProblem,
    exact_solver: Callable[[QuboProblem], np.ndarray] | None = None,
) -> float:
    """Relative loss ``|E(q_pre*) - E(q*)| / |E(q*)|`` with energies on the original Q.

    ``exact_solver`` maps a problem to a minimising bit vector; it defaults to
    exhaustive enumeration. Energies exclude the constant offset.
    """
    if original.n_vars != pre.n_vars:
        raise ValueError("problems must share n_vars")
    if exact_solver is None:
        from .solvers.brute import brute_force_argmin

        exact_solver = brute_force_argmin
    q_star = exact_solver(original)
    q_pre = exact_solver(pre)
    e_star = qubo_energy(original.Q, q_star)
    e_pre = qubo_energy(original.Q, q_pre)
    if e_star == 0.0:
        raise DegenerateReferenceError("degenerate reference energy (E(q*) = 0)")
    # q* also minimises the conditioned problem (up to rounding): no loss,
    # whichever tie the solver returned
    tol = 1e-12 * float(np.abs(pre.Q).sum())
    if qubo_energy(pre.Q, q_star) <= qubo_energy(pre.Q, q_pre) + tol:
        return 0.0
    return abs(e_pre - e_star) / abs(e_star)
