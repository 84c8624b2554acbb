"""Monte Carlo link simulation: SNR sweeps over Rayleigh channels.

Every random draw of a trial comes from its own stream derived from
``(master_seed, snr_index, trial_index, purpose)``. All solvers of a run see
the same channel, data and noise, so their results are paired, and adding a
solver never changes what the others see.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import mimo
from .hardware import (
    DeviceRanges,
    IceModel,
    chain_strength_for,
    chimera,
    clique_embed,
    solve_on_hardware_model,
)
from .preprocess import DegenerateReferenceError, PreprocessConfig, ppl, preprocess
from .qubo import build_qubo, logical_qubit_count, qubo_to_ising
from .solvers import (
    MAX_BRUTE_VARS,
    SOLVER_NAMES,
    SolverRequest,
    brute_force_argmin,
    select_with_fallback,
    solve_fse,
    solve_sa,
    solve_sphere_encoder,
)

log = logging.getLogger(__name__)

__all__ = [
    "ConfigError",
    "HardwareConfig",
    "SimConfig",
    "TrialRecord",
    "SweepResult",
    "run_trial",
    "run_sweep",
    "throughput",
    "summarize",
    "emit_outputs",
    "TRIALS_COLUMNS",
]

_PURPOSE = {"channel": 0, "data": 1, "noise": 2, "solver": 3, "ice": 4}
MAX_CHANNEL_REDRAWS = 100

TRIALS_COLUMNS = (
    "snr_db",
    "trial",
    "p_t",
    "zf_p_t",
    "bit_errors",
    "bits",
    "fallback",
    "wall_time_us",
    "broken_chain_frac",
)


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists ``field: problem`` strings."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class HardwareConfig:
    enabled: bool = False
    grid: int = 16
    jf_mult: float = 1.2
    ice_sigma_h: float = 0.01
    ice_sigma_j: float = 0.01
    precision_bits: int | None = None


@dataclass(frozen=True)
class SimConfig:
    n_t: int = 4
    n_r: int = 4
    modulation: str = "16QAM"
    t_bits: int = 1
    snr_points: tuple[float, ...] = (20.0,)
    trials_per_point: int = 100
    solvers: tuple[str, ...] = ("sa",)
    num_reads: int = 1000
    sweeps: int = 100
    breadth: int = 4
    beta_range: tuple[float, float] = (0.1, 10.0)
    preprocess: PreprocessConfig | None = field(default_factory=PreprocessConfig)
    hw_model: HardwareConfig = field(default_factory=HardwareConfig)
    master_seed: int = 0
    packet_bits: int = 12000
    compute_ppl: bool = False
    record_timing: bool = False

    def errors(self) -> list[str]:
        errs = []
        if not isinstance(self.n_r, int) or self.n_r < 1:
            errs.append("n_r: must be a positive integer")
        if not isinstance(self.n_t, int) or self.n_t < 1:
            errs.append("n_t: must be a positive integer")
        elif isinstance(self.n_r, int) and self.n_r > self.n_t:
            errs.append("n_r: must not exceed n_t")
        try:
            mimo.constellation(self.modulation)
        except ValueError as exc:
            errs.append(f"modulation: {exc}")
        if not isinstance(self.t_bits, int) or self.t_bits < 1:
            errs.append("t_bits: must be an integer >= 1")
        if len(self.snr_points) == 0:
            errs.append("snr_points: must not be empty")
        elif not all(np.isfinite(s) for s in self.snr_points):
            errs.append("snr_points: values must be finite")
        if self.trials_per_point < 1:
            errs.append("trials_per_point: must be >= 1")
        if not self.solvers:
            errs.append("solvers: must not be empty")
        for i, s in enumerate(self.solvers):
            if s not in SOLVER_NAMES:
                errs.append(f"solvers[{i}]: unknown solver {s!r} (choose from {', '.join(SOLVER_NAMES)})")
        if len(set(self.solvers)) != len(self.solvers):
            errs.append("solvers: duplicate names")
        if self.num_reads < 1:
            errs.append("num_reads: must be >= 1")
        if self.sweeps < 1:
            errs.append("sweeps: must be >= 1")
        if self.breadth < 1:
            errs.append("breadth: must be >= 1")
        if not 0 < self.beta_range[0] <= self.beta_range[1]:
            errs.append("beta_range: need 0 < beta_min <= beta_max")
        if self.packet_bits < 1:
            errs.append("packet_bits: must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            errs.append("master_seed: must fit in 64 unsigned bits")
        n_vars = logical_qubit_count(self.n_r, self.t_bits) if isinstance(self.n_r, int) and isinstance(self.t_bits, int) else 0
        if "brute" in self.solvers and n_vars > MAX_BRUTE_VARS:
            errs.append(f"solvers: brute needs <= {MAX_BRUTE_VARS} QUBO variables, config has {n_vars}")
        if self.compute_ppl and n_vars > MAX_BRUTE_VARS:
            errs.append(f"compute_ppl: needs <= {MAX_BRUTE_VARS} QUBO variables, config has {n_vars}")
        hw = self.hw_model
        if hw.enabled:
            if hw.grid < 1:
                errs.append("hw_model.grid: must be >= 1")
            elif math.ceil(n_vars / 4) > hw.grid:
                errs.append(f"hw_model.grid: C_{hw.grid} cannot hold a {n_vars}-variable clique")
            if hw.jf_mult <= 0:
                errs.append("hw_model.jf_mult: must be positive")
            if hw.ice_sigma_h < 0 or hw.ice_sigma_j < 0:
                errs.append("hw_model.ice_sigma: must be non-negative")
        return errs

    def validate(self) -> "SimConfig":
        errs = self.errors()
        if errs:
            raise ConfigError(errs)
        return self

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["snr_points"] = list(self.snr_points)
        d["solvers"] = list(self.solvers)
        d["beta_range"] = list(self.beta_range)
        if self.preprocess is not None and self.preprocess.t_low == -math.inf:
            d["preprocess"]["t_low"] = None
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SimConfig":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([f"{k}: unknown field" for k in unknown])
        errs = []
        if "preprocess" in data and data["preprocess"] is not None:
            pre = dict(data["preprocess"])
            if pre.get("t_low", 0.0) is None:
                pre["t_low"] = -math.inf
            try:
                data["preprocess"] = PreprocessConfig(**pre)
            except (TypeError, ValueError) as exc:
                errs.append(f"preprocess: {exc}")
        if "hw_model" in data:
            try:
                data["hw_model"] = HardwareConfig(**data["hw_model"])
            except TypeError as exc:
                errs.append(f"hw_model: {exc}")
        for key in ("snr_points", "solvers", "beta_range"):
            if key in data:
                data[key] = tuple(data[key])
        if errs:
            raise ConfigError(errs)
        return cls(**data)


@dataclass
class TrialRecord:
    snr_db: float
    trial: int
    channel_seed: int
    chosen_v: np.ndarray
    p_t: float
    zf_p_t: float
    bit_errors: int
    bits: int
    fallback_used: bool
    solver_wall_time: float = 0.0
    broken_chain_fraction: float | None = None
    error_positions: tuple[int, ...] = ()
    channel_redraws: int = 0
    ppl: float | None = None


@dataclass
class SweepResult:
    config: SimConfig
    records: dict[str, list[TrialRecord]]
    summary: dict[str, Any]


def _stream(cfg: SimConfig, snr_index: int, trial: int, purpose: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(cfg.master_seed, spawn_key=(snr_index, trial, _PURPOSE[purpose]))


def _draw_channel(cfg: SimConfig, rng: np.random.Generator) -> tuple[mimo.ChannelInstance, int]:
    for redraws in range(MAX_CHANNEL_REDRAWS):
        try:
            return mimo.generate_channel(cfg.n_t, cfg.n_r, rng), redraws
        except mimo.IllConditionedChannelError:
            log.info("ill-conditioned channel redrawn")
    raise RuntimeError(f"no well-conditioned channel in {MAX_CHANNEL_REDRAWS} draws")


def _solve(name, cfg, ch, cons, u, qubo, pre_qubo, solver_seed, ice_rng):
    """Chosen perturbation for one solver; returns a SolverResult tied to the channel."""
    if name == "zf":
        return select_with_fallback(np.zeros((1, ch.n_r), dtype=complex), ch, cons, u)
    if name == "sphere":
        return solve_sphere_encoder(ch, cons, u, cfg.t_bits)
    if name == "fse":
        return solve_fse(ch, cons, u, cfg.t_bits, cfg.breadth)
    if name == "brute":
        bits = brute_force_argmin(pre_qubo)
        return select_with_fallback(bits[None, :], ch, cons, u, qubo.var_map)
    req = SolverRequest(
        num_reads=cfg.num_reads, anneal_sweeps=cfg.sweeps, seed=solver_seed, beta_range=tuple(cfg.beta_range)
    )
    hw = cfg.hw_model
    if hw.enabled:
        ising = qubo_to_ising(pre_qubo)
        e = clique_embed(ising.n_vars, chimera(hw.grid), chain_strength_for(ising, hw.jf_mult))
        res = solve_on_hardware_model(
            ising,
            e,
            IceModel(hw.ice_sigma_h, hw.ice_sigma_j),
            req,
            DeviceRanges(precision_bits=hw.precision_bits),
            rng=ice_rng,
        )
        bits = (res.samples + 1) // 2
    else:
        res = solve_sa(pre_qubo, req)
        bits = res.samples
    return select_with_fallback(bits, ch, cons, u, qubo.var_map, base=res)


def run_trial(cfg: SimConfig, snr_index: int, trial: int) -> dict[str, TrialRecord]:
    """One channel use at ``cfg.snr_points[snr_index]`` for every configured solver."""
    snr_db = float(cfg.snr_points[snr_index])
    cons = mimo.constellation(cfg.modulation)
    ch_seq = _stream(cfg, snr_index, trial, "channel")
    ch, redraws = _draw_channel(cfg, np.random.default_rng(ch_seq))
    u, source_bits = cons.random_symbols(cfg.n_r, np.random.default_rng(_stream(cfg, snr_index, trial, "data")))
    noise_seq = _stream(cfg, snr_index, trial, "noise")
    solver_seed = int(_stream(cfg, snr_index, trial, "solver").generate_state(1)[0])
    zf_p_t = mimo.zf_power(ch, u)

    needs_qubo = any(s in ("brute", "sa") for s in cfg.solvers) or cfg.compute_ppl
    qubo = pre_qubo = None
    trial_ppl = None
    if needs_qubo:
        qubo = build_qubo(ch, cons, u, cfg.t_bits)
        pre_qubo = preprocess(qubo, cfg.preprocess)[0] if cfg.preprocess is not None else qubo
        if cfg.compute_ppl:
            try:
                trial_ppl = ppl(qubo, pre_qubo)
            except DegenerateReferenceError:
                trial_ppl = None

    out = {}
    for name in cfg.solvers:
        start = time.perf_counter()
        res = _solve(
            name, cfg, ch, cons, u, qubo, pre_qubo, solver_seed,
            np.random.default_rng(_stream(cfg, snr_index, trial, "ice")),
        )
        wall = time.perf_counter() - start
        if not res.best_objective <= zf_p_t:
            raise RuntimeError(f"{name}: transmit power {res.best_objective} exceeds ZF power {zf_p_t}")
        y, p_t = mimo.transmit(ch, cons, u, res.best_v, snr_db, np.random.default_rng(noise_seq))
        _, rx_bits = mimo.receive_decode(y, p_t, cons)
        errors = np.flatnonzero(rx_bits != source_bits)
        out[name] = TrialRecord(
            snr_db=snr_db,
            trial=trial,
            channel_seed=int(ch_seq.generate_state(1)[0]),
            chosen_v=res.best_v,
            p_t=p_t,
            zf_p_t=zf_p_t,
            bit_errors=int(errors.size),
            bits=int(source_bits.size),
            fallback_used=bool(res.fallback_used),
            solver_wall_time=wall,
            broken_chain_fraction=res.broken_chain_fraction,
            error_positions=tuple(int(i) for i in errors),
            channel_redraws=redraws,
            ppl=trial_ppl,
        )
    return out


def _run_chunk(args):
    cfg, jobs = args
    return [(si, ti, run_trial(cfg, si, ti)) for si, ti in jobs]


def run_sweep(cfg: SimConfig, workers: int = 1) -> SweepResult:
    """Run every trial at every SNR point; deterministic given ``cfg``.

    ``workers > 1`` spreads trials over processes; results are re-ordered by
    ``(snr_index, trial)`` so the output does not depend on scheduling.
    """
    cfg.validate()
    jobs = [(si, ti) for si in range(len(cfg.snr_points)) for ti in range(cfg.trials_per_point)]
    if workers > 1:
        chunks = [(cfg, jobs[i::workers]) for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [r for part in pool.map(_run_chunk, chunks) for r in part]
        results.sort(key=lambda r: (r[0], r[1]))
    else:
        results = _run_chunk((cfg, jobs))
    records: dict[str, list[TrialRecord]] = {name: [] for name in cfg.solvers}
    for _, _, per_solver in results:
        for name, rec in per_solver.items():
            records[name].append(rec)
    redraws = sum(r.channel_redraws for r in records[cfg.solvers[0]])
    if redraws:
        log.warning("%d ill-conditioned channels were redrawn", redraws)
    return SweepResult(cfg, records, summarize(cfg, records))


def throughput(records: Sequence[TrialRecord], packet_bits: int = 12000) -> float:
    """Fraction of error-free packets when trial bits are concatenated in order.

    The trailing partial packet is discarded; NaN if not even one packet is
    complete.
    """
    if len(records) == 0:
        raise ValueError("throughput() needs at least one record")
    total = sum(r.bits for r in records)
    n_packets = total // packet_bits
    if n_packets == 0:
        return math.nan
    bad = np.zeros(n_packets, dtype=bool)
    pos = 0
    for r in records:
        for e in r.error_positions:
            k = (pos + e) // packet_bits
            if k < n_packets:
                bad[k] = True
        pos += r.bits
    return float(1.0 - bad.mean())


def _none_if_nan(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


def _point_summary(cfg: SimConfig, recs: Sequence[TrialRecord], cons) -> dict[str, Any]:
    snr = recs[0].snr_db if recs else None
    bits = sum(r.bits for r in recs)
    errors = sum(r.bit_errors for r in recs)
    ppls = [r.ppl for r in recs if r.ppl is not None]
    d = {
        "snr_db": snr,
        "eb_n0_db": mimo.ebn0_db(snr, cons) if snr is not None else None,
        "trials": len(recs),
        "bits": bits,
        "bit_errors": errors,
        "ber": errors / bits if bits else None,
        "throughput": _none_if_nan(throughput(recs, cfg.packet_bits)) if recs else None,
        "mean_p_t": float(np.mean([r.p_t for r in recs])) if recs else None,
        "mean_zf_p_t": float(np.mean([r.zf_p_t for r in recs])) if recs else None,
        "fallback_rate": float(np.mean([r.fallback_used for r in recs])) if recs else None,
        "channel_redraws": sum(r.channel_redraws for r in recs),
    }
    chains = [r.broken_chain_fraction for r in recs if r.broken_chain_fraction is not None]
    if chains:
        d["mean_broken_chain_frac"] = float(np.mean(chains))
    if cfg.compute_ppl:
        d["ppl"] = {
            "count": len(ppls),
            "degenerate": len(recs) - len(ppls),
            "mean": float(np.mean(ppls)) if ppls else None,
            "max": float(np.max(ppls)) if ppls else None,
        }
    if cfg.record_timing and recs:
        d["mean_wall_time_us"] = float(np.mean([r.solver_wall_time for r in recs]) * 1e6)
    return d


def summarize(cfg: SimConfig, records: dict[str, list[TrialRecord]]) -> dict[str, Any]:
    cons = mimo.constellation(cfg.modulation)
    solvers = {}
    for name, recs in records.items():
        points = []
        for snr in cfg.snr_points:
            at = [r for r in recs if r.snr_db == float(snr)]
            points.append(_point_summary(cfg, at, cons) if at else {"snr_db": float(snr), "trials": 0, "bits": 0, "bit_errors": 0})
        solvers[name] = points
    return {
        "config": cfg.to_dict(),
        "seeds": {"master_seed": cfg.master_seed, "stream_key": "(snr_index, trial, purpose)", "purposes": dict(_PURPOSE)},
        "solvers": solvers,
    }


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_trials(path: Path, recs: Sequence[TrialRecord], timing: bool) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIALS_COLUMNS)
        for r in recs:
            w.writerow(
                [
                    _fmt(r.snr_db),
                    r.trial,
                    _fmt(r.p_t),
                    _fmt(r.zf_p_t),
                    r.bit_errors,
                    r.bits,
                    _fmt(r.fallback_used),
                    _fmt(round(r.solver_wall_time * 1e6)) if timing else "",
                    _fmt(r.broken_chain_fraction),
                ]
            )


def emit_outputs(result: SweepResult, out_dir: str | os.PathLike) -> list[Path]:
    """Write ``trials.csv``, ``summary.json`` and ``curve.csv`` into ``out_dir``.

    With several solvers the per-trial tables are ``trials_<solver>.csv``.
    Wall-clock columns are only filled when ``record_timing`` is set, so that
    default runs are byte-for-byte reproducible.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    written = []
    names = list(result.records) or list(cfg.solvers)
    for name in names:
        fname = "trials.csv" if len(names) == 1 else f"trials_{name}.csv"
        _write_trials(out / fname, result.records.get(name, []), cfg.record_timing)
        written.append(out / fname)
    with open(out / "summary.json", "w") as fh:
        json.dump(result.summary, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    written.append(out / "summary.json")
    with open(out / "curve.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["snr_db"] + [f"{k}_{n}" for n in names for k in ("ber", "throughput")])
        for i, snr in enumerate(cfg.snr_points):
            row = [_fmt(float(snr))]
            for n in names:
                pt = result.summary["solvers"][n][i] if n in result.summary["solvers"] else {}
                row += [_fmt(pt.get("ber")), _fmt(pt.get("throughput"))]
            w.writerow(row)
    written.append(out / "curve.csv")
    return written
