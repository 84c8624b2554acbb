"""Command-line entry points.

    vpqubo simulate --nt 4 --nr 4 --mod 64QAM --snr 24,28,32 --trials 1000 --solver sa,sphere --out run/
    vpqubo qubo dump --nr 2 --mod 16QAM --seed 3 --out inst.qubo
    vpqubo solve --qubo inst.qubo --solver sa --reads 1000
    vpqubo embed --n 28 --chimera-grid 16 --out emb.txt
    vpqubo capacity --n 28 --chimera-grid 16

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness, mimo
from .hardware import (
    EmbeddingCapacityError,
    chimera,
    clique_embed,
    parallel_capacity,
    tile_embeddings,
    write_embedding,
)
from .preprocess import PreprocessConfig, preprocess
from .qubo import build_qubo, read_qubo, write_qubo
from .solvers import MAX_BRUTE_VARS, SolverRequest, brute_force_argmin, solve_sa

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _names(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _low(text: str) -> float:
    return -math.inf if text.lower() in ("none", "off", "-inf") else float(text)


def _add_sim_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with SimConfig fields; flags override it")
    p.add_argument("--nt", type=int, dest="n_t")
    p.add_argument("--nr", type=int, dest="n_r")
    p.add_argument("--mod", dest="modulation")
    p.add_argument("--t-bits", type=int, dest="t_bits")
    p.add_argument("--snr", type=_floats, dest="snr_points", help="comma-separated SNR points in dB")
    p.add_argument("--trials", type=int, dest="trials_per_point")
    p.add_argument("--solver", type=_names, dest="solvers", help="comma-separated: brute,sa,sphere,fse,zf")
    p.add_argument("--reads", type=int, dest="num_reads")
    p.add_argument("--sweeps", type=int, dest="sweeps")
    p.add_argument("--breadth", type=int, dest="breadth")
    p.add_argument("--seed", type=int, dest="master_seed")
    p.add_argument("--packet-bits", type=int, dest="packet_bits")
    p.add_argument("--t-high", type=float)
    p.add_argument("--t-low", type=_low, help="log10 elimination threshold; 'none' disables elimination")
    p.add_argument("--no-preprocess", action="store_true")
    p.add_argument("--hw", action="store_true", help="anneal through the Chimera hardware model")
    p.add_argument("--chimera-grid", type=int)
    p.add_argument("--jf-mult", type=float)
    p.add_argument("--ice-sigma", type=float, help="ICE standard deviation for both h and J")
    p.add_argument("--ppl", action="store_true", dest="compute_ppl")
    p.add_argument("--timing", action="store_true", dest="record_timing")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)


def config_from_args(args: argparse.Namespace) -> harness.SimConfig:
    base = {}
    if args.config is not None:
        try:
            base = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise harness.ConfigError([f"config: {exc}"])
    cfg = harness.SimConfig.from_dict(base)
    direct = {
        k: getattr(args, k)
        for k in (
            "n_t", "n_r", "modulation", "t_bits", "snr_points", "trials_per_point", "solvers",
            "num_reads", "sweeps", "breadth", "master_seed", "packet_bits",
        )
        if getattr(args, k) is not None
    }
    if args.compute_ppl:
        direct["compute_ppl"] = True
    if args.record_timing:
        direct["record_timing"] = True
    cfg = replace(cfg, **direct)
    if args.no_preprocess:
        cfg = replace(cfg, preprocess=None)
    elif args.t_high is not None or args.t_low is not None:
        pre = cfg.preprocess or PreprocessConfig()
        try:
            pre = PreprocessConfig(
                t_high=pre.t_high if args.t_high is None else args.t_high,
                t_low=pre.t_low if args.t_low is None else args.t_low,
            )
        except ValueError as exc:
            raise harness.ConfigError([f"preprocess: {exc}"])
        cfg = replace(cfg, preprocess=pre)
    hw = cfg.hw_model
    if args.hw:
        hw = replace(hw, enabled=True)
    if args.chimera_grid is not None:
        hw = replace(hw, grid=args.chimera_grid)
    if args.jf_mult is not None:
        hw = replace(hw, jf_mult=args.jf_mult)
    if args.ice_sigma is not None:
        hw = replace(hw, ice_sigma_h=args.ice_sigma, ice_sigma_j=args.ice_sigma)
    return replace(cfg, hw_model=hw).validate()


def _cmd_simulate(args) -> int:
    cfg = config_from_args(args)
    result = harness.run_sweep(cfg, workers=args.workers)
    for path in harness.emit_outputs(result, args.out):
        print(path)
    return EXIT_OK


def _cmd_qubo_dump(args) -> int:
    cons = mimo.constellation(args.mod)
    rng = np.random.default_rng(args.seed)
    ch = mimo.generate_channel(args.nt or args.nr, args.nr, rng)
    u, _ = cons.random_symbols(args.nr, rng)
    p = build_qubo(ch, cons, u, args.t_bits)
    if args.t_high is not None:
        p, _ = preprocess(p, PreprocessConfig(args.t_high, args.t_low))
    text = write_qubo(p)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_solve(args) -> int:
    p = read_qubo(args.qubo.read_text())
    if args.solver == "brute":
        if p.n_vars > MAX_BRUTE_VARS:
            raise harness.ConfigError([f"solver: brute supports at most {MAX_BRUTE_VARS} variables"])
        bits = brute_force_argmin(p)
    else:
        bits = solve_sa(p, SolverRequest(num_reads=args.reads, anneal_sweeps=args.sweeps, seed=args.seed)).best_bits
    out = {"bits": "".join(str(int(b)) for b in bits), "energy": float(p.energy(bits))}
    print(json.dumps(out))
    return EXIT_OK


def _cmd_embed(args) -> int:
    g = chimera(args.chimera_grid)
    e = clique_embed(args.n, g)
    text = write_embedding(e)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_capacity(args) -> int:
    g = chimera(args.chimera_grid)
    out = {
        "n_logical": args.n,
        "chimera_grid": args.chimera_grid,
        "qubits_per_problem": len(clique_embed(args.n, g).qubits) if args.n <= 4 * args.chimera_grid else None,
        "capacity": parallel_capacity(args.n, g),
        "disjoint_tiles": len(tile_embeddings(args.n, g)),
    }
    print(json.dumps(out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vpqubo", description="Vector perturbation precoding as QUBO: simulation tools")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run an SNR sweep and write trials/summary/curve files")
    _add_sim_args(sim)
    sim.set_defaults(func=_cmd_simulate)

    qubo = sub.add_parser("qubo", help="QUBO utilities")
    qsub = qubo.add_subparsers(dest="qubo_command", required=True, parser_class=_Parser)
    dump = qsub.add_parser("dump", help="write the QUBO of one random instance")
    dump.add_argument("--nt", type=int)
    dump.add_argument("--nr", type=int, default=2)
    dump.add_argument("--mod", default="16QAM")
    dump.add_argument("--t-bits", type=int, default=1)
    dump.add_argument("--seed", type=int, default=0)
    dump.add_argument("--t-high", type=float, help="apply preprocessing with this T_high")
    dump.add_argument("--t-low", type=_low, default=-2.0)
    dump.add_argument("--out", type=Path)
    dump.set_defaults(func=_cmd_qubo_dump)

    solve = sub.add_parser("solve", help="minimise a QUBO file")
    solve.add_argument("--qubo", type=Path, required=True)
    solve.add_argument("--solver", choices=("brute", "sa"), default="sa")
    solve.add_argument("--reads", type=int, default=1000)
    solve.add_argument("--sweeps", type=int, default=100)
    solve.add_argument("--seed", type=int, default=0)
    solve.set_defaults(func=_cmd_solve)

    emb = sub.add_parser("embed", help="write a clique embedding on a Chimera grid")
    emb.add_argument("--n", type=int, required=True)
    emb.add_argument("--chimera-grid", type=int, default=16)
    emb.add_argument("--out", type=Path)
    emb.set_defaults(func=_cmd_embed)

    cap = sub.add_parser("capacity", help="how many n-variable problems fit on a Chimera grid")
    cap.add_argument("--n", type=int, required=True)
    cap.add_argument("--chimera-grid", type=int, default=16)
    cap.set_defaults(func=_cmd_capacity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, EmbeddingCapacityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
