"""Command line entry point: ``compile`` and ``gen-qaoa`` subcommands."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .benchmarks import circuit_to_dict, generate_qaoa_benchmark, load_circuit, save_circuit
from .core import ArchConfig, ArchConfigError, CircuitError
from .pipeline import PLACEMENT_MODES, CompileError, CompileOptions, compile_circuit, write_artifacts
from .router import DEFAULT_WINDOW, ROUTING_METHODS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpqa-layout", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile circuits into verified instruction programs")
    c.add_argument("--arch", type=Path, help="architecture JSON (defaults to the built-in parameters)")
    c.add_argument("--circuit", type=Path, action="append", required=True, help="circuit JSON; repeatable")
    c.add_argument("--placement", choices=PLACEMENT_MODES, default="dynamic")
    c.add_argument("--routing", choices=ROUTING_METHODS, default="windowis")
    c.add_argument("--window-size", type=int, default=DEFAULT_WINDOW)
    c.add_argument("--aods", type=int, default=None, help="number of AODs (defaults to the architecture's)")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out-dir", type=Path, default=Path("out"))
    c.add_argument("--timings", action="store_true", help="print and record per-phase wall time")
    c.add_argument("--jobs", type=int, default=1, help="compile several circuits in parallel")

    g = sub.add_parser("gen-qaoa", help="write a random regular-graph QAOA circuit")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--degree", type=int, default=3)
    g.add_argument("--out", type=Path, help="output file (stdout if omitted)")
    return parser


def _compile_one(job: Tuple[Path, Optional[Path], CompileOptions, Path, bool]) -> Tuple[str, int, List[str]]:
    circuit_path, arch_path, options, out_dir, timings = job
    lines = []
    try:
        arch = ArchConfig.from_json(arch_path) if arch_path else ArchConfig()
        circuit = load_circuit(circuit_path)
        result = compile_circuit(circuit, arch, options)
    except (ArchConfigError, CircuitError, OSError) as exc:
        return str(circuit_path), 2, [f"error: {circuit_path}: {exc}"]
    except CompileError as exc:
        return str(circuit_path), 2, [f"error: {circuit_path}: {exc.phase}: {exc.cause}"]
    paths = write_artifacts(result, out_dir, include_timings=timings)
    if result.violations:
        lines.append(f"{circuit_path}: {len(result.violations)} violations")
        lines.extend(f"  {v}" for v in result.violations[:20])
        return str(circuit_path), 1, lines
    rep = result.report
    lines.append(
        f"{circuit_path}: stages={rep.n_stages} transfers={rep.n_transfers} "
        f"two_qubit={rep.two_qubit_term:.6g} transfer={rep.transfer_term:.6g} "
        f"decoherence={rep.decoherence_term:.6g} total={rep.total:.6g} -> {paths['program'].parent}"
    )
    if timings:
        lines.append("  timings " + " ".join(f"{k}={v:.3f}s" for k, v in result.timings.items()))
    return str(circuit_path), 0, lines


def _run_compile(args: argparse.Namespace) -> int:
    try:
        options = CompileOptions(
            placement=args.placement,
            routing=args.routing,
            window_size=args.window_size,
            aods=args.aods,
            seed=args.seed,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    many = len(args.circuit) > 1
    jobs = [
        (p, args.arch, options, args.out_dir / p.stem if many else args.out_dir, args.timings)
        for p in args.circuit
    ]
    if args.jobs > 1 and many:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_compile_one, jobs))
    else:
        results = [_compile_one(j) for j in jobs]
    status = 0
    for _, code, lines in results:
        stream = sys.stdout if code == 0 else sys.stderr
        for line in lines:
            print(line, file=stream)
        status = max(status, code)
    return status


def _run_gen(args: argparse.Namespace) -> int:
    try:
        circuit = generate_qaoa_benchmark(args.n, args.degree, args.seed)
    except CircuitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        save_circuit(circuit, args.out, seed=args.seed)
    else:
        print(json.dumps(circuit_to_dict(circuit, args.seed)))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "compile":
        return _run_compile(args)
    return _run_gen(args)


if __name__ == "__main__":
    sys.exit(main())
