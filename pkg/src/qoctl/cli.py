"""Command-line entry points.

    qoctl run <problem.json> --out <dir> [--seed S] [--max-iter N]
    qoctl evaluate <pulse.csv> <problem.json>
    qoctl validate <problem.json>

Exit codes are the machine contract: 0 goal reached (run) or success
(evaluate/validate), 2 iteration budget exhausted, 3 stalled, 1 any error.
Stdout is for humans; the emitted CSV/JSON files carry the data.
"""

from __future__ import annotations

import argparse
import sys

from .errors import QoctlError
from .io import (
    evaluate_pulse,
    parse_problem,
    read_pulse,
    run_problem,
    with_overrides,
)


def _cmd_run(args) -> int:
    loaded = parse_problem(args.problem)
    if args.seed is not None or args.max_iter is not None:
        loaded = with_overrides(loaded, seed=args.seed, max_iterations=args.max_iter)
    result, code = run_problem(loaded, args.out)
    print(f"algorithm:      {loaded.algorithm}")
    print(f"termination:    {result.termination}")
    print(f"iterations:     {result.iterations_used}")
    print(f"final fidelity: {result.final_fidelity:.12f}")
    print(f"objective:      {result.final_objective:.12f}")
    print(f"wall time:      {result.wall_time:.3f} s")
    print(f"artifacts:      {args.out}/pulse.csv trace.csv profile.csv manifest.json")
    return code


def _cmd_evaluate(args) -> int:
    loaded = parse_problem(args.problem)
    sequence, metadata = read_pulse(args.pulse)
    report = evaluate_pulse(loaded.problem, sequence)
    print(f"segments:       {sequence.n_segments}")
    print(f"total time:     {sequence.total_time:.9g} s")
    print(f"mean fidelity:  {report['fbar']:.12f}")
    for s, p, f in zip(report["scales"], report["probabilities"], report["per_bin"]):
        print(f"  scale {s:<8.4g} p={p:<8.4g} F={f:.12f}")
    print(f"penalty:        {report['penalty']:.12g}")
    print(f"objective:      {report['phi']:.12f}")
    if isinstance(metadata.get("fidelity"), float):
        drift = abs(metadata["fidelity"] - report["fbar"])
        print(f"recorded fidelity {metadata['fidelity']:.12f} (|difference| {drift:.3g})")
    return 0


def _cmd_validate(args) -> int:
    loaded = parse_problem(args.problem)
    problem = loaded.problem
    target = "gate" if problem.is_gate else f"state ({problem.target.kind})"
    print(f"{args.problem}: ok")
    print(f"  dimension:  {problem.system.dim}")
    print(f"  channels:   {problem.system.n_channels}")
    print(f"  target:     {target}")
    print(f"  ensemble:   {problem.ensemble.n_bins} bin(s)")
    print(f"  algorithm:  {loaded.algorithm}")
    print(f"  seed:       {loaded.seed}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qoctl", description="Synthesize and evaluate quantum control sequences."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="optimize a problem file and write artifacts")
    run.add_argument("problem", help="JSON problem file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="override the file seed")
    run.add_argument("--max-iter", type=int, default=None, help="override the iteration budget")
    run.set_defaults(func=_cmd_run)

    ev = sub.add_parser("evaluate", help="re-evaluate a pulse file against a problem")
    ev.add_argument("pulse", help="CSV pulse file")
    ev.add_argument("problem", help="JSON problem file")
    ev.set_defaults(func=_cmd_evaluate)

    val = sub.add_parser("validate", help="check a problem file and echo its summary")
    val.add_argument("problem", help="JSON problem file")
    val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (QoctlError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
