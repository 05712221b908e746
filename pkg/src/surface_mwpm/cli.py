"""Command-line front end.

Subcommands::

    decode     match one syndrome file and print the correction
    sim        sweep (d, p) points and write CSV
    threshold  estimate the threshold from a sweep (run here or read from CSV)
    bench      per-round streaming decode time versus d (informational)

Exit codes: 0 success, 2 usage or parse error, 3 infeasible input, 4 no
threshold crossing.  Progress goes to standard error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from .blossom import mwpm
from .decoder import correction_from_matching
from .errors import GraphInfeasible, NoCrossing, SyndromeParseError
from .lattice import LatticeConfig, Mode, syndrome_array
from .montecarlo import (CSV_FIELDS, DEFAULT_ROUNDS, DEFAULT_VERIFY_EVERY, FixedFailures, FixedTrials,
                         SweepSpec, TrialStats, benchmark_rounds, estimate_threshold, run_sweep)
from .streaming import match_space_time
from .syndrome_graph import Boundary, Pruning, build_graph, parse_syndrome_text

log = logging.getLogger("surface_mwpm")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NO_RESULT = 0, 2, 3, 4


class UsageError(Exception):
    pass


def parse_int_list(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def parse_p_list(text: str) -> list[float]:
    """``a,b,c`` or an inclusive range ``lo:hi:step``."""
    try:
        if ":" in text:
            lo, hi, step = (float(x) for x in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            n = int(round((hi - lo) / step)) + 1
            out = [round(lo + i * step, 12) for i in range(n)]
        else:
            out = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'p1,p2,...' or 'lo:hi:step', got {text!r}") from None
    if not out or any(not 0.0 <= p <= 1.0 for p in out):
        raise argparse.ArgumentTypeError(f"error rates must lie in [0, 1]: {text!r}")
    return out


def _add_sweep_args(sp: argparse.ArgumentParser, require: bool = True) -> None:
    sp.add_argument("--mode", choices=[m.value for m in Mode], default="2d")
    sp.add_argument("--d", type=parse_int_list, required=require, help="code distances, comma separated")
    sp.add_argument("--p", type=parse_p_list, required=require, help="'p1,p2,...' or 'lo:hi:step'")
    sp.add_argument("--q", type=float, default=None, help="measurement flip rate (3-D; default p)")
    sp.add_argument("--pruning", choices=[p.value for p in Pruning], default=None,
                    help="2-D graph pruning (default shadowed; 3-D always complete)")
    stop = sp.add_mutually_exclusive_group()
    stop.add_argument("--trials", type=int, help="trials per point (3-D: streams per point)")
    stop.add_argument("--failures", type=int, help="run each point until this many failures")
    sp.add_argument("--max-trials", type=int, default=None, help="cap for --failures")
    sp.add_argument("--rounds", type=int, default=DEFAULT_ROUNDS, help="rounds per 3-D stream")
    sp.add_argument("--verify-every", type=int, default=DEFAULT_VERIFY_EVERY,
                    help="rounds between 3-D logical checks")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None, help="CSV output path (default: standard output)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="surface-mwpm", description=__doc__.split("\n\n")[0])
    parser.add_argument("-q", "--quiet", action="store_true", help="suppress progress messages")
    sub = parser.add_subparsers(dest="command", required=True)

    dp = sub.add_parser("decode", help="decode one syndrome file")
    dp.add_argument("syndrome", help="file with one 'row col' or 'row col round' per line")
    dp.add_argument("--d", type=int, required=True)
    dp.add_argument("--pruning", choices=[p.value for p in Pruning], default="shadowed")
    dp.add_argument("--errors", default=None,
                    help="file of flipped data-qubit lattice sites 'i j'; enables the logical bit (2-D)")

    sp = sub.add_parser("sim", help="run a (d, p) sweep and write CSV")
    _add_sweep_args(sp)

    tp = sub.add_parser("threshold", help="estimate the threshold crossing")
    _add_sweep_args(tp, require=False)
    tp.add_argument("--from-csv", default=None, help="read sweep results instead of simulating")

    bp = sub.add_parser("bench", help="per-round streaming decode time (not a pass/fail check)")
    bp.add_argument("--d", type=parse_int_list, default=[3, 5, 7, 9, 11])
    bp.add_argument("--p", type=float, default=1e-3)
    bp.add_argument("--rounds", type=int, default=200)
    bp.add_argument("--seed", type=int, default=0)
    return parser


def _read(path: str) -> str:
    try:
        with open(path, encoding="ascii") as fh:
            return fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _fmt_site(v) -> str:
    return "(" + ", ".join(str(int(x)) for x in v) + ")"


def cmd_decode(args) -> int:
    try:
        config = LatticeConfig(args.d)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    verts = parse_syndrome_text(_read(args.syndrome))
    rows, cols = config.stabilizer_shape
    for v in verts:
        if v[0] >= rows or v[1] >= cols:
            print(f"error: vertex {_fmt_site(v)} lies outside the d={args.d} stabilizer grid", file=sys.stderr)
            return EXIT_INFEASIBLE
    three_d = bool(verts) and len(verts[0]) == 3
    if three_d and args.errors:
        raise UsageError("--errors is only supported for 2-D syndromes")

    if three_d:
        m = match_space_time(verts, config)
        res = m.result()
        coords = {v.id: v.coord for v in m.vertices.values()}
        flips = m.matched_flips()
        pairs = [(coords[i], coords[j]) for i, j in res.pairs]
        bnd = [(coords[i], b) for i, b in res.boundary]
    else:
        graph = build_graph(verts, config, args.pruning)
        res = mwpm(graph)
        flips = correction_from_matching(graph.coords, res, config)
        pairs = [(graph.coords[i], graph.coords[j]) for i, j in res.pairs]
        bnd = [(graph.coords[i], b) for i, b in res.boundary]

    print(f"{len(verts)} vertices, weight {res.weight}")
    for a, b in pairs:
        w = sum(abs(x - y) for x, y in zip(a, b))
        print(f"edge {_fmt_site(a)} {_fmt_site(b)} weight {w}")
    for a, b in bnd:
        w = a[0] + 1 if b == Boundary.TOP else config.d - 1 - a[0]
        print(f"edge {_fmt_site(a)} boundary {Boundary(b).name.lower()} weight {w}")
    sites = sorted(zip(*np.nonzero(flips)))
    print("correction " + " ".join(_fmt_site(s) for s in sites) if sites else "correction none")

    if args.errors:
        data = np.zeros((config.n, config.n), dtype=bool)
        for lineno, v in enumerate(parse_syndrome_text(_read(args.errors)), start=1):
            if len(v) != 2 or v[0] >= config.n or v[1] >= config.n or not config.is_data_site(*v):
                print(f"error: {_fmt_site(v)} in {args.errors} is not a data qubit", file=sys.stderr)
                return EXIT_INFEASIBLE
            data[v] ^= True
        observed = {(int(r), int(c)) for r, c in zip(*np.nonzero(syndrome_array(data)))}
        if observed != set(verts):
            print("error: the error record does not produce this syndrome", file=sys.stderr)
            return EXIT_INFEASIBLE
        residual = data ^ flips
        print(f"logical {int(np.count_nonzero(residual[0, 0::2]) & 1)}")
    return EXIT_OK


def _spec_from_args(args) -> SweepSpec:
    if args.failures is not None:
        if args.failures < 1:
            raise UsageError("--failures must be at least 1")
        stop = FixedFailures(args.failures, args.max_trials)
    else:
        trials = args.trials if args.trials is not None else 1000
        if trials < 1:
            raise UsageError("--trials must be at least 1")
        stop = FixedTrials(trials)
    mode = Mode(args.mode)
    if mode is Mode.TWO_D and args.q:
        raise UsageError("--q applies to 3-D mode only")
    if mode is Mode.THREE_D and args.pruning == Pruning.SHADOWED.value:
        raise UsageError("shadow pruning is a 2-D option")
    if args.pruning is None:
        pruning = Pruning.SHADOWED if mode is Mode.TWO_D else Pruning.COMPLETE
    else:
        pruning = Pruning(args.pruning)
    if args.rounds < 1 or args.verify_every < 1:
        raise UsageError("--rounds and --verify-every must be positive")
    if args.q is not None and not 0.0 <= args.q <= 1.0:
        raise UsageError("--q must lie in [0, 1]")
    try:
        for d in args.d:
            LatticeConfig(d)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return SweepSpec(args.d, args.p, stop, seed=args.seed, mode=mode, q=args.q,
                     pruning=pruning, rounds=args.rounds, verify_every=args.verify_every)


def write_csv(results, fh) -> None:
    writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for s in results:
        writer.writerow(s.csv_row())


def _emit_csv(results, path) -> None:
    if path is None:
        write_csv(results, sys.stdout)
    else:
        with open(path, "w", newline="", encoding="ascii") as fh:
            write_csv(results, fh)


def read_csv(path: str) -> list[TrialStats]:
    out = []
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise UsageError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(TrialStats(Mode(row["mode"]), int(row["d"]), float(row["p"]), float(row["q"]),
                                      Pruning(row["pruning"]), int(row["seed"]), int(row["trials"]),
                                      int(row["rounds"]), int(row["failures"])))
            except ValueError as exc:
                raise UsageError(f"{path}: line {lineno}: {exc}") from None
    return out


def cmd_sim(args) -> int:
    spec = _spec_from_args(args)
    _emit_csv(run_sweep(spec), args.out)
    return EXIT_OK


def cmd_threshold(args) -> int:
    if args.from_csv:
        results = read_csv(args.from_csv)
    else:
        if args.d is None or args.p is None:
            raise UsageError("threshold needs --d and --p, or --from-csv")
        if len(set(args.d)) < 2:
            raise UsageError("threshold needs at least two distances")
        results = run_sweep(_spec_from_args(args))
        if args.out:
            _emit_csv(results, args.out)
    if len({s.d for s in results}) < 2:
        raise UsageError("threshold needs at least two distances")
    try:
        est = estimate_threshold(results)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"threshold {est.p_th:.4f} +/- {est.error:.4f}")
    for d1, d2, x, err in est.crossings:
        print(f"crossing d={d1},{d2} {x:.4f} +/- {err:.4f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    print("d,p,rounds,seconds_per_round")
    for d in args.d:
        t = benchmark_rounds(d, args.p, args.rounds, args.seed)
        print(f"{d},{args.p},{args.rounds},{t:.6f}")
        sys.stdout.flush()
    return EXIT_OK


COMMANDS = {"decode": cmd_decode, "sim": cmd_sim, "threshold": cmd_threshold, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, SyndromeParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GraphInfeasible as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NoCrossing as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_RESULT


if __name__ == "__main__":
    sys.exit(main())
