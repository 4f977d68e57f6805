"""Command-line interface: ``tardos-nns <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, formats, rng
from .attack import STRATEGY_NAMES, AttackStrategy, forge, named_strategy
from .codegen import generate_codebook, parse_distribution, sample_bias
from .core import FingerprintError, ScoreKind
from .decoder import Threshold, TopM, linear_decode, suggest_threshold
from .experiment import ExperimentConfig, TrialResult, run_experiment
from .lsh import LshParams, build_index, decode_lsh, load_index, save_index

ANALYSIS_FMT = "{:.6f}"


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout
    return open(path, "w", newline="")


def _grid(text: str) -> np.ndarray:
    start, stop, step = (float(v) for v in text.split(":"))
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(v)
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if math.isinf(v):
        return "inf"
    return ANALYSIS_FMT.format(v)


def cmd_gen(args) -> int:
    dist = parse_distribution(args.dist, args.c)
    bias = sample_bias(dist, args.len, args.seed)
    book = generate_codebook(args.n, bias, args.seed)
    formats.write_codebook(args.out, book, bias)
    print(f"wrote {args.out}: n={book.n} l={book.length}", file=sys.stderr)
    return 0


def cmd_attack(args) -> int:
    book, _ = formats.read_codebook(args.codebook)
    if args.colluders:
        colluders = sorted(int(v) for v in args.colluders.split(","))
    else:
        g = rng.stream(args.seed, rng.COLLUDERS)
        colluders = sorted(int(j) for j in g.choice(book.n, size=args.c, replace=False))
    if args.theta:
        strategy = AttackStrategy.from_config(args.theta)
    else:
        strategy = named_strategy(args.strategy, len(colluders))
    y = forge(book, colluders, strategy, args.seed)
    formats.write_pirate(args.out, y)
    print(json.dumps({"colluders": colluders, "theta": strategy.to_config()}))
    return 0


def _mode(args, bias, kind, n, y):
    if args.threshold is not None:
        return Threshold(args.threshold)
    if args.fp is not None:
        return Threshold(suggest_threshold(bias, kind, args.fp, n, y))
    return TopM(args.top)


def cmd_decode(args) -> int:
    book, bias = formats.read_codebook(args.codebook)
    y = formats.read_pirate(args.pirate)
    kind = ScoreKind(args.kind)
    mode = _mode(args, bias, kind, book.n, y)
    if args.lsh:
        params = LshParams(t=args.t, k=args.k, sparsity=args.sparsity, probes=args.probes)
        if args.index and Path(args.index).exists():
            index = load_index(args.index, book)
            params = LshParams(index.params.t, index.params.k, index.params.sparsity, args.probes)
        else:
            index = build_index(book, params, args.seed)
            if args.index:
                save_index(index, args.index)
        result = decode_lsh(book, y, bias, params, kind, mode, args.seed, index)
    else:
        result = linear_decode(book, y, bias, kind, mode)
    if args.accused_only:
        users = [a.user for a in result.accused]
        scores = [a.score for a in result.accused]
    else:
        users, scores = result.candidates, result.scores
        if not args.lsh:
            order = np.lexsort((users, -scores))
            users, scores = users[order], scores[order]
    out = _open_out(args.out)
    try:
        formats.write_accusations(out, users, scores, result.accused_users)
        footer = {"scores_computed": result.work.scores_computed,
                  "hash_dot_products": result.work.hash_dot_products,
                  "dot_products_total": result.work.dot_products_total,
                  "threshold": result.threshold_used,
                  "decoder": "lsh" if args.lsh else "linear"}
        out.write("# work " + json.dumps(footer) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _write_rows(out, rows: list[analysis.TableRow]) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(analysis.TableRow.HEADER + ("note",))
    for row in rows:
        writer.writerow([_fmt(v) for v in row.values()] + [row.discrepancy])


def cmd_tradeoff(args) -> int:
    out = _open_out(args.out)
    try:
        if args.alpha is not None or args.curve:
            if args.alpha is not None:
                alpha = args.alpha
            else:
                alpha = _row_for(args).alpha
            grid = _grid(args.curve or "0:3:0.25")
            points = [analysis.tradeoff(alpha, analysis.FixedSpace(float(s))) for s in grid]
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(("alpha", "rho_s_requested", "rho_s", "rho_q"))
            for s, pt in zip(grid, points):
                writer.writerow((_fmt(alpha), _fmt(float(s)), _fmt(pt.rho_s), _fmt(pt.rho_q)))
            if args.plot:
                from .plotting import plot_tradeoff_curve
                plot_tradeoff_curve(alpha, [p.rho_s for p in points], [p.rho_q for p in points],
                                    args.plot)
        else:
            _write_rows(out, [_row_for(args)])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _row_for(args) -> analysis.TableRow:
    if args.d0 is not None and args.d1 is not None:
        return analysis.row_from_dots(args.d0, args.d1, args.c or 0)
    if args.c is None:
        raise SystemExit("tradeoff: give --c with --dist, --d0/--d1, or --alpha")
    return analysis.table_row(parse_distribution(args.dist, args.c), args.c)


def cmd_table(args) -> int:
    rows = []
    for item in args.rows.split(","):
        c, _, dist = item.partition(":")
        rows.append(analysis.table_row(parse_distribution(dist, int(c)), int(c)))
    out = _open_out(args.out)
    try:
        _write_rows(out, rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_moments(args) -> int:
    dist = parse_distribution(args.dist, args.c)
    closed = analysis.moments_interleaving(dist, args.c)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(("source", "mu0_per_l", "mu1_per_l", "qnorm_per_sqrt_l",
                     "var0", "var1", "se0", "se1"))
    writer.writerow(("closed_form", _fmt(closed.mu0_per_seg), _fmt(closed.mu1_per_seg),
                     _fmt(closed.qnorm_per_sqrtseg), "", "", "", ""))
    if args.monte_carlo:
        mc = analysis.monte_carlo_moments(dist, args.c, named_strategy(args.strategy, args.c),
                                          args.len, args.trials, args.seed)
        writer.writerow(("monte_carlo", _fmt(mc.mu0_per_seg), _fmt(mc.mu1_per_seg),
                         _fmt(mc.qnorm_per_sqrtseg), repr(mc.var0), repr(mc.var1),
                         repr(mc.se0), repr(mc.se1)))
    return 0


def cmd_experiment(args) -> int:
    lsh = LshParams(t=args.t, k=args.k, sparsity=args.sparsity, probes=args.probes)
    fields = dict(n=args.n, length=args.len, c=args.c, trials=args.trials, dist=args.dist,
                  strategy=args.strategy, lsh=lsh, kind=ScoreKind(args.kind), top=args.top,
                  seed=args.seed, window=args.window, bins=args.bins)
    config = ExperimentConfig(**fields)

    def progress(t: TrialResult):
        if args.verbose:
            print(f"trial {t.trial}: candidates={t.candidates} found={t.colluders_found}/"
                  f"{args.c} work={t.dot_products_total}", file=sys.stderr)

    report = run_experiment(config, threads=args.threads, progress=progress)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report.to_json(), fh, indent=2)
    with open(out_dir / "trials.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TrialResult.TSV_FIELDS)
        for t in report.trials:
            writer.writerow(t.row())
    with open(out_dir / "candidates_running.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("score", "candidate_probability"))
        writer.writerows(zip(report.running["score"], report.running["candidate_probability"]))
    with open(out_dir / "candidates_bins.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        cols = ("lower", "upper", "users", "scores_computed", "colluders", "candidate_probability")
        writer.writerow(cols)
        writer.writerows(zip(*(report.bins[c] for c in cols)))
    if not args.no_plot:
        from .plotting import plot_candidate_probability
        plot_candidate_probability(report, out_dir / "candidates.png")
    json.dump(report.aggregate, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _add_lsh_flags(p, t=100, k=16):
    p.add_argument("--t", type=int, default=t, help="number of hash tables")
    p.add_argument("--k", type=int, default=k, help="hash length in bits")
    p.add_argument("--sparsity", type=float, default=1.0 / 3.0,
                   help="expected fraction of nonzero hyperplane coordinates")
    p.add_argument("--probes", type=int, default=1, help="buckets visited per table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tardos-nns", description=__doc__)
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads (never changes results)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a codebook file (TFPC)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--len", type=int, required=True)
    p.add_argument("--dist", default="nuida-c3",
                   help="half | nuida-c3 | arcsine[:delta|:auto] | discrete:p:w,...")
    p.add_argument("--c", type=int, default=None, help="colluder count for arcsine:auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("attack", help="forge a pirate copy (TFPY)")
    p.add_argument("--codebook", required=True)
    who = p.add_mutually_exclusive_group(required=True)
    who.add_argument("--colluders", help="comma-separated user indices")
    who.add_argument("--c", type=int, help="sample this many colluders from --seed")
    p.add_argument("--strategy", default="interleaving", choices=STRATEGY_NAMES)
    p.add_argument("--theta", help="explicit strategy as c+1 comma-separated reals")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("decode", help="accuse users from a pirate copy")
    p.add_argument("--codebook", required=True)
    p.add_argument("--pirate", required=True)
    how = p.add_mutually_exclusive_group()
    how.add_argument("--linear", action="store_true", help="score every user (default)")
    how.add_argument("--lsh", action="store_true", help="score hash-table candidates only")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--top", type=int, default=1)
    mode.add_argument("--threshold", type=float)
    mode.add_argument("--fp", type=float, help="expected false accusations (normal model)")
    p.add_argument("--kind", choices=[k.value for k in ScoreKind], default="equivalent")
    _add_lsh_flags(p)
    p.add_argument("--index", help="TFLI index file to load, or to create if missing")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--accused-only", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("tradeoff", help="time/space exponents for one setting")
    p.add_argument("--c", type=int)
    p.add_argument("--dist", default="nuida-c3")
    p.add_argument("--d0", type=float)
    p.add_argument("--d1", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--curve", help="rho_s grid start:stop:step")
    p.add_argument("--plot", help="write the curve as an image")
    p.add_argument("--out")
    p.set_defaults(func=cmd_tradeoff)

    p = sub.add_parser("table", help="interleaving-attack table rows as CSV")
    p.add_argument("--rows", default="1:half,2:half,3:nuida-c3",
                   help="comma-separated c:dist pairs")
    p.add_argument("--out")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("moments", help="closed-form (and simulated) score moments")
    p.add_argument("--dist", default="nuida-c3")
    p.add_argument("--c", type=int, default=3)
    p.add_argument("--monte-carlo", action="store_true")
    p.add_argument("--strategy", default="interleaving", choices=STRATEGY_NAMES)
    p.add_argument("--len", type=int, default=10_000)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("experiment", help="LSH decoding experiment with figure output")
    p.add_argument("--n", type=int, default=20_000)
    p.add_argument("--len", type=int, default=2000)
    p.add_argument("--c", type=int, default=3)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--dist", default="nuida-c3")
    p.add_argument("--strategy", default="interleaving", choices=STRATEGY_NAMES)
    p.add_argument("--kind", choices=[k.value for k in ScoreKind], default="equivalent")
    p.add_argument("--top", type=int, default=1)
    _add_lsh_flags(p, t=30, k=13)
    p.add_argument("--window", type=int, default=201, help="running-average window (users)")
    p.add_argument("--bins", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="experiment-out")
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--verbose", "-v", action="store_true")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FingerprintError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
