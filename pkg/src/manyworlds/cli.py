"""Command-line driver.

Subcommands:

  run    load a program (mini-language or event-program text) and a dataset,
         pick a pipeline stage to emit or compute target probabilities with
         one of: naive, exact, eager, lazy, hybrid, exact-d, hybrid-d
  gen    generate a correlated dataset (positive / mutex / markov schemes)
  check  sweep seeded random event programs: exact compilation vs enumeration
  bench  counted-work tables over growing variable counts and modes

Reports go to stdout as a small table; ``--out`` additionally writes a
machine-readable JSON document (stable bytes for fixed inputs and seed;
wall-clock time is printed to stdout only).
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .compile import ConfigError, compile_targets
from .datagen import Dataset, gen_correlations
from .distributed import max_job_count, run_distributed
from .eventprog import (
    emit_event_program, emit_grounded, ground, ground_folded,
    parse_event_program,
)
from .kmedoids import build_kmedoids_program
from .network import build_network
from .oracle import OracleError, oracle_probabilities, world_reports
from .randprog import random_instance
from .translate import translate_to_event_program
from .userlang import (
    UserSyntaxError, format_user_program, parse_user_program,
    validate_user_program,
)

MODES = ("naive", "exact", "eager", "lazy", "hybrid", "exact-d", "hybrid-d")


class CliError(Exception):
    def __init__(self, stage, message):
        super().__init__("%s: %s" % (stage, message))
        self.stage = stage


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except (OracleError, ConfigError) as exc:
        print("error: compute: %s" % exc, file=sys.stderr)
        return 2


def build_parser():
    p = argparse.ArgumentParser(prog="manyworlds")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="interpret a program over a dataset")
    r.add_argument("--program", help="mini-language source file")
    r.add_argument("--event-program", help="event-program text file")
    r.add_argument("--data", required=True, help="dataset JSON file")
    r.add_argument("--mode", choices=MODES, default="exact")
    r.add_argument("--epsilon", type=float, default=0.0)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--job-depth", type=int, default=3)
    r.add_argument("--folded", action="store_true")
    r.add_argument("--targets", action="append",
                   help="glob pattern over grounded identifiers (repeatable)")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--emit-stage",
                   choices=("ast", "event-program", "grounded", "network"))
    r.add_argument("--out", help="write the JSON report (or stage text) here")
    r.add_argument("--job-log", help="dump the distributed commit log (JSON)")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("gen", help="generate a correlated dataset")
    g.add_argument("--scheme", choices=("positive", "mutex", "markov"),
                   required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--group", type=int, default=4)
    g.add_argument("--l", type=int, default=2, help="literals per event")
    g.add_argument("--m", type=int, default=4, help="mutex set size")
    g.add_argument("--mutex-encoding", choices=("chain", "selector"),
                   default="chain")
    g.add_argument("--pool", type=int, help="variable pool (positive scheme)")
    g.add_argument("--certain", type=float, default=0.0)
    g.add_argument("--prob-lo", type=float, default=0.5)
    g.add_argument("--prob-hi", type=float, default=0.8)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--iter", type=int, default=3)
    g.add_argument("--dim", type=int, default=2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("check", help="exact-vs-enumeration equivalence sweep")
    c.add_argument("--count", type=int, default=50)
    c.add_argument("--max-vars", type=int, default=10)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("bench", help="counted-work tables by variable count")
    b.add_argument("--scheme", choices=("positive", "mutex", "markov"),
                   default="positive")
    b.add_argument("--vars", default="8,12,16", help="variable pool sizes")
    b.add_argument("--modes", default="exact,eager,lazy,hybrid")
    b.add_argument("--epsilon", type=float, default=0.1)
    b.add_argument("--n", type=int, default=20)
    b.add_argument("--group", type=int, default=4)
    b.add_argument("--l", type=int, default=2)
    b.add_argument("--iter", type=int, default=3)
    b.add_argument("--certain", type=float, default=0.0)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)
    return p


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _load_pipeline(args):
    """program + dataset -> (grounded-or-folded, dataset, stages, patterns)."""
    try:
        dataset = Dataset.load(args.data)
    except Exception as exc:
        raise CliError("dataset", str(exc))
    variables = set(dataset.vartable.index)
    stages = {}

    if args.program and args.event_program:
        raise CliError("config", "--program and --event-program are exclusive")
    if args.program:
        try:
            text = open(args.program).read()
            ast = parse_user_program(text, filename=args.program)
        except UserSyntaxError as exc:
            raise CliError("parse", str(exc))
        stages["ast"] = lambda: format_user_program(ast)
        diags = validate_user_program(ast)
        if diags:
            raise CliError("validate", "; ".join(
                "%s:%s" % (args.program, d) for d in diags))
        try:
            translation = translate_to_event_program(ast, dataset)
        except Exception as exc:
            raise CliError("translate", str(exc))
        program = translation.program
        default_targets = _default_user_targets(translation, args.folded)
    elif args.event_program:
        try:
            program = parse_event_program(open(args.event_program).read())
        except Exception as exc:
            raise CliError("parse", str(exc))
        default_targets = None
    else:
        raise CliError("config", "one of --program/--event-program is required")

    stages["event-program"] = lambda: emit_event_program(program)
    if args.targets:
        patterns = tuple(args.targets)
    elif default_targets:
        patterns = default_targets
    else:
        patterns = ("*",)

    try:
        if args.folded:
            grounded = ground_folded(program, patterns, variables)
            stages["grounded"] = lambda: emit_grounded(_fold_preview(grounded))
        else:
            grounded = ground(program, patterns, variables)
            stages["grounded"] = lambda: emit_grounded(grounded)
    except Exception as exc:
        raise CliError("ground", str(exc))
    return grounded, dataset, stages, patterns


def _fold_preview(folded):
    from .eventprog import GroundedProgram
    decls = dict(folded.base)
    for t in range(folded.count):
        for entry in folded.body:
            eid = folded.body_eid(entry, t)
            decls.setdefault(eid, entry[2])
    return GroundedProgram(decls, [])


def _default_user_targets(translation, folded):
    paths = translation.loop_final_paths if folded else translation.final_paths
    pick = None
    for var, (path, dims, kind) in paths.items():
        if kind == "bool" and dims:
            pick = var  # last Boolean family wins
    if pick is None:
        return None
    pattern = (translation.loop_final_pattern(pick) if folded
               else translation.final_pattern(pick))
    return (pattern,)


def cmd_run(args):
    _validate_run_config(args)
    grounded, dataset, stages, patterns = _load_pipeline(args)
    if args.emit_stage and args.emit_stage != "network":
        text = stages[args.emit_stage]()
        _write_text(args.out, text)
        return 0

    t0 = time.time()
    if args.mode == "naive":
        report = _run_naive(grounded, dataset)
    else:
        net = build_network(grounded)
        if args.emit_stage == "network":
            _write_text(args.out, net.dump())
            return 0
        if args.mode in ("exact-d", "hybrid-d"):
            scheme = "exact" if args.mode == "exact-d" else "hybrid"
            log = []
            result = run_distributed(net, dataset.vartable, args.epsilon, scheme,
                                     workers=args.workers,
                                     job_depth=args.job_depth, commit_log=log)
            report = result.as_dict()
            report["stats"]["job_bound"] = max_job_count(
                max(len(dataset.vartable), 1), args.job_depth)
            if args.job_log:
                with open(args.job_log, "w") as fh:
                    json.dump(log, fh, sort_keys=True, indent=1)
                    fh.write("\n")
        else:
            result = compile_targets(net, dataset.vartable, args.epsilon, args.mode)
            report = result.as_dict()
    elapsed = time.time() - t0
    report["mode"] = args.mode
    report["seed"] = args.seed

    _print_report(report, elapsed)
    if args.out:
        _write_text(args.out, json.dumps(report, sort_keys=True, indent=1) + "\n")
    return 0


def _validate_run_config(args):
    approx = args.mode in ("eager", "lazy", "hybrid", "hybrid-d")
    if approx and args.epsilon <= 0:
        raise CliError("config", "mode %s needs --epsilon > 0" % args.mode)
    if not approx and args.epsilon:
        raise CliError("config", "--epsilon requires an approximation mode")
    if args.workers > 1 and args.mode not in ("exact-d", "hybrid-d"):
        raise CliError("config", "--workers > 1 requires exact-d or hybrid-d")
    if args.folded and args.mode == "naive":
        raise CliError("config", "naive mode enumerates worlds; --folded "
                       "applies to network modes")
    if args.workers < 1 or args.job_depth < 1:
        raise CliError("config", "workers and job depth must be >= 1")


def _run_naive(grounded, dataset):
    res = oracle_probabilities(grounded, dataset.vartable, grounded.targets)
    targets = [{"eid": e, "lower": p, "upper": p}
               for e, p in res.probabilities.items()]
    tset = list(grounded.targets)
    for idx, rep in enumerate(world_reports(grounded, dataset.vartable)):
        rec = {"world": idx, "probability": round(rep.probability, 12),
               "targets": {e: bool(rep.values[e]) for e in tset}}
        print(json.dumps(rec, sort_keys=True))
    return {"targets": targets,
            "stats": {"evaluations": res.evaluations,
                      "total_mass": res.total_mass}}


def _print_report(report, elapsed):
    print("mode: %s" % report["mode"])
    width = max((len(t["eid"]) for t in report["targets"]), default=4)
    print("%-*s  %-12s %-12s" % (width, "eid", "lower", "upper"))
    for t in report["targets"]:
        print("%-*s  %-12.9f %-12.9f" % (width, t["eid"], t["lower"], t["upper"]))
    stats = report.get("stats", {})
    print(" ".join("%s=%s" % (k, v) for k, v in sorted(stats.items())))
    print("elapsed_s: %.3f" % elapsed)


def _write_text(path, text):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# gen / check / bench
# ---------------------------------------------------------------------------


def cmd_gen(args):
    try:
        ds = gen_correlations(
            args.n, args.scheme, group=args.group, certain=args.certain,
            prob_range=(args.prob_lo, args.prob_hi), seed=args.seed, l=args.l,
            m=args.m, pool=args.pool, k=args.k, iterations=args.iter,
            dim=args.dim, mutex_encoding=args.mutex_encoding)
    except Exception as exc:
        raise CliError("gen", str(exc))
    ds.save(args.out)
    print("wrote %s: n=%d vars=%d scheme=%s" %
          (args.out, ds.n, len(ds.vartable), args.scheme))
    return 0


def cmd_check(args):
    bad = 0
    for i in range(args.count):
        seed = args.seed + i
        prog, vt, targets = random_instance(seed, max_vars=args.max_vars)
        g = ground(prog, targets, variables=set(vt.index))
        net = build_network(g)
        cr = compile_targets(net, vt, 0.0, "exact")
        ores = oracle_probabilities(g, vt, targets)
        worst = max(max(abs(tb.lower - ores.probabilities[tb.eid]),
                        abs(tb.upper - ores.probabilities[tb.eid]))
                    for tb in cr.targets)
        ok = worst < 1e-9
        bad += not ok
        print("seed=%-6d vars=%-3d targets=%-2d err=%.2e %s" %
              (seed, len(vt), len(targets), worst, "ok" if ok else "FAIL"))
    print("%d/%d instances matched" % (args.count - bad, args.count))
    return 1 if bad else 0


def cmd_bench(args):
    modes = [m.strip() for m in args.modes.split(",")]
    var_counts = [int(v) for v in args.vars.split(",")]
    print("%-6s %-8s %-10s %-10s %-10s %-12s %-12s" %
          ("m", "mode", "branches", "leaves", "pruned", "propagations",
           "naive_evals"))
    for m in var_counts:
        ds = gen_correlations(args.n, args.scheme, group=args.group,
                              certain=args.certain, seed=args.seed, l=args.l,
                              pool=m, iterations=args.iter)
        prog, meta = build_kmedoids_program(ds)
        g = ground(prog, (meta["targets"],), variables=set(ds.vartable.index))
        net = build_network(g)
        for mode in modes:
            eps = 0.0 if mode == "exact" else args.epsilon
            r = compile_targets(net, ds.vartable, eps, mode)
            s = r.stats
            print("%-6d %-8s %-10d %-10d %-10d %-12d %-12d" %
                  (len(ds.vartable), mode, s.branches, s.leaves, s.pruned,
                   s.propagations, 2 ** len(ds.vartable)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
