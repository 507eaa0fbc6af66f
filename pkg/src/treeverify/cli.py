"""Command-line interface.

Subcommands:
  verify       solve a question file against one or more models
  adversarial  norm-bounded perturbation search around a given instance
  monotone     check monotonicity in one attribute
  stats        leaf/split counts and prune ratios for a model (+ question)
  bench        compare the none / prune / prune+dc strategies on one task
  convert      turn an XGBoost JSON dump into the canonical model format

Reports stream to stdout as NDJSON (one subproblem per line) followed by a
final summary JSON line. Exit codes: 0 sat, 1 unsat, 2 unknown, 3 solver
unavailable, 4 bad input, 5 internal/protocol error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import domain as dom
from . import encode, oracle, reduce, search, solver
from .errors import (
    ParseError,
    ProtocolError,
    SolverUnavailable,
    TooLarge,
    TreeVerifyError,
    UnsupportedQuestion,
    ValidationError,
)
from .model import load_ensemble, from_xgboost_dump, leaf_count, save_ensemble, collect_splits
from .question import (
    TRUE,
    And,
    adversarial_task,
    box_approximation,
    ge,
    gt,
    lt,
    margin_from_probability,
    monotonicity_task,
    out,
    task_from_json,
)

EXIT_SAT = 0
EXIT_UNSAT = 1
EXIT_UNKNOWN = 2
EXIT_SOLVER_UNAVAILABLE = 3
EXIT_BAD_INPUT = 4
EXIT_INTERNAL = 5

_VERDICT_EXIT = {"sat": EXIT_SAT, "unsat": EXIT_UNSAT, "unknown": EXIT_UNKNOWN}


def _add_search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--subproblem-timeout", type=float, default=5.0,
                   help="soft solver timeout per subproblem, seconds (default 5)")
    p.add_argument("--timeout-growth", type=float, default=1.0,
                   help="multiply the subproblem timeout by this per depth")
    p.add_argument("--timeout", type=float, default=None,
                   help="overall wall-clock limit in seconds")
    p.add_argument("--max-depth", type=int, default=60,
                   help="maximum number of domain splits along one branch")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel solver workers (default 1)")
    p.add_argument("--stop", choices=[search.FIRST_SAT, search.EXHAUSTIVE,
                                      search.BUDGET], default=search.FIRST_SAT,
                   help="stop after the first witness, run exhaustively, "
                        "or stop on a wall budget")
    p.add_argument("--budget", type=float, default=20 * 60.0,
                   help="wall budget in seconds for --stop budget (default 1200)")
    p.add_argument("--solver-cmd", default=None,
                   help="solver command template; {timeout_ms} and {file} are "
                        "substituted (default: z3 if on PATH, else the bundled "
                        "solver; TREEVERIFY_SOLVER_CMD overrides)")
    p.add_argument("--dump-smt", default=None, metavar="DIR",
                   help="write one .smt2 file per subproblem into DIR")
    p.add_argument("--checkpoint", default=None, metavar="FILE",
                   help="write unresolved boxes to FILE for later resume")
    p.add_argument("--resume", default=None, metavar="FILE",
                   help="resume from a checkpoint written by --checkpoint")
    p.add_argument("--deep-prune", action="store_true",
                   help="re-check undecided branches with short solver calls")
    p.add_argument("--verify-report", action="store_true",
                   help="re-check sat witnesses and grid-check unsat boxes "
                        "after the run")
    p.add_argument("--output", default=None, metavar="FILE",
                   help="also write the summary JSON to FILE")


def _config_from_args(args) -> search.SearchConfig:
    return search.SearchConfig(
        subproblem_timeout=args.subproblem_timeout,
        timeout_growth=args.timeout_growth,
        max_depth=args.max_depth,
        workers=args.workers,
        stop_mode=args.stop,
        budget=args.budget,
        wall_limit=args.timeout,
        solver_cmd=args.solver_cmd,
        deep_prune=args.deep_prune,
        dump_smt_dir=args.dump_smt,
    )


def _load_models(paths) -> list:
    models = []
    for path in paths:
        with open(path, "rb") as fh:
            models.append(load_ensemble(fh))
    return models


def _load_instance(path: str) -> tuple:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, dict) and "values" in doc:
        doc = doc["values"]
    if not isinstance(doc, list):
        raise ParseError("instance file must hold a JSON array of values")
    return tuple(bool(v) if isinstance(v, bool) else float(v) for v in doc)


def _print_json(doc: dict, stream=None) -> None:
    (stream or sys.stdout).write(json.dumps(doc) + "\n")
    (stream or sys.stdout).flush()


def _run_task(task, args) -> int:
    cfg = _config_from_args(args)
    reports = []

    def on_report(report):
        reports.append(report)
        _print_json(report.to_json())

    if args.resume:
        with open(args.resume, "r", encoding="utf-8") as fh:
            cp = search.Checkpoint.from_json(json.load(fh))
        summary = search.resume(cp, task, cfg, on_report)
    else:
        summary = search.run(task, cfg, on_report)

    code = _VERDICT_EXIT[summary.verdict]
    if args.verify_report:
        problems = _verify_report(task, summary, reports)
        _print_json({"verify_report": {"ok": not problems, "problems": problems}})
        if problems:
            code = EXIT_INTERNAL
    _print_json(summary.to_json())
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(summary.to_json(), fh, indent=1)
    if args.checkpoint:
        cp = search.checkpoint_of(summary, task)
        with open(args.checkpoint, "w", encoding="utf-8") as fh:
            json.dump(cp.to_json(), fh, indent=1)
    return code


def _verify_report(task, summary, reports) -> list[str]:
    """Re-check sat witnesses by evaluation and unsat boxes by grid sampling."""
    from fractions import Fraction

    from .question import satisfies_task

    problems = []
    for witnesses, _ in summary.witnesses:
        values = [tuple(v if isinstance(v, bool) else Fraction(v) for v in w)
                  for w in witnesses]
        if not satisfies_task(task, values):
            problems.append(f"witness fails re-evaluation: {witnesses}")
    for report in reports:
        if report.status != "unsat" or report.reason == "vacuous-empty-domain":
            continue
        boxes = []
        for i, trail_json in enumerate(report.boxes):
            steps = dom.trail_from_json(trail_json)
            boxes.append(dom.replay_trail(task.instances[i].attr_types, steps))
        if any(b is None for b in boxes):
            continue
        try:
            got = oracle.grid_check(task, boxes, max_points=200_000)
        except (TooLarge, UnsupportedQuestion):
            continue  # box too large for the sampling oracle; skip, not fail
        if got.found:
            problems.append(f"grid point satisfies the question inside an "
                            f"unsat box: {got.witnesses}")
    return problems


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_verify(args) -> int:
    models = _load_models(args.model)
    with open(args.question, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    task = task_from_json(doc, models)
    return _run_task(task, args)


def cmd_adversarial(args) -> int:
    models = _load_models(args.model)
    x = _load_instance(args.instance)
    target = TRUE
    parts = []
    if args.output_gt is not None:
        parts.append(gt(out(0), args.output_gt))
    if args.output_lt is not None:
        parts.append(lt(out(0), args.output_lt))
    if args.target_prob_at_least is not None:
        parts.append(ge(out(0), margin_from_probability(args.target_prob_at_least)))
    if args.target_class is not None:
        c = args.target_class
        if not (0 <= c < len(models)):
            raise ValidationError("--target-class out of range")
        for j in range(len(models)):
            if j != c:
                parts.append(ge(out(c), out(j) + args.margin))
    if parts:
        target = And(tuple(parts))
    task = adversarial_task(models if len(models) > 1 else models[0], x,
                            args.delta, args.l1_budget, target)
    return _run_task(task, args)


def cmd_monotone(args) -> int:
    (model,) = _load_models([args.model])
    task = monotonicity_task(model, args.attr)
    return _run_task(task, args)


def cmd_stats(args) -> int:
    (model,) = _load_models([args.model])
    if args.question:
        with open(args.question, "r", encoding="utf-8") as fh:
            task = task_from_json(json.load(fh), [model])
        box = box_approximation(task, 0)
    else:
        box = dom.unconstrained(model.attr_types)
    doc = {"num_trees": len(model.trees), "num_splits": len(collect_splits(model))}
    if box is None:
        doc["empty_domain"] = True
        doc["leaves_before"] = leaf_count(model)
        doc["leaves_after"] = 0
    else:
        pruned = reduce.prune(model, box)
        per_tree = []
        for before_t, after_t in zip(model.trees, pruned.ensemble.trees):
            nb = sum(1 for n in before_t.nodes if not hasattr(n, "cond"))
            na = sum(1 for n in after_t.nodes if not hasattr(n, "cond"))
            per_tree.append({"leaves_before": nb, "leaves_after": na})
        doc["per_tree"] = per_tree
        doc["leaves_before"] = pruned.original_leaf_count
        doc["leaves_after"] = pruned.pruned_leaf_count
        doc["prune_ratio"] = round(
            1.0 - pruned.pruned_leaf_count / pruned.original_leaf_count, 6)
    _print_json(doc)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
    return EXIT_SAT


def run_bench_modes(task, modes, cap: float, cfg: search.SearchConfig) -> dict:
    """Timing comparison of the three strategies under one wall cap."""
    results = {}
    for mode in modes:
        start = time.monotonic()
        leaves_before = sum(leaf_count(e) for e in task.instances)
        leaves_after = leaves_before
        if mode == "none":
            boxes = [dom.unconstrained(e.attr_types) for e in task.instances]
            script = encode.build_script(task, boxes)
            verdict = solver.solve(script, cap, cfg.solver_cmd)
            status = verdict.status
        elif mode == "prune":
            boxes = search._seed_boxes(task)
            if boxes is None:
                status = "unsat"
                leaves_after = 0
            else:
                pruned = [reduce.prune(e, b, i).ensemble
                          for i, (e, b) in enumerate(zip(task.instances, boxes))]
                leaves_after = sum(leaf_count(p) for p in pruned)
                script = encode.build_script(task, boxes, pruned)
                verdict = solver.solve(script, cap, cfg.solver_cmd)
                status = verdict.status
        elif mode == "prune+dc":
            run_cfg = search.SearchConfig(
                subproblem_timeout=cfg.subproblem_timeout,
                timeout_growth=cfg.timeout_growth,
                max_depth=cfg.max_depth,
                workers=cfg.workers,
                stop_mode=search.FIRST_SAT,
                wall_limit=cap,
                solver_cmd=cfg.solver_cmd,
            )
            summary = search.run(task, run_cfg)
            status = summary.verdict
        else:
            raise ValidationError(f"unknown bench mode {mode!r}")
        elapsed = time.monotonic() - start
        results[mode] = {
            "verdict": status,
            "time": round(elapsed, 4),
            "timed_out": status == "unknown",
            "leaves_before": leaves_before,
            "leaves_after": leaves_after,
        }
    return results


def cmd_bench(args) -> int:
    models = _load_models(args.model)
    with open(args.question, "r", encoding="utf-8") as fh:
        task = task_from_json(json.load(fh), models)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    cfg = _config_from_args(args)
    results = run_bench_modes(task, modes, args.cap, cfg)
    doc = {"cap": args.cap, "modes": results}
    _print_json(doc)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
    return EXIT_SAT


def cmd_convert(args) -> int:
    with open(args.input, "r", encoding="utf-8") as fh:
        dump = fh.read()
    bool_attrs = []
    if args.bool_attrs:
        bool_attrs = [int(s) for s in args.bool_attrs.split(",") if s.strip()]
    e = from_xgboost_dump(dump, num_attributes=args.num_attributes,
                          bool_attrs=bool_attrs, base_score=args.base_score)
    text = save_ensemble(e)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    return EXIT_SAT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treeverify",
        description="Verify properties of additive tree ensembles with an SMT "
                    "solver plus prune and divide-and-conquer domain splitting.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="solve a question file against models")
    p.add_argument("--model", action="append", required=True,
                   help="model JSON path; repeat for multi-instance tasks")
    p.add_argument("--question", required=True, help="question JSON path")
    _add_search_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("adversarial", help="perturbation search around an instance")
    p.add_argument("--model", action="append", required=True,
                   help="model JSON path; repeat for one-vs-all classes")
    p.add_argument("--instance", required=True, help="instance JSON (array of values)")
    p.add_argument("--delta", type=float, required=True,
                   help="max per-attribute deviation (infinity norm, strict)")
    p.add_argument("--l1-budget", type=float, default=None,
                   help="total deviation budget (1-norm, strict)")
    p.add_argument("--output-gt", type=float, default=None,
                   help="require the perturbed output to exceed this value")
    p.add_argument("--output-lt", type=float, default=None,
                   help="require the perturbed output below this value")
    p.add_argument("--target-prob-at-least", type=float, default=None,
                   help="require logistic probability of at least p (single model)")
    p.add_argument("--target-class", type=int, default=None,
                   help="with several models: class index to steer the prediction to")
    p.add_argument("--margin", type=float, default=0.0,
                   help="margin used with --target-class (default 0)")
    _add_search_flags(p)
    p.set_defaults(func=cmd_adversarial)

    p = sub.add_parser("monotone", help="check monotonicity in one attribute")
    p.add_argument("--model", required=True)
    p.add_argument("--attr", type=int, required=True,
                   help="attribute index (booleans use false < true)")
    _add_search_flags(p)
    p.set_defaults(func=cmd_monotone)

    p = sub.add_parser("stats", help="leaf and split statistics, prune ratios")
    p.add_argument("--model", required=True)
    p.add_argument("--question", default=None,
                   help="optional question whose box constraints drive pruning")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench", help="compare none / prune / prune+dc strategies")
    p.add_argument("--model", action="append", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--modes", default="none,prune,prune+dc",
                   help="comma list from none,prune,prune+dc")
    p.add_argument("--cap", type=float, default=60.0,
                   help="wall cap per mode in seconds (default 60)")
    _add_search_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("convert", help="convert an XGBoost JSON dump")
    p.add_argument("--input", required=True, help="XGBoost dump_model JSON")
    p.add_argument("--num-attributes", type=int, default=None)
    p.add_argument("--bool-attrs", default="",
                   help="comma list of attribute indices to treat as boolean")
    p.add_argument("--base-score", type=float, default=0.0)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_convert)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SolverUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER_UNAVAILABLE
    except (ParseError, ValidationError, UnsupportedQuestion, TooLarge,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (ProtocolError, TreeVerifyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
