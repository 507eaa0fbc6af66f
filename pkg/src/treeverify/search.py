"""The prune / solve / divide loop with parallel workers and streamed reports.

Subproblems live on a shared LIFO stack (idle workers take the deepest one).
Each worker prunes the per-instance ensembles under the subproblem's boxes,
builds a script, and runs the solver with a per-subproblem timeout. A sat
answer yields a witness report (re-checked by exact evaluation before it is
emitted); unsat closes the subdomain; a timeout or unknown splits the domain
on the condition that kills the most reachable leaves and pushes the two
halves. Reports stream out as they resolve, so a long run is inspectable and
can be stopped at any point; unresolved boxes can be checkpointed and
resumed, optionally with a strengthened background formula.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from . import domain as dom
from . import encode, reduce, solver
from .errors import ProtocolError, SolverUnavailable, ValidationError
from .model import Ensemble, evaluate_exact, leaf_count, save_ensemble
from .question import (
    VerificationTask,
    box_approximation,
    satisfies_task,
    validate,
)

FIRST_SAT = "first-sat"
EXHAUSTIVE = "exhaustive"
BUDGET = "budget"


@dataclass
class SearchConfig:
    subproblem_timeout: float = 5.0
    timeout_growth: float = 1.0  # per-depth multiplier on the timeout
    max_depth: int = 60
    workers: int = 1
    stop_mode: str = FIRST_SAT
    budget: float = 20 * 60.0  # wall budget, used by stop_mode "budget"
    wall_limit: Optional[float] = None  # overall wall cap in any stop mode
    solver_cmd: Optional[str] = None
    deep_prune: bool = False
    dump_smt_dir: Optional[str] = None

    def __post_init__(self):
        if self.subproblem_timeout < 0 or self.timeout_growth < 1.0 \
                or self.max_depth < 0 or self.workers < 1:
            raise ValidationError("search configuration values out of range")
        if self.stop_mode not in (FIRST_SAT, EXHAUSTIVE, BUDGET):
            raise ValidationError(f"unknown stop mode {self.stop_mode!r}")
        if self.stop_mode == BUDGET and self.budget < self.subproblem_timeout:
            raise ValidationError("budget must cover at least one subproblem timeout")


@dataclass
class Subproblem:
    boxes: tuple[dom.DomainBox, ...]
    depth: int


def _fraction_json(v):
    if isinstance(v, bool):
        return v
    return str(Fraction(v))


@dataclass
class SubproblemReport:
    status: str  # sat | unsat | unknown_split | unknown_terminal
    boxes: list  # serialized trails, one per instance
    depth: int
    solve_time: float = 0.0
    leaves_before: int = 0
    leaves_after: int = 0
    witnesses: Optional[list] = None  # instance value tuples (sat only)
    outputs: Optional[list] = None  # Fractions (sat only)
    condition: Optional[dict] = None  # the split (unknown_split only)
    reason: Optional[str] = None  # unknown_terminal, and vacuous unsat

    def to_json(self) -> dict:
        doc = {
            "status": self.status,
            "boxes": self.boxes,
            "depth": self.depth,
            "solve_time": round(self.solve_time, 6),
            "leaves_before": self.leaves_before,
            "leaves_after": self.leaves_after,
        }
        if self.witnesses is not None:
            doc["witnesses"] = [[_fraction_json(v) for v in w] for w in self.witnesses]
            doc["outputs"] = [str(o) for o in self.outputs]
        if self.condition is not None:
            doc["condition"] = self.condition
        if self.reason is not None:
            doc["reason"] = self.reason
        return doc


@dataclass
class Summary:
    verdict: str  # sat | unsat | unknown
    n_sat: int = 0
    n_unsat: int = 0
    n_unknown: int = 0
    n_splits: int = 0
    witnesses: list = field(default_factory=list)  # (instances, outputs) pairs
    unresolved: list = field(default_factory=list)  # serialized box trails
    total_time: float = 0.0
    interrupted: bool = False

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "n_sat": self.n_sat,
            "n_unsat": self.n_unsat,
            "n_unknown": self.n_unknown,
            "n_splits": self.n_splits,
            "witnesses": [
                {"instances": [[_fraction_json(v) for v in w] for w in ws],
                 "outputs": [str(o) for o in outs]}
                for ws, outs in self.witnesses
            ],
            "unresolved": self.unresolved,
            "total_time": round(self.total_time, 6),
            "interrupted": self.interrupted,
        }


def task_fingerprint(task: VerificationTask) -> str:
    h = hashlib.sha256()
    for e in task.instances:
        h.update(save_ensemble(e).encode())
    return h.hexdigest()[:32]


@dataclass
class Checkpoint:
    verdict: str
    unresolved: list  # one entry per subproblem: list of per-instance trails
    fingerprint: Optional[str] = None

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "unresolved": self.unresolved,
                "fingerprint": self.fingerprint}

    @staticmethod
    def from_json(doc: dict) -> "Checkpoint":
        if not isinstance(doc, dict) or "unresolved" not in doc:
            raise ValidationError("malformed checkpoint")
        return Checkpoint(doc.get("verdict", "unknown"), doc["unresolved"],
                          doc.get("fingerprint"))


def checkpoint_of(summary: Summary, task: VerificationTask) -> Checkpoint:
    return Checkpoint(summary.verdict, summary.unresolved, task_fingerprint(task))


ReportSink = Callable[[SubproblemReport], None]


class _Search:
    def __init__(self, task: VerificationTask, cfg: SearchConfig,
                 on_report: Optional[ReportSink]):
        self.task = task
        self.cfg = cfg
        self.on_report = on_report
        self.lock = threading.Lock()
        self.cond = threading.Condition(self.lock)
        self.stack: list[Subproblem] = []
        self.active = 0
        self.cancel = threading.Event()
        self.reports: list[SubproblemReport] = []
        self.leftover: list[Subproblem] = []
        self.fatal: Optional[BaseException] = None
        self.live_procs: dict[int, object] = {}
        self.deadline: Optional[float] = None
        limits = []
        if cfg.stop_mode == BUDGET:
            limits.append(cfg.budget)
        if cfg.wall_limit is not None:
            limits.append(cfg.wall_limit)
        if limits:
            self.deadline = time.monotonic() + min(limits)
        self.leaves_total = sum(leaf_count(e) for e in task.instances)
        self.interrupted = False

    # -- reporting ------------------------------------------------------------

    def _emit(self, report: SubproblemReport) -> None:
        with self.lock:
            self.reports.append(report)
            if self.on_report is not None:
                self.on_report(report)

    def _serialize_boxes(self, boxes: Sequence[dom.DomainBox]) -> list:
        return [dom.trail_to_json(b) for b in boxes]

    # -- cancellation -----------------------------------------------------------

    def _cancel_all(self) -> None:
        self.cancel.set()
        with self.lock:
            procs = list(self.live_procs.values())
        for proc in procs:
            if proc is not None:
                solver._kill_group(proc)
        with self.cond:
            self.cond.notify_all()

    def _register_proc(self, proc) -> None:
        tid = threading.get_ident()
        with self.lock:
            if proc is None:
                self.live_procs.pop(tid, None)
            else:
                self.live_procs[tid] = proc
        if proc is not None and self.cancel.is_set():
            solver._kill_group(proc)

    # -- the worker loop -----------------------------------------------------------

    def run_workers(self) -> None:
        n = max(1, self.cfg.workers)
        threads = [threading.Thread(target=self._worker, name=f"search-{i}", daemon=True)
                   for i in range(n)]
        for t in threads:
            t.start()
        try:
            for t in threads:
                t.join()
        except KeyboardInterrupt:
            # graceful cancellation: kill in-flight solvers, keep partial results
            self.interrupted = True
            self._cancel_all()
            for t in threads:
                t.join()
        if self.fatal is not None:
            raise self.fatal

    def _worker(self) -> None:
        try:
            while True:
                with self.cond:
                    while not self.stack and self.active > 0 \
                            and not self.cancel.is_set():
                        self.cond.wait(0.05)
                    if self.cancel.is_set() or (not self.stack and self.active == 0):
                        return
                    sub = self.stack.pop()
                    self.active += 1
                try:
                    children = self._process(sub)
                finally:
                    with self.cond:
                        self.active -= 1
                        if children:
                            self.stack.extend(children)
                        self.cond.notify_all()
        except SolverUnavailable as exc:
            with self.lock:
                if self.fatal is None:
                    self.fatal = exc
            self._cancel_all()
        except BaseException as exc:  # internal errors abort the search
            with self.lock:
                if self.fatal is None:
                    self.fatal = exc
            self._cancel_all()

    # -- one subproblem -----------------------------------------------------------

    def _deep_check(self, boxes):
        def check(instance: int, branch_box: dom.DomainBox) -> bool:
            probe = list(boxes)
            probe[instance] = branch_box
            script = encode.build_script(self.task, probe, include_ensembles=False)
            timeout = min(0.5, self.cfg.subproblem_timeout or 0.5)
            try:
                verdict = solver.solve(script, timeout, self.cfg.solver_cmd)
            except ProtocolError:
                return True
            return verdict.status != "unsat"

        return check

    def _process(self, sub: Subproblem) -> list[Subproblem]:
        if self.cancel.is_set():
            with self.lock:
                self.leftover.append(sub)
            return []
        cfg = self.cfg
        boxes_json = self._serialize_boxes(sub.boxes)
        if self.deadline is not None and time.monotonic() >= self.deadline:
            self._emit(SubproblemReport(
                "unknown_terminal", boxes_json, sub.depth,
                leaves_before=self.leaves_total, reason="budget-exhausted"))
            return []

        deep = self._deep_check(sub.boxes) if cfg.deep_prune else None
        pruned = [
            reduce.prune(e, b, i, deep)
            for i, (e, b) in enumerate(zip(self.task.instances, sub.boxes))
        ]
        leaves_after = sum(p.pruned_leaf_count for p in pruned)
        script = encode.build_script(self.task, sub.boxes,
                                     [p.ensemble for p in pruned])
        self._dump(script, boxes_json)

        timeout = cfg.subproblem_timeout * (cfg.timeout_growth ** sub.depth)
        if self.deadline is not None:
            timeout = min(timeout, max(0.0, self.deadline - time.monotonic()))
            if timeout <= 0:
                self._emit(SubproblemReport(
                    "unknown_terminal", boxes_json, sub.depth,
                    leaves_before=self.leaves_total, leaves_after=leaves_after,
                    reason="budget-exhausted"))
                return []
        verdict = solver.solve(script, timeout, cfg.solver_cmd,
                               cancel=self._register_proc)
        if self.cancel.is_set():
            with self.lock:
                self.leftover.append(sub)
            return []

        common = dict(boxes=boxes_json, depth=sub.depth,
                      solve_time=verdict.wall_time,
                      leaves_before=self.leaves_total, leaves_after=leaves_after)
        if verdict.status == "unsat":
            self._emit(SubproblemReport("unsat", **common))
            return []
        if verdict.status == "sat":
            try:
                decoded = solver.decode_model(verdict, self.task)
            except ProtocolError as exc:
                self._emit(SubproblemReport("unknown_terminal", **common,
                                            reason=f"protocol-error: {exc}"))
                return []
            ok = self._recheck(decoded, sub.boxes)
            if not ok:
                self._emit(SubproblemReport("unknown_terminal", **common,
                                            reason="witness-recheck-failed"))
                return []
            self._emit(SubproblemReport("sat", **common,
                                        witnesses=decoded.instances,
                                        outputs=decoded.outputs))
            if cfg.stop_mode == FIRST_SAT:
                self._cancel_all()
            return []

        # unknown: split or give up
        if sub.depth >= cfg.max_depth:
            self._emit(SubproblemReport("unknown_terminal", **common,
                                        reason="max-depth"))
            return []
        chosen = None
        n = self.task.num_instances
        for offset in range(n):
            instance = (sub.depth + offset) % n
            cond = reduce.best_split(pruned[instance].ensemble, sub.boxes[instance])
            if cond is not None:
                chosen = (instance, cond)
                break
        if chosen is None:
            self._emit(SubproblemReport("unknown_terminal", **common,
                                        reason="no-split"))
            return []
        instance, cond = chosen
        self._emit(SubproblemReport("unknown_split", **common,
                                    condition=_cond_json(cond, instance)))
        children = []
        for polarity in (True, False):
            refined = dom.refine(sub.boxes[instance], cond, polarity)
            assert refined is not None  # undecided conditions split both ways
            boxes = list(sub.boxes)
            boxes[instance] = refined
            children.append(Subproblem(tuple(boxes), sub.depth + 1))
        # LIFO stack: push the false side first so the true side is explored first
        children.reverse()
        return children

    def _recheck(self, decoded, boxes) -> bool:
        for e, x, out, box in zip(self.task.instances, decoded.instances,
                                  decoded.outputs, boxes):
            if evaluate_exact(e, x) != out:
                return False
            if not dom.contains(box, x):
                return False
        return satisfies_task(self.task, decoded.instances, decoded.aux)

    def _dump(self, script: encode.SmtScript, boxes_json: list) -> None:
        if not self.cfg.dump_smt_dir:
            return
        digest = hashlib.sha256(json.dumps(boxes_json, sort_keys=True).encode())
        path = os.path.join(self.cfg.dump_smt_dir, digest.hexdigest()[:16] + ".smt2")
        os.makedirs(self.cfg.dump_smt_dir, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(script.text)

    # -- summary ----------------------------------------------------------------

    def summarize(self, started: float, vacuous_unsat: bool = False) -> Summary:
        s = Summary(verdict="unknown")
        for r in self.reports:
            if r.status == "sat":
                s.n_sat += 1
                s.witnesses.append((r.witnesses, r.outputs))
            elif r.status == "unsat":
                s.n_unsat += 1
            elif r.status == "unknown_terminal":
                s.n_unknown += 1
                s.unresolved.append(r.boxes)
            else:
                s.n_splits += 1
        for sub in self.leftover + self.stack:
            s.unresolved.append(self._serialize_boxes(sub.boxes))
        if s.n_sat:
            s.verdict = "sat"
        elif not s.unresolved:
            s.verdict = "unsat"
        s.total_time = time.monotonic() - started
        s.interrupted = self.interrupted
        return s


def _cond_json(cond, instance: int) -> dict:
    from .model import LessThan

    if isinstance(cond, LessThan):
        doc = {"lt": {"attr": cond.attr, "threshold": cond.threshold}}
    else:
        doc = {"bool": {"attr": cond.attr}}
    doc["instance"] = instance
    return doc


def _seed_boxes(task: VerificationTask) -> Optional[list[dom.DomainBox]]:
    """Per-instance root boxes: the question's box approximation, or None."""
    boxes = []
    for i in range(task.num_instances):
        b = box_approximation(task, i)
        if b is None:
            return None
        boxes.append(b)
    return boxes


def run(task: VerificationTask, cfg: SearchConfig,
        on_report: Optional[ReportSink] = None) -> Summary:
    """Run the full prune-divide-and-conquer search. Returns the Summary."""
    validate(task)
    started = time.monotonic()
    search = _Search(task, cfg, on_report)
    roots = _seed_boxes(task)
    if roots is None:
        # the question's box constraints are contradictory: no instance exists
        report = SubproblemReport(
            "unsat", [[] for _ in task.instances], 0,
            leaves_before=search.leaves_total,
            leaves_after=search.leaves_total, reason="vacuous-empty-domain")
        search._emit(report)
        return search.summarize(started)
    search.stack.append(Subproblem(tuple(roots), 0))
    search.run_workers()
    return search.summarize(started)


def resume(checkpoint: Checkpoint, task: VerificationTask, cfg: SearchConfig,
           on_report: Optional[ReportSink] = None) -> Summary:
    """Re-run only the unresolved boxes of an earlier run.

    The current task's box approximation is re-applied to every resumed box,
    so a strengthened background formula can empty a box, which is then
    reported unsat without a solver call. An empty checkpoint returns the
    prior verdict unchanged.
    """
    validate(task)
    if checkpoint.fingerprint is not None \
            and checkpoint.fingerprint != task_fingerprint(task):
        raise ValidationError("checkpoint does not match the task's ensembles")
    started = time.monotonic()
    search = _Search(task, cfg, on_report)
    if not checkpoint.unresolved:
        s = Summary(verdict=checkpoint.verdict)
        s.total_time = time.monotonic() - started
        return s
    approx = _seed_boxes(task)
    for entry in checkpoint.unresolved:
        if not isinstance(entry, list) or len(entry) != task.num_instances:
            raise ValidationError("checkpoint entry does not match instance count")
        boxes = []
        empty = approx is None
        depth = 0
        for i, trails in enumerate(entry):
            steps = dom.trail_from_json(trails)
            depth += len(steps)
            box = dom.replay_trail(task.instances[i].attr_types, steps)
            if box is None:
                raise ValidationError("checkpoint box replays to an empty domain")
            if not empty:
                for cond, pol in approx[i].trail:
                    box = dom.refine(box, cond, pol)
                    if box is None:
                        empty = True
                        break
            boxes.append(box)
        if empty:
            search._emit(SubproblemReport(
                "unsat", entry, depth, leaves_before=search.leaves_total,
                leaves_after=0, reason="vacuous-empty-domain"))
            continue
        search.stack.append(Subproblem(tuple(boxes), depth))
    if search.stack:
        search.run_workers()
    summary = search.summarize(started)
    if summary.verdict == "unsat" and checkpoint.verdict == "sat":
        summary.verdict = "sat"
    return summary
