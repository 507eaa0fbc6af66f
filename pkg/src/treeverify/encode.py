"""Translate ensembles, domain boxes, and questions into SMT-LIB2 text.

Variable naming per instance i: attribute k is ``a{k}_{i}`` (Real or Bool),
tree m's output is ``w{m}_{i}`` (Real), the ensemble output is ``f_{i}``
(Real). Auxiliary question variables keep their own names; validation rejects
names that could collide with the generated ones.

All numeric literals are the exact decimal expansion of the stored binary64,
so the solver's arithmetic is exact relative to the model as stored. Negative
numbers are emitted as ``(- c)`` since SMT-LIB has no signed literals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Sequence

from .errors import ValidationError
from .model import BOOL, BoolIsTrue, Ensemble, Internal, Leaf, LessThan, SplitCondition, Tree
from .question import (
    And,
    AttrVar,
    AuxVar,
    BoolVar,
    Cmp,
    Implies,
    LinExpr,
    Not,
    Or,
    OutputVar,
    QuestionAst,
    TRUE,
    VerificationTask,
    collect_aux,
)
from . import domain as dom


def fmt_real(x: float) -> str:
    """Exact decimal literal for a binary64 (or int) value."""
    if isinstance(x, bool):
        raise ValidationError("boolean where a numeric literal was expected")
    neg = x < 0
    mag = -x if neg else x
    if isinstance(mag, int) or float(mag).is_integer():
        body = str(int(mag))
    else:
        # Decimal(float) is exact; 'f' format avoids exponent notation
        body = format(Decimal(mag), "f")
    return f"(- {body})" if neg else body


@dataclass
class SmtScript:
    """An SMT-LIB2 script plus the variables it declares (in order)."""

    text: str
    declared_vars: dict[str, str] = field(default_factory=dict)  # name -> Real|Bool


class EncodingContext:
    """Variable names for every instance of a task, plus auxiliaries."""

    def __init__(self, task: VerificationTask):
        self.task = task
        self.declared: dict[str, str] = {}
        for i, e in enumerate(task.instances):
            for k, t in enumerate(e.attr_types):
                self.declared[self.attr_name(i, k)] = "Bool" if t == BOOL else "Real"
            for m in range(len(e.trees)):
                self.declared[self.tree_name(i, m)] = "Real"
            self.declared[self.out_name(i)] = "Real"
        for name, sort in collect_aux(task).items():
            if name in self.declared:
                raise RuntimeError(f"aux variable {name!r} collides with a generated name")
            self.declared[name] = "Bool" if sort == BOOL else "Real"

    @staticmethod
    def attr_name(instance: int, k: int) -> str:
        return f"a{k}_{instance}"

    @staticmethod
    def tree_name(instance: int, m: int) -> str:
        return f"w{m}_{instance}"

    @staticmethod
    def out_name(instance: int) -> str:
        return f"f_{instance}"

    def var_name(self, var) -> str:
        if isinstance(var, AttrVar):
            return self.attr_name(var.instance, var.attr)
        if isinstance(var, OutputVar):
            return self.out_name(var.instance)
        if isinstance(var, AuxVar):
            return var.name
        raise ValidationError(f"unknown variable reference {var!r}")


def cond_text(cond: SplitCondition, instance: int) -> str:
    name = EncodingContext.attr_name(instance, cond.attr)
    if isinstance(cond, LessThan):
        return f"(< {name} {fmt_real(cond.threshold)})"
    return name


def literal_text(cond: SplitCondition, polarity: bool, instance: int) -> str:
    text = cond_text(cond, instance)
    return text if polarity else f"(not {text})"


def enc_node(tree: Tree, node_idx: int, m: int, instance: int) -> str:
    """Encode the subtree at node_idx: internal nodes branch on their condition,
    leaves pin the tree output variable."""
    node = tree.nodes[node_idx]
    if isinstance(node, Leaf):
        return f"(= {EncodingContext.tree_name(instance, m)} {fmt_real(node.value)})"
    c = cond_text(node.cond, instance)
    left = enc_node(tree, node.left, m, instance)
    right = enc_node(tree, node.right, m, instance)
    return f"(or (and {c} {left}) (and (not {c}) {right}))"


def enc_ensemble(e: Ensemble, instance: int) -> str:
    """Conjunction of tree encodings and the output-sum constraint."""
    parts = [enc_node(t, 0, m, instance) for m, t in enumerate(e.trees)]
    ws = " ".join(EncodingContext.tree_name(instance, m) for m in range(len(e.trees)))
    parts.append(f"(= {EncodingContext.out_name(instance)} (+ {fmt_real(e.base_score)} {ws}))")
    return "(and " + " ".join(parts) + ")"


def enc_linexpr(lin: LinExpr, ctx: EncodingContext) -> str:
    parts = []
    for c, v in lin.terms:
        name = ctx.var_name(v)
        if c == 1.0:
            parts.append(name)
        elif c == -1.0:
            parts.append(f"(- {name})")
        else:
            parts.append(f"(* {fmt_real(c)} {name})")
    if lin.const != 0.0 or not parts:
        parts.append(fmt_real(lin.const))
    if len(parts) == 1:
        return parts[0]
    return "(+ " + " ".join(parts) + ")"


def enc_question(ast: QuestionAst, ctx: EncodingContext) -> str:
    """Structural translation of a validated question AST."""
    if isinstance(ast, Cmp):
        return f"({ast.op} {enc_linexpr(ast.lhs, ctx)} {enc_linexpr(ast.rhs, ctx)})"
    if isinstance(ast, BoolVar):
        return ctx.var_name(ast.var)
    if isinstance(ast, Not):
        return f"(not {enc_question(ast.arg, ctx)})"
    if isinstance(ast, And):
        if not ast.args:
            return "true"
        if len(ast.args) == 1:
            return enc_question(ast.args[0], ctx)
        return "(and " + " ".join(enc_question(a, ctx) for a in ast.args) + ")"
    if isinstance(ast, Or):
        if not ast.args:
            return "false"
        if len(ast.args) == 1:
            return enc_question(ast.args[0], ctx)
        return "(or " + " ".join(enc_question(a, ctx) for a in ast.args) + ")"
    if isinstance(ast, Implies):
        return f"(=> {enc_question(ast.a, ctx)} {enc_question(ast.b, ctx)})"
    raise ValidationError(f"not a question node: {type(ast).__name__}")


def build_script(
    task: VerificationTask,
    boxes: Sequence[dom.DomainBox],
    ensembles: Sequence[Ensemble] | None = None,
    include_ensembles: bool = True,
) -> SmtScript:
    """Assemble the full script: declarations, box trail literals, (pruned)
    ensemble encodings, question, background, check-sat, get-value.

    `ensembles` defaults to the task's own (unpruned) ensembles; pass the
    pruned ones to solve a subproblem. With include_ensembles=False only the
    question, background, and trail literals are asserted (the cheap
    branch-feasibility check).
    """
    if ensembles is None:
        ensembles = task.instances
    if len(boxes) != task.num_instances or len(ensembles) != task.num_instances:
        raise ValidationError("one box and one ensemble per instance required")
    ctx = EncodingContext(task)
    lines = ["(set-logic QF_LRA)", "(set-option :produce-models true)"]
    for name, sort in ctx.declared.items():
        lines.append(f"(declare-fun {name} () {sort})")
    for i, box in enumerate(boxes):
        for cond, polarity in box.trail:
            lines.append(f"(assert {literal_text(cond, polarity, i)})")
    if include_ensembles:
        for i, e in enumerate(ensembles):
            lines.append(f"(assert {enc_ensemble(e, i)})")
    if task.question != TRUE:
        lines.append(f"(assert {enc_question(task.question, ctx)})")
    if task.background != TRUE:
        lines.append(f"(assert {enc_question(task.background, ctx)})")
    lines.append("(check-sat)")
    lines.append("(get-value (" + " ".join(ctx.declared) + "))")
    lines.append("(exit)")
    return SmtScript("\n".join(lines) + "\n", dict(ctx.declared))
