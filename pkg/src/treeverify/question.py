"""Constraint formulas over one or more instances of an ensemble.

A question is a boolean/linear constraint tree over three kinds of variables:
attribute values of an instance, the ensemble output for an instance, and
auxiliary real/boolean variables introduced by the question itself (distance
budgets, selector booleans, ...). Background knowledge is a second formula of
the same shape that is conjoined to every query.

The builders in this module cover the recurring question families: plain
constraint conjunctions, monotonicity violation pairs, norm-bounded
adversarial perturbations, and pairs differing in a single attribute.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from . import domain as dom
from .errors import ValidationError
from .model import (
    BOOL,
    REAL,
    BoolIsTrue,
    Ensemble,
    Instance,
    LessThan,
    check_instance,
    evaluate_exact,
)

# ---------------------------------------------------------------------------
# Variables and linear expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttrVar:
    instance: int
    attr: int


@dataclass(frozen=True)
class OutputVar:
    instance: int


@dataclass(frozen=True)
class AuxVar:
    name: str
    sort: str  # REAL or BOOL


VarRef = Union[AttrVar, OutputVar, AuxVar]


@dataclass(frozen=True)
class LinExpr:
    """Linear expression: sum of (coefficient, real variable) terms plus a constant."""

    terms: tuple[tuple[float, VarRef], ...] = ()
    const: float = 0.0

    def __add__(self, other) -> "LinExpr":
        other = as_linexpr(other)
        return LinExpr(self.terms + other.terms, self.const + other.const)

    __radd__ = __add__

    def __sub__(self, other) -> "LinExpr":
        other = as_linexpr(other)
        neg = tuple((-c, v) for c, v in other.terms)
        return LinExpr(self.terms + neg, self.const - other.const)

    def __rsub__(self, other) -> "LinExpr":
        return as_linexpr(other) - self

    def __mul__(self, scalar) -> "LinExpr":
        s = float(scalar)
        return LinExpr(tuple((c * s, v) for c, v in self.terms), self.const * s)

    __rmul__ = __mul__


def as_linexpr(x) -> LinExpr:
    if isinstance(x, LinExpr):
        return x
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return LinExpr((), float(x))
    raise ValidationError(f"cannot interpret {x!r} as a linear expression")


def attr(instance: int, k: int) -> LinExpr:
    """Real attribute k of the given instance, as a linear expression."""
    return LinExpr(((1.0, AttrVar(instance, k)),))


def out(instance: int) -> LinExpr:
    """Ensemble output of the given instance."""
    return LinExpr(((1.0, OutputVar(instance)),))


def aux_real(name: str) -> LinExpr:
    return LinExpr(((1.0, AuxVar(name, REAL)),))


# ---------------------------------------------------------------------------
# Question AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cmp:
    lhs: LinExpr
    op: str  # one of < <= = >= >
    rhs: LinExpr


@dataclass(frozen=True)
class BoolVar:
    var: VarRef  # boolean attribute or boolean auxiliary


@dataclass(frozen=True)
class Not:
    arg: "QuestionAst"


@dataclass(frozen=True)
class And:
    args: tuple["QuestionAst", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["QuestionAst", ...]


@dataclass(frozen=True)
class Implies:
    a: "QuestionAst"
    b: "QuestionAst"


QuestionAst = Union[Cmp, BoolVar, Not, And, Or, Implies]

#: The empty conjunction.
TRUE = And(())

CMP_OPS = ("<", "<=", "=", ">=", ">")


def lt(a, b) -> Cmp:
    return Cmp(as_linexpr(a), "<", as_linexpr(b))


def le(a, b) -> Cmp:
    return Cmp(as_linexpr(a), "<=", as_linexpr(b))


def eq(a, b) -> Cmp:
    return Cmp(as_linexpr(a), "=", as_linexpr(b))


def ge(a, b) -> Cmp:
    return Cmp(as_linexpr(a), ">=", as_linexpr(b))


def gt(a, b) -> Cmp:
    return Cmp(as_linexpr(a), ">", as_linexpr(b))


def bool_attr(instance: int, k: int) -> BoolVar:
    return BoolVar(AttrVar(instance, k))


def aux_bool(name: str) -> BoolVar:
    return BoolVar(AuxVar(name, BOOL))


def conj(*args: QuestionAst) -> QuestionAst:
    return And(tuple(args))


def exactly_one(selectors: Sequence[BoolVar]) -> QuestionAst:
    """Exactly one of the selector booleans is true.

    Emitted as a disjunction of full sign patterns, e.g. for two selectors
    (s1 and not s2) or (not s1 and s2).
    """
    cases = []
    for i in range(len(selectors)):
        lits: list[QuestionAst] = [
            s if j == i else Not(s) for j, s in enumerate(selectors)
        ]
        cases.append(And(tuple(lits)))
    return Or(tuple(cases))


# ---------------------------------------------------------------------------
# Verification tasks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VerificationTask:
    """One ensemble per instance index, a question, and background knowledge."""

    instances: tuple[Ensemble, ...]
    question: QuestionAst
    background: QuestionAst = TRUE

    @property
    def num_instances(self) -> int:
        return len(self.instances)


def _attr_equal(i: int, j: int, k: int, attr_type: str) -> QuestionAst:
    if attr_type == REAL:
        return eq(attr(i, k), attr(j, k))
    bi, bj = bool_attr(i, k), bool_attr(j, k)
    return Or((And((bi, bj)), And((Not(bi), Not(bj)))))


def _attr_differs(i: int, j: int, k: int, attr_type: str) -> QuestionAst:
    if attr_type == REAL:
        return Not(eq(attr(i, k), attr(j, k)))
    bi, bj = bool_attr(i, k), bool_attr(j, k)
    return Or((And((bi, Not(bj))), And((Not(bi), bj))))


def single_instance_question(e: Ensemble, constraints: Sequence[QuestionAst],
                             background: QuestionAst = TRUE) -> VerificationTask:
    """A one-instance task asking whether all constraints can hold at once."""
    task = VerificationTask((e,), And(tuple(constraints)), background)
    validate(task)
    return task


def monotonicity_task(e: Ensemble, k_star: int) -> VerificationTask:
    """Ask for a pair violating monotonicity in attribute k_star.

    Instance 0 has the smaller k_star value but the larger output; SAT yields
    a violation witness pair, UNSAT proves the model non-decreasing in k_star.
    Boolean attributes use the order false < true.
    """
    if not (0 <= k_star < e.num_attributes):
        raise ValidationError(f"attribute {k_star} out of range")
    parts: list[QuestionAst] = []
    for k, t in enumerate(e.attr_types):
        if k != k_star:
            parts.append(_attr_equal(0, 1, k, t))
    if e.attr_types[k_star] == REAL:
        parts.append(lt(attr(0, k_star), attr(1, k_star)))
    else:
        parts.append(And((Not(bool_attr(0, k_star)), bool_attr(1, k_star))))
    parts.append(gt(out(0), out(1)))
    task = VerificationTask((e, e), And(tuple(parts)))
    validate(task)
    return task


def adversarial_task(
    models: Union[Ensemble, Sequence[Ensemble]],
    x: Instance,
    inf_bound: float,
    l1_budget: Optional[float] = None,
    label_constraint: QuestionAst = TRUE,
) -> VerificationTask:
    """Ask for a perturbed instance within norm bounds that meets a label constraint.

    The perturbed instance gets per-attribute box constraints
    ``x_k - inf_bound < x'_k < x_k + inf_bound``; boolean attributes may flip
    only when inf_bound >= 1. With an l1_budget, auxiliary variables d_k bound
    each attribute's deviation (a boolean flip counts as 1) and their sum must
    stay strictly below the budget. With several models (one-vs-all classes),
    every model is evaluated on the same perturbed instance and
    label_constraint may compare their outputs.
    """
    if isinstance(models, Ensemble):
        models = (models,)
    models = tuple(models)
    if not models:
        raise ValidationError("at least one model required")
    for m in models[1:]:
        if m.attr_types != models[0].attr_types:
            raise ValidationError("all models must share one attribute signature")
    check_instance(models[0], x)
    if inf_bound < 0:
        raise ValidationError("inf_bound must be non-negative")
    if l1_budget is not None and l1_budget < 0:
        raise ValidationError("l1_budget must be non-negative")

    types = models[0].attr_types
    n = len(models)
    parts: list[QuestionAst] = []
    for i in range(n):
        for k, t in enumerate(types):
            if t == REAL:
                parts.append(gt(attr(i, k), float(x[k]) - inf_bound))
                parts.append(lt(attr(i, k), float(x[k]) + inf_bound))
            elif inf_bound < 1:
                parts.append(bool_attr(i, k) if x[k] else Not(bool_attr(i, k)))
    # all class instances see the same perturbed point
    for i in range(1, n):
        for k, t in enumerate(types):
            parts.append(_attr_equal(i, 0, k, t))
    if l1_budget is not None:
        total = LinExpr()
        for k, t in enumerate(types):
            d = aux_real(f"d{k}")
            if t == REAL:
                parts.append(ge(d, attr(0, k) - float(x[k])))
                parts.append(ge(d, float(x[k]) - attr(0, k)))
            else:
                parts.append(ge(d, 0))
                flip = Not(bool_attr(0, k)) if x[k] else bool_attr(0, k)
                parts.append(Implies(flip, ge(d, 1)))
            total = total + d
        parts.append(lt(total, l1_budget))
    if label_constraint != TRUE:
        parts.append(label_constraint)
    task = VerificationTask(models, And(tuple(parts)))
    validate(task)
    return task


def one_diff_pair_task(
    e: Ensemble,
    protected: Optional[int],
    output_gap: QuestionAst,
) -> VerificationTask:
    """Ask for two instances that differ in exactly one attribute.

    With `protected` given, the pair differs exactly there; with None, selector
    booleans s<k> pick which single attribute differs. `output_gap` relates the
    two outputs, e.g. ge(out(0), out(1) + 2).
    """
    parts: list[QuestionAst] = []
    if protected is not None:
        if not (0 <= protected < e.num_attributes):
            raise ValidationError(f"attribute {protected} out of range")
        for k, t in enumerate(e.attr_types):
            if k == protected:
                parts.append(_attr_differs(0, 1, k, t))
            else:
                parts.append(_attr_equal(0, 1, k, t))
    else:
        selectors = [aux_bool(f"s{k}") for k in range(e.num_attributes)]
        for k, t in enumerate(e.attr_types):
            parts.append(Or((
                And((Not(selectors[k]), _attr_equal(0, 1, k, t))),
                And((selectors[k], _attr_differs(0, 1, k, t))),
            )))
        parts.append(exactly_one(selectors))
    parts.append(output_gap)
    task = VerificationTask((e, e), And(tuple(parts)))
    validate(task)
    return task


def true_count_bound(instance: int, attrs: Sequence[int], bound: float,
                     strict: bool = True, prefix: str = "cnt") -> QuestionAst:
    """Bound the number of true booleans among `attrs` (counts positive values).

    Linearized with one auxiliary real per attribute that is forced to 1 when
    the boolean is true and 0 when false.
    """
    parts: list[QuestionAst] = []
    total = LinExpr()
    for k in attrs:
        y = aux_real(f"{prefix}{k}")
        b = bool_attr(instance, k)
        parts.append(Implies(b, eq(y, 1)))
        parts.append(Implies(Not(b), eq(y, 0)))
        total = total + y
    parts.append(lt(total, bound) if strict else le(total, bound))
    return And(tuple(parts))


def margin_from_probability(p: float) -> float:
    """Raw-score margin equivalent to a logistic probability threshold.

    The logistic link is strictly monotone, so `probability >= p` is exactly
    `raw score >= log(p / (1 - p))`.
    """
    if not 0.0 < p < 1.0:
        raise ValidationError("probability threshold must lie strictly in (0, 1)")
    return math.log(p / (1.0 - p))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

# names reserved for the encoder's attribute/tree/output variables
_RESERVED_NAME = re.compile(r"^(a\d+|w\d+|f)_\d+$")
_VALID_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class _Validator:
    def __init__(self, task: VerificationTask):
        self.task = task
        self.aux_sorts: dict[str, str] = {}

    def fail(self, path: str, msg: str):
        raise ValidationError(f"{path}: {msg}")

    def check_var(self, var: VarRef, path: str, want_sort: str):
        if isinstance(var, AuxVar):
            if var.sort not in (REAL, BOOL):
                self.fail(path, f"unknown aux sort {var.sort!r}")
            if not _VALID_NAME.match(var.name):
                self.fail(path, f"invalid aux name {var.name!r}")
            if _RESERVED_NAME.match(var.name):
                self.fail(path, f"aux name {var.name!r} collides with encoder variables")
            prev = self.aux_sorts.setdefault(var.name, var.sort)
            if prev != var.sort:
                self.fail(path, f"aux {var.name!r} used with sorts {prev} and {var.sort}")
            if var.sort != want_sort:
                self.fail(path, f"aux {var.name!r} has sort {var.sort}, expected {want_sort}")
            return
        if not (0 <= var.instance < self.task.num_instances):
            self.fail(path, f"instance index {var.instance} out of range")
        if isinstance(var, OutputVar):
            if want_sort != REAL:
                self.fail(path, "ensemble output is real-sorted")
            return
        e = self.task.instances[var.instance]
        if not (0 <= var.attr < e.num_attributes):
            self.fail(path, f"attribute {var.attr} out of range")
        if e.attr_types[var.attr] != want_sort:
            self.fail(path, f"attribute {var.attr} is {e.attr_types[var.attr]}, "
                            f"expected {want_sort}")

    def check_linexpr(self, lin: LinExpr, path: str):
        if not isinstance(lin, LinExpr):
            self.fail(path, f"expected a linear expression, got {type(lin).__name__}")
        if not math.isfinite(lin.const):
            self.fail(path, "non-finite constant")
        for i, (c, v) in enumerate(lin.terms):
            if not math.isfinite(c):
                self.fail(f"{path}.terms[{i}]", "non-finite coefficient")
            self.check_var(v, f"{path}.terms[{i}]", REAL)

    def check_ast(self, ast: QuestionAst, path: str):
        if isinstance(ast, Cmp):
            if ast.op not in CMP_OPS:
                self.fail(path, f"unknown comparison operator {ast.op!r}")
            self.check_linexpr(ast.lhs, f"{path}.lhs")
            self.check_linexpr(ast.rhs, f"{path}.rhs")
        elif isinstance(ast, BoolVar):
            if isinstance(ast.var, OutputVar):
                self.fail(path, "ensemble output used as a boolean")
            self.check_var(ast.var, path, BOOL)
        elif isinstance(ast, Not):
            self.check_ast(ast.arg, f"{path}.arg")
        elif isinstance(ast, (And, Or)):
            word = "args"
            for i, a in enumerate(ast.args):
                self.check_ast(a, f"{path}.{word}[{i}]")
        elif isinstance(ast, Implies):
            self.check_ast(ast.a, f"{path}.a")
            self.check_ast(ast.b, f"{path}.b")
        else:
            self.fail(path, f"not a question node: {type(ast).__name__}")


def validate(task: VerificationTask) -> None:
    """Check all invariants of the task; raise ValidationError with an AST path."""
    if task.num_instances < 1:
        raise ValidationError("task needs at least one instance")
    v = _Validator(task)
    v.check_ast(task.question, "question")
    v.check_ast(task.background, "background")


def collect_aux(task: VerificationTask) -> dict[str, str]:
    """All auxiliary variables with their sorts, in first-use order."""
    found: dict[str, str] = {}

    def walk(ast: QuestionAst):
        if isinstance(ast, Cmp):
            for _, var in ast.lhs.terms + ast.rhs.terms:
                if isinstance(var, AuxVar):
                    found.setdefault(var.name, var.sort)
        elif isinstance(ast, BoolVar):
            if isinstance(ast.var, AuxVar):
                found.setdefault(ast.var.name, ast.var.sort)
        elif isinstance(ast, Not):
            walk(ast.arg)
        elif isinstance(ast, (And, Or)):
            for a in ast.args:
                walk(a)
        elif isinstance(ast, Implies):
            walk(ast.a)
            walk(ast.b)

    walk(task.question)
    walk(task.background)
    return found


# ---------------------------------------------------------------------------
# Box approximation: the tightest per-attribute box implied by the top-level
# conjuncts of question and background. Sound over-approximation only; every
# instance satisfying the question lies inside the returned box.
# ---------------------------------------------------------------------------


def _top_conjuncts(ast: QuestionAst) -> list[QuestionAst]:
    if isinstance(ast, And):
        parts: list[QuestionAst] = []
        for a in ast.args:
            parts.extend(_top_conjuncts(a))
        return parts
    return [ast]


def _single_attr_bound(c: Cmp, instance: int) -> Optional[tuple[int, str, float]]:
    """Normalize a conjunct to (attr, op, bound) when it is a box constraint."""
    delta = c.lhs - c.rhs
    coef = 0.0
    the_attr = None
    for cc, v in delta.terms:
        if cc == 0.0:
            continue
        if not isinstance(v, AttrVar) or v.instance != instance:
            return None
        if the_attr is None:
            the_attr = v.attr
            coef = cc
        elif v.attr == the_attr:
            coef += cc
        else:
            return None
    if the_attr is None or coef == 0.0:
        return None
    bound = -delta.const / coef
    op = c.op
    if coef < 0:
        op = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "="}[op]
    return the_attr, op, bound


def box_approximation(task: VerificationTask, instance: int) -> Optional[dom.DomainBox]:
    """Box implied by the question's single-attribute conjuncts for one instance.

    Returns None when the conjuncts are directly contradictory (the empty
    box). Bounds that half-open intervals cannot express exactly (<=, =, and
    the boundary point of >) are widened by at most one float step, keeping
    the approximation sound.
    """
    e = task.instances[instance]
    box: Optional[dom.DomainBox] = dom.unconstrained(e.attr_types)
    conjuncts = _top_conjuncts(task.question) + _top_conjuncts(task.background)
    for c in conjuncts:
        if box is None:
            return None
        if isinstance(c, BoolVar) and isinstance(c.var, AttrVar) \
                and c.var.instance == instance:
            box = dom.refine(box, BoolIsTrue(c.var.attr), True)
        elif isinstance(c, Not) and isinstance(c.arg, BoolVar) \
                and isinstance(c.arg.var, AttrVar) and c.arg.var.instance == instance:
            box = dom.refine(box, BoolIsTrue(c.arg.var.attr), False)
        elif isinstance(c, Cmp):
            found = _single_attr_bound(c, instance)
            if found is None:
                continue
            k, op, bound = found
            if e.attr_types[k] != REAL or not math.isfinite(bound):
                continue
            if op in ("<", "<="):
                hi = bound if op == "<" else math.nextafter(bound, math.inf)
                box = dom.refine(box, LessThan(k, hi), True)
            elif op in (">", ">="):
                box = dom.refine(box, LessThan(k, bound), False)
            else:  # "="
                box = dom.refine(box, LessThan(k, bound), False)
                if box is not None:
                    box = dom.refine(box, LessThan(k, math.nextafter(bound, math.inf)), True)
    return box


# ---------------------------------------------------------------------------
# Exact evaluation of a question on concrete values (witness re-checking)
# ---------------------------------------------------------------------------


def _exact(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def eval_linexpr(lin: LinExpr, values: Sequence[Instance],
                 outputs: Sequence[Fraction], aux: dict) -> Fraction:
    total = _exact(lin.const)
    for c, v in lin.terms:
        if isinstance(v, AttrVar):
            val = _exact(values[v.instance][v.attr])
        elif isinstance(v, OutputVar):
            val = _exact(outputs[v.instance])
        else:
            val = _exact(aux.get(v.name, 0))
        total += _exact(c) * val
    return total


def eval_ast(ast: QuestionAst, values: Sequence[Instance],
             outputs: Sequence[Fraction], aux: dict) -> bool:
    """Evaluate a question on concrete instance values, exactly."""
    if isinstance(ast, Cmp):
        lhs = eval_linexpr(ast.lhs, values, outputs, aux)
        rhs = eval_linexpr(ast.rhs, values, outputs, aux)
        return {"<": lhs < rhs, "<=": lhs <= rhs, "=": lhs == rhs,
                ">=": lhs >= rhs, ">": lhs > rhs}[ast.op]
    if isinstance(ast, BoolVar):
        v = ast.var
        if isinstance(v, AttrVar):
            return bool(values[v.instance][v.attr])
        return bool(aux.get(v.name, False))
    if isinstance(ast, Not):
        return not eval_ast(ast.arg, values, outputs, aux)
    if isinstance(ast, And):
        return all(eval_ast(a, values, outputs, aux) for a in ast.args)
    if isinstance(ast, Or):
        return any(eval_ast(a, values, outputs, aux) for a in ast.args)
    if isinstance(ast, Implies):
        return (not eval_ast(ast.a, values, outputs, aux)) \
            or eval_ast(ast.b, values, outputs, aux)
    raise ValidationError(f"not a question node: {type(ast).__name__}")


def satisfies_task(task: VerificationTask, witnesses: Sequence[Instance],
                   aux: Optional[dict] = None) -> bool:
    """True iff the witnesses satisfy question and background, exactly."""
    if len(witnesses) != task.num_instances:
        raise ValidationError("one witness per instance required")
    outputs = [evaluate_exact(e, x) for e, x in zip(task.instances, witnesses)]
    aux = aux or {}
    return eval_ast(task.question, witnesses, outputs, aux) \
        and eval_ast(task.background, witnesses, outputs, aux)


# ---------------------------------------------------------------------------
# JSON schema
#
#   {"instances": N, "question": <ast>, "background": <ast>}
# ast nodes:
#   {"op": "and"|"or", "args": [...]}, {"op": "not", "args": [x]},
#   {"op": "implies", "args": [a, b]},
#   {"cmp": {"lhs": <linexpr>, "op": "<", "rhs": <linexpr>}},
#   {"var": {"instance": i, "attr": k}}   (boolean attribute literal)
#   {"aux": {"name": "s0", "sort": "bool"}}
# linexpr: {"terms": [[c, <var>], ...], "const": c0} with <var> one of
#   {"var": {...}}, {"out": {"instance": i}}, {"aux": {"name": .., "sort": ..}}.
# ---------------------------------------------------------------------------


def _var_to_json(v: VarRef) -> dict:
    if isinstance(v, AttrVar):
        return {"var": {"instance": v.instance, "attr": v.attr}}
    if isinstance(v, OutputVar):
        return {"out": {"instance": v.instance}}
    return {"aux": {"name": v.name, "sort": v.sort}}


def _var_from_json(obj) -> VarRef:
    if not isinstance(obj, dict):
        raise ValidationError(f"variable reference must be an object, got {obj!r}")
    if "var" in obj:
        d = obj["var"]
        return AttrVar(int(d["instance"]), int(d["attr"]))
    if "out" in obj:
        return OutputVar(int(obj["out"]["instance"]))
    if "aux" in obj:
        d = obj["aux"]
        return AuxVar(str(d["name"]), str(d.get("sort", REAL)))
    raise ValidationError(f"unknown variable reference {obj!r}")


def _linexpr_to_json(lin: LinExpr) -> dict:
    return {"terms": [[c, _var_to_json(v)] for c, v in lin.terms], "const": lin.const}


def _linexpr_from_json(obj) -> LinExpr:
    if not isinstance(obj, dict):
        raise ValidationError("linexpr must be an object")
    terms = []
    for entry in obj.get("terms", []):
        if not (isinstance(entry, list) and len(entry) == 2):
            raise ValidationError(f"linexpr term must be [coefficient, var]: {entry!r}")
        terms.append((float(entry[0]), _var_from_json(entry[1])))
    return LinExpr(tuple(terms), float(obj.get("const", 0.0)))


def ast_to_json(ast: QuestionAst):
    if isinstance(ast, Cmp):
        return {"cmp": {"lhs": _linexpr_to_json(ast.lhs), "op": ast.op,
                        "rhs": _linexpr_to_json(ast.rhs)}}
    if isinstance(ast, BoolVar):
        return _var_to_json(ast.var)
    if isinstance(ast, Not):
        return {"op": "not", "args": [ast_to_json(ast.arg)]}
    if isinstance(ast, And):
        return {"op": "and", "args": [ast_to_json(a) for a in ast.args]}
    if isinstance(ast, Or):
        return {"op": "or", "args": [ast_to_json(a) for a in ast.args]}
    if isinstance(ast, Implies):
        return {"op": "implies", "args": [ast_to_json(ast.a), ast_to_json(ast.b)]}
    raise ValidationError(f"not a question node: {type(ast).__name__}")


def ast_from_json(obj) -> QuestionAst:
    if not isinstance(obj, dict):
        raise ValidationError(f"question node must be an object, got {obj!r}")
    if "cmp" in obj:
        d = obj["cmp"]
        return Cmp(_linexpr_from_json(d["lhs"]), str(d["op"]),
                   _linexpr_from_json(d["rhs"]))
    if "op" in obj:
        op = obj["op"]
        args = obj.get("args", [])
        if not isinstance(args, list):
            raise ValidationError(f"'args' of {op!r} must be an array")
        parsed = tuple(ast_from_json(a) for a in args)
        if op == "and":
            return And(parsed)
        if op == "or":
            return Or(parsed)
        if op == "not":
            if len(parsed) != 1:
                raise ValidationError("'not' takes exactly one argument")
            return Not(parsed[0])
        if op == "implies":
            if len(parsed) != 2:
                raise ValidationError("'implies' takes exactly two arguments")
            return Implies(parsed[0], parsed[1])
        raise ValidationError(f"unknown operator {op!r}")
    if "var" in obj or "aux" in obj:
        return BoolVar(_var_from_json(obj))
    raise ValidationError(f"unknown question node {obj!r}")


def task_to_json(task: VerificationTask) -> dict:
    return {
        "instances": task.num_instances,
        "question": ast_to_json(task.question),
        "background": ast_to_json(task.background),
    }


def task_from_json(doc: dict, models: Sequence[Ensemble]) -> VerificationTask:
    """Attach models to a question document; a single model is reused for all instances."""
    if not isinstance(doc, dict) or "instances" not in doc or "question" not in doc:
        raise ValidationError("question JSON needs 'instances' and 'question'")
    n = doc["instances"]
    if not isinstance(n, int) or n < 1:
        raise ValidationError("'instances' must be a positive integer")
    models = tuple(models)
    if len(models) == 1:
        models = models * n
    if len(models) != n:
        raise ValidationError(f"{n} instances declared but {len(models)} models given")
    question = ast_from_json(doc["question"])
    background = ast_from_json(doc["background"]) if "background" in doc else TRUE
    task = VerificationTask(models, question, background)
    validate(task)
    return task
