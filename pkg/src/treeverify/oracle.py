"""Brute-force reference implementations for small-scale validation.

Deliberately built on the root-to-leaf path view of the trees rather than the
compact encoding the solver sees, so the two routes stay independent: a leaf
combination (one leaf per tree) is feasible iff the per-attribute
intersection of its path literals is non-empty, and the ensemble output for
that combination is a constant. Questions are expanded to DNF over atoms;
given a combination per instance, each conjunct decomposes per attribute and
is decided with exact one-dimensional reasoning (intervals with open/closed
endpoints and excluded points, difference constraints between two instances,
and sum-of-deviation budgets).

Everything here favors being obviously correct over being fast; guards bound
the enumeration sizes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

from . import domain as dom
from .errors import TooLarge, UnsupportedQuestion
from .model import (
    BOOL,
    REAL,
    BoolIsTrue,
    Ensemble,
    Instance,
    Internal,
    Leaf,
    LessThan,
    Tree,
)
from .question import (
    And,
    AttrVar,
    AuxVar,
    BoolVar,
    Cmp,
    Implies,
    Not,
    Or,
    OutputVar,
    QuestionAst,
    VerificationTask,
)

COMBO_GUARD = 10 ** 6
DNF_GUARD = 4096


# ---------------------------------------------------------------------------
# Leaf combinations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LeafCombo:
    """One leaf chosen per tree, its joint path box, and the resulting output."""

    choice: tuple[int, ...]  # leaf node index per tree
    box: dom.DomainBox
    output: Fraction


def _tree_leaves(tree: Tree) -> list[tuple[int, float, list]]:
    """(leaf index, value, path literals) for every leaf, left-to-right."""
    out = []

    def walk(idx: int, lits: list):
        node = tree.nodes[idx]
        if isinstance(node, Leaf):
            out.append((idx, node.value, list(lits)))
            return
        walk(node.left, lits + [(node.cond, True)])
        walk(node.right, lits + [(node.cond, False)])

    walk(0, [])
    return out


def enumerate_combos(e: Ensemble, guard: int = COMBO_GUARD) -> list[LeafCombo]:
    """All feasible leaf combinations with their boxes and outputs."""
    per_tree = [_tree_leaves(t) for t in e.trees]
    total = 1
    for leaves in per_tree:
        total *= len(leaves)
        if total > guard:
            raise TooLarge(f"more than {guard} potential leaf combinations")
    base = Fraction(e.base_score)
    results: list[LeafCombo] = []
    empty = dom.unconstrained(e.attr_types)

    def rec(ti: int, box: dom.DomainBox, choice: list[int], acc: Fraction):
        if ti == len(per_tree):
            results.append(LeafCombo(tuple(choice), box, acc))
            return
        for leaf_idx, value, lits in per_tree[ti]:
            b = box
            for cond, pol in lits:
                b = dom.refine(b, cond, pol)
                if b is None:
                    break
            if b is None:
                continue
            choice.append(leaf_idx)
            rec(ti + 1, b, choice, acc + Fraction(value))
            choice.pop()

    rec(0, empty, [], base)
    return results


def combo_for_instance(e: Ensemble, combos: Sequence[LeafCombo],
                       x: Instance) -> Optional[LeafCombo]:
    """The unique combination whose box contains x (partition property)."""
    hits = [c for c in combos if dom.contains(c.box, x)]
    return hits[0] if len(hits) == 1 else None


# ---------------------------------------------------------------------------
# Exact one-dimensional sets: interval with open/closed ends, minus points
# ---------------------------------------------------------------------------

Rat = Fraction
Bound = Optional[Fraction]  # None encodes the unbounded side


@dataclass
class RatSet:
    lo: Bound = None
    lo_open: bool = False
    hi: Bound = None
    hi_open: bool = True
    excluded: frozenset = frozenset()

    def is_empty(self) -> bool:
        if self.lo is not None and self.hi is not None:
            if self.lo > self.hi:
                return True
            if self.lo == self.hi:
                if self.lo_open or self.hi_open or self.lo in self.excluded:
                    return True
        return False

    def restrict(self, op: str, b: Fraction) -> "RatSet":
        s = RatSet(self.lo, self.lo_open, self.hi, self.hi_open, self.excluded)
        if op in ("<", "<="):
            strict = op == "<"
            if s.hi is None or b < s.hi or (b == s.hi and strict and not s.hi_open):
                s.hi, s.hi_open = b, strict
        elif op in (">", ">="):
            strict = op == ">"
            if s.lo is None or b > s.lo or (b == s.lo and strict and not s.lo_open):
                s.lo, s.lo_open = b, strict
        elif op == "=":
            s = s.restrict(">=", b).restrict("<=", b)
        elif op == "!=":
            s.excluded = s.excluded | {b}
        else:
            raise ValueError(op)
        return s

    def contains(self, v: Fraction) -> bool:
        if v in self.excluded:
            return False
        if self.lo is not None and (v < self.lo or (v == self.lo and self.lo_open)):
            return False
        if self.hi is not None and (v > self.hi or (v == self.hi and self.hi_open)):
            return False
        return True

    def pick(self) -> Optional[Fraction]:
        """Some element, exactly; None when empty."""
        if self.is_empty():
            return None
        if self.lo is None and self.hi is None:
            base, step = Fraction(0), Fraction(1)
        elif self.lo is None:
            base, step = self.hi - 1, Fraction(-1)
        elif self.hi is None:
            base = self.lo if not self.lo_open else self.lo + 1
            step = Fraction(1)
        else:
            if not self.lo_open and self.lo not in self.excluded:
                base = self.lo
            else:
                base = None
            if base is None:
                # sweep interior points (lo + span/2, lo + span/4, ...)
                span = self.hi - self.lo
                frac = Fraction(1, 2)
                for _ in range(len(self.excluded) + 60):
                    v = self.lo + span * frac
                    if self.contains(v):
                        return v
                    frac /= 2
                return None
            step = (self.hi - self.lo) / (len(self.excluded) + 2)
        v = base
        for _ in range(len(self.excluded) + 2):
            if self.contains(v):
                return v
            v = v + step
        return None


def _ratset_from_interval(iv: dom.RealInterval) -> RatSet:
    lo = None if iv.lo == float("-inf") else Fraction(iv.lo)
    hi = None if iv.hi == float("inf") else Fraction(iv.hi)
    return RatSet(lo, False, hi, True)


def _diff_range(a: RatSet, b: RatSet) -> RatSet:
    """The exact set {x - y : x in a, y in b} ignoring excluded points."""
    lo = hi = None
    lo_open = hi_open = True
    if a.lo is not None and b.hi is not None:
        lo = a.lo - b.hi
        lo_open = a.lo_open or b.hi_open
    if a.hi is not None and b.lo is not None:
        hi = a.hi - b.lo
        hi_open = a.hi_open or b.lo_open
    return RatSet(lo, lo_open, hi, hi_open)


# ---------------------------------------------------------------------------
# Question normalization: NNF then DNF over atoms
# ---------------------------------------------------------------------------

_NEG_OP = {"<": ">=", "<=": ">", "=": "!=", ">=": "<", ">": "<=", "!=": "="}


def _cmp_atom(c: Cmp) -> tuple:
    """Normalize lhs op rhs to (terms, op, rhs) with exact coefficients."""
    terms: dict = {}
    for coef, var in c.lhs.terms:
        terms[var] = terms.get(var, Fraction(0)) + Fraction(coef)
    for coef, var in c.rhs.terms:
        terms[var] = terms.get(var, Fraction(0)) - Fraction(coef)
    terms = {v: c2 for v, c2 in terms.items() if c2 != 0}
    rhs = Fraction(c.rhs.const) - Fraction(c.lhs.const)
    return ("cmp", tuple(sorted(terms.items(), key=lambda t: repr(t[0]))), c.op, rhs)


def _nnf(ast: QuestionAst, positive: bool):
    if isinstance(ast, Cmp):
        kind, terms, op, rhs = _cmp_atom(ast)
        if not positive:
            op = _NEG_OP[op]
        return ("atom", terms, op, rhs)
    if isinstance(ast, BoolVar):
        return ("blit", ast.var, positive)
    if isinstance(ast, Not):
        return _nnf(ast.arg, not positive)
    if isinstance(ast, And):
        parts = [_nnf(a, positive) for a in ast.args]
        return ("and" if positive else "or", parts)
    if isinstance(ast, Or):
        parts = [_nnf(a, positive) for a in ast.args]
        return ("or" if positive else "and", parts)
    if isinstance(ast, Implies):
        return _nnf(Or((Not(ast.a), ast.b)), positive)
    raise UnsupportedQuestion(f"unknown node {type(ast).__name__}")


def _dnf(node, guard: int = DNF_GUARD) -> list[list]:
    kind = node[0]
    if kind in ("atom", "blit"):
        return [[node]]
    if kind == "or":
        out: list[list] = []
        for part in node[1]:
            out.extend(_dnf(part, guard))
            if len(out) > guard:
                raise UnsupportedQuestion("question too large for DNF expansion")
        return out or [[("false",)]]
    # and: cross product
    acc: list[list] = [[]]
    for part in node[1]:
        sub = _dnf(part, guard)
        acc = [a + b for a in acc for b in sub]
        if len(acc) > guard:
            raise UnsupportedQuestion("question too large for DNF expansion")
    return acc


# ---------------------------------------------------------------------------
# Conjunct compilation
# ---------------------------------------------------------------------------


@dataclass
class _Conjunct:
    infeasible: bool = False
    out_cmps: list = field(default_factory=list)  # (inst->coef, op, rhs)
    box_cons: dict = field(default_factory=dict)  # (i, k) -> [(op, bound)]
    bool_req: dict = field(default_factory=dict)  # (i, k) -> bool
    aux_bool: dict = field(default_factory=dict)  # name -> bool
    diff_cons: dict = field(default_factory=dict)  # k -> [(i, j, op, rhs)]
    dev_bounds: dict = field(default_factory=dict)  # name -> [(a, i, k, b)]
    sum_cons: list = field(default_factory=list)  # (names, op, rhs)


def _compile_conjunct(atoms: list, n_instances: int) -> _Conjunct:
    c = _Conjunct()
    for atom in atoms:
        if atom[0] == "false":
            c.infeasible = True
            return c
        if atom[0] == "blit":
            var, pol = atom[1], atom[2]
            if isinstance(var, AttrVar):
                key = (var.instance, var.attr)
                if c.bool_req.setdefault(key, pol) != pol:
                    c.infeasible = True
                    return c
            else:
                if c.aux_bool.setdefault(var.name, pol) != pol:
                    c.infeasible = True
                    return c
            continue
        _, terms, op, rhs = atom
        attrs = [(v, co) for v, co in terms if isinstance(v, AttrVar)]
        outs = [(v, co) for v, co in terms if isinstance(v, OutputVar)]
        auxs = [(v, co) for v, co in terms if isinstance(v, AuxVar)]
        if auxs:
            _compile_aux_atom(c, attrs, outs, auxs, op, rhs)
        elif attrs and not outs:
            _compile_attr_atom(c, attrs, op, rhs, n_instances)
        elif outs and not attrs:
            coefs = {}
            for v, co in outs:
                coefs[v.instance] = coefs.get(v.instance, Fraction(0)) + co
            c.out_cmps.append((coefs, op, rhs))
        elif not attrs and not outs:
            # constant comparison
            ok = _cmp_holds(Fraction(0), op, rhs)
            if not ok:
                c.infeasible = True
                return c
        else:
            raise UnsupportedQuestion("comparison mixes attributes and outputs")
    return c


def _cmp_holds(lhs: Fraction, op: str, rhs: Fraction) -> bool:
    return {"<": lhs < rhs, "<=": lhs <= rhs, "=": lhs == rhs,
            ">=": lhs >= rhs, ">": lhs > rhs, "!=": lhs != rhs}[op]


_FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "=", "!=": "!="}


def _compile_attr_atom(c: _Conjunct, attrs: list, op: str, rhs: Fraction,
                       n_instances: int) -> None:
    if len(attrs) == 1:
        (v, co), = attrs
        bound = rhs / co
        if co < 0:
            op = _FLIP[op]
        c.box_cons.setdefault((v.instance, v.attr), []).append((op, bound))
        return
    if len(attrs) == 2:
        (v1, c1), (v2, c2) = attrs
        if v1.attr == v2.attr and v1.instance != v2.instance and c1 == -c2:
            i, j, lead = v1.instance, v2.instance, c1
            bound = rhs / lead
            if lead < 0:
                op = _FLIP[op]
            c.diff_cons.setdefault(v1.attr, []).append((i, j, op, bound))
            return
    raise UnsupportedQuestion(
        "attribute comparison outside the supported fragment "
        "(single attribute, or a same-attribute difference of two instances)")


def _compile_aux_atom(c: _Conjunct, attrs, outs, auxs, op: str,
                      rhs: Fraction) -> None:
    if outs:
        raise UnsupportedQuestion("auxiliary variables mixed with outputs")
    if len(auxs) == 1 and len(attrs) <= 1:
        (d, cd), = auxs
        if d.sort != REAL:
            raise UnsupportedQuestion("boolean auxiliary used arithmetically")
        # normalize d's coefficient to +1:  d  op'  a*x + b
        bound = rhs / cd
        if cd < 0:
            op = _FLIP[op]
        if op not in (">=", ">"):
            raise UnsupportedQuestion("only lower bounds on deviation variables "
                                      "are supported")
        if op == ">":
            raise UnsupportedQuestion("strict lower bounds on deviation variables "
                                      "are not supported")
        if attrs:
            (v, cv), = attrs
            a = -Fraction(cv) / cd
            c.dev_bounds.setdefault(d.name, []).append((a, v.instance, v.attr, bound))
        else:
            c.dev_bounds.setdefault(d.name, []).append(
                (Fraction(0), None, None, bound))
        return
    if not attrs and all(isinstance(v, AuxVar) and v.sort == REAL for v, _ in auxs):
        coefs = {co for _, co in auxs}
        if coefs == {Fraction(1)} and op in ("<", "<="):
            names = tuple(sorted(v.name for v, _ in auxs))
            c.sum_cons.append((names, op, rhs))
            return
    raise UnsupportedQuestion("auxiliary constraint outside the supported fragment")


# ---------------------------------------------------------------------------
# Deciding one conjunct given a combination per instance
# ---------------------------------------------------------------------------


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int):
        self.parent[self.find(a)] = self.find(b)


def _intersect(a: RatSet, b: RatSet) -> RatSet:
    r = RatSet(a.lo, a.lo_open, a.hi, a.hi_open, a.excluded | b.excluded)
    if b.lo is not None:
        r = r.restrict(">" if b.lo_open else ">=", b.lo)
    if b.hi is not None:
        r = r.restrict("<" if b.hi_open else "<=", b.hi)
    return r


def _attr_set(conj: _Conjunct, combo: LeafCombo, i: int, k: int) -> RatSet:
    s = _ratset_from_interval(combo.box.domains[k])
    for op, b in conj.box_cons.get((i, k), ()):
        s = s.restrict(op, b)
    return s


def _dev_infimum(lines: list, s: RatSet) -> Optional[tuple]:
    """Infimum over x in s of f(x) = max(a*x + b), a convex piecewise-linear.

    Returns (infimum, attained) where infimum None means unbounded below;
    requires s non-empty. The minimum over the closure sits at an endpoint or
    a breakpoint; open endpoints and excluded points only affect whether the
    infimum is attained.
    """
    if not lines:
        return (None, False)  # no lower bounds at all

    def val(x: Fraction) -> Fraction:
        return max(a * x + b for a, b in lines)

    candidates: list[Fraction] = []
    if s.lo is not None:
        candidates.append(s.lo)
    if s.hi is not None:
        candidates.append(s.hi)
    for (a1, b1), (a2, b2) in itertools.combinations(lines, 2):
        if a1 != a2:
            x = (b2 - b1) / (a1 - a2)
            if _within_closure(s, x):
                candidates.append(x)
    if s.lo is None:
        min_slope = min(a for a, _ in lines)
        if min_slope > 0:
            return (None, False)  # f drops without bound toward -inf
        if min_slope == 0:
            flat = max(b for a, b in lines if a == 0)
            ref = candidates[0] if candidates else Fraction(0)
            probe = ref
            while val(probe) > flat:
                probe = probe - max(abs(probe), Fraction(1)) - 1
            candidates.append(probe)
        # some slope < 0: f climbs toward -inf, breakpoints already cover the min
    if s.hi is None:
        max_slope = max(a for a, _ in lines)
        if max_slope < 0:
            return (None, False)
        if max_slope == 0:
            flat = max(b for a, b in lines if a == 0)
            ref = candidates[0] if candidates else Fraction(0)
            probe = ref
            while val(probe) > flat:
                probe = probe + max(abs(probe), Fraction(1)) + 1
            candidates.append(probe)
    if not candidates:
        x = s.pick()
        if x is None:
            return None
        candidates.append(x)
    best = min(val(x) for x in candidates)
    # attained iff the sublevel set {f <= inf} meets s (exact, handles open
    # endpoints and excluded points)
    attained = _dev_pick(lines, s, best) is not None
    return (best, attained)


def _within_closure(s: RatSet, x: Fraction) -> bool:
    if s.lo is not None and x < s.lo:
        return False
    if s.hi is not None and x > s.hi:
        return False
    return True


def _dev_pick(lines: list, s: RatSet, target: Fraction) -> Optional[Fraction]:
    """Some x in s with max(a*x + b) <= target, exactly; None if impossible."""
    r = RatSet(s.lo, s.lo_open, s.hi, s.hi_open, s.excluded)
    for a, b in lines:
        if a == 0:
            if b > target:
                return None
        elif a > 0:
            r = r.restrict("<=", (target - b) / a)
        else:
            r = r.restrict(">=", (target - b) / a)
    return r.pick()


# ---------------------------------------------------------------------------
# Solving one conjunct for a fixed combination per instance
# ---------------------------------------------------------------------------


def _sum_devs(conj: _Conjunct) -> tuple[set, dict, dict]:
    """Names used in sum constraints, their attribute links, attr -> name."""
    in_sums: set[str] = set()
    for names, _, _ in conj.sum_cons:
        in_sums.update(names)
    dev_attr: dict[str, Optional[tuple[int, int]]] = {}
    attr_to_dev: dict[tuple[int, int], str] = {}
    for name in sorted(in_sums):
        links = {(i, k) for a, i, k, _ in conj.dev_bounds.get(name, ())
                 if i is not None}
        if len(links) > 1:
            raise UnsupportedQuestion(
                "a deviation variable bounds more than one attribute")
        link = next(iter(links)) if links else None
        dev_attr[name] = link
        if link is not None:
            if link in attr_to_dev:
                raise UnsupportedQuestion(
                    "two deviation variables bound the same attribute")
            attr_to_dev[link] = name
    return in_sums, dev_attr, attr_to_dev


def _solve_two_instance_diff(sets: dict, diffs: list) -> Optional[dict]:
    """Values for one attribute of two instances related by difference constraints."""
    s0, s1 = sets[0], sets[1]
    if s0.excluded or s1.excluded:
        raise UnsupportedQuestion(
            "excluded points combined with difference constraints")
    t_set = _diff_range(s0, s1)
    for i, j, op, rhs in diffs:
        if (i, j) == (1, 0):
            op, rhs = _FLIP[op], -rhs
        elif (i, j) != (0, 1):
            raise UnsupportedQuestion("difference constraint on unknown instances")
        t_set = t_set.restrict(op, rhs)
    t = t_set.pick()
    if t is None:
        return None
    shifted = RatSet(s1.lo, s1.lo_open, s1.hi, s1.hi_open, s1.excluded)
    if s0.lo is not None:
        shifted = shifted.restrict(">" if s0.lo_open else ">=", s0.lo - t)
    if s0.hi is not None:
        shifted = shifted.restrict("<" if s0.hi_open else "<=", s0.hi - t)
    x1 = shifted.pick()
    if x1 is None:
        return None
    return {0: x1 + t, 1: x1}


def _solve_conjunct(conj: _Conjunct, combos: Sequence[LeafCombo],
                    task: VerificationTask) -> Optional[list[tuple]]:
    """A witness per instance satisfying the conjunct, or None."""
    n = task.num_instances
    outputs = [c.output for c in combos]
    for coefs, op, rhs in conj.out_cmps:
        total = sum((co * outputs[i] for i, co in coefs.items()), Fraction(0))
        if not _cmp_holds(total, op, rhs):
            return None

    values: list[list] = [[None] * e.num_attributes for e in task.instances]

    # booleans are independent per (instance, attribute)
    for i, e in enumerate(task.instances):
        for k, t in enumerate(e.attr_types):
            if t != BOOL:
                continue
            d = combos[i].box.domains[k]
            req = conj.bool_req.get((i, k))
            opts = [v for v in (False, True)
                    if d.allows(v) and (req is None or v is req)]
            if not opts:
                return None
            values[i][k] = opts[0]

    in_sums, dev_attr, attr_to_dev = _sum_devs(conj)
    deferred: dict[tuple[int, int], RatSet] = {}
    copy_groups: dict[tuple[int, int], list[int]] = {}

    all_attrs = sorted({k for e in task.instances for k in range(e.num_attributes)})
    for k in all_attrs:
        insts = [i for i, e in enumerate(task.instances)
                 if k < e.num_attributes and e.attr_types[k] == REAL]
        if not insts:
            continue
        sets = {i: _attr_set(conj, combos[i], i, k) for i in insts}
        diffs = conj.diff_cons.get(k, [])
        linked = [i for i in insts if (i, k) in attr_to_dev]
        if not diffs:
            for i in insts:
                if (i, k) in attr_to_dev:
                    deferred[(i, k)] = sets[i]
                else:
                    v = sets[i].pick()
                    if v is None:
                        return None
                    values[i][k] = v
            continue
        if all(op == "=" and rhs == 0 for _, _, op, rhs in diffs):
            uf = _UnionFind(n)
            for i, j, _, _ in diffs:
                uf.union(i, j)
            groups: dict[int, list[int]] = {}
            for i in insts:
                groups.setdefault(uf.find(i), []).append(i)
            for members in groups.values():
                s = sets[members[0]]
                for m in members[1:]:
                    s = _intersect(s, sets[m])
                group_links = [i for i in members if (i, k) in attr_to_dev]
                if len(group_links) > 1:
                    raise UnsupportedQuestion(
                        "several deviation variables on one equality group")
                if group_links:
                    deferred[(group_links[0], k)] = s
                    copy_groups[(group_links[0], k)] = members
                else:
                    v = s.pick()
                    if v is None:
                        return None
                    for m in members:
                        values[m][k] = v
            continue
        if linked:
            raise UnsupportedQuestion(
                "deviation variables combined with non-equality difference "
                "constraints")
        if len(insts) != 2:
            raise UnsupportedQuestion(
                "difference constraints need exactly two instances")
        got = _solve_two_instance_diff(sets, diffs)
        if got is None:
            return None
        for i, v in got.items():
            values[i][k] = v

    if conj.sum_cons:
        if not _solve_budgets(conj, task, in_sums, dev_attr, deferred,
                              copy_groups, values):
            return None
    else:
        # deferred can only come from sum-linked attributes
        assert not deferred

    witnesses = []
    for i, e in enumerate(task.instances):
        assert all(v is not None for v in values[i])
        witnesses.append(tuple(values[i]))
    return witnesses


def _solve_budgets(conj, task, in_sums, dev_attr, deferred, copy_groups,
                   values) -> bool:
    """Decide the sum-of-deviations constraints and fill deferred attributes.

    Minimizing every deviation simultaneously minimizes every sum (all sum
    coefficients are +1), so the sums are satisfiable iff they hold on the
    per-deviation infima, with equality on a non-strict bound requiring every
    infimum to be attained.
    """
    infs: dict[str, Optional[Fraction]] = {}
    attained: dict[str, bool] = {}
    lines_of: dict[str, list] = {}
    for name in sorted(in_sums):
        bounds = conj.dev_bounds.get(name, [])
        lines = [(a, b) for a, _, _, b in bounds]
        lines_of[name] = lines
        link = dev_attr[name]
        if link is None:
            consts = [b for a, b in lines if a == 0]
            if any(a != 0 for a, _ in lines):
                raise UnsupportedQuestion("dangling attribute-linked bound")
            infs[name] = max(consts) if consts else None
            attained[name] = True
        else:
            s = deferred[link]
            r = _dev_infimum(lines, s)
            if r is None or s.is_empty():
                return False
            infs[name], attained[name] = r

    margin = None
    for names, op, rhs in conj.sum_cons:
        if any(infs[nm] is None for nm in names):
            continue  # a free deviation absorbs any budget
        total = sum(infs[nm] for nm in names)
        if op == "<":
            if not total < rhs:
                return False
            gap = rhs - total
        else:
            if total > rhs:
                return False
            if total == rhs and not all(attained[nm] for nm in names):
                return False
            gap = rhs - total
        margin = gap if margin is None else min(margin, gap)

    n_devs = max(1, len(in_sums))
    slack = Fraction(0) if margin is None or margin == 0 \
        else margin / (2 * n_devs)
    finite_targets: dict[str, Fraction] = {}
    for name in sorted(in_sums):
        if infs[name] is not None:
            finite_targets[name] = infs[name] + slack
    big = Fraction(1)
    for names, _, rhs in conj.sum_cons:
        big += abs(rhs)
    for t in finite_targets.values():
        big += abs(t)
    for name in sorted(in_sums):
        target = finite_targets.get(name, -big)
        link = dev_attr[name]
        if link is None:
            continue
        x = _dev_pick(lines_of[name], deferred[link], target)
        if x is None:
            return False
        i, k = link
        for m in copy_groups.get(link, [i]):
            values[m][k] = x
    return True


# ---------------------------------------------------------------------------
# The verdict oracle
# ---------------------------------------------------------------------------


@dataclass
class OracleResult:
    status: str  # "sat" | "unsat"
    witnesses: Optional[list[tuple]] = None


def compile_question(task: VerificationTask) -> list[_Conjunct]:
    """Question and background as a list of feasible-looking DNF conjuncts."""
    root = _nnf(And((task.question, task.background)), True)
    conjs = [_compile_conjunct(atoms, task.num_instances)
             for atoms in _dnf(root)]
    return [c for c in conjs if not c.infeasible]


def oracle_verdict(task: VerificationTask,
                   combo_guard: int = COMBO_GUARD) -> OracleResult:
    """Decide the task by exhaustive enumeration of leaf combinations."""
    conjs = compile_question(task)
    cache: dict[int, list[LeafCombo]] = {}
    per_instance = []
    for e in task.instances:
        if id(e) not in cache:
            cache[id(e)] = enumerate_combos(e, combo_guard)
        per_instance.append(cache[id(e)])
    for combo_tuple in itertools.product(*per_instance):
        for conj in conjs:
            w = _solve_conjunct(conj, combo_tuple, task)
            if w is not None:
                return OracleResult("sat", w)
    return OracleResult("unsat", None)


# ---------------------------------------------------------------------------
# Grid check: a secondary, point-sampling oracle for unsat boxes
# ---------------------------------------------------------------------------


@dataclass
class GridResult:
    found: bool
    witnesses: Optional[list[tuple]] = None


def _real_grid(e: Ensemble, box_dom: dom.RealInterval, k: int,
               resolution: int) -> list[Fraction]:
    thresholds = sorted({
        Fraction(node.cond.threshold)
        for tree in e.trees for node in tree.nodes
        if isinstance(node, Internal) and isinstance(node.cond, LessThan)
        and node.cond.attr == k
    })
    if len(thresholds) >= 2:
        eps = min(b - a for a, b in zip(thresholds, thresholds[1:])) / 2
    else:
        eps = Fraction(1)
    pts: set[Fraction] = set()
    for t in thresholds:
        pts.update((t - eps, t, t + eps))
    for a, b in zip(thresholds, thresholds[1:]):
        pts.add((a + b) / 2)
    lo = None if box_dom.lo == float("-inf") else Fraction(box_dom.lo)
    hi = None if box_dom.hi == float("inf") else Fraction(box_dom.hi)
    if lo is not None:
        pts.add(lo)
    if hi is not None:
        pts.add(hi - eps)
    inside = sorted(p for p in pts
                    if (lo is None or p >= lo) and (hi is None or p < hi))
    if not inside:
        fallback = lo if lo is not None else (hi - 1 if hi is not None else Fraction(0))
        inside = [fallback]
    for _ in range(resolution - 1):
        extra = [(a + b) / 2 for a, b in zip(inside, inside[1:])]
        inside = sorted(set(inside) | set(extra))
    return inside


def _conjunct_holds_at(conj: _Conjunct, values: Sequence[Sequence],
                       outputs: Sequence[Fraction]) -> bool:
    for coefs, op, rhs in conj.out_cmps:
        total = sum((co * outputs[i] for i, co in coefs.items()), Fraction(0))
        if not _cmp_holds(total, op, rhs):
            return False
    for (i, k), req in conj.bool_req.items():
        if bool(values[i][k]) is not req:
            return False
    for (i, k), cons in conj.box_cons.items():
        x = Fraction(values[i][k])
        for op, b in cons:
            if not _cmp_holds(x, op, b):
                return False
    for k, diffs in conj.diff_cons.items():
        for i, j, op, rhs in diffs:
            d = Fraction(values[i][k]) - Fraction(values[j][k])
            if not _cmp_holds(d, op, rhs):
                return False
    for names, op, rhs in conj.sum_cons:
        total = Fraction(0)
        free = False
        for name in names:
            bounds = conj.dev_bounds.get(name, [])
            vals = [b if i is None else a * Fraction(values[i][k]) + b
                    for a, i, k, b in bounds]
            if not vals:
                free = True
                break
            total += max(vals)
        if free:
            continue
        if not _cmp_holds(total, op, rhs):
            return False
    return True


def grid_check(task: VerificationTask, boxes: Sequence[dom.DomainBox],
               resolution: int = 1, max_points: int = 10 ** 6) -> GridResult:
    """Evaluate the question at grid points inside the boxes.

    The grid has points on both sides of every split threshold (offset by
    half the smallest threshold gap) plus cell midpoints; booleans take both
    allowed values. resolution 0 means an empty grid.
    """
    if resolution <= 0:
        return GridResult(False)
    conjs = compile_question(task)
    axes: list[list] = []
    shape: list[tuple[int, int]] = []
    total = 1
    for i, e in enumerate(task.instances):
        for k, t in enumerate(e.attr_types):
            d = boxes[i].domains[k]
            if t == REAL:
                pts: list = list(_real_grid(e, d, k, resolution))
            else:
                pts = [v for v in (False, True) if d.allows(v)]
            axes.append(pts)
            shape.append((i, k))
            total *= len(pts)
            if total > max_points:
                raise TooLarge(f"grid would have more than {max_points} points")
    for point in itertools.product(*axes):
        values: list[list] = [[None] * e.num_attributes for e in task.instances]
        for (i, k), v in zip(shape, point):
            values[i][k] = v
        outputs = [None] * task.num_instances
        from .model import evaluate_exact

        for i, e in enumerate(task.instances):
            outputs[i] = evaluate_exact(e, values[i])
        if any(_conjunct_holds_at(c, values, outputs) for c in conjs):
            return GridResult(True, [tuple(v) for v in values])
    return GridResult(False)
