"""A small QF_LRA solver: CDCL SAT search with an exact simplex theory core.

Accepts the SMT-LIB2 subset this package emits (and the common surface of
hand-written QF_LRA scripts): declarations of Real/Bool constants, asserts
over and/or/not/=>/xor/ite and linear comparisons, one or more check-sat
commands, and get-value over declared symbols. Everything is exact: numeric
literals become rationals, and models are reported as rationals in the same
surface syntax Z3 uses (``6.0``, ``(/ 1.0 3.0)``, ``(- ...)``).

The solver is deterministic: identical scripts produce identical verdicts,
models, and output bytes.
"""

from __future__ import annotations

import re
import time
from fractions import Fraction

from .sexpr import SexprError, parse_all
from .simplex import Conflict, DRat, Simplex

_NUMERAL = re.compile(r"^\d+$")
_DECIMAL = re.compile(r"^\d+\.\d*$")

_LOGICAL = {"not", "and", "or", "=>", "xor", "ite", "=", "distinct",
            "<", "<=", ">", ">=", "true", "false"}
_ARITH = {"+", "-", "*", "/"}


class SmtError(ValueError):
    pass


class _Timeout(Exception):
    pass


# ---------------------------------------------------------------------------
# Theory atoms
# ---------------------------------------------------------------------------


class TheoryAtom:
    """A normalized linear constraint  sum(coeffs) <op> k  with op in le/lt/eq."""

    __slots__ = ("op", "slack", "k", "var", "lemma_added")

    def __init__(self, op: str, slack: int, k: Fraction, var: int):
        self.op = op
        self.slack = slack
        self.k = k
        self.var = var
        self.lemma_added = False


class Engine:
    """CDCL(T) over propositional clauses plus simplex bounds."""

    def __init__(self):
        self.nvars = 0
        self.assign: list = [None]  # 1-based
        self.level_of: list = [0]
        self.reason: list = [None]
        self.saved_phase: list = [False]
        self.activity: list = [0.0]
        self.var_inc = 1.0
        self.clauses: list[list[int]] = []
        self.watches: dict[int, list[int]] = {}
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.splx_lim: list[int] = []
        self.qhead = 0
        self.simplex = Simplex()
        self.atoms: dict[int, TheoryAtom] = {}  # sat var -> atom
        self._atom_index: dict[tuple, TheoryAtom] = {}
        self.root_conflict = False
        self.pending_units: list[int] = []
        self.deadline: float | None = None
        self._ticks = 0

    # -- variables and clauses ---------------------------------------------

    def new_var(self) -> int:
        self.nvars += 1
        self.assign.append(None)
        self.level_of.append(0)
        self.reason.append(None)
        self.saved_phase.append(False)
        self.activity.append(0.0)
        return self.nvars

    def add_clause(self, lits: list[int]) -> None:
        """Add an input clause (before or during search at level 0 only)."""
        seen = set()
        out = []
        for l in lits:
            if -l in seen:
                return  # tautology
            if l not in seen:
                seen.add(l)
                out.append(l)
        if not out:
            self.root_conflict = True
            return
        if len(out) == 1:
            self.pending_units.append(out[0])
            return
        self._attach(out)

    def _attach(self, lits: list[int]) -> int:
        ci = len(self.clauses)
        self.clauses.append(lits)
        self.watches.setdefault(lits[0], []).append(ci)
        self.watches.setdefault(lits[1], []).append(ci)
        return ci

    def _lit_value(self, lit: int):
        v = self.assign[abs(lit)]
        if v is None:
            return None
        return v if lit > 0 else not v

    def _enqueue(self, lit: int, reason_ci) -> bool:
        val = self._lit_value(lit)
        if val is not None:
            return val
        v = abs(lit)
        self.assign[v] = lit > 0
        self.level_of[v] = len(self.trail_lim)
        self.reason[v] = reason_ci
        self.trail.append(lit)
        return True

    # -- propagation ---------------------------------------------------------

    def _propagate(self):
        """Boolean and theory propagation; returns a conflict clause or None."""
        while self.qhead < len(self.trail):
            lit = self.trail[self.qhead]
            self.qhead += 1
            self._tick()
            conflict = self._prop_watches(-lit)
            if conflict is not None:
                return conflict
            conflict = self._theory_assert(lit)
            if conflict is not None:
                return conflict
        return None

    def _prop_watches(self, false_lit: int):
        wl = self.watches.get(false_lit)
        if not wl:
            return None
        i = 0
        while i < len(wl):
            ci = wl[i]
            c = self.clauses[ci]
            if c[0] == false_lit:
                c[0], c[1] = c[1], c[0]
            first = c[0]
            if self._lit_value(first) is True:
                i += 1
                continue
            moved = False
            for j in range(2, len(c)):
                if self._lit_value(c[j]) is not False:
                    c[1], c[j] = c[j], c[1]
                    self.watches.setdefault(c[1], []).append(ci)
                    wl[i] = wl[-1]
                    wl.pop()
                    moved = True
                    break
            if moved:
                continue
            if self._lit_value(first) is False:
                return list(c)
            self._enqueue(first, ci)
            i += 1
        return None

    def _theory_assert(self, lit: int):
        atom = self.atoms.get(abs(lit))
        if atom is None:
            return None
        sx, k = self.simplex, atom.k
        try:
            if lit > 0:
                if atom.op == "le":
                    sx.assert_upper(atom.slack, DRat(k), lit)
                elif atom.op == "lt":
                    sx.assert_upper(atom.slack, DRat(k, Fraction(-1)), lit)
                else:
                    sx.assert_upper(atom.slack, DRat(k), lit)
                    sx.assert_lower(atom.slack, DRat(k), lit)
            else:
                if atom.op == "le":
                    sx.assert_lower(atom.slack, DRat(k, Fraction(1)), -lit)
                elif atom.op == "lt":
                    sx.assert_lower(atom.slack, DRat(k), -lit)
                else:
                    return self._diseq_lemma(atom)
        except Conflict as c:
            return [-r for r in c.reasons]
        return None

    def _diseq_lemma(self, atom: TheoryAtom):
        """On a negated equality, add the split clause  s=k \\/ s<k \\/ s>k."""
        if atom.lemma_added:
            return None
        atom.lemma_added = True
        lt_var = self.atom_var("lt", atom.slack, atom.k)
        le_var = self.atom_var("le", atom.slack, atom.k)
        lits = [atom.var, lt_var, -le_var]
        return self._add_clause_dynamic(lits)

    def atom_var(self, op: str, slack: int, k: Fraction) -> int:
        key = (op, slack, k)
        found = self._atom_index.get(key)
        if found is not None:
            return found.var
        var = self.new_var()
        atom = TheoryAtom(op, slack, k, var)
        self.atoms[var] = atom
        self._atom_index[key] = atom
        return var

    def _add_clause_dynamic(self, lits: list[int]):
        """Add a clause during search; returns it if it is conflicting now.

        Only called for disequality lemmas, where any false literal is false
        at the current (deepest) level, so watching one non-false literal
        plus a deepest false one preserves the watcher invariant across
        backjumps.
        """
        vals = [self._lit_value(l) for l in lits]
        nonfalse = [l for l, v in zip(lits, vals) if v is not False]
        if not nonfalse:
            self._attach(list(lits))
            return list(lits)
        if len(nonfalse) == 1:
            rest = [l for l in lits if l != nonfalse[0]]
            ci = self._attach(nonfalse + rest)
            if self._lit_value(nonfalse[0]) is None:
                self._enqueue(nonfalse[0], ci)
            return None
        self._attach(nonfalse[:2] + [l for l in lits if l not in nonfalse[:2]])
        return None

    # -- conflict analysis ----------------------------------------------------

    def _bump(self, var: int) -> None:
        self.activity[var] += self.var_inc
        if self.activity[var] > 1e100:
            for i in range(1, self.nvars + 1):
                self.activity[i] *= 1e-100
            self.var_inc *= 1e-100

    def _analyze(self, conflict: list[int]):
        """1-UIP learning. Returns (learned clause, backjump level)."""
        level = len(self.trail_lim)
        learned: list[int] = []
        seen = set()
        counter = 0
        idx = len(self.trail)
        p = None
        reason_lits = conflict
        while True:
            for q in reason_lits:
                v = abs(q)
                if v in seen or self.level_of[v] == 0:
                    continue
                seen.add(v)
                self._bump(v)
                if self.level_of[v] == level:
                    counter += 1
                else:
                    learned.append(q)
            while True:
                idx -= 1
                if abs(self.trail[idx]) in seen:
                    break
            p = self.trail[idx]
            v = abs(p)
            seen.discard(v)
            counter -= 1
            if counter == 0:
                break
            ci = self.reason[v]
            reason_lits = [q for q in self.clauses[ci] if q != p]
        learned.insert(0, -p)
        if len(learned) == 1:
            return learned, 0
        blevel = max(self.level_of[abs(q)] for q in learned[1:])
        # make learned[1] a literal of the backjump level for watching
        for j in range(1, len(learned)):
            if self.level_of[abs(learned[j])] == blevel:
                learned[1], learned[j] = learned[j], learned[1]
                break
        return learned, blevel

    def _cancel_until(self, level: int) -> None:
        if len(self.trail_lim) <= level:
            return
        bound = self.trail_lim[level]
        for lit in reversed(self.trail[bound:]):
            v = abs(lit)
            self.saved_phase[v] = self.assign[v]
            self.assign[v] = None
            self.reason[v] = None
        del self.trail[bound:]
        self.qhead = bound
        self.simplex.undo_to(self.splx_lim[level])
        del self.trail_lim[level:]
        del self.splx_lim[level:]

    # -- main loop -------------------------------------------------------------

    def _tick(self) -> None:
        self._ticks += 1
        if self._ticks & 1023 == 0 and self.deadline is not None \
                and time.monotonic() > self.deadline:
            raise _Timeout()

    def _decide(self) -> bool:
        best = 0
        best_act = -1.0
        for v in range(1, self.nvars + 1):
            if self.assign[v] is None and self.activity[v] > best_act:
                best = v
                best_act = self.activity[v]
        if best == 0:
            return False
        self.trail_lim.append(len(self.trail))
        self.splx_lim.append(self.simplex.mark())
        lit = best if self.saved_phase[best] else -best
        self._enqueue(lit, None)
        return True

    def solve(self, deadline: float | None = None) -> str:
        if self.root_conflict:
            return "unsat"
        self.deadline = deadline
        self.simplex.tick = self._tick
        for lit in self.pending_units:
            if not self._enqueue(lit, None):
                return "unsat"
        self.pending_units = []
        conflicts_left = 128
        restart_limit = 128.0
        try:
            while True:
                conflict = self._propagate()
                if conflict is None:
                    try:
                        self.simplex.check()
                    except Conflict as c:
                        conflict = [-r for r in c.reasons]
                if conflict is not None:
                    top = max((self.level_of[abs(q)] for q in conflict), default=0)
                    if top == 0:
                        return "unsat"
                    if top < len(self.trail_lim):
                        self._cancel_until(top)
                    learned, blevel = self._analyze(conflict)
                    self._cancel_until(blevel)
                    if len(learned) == 1:
                        if not self._enqueue(learned[0], None):
                            return "unsat"
                    else:
                        ci = self._attach(learned)
                        self._enqueue(learned[0], ci)
                    self.var_inc /= 0.95
                    conflicts_left -= 1
                    if conflicts_left <= 0:
                        restart_limit *= 1.5
                        conflicts_left = int(restart_limit)
                        self._cancel_until(0)
                    continue
                self._tick()
                if not self._decide():
                    return "sat"
        except _Timeout:
            return "unknown"
        finally:
            self.simplex.tick = None


# ---------------------------------------------------------------------------
# Terms to clauses
# ---------------------------------------------------------------------------


class Translator:
    def __init__(self, engine: Engine, decls: dict[str, str]):
        self.engine = engine
        self.decls = decls
        self.bool_var: dict[str, int] = {}
        self.real_var: dict[str, int] = {}  # name -> simplex var
        self.slack_of: dict[tuple, int] = {}
        self.gate_cache: dict[tuple, int] = {}
        self.true_var: int | None = None

    # -- sorts ----------------------------------------------------------------

    def sort_of(self, sx) -> str:
        if isinstance(sx, str):
            if sx in ("true", "false"):
                return "Bool"
            if sx in self.decls:
                return self.decls[sx]
            if _NUMERAL.match(sx) or _DECIMAL.match(sx):
                return "Real"
            raise SmtError(f"unknown symbol {sx!r}")
        if not sx:
            raise SmtError("empty term")
        head = sx[0]
        if head == "ite":
            return self.sort_of(sx[2])
        if head in _ARITH:
            return "Real"
        if head in _LOGICAL:
            return "Bool"
        raise SmtError(f"unknown operator {head!r}")

    # -- arithmetic -------------------------------------------------------------

    def svar(self, name: str) -> int:
        v = self.real_var.get(name)
        if v is None:
            v = self.engine.simplex.new_var()
            self.real_var[name] = v
        return v

    def linear(self, sx) -> tuple[dict[int, Fraction], Fraction]:
        if isinstance(sx, str):
            if _NUMERAL.match(sx):
                return {}, Fraction(int(sx))
            if _DECIMAL.match(sx):
                return {}, Fraction(sx if not sx.endswith(".") else sx + "0")
            if self.decls.get(sx) == "Real":
                return {self.svar(sx): Fraction(1)}, Fraction(0)
            raise SmtError(f"not an arithmetic term: {sx!r}")
        head = sx[0]
        args = sx[1:]
        if head == "+":
            coeffs: dict[int, Fraction] = {}
            const = Fraction(0)
            for a in args:
                c2, k2 = self.linear(a)
                const += k2
                for v, c in c2.items():
                    coeffs[v] = coeffs.get(v, Fraction(0)) + c
            return coeffs, const
        if head == "-":
            if len(args) == 1:
                c2, k2 = self.linear(args[0])
                return {v: -c for v, c in c2.items()}, -k2
            coeffs, const = self.linear(args[0])
            coeffs = dict(coeffs)
            for a in args[1:]:
                c2, k2 = self.linear(a)
                const -= k2
                for v, c in c2.items():
                    coeffs[v] = coeffs.get(v, Fraction(0)) - c
            return coeffs, const
        if head == "*":
            # running product; at most one factor may be non-constant
            coeffs: dict[int, Fraction] = {}
            const = Fraction(1)
            for a in args:
                c2, k2 = self.linear(a)
                if c2:
                    if coeffs:
                        raise SmtError("nonlinear product")
                    coeffs = {v: c * const for v, c in c2.items()}
                    const = const * k2
                else:
                    coeffs = {v: c * k2 for v, c in coeffs.items()}
                    const = const * k2
            return coeffs, const
        if head == "/":
            coeffs, const = self.linear(args[0])
            for a in args[1:]:
                c2, k2 = self.linear(a)
                if c2 or k2 == 0:
                    raise SmtError("division by a non-constant or zero")
                coeffs = {v: c / k2 for v, c in coeffs.items()}
                const = const / k2
            return coeffs, const
        raise SmtError(f"not an arithmetic operator: {head!r}")

    # -- atoms --------------------------------------------------------------------

    _FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "="}

    def atom_lit(self, op: str, lhs, rhs) -> tuple:
        cl, kl = self.linear(lhs)
        cr, kr = self.linear(rhs)
        coeffs = dict(cl)
        for v, c in cr.items():
            coeffs[v] = coeffs.get(v, Fraction(0)) - c
        coeffs = {v: c for v, c in coeffs.items() if c != 0}
        k = kr - kl
        if not coeffs:
            result = {"<": k > 0, "<=": k >= 0, ">": k < 0, ">=": k <= 0, "=": k == 0}[op]
            return ("const", result)
        lead = coeffs[min(coeffs)]
        if lead < 0:
            op = self._FLIP[op]
        coeffs = {v: c / lead for v, c in coeffs.items()}
        k = k / lead
        items = tuple(sorted(coeffs.items()))
        slack = self.slack_of.get(items)
        if slack is None:
            if len(items) == 1 and items[0][1] == 1:
                slack = items[0][0]
            else:
                slack = self.engine.simplex.define(dict(items))
            self.slack_of[items] = slack
        if op == "<":
            return ("lit", self.engine.atom_var("lt", slack, k))
        if op == "<=":
            return ("lit", self.engine.atom_var("le", slack, k))
        if op == ">":
            return ("lit", -self.engine.atom_var("le", slack, k))
        if op == ">=":
            return ("lit", -self.engine.atom_var("lt", slack, k))
        return ("lit", self.engine.atom_var("eq", slack, k))

    # -- formulas to literals -------------------------------------------------------

    def _true_lit(self) -> int:
        if self.true_var is None:
            self.true_var = self.engine.new_var()
            self.engine.add_clause([self.true_var])
        return self.true_var

    def _gate(self, key: tuple, make) -> int:
        lit = self.gate_cache.get(key)
        if lit is None:
            lit = make()
            self.gate_cache[key] = lit
        return lit

    def lit(self, sx) -> int:
        if isinstance(sx, str):
            if sx == "true":
                return self._true_lit()
            if sx == "false":
                return -self._true_lit()
            if self.decls.get(sx) == "Bool":
                v = self.bool_var.get(sx)
                if v is None:
                    v = self.engine.new_var()
                    self.bool_var[sx] = v
                return v
            raise SmtError(f"not a boolean term: {sx!r}")
        head = sx[0]
        args = sx[1:]
        if head == "not":
            if len(args) != 1:
                raise SmtError("'not' takes one argument")
            return -self.lit(args[0])
        if head == "and":
            return self._nary(args, is_and=True)
        if head == "or":
            return self._nary(args, is_and=False)
        if head == "=>":
            if len(args) < 2:
                raise SmtError("'=>' takes at least two arguments")
            # right-associative: (=> a b c) == (or (not a) (not b) c)
            lits = [-self.lit(a) for a in args[:-1]] + [self.lit(args[-1])]
            return self._or_gate(lits)
        if head == "xor":
            lits = [self.lit(a) for a in args]
            acc = lits[0]
            for l in lits[1:]:
                acc = -self._iff_gate(acc, l)
            return acc
        if head == "ite":
            if len(args) != 3 or self.sort_of(args[1]) != "Bool":
                raise SmtError("only boolean 'ite' is supported")
            c, t, f = (self.lit(a) for a in args)
            return self._or_gate([self._and_gate([c, t]), self._and_gate([-c, f])])
        if head in ("<", "<=", ">", ">="):
            return self._chain(head, args)
        if head == "=":
            if len(args) < 2:
                raise SmtError("'=' takes at least two arguments")
            if self.sort_of(args[0]) == "Bool":
                lits = [self.lit(a) for a in args]
                acc = self._true_lit()
                for a, b in zip(lits, lits[1:]):
                    acc = self._and_gate([acc, self._iff_gate(a, b)])
                return acc
            return self._chain("=", args)
        if head == "distinct":
            if len(args) != 2:
                raise SmtError("only binary 'distinct' is supported")
            if self.sort_of(args[0]) == "Bool":
                return -self._iff_gate(self.lit(args[0]), self.lit(args[1]))
            return -self._atom_as_lit("=", args[0], args[1])
        raise SmtError(f"unknown operator {head!r}")

    def _chain(self, op: str, args) -> int:
        if len(args) < 2:
            raise SmtError(f"{op!r} takes at least two arguments")
        lits = [self._atom_as_lit(op, a, b) for a, b in zip(args, args[1:])]
        return lits[0] if len(lits) == 1 else self._and_gate(lits)

    def _atom_as_lit(self, op: str, lhs, rhs) -> int:
        kind, val = self.atom_lit(op, lhs, rhs)
        if kind == "const":
            t = self._true_lit()
            return t if val else -t
        return val

    def _nary(self, args, is_and: bool) -> int:
        lits = [self.lit(a) for a in args]
        if not lits:
            t = self._true_lit()
            return t if is_and else -t
        if len(lits) == 1:
            return lits[0]
        return self._and_gate(lits) if is_and else self._or_gate(lits)

    def _and_gate(self, lits: list[int]) -> int:
        key = ("and", tuple(sorted(lits)))

        def make():
            g = self.engine.new_var()
            for l in lits:
                self.engine.add_clause([-g, l])
            self.engine.add_clause([g] + [-l for l in lits])
            return g

        return self._gate(key, make)

    def _or_gate(self, lits: list[int]) -> int:
        return -self._and_gate([-l for l in lits])

    def _iff_gate(self, a: int, b: int) -> int:
        key = ("iff", tuple(sorted((a, b))))

        def make():
            g = self.engine.new_var()
            self.engine.add_clause([-g, -a, b])
            self.engine.add_clause([-g, a, -b])
            self.engine.add_clause([g, a, b])
            self.engine.add_clause([g, -a, -b])
            return g

        return self._gate(key, make)

    def assert_term(self, sx) -> None:
        self.engine.add_clause([self.lit(sx)])


# ---------------------------------------------------------------------------
# Script session
# ---------------------------------------------------------------------------


def _fmt_rational(q: Fraction) -> str:
    def dec(n: int) -> str:
        return f"{n}.0"

    if q < 0:
        return f"(- {_fmt_rational(-q)})"
    if q.denominator == 1:
        return dec(q.numerator)
    return f"(/ {dec(q.numerator)} {dec(q.denominator)})"


class Session:
    """Executes a parsed script and accumulates output lines."""

    def __init__(self, timeout_ms: int | None = None):
        self.timeout_ms = timeout_ms
        self.decls: dict[str, str] = {}
        self.asserts: list = []
        self.out: list[str] = []
        self.model: dict | None = None
        self.stopped = False

    def error(self, msg: str) -> None:
        self.out.append(f'(error "{msg}")')
        self.stopped = True

    def run_text(self, text: str) -> str:
        try:
            commands = parse_all(text)
        except SexprError as exc:
            self.error(f"parse error: {exc}")
            return "\n".join(self.out) + "\n"
        for cmd in commands:
            if self.stopped:
                break
            try:
                self.run_command(cmd)
            except (SmtError, SexprError) as exc:
                self.error(str(exc))
        return "\n".join(self.out) + ("\n" if self.out else "")

    def run_command(self, cmd) -> None:
        if not isinstance(cmd, list) or not cmd:
            raise SmtError("commands must be parenthesized")
        head = cmd[0]
        if head in ("set-logic", "set-info", "set-option"):
            return
        if head in ("declare-fun", "declare-const"):
            if head == "declare-fun":
                if len(cmd) != 4 or cmd[2] != []:
                    raise SmtError("only zero-arity declare-fun is supported")
                name, sort = cmd[1], cmd[3]
            else:
                if len(cmd) != 3:
                    raise SmtError("malformed declare-const")
                name, sort = cmd[1], cmd[2]
            if not isinstance(name, str) or not isinstance(sort, str):
                raise SmtError("malformed declaration")
            if sort not in ("Real", "Bool"):
                raise SmtError(f"unsupported sort {sort!r}")
            if name in self.decls:
                raise SmtError(f"symbol {name!r} already declared")
            self.decls[name] = sort
            return
        if head == "assert":
            if len(cmd) != 2:
                raise SmtError("malformed assert")
            self.asserts.append(cmd[1])
            return
        if head == "check-sat":
            self._check_sat()
            return
        if head == "get-value":
            self._get_value(cmd)
            return
        if head == "get-model":
            self._get_value(["get-value", list(self.decls)])
            return
        if head == "echo":
            self.out.append(cmd[1] if len(cmd) > 1 else '""')
            return
        if head == "exit":
            self.stopped = True
            return
        raise SmtError(f"unsupported command {head!r}")

    def _check_sat(self) -> None:
        engine = Engine()
        tr = Translator(engine, self.decls)
        for a in self.asserts:
            tr.assert_term(a)
        deadline = None
        if self.timeout_ms is not None:
            deadline = time.monotonic() + self.timeout_ms / 1000.0
        status = engine.solve(deadline)
        self.out.append(status)
        self.model = None
        if status == "sat":
            delta = engine.simplex.concrete_delta()
            values: dict[str, object] = {}
            for name, sort in self.decls.items():
                if sort == "Bool":
                    v = tr.bool_var.get(name)
                    values[name] = bool(engine.assign[v]) if v is not None \
                        and engine.assign[v] is not None else False
                else:
                    sv = tr.real_var.get(name)
                    values[name] = engine.simplex.value(sv, delta) \
                        if sv is not None else Fraction(0)
            self.model = values

    def _get_value(self, cmd) -> None:
        if self.model is None:
            self.out.append('(error "model is not available")')
            return
        if len(cmd) != 2 or not isinstance(cmd[1], list):
            raise SmtError("malformed get-value")
        pairs = []
        for name in cmd[1]:
            if not isinstance(name, str) or name not in self.decls:
                raise SmtError(f"get-value of undeclared term {name!r}")
            v = self.model[name]
            text = ("true" if v else "false") if isinstance(v, bool) else _fmt_rational(v)
            pairs.append(f"({name} {text})")
        self.out.append("(" + " ".join(pairs) + ")")


def run_script(text: str, timeout_ms: int | None = None) -> str:
    return Session(timeout_ms).run_text(text)
