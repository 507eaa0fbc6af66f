"""Incremental simplex over exact rationals for linear real arithmetic.

The classic DPLL(T) arithmetic core: variables carry lower/upper bounds,
defined variables (slacks) are rows of a tableau, and a check() call pivots
until every basic variable sits within its bounds or reports an infeasible
subset of the asserted bounds. Strict inequalities are handled symbolically
with delta-rationals (a + b*delta for an infinitesimal delta > 0); a concrete
rational model substitutes a small enough positive delta at the end.

Bland's rule (always the smallest eligible variable index) guarantees
termination. Bound assertions are trailed so the SAT search can backtrack;
pivots are not undone, which is sound because pivoting preserves the solution
set of the tableau.
"""

from __future__ import annotations

from fractions import Fraction

ZERO = Fraction(0)


class DRat:
    """Rational plus an infinitesimal component: value = r + d * delta."""

    __slots__ = ("r", "d")

    def __init__(self, r: Fraction, d: Fraction = ZERO):
        self.r = r
        self.d = d

    def __add__(self, other: "DRat") -> "DRat":
        return DRat(self.r + other.r, self.d + other.d)

    def __sub__(self, other: "DRat") -> "DRat":
        return DRat(self.r - other.r, self.d - other.d)

    def scaled(self, c: Fraction) -> "DRat":
        return DRat(self.r * c, self.d * c)

    def __lt__(self, other: "DRat") -> bool:
        return (self.r, self.d) < (other.r, other.d)

    def __le__(self, other: "DRat") -> bool:
        return (self.r, self.d) <= (other.r, other.d)

    def __eq__(self, other) -> bool:
        return isinstance(other, DRat) and self.r == other.r and self.d == other.d

    def __repr__(self) -> str:
        return f"DRat({self.r}, {self.d})"


class Conflict(Exception):
    """Infeasible set of bound reasons (opaque tags supplied by the caller)."""

    def __init__(self, reasons):
        super().__init__("infeasible bounds")
        self.reasons = list(reasons)


class Simplex:
    def __init__(self):
        self.val: list[DRat] = []
        self.lob: list = []  # (DRat bound, reason) or None
        self.upb: list = []
        self.rows: dict[int, dict[int, Fraction]] = {}  # basic var -> row
        self.col: dict[int, set[int]] = {}  # var -> basic vars whose row uses it
        self.trail: list = []  # (var, "lo"/"up", previous entry)
        self.tick = None  # optional callback, invoked once per pivot round

    def new_var(self) -> int:
        v = len(self.val)
        self.val.append(DRat(ZERO))
        self.lob.append(None)
        self.upb.append(None)
        self.col.setdefault(v, set())
        return v

    def define(self, combo: dict[int, Fraction]) -> int:
        """New basic variable equal to a linear combination of existing vars."""
        s = self.new_var()
        row: dict[int, Fraction] = {}
        value = DRat(ZERO)
        for v, c in combo.items():
            if c == 0:
                continue
            if v in self.rows:
                for v2, c2 in self.rows[v].items():
                    row[v2] = row.get(v2, ZERO) + c * c2
            else:
                row[v] = row.get(v, ZERO) + c
            value = value + self.val[v].scaled(c)
        row = {v: c for v, c in row.items() if c != 0}
        self.rows[s] = row
        for v in row:
            self.col[v].add(s)
        self.val[s] = value
        return s

    # -- bound assertion with trailing ------------------------------------

    def mark(self) -> int:
        return len(self.trail)

    def undo_to(self, mark: int) -> None:
        while len(self.trail) > mark:
            var, which, prev = self.trail.pop()
            if which == "lo":
                self.lob[var] = prev
            else:
                self.upb[var] = prev

    def assert_lower(self, var: int, bound: DRat, reason) -> None:
        cur = self.lob[var]
        if cur is not None and bound <= cur[0]:
            return
        up = self.upb[var]
        if up is not None and up[0] < bound:
            raise Conflict([reason, up[1]])
        self.trail.append((var, "lo", cur))
        self.lob[var] = (bound, reason)
        if var not in self.rows and self.val[var] < bound:
            self._update(var, bound)

    def assert_upper(self, var: int, bound: DRat, reason) -> None:
        cur = self.upb[var]
        if cur is not None and cur[0] <= bound:
            return
        lo = self.lob[var]
        if lo is not None and bound < lo[0]:
            raise Conflict([reason, lo[1]])
        self.trail.append((var, "up", cur))
        self.upb[var] = (bound, reason)
        if var not in self.rows and bound < self.val[var]:
            self._update(var, bound)

    def _update(self, var: int, value: DRat) -> None:
        delta = value - self.val[var]
        self.val[var] = value
        for b in self.col[var]:
            self.val[b] = self.val[b] + self.val_delta(b, var, delta)

    def val_delta(self, basic: int, var: int, delta: DRat) -> DRat:
        return delta.scaled(self.rows[basic][var])

    # -- the main feasibility loop ----------------------------------------

    def check(self) -> None:
        """Pivot until feasible; raise Conflict with the infeasible bound reasons."""
        while True:
            if self.tick is not None:
                self.tick()
            broken = None
            for b in sorted(self.rows):
                lo = self.lob[b]
                if lo is not None and self.val[b] < lo[0]:
                    broken = (b, True, lo)
                    break
                up = self.upb[b]
                if up is not None and up[0] < self.val[b]:
                    broken = (b, False, up)
                    break
            if broken is None:
                return
            b, need_increase, bound = broken
            row = self.rows[b]
            pivot_var = None
            for n in sorted(row):
                c = row[n]
                if need_increase:
                    ok = (c > 0 and self._below_upper(n)) or (c < 0 and self._above_lower(n))
                else:
                    ok = (c > 0 and self._above_lower(n)) or (c < 0 and self._below_upper(n))
                if ok:
                    pivot_var = n
                    break
            if pivot_var is None:
                reasons = [bound[1]]
                for n, c in row.items():
                    if need_increase:
                        entry = self.upb[n] if c > 0 else self.lob[n]
                    else:
                        entry = self.lob[n] if c > 0 else self.upb[n]
                    reasons.append(entry[1])
                raise Conflict(reasons)
            self._pivot_and_update(b, pivot_var, bound[0])

    def _below_upper(self, v: int) -> bool:
        up = self.upb[v]
        return up is None or self.val[v] < up[0]

    def _above_lower(self, v: int) -> bool:
        lo = self.lob[v]
        return lo is None or lo[0] < self.val[v]

    def _pivot_and_update(self, b: int, n: int, target: DRat) -> None:
        row = self.rows.pop(b)
        a = row[n]
        theta = (target - self.val[b]).scaled(Fraction(1) / a)
        # move n by theta; every row using n (including b's old row) follows
        self.val[b] = target
        self.val[n] = self.val[n] + theta
        for other in self.col[n]:
            if other != b:
                self.val[other] = self.val[other] + theta.scaled(self.rows[other][n])
        # structural pivot: solve b's row for n
        new_row = {b: Fraction(1) / a}
        for v, c in row.items():
            if v != n:
                new_row[v] = -c / a
        for v in row:
            self.col[v].discard(b)
        self.col[n].discard(b)
        users = [o for o in self.col[n] if o in self.rows]
        self.rows[n] = new_row
        for v in new_row:
            self.col[v].add(n)
        self.col[n] = set()
        for other in users:
            orow = self.rows[other]
            cn = orow.pop(n)
            for v, c in new_row.items():
                nv = orow.get(v, ZERO) + cn * c
                if nv == 0:
                    if v in orow:
                        del orow[v]
                    self.col[v].discard(other)
                else:
                    orow[v] = nv
                    self.col[v].add(other)

    # -- model extraction ---------------------------------------------------

    def concrete_delta(self) -> Fraction:
        """A positive rational small enough to stand in for the infinitesimal."""
        limit = Fraction(1)
        for v in range(len(self.val)):
            val = self.val[v]
            lo = self.lob[v]
            if lo is not None:
                limit = self._tighten(limit, lo[0], val)
            up = self.upb[v]
            if up is not None:
                limit = self._tighten(limit, val, up[0])
        return limit

    @staticmethod
    def _tighten(limit: Fraction, small: DRat, big: DRat) -> Fraction:
        # keep small.r + small.d*d0 <= big.r + big.d*d0
        if small.r < big.r and small.d > big.d:
            cap = (big.r - small.r) / (small.d - big.d)
            if cap < limit:
                return cap
        return limit

    def value(self, var: int, delta: Fraction) -> Fraction:
        v = self.val[var]
        return v.r + v.d * delta
