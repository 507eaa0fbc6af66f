"""Per-attribute input domains: the unit of divide-and-conquer.

A DomainBox constrains each attribute independently: real attributes to a
half-open interval [lo, hi) and boolean attributes to true, false, or both.
Half-open intervals mesh exactly with strict less-than splits: refining by
`attr < t` and its negation partitions a box with no boundary ambiguity.

Boxes are immutable; refinement returns a new box carrying an extended trail
of (condition, polarity) pairs. Replaying a box's trail from the
unconstrained box reproduces it exactly, which is what makes boxes cheap to
serialize, checkpoint, and resume. An empty refinement is reported as None,
never constructed.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .errors import ParseError, ValidationError
from .model import (
    BOOL,
    REAL,
    BoolIsTrue,
    Instance,
    LessThan,
    SplitCondition,
)

NEG_INF = float("-inf")
POS_INF = float("inf")


@dataclass(frozen=True)
class RealInterval:
    """Values v with lo <= v < hi; infinities mark unbounded sides."""

    lo: float = NEG_INF
    hi: float = POS_INF

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValidationError(f"empty interval [{self.lo}, {self.hi})")

    def allows(self, v) -> bool:
        return self.lo <= v < self.hi


class BoolDomain(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    BOTH = "both"

    def allows(self, v: bool) -> bool:
        if self is BoolDomain.BOTH:
            return True
        return v is (self is BoolDomain.TRUE)


AttrDomain = Union[RealInterval, BoolDomain]

#: One (condition, polarity) step of a refinement trail.
TrailStep = tuple[SplitCondition, bool]


@dataclass(frozen=True)
class DomainBox:
    domains: tuple[AttrDomain, ...]
    trail: tuple[TrailStep, ...] = ()


class Relation(enum.Enum):
    """How a box relates to a split condition."""

    ALWAYS_TRUE = "always_true"
    ALWAYS_FALSE = "always_false"
    UNDECIDED = "undecided"


def unconstrained(attr_types: Sequence[str]) -> DomainBox:
    """The full input space: unbounded reals, both boolean values, empty trail."""
    domains = tuple(
        RealInterval() if t == REAL else BoolDomain.BOTH for t in attr_types
    )
    return DomainBox(domains)


def refine(box: DomainBox, cond: SplitCondition, polarity: bool) -> Optional[DomainBox]:
    """Intersect the box with a split literal; None if the result is empty.

    polarity=True keeps values satisfying the condition (attr < t, resp.
    attr true); polarity=False keeps the complement (attr >= t, attr false).
    """
    k = cond.attr
    dom = box.domains[k]
    if isinstance(cond, LessThan):
        if not isinstance(dom, RealInterval):
            raise ValidationError(f"less-than refinement on boolean attribute {k}")
        if polarity:
            lo, hi = dom.lo, min(dom.hi, cond.threshold)
        else:
            lo, hi = max(dom.lo, cond.threshold), dom.hi
        if not lo < hi:
            return None
        new_dom: AttrDomain = RealInterval(lo, hi)
    else:
        if not isinstance(dom, BoolDomain):
            raise ValidationError(f"boolean refinement on real attribute {k}")
        want = BoolDomain.TRUE if polarity else BoolDomain.FALSE
        if dom is not BoolDomain.BOTH and dom is not want:
            return None
        new_dom = want
    domains = box.domains[:k] + (new_dom,) + box.domains[k + 1:]
    return DomainBox(domains, box.trail + ((cond, polarity),))


def relation(box: DomainBox, cond: SplitCondition) -> Relation:
    """Decide whether every, no, or some value in the box satisfies the condition."""
    dom = box.domains[cond.attr]
    if isinstance(cond, LessThan):
        if not isinstance(dom, RealInterval):
            raise ValidationError(f"less-than condition on boolean attribute {cond.attr}")
        if dom.hi <= cond.threshold:
            return Relation.ALWAYS_TRUE
        if dom.lo >= cond.threshold:
            return Relation.ALWAYS_FALSE
        return Relation.UNDECIDED
    if not isinstance(dom, BoolDomain):
        raise ValidationError(f"boolean condition on real attribute {cond.attr}")
    if dom is BoolDomain.TRUE:
        return Relation.ALWAYS_TRUE
    if dom is BoolDomain.FALSE:
        return Relation.ALWAYS_FALSE
    return Relation.UNDECIDED


def contains(box: DomainBox, x: Instance) -> bool:
    """True iff every attribute value lies in its domain (half-open intervals)."""
    if len(x) != len(box.domains):
        raise ValidationError(
            f"instance has {len(x)} values, box has {len(box.domains)} attributes"
        )
    for dom, v in zip(box.domains, x):
        if isinstance(dom, RealInterval):
            if isinstance(v, bool) or not dom.allows(v):
                return False
        else:
            if not isinstance(v, bool) or not dom.allows(v):
                return False
    return True


def replay_trail(attr_types: Sequence[str], trail: Sequence[TrailStep]) -> Optional[DomainBox]:
    """Rebuild a box by refining the unconstrained box step by step."""
    box: Optional[DomainBox] = unconstrained(attr_types)
    for cond, polarity in trail:
        if not (0 <= cond.attr < len(attr_types)):
            raise ValidationError(f"trail condition on unknown attribute {cond.attr}")
        box = refine(box, cond, polarity)
        if box is None:
            return None
    return box


# ---------------------------------------------------------------------------
# Trail serialization, e.g.
#   [{"lt": {"attr": 0, "threshold": 5.0}, "polarity": true}]
# used in report output and checkpoint/resume.
# ---------------------------------------------------------------------------


def trail_to_json(box: DomainBox) -> list[dict]:
    steps = []
    for cond, polarity in box.trail:
        if isinstance(cond, LessThan):
            step = {"lt": {"attr": cond.attr, "threshold": cond.threshold}}
        else:
            step = {"bool": {"attr": cond.attr}}
        step["polarity"] = polarity
        steps.append(step)
    return steps


def trail_from_json(steps: list) -> list[TrailStep]:
    if not isinstance(steps, list):
        raise ParseError("trail must be a JSON array")
    trail: list[TrailStep] = []
    for i, step in enumerate(steps):
        if not isinstance(step, dict) or "polarity" not in step:
            raise ParseError(f"trail step {i}: missing polarity")
        pol = step["polarity"]
        if not isinstance(pol, bool):
            raise ParseError(f"trail step {i}: polarity must be a boolean")
        if "lt" in step:
            lt = step["lt"]
            try:
                cond: SplitCondition = LessThan(int(lt["attr"]), float(lt["threshold"]))
            except (KeyError, TypeError, ValueError):
                raise ParseError(f"trail step {i}: malformed 'lt' condition") from None
            if not math.isfinite(cond.threshold):
                raise ParseError(f"trail step {i}: non-finite threshold")
        elif "bool" in step:
            try:
                cond = BoolIsTrue(int(step["bool"]["attr"]))
            except (KeyError, TypeError, ValueError):
                raise ParseError(f"trail step {i}: malformed 'bool' condition") from None
        else:
            raise ParseError(f"trail step {i}: needs 'lt' or 'bool'")
        trail.append((cond, pol))
    return trail


def box_to_json_str(box: DomainBox) -> str:
    return json.dumps(trail_to_json(box))
