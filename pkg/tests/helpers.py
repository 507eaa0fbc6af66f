"""Shared test fixtures and exact geometric checks."""

from __future__ import annotations

from fractions import Fraction

from treeverify import domain as dom
from treeverify.model import (
    BOOL,
    REAL,
    BoolIsTrue,
    Ensemble,
    Internal,
    Leaf,
    LessThan,
    Tree,
)


def example_ensemble() -> Ensemble:
    """Two trees over one real and one boolean attribute.

    T1: A0 < 5 ? 1 : 2
    T2: A1 ? (A0 < 3 ? 3 : 4) : 5
    """
    t1 = Tree((Internal(LessThan(0, 5.0), 1, 2), Leaf(1.0), Leaf(2.0)))
    t2 = Tree((
        Internal(BoolIsTrue(1), 1, 4),
        Internal(LessThan(0, 3.0), 2, 3),
        Leaf(3.0),
        Leaf(4.0),
        Leaf(5.0),
    ))
    return Ensemble((t1, t2), (REAL, BOOL))


# ---------------------------------------------------------------------------
# Exact partition checking over products of boxes
# ---------------------------------------------------------------------------


def _axis_cells(domains_list, attr_index):
    """Cells induced by all boxes' bounds on one attribute axis."""
    sample = domains_list[0][attr_index]
    if isinstance(sample, dom.RealInterval):
        bounds = set()
        for domains in domains_list:
            iv = domains[attr_index]
            for b in (iv.lo, iv.hi):
                if b not in (float("-inf"), float("inf")):
                    bounds.add(b)
        cuts = sorted(bounds)
        edges = [float("-inf")] + cuts + [float("inf")]
        reps = []
        for lo, hi in zip(edges, edges[1:]):
            if lo != float("-inf"):
                reps.append(lo)  # cell [lo, hi): lo is inside
            elif hi != float("inf"):
                reps.append(hi - 1.0)
            else:
                reps.append(0.0)
        return reps
    return [True, False]


def check_partition(initial_boxes, reported_boxes_list) -> None:
    """Assert reported box tuples are pairwise disjoint and cover the initial.

    Boxes are per-instance tuples; the product space over all instances'
    attributes is cut into grid cells by every bound, and each cell
    representative must fall into exactly one reported tuple.
    """
    import itertools

    n_instances = len(initial_boxes)
    axes = []
    for i in range(n_instances):
        domains_list = [initial_boxes[i].domains] + [
            boxes[i].domains for boxes in reported_boxes_list
        ]
        for k in range(len(initial_boxes[i].domains)):
            axes.append(((i, k), _axis_cells(domains_list, k)))

    def covered_by(point, boxes) -> bool:
        for (i, k), v in point.items():
            d = boxes[i].domains[k]
            if isinstance(d, dom.RealInterval):
                if not (d.lo <= v < d.hi):
                    return False
            else:
                if not d.allows(v):
                    return False
        return True

    keys = [key for key, _ in axes]
    for combo in itertools.product(*(reps for _, reps in axes)):
        point = dict(zip(keys, combo))
        if not covered_by(point, initial_boxes):
            continue
        hits = sum(1 for boxes in reported_boxes_list if covered_by(point, boxes))
        assert hits == 1, (
            f"cell {point} covered by {hits} reported boxes (expected exactly 1)"
        )


def boxes_from_report(task, report):
    """Replay a report's serialized trails into DomainBox tuples."""
    out = []
    for i, trail_json in enumerate(report.boxes):
        steps = dom.trail_from_json(trail_json)
        box = dom.replay_trail(task.instances[i].attr_types, steps)
        assert box is not None
        out.append(box)
    return tuple(out)


def exact_witnesses(witnesses):
    """Report witnesses as exact values (Fractions and bools)."""
    return [
        tuple(v if isinstance(v, bool) else Fraction(v) for v in w)
        for w in witnesses
    ]
