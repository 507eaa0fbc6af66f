"""Seeded random generators for ensembles, instances, boxes, and tasks.

Thresholds and leaf values come from a coarse grid (quarters in a small
range) so exact-arithmetic comparisons stay cheap and outputs frequently tie,
which is exactly where ordering bugs would hide.
"""

from __future__ import annotations

import random
from fractions import Fraction

from treeverify import question as q
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
    collect_splits,
    evaluate,
)


def rand_value(rng: random.Random, lo=-4.0, hi=4.0) -> float:
    return rng.randrange(int(lo * 4), int(hi * 4) + 1) / 4.0


def rand_tree(rng: random.Random, attr_types, max_depth: int,
              thresholds_pool=None) -> Tree:
    nodes = []

    def build(depth: int) -> int:
        idx = len(nodes)
        nodes.append(None)
        if depth >= max_depth or rng.random() < 0.25 + 0.15 * depth:
            nodes[idx] = Leaf(rand_value(rng))
            return idx
        k = rng.randrange(len(attr_types))
        if attr_types[k] == REAL:
            if thresholds_pool and rng.random() < 0.5:
                thr = rng.choice(thresholds_pool)
            else:
                thr = rand_value(rng, -6, 6)
            cond = LessThan(k, thr)
        else:
            cond = BoolIsTrue(k)
        left = build(depth + 1)
        right = build(depth + 1)
        nodes[idx] = Internal(cond, left, right)
        return idx

    build(0)
    return Tree(tuple(nodes))


def rand_ensemble(rng: random.Random, max_attrs: int = 3, max_trees: int = 5,
                  max_depth: int = 3, bool_frac: float = 0.35) -> Ensemble:
    k = rng.randrange(1, max_attrs + 1)
    attr_types = tuple(
        BOOL if rng.random() < bool_frac else REAL for _ in range(k)
    )
    if not any(t == REAL for t in attr_types) and rng.random() < 0.5:
        attr_types = (REAL,) + attr_types[1:]
    # shared threshold pool encourages overlapping splits across trees
    pool = [rand_value(rng, -6, 6) for _ in range(4)]
    n_trees = rng.randrange(1, max_trees + 1)
    trees = tuple(
        rand_tree(rng, attr_types, rng.randrange(1, max_depth + 1), pool)
        for _ in range(n_trees)
    )
    base = rand_value(rng, -2, 2) if rng.random() < 0.3 else 0.0
    return Ensemble(trees, attr_types, base)


def rand_instance(rng: random.Random, e: Ensemble) -> tuple:
    vals = []
    for t in e.attr_types:
        if t == BOOL:
            vals.append(rng.random() < 0.5)
        else:
            vals.append(rand_value(rng, -7, 7))
    return tuple(vals)


def rand_box(rng: random.Random, e: Ensemble,
             max_refinements: int = 3) -> dom.DomainBox:
    box = dom.unconstrained(e.attr_types)
    conds = collect_splits(e)
    for _ in range(rng.randrange(0, max_refinements + 1)):
        if conds and rng.random() < 0.7:
            cond = rng.choice(conds)
        else:
            reals = [k for k, t in enumerate(e.attr_types) if t == REAL]
            if not reals:
                continue
            cond = LessThan(rng.choice(reals), rand_value(rng, -6, 6))
        refined = dom.refine(box, cond, rng.random() < 0.5)
        if refined is not None:
            box = refined
    return box


def instance_in_box(rng: random.Random, e: Ensemble,
                    box: dom.DomainBox) -> tuple:
    vals = []
    for d in box.domains:
        if isinstance(d, dom.RealInterval):
            lo = d.lo if d.lo != float("-inf") else -10.0
            hi = d.hi if d.hi != float("inf") else 10.0
            if lo >= hi:
                lo, hi = d.lo, d.lo + 1
            vals.append(lo + (hi - lo) * rng.random() * 0.999)
        else:
            if d is dom.BoolDomain.BOTH:
                vals.append(rng.random() < 0.5)
            else:
                vals.append(d is dom.BoolDomain.TRUE)
    return tuple(vals)


def _output_threshold(rng: random.Random, e: Ensemble) -> float:
    samples = [evaluate(e, rand_instance(rng, e)) for _ in range(8)]
    pivot = rng.choice(samples)
    return pivot + rng.choice([-0.5, -0.25, 0.0, 0.125, 0.25, 0.75])


def rand_task(rng: random.Random, e: Ensemble) -> q.VerificationTask:
    """A random task from the fragment both the oracle and builders support."""
    kind = rng.randrange(5)
    if kind == 0:
        # output threshold, optionally with box constraints
        parts = [q.gt(q.out(0), _output_threshold(rng, e)) if rng.random() < 0.5
                 else q.lt(q.out(0), _output_threshold(rng, e))]
        for k, t in enumerate(e.attr_types):
            if t == REAL and rng.random() < 0.4:
                if rng.random() < 0.5:
                    parts.append(q.lt(q.attr(0, k), rand_value(rng, -5, 5)))
                else:
                    parts.append(q.ge(q.attr(0, k), rand_value(rng, -5, 5)))
            elif t == BOOL and rng.random() < 0.25:
                lit = q.bool_attr(0, k)
                parts.append(lit if rng.random() < 0.5 else q.Not(lit))
        return q.single_instance_question(e, parts)
    if kind == 1:
        k = rng.randrange(e.num_attributes)
        return q.monotonicity_task(e, k)
    if kind == 2:
        gap = rng.choice([0.25, 0.5, 1.0, 2.0])
        protected = rng.randrange(e.num_attributes) if rng.random() < 0.6 else None
        return q.one_diff_pair_task(e, protected, q.ge(q.out(0), q.out(1) + gap))
    if kind == 3:
        x = rand_instance(rng, e)
        delta = rng.choice([0.25, 0.5, 1.0, 1.5])
        l1 = rng.choice([None, None, 0.5, 1.0, 2.0])
        target = q.gt(q.out(0), _output_threshold(rng, e))
        return q.adversarial_task(e, x, delta, l1, target)
    # two-sided output corridor
    lo = _output_threshold(rng, e)
    return q.single_instance_question(
        e, [q.ge(q.out(0), lo), q.le(q.out(0), lo + rng.choice([0.0, 0.5, 2.0]))])
