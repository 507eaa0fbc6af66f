"""Problem-size reduction: prune unreachable branches, pick the best split.

Pruning walks each tree with a running refined box. Where the box decides a
split one way, the node is replaced by the surviving child's pruned subtree;
leaf values are never touched, so the pruned ensemble agrees with the
original on every instance inside the box. Feasibility here is the box
abstraction, not a solver call: sound (never removes a reachable branch) but
possibly incomplete. An optional deep-check callback lets the caller re-test
undecided branches with short solver queries.

Split selection scores each candidate condition by how many currently
reachable leaves its two subdomains would kill, and prefers the largest
total. Candidates and counts are taken against the currently pruned ensemble
so scores reflect the live subproblem.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .domain import BoolDomain, DomainBox, Relation, refine, relation
from .model import (
    BoolIsTrue,
    Ensemble,
    Internal,
    Leaf,
    LessThan,
    Node,
    SplitCondition,
    Tree,
    collect_splits,
    leaf_count,
    split_order_key,
)

#: Optional hook deciding whether a refined branch box is still feasible.
DeepCheck = Callable[[int, DomainBox], bool]


@dataclass(frozen=True)
class PrunedEnsemble:
    ensemble: Ensemble
    original_leaf_count: int
    pruned_leaf_count: int


def _prune_tree(tree: Tree, box: DomainBox, instance: int,
                deep_check: Optional[DeepCheck]) -> Tree:
    nodes: list[Node] = []

    def walk(idx: int, b: DomainBox) -> int:
        node = tree.nodes[idx]
        if isinstance(node, Leaf):
            nodes.append(node)
            return len(nodes) - 1
        rel = relation(b, node.cond)
        if rel is Relation.ALWAYS_TRUE:
            return walk(node.left, b)
        if rel is Relation.ALWAYS_FALSE:
            return walk(node.right, b)
        left_box = refine(b, node.cond, True)
        right_box = refine(b, node.cond, False)
        if deep_check is not None:
            left_ok = deep_check(instance, left_box)
            right_ok = deep_check(instance, right_box)
            # both sides refuted means the check contradicts the box
            # abstraction; keep the node and let the solver settle it
            if left_ok and not right_ok:
                return walk(node.left, left_box)
            if right_ok and not left_ok:
                return walk(node.right, right_box)
        slot = len(nodes)
        nodes.append(node)  # placeholder, replaced below
        left = walk(node.left, left_box)
        right = walk(node.right, right_box)
        nodes[slot] = Internal(node.cond, left, right)
        return slot

    walk(0, box)
    return Tree(tuple(nodes))


def prune(e: Ensemble, box: DomainBox, instance: int = 0,
          deep_check: Optional[DeepCheck] = None) -> PrunedEnsemble:
    """Remove branches unreachable inside the box; collapse decided chains."""
    if box is None:
        raise ValueError("prune requires a non-empty box")
    if len(box.domains) != e.num_attributes:
        raise ValueError("box does not match the ensemble's attribute count")
    trees = tuple(_prune_tree(t, box, instance, deep_check) for t in e.trees)
    pruned = Ensemble(trees, e.attr_types, e.base_score)
    return PrunedEnsemble(pruned, leaf_count(e), leaf_count(pruned))


# ---------------------------------------------------------------------------
# Reachable-leaf counting
#
# A leaf survives pruning under a box iff, for every attribute, the
# conjunction of its path literals intersects the box. Collecting the per-leaf
# per-attribute constraints once makes candidate scoring O(leaves) per split
# instead of a prune walk per candidate.
# ---------------------------------------------------------------------------


def _leaf_constraints(tree: Tree) -> list[dict]:
    """Per leaf: {attr: (lo, hi)} for reals and {attr: bool} for booleans."""
    out: list[dict] = []

    def walk(idx: int, cons: dict):
        node = tree.nodes[idx]
        if isinstance(node, Leaf):
            out.append(cons)
            return
        cond = node.cond
        if isinstance(cond, LessThan):
            lo, hi = cons.get(cond.attr, (float("-inf"), float("inf")))
            left = dict(cons)
            left[cond.attr] = (lo, min(hi, cond.threshold))
            right = dict(cons)
            right[cond.attr] = (max(lo, cond.threshold), hi)
            if left[cond.attr][0] < left[cond.attr][1]:
                walk(node.left, left)
            if right[cond.attr][0] < right[cond.attr][1]:
                walk(node.right, right)
        else:
            prev = cons.get(cond.attr)
            if prev is not True:
                left = dict(cons)
                left[cond.attr] = True
                walk(node.left, left)
            if prev is not False:
                right = dict(cons)
                right[cond.attr] = False
                walk(node.right, right)

    walk(0, {})
    return out


def _leaf_alive(cons: dict, box: DomainBox) -> bool:
    for attr, need in cons.items():
        d = box.domains[attr]
        if isinstance(need, tuple):
            lo, hi = need
            if max(lo, d.lo) >= min(hi, d.hi):
                return False
        else:
            if isinstance(d, BoolDomain) and d is not BoolDomain.BOTH \
                    and d.allows(not need):
                return False
    return True


def _alive_count(leaf_cons: list[list[dict]], box: DomainBox) -> int:
    return sum(
        1 for tree_cons in leaf_cons for cons in tree_cons if _leaf_alive(cons, box)
    )


def unreachable_leaf_count(e: Ensemble, box: DomainBox,
                           cond: SplitCondition) -> tuple[int, int]:
    """Leaves killed in the condition's true-side and false-side subdomains.

    Both counts are relative to the leaves still reachable under the box
    itself; equal by definition to the difference of leaf counts of
    independent prune calls.
    """
    if relation(box, cond) is not Relation.UNDECIDED:
        raise ValueError("unreachable_leaf_count requires an undecided condition")
    leaf_cons = [_leaf_constraints(t) for t in e.trees]
    base = _alive_count(leaf_cons, box)
    left = base - _alive_count(leaf_cons, refine(box, cond, True))
    right = base - _alive_count(leaf_cons, refine(box, cond, False))
    return left, right


def best_split(e: Ensemble, box: DomainBox) -> Optional[SplitCondition]:
    """The undecided split killing the most reachable leaves, or None.

    Score is the sum of the two subdomain kill counts; ties prefer the more
    balanced split (larger smaller side), then the canonical split order.
    Candidates come from the ensemble as pruned under the box, so the counts
    reflect the live problem.
    """
    pruned = prune(e, box).ensemble
    leaf_cons = [_leaf_constraints(t) for t in pruned.trees]
    base = _alive_count(leaf_cons, box)
    best: Optional[SplitCondition] = None
    best_key = None
    for cond in collect_splits(pruned):
        if relation(box, cond) is not Relation.UNDECIDED:
            continue
        left = base - _alive_count(leaf_cons, refine(box, cond, True))
        right = base - _alive_count(leaf_cons, refine(box, cond, False))
        score = left + right
        if score == 0:
            continue
        # larger score first, then larger min side; split_order_key ascending
        key = (-score, -min(left, right), split_order_key(cond))
        if best_key is None or key < best_key:
            best_key = key
            best = cond
    return best
