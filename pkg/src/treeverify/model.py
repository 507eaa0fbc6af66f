"""Additive ensembles of binary trees: loading, validation, evaluation.

An ensemble is a list of binary trees over K typed attributes plus a constant
base score. Internal nodes hold either a strict less-than split on a real
attribute (values equal to the threshold go right) or a boolean split (true
goes left). The ensemble's output for an instance is the base score plus the
sum of the leaf values reached in each tree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import IO, Sequence, Union

from .errors import ParseError, ValidationError

REAL = "real"
BOOL = "bool"

#: One value per attribute, typed according to ``Ensemble.attr_types``.
#: Real attributes accept float or Fraction; exact rationals preserve solver
#: witnesses without rounding.
Value = Union[float, bool, Fraction]
Instance = Sequence[Value]


@dataclass(frozen=True)
class LessThan:
    """Split ``attr < threshold`` on a real attribute."""

    attr: int
    threshold: float


@dataclass(frozen=True)
class BoolIsTrue:
    """Split on a boolean attribute; true routes left."""

    attr: int


SplitCondition = Union[LessThan, BoolIsTrue]


@dataclass(frozen=True)
class Internal:
    cond: SplitCondition
    left: int
    right: int


@dataclass(frozen=True)
class Leaf:
    value: float


Node = Union[Internal, Leaf]


@dataclass(frozen=True)
class Tree:
    """Binary tree stored as a node array; node 0 is the root."""

    nodes: tuple[Node, ...]


@dataclass(frozen=True)
class Ensemble:
    """Sum of binary trees over K typed attributes plus a base score.

    Immutable after construction; safe to share across worker threads.
    """

    trees: tuple[Tree, ...]
    attr_types: tuple[str, ...]
    base_score: float = 0.0

    @property
    def num_attributes(self) -> int:
        return len(self.attr_types)


def split_order_key(cond: SplitCondition) -> tuple:
    """Canonical total order: attr asc, LessThan before BoolIsTrue, threshold asc."""
    if isinstance(cond, LessThan):
        return (cond.attr, 0, cond.threshold)
    return (cond.attr, 1, 0.0)


def validate_ensemble(e: Ensemble) -> None:
    """Check all structural invariants; raise ValidationError naming tree and node."""
    if not e.trees:
        raise ValidationError("ensemble must contain at least one tree")
    for t in e.attr_types:
        if t not in (REAL, BOOL):
            raise ValidationError(f"unknown attribute type {t!r}")
    if not math.isfinite(e.base_score):
        raise ValidationError("base_score must be finite")
    k = e.num_attributes
    for ti, tree in enumerate(e.trees):
        n = len(tree.nodes)
        if n == 0:
            raise ValidationError(f"tree {ti}: empty node array")
        indegree = [0] * n
        for ni, node in enumerate(tree.nodes):
            if isinstance(node, Leaf):
                if not math.isfinite(node.value):
                    raise ValidationError(f"tree {ti}, node {ni}: non-finite leaf value")
                continue
            for child in (node.left, node.right):
                if not (0 <= child < n):
                    raise ValidationError(
                        f"tree {ti}, node {ni}: child index {child} out of range"
                    )
                indegree[child] += 1
            cond = node.cond
            if not (0 <= cond.attr < k):
                raise ValidationError(
                    f"tree {ti}, node {ni}: attribute id {cond.attr} >= {k}"
                )
            if isinstance(cond, LessThan):
                if e.attr_types[cond.attr] != REAL:
                    raise ValidationError(
                        f"tree {ti}, node {ni}: less-than split on boolean attribute {cond.attr}"
                    )
                if not math.isfinite(cond.threshold):
                    raise ValidationError(f"tree {ti}, node {ni}: non-finite threshold")
            else:
                if e.attr_types[cond.attr] != BOOL:
                    raise ValidationError(
                        f"tree {ti}, node {ni}: boolean split on real attribute {cond.attr}"
                    )
        if indegree[0] != 0:
            raise ValidationError(f"tree {ti}: root node 0 has a parent")
        for ni in range(1, n):
            if indegree[ni] != 1:
                raise ValidationError(
                    f"tree {ti}, node {ni}: expected exactly one parent, found {indegree[ni]}"
                )
        # In-degree checks rule out sharing; a cycle would need an extra edge
        # into some node, so reachability from the root is the last thing left.
        seen = set()
        stack = [0]
        while stack:
            ni = stack.pop()
            if ni in seen:
                raise ValidationError(f"tree {ti}, node {ni}: cyclic node reference")
            seen.add(ni)
            node = tree.nodes[ni]
            if isinstance(node, Internal):
                stack.append(node.left)
                stack.append(node.right)
        if len(seen) != n:
            unreached = min(set(range(n)) - seen)
            raise ValidationError(f"tree {ti}, node {unreached}: unreachable from root")


def _goes_left(cond: SplitCondition, x: Instance) -> bool:
    if isinstance(cond, LessThan):
        return x[cond.attr] < cond.threshold
    return bool(x[cond.attr])


def _reached_leaf(tree: Tree, x: Instance) -> Leaf:
    node = tree.nodes[0]
    while isinstance(node, Internal):
        node = tree.nodes[node.left if _goes_left(node.cond, x) else node.right]
    return node


def evaluate(e: Ensemble, x: Instance) -> float:
    """Evaluate the ensemble: base score plus the sum of the reached leaf values.

    Comparisons against thresholds are exact for float and Fraction inputs
    alike; the summation is done in float, in tree order.
    """
    total = e.base_score
    for tree in e.trees:
        total += _reached_leaf(tree, x).value
    return total


def evaluate_exact(e: Ensemble, x: Instance) -> Fraction:
    """Evaluate with exact rational summation (for witness re-checking)."""
    total = Fraction(e.base_score)
    for tree in e.trees:
        total += Fraction(_reached_leaf(tree, x).value)
    return total


def leaf_count(e: Ensemble) -> int:
    """Total number of leaves across all trees."""
    return sum(1 for tree in e.trees for node in tree.nodes if isinstance(node, Leaf))


def collect_splits(e: Ensemble) -> list[SplitCondition]:
    """All distinct split conditions, in the canonical order."""
    seen = set()
    for tree in e.trees:
        for node in tree.nodes:
            if isinstance(node, Internal):
                seen.add(node.cond)
    return sorted(seen, key=split_order_key)


def check_instance(e: Ensemble, x: Instance) -> None:
    """Raise ValidationError unless x conforms to the ensemble's attribute types."""
    if len(x) != e.num_attributes:
        raise ValidationError(f"instance has {len(x)} values, expected {e.num_attributes}")
    for k, (t, v) in enumerate(zip(e.attr_types, x)):
        if t == BOOL:
            if not isinstance(v, bool):
                raise ValidationError(f"attribute {k}: expected bool, got {v!r}")
        else:
            if isinstance(v, bool):
                raise ValidationError(f"attribute {k}: expected real, got bool")
            if isinstance(v, float) and not math.isfinite(v):
                raise ValidationError(f"attribute {k}: non-finite value")


# ---------------------------------------------------------------------------
# JSON serialization
#
# Canonical format:
#   {"num_attributes": K, "attr_types": ["real"|"bool", ...], "base_score": f,
#    "trees": [<node>, ...]}
# where <node> is one of
#   {"lt": {"attr": k, "threshold": t}, "left": <node>, "right": <node>}
#   {"bool": {"attr": k}, "left": <node>, "right": <node>}
#   {"leaf": v}
# A tree may also be given in flat form {"nodes": [...]} with integer child
# indices instead of nested nodes; `save_ensemble` always emits nested nodes.
# ---------------------------------------------------------------------------


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ParseError(msg)


def _parse_cond(obj: dict, where: str) -> SplitCondition:
    if "lt" in obj:
        lt = obj["lt"]
        _require(isinstance(lt, dict) and "attr" in lt and "threshold" in lt,
                 f"{where}: malformed 'lt' split")
        _require(isinstance(lt["attr"], int), f"{where}: split attr must be an integer")
        _require(isinstance(lt["threshold"], (int, float)) and not isinstance(lt["threshold"], bool),
                 f"{where}: threshold must be a number")
        return LessThan(lt["attr"], float(lt["threshold"]))
    bl = obj["bool"]
    _require(isinstance(bl, dict) and "attr" in bl, f"{where}: malformed 'bool' split")
    _require(isinstance(bl["attr"], int), f"{where}: split attr must be an integer")
    return BoolIsTrue(bl["attr"])


def _parse_nested_tree(obj: dict, where: str) -> Tree:
    nodes: list[Node] = []

    def build(o) -> int:
        _require(isinstance(o, dict), f"{where}: node must be an object")
        idx = len(nodes)
        nodes.append(Leaf(0.0))  # placeholder, preorder index reservation
        if "leaf" in o:
            v = o["leaf"]
            _require(isinstance(v, (int, float)) and not isinstance(v, bool),
                     f"{where}: leaf value must be a number")
            nodes[idx] = Leaf(float(v))
            return idx
        _require("lt" in o or "bool" in o, f"{where}: node needs 'leaf', 'lt' or 'bool'")
        _require("left" in o and "right" in o, f"{where}: internal node needs children")
        cond = _parse_cond(o, where)
        left = build(o["left"])
        right = build(o["right"])
        nodes[idx] = Internal(cond, left, right)
        return idx

    build(obj)
    return Tree(tuple(nodes))


def _parse_flat_tree(obj: dict, where: str) -> Tree:
    raw = obj["nodes"]
    _require(isinstance(raw, list) and raw, f"{where}: 'nodes' must be a non-empty array")
    nodes: list[Node] = []
    for ni, o in enumerate(raw):
        _require(isinstance(o, dict), f"{where}, node {ni}: must be an object")
        if "leaf" in o:
            v = o["leaf"]
            _require(isinstance(v, (int, float)) and not isinstance(v, bool),
                     f"{where}, node {ni}: leaf value must be a number")
            nodes.append(Leaf(float(v)))
        else:
            _require("lt" in o or "bool" in o,
                     f"{where}, node {ni}: node needs 'leaf', 'lt' or 'bool'")
            _require(isinstance(o.get("left"), int) and isinstance(o.get("right"), int),
                     f"{where}, node {ni}: flat nodes use integer child indices")
            nodes.append(Internal(_parse_cond(o, f"{where}, node {ni}"), o["left"], o["right"]))
    return Tree(tuple(nodes))


def load_ensemble(source: Union[str, bytes, IO]) -> Ensemble:
    """Load an ensemble from model JSON (text, bytes, or a readable stream)."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"model is not valid UTF-8: {exc}") from None
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed model JSON: {exc}") from None
    _require(isinstance(doc, dict), "model JSON must be an object")
    for key in ("num_attributes", "attr_types", "trees"):
        _require(key in doc, f"model JSON missing {key!r}")
    k = doc["num_attributes"]
    _require(isinstance(k, int) and k >= 0, "'num_attributes' must be a non-negative integer")
    types = doc["attr_types"]
    _require(isinstance(types, list) and len(types) == k,
             "'attr_types' must list one type per attribute")
    base = doc.get("base_score", 0.0)
    _require(isinstance(base, (int, float)) and not isinstance(base, bool),
             "'base_score' must be a number")
    _require(isinstance(doc["trees"], list) and doc["trees"], "'trees' must be a non-empty array")
    trees = []
    for ti, tobj in enumerate(doc["trees"]):
        where = f"tree {ti}"
        _require(isinstance(tobj, dict), f"{where}: must be an object")
        if "nodes" in tobj:
            trees.append(_parse_flat_tree(tobj, where))
        else:
            trees.append(_parse_nested_tree(tobj, where))
    e = Ensemble(tuple(trees), tuple(types), float(base))
    validate_ensemble(e)
    return e


def _node_to_json(tree: Tree, idx: int) -> dict:
    node = tree.nodes[idx]
    if isinstance(node, Leaf):
        return {"leaf": node.value}
    if isinstance(node.cond, LessThan):
        cond = {"lt": {"attr": node.cond.attr, "threshold": node.cond.threshold}}
    else:
        cond = {"bool": {"attr": node.cond.attr}}
    cond["left"] = _node_to_json(tree, node.left)
    cond["right"] = _node_to_json(tree, node.right)
    return cond


def ensemble_to_dict(e: Ensemble) -> dict:
    return {
        "num_attributes": e.num_attributes,
        "attr_types": list(e.attr_types),
        "base_score": e.base_score,
        "trees": [_node_to_json(t, 0) for t in e.trees],
    }


def save_ensemble(e: Ensemble) -> str:
    """Serialize to canonical model JSON; `load_ensemble` round-trips it."""
    return json.dumps(ensemble_to_dict(e), indent=1)


# ---------------------------------------------------------------------------
# XGBoost dump ingestion (`Booster.get_dump(dump_format="json")`)
# ---------------------------------------------------------------------------


def from_xgboost_dump(
    dump: Union[str, list],
    num_attributes: int | None = None,
    bool_attrs: Sequence[int] = (),
    base_score: float = 0.0,
) -> Ensemble:
    """Convert an XGBoost JSON dump (list of per-tree objects) to an Ensemble.

    Split features must be named ``f<k>`` or be plain integers. Splits on
    attributes listed in `bool_attrs` are converted to boolean splits; XGBoost
    puts the `< threshold` side left, so for an indicator feature the false
    branch is left and the children are swapped here. Missing-value default
    directions are ignored.
    """
    if isinstance(dump, (str, bytes)):
        try:
            dump = json.loads(dump)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed XGBoost dump: {exc}") from None
    if isinstance(dump, dict):
        dump = [dump]
    _require(isinstance(dump, list) and dump, "XGBoost dump must be a non-empty array of trees")
    bool_set = set(bool_attrs)

    def attr_of(split, where: str) -> int:
        if isinstance(split, int):
            return split
        if isinstance(split, str):
            name = split[1:] if split.startswith("f") else split
            if name.isdigit():
                return int(name)
        raise ParseError(f"{where}: cannot map feature {split!r} to an attribute index "
                         "(expected 'f<k>' or an integer)")

    max_attr = -1
    trees = []
    for ti, tobj in enumerate(dump):
        nodes: list[Node] = []

        def build(o, where: str) -> int:
            nonlocal max_attr
            _require(isinstance(o, dict), f"{where}: node must be an object")
            idx = len(nodes)
            nodes.append(Leaf(0.0))
            if "leaf" in o:
                nodes[idx] = Leaf(float(o["leaf"]))
                return idx
            for key in ("split", "split_condition", "children", "yes", "no"):
                _require(key in o, f"{where}: internal node missing {key!r}")
            attr = attr_of(o["split"], where)
            max_attr = max(max_attr, attr)
            by_id = {c.get("nodeid"): c for c in o["children"]}
            _require(o["yes"] in by_id and o["no"] in by_id,
                     f"{where}: 'yes'/'no' ids do not match children")
            yes = build(by_id[o["yes"]], f"{where}.yes")
            no = build(by_id[o["no"]], f"{where}.no")
            if attr in bool_set:
                thr = float(o["split_condition"])
                if not 0.0 < thr <= 1.0:
                    raise ParseError(f"{where}: split at {thr} on attribute {attr} "
                                     "cannot be interpreted as boolean")
                # yes means value < thr, i.e. the indicator is false
                nodes[idx] = Internal(BoolIsTrue(attr), no, yes)
            else:
                nodes[idx] = Internal(LessThan(attr, float(o["split_condition"])), yes, no)
            return idx

        build(tobj, f"tree {ti}")
        trees.append(Tree(tuple(nodes)))

    k = num_attributes if num_attributes is not None else max_attr + 1
    if k <= max_attr:
        raise ParseError(f"num_attributes={k} but the dump references attribute {max_attr}")
    types = tuple(BOOL if i in bool_set else REAL for i in range(k))
    e = Ensemble(tuple(trees), types, float(base_score))
    validate_ensemble(e)
    return e
