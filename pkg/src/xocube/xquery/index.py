"""Equality value index over a parsed document collection.

The index maps (node name, node kind, string value) to the document-order
list of matching nodes, and keeps the full per-(name, kind) node list as
well, so covered absolute descendant steps resolve without walking the
trees.  ``covers`` is the correctness gate: the evaluator may only
substitute an index lookup for a scan when the (name, kind) pair was
indexed, because absence from a partial index proves nothing.

The evaluator's predicate rewrite assumes the compared relative path
selects at most one node per candidate, which holds for every layout this
package emits.  On documents violating that, an unindexed value
comparison raises the singleton type error while the indexed rewrite
quietly filters; general comparisons are unaffected.

An index must be built over the same named-document mapping, in the same
order, that is passed to ``evaluate``.
"""

from __future__ import annotations

from typing import Iterable, Mapping

from ..xmltree import AttributeNode, ElementNode, XmlDocument, string_value

_EMPTY: list = []


class ValueIndex:
    __slots__ = ("targets", "_values", "_all", "walk_memo")

    def __init__(self, targets, values, all_nodes):
        self.targets = frozenset(targets)
        self._values = values
        self._all = all_nodes
        # (id(probe steps)) -> (steps, {id(hit): anchors}); the evaluator
        # caches upward-walk results here so repeated probes stay warm
        # across runs. Strong references keep the keyed objects alive.
        self.walk_memo: dict = {}

    def covers(self, name: str, kind: str) -> bool:
        return (name, kind) in self.targets

    def lookup(self, name: str, kind: str, value: str) -> list:
        """All covered nodes with this name, kind and string value, in
        document order. Only meaningful when covers(name, kind)."""
        return self._values.get((name, kind, value), _EMPTY)

    def all_nodes(self, name: str, kind: str) -> list:
        return self._all.get((name, kind), _EMPTY)

    def __repr__(self) -> str:
        return f"ValueIndex({len(self.targets)} targets, {len(self._values)} keys)"


def default_targets(docs: Mapping[str, XmlDocument]) -> list[tuple[str, str]]:
    """Every attribute name, plus every element name whose occurrences
    all lack element children (so their string values stay small)."""
    attr_names: set[str] = set()
    leafish: dict[str, bool] = {}
    for doc in docs.values():
        for node in doc.nodes:
            cls = node.__class__
            if cls is ElementNode:
                has_child_el = any(c.__class__ is ElementNode for c in node.children)
                leafish[node.name] = leafish.get(node.name, True) and not has_child_el
            elif cls is AttributeNode:
                attr_names.add(node.name)
    targets = [(n, "attribute") for n in sorted(attr_names)]
    targets += [(n, "element") for n in sorted(n for n, ok in leafish.items() if ok)]
    return targets


def build_index(
    docs: Mapping[str, XmlDocument],
    targets: Iterable[tuple[str, str]] | None = None,
) -> ValueIndex:
    """Index the listed (name, kind) targets, or ``default_targets`` when
    none are given."""
    tset = frozenset(targets if targets is not None else default_targets(docs))
    values: dict = {}
    all_nodes: dict = {}
    for doc in docs.values():
        for node in doc.nodes:
            cls = node.__class__
            if cls is ElementNode:
                key = (node.name, "element")
                if key in tset:
                    all_nodes.setdefault(key, []).append(node)
                    vkey = (node.name, "element", string_value(node))
                    values.setdefault(vkey, []).append(node)
            elif cls is AttributeNode:
                key = (node.name, "attribute")
                if key in tset:
                    all_nodes.setdefault(key, []).append(node)
                    vkey = (node.name, "attribute", node.value)
                    values.setdefault(vkey, []).append(node)
    return ValueIndex(tset, values, all_nodes)
