"""The four XML layouts of a cube and their codecs.

flat          one denormalized fact element per fact; every dimension is a
              wrapper holding one element per level (finest first) whose
              text is the member name at that level.
flat-nested   like flat, but each dimension is a nested chain embedded in
              the fact, finest level outermost, member names in ``name``
              attributes.
hier          facts carry one ``<dim ref="...">`` per dimension; a second
              document holds each dimension tree once, coarsest level
              outermost, with ids on leaf elements only.
xcube         facts are ``<cell>`` elements pairing dimension/node id
              references with a nested fact element; a second document
              lists members per level with explicit rollUp links.

Every encoder consumes the canonical ``CubeInstance`` and every decoder
rebuilds one.  Decoding is exact for hier and xcube on canonically id'd
instances (hier leaves ids of non-leaf members out of the document, so
they are re-minted with the generator's enumeration).  The flat layouts
identify members only by name path, so their round trip is compared with
``fact_name_paths``.  Schema inference needs at least one fact for the
flat layouts; empty documents decode to a degenerate empty instance.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .cube import (
    CubeInstance,
    CubeSchema,
    DimensionSchema,
    FactRecord,
    Measure,
    MeasureKind,
    Member,
    format_measure,
    parse_measure,
    rollup_names,
)
from .errors import XocubeError
from .xmltree import (
    ElementNode,
    TextNode,
    XmlDocument,
    read_document,
    string_value,
    write_document,
)


class LayoutError(XocubeError):
    """A document does not match the layout a decoder expects; the message
    names the offending node."""


class ModelKind(enum.Enum):
    FLAT = "flat"
    FLAT_NESTED = "flat-nested"
    HIERARCHICAL = "hier"
    XCUBE = "xcube"


MODEL_FILES: dict[ModelKind, tuple[str, ...]] = {
    ModelKind.FLAT: ("flat.xml",),
    ModelKind.FLAT_NESTED: ("flat_nested.xml",),
    ModelKind.HIERARCHICAL: ("hier_facts.xml", "hier_dims.xml"),
    ModelKind.XCUBE: ("xcube_facts.xml", "xcube_dims.xml"),
}


@dataclass(frozen=True)
class EncodedDataset:
    model: ModelKind
    facts_doc: XmlDocument
    dims_doc: XmlDocument | None = None

    def documents(self) -> dict[str, XmlDocument]:
        """Named document set for the evaluator, facts first."""
        names = [Path(f).stem for f in MODEL_FILES[self.model]]
        docs = {names[0]: self.facts_doc}
        if self.dims_doc is not None:
            docs[names[1]] = self.dims_doc
        return docs


def plural(dimension: str) -> str:
    """Dimension ids in the xcube fact document are pluralized by
    appending "s" (customer -> customers)."""
    return dimension + "s"


def _text_el(name: str, text: str) -> ElementNode:
    return ElementNode(name, children=[TextNode(text)])


def _measure_elements(schema: CubeSchema, fact: FactRecord) -> list[ElementNode]:
    return [
        _text_el(m.name, format_measure(fact.measure_values[m.name], m.kind))
        for m in schema.measures
    ]


# --- encoders --------------------------------------------------------------


def encode_flat(instance: CubeInstance) -> EncodedDataset:
    schema = instance.schema
    rollups = {d.name: rollup_names(instance, d.name) for d in schema.dimensions}
    root = ElementNode(schema.fact_name + "s")
    for fact in instance.facts:
        fe = ElementNode(schema.fact_name, children=_measure_elements(schema, fact))
        for dim in schema.dimensions:
            chain = rollups[dim.name][fact.leaf_refs[dim.name]]
            wrapper = ElementNode(dim.name + "_dimension")
            for level in dim.levels:
                wrapper.children.append(_text_el(level, chain[level]))
            fe.children.append(wrapper)
        root.children.append(fe)
    return EncodedDataset(ModelKind.FLAT, XmlDocument.from_root(root))


def encode_flat_nested(instance: CubeInstance) -> EncodedDataset:
    schema = instance.schema
    rollups = {d.name: rollup_names(instance, d.name) for d in schema.dimensions}
    root = ElementNode(schema.fact_name + "s")
    for fact in instance.facts:
        fe = ElementNode(schema.fact_name, children=_measure_elements(schema, fact))
        for dim in schema.dimensions:
            chain = rollups[dim.name][fact.leaf_refs[dim.name]]
            node: ElementNode | None = None
            for level in reversed(dim.levels):  # build from the coarsest in
                outer = ElementNode(level, attributes=[("name", chain[level])])
                if node is not None:
                    outer.children.append(node)
                node = outer
            fe.children.append(node)
        root.children.append(fe)
    return EncodedDataset(ModelKind.FLAT_NESTED, XmlDocument.from_root(root))


def encode_hierarchical(instance: CubeInstance) -> EncodedDataset:
    schema = instance.schema
    facts_root = ElementNode(schema.fact_name + "s")
    for fact in instance.facts:
        fe = ElementNode(schema.fact_name, children=_measure_elements(schema, fact))
        for dim in schema.dimensions:
            fe.children.append(
                ElementNode(dim.name, attributes=[("ref", fact.leaf_refs[dim.name])]))
        facts_root.children.append(fe)

    dims_root = ElementNode("dimensions")
    for dim in schema.dimensions:
        elements: dict[str, ElementNode] = {}
        for member in instance.members[dim.name]:
            attrs = [("name", member.name)]
            if member.level == dim.finest:
                attrs.append(("id", member.id))
            el = ElementNode(member.level, attributes=attrs)
            elements[member.id] = el
            if member.parent is None:
                dims_root.children.append(el)
            else:
                elements[member.parent].children.append(el)
    return EncodedDataset(
        ModelKind.HIERARCHICAL,
        XmlDocument.from_root(facts_root),
        XmlDocument.from_root(dims_root),
    )


def encode_xcube(instance: CubeInstance) -> EncodedDataset:
    schema = instance.schema
    # cells do not mention the fact type, so the invented root records it
    facts_root = ElementNode("cube", attributes=[("fact", schema.fact_name)])
    for fact in instance.facts:
        cell = ElementNode("cell")
        for dim in schema.dimensions:
            cell.children.append(ElementNode("dimension", attributes=[
                ("id", plural(dim.name)), ("node", fact.leaf_refs[dim.name])]))
        cell.children.append(ElementNode("fact", children=_measure_elements(schema, fact)))
        facts_root.children.append(cell)

    dims_root = ElementNode("dimensions")
    for dim in schema.dimensions:
        by_id = instance.member_map(dim.name)
        for level in reversed(dim.levels):  # coarsest level listed first
            level_el = ElementNode("level", attributes=[("id", level)])
            for member in instance.members[dim.name]:
                if member.level != level:
                    continue
                node = ElementNode("node", attributes=[
                    ("id", member.id), ("name", member.name)])
                if member.parent is not None:
                    node.children.append(ElementNode("rollUp", attributes=[
                        ("toNode", member.parent),
                        ("level", by_id[member.parent].level)]))
                level_el.children.append(node)
            dims_root.children.append(level_el)
    return EncodedDataset(
        ModelKind.XCUBE,
        XmlDocument.from_root(facts_root),
        XmlDocument.from_root(dims_root),
    )


def encode(instance: CubeInstance, model: ModelKind) -> EncodedDataset:
    return _ENCODERS[model](instance)


_ENCODERS = {
    ModelKind.FLAT: encode_flat,
    ModelKind.FLAT_NESTED: encode_flat_nested,
    ModelKind.HIERARCHICAL: encode_hierarchical,
    ModelKind.XCUBE: encode_xcube,
}


# --- decoders --------------------------------------------------------------


def _empty_instance(fact_name: str) -> CubeInstance:
    schema = CubeSchema(fact_name=fact_name, measures=(), dimensions=())
    return CubeInstance(schema=schema, members={}, facts=())


def _fact_name_from_root(root: ElementNode) -> str:
    name = root.name
    return name[:-1] if name.endswith("s") and len(name) > 1 else name


def _infer_measure(el: ElementNode) -> Measure:
    text = string_value(el)
    kind = MeasureKind.DECIMAL if ("." in text or "," in text) else MeasureKind.INTEGER
    return Measure(el.name, kind)


def _parse_fact_measures(schema: CubeSchema, els: list[ElementNode]) -> dict[str, int]:
    if [e.name for e in els] != [m.name for m in schema.measures]:
        raise LayoutError(
            f"fact measures {[e.name for e in els]} do not match the first fact")
    return {
        m.name: parse_measure(string_value(e), m.kind)
        for m, e in zip(schema.measures, els)
    }


class _PathMembers:
    """Accumulates members keyed by name path for the flat layouts, then
    mints canonical ids level by level."""

    def __init__(self, levels: tuple[str, ...]):
        self.levels = levels  # finest first
        # per level depth: chain tuple (names from this level up) -> None,
        # insertion ordered
        self.seen: list[dict[tuple[str, ...], None]] = [dict() for _ in levels]

    def add_path(self, names_finest_first: tuple[str, ...]) -> None:
        for depth in range(len(self.levels)):
            self.seen[depth].setdefault(names_finest_first[depth:], None)

    def build(self, next_ordinal: int) -> tuple[tuple[Member, ...], dict[tuple[str, ...], str], int]:
        ids: dict[tuple[str, ...], str] = {}
        members: list[Member] = []
        for depth in reversed(range(len(self.levels))):  # coarsest first
            level = self.levels[depth]
            for chain in self.seen[depth]:
                mid = f"{level[0]}{next_ordinal}"
                ids[chain] = mid
                members.append(Member(
                    mid, chain[0], level,
                    ids[chain[1:]] if depth + 1 < len(self.levels) else None))
                next_ordinal += 1
        return tuple(members), ids, next_ordinal


def _decode_flat_common(dataset: EncodedDataset, nested: bool) -> CubeInstance:
    root = dataset.facts_doc.root
    facts_els = list(root.child_elements())
    if not facts_els:
        return _empty_instance(_fact_name_from_root(root))
    fact_name = facts_els[0].name

    # schema inference from the first fact
    first = facts_els[0]
    measure_els: list[ElementNode] = []
    dims: list[DimensionSchema] = []
    for child in first.child_elements():
        if nested:
            is_dim = child.attribute("name") is not None
        else:
            is_dim = child.name.endswith("_dimension")
        if is_dim:
            if nested:
                levels = []
                el: ElementNode | None = child
                while el is not None:
                    levels.append(el.name)
                    nxt = list(el.child_elements())
                    if len(nxt) > 1:
                        raise LayoutError(f"branching chain under <{child.name}>")
                    el = nxt[0] if nxt else None
                dims.append(DimensionSchema(child.name, tuple(levels)))
            else:
                levels = [e.name for e in child.child_elements()]
                dims.append(DimensionSchema(child.name[:-len("_dimension")], tuple(levels)))
        elif dims:
            raise LayoutError(f"measure <{child.name}> after a dimension in the first fact")
        else:
            measure_els.append(child)
    schema = CubeSchema(
        fact_name=fact_name,
        measures=tuple(_infer_measure(e) for e in measure_els),
        dimensions=tuple(dims),
    )

    paths = {d.name: _PathMembers(d.levels) for d in dims}
    raw_facts: list[tuple[dict[str, int], dict[str, tuple[str, ...]]]] = []
    n_measures = len(schema.measures)
    for fe in facts_els:
        children = list(fe.child_elements())
        values = _parse_fact_measures(schema, children[:n_measures])
        fact_paths: dict[str, tuple[str, ...]] = {}
        for dim, wrapper in zip(dims, children[n_measures:]):
            if nested:
                names = []
                el: ElementNode | None = wrapper
                while el is not None:
                    name = el.get("name")
                    if name is None:
                        raise LayoutError(f"<{el.name}> without a name attribute")
                    names.append(name)
                    nxt = list(el.child_elements())
                    el = nxt[0] if nxt else None
            else:
                names = [string_value(e) for e in wrapper.child_elements()]
            if len(names) != len(dim.levels):
                raise LayoutError(f"fact path depth mismatch under <{wrapper.name}>")
            path = tuple(names)
            paths[dim.name].add_path(path)
            fact_paths[dim.name] = path
        raw_facts.append((values, fact_paths))

    members: dict[str, tuple[Member, ...]] = {}
    leaf_ids: dict[str, dict[tuple[str, ...], str]] = {}
    ordinal = 0
    for dim in dims:
        members[dim.name], leaf_ids[dim.name], ordinal = paths[dim.name].build(ordinal)
    facts = tuple(
        FactRecord(values, {d: leaf_ids[d][p] for d, p in fact_paths.items()})
        for values, fact_paths in raw_facts
    )
    return CubeInstance(schema=schema, members=members, facts=facts)


def decode_flat(dataset: EncodedDataset) -> CubeInstance:
    return _decode_flat_common(dataset, nested=False)


def decode_flat_nested(dataset: EncodedDataset) -> CubeInstance:
    return _decode_flat_common(dataset, nested=True)


def decode_hierarchical(dataset: EncodedDataset) -> CubeInstance:
    if dataset.dims_doc is None:
        raise LayoutError("hier dataset requires a dimension document")
    facts_root = dataset.facts_doc.root
    facts_els = list(facts_root.child_elements())

    # bucket the dimension trees by their root element (= coarsest level) name
    buckets: dict[str, list[ElementNode]] = {}
    for tree in dataset.dims_doc.root.child_elements():
        buckets.setdefault(tree.name, []).append(tree)

    # per bucket: per-level member element lists, coarsest first
    bucket_levels: dict[str, list[str]] = {}
    bucket_rows: dict[str, list[list[ElementNode]]] = {}
    leaf_owner: dict[str, str] = {}
    for root_level, trees in buckets.items():
        rows: list[list[ElementNode]] = [list(trees)]
        levels = [root_level]
        while True:
            nxt = [c for el in rows[-1] for c in el.child_elements()]
            if not nxt:
                break
            names = {e.name for e in nxt}
            if len(names) != 1:
                raise LayoutError(
                    f"mixed level names {sorted(names)} under <{root_level}>")
            levels.append(nxt[0].name)
            rows.append(nxt)
        bucket_levels[root_level] = levels
        bucket_rows[root_level] = rows
        for leaf in rows[-1]:
            mid = leaf.get("id")
            if mid is None:
                raise LayoutError(f"leaf <{leaf.name}> without an id attribute")
            leaf_owner[mid] = root_level

    # dimension names and order come from the facts when there are any
    dim_specs: list[tuple[str, str]] = []  # (dimension name, bucket key)
    measure_els: list[ElementNode] = []
    if facts_els:
        for child in facts_els[0].child_elements():
            ref = child.get("ref")
            if ref is None:
                measure_els.append(child)
            else:
                bucket = leaf_owner.get(ref)
                if bucket is None:
                    raise LayoutError(f"fact ref {ref!r} matches no leaf member")
                dim_specs.append((child.name, bucket))
    else:
        dim_specs = [(bucket_levels[b][-1], b) for b in buckets]

    schema = CubeSchema(
        fact_name=facts_els[0].name if facts_els else _fact_name_from_root(facts_root),
        measures=tuple(_infer_measure(e) for e in measure_els),
        dimensions=tuple(
            DimensionSchema(name, tuple(reversed(bucket_levels[bucket])))
            for name, bucket in dim_specs
        ),
    )

    members: dict[str, tuple[Member, ...]] = {}
    ordinal = 0
    for dim_name, bucket in dim_specs:
        levels = bucket_levels[bucket]
        rows = bucket_rows[bucket]
        out: list[Member] = []
        el_ids: dict[int, str] = {}
        for depth, level in enumerate(levels):
            last = depth == len(levels) - 1
            for el in rows[depth]:
                mid = el.get("id")
                if mid is None:
                    if last:
                        raise LayoutError(f"leaf <{el.name}> without an id attribute")
                    mid = f"{level[0]}{ordinal}"
                el_ids[id(el)] = mid
                parent = el_ids[id(el.parent)] if depth else None
                name = el.get("name")
                if name is None:
                    raise LayoutError(f"<{el.name}> without a name attribute")
                out.append(Member(mid, name, level, parent))
                ordinal += 1
        members[dim_name] = tuple(out)

    n_measures = len(schema.measures)
    facts = []
    for fe in facts_els:
        children = list(fe.child_elements())
        values = _parse_fact_measures(schema, children[:n_measures])
        refs = {}
        for child in children[n_measures:]:
            ref = child.get("ref")
            if ref is None:
                raise LayoutError(f"expected a ref element, got <{child.name}>")
            refs[child.name] = ref
        facts.append(FactRecord(values, refs))
    return CubeInstance(schema=schema, members=members, facts=tuple(facts))


def decode_xcube(dataset: EncodedDataset) -> CubeInstance:
    if dataset.dims_doc is None:
        raise LayoutError("xcube dataset requires a dimension document")
    cells = list(dataset.facts_doc.root.child_elements("cell"))

    # gather levels and their rollUp targets
    level_nodes: dict[str, list[tuple[str, str, str | None]]] = {}
    parent_level: dict[str, str | None] = {}
    for level_el in dataset.dims_doc.root.child_elements("level"):
        level = level_el.get("id")
        if level is None:
            raise LayoutError("<level> without an id attribute")
        rows = []
        target: str | None = None
        for node in level_el.child_elements("node"):
            nid, name = node.get("id"), node.get("name")
            if nid is None or name is None:
                raise LayoutError(f"<node> in level {level!r} missing id or name")
            roll = node.first_child("rollUp")
            parent = None
            if roll is not None:
                parent = roll.get("toNode")
                roll_level = roll.get("level")
                if target is None:
                    target = roll_level
                elif target != roll_level:
                    raise LayoutError(f"level {level!r} rolls up to mixed levels")
            rows.append((nid, name, parent))
        level_nodes[level] = rows
        parent_level[level] = target

    # chains: follow parent links from each coarsest level down
    child_of: dict[str, str] = {}
    for level, parent in parent_level.items():
        if parent is not None:
            if parent in child_of:
                raise LayoutError(f"level {parent!r} has two finer levels")
            child_of[parent] = level
    chains: list[list[str]] = []  # coarsest first
    for level in level_nodes:
        if parent_level[level] is None:
            chain = [level]
            while chain[-1] in child_of:
                chain.append(child_of[chain[-1]])
            chains.append(chain)
    covered = {l for c in chains for l in c}
    if covered != set(level_nodes):
        raise LayoutError("rollUp links do not partition the levels into chains")

    leaf_chain: dict[str, int] = {}
    for i, chain in enumerate(chains):
        for nid, _, _ in level_nodes[chain[-1]]:
            leaf_chain[nid] = i

    # dimension names and order from the first cell, else finest level names
    dim_specs: list[tuple[str, int]] = []
    measure_els: list[ElementNode] = []
    if cells:
        for child in cells[0].child_elements("dimension"):
            node_ref = child.get("node")
            dim_id = child.get("id")
            if node_ref is None or dim_id is None:
                raise LayoutError("<dimension> in a cell missing id or node")
            chain_idx = leaf_chain.get(node_ref)
            if chain_idx is None:
                raise LayoutError(f"cell node {node_ref!r} matches no leaf member")
            name = dim_id[:-1] if dim_id.endswith("s") and len(dim_id) > 1 else dim_id
            dim_specs.append((name, chain_idx))
        fact_el = cells[0].first_child("fact")
        if fact_el is None:
            raise LayoutError("<cell> without a fact element")
        measure_els = list(fact_el.child_elements())
    else:
        dim_specs = [(chain[-1], i) for i, chain in enumerate(chains)]

    schema = CubeSchema(
        fact_name=dataset.facts_doc.root.get("fact", "fact"),
        measures=tuple(_infer_measure(e) for e in measure_els),
        dimensions=tuple(
            DimensionSchema(name, tuple(reversed(chains[i])))
            for name, i in dim_specs
        ),
    )

    members = {
        name: tuple(
            Member(nid, mname, level, parent)
            for level in chains[i]
            for nid, mname, parent in level_nodes[level]
        )
        for name, i in dim_specs
    }

    facts = []
    for cell in cells:
        refs = {}
        for child in cell.child_elements("dimension"):
            dim_id = child.get("id", "")
            name = dim_id[:-1] if dim_id.endswith("s") and len(dim_id) > 1 else dim_id
            refs[name] = child.get("node")
        fact_el = cell.first_child("fact")
        if fact_el is None:
            raise LayoutError("<cell> without a fact element")
        values = _parse_fact_measures(schema, list(fact_el.child_elements()))
        facts.append(FactRecord(values, refs))
    return CubeInstance(schema=schema, members=members, facts=tuple(facts))


def decode(dataset: EncodedDataset) -> CubeInstance:
    return _DECODERS[dataset.model](dataset)


_DECODERS = {
    ModelKind.FLAT: decode_flat,
    ModelKind.FLAT_NESTED: decode_flat_nested,
    ModelKind.HIERARCHICAL: decode_hierarchical,
    ModelKind.XCUBE: decode_xcube,
}


def fact_name_paths(instance: CubeInstance) -> Counter:
    """Multiset of facts keyed by dimension name paths plus measures.

    This is the equivalence the flat layouts preserve: they identify a
    member only by its chain of names, not by id, and they drop members no
    fact references.
    """
    rollups = {
        d.name: rollup_names(instance, d.name) for d in instance.schema.dimensions
    }
    out: Counter = Counter()
    for fact in instance.facts:
        key_dims = tuple(
            tuple(rollups[d.name][fact.leaf_refs[d.name]][lvl] for lvl in d.levels)
            for d in instance.schema.dimensions
        )
        key_measures = tuple(
            (m.name, fact.measure_values[m.name]) for m in instance.schema.measures
        )
        out[(key_dims, key_measures)] += 1
    return out


# --- dataset directories ---------------------------------------------------


def write_dataset(dirpath, instance: CubeInstance) -> None:
    """Encode an instance in all four layouts under one directory."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    for model, files in MODEL_FILES.items():
        dataset = encode(instance, model)
        docs = [dataset.facts_doc] + ([dataset.dims_doc] if dataset.dims_doc else [])
        for fname, doc in zip(files, docs):
            write_document(doc, dirpath / fname, pretty=True)


def load_model_documents(dirpath, model: ModelKind) -> dict[str, XmlDocument]:
    """Read one model's documents from a dataset directory, facts first."""
    dirpath = Path(dirpath)
    docs: dict[str, XmlDocument] = {}
    for fname in MODEL_FILES[model]:
        path = dirpath / fname
        if not path.is_file():
            raise LayoutError(f"missing dataset file {path}")
        docs[Path(fname).stem] = read_document(path)
    return docs


def load_dataset(dirpath, model: ModelKind) -> EncodedDataset:
    docs = list(load_model_documents(dirpath, model).values())
    return EncodedDataset(model, docs[0], docs[1] if len(docs) > 1 else None)
