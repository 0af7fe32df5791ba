"""Multidimensional cube model: schema, members, facts, generator, oracle.

A cube has one fact type with numeric measures and a set of dimensions;
each dimension is a strict hierarchy (every member has exactly one parent
at the next coarser level).  Facts reference one leaf member per
dimension.  ``brute_force_group`` is the reference aggregation the whole
query pipeline is checked against: it rolls leaf references up through
parent links and sums a measure, independent of any XML representation.

Decimal measures are held as scaled integers (hundredths) so sums stay
exact; they only become ``decimal.Decimal`` at the reporting edge.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from decimal import Decimal

from .errors import XocubeError
from . import xmltree
from .xmltree import ElementNode, TextNode, XmlDocument


class CubeError(XocubeError):
    pass


class InvalidParam(CubeError):
    pass


class UnknownLevel(CubeError):
    pass


class UnknownMeasure(CubeError):
    pass


class MeasureKind(enum.Enum):
    INTEGER = "integer"
    DECIMAL = "decimal"


@dataclass(frozen=True)
class Measure:
    name: str
    kind: MeasureKind


@dataclass(frozen=True)
class DimensionSchema:
    """A named dimension with its level names ordered finest first."""

    name: str
    levels: tuple[str, ...]

    def level_depth(self, level: str) -> int:
        try:
            return self.levels.index(level)
        except ValueError:
            raise UnknownLevel(f"dimension {self.name!r} has no level {level!r}") from None

    @property
    def finest(self) -> str:
        return self.levels[0]

    @property
    def coarsest(self) -> str:
        return self.levels[-1]


@dataclass(frozen=True)
class CubeSchema:
    fact_name: str
    measures: tuple[Measure, ...]
    dimensions: tuple[DimensionSchema, ...]

    def __post_init__(self):
        names = [m.name for m in self.measures] + [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise InvalidParam("measure and dimension names must be unique")
        for d in self.dimensions:
            if len(set(d.levels)) != len(d.levels):
                raise InvalidParam(f"duplicate level name in dimension {d.name!r}")

    def dimension(self, name: str) -> DimensionSchema:
        for d in self.dimensions:
            if d.name == name:
                return d
        raise UnknownLevel(f"no dimension named {name!r}")

    def measure(self, name: str) -> Measure:
        for m in self.measures:
            if m.name == name:
                return m
        raise UnknownMeasure(f"no measure named {name!r}")


@dataclass(frozen=True)
class Member:
    """One member of a dimension hierarchy.  ``parent`` is the id of the
    member at the next coarser level, or None at the coarsest level."""

    id: str
    name: str
    level: str
    parent: str | None


@dataclass(frozen=True)
class FactRecord:
    """measure_values maps measure name to an int (decimal measures are in
    hundredths); leaf_refs maps dimension name to a leaf member id."""

    measure_values: dict[str, int]
    leaf_refs: dict[str, str]


@dataclass(frozen=True)
class CubeInstance:
    schema: CubeSchema
    members: dict[str, tuple[Member, ...]]
    facts: tuple[FactRecord, ...]

    def member_map(self, dimension: str) -> dict[str, Member]:
        return {m.id: m for m in self.members[dimension]}


@dataclass(frozen=True)
class GroupTable:
    """Aggregation result: one row per key tuple, keyed in request order.

    Row values are exact (int for integer measures, Decimal for decimal
    ones); equality is order-insensitive over rows.
    """

    key_levels: tuple[tuple[str, str], ...]
    rows: dict[tuple[str, ...], int | Decimal]


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


class SplitMix64:
    """splitmix64, a tiny 64-bit generator with a portable bit-exact stream.

    Bounded draws use ``next_u64() % n``; for the spans used here
    (at most 10**6) the modulo bias is far below 2**-40 and the stream is
    identical on every platform and Python build.
    """

    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self._state = seed & self.MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & self.MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform draw from [0, n)."""
        return self.next_u64() % n


def running_example_schema() -> CubeSchema:
    """The worked retail schema used throughout: order facts with price and
    quantity, customer and product dimensions of three levels each."""
    return CubeSchema(
        fact_name="order",
        measures=(
            Measure("price", MeasureKind.DECIMAL),
            Measure("quantity", MeasureKind.INTEGER),
        ),
        dimensions=(
            DimensionSchema("customer", ("customer", "country", "continent")),
            DimensionSchema("product", ("product", "category", "family")),
        ),
    )


def single_fact_example() -> CubeInstance:
    """A one-fact instance with the familiar worked values: Jim in BE/EU
    ordered 3 Tables (Kitchen/Furniture) for 125.67."""
    schema = running_example_schema()
    customer = (
        Member("con1", "EU", "continent", None),
        Member("cou7", "BE", "country", "con1"),
        Member("c42", "Jim", "customer", "cou7"),
    )
    product = (
        Member("fam1", "Furniture", "family", None),
        Member("cat77", "Kitchen", "category", "fam1"),
        Member("p98", "Table", "product", "cat77"),
    )
    fact = FactRecord(
        measure_values={"price": 12567, "quantity": 3},
        leaf_refs={"customer": "c42", "product": "p98"},
    )
    return CubeInstance(
        schema=schema,
        members={"customer": customer, "product": product},
        facts=(fact,),
    )


def generate(schema: CubeSchema, n_facts: int, fanout: int, seed: int) -> CubeInstance:
    """Deterministically generate an instance.

    Member trees are fanout-ary: the coarsest level has ``fanout`` members
    and every member has ``fanout`` children at the next finer level, so
    a three-level dimension holds fanout + fanout^2 + fanout^3 members.
    Ids are the first letter of the level name plus a global ordinal
    assigned in a canonical enumeration (dimensions in schema order,
    levels coarsest to finest, tree order); names are the level name plus
    the same ordinal, so names are unique per level.

    Facts draw one leaf per dimension uniformly, then one value per
    measure (integers in [1, 100], decimals in [0.01, 10000.00] held as
    hundredths), dimensions and measures in schema order.  Equal arguments
    give equal instances, bit for bit.
    """
    if fanout < 1:
        raise InvalidParam("fanout must be at least 1")
    if n_facts < 0:
        raise InvalidParam("n_facts must not be negative")

    ordinal = 0
    members: dict[str, tuple[Member, ...]] = {}
    leaves: dict[str, list[str]] = {}
    for dim in schema.dimensions:
        dim_members: list[Member] = []
        parents: list[str | None] = [None]
        level_ids: list[str] = []
        for level in reversed(dim.levels):  # coarsest first
            level_ids = []
            next_parents: list[str | None] = []
            for parent in parents:
                for _ in range(fanout):
                    mid = f"{level[0]}{ordinal}"
                    dim_members.append(Member(mid, f"{level}_{ordinal}", level, parent))
                    level_ids.append(mid)
                    next_parents.append(mid)
                    ordinal += 1
            parents = next_parents
        members[dim.name] = tuple(dim_members)
        leaves[dim.name] = level_ids

    rng = SplitMix64(seed)
    facts: list[FactRecord] = []
    for _ in range(n_facts):
        refs = {}
        for dim in schema.dimensions:
            pool = leaves[dim.name]
            refs[dim.name] = pool[rng.below(len(pool))]
        values = {}
        for measure in schema.measures:
            if measure.kind is MeasureKind.INTEGER:
                values[measure.name] = 1 + rng.below(100)
            else:
                values[measure.name] = 1 + rng.below(1_000_000)
        facts.append(FactRecord(values, refs))

    return CubeInstance(schema=schema, members=members, facts=tuple(facts))


def validate(instance: CubeInstance) -> list[Violation]:
    """Check referential and hierarchy integrity; one entry per violation."""
    out: list[Violation] = []
    schema = instance.schema
    for dim in schema.dimensions:
        dim_members = instance.members.get(dim.name, ())
        by_id: dict[str, Member] = {}
        for m in dim_members:
            if m.id in by_id:
                out.append(Violation("duplicate-id", f"{dim.name}:{m.id}"))
            by_id[m.id] = m
        for m in dim_members:
            if m.level not in dim.levels:
                out.append(Violation("unknown-level", f"{dim.name}:{m.id} at {m.level!r}"))
                continue
            depth = dim.level_depth(m.level)
            if m.level == dim.coarsest:
                if m.parent is not None:
                    out.append(Violation("unexpected-parent", f"{dim.name}:{m.id}"))
                continue
            if m.parent is None:
                out.append(Violation("missing-parent", f"{dim.name}:{m.id}"))
                continue
            parent = by_id.get(m.parent)
            if parent is None:
                out.append(Violation("dangling-parent", f"{dim.name}:{m.id} -> {m.parent}"))
            elif parent.level not in dim.levels or dim.level_depth(parent.level) != depth + 1:
                out.append(Violation(
                    "level-skip",
                    f"{dim.name}:{m.id} at {m.level!r} has parent at {parent.level!r}"))
    measure_names = {m.name for m in schema.measures}
    for i, fact in enumerate(instance.facts):
        for name in fact.measure_values:
            if name not in measure_names:
                out.append(Violation("unknown-measure", f"fact {i}: {name!r}"))
        for name in measure_names:
            if name not in fact.measure_values:
                out.append(Violation("missing-measure", f"fact {i}: {name!r}"))
        for dim in schema.dimensions:
            ref = fact.leaf_refs.get(dim.name)
            if ref is None:
                out.append(Violation("missing-ref", f"fact {i}: {dim.name}"))
                continue
            member = next((m for m in instance.members.get(dim.name, ()) if m.id == ref), None)
            if member is None:
                out.append(Violation("dangling-ref", f"fact {i}: {dim.name} -> {ref}"))
            elif member.level != dim.finest:
                out.append(Violation("non-leaf-ref", f"fact {i}: {dim.name} -> {ref}"))
    return out


def rollup_names(instance: CubeInstance, dimension: str) -> dict[str, dict[str, str]]:
    """Map each leaf member id to {level name: member name} along its
    parent chain.  The rollup table both the oracle and tests lean on."""
    by_id = instance.member_map(dimension)
    dim = instance.schema.dimension(dimension)
    table: dict[str, dict[str, str]] = {}
    for member in instance.members[dimension]:
        if member.level != dim.finest:
            continue
        chain: dict[str, str] = {}
        cur: Member | None = member
        while cur is not None:
            chain[cur.level] = cur.name
            cur = by_id.get(cur.parent) if cur.parent is not None else None
        table[member.id] = chain
    return table


def brute_force_group(
    instance: CubeInstance,
    key_levels,
    measure: str,
    aggregate: str = "sum",
) -> GroupTable:
    """Reference group-by: roll each fact up to the requested levels via
    parent links and sum the measure.  Groups no fact falls into do not
    appear.  Only SUM is supported."""
    if aggregate.lower() != "sum":
        raise InvalidParam(f"unsupported aggregate {aggregate!r}")
    schema = instance.schema
    kind = schema.measure(measure).kind
    key_levels = tuple((d, l) for d, l in key_levels)
    rollups = []
    for dim_name, level in key_levels:
        dim = schema.dimension(dim_name)
        dim.level_depth(level)  # raises UnknownLevel
        rollups.append((dim_name, level, rollup_names(instance, dim_name)))

    sums: dict[tuple[str, ...], int] = {}
    for fact in instance.facts:
        key = tuple(
            table[fact.leaf_refs[dim_name]][level]
            for dim_name, level, table in rollups
        )
        sums[key] = sums.get(key, 0) + fact.measure_values[measure]

    if kind is MeasureKind.DECIMAL:
        rows = {k: Decimal(v) / 100 for k, v in sums.items()}
    else:
        rows = dict(sums)
    return GroupTable(key_levels=key_levels, rows=rows)


def export_debug_document(instance: CubeInstance) -> XmlDocument:
    """Flat canonical listing of an instance for eyeballing; no decoder
    reads this, the benchmark consumes the four layout encoders."""
    schema = instance.schema
    root = ElementNode("cube", attributes=[("fact", schema.fact_name)])
    measures = ElementNode("measures")
    for m in schema.measures:
        measures.children.append(
            ElementNode("measure", attributes=[("name", m.name), ("kind", m.kind.value)]))
    root.children.append(measures)
    for dim in schema.dimensions:
        dim_el = ElementNode("dimension", attributes=[
            ("name", dim.name), ("levels", ",".join(dim.levels))])
        for member in instance.members[dim.name]:
            attrs = [("id", member.id), ("name", member.name), ("level", member.level)]
            if member.parent is not None:
                attrs.append(("parent", member.parent))
            dim_el.children.append(ElementNode("member", attributes=attrs))
        root.children.append(dim_el)
    facts = ElementNode("facts")
    for fact in instance.facts:
        fe = ElementNode("fact")
        for m in schema.measures:
            fe.children.append(ElementNode(
                m.name, children=[TextNode(format_measure(fact.measure_values[m.name], m.kind))]))
        for dim in schema.dimensions:
            fe.children.append(ElementNode(
                "ref", attributes=[("dimension", dim.name), ("member", fact.leaf_refs[dim.name])]))
        facts.children.append(fe)
    root.children.append(facts)
    return XmlDocument.from_root(root)


def format_measure(value: int, kind: MeasureKind) -> str:
    """Render a stored measure value: integers verbatim, decimals with two
    places ("125.67")."""
    if kind is MeasureKind.INTEGER:
        return str(value)
    return f"{value // 100}.{value % 100:02d}"


def parse_measure(text: str, kind: MeasureKind) -> int:
    """Parse a measure back to its stored integer.  Decimal values accept
    either a dot or a comma separator ("125.67" and "125,67" agree)."""
    text = text.strip()
    if kind is MeasureKind.INTEGER:
        return int(text)
    normalized = text.replace(",", ".")
    if "." in normalized:
        whole, frac = normalized.split(".", 1)
        if not 1 <= len(frac) <= 2 or not frac.isdigit():
            raise InvalidParam(f"bad decimal measure value {text!r}")
        return int(whole) * 100 + int(frac.ljust(2, "0"))
    return int(normalized) * 100
