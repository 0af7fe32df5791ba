"""Layout encoders and decoders: exact shapes, round trips, redundancy."""

from __future__ import annotations

import pytest

from xocube.cube import generate, running_example_schema, single_fact_example
from xocube.encoders import (
    MODEL_FILES,
    EncodedDataset,
    LayoutError,
    ModelKind,
    decode,
    encode,
    fact_name_paths,
    load_dataset,
    load_model_documents,
    plural,
    write_dataset,
)
from xocube.xmltree import parse_document, serialize, trees_equal

ALL_MODELS = list(ModelKind)


def _doc(text: str):
    return parse_document(text)


# --- exact single-fact shapes ----------------------------------------------


FLAT_SINGLE = b"""\
<?xml version="1.0" encoding="UTF-8"?>
<orders>
  <order>
    <price>125.67</price>
    <quantity>3</quantity>
    <customer_dimension>
      <customer>Jim</customer>
      <country>BE</country>
      <continent>EU</continent>
    </customer_dimension>
    <product_dimension>
      <product>Table</product>
      <category>Kitchen</category>
      <family>Furniture</family>
    </product_dimension>
  </order>
</orders>
"""

FLAT_NESTED_SINGLE = b"""\
<?xml version="1.0" encoding="UTF-8"?>
<orders>
  <order>
    <price>125.67</price>
    <quantity>3</quantity>
    <customer name="Jim">
      <country name="BE">
        <continent name="EU"/>
      </country>
    </customer>
    <product name="Table">
      <category name="Kitchen">
        <family name="Furniture"/>
      </category>
    </product>
  </order>
</orders>
"""

HIER_FACTS_SINGLE = b"""\
<?xml version="1.0" encoding="UTF-8"?>
<orders>
  <order>
    <price>125.67</price>
    <quantity>3</quantity>
    <customer ref="c42"/>
    <product ref="p98"/>
  </order>
</orders>
"""

HIER_DIMS_SINGLE = b"""\
<?xml version="1.0" encoding="UTF-8"?>
<dimensions>
  <continent name="EU">
    <country name="BE">
      <customer name="Jim" id="c42"/>
    </country>
  </continent>
  <family name="Furniture">
    <category name="Kitchen">
      <product name="Table" id="p98"/>
    </category>
  </family>
</dimensions>
"""

XCUBE_FACTS_SINGLE = b"""\
<?xml version="1.0" encoding="UTF-8"?>
<cube fact="order">
  <cell>
    <dimension id="customers" node="c42"/>
    <dimension id="products" node="p98"/>
    <fact>
      <price>125.67</price>
      <quantity>3</quantity>
    </fact>
  </cell>
</cube>
"""

XCUBE_DIMS_SINGLE = b"""\
<?xml version="1.0" encoding="UTF-8"?>
<dimensions>
  <level id="continent">
    <node id="con1" name="EU"/>
  </level>
  <level id="country">
    <node id="cou7" name="BE">
      <rollUp toNode="con1" level="continent"/>
    </node>
  </level>
  <level id="customer">
    <node id="c42" name="Jim">
      <rollUp toNode="cou7" level="country"/>
    </node>
  </level>
  <level id="family">
    <node id="fam1" name="Furniture"/>
  </level>
  <level id="category">
    <node id="cat77" name="Kitchen">
      <rollUp toNode="fam1" level="family"/>
    </node>
  </level>
  <level id="product">
    <node id="p98" name="Table">
      <rollUp toNode="cat77" level="category"/>
    </node>
  </level>
</dimensions>
"""


def test_flat_single_fact_exact():
    ds = encode(single_fact_example(), ModelKind.FLAT)
    assert serialize(ds.facts_doc, pretty=True) == FLAT_SINGLE
    assert ds.dims_doc is None


def test_flat_nested_single_fact_exact():
    ds = encode(single_fact_example(), ModelKind.FLAT_NESTED)
    assert serialize(ds.facts_doc, pretty=True) == FLAT_NESTED_SINGLE


def test_hierarchical_single_fact_exact():
    ds = encode(single_fact_example(), ModelKind.HIERARCHICAL)
    assert serialize(ds.facts_doc, pretty=True) == HIER_FACTS_SINGLE
    assert serialize(ds.dims_doc, pretty=True) == HIER_DIMS_SINGLE


def test_xcube_single_fact_exact():
    ds = encode(single_fact_example(), ModelKind.XCUBE)
    assert serialize(ds.facts_doc, pretty=True) == XCUBE_FACTS_SINGLE
    assert serialize(ds.dims_doc, pretty=True) == XCUBE_DIMS_SINGLE


def test_plural():
    assert plural("customer") == "customers"
    assert plural("product") == "products"


def test_documents_naming():
    inst = single_fact_example()
    assert list(encode(inst, ModelKind.FLAT).documents()) == ["flat"]
    assert list(encode(inst, ModelKind.HIERARCHICAL).documents()) == [
        "hier_facts", "hier_dims"]
    assert list(encode(inst, ModelKind.XCUBE).documents()) == [
        "xcube_facts", "xcube_dims"]


# --- round trips ------------------------------------------------------------


@pytest.fixture(scope="module")
def generated_1k():
    return generate(running_example_schema(), 1_000, 5, seed=42)


@pytest.mark.parametrize("model", [ModelKind.HIERARCHICAL, ModelKind.XCUBE])
def test_exact_round_trip_generated(generated_1k, model):
    assert decode(encode(generated_1k, model)) == generated_1k


def test_xcube_round_trip_single_fact_exact():
    inst = single_fact_example()
    assert decode(encode(inst, ModelKind.XCUBE)) == inst


def test_hier_round_trip_single_fact_resolves_refs():
    # the dims document only carries ids on leaves, so decoding re-mints
    # non-leaf ids; everything observable through facts is preserved
    inst = single_fact_example()
    back = decode(encode(inst, ModelKind.HIERARCHICAL))
    assert back.schema == inst.schema
    assert back.facts == inst.facts
    assert fact_name_paths(back) == fact_name_paths(inst)
    assert back != inst


@pytest.mark.parametrize("model", [ModelKind.FLAT, ModelKind.FLAT_NESTED])
def test_flat_round_trip_preserves_fact_paths(generated_1k, model):
    back = decode(encode(generated_1k, model))
    assert back.schema == generated_1k.schema
    assert fact_name_paths(back) == fact_name_paths(generated_1k)
    # a second pass through the codec is the identity: decoded instances
    # carry canonical ids already
    assert decode(encode(back, model)) == back


def test_flat_decode_drops_unreferenced_members():
    inst = generate(running_example_schema(), 3, 5, seed=1)
    back = decode(encode(inst, ModelKind.FLAT))
    total = sum(len(m) for m in back.members.values())
    assert total < sum(len(m) for m in inst.members.values())


@pytest.mark.parametrize("model", ALL_MODELS)
def test_serialized_round_trip(generated_1k, model):
    """parse(serialize(doc)) preserves every document of every layout."""
    ds = encode(generated_1k, model)
    for doc in ds.documents().values():
        again = parse_document(serialize(doc, pretty=True))
        assert trees_equal(doc.root, again.root)


# --- redundancy structure ---------------------------------------------------


def test_dims_docs_independent_of_fact_count():
    small = generate(running_example_schema(), 100, 5, seed=42)
    large = generate(running_example_schema(), 2_000, 5, seed=42)
    for model in (ModelKind.HIERARCHICAL, ModelKind.XCUBE):
        a = encode(small, model).dims_doc
        b = encode(large, model).dims_doc
        assert trees_equal(a.root, b.root)


def test_hier_dims_store_each_member_once():
    inst = generate(running_example_schema(), 500, 5, seed=42)
    dims = encode(inst, ModelKind.HIERARCHICAL).dims_doc
    name_attrs = sum(
        1 for el in dims.root.iter_descendants() if el.get("name") is not None)
    assert name_attrs == sum(len(m) for m in inst.members.values())


def test_flat_repeats_every_level_per_fact():
    inst = generate(running_example_schema(), 500, 5, seed=42)
    flat = encode(inst, ModelKind.FLAT).facts_doc
    countries = sum(1 for _ in flat.root.iter_descendants("country"))
    assert countries == 500
    leaf_names = {
        el.name for el in flat.root.iter_descendants()
        if el.name.endswith("_dimension")
    }
    assert leaf_names == {"customer_dimension", "product_dimension"}


# --- decoding hand-written documents ----------------------------------------


def test_decode_empty_roots():
    flat = EncodedDataset(ModelKind.FLAT, _doc("<orders/>"))
    inst = decode(flat)
    assert inst.schema.fact_name == "order"
    assert inst.facts == ()
    assert inst.members == {}


def test_decode_flat_accepts_comma_decimals():
    text = """
    <orders>
      <order>
        <price>125,67</price>
        <customer_dimension><customer>Jim</customer></customer_dimension>
      </order>
    </orders>
    """
    inst = decode(EncodedDataset(ModelKind.FLAT, _doc(text)))
    assert inst.schema.measures[0].name == "price"
    assert inst.schema.measures[0].kind.name == "DECIMAL"
    assert inst.facts[0].measure_values == {"price": 12567}


def test_decode_flat_single_level_dimension():
    text = """
    <orders>
      <order>
        <quantity>2</quantity>
        <color_dimension><color>red</color></color_dimension>
      </order>
      <order>
        <quantity>5</quantity>
        <color_dimension><color>red</color></color_dimension>
      </order>
    </orders>
    """
    inst = decode(EncodedDataset(ModelKind.FLAT, _doc(text)))
    assert [d.name for d in inst.schema.dimensions] == ["color"]
    assert len(inst.members["color"]) == 1
    assert inst.facts[0].leaf_refs == inst.facts[1].leaf_refs


# --- malformed documents ----------------------------------------------------


def test_hier_decode_requires_dims_doc():
    with pytest.raises(LayoutError, match="dimension document"):
        decode(EncodedDataset(ModelKind.HIERARCHICAL, _doc("<orders/>")))


def test_hier_decode_rejects_missing_leaf_id():
    facts = _doc('<orders><order><customer ref="c1"/></order></orders>')
    dims = _doc('<dimensions><country name="BE"><customer name="Jim"/></country></dimensions>')
    with pytest.raises(LayoutError, match="without an id"):
        decode(EncodedDataset(ModelKind.HIERARCHICAL, facts, dims))


def test_hier_decode_rejects_dangling_ref():
    facts = _doc('<orders><order><customer ref="nope"/></order></orders>')
    dims = _doc('<dimensions><customer name="Jim" id="c1"/></dimensions>')
    with pytest.raises(LayoutError, match="matches no leaf"):
        decode(EncodedDataset(ModelKind.HIERARCHICAL, facts, dims))


def test_flat_decode_rejects_measure_after_dimension():
    text = """
    <orders>
      <order>
        <color_dimension><color>red</color></color_dimension>
        <quantity>2</quantity>
      </order>
    </orders>
    """
    with pytest.raises(LayoutError, match="after a dimension"):
        decode(EncodedDataset(ModelKind.FLAT, _doc(text)))


def test_flat_decode_rejects_ragged_paths():
    text = """
    <orders>
      <order>
        <color_dimension><color>red</color><shade>dark</shade></color_dimension>
      </order>
      <order>
        <color_dimension><color>blue</color></color_dimension>
      </order>
    </orders>
    """
    with pytest.raises(LayoutError, match="depth mismatch"):
        decode(EncodedDataset(ModelKind.FLAT, _doc(text)))


def test_flat_decode_rejects_inconsistent_measures():
    text = """
    <orders>
      <order><quantity>2</quantity></order>
      <order><price>3.50</price></order>
    </orders>
    """
    with pytest.raises(LayoutError, match="do not match the first fact"):
        decode(EncodedDataset(ModelKind.FLAT, _doc(text)))


def test_xcube_decode_rejects_node_without_name():
    facts = _doc('<cube fact="order"/>')
    dims = _doc('<dimensions><level id="customer"><node id="c1"/></level></dimensions>')
    with pytest.raises(LayoutError, match="missing id or name"):
        decode(EncodedDataset(ModelKind.XCUBE, facts, dims))


def test_xcube_decode_rejects_broken_rollup_partition():
    facts = _doc('<cube fact="order"/>')
    dims = _doc(
        '<dimensions>'
        '<level id="a"><node id="a1" name="A"><rollUp toNode="b1" level="b"/></node></level>'
        '<level id="b"><node id="b1" name="B"><rollUp toNode="a1" level="a"/></node></level>'
        '</dimensions>'
    )
    with pytest.raises(LayoutError, match="partition"):
        decode(EncodedDataset(ModelKind.XCUBE, facts, dims))


# --- dataset directories ----------------------------------------------------


def test_write_and_load_dataset(tmp_path):
    inst = generate(running_example_schema(), 50, 3, seed=11)
    write_dataset(tmp_path, inst)
    for files in MODEL_FILES.values():
        for fname in files:
            assert (tmp_path / fname).is_file()
    assert decode(load_dataset(tmp_path, ModelKind.HIERARCHICAL)) == inst
    assert decode(load_dataset(tmp_path, ModelKind.XCUBE)) == inst
    flat_back = decode(load_dataset(tmp_path, ModelKind.FLAT))
    assert fact_name_paths(flat_back) == fact_name_paths(inst)
    docs = load_model_documents(tmp_path, ModelKind.XCUBE)
    assert list(docs) == ["xcube_facts", "xcube_dims"]


def test_load_missing_file(tmp_path):
    with pytest.raises(LayoutError, match="missing dataset file"):
        load_model_documents(tmp_path, ModelKind.FLAT)
