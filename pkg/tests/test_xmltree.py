"""XML tree model: parsing, serialization, document order, string values."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from xocube.xmltree import (
    AttributeNode,
    ElementNode,
    ParseError,
    TextNode,
    UnsupportedFeature,
    XmlDocument,
    parse_document,
    serialize,
    serialize_element,
    string_value,
    trees_equal,
)


FLAT_FACT = """
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
"""


def test_parse_simple_tree():
    doc = parse_document('<a x="1"><b/>tail</a>')
    root = doc.root
    assert root.name == "a"
    assert root.get("x") == "1"
    b, tail = root.children
    assert isinstance(b, ElementNode) and b.name == "b"
    assert isinstance(tail, TextNode) and tail.text == "tail"


def test_parse_flat_fact_shape():
    doc = parse_document(FLAT_FACT)
    order = doc.root
    names = [c.name for c in order.child_elements()]
    assert names == ["price", "quantity", "customer_dimension", "product_dimension"]
    assert string_value(order.first_child("price")) == "125.67"
    customer = order.first_child("customer_dimension")
    assert [string_value(c) for c in customer.child_elements()] == ["Jim", "BE", "EU"]


def test_whitespace_only_text_dropped():
    doc = parse_document("<a>\n  <b/>\n  <c/>\n</a>")
    assert all(isinstance(c, ElementNode) for c in doc.root.children)
    assert len(doc.root.children) == 2


def test_significant_whitespace_kept():
    doc = parse_document("<a> x </a>")
    assert string_value(doc.root) == " x "


def test_predefined_entities():
    doc = parse_document("<a>&amp;&lt;&gt;&quot;&apos;</a>")
    assert string_value(doc.root) == "&<>\"'"


def test_adjacent_text_merged():
    doc = parse_document("<a>x&amp;y</a>")
    assert len(doc.root.children) == 1
    assert doc.root.children[0].text == "x&y"


def test_document_order_total_and_increasing():
    doc = parse_document('<a x="1" y="2"><b><c/></b>t<d/></a>')
    orders = [n.order for n in doc.nodes]
    assert orders == list(range(len(doc.nodes)))
    # element first, then its attributes, then children
    root = doc.root
    assert root.order == 0
    assert root.attributes[0].order == 1
    assert root.attributes[1].order == 2
    assert root.children[0].order == 3
    walk = list(root.iter_descendants())
    assert [e.order for e in walk] == sorted(e.order for e in walk)


def test_string_value_concatenates_descendant_text():
    doc = parse_document("<a>x<b>y</b>z</a>")
    assert string_value(doc.root) == "xyz"
    assert string_value(doc.root.first_child("b")) == "y"


def test_string_value_of_attribute_and_text():
    doc = parse_document('<a k="v">t</a>')
    assert string_value(doc.root.attribute("k")) == "v"
    assert string_value(doc.root.children[0]) == "t"


def test_decimal_comma_survives_as_text():
    doc = parse_document("<price>125,67</price>")
    assert string_value(doc.root) == "125,67"


# --- errors ----------------------------------------------------------------


def test_malformed_has_byte_offset():
    with pytest.raises(ParseError) as err:
        parse_document("<a><b></a>")
    assert err.value.byte_offset >= 0


def test_unclosed_root():
    with pytest.raises(ParseError):
        parse_document("<a>")


def test_two_roots_rejected():
    with pytest.raises(ParseError):
        parse_document("<a/><b/>")


def test_duplicate_attribute_rejected():
    with pytest.raises(ParseError):
        parse_document('<a x="1" x="2"/>')


def test_namespace_prefix_rejected():
    with pytest.raises(UnsupportedFeature):
        parse_document("<ns:a/>")


def test_namespace_declaration_rejected():
    with pytest.raises(UnsupportedFeature):
        parse_document('<a xmlns="urn:x"/>')


def test_doctype_rejected():
    with pytest.raises(UnsupportedFeature):
        parse_document('<!DOCTYPE a><a/>')


def test_processing_instruction_rejected():
    with pytest.raises(UnsupportedFeature):
        parse_document("<a><?pi data?></a>")


def test_comments_discarded():
    doc = parse_document("<a><!-- note --><b/></a>")
    assert [c.name for c in doc.root.child_elements()] == ["b"]


# --- serialization ---------------------------------------------------------


def test_serialize_self_closing_and_escapes():
    root = ElementNode("a", attributes=[("k", 'x"<y')], children=[
        ElementNode("b"),
        TextNode("1 < 2 & 3"),
    ])
    text = serialize_element(root)
    assert text == '<a k="x&quot;&lt;y"><b/>1 &lt; 2 &amp; 3</a>'


def test_pretty_indent_two_spaces():
    doc = parse_document("<a><b><c>t</c></b><d/></a>")
    out = serialize(doc, pretty=True).decode()
    assert out == (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        "<a>\n"
        "  <b>\n"
        "    <c>t</c>\n"
        "  </b>\n"
        "  <d/>\n"
        "</a>\n"
    )


def test_serialize_parse_round_trip_fact():
    doc = parse_document(FLAT_FACT)
    again = parse_document(serialize(doc, pretty=True))
    assert trees_equal(doc.root, again.root)


def test_serialize_deterministic():
    doc = parse_document(FLAT_FACT)
    assert serialize(doc, pretty=True) == serialize(doc, pretty=True)


# --- property: random trees survive a round trip ---------------------------

_names = st.sampled_from(["a", "b", "cube", "item_1", "x-y", "n.v"])
_texts = st.text(
    alphabet=st.sampled_from(list("ab<>&\"' é")), min_size=1, max_size=8
).filter(lambda s: s.strip())


@st.composite
def _trees(draw, depth=0):
    name = draw(_names)
    attrs = draw(st.lists(st.tuples(_names, _texts), max_size=2, unique_by=lambda t: t[0]))
    children = []
    if depth < 3:
        for kind in draw(st.lists(st.sampled_from(["el", "text"]), max_size=3)):
            if kind == "el":
                children.append(draw(_trees(depth=depth + 1)))
            else:
                children.append(TextNode(draw(_texts)))
    merged = []
    for c in children:  # the model never holds adjacent text nodes
        if merged and isinstance(c, TextNode) and isinstance(merged[-1], TextNode):
            merged[-1] = TextNode(merged[-1].text + c.text)
        else:
            merged.append(c)
    return ElementNode(name, attributes=attrs, children=merged)


@given(_trees())
def test_round_trip_random_trees(root):
    doc = XmlDocument.from_root(root)
    reparsed = parse_document(serialize(doc))
    assert trees_equal(doc.root, reparsed.root)
