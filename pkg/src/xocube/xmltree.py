"""Minimal XML tree model with a parser and a serializer.

The supported subset is exactly what the cube layouts need: elements,
attributes, character data and the five predefined entities, UTF-8 only.
Namespace prefixes, DTDs and processing instructions are rejected with
UnsupportedFeature; comments and whitespace-only text nodes are discarded
at parse time, so a pretty-printed document parses back to the same tree.

Parsed documents carry a total document order over element, attribute and
text nodes (an element comes first, then its attributes, then its
children).  Documents must be treated as immutable once built, which makes
them safe to share between threads and lets the query engine cache string
values and index postings against node identity.
"""

from __future__ import annotations

from typing import Iterator
from xml.parsers import expat

from .errors import XocubeError


class XmlError(XocubeError):
    """Base class for XML level failures."""


class ParseError(XmlError):
    """Malformed input.  Carries the approximate byte offset of the fault."""

    def __init__(self, message: str, byte_offset: int = -1):
        if byte_offset >= 0:
            message = f"{message} (byte {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class UnsupportedFeature(XmlError):
    """Well-formed XML that uses a feature outside the supported subset."""

    def __init__(self, message: str, byte_offset: int = -1):
        if byte_offset >= 0:
            message = f"{message} (byte {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class AttributeNode:
    """A named attribute.  ``owner`` is the element carrying it."""

    __slots__ = ("name", "value", "owner", "order", "doc")

    def __init__(self, name: str, value: str):
        self.name = name
        self.value = value
        self.owner: ElementNode | None = None
        self.order = -1
        self.doc: XmlDocument | None = None

    def __repr__(self) -> str:
        return f"AttributeNode({self.name}={self.value!r})"


class TextNode:
    """A run of character data.  Adjacent runs are always merged."""

    __slots__ = ("text", "parent", "order", "doc")

    def __init__(self, text: str):
        self.text = text
        self.parent: ElementNode | None = None
        self.order = -1
        self.doc: XmlDocument | None = None

    def __repr__(self) -> str:
        return f"TextNode({self.text!r})"


class ElementNode:
    """An element with ordered attributes and children.

    ``attributes`` may be given as (name, value) pairs for convenience;
    ``children`` is a list of ElementNode and TextNode in document order.
    """

    __slots__ = ("name", "attributes", "children", "parent", "order", "doc",
                 "_string_value")

    def __init__(self, name: str, attributes=(), children=()):
        self.name = name
        attrs = []
        for a in attributes:
            if not isinstance(a, AttributeNode):
                a = AttributeNode(a[0], a[1])
            attrs.append(a)
        self.attributes: list[AttributeNode] = attrs
        self.children: list[ElementNode | TextNode] = list(children)
        self.parent: ElementNode | None = None
        self.order = -1
        self.doc: XmlDocument | None = None
        self._string_value: str | None = None

    def attribute(self, name: str) -> AttributeNode | None:
        for a in self.attributes:
            if a.name == name:
                return a
        return None

    def get(self, name: str, default: str | None = None) -> str | None:
        a = self.attribute(name)
        return a.value if a is not None else default

    def child_elements(self, name: str | None = None) -> Iterator[ElementNode]:
        for c in self.children:
            if c.__class__ is ElementNode and (name is None or c.name == name):
                yield c

    def first_child(self, name: str) -> ElementNode | None:
        for c in self.children:
            if c.__class__ is ElementNode and c.name == name:
                return c
        return None

    def iter_descendants(self, name: str | None = None) -> Iterator[ElementNode]:
        """Proper descendant elements in document order (self excluded)."""
        stack = list(reversed(self.children))
        while stack:
            n = stack.pop()
            if n.__class__ is ElementNode:
                if name is None or n.name == name:
                    yield n
                stack.extend(reversed(n.children))

    def __repr__(self) -> str:
        return f"ElementNode(<{self.name}> order={self.order})"


class XmlDocument:
    """An immutable document: one root element plus a flat node table.

    ``nodes[i]`` is the node with document order ``i``; the root has
    order 0.
    """

    __slots__ = ("root", "nodes")

    def __init__(self, root: ElementNode, nodes: list):
        self.root = root
        self.nodes = nodes

    @classmethod
    def from_root(cls, root: ElementNode) -> XmlDocument:
        doc = cls(root, [])
        doc.nodes = _number_tree(root, doc)
        return doc

    def iter_elements(self, name: str | None = None) -> Iterator[ElementNode]:
        """All elements (root included) in document order."""
        if name is None or self.root.name == name:
            yield self.root
        yield from self.root.iter_descendants(name)


def _number_tree(root: ElementNode, doc: XmlDocument | None) -> list:
    """Assign document order, parent and doc backrefs over a whole tree."""
    nodes: list = []
    append = nodes.append
    stack = [root]
    while stack:
        node = stack.pop()
        node.order = len(nodes)
        node.doc = doc
        append(node)
        if node.__class__ is ElementNode:
            for a in node.attributes:
                a.owner = node
                a.order = len(nodes)
                a.doc = doc
                append(a)
            for c in node.children:
                c.parent = node
            stack.extend(reversed(node.children))
    return nodes


def number_detached(root: ElementNode) -> ElementNode:
    """Number a constructed tree that belongs to no document.

    Gives query-constructed elements a stable local order so sequences of
    their descendants behave like ordinary path results.
    """
    _number_tree(root, None)
    return root


def string_value(node) -> str:
    """XPath string value: attribute value, text run, or concatenated
    descendant text of an element in document order."""
    cls = node.__class__
    if cls is AttributeNode:
        return node.value
    if cls is TextNode:
        return node.text
    cached = node._string_value
    if cached is not None:
        return cached
    children = node.children
    if len(children) == 1 and children[0].__class__ is TextNode:
        value = children[0].text
    else:
        parts = []
        stack = list(reversed(children))
        while stack:
            n = stack.pop()
            if n.__class__ is TextNode:
                parts.append(n.text)
            else:
                stack.extend(reversed(n.children))
        value = "".join(parts)
    node._string_value = value
    return value


# --- parsing ---------------------------------------------------------------


def parse_document(data: bytes | str) -> XmlDocument:
    """Parse UTF-8 XML into an XmlDocument.

    Raises ParseError (with a byte offset) on malformed input and
    UnsupportedFeature on namespaces, DTDs or processing instructions.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    parser = expat.ParserCreate(encoding="utf-8")
    parser.buffer_text = True

    root_holder: list[ElementNode] = []
    stack: list[ElementNode] = []
    pending_text: list[str] = []

    def flush_text() -> None:
        if not pending_text:
            return
        text = "".join(pending_text)
        pending_text.clear()
        if not text.strip():
            return  # whitespace-only runs between elements are dropped
        if not stack:
            return  # expat rejects real character data outside the root
        children = stack[-1].children
        if children and children[-1].__class__ is TextNode:
            children[-1].text += text
        else:
            children.append(TextNode(text))

    def check_name(name: str) -> None:
        if ":" in name:
            raise UnsupportedFeature(
                f"namespace prefixes are not supported: {name!r}",
                parser.CurrentByteIndex)

    def start_element(name: str, attrs: list) -> None:
        flush_text()
        check_name(name)
        el = ElementNode(name)
        for i in range(0, len(attrs), 2):
            aname = attrs[i]
            if aname == "xmlns" or ":" in aname:
                raise UnsupportedFeature(
                    f"namespace declarations are not supported: {aname!r}",
                    parser.CurrentByteIndex)
            el.attributes.append(AttributeNode(aname, attrs[i + 1]))
        if stack:
            stack[-1].children.append(el)
        else:
            root_holder.append(el)
        stack.append(el)

    def end_element(name: str) -> None:
        flush_text()
        stack.pop()

    def character_data(text: str) -> None:
        pending_text.append(text)

    def start_doctype(*args) -> None:
        raise UnsupportedFeature("DTDs are not supported",
                                 parser.CurrentByteIndex)

    def processing_instruction(*args) -> None:
        raise UnsupportedFeature("processing instructions are not supported",
                                 parser.CurrentByteIndex)

    parser.ordered_attributes = True
    parser.StartElementHandler = start_element
    parser.EndElementHandler = end_element
    parser.CharacterDataHandler = character_data
    parser.StartDoctypeDeclHandler = start_doctype
    parser.ProcessingInstructionHandler = processing_instruction

    try:
        parser.Parse(data, True)
    except expat.ExpatError as exc:
        raise ParseError(str(exc), parser.ErrorByteIndex) from None
    if not root_holder:
        raise ParseError("no root element", 0)
    return XmlDocument.from_root(root_holder[0])


def read_document(path) -> XmlDocument:
    with open(path, "rb") as fh:
        return parse_document(fh.read())


# --- serialization ---------------------------------------------------------


def _escape_text(s: str) -> str:
    if "&" in s:
        s = s.replace("&", "&amp;")
    if "<" in s:
        s = s.replace("<", "&lt;")
    if ">" in s:
        s = s.replace(">", "&gt;")
    return s


def _escape_attr(s: str) -> str:
    s = _escape_text(s)
    if '"' in s:
        s = s.replace('"', "&quot;")
    return s


def _write_element(el: ElementNode, out: list[str], pretty: bool, depth: int) -> None:
    tag = [el.name]
    for a in el.attributes:
        tag.append(f' {a.name}="{_escape_attr(a.value)}"')
    open_tag = "".join(tag)
    children = el.children
    if not children:
        out.append(f"<{open_tag}/>")
        return
    element_only = all(c.__class__ is ElementNode for c in children)
    if pretty and element_only:
        pad = "  " * (depth + 1)
        out.append(f"<{open_tag}>")
        for c in children:
            out.append("\n")
            out.append(pad)
            _write_element(c, out, pretty, depth + 1)
        out.append("\n")
        out.append("  " * depth)
        out.append(f"</{el.name}>")
    else:
        # mixed or text content is kept on one line so the string value
        # survives a round trip
        out.append(f"<{open_tag}>")
        for c in children:
            if c.__class__ is TextNode:
                out.append(_escape_text(c.text))
            else:
                _write_element(c, out, False, 0)
        out.append(f"</{el.name}>")


def serialize_element(el: ElementNode, pretty: bool = False) -> str:
    out: list[str] = []
    _write_element(el, out, pretty, 0)
    return "".join(out)


def serialize(doc: XmlDocument, pretty: bool = False) -> bytes:
    """Serialize a document to UTF-8 bytes, with 2-space indentation when
    ``pretty`` is set.  Output is deterministic for equal trees."""
    text = serialize_element(doc.root, pretty)
    return b'<?xml version="1.0" encoding="UTF-8"?>\n' + text.encode("utf-8") + b"\n"


def write_document(doc: XmlDocument, path, pretty: bool = True) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(doc, pretty))


def trees_equal(a, b) -> bool:
    """Structural equality on names, attributes and content (order ids are
    ignored).  Used by round-trip tests."""
    if a.__class__ is not b.__class__:
        return False
    if a.__class__ is TextNode:
        return a.text == b.text
    if a.__class__ is AttributeNode:
        return a.name == b.name and a.value == b.value
    if a.name != b.name:
        return False
    if [(x.name, x.value) for x in a.attributes] != [(x.name, x.value) for x in b.attributes]:
        return False
    if len(a.children) != len(b.children):
        return False
    return all(trees_equal(x, y) for x, y in zip(a.children, b.children))
