"""AST for the FLWOR query subset, plus the canonical pretty-printer.

The node set is exactly what the supported grammar can produce: FLWOR
expressions with a grouping clause, two-axis path expressions with
predicates, value and general comparisons, ``and`` chains, the two
built-in functions, string literals, and direct element constructors
with enclosed expressions.  All nodes are frozen, so parsed queries can
be shared and compared structurally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

Expr = Union[
    "Literal", "VarRef", "PathExpr", "Comparison", "AndExpr",
    "FunctionCall", "ElementConstructor", "FLWORExpr",
]


@dataclass(frozen=True)
class Literal:
    """A string literal; the grammar has no numeric literals."""

    value: str


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class NameTest:
    """Matches child or descendant elements by name."""

    name: str


@dataclass(frozen=True)
class AttrTest:
    """Matches attributes by name (`@id`)."""

    name: str


@dataclass(frozen=True)
class Step:
    axis: str  # "child" or "descendant"
    test: NameTest | AttrTest
    predicates: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class PathExpr:
    """A path from one of three starting points.

    start "root" walks the document collection (`//order`, `/orders`),
    "context" walks from the current context node (`.//category`,
    `customer/@ref`, plain `.`), and "var" walks from the nodes bound to
    ``var`` (`$fact/quantity`).
    """

    start: str  # "root" | "context" | "var"
    var: str | None = None
    steps: tuple[Step, ...] = ()


@dataclass(frozen=True)
class Comparison:
    op: str  # "eq" (value) or "=" (general)
    left: Expr
    right: Expr


@dataclass(frozen=True)
class AndExpr:
    terms: tuple[Expr, ...]


@dataclass(frozen=True)
class FunctionCall:
    name: str  # "distinct-values" or "sum"
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class EnclosedExpr:
    """An `{expr}` part inside constructor content."""

    expr: Expr


@dataclass(frozen=True)
class ElementConstructor:
    name: str
    attributes: tuple[tuple[str, str], ...] = ()
    content: tuple = ()  # parts: str | EnclosedExpr | ElementConstructor


@dataclass(frozen=True)
class ForClause:
    var: str
    source: Expr


@dataclass(frozen=True)
class LetClause:
    var: str
    value: Expr


@dataclass(frozen=True)
class GroupClause:
    """`group $x, ... by $k, ...`.

    The variables before ``by`` merely name what the author considers the
    grouped payload; evaluation rebinds every non-key variable of the
    FLWOR anyway, so they carry no semantics beyond a scope check.
    """

    retained: tuple[str, ...]
    keys: tuple[str, ...]


@dataclass(frozen=True)
class FLWORExpr:
    for_clauses: tuple[ForClause, ...]
    let_clauses: tuple[LetClause, ...] = ()
    where: Expr | None = None
    group_by: GroupClause | None = None
    return_expr: Expr = field(default=None)


# --- pretty-printer ---------------------------------------------------------


def _string_literal(value: str) -> str:
    return '"' + value.replace('"', '""') + '"'


def _escape_text(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _unparse_step(step: Step, first: bool, from_context: bool) -> str:
    if first and from_context and step.axis == "child":
        sep = ""
    elif first and from_context:
        sep = ".//"
    else:
        sep = "/" if step.axis == "child" else "//"
    test = step.test.name if isinstance(step.test, NameTest) else "@" + step.test.name
    preds = "".join("[" + unparse(p) + "]" for p in step.predicates)
    return sep + test + preds


def _unparse_path(path: PathExpr) -> str:
    if path.start == "var":
        head = "$" + path.var
        return head + "".join(_unparse_step(s, False, False) for s in path.steps)
    if path.start == "root":
        return "".join(_unparse_step(s, False, False) for s in path.steps)
    if not path.steps:
        return "."
    parts = [_unparse_step(path.steps[0], True, True)]
    parts += [_unparse_step(s, False, False) for s in path.steps[1:]]
    return "".join(parts)


def _operand(expr: Expr) -> str:
    """Wrap compound operands so the output re-parses unambiguously."""
    text = unparse(expr)
    if isinstance(expr, (Comparison, AndExpr, FLWORExpr)):
        return "(" + text + ")"
    return text


def _unparse_constructor(el: ElementConstructor, indent: int) -> str:
    attrs = "".join(f' {n}="{v}"' for n, v in el.attributes)
    if not el.content:
        return f"<{el.name}{attrs}/>"
    open_tag = f"<{el.name}{attrs}>"
    close_tag = f"</{el.name}>"
    if all(isinstance(p, ElementConstructor) for p in el.content):
        pad = "  " * (indent + 1)
        lines = [open_tag]
        lines += [pad + _unparse_constructor(p, indent + 1) for p in el.content]
        lines.append("  " * indent + close_tag)
        return "\n".join(lines)
    body = []
    for part in el.content:
        if isinstance(part, str):
            body.append(_escape_text(part))
        elif isinstance(part, EnclosedExpr):
            body.append("{" + unparse(part.expr) + "}")
        else:
            body.append(_unparse_constructor(part, indent))
    return open_tag + "".join(body) + close_tag


def _unparse_flwor(fl: FLWORExpr) -> str:
    lines = []
    for clause in fl.for_clauses:
        lines.append(f"for ${clause.var} in {unparse(clause.source)}")
    for clause in fl.let_clauses:
        lines.append(f"let ${clause.var} := {unparse(clause.value)}")
    if fl.where is not None:
        lines.append(f"where {unparse(fl.where)}")
    if fl.group_by is not None:
        retained = ", ".join("$" + v for v in fl.group_by.retained)
        keys = ", ".join("$" + v for v in fl.group_by.keys)
        lines.append(f"group {retained} by {keys}")
    ret = unparse(fl.return_expr)
    if "\n" in ret:
        ret = "\n".join("  " + line for line in ret.split("\n"))
        lines.append("return")
        lines.append(ret)
    else:
        lines.append(f"return {ret}")
    return "\n".join(lines)


def unparse(expr: Expr) -> str:
    """Render an AST back to query text.

    The output is canonical rather than byte-faithful to the source it
    was parsed from (normalized whitespace, parenthesized comparison
    operands inside ``and`` chains), and re-parses to an equal AST.
    """
    if isinstance(expr, Literal):
        return _string_literal(expr.value)
    if isinstance(expr, VarRef):
        return "$" + expr.name
    if isinstance(expr, PathExpr):
        return _unparse_path(expr)
    if isinstance(expr, Comparison):
        return f"{_operand(expr.left)} {expr.op} {_operand(expr.right)}"
    if isinstance(expr, AndExpr):
        return " and ".join(
            "(" + unparse(t) + ")" if isinstance(t, (Comparison, AndExpr)) else unparse(t)
            for t in expr.terms
        )
    if isinstance(expr, FunctionCall):
        return expr.name + "(" + ", ".join(unparse(a) for a in expr.args) + ")"
    if isinstance(expr, ElementConstructor):
        return _unparse_constructor(expr, 0)
    if isinstance(expr, FLWORExpr):
        return _unparse_flwor(expr)
    raise TypeError(f"not an AST node: {expr!r}")
