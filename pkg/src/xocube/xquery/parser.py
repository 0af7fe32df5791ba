"""Recursive-descent parser for the query subset.

Single pass over the source with on-demand tokenization, because element
constructors switch the lexer into raw content mode where whitespace and
angle brackets mean something different.  Keywords are contextual: they
are only recognized where the grammar expects a clause, so element and
attribute names are unrestricted.

Variables are scope-checked during parsing; referencing an unbound
variable raises UnboundVariable before any evaluation happens.
"""

from __future__ import annotations

from ..errors import XocubeError
from .ast import (
    AndExpr,
    AttrTest,
    Comparison,
    ElementConstructor,
    EnclosedExpr,
    Expr,
    FLWORExpr,
    ForClause,
    FunctionCall,
    GroupClause,
    LetClause,
    Literal,
    NameTest,
    PathExpr,
    Step,
    VarRef,
)

_FUNCTIONS = {"distinct-values": 1, "sum": 1}

_NAME_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_NAME_CHARS = _NAME_START | set("0123456789.-")

_ENTITIES = {"lt": "<", "gt": ">", "amp": "&", "quot": '"', "apos": "'"}


class QuerySyntaxError(XocubeError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnboundVariable(QuerySyntaxError):
    def __init__(self, name: str, line: int, column: int):
        super().__init__(f"unbound variable ${name}", line, column)
        self.name = name


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.scope: set[str] = set()

    # --- lexing helpers ---

    def _line_col(self, pos: int) -> tuple[int, int]:
        line = self.text.count("\n", 0, pos) + 1
        column = pos - self.text.rfind("\n", 0, pos)
        return line, column

    def _error(self, message: str, pos: int | None = None):
        line, column = self._line_col(self.pos if pos is None else pos)
        raise QuerySyntaxError(message, line, column)

    def _ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.text[i] if i < len(self.text) else ""

    def _try_punct(self, token: str) -> bool:
        self._ws()
        if self.text.startswith(token, self.pos):
            self.pos += len(token)
            return True
        return False

    def _expect_punct(self, token: str) -> None:
        if not self._try_punct(token):
            self._error(f"expected {token!r}")

    def _ncname_here(self) -> str | None:
        """Scan a name at the current position without skipping whitespace."""
        if self._peek() not in _NAME_START:
            return None
        start = self.pos
        while self._peek() in _NAME_CHARS:
            self.pos += 1
        return self.text[start:self.pos]

    def _ncname(self, what: str) -> str:
        self._ws()
        if self._peek().isdigit():
            self._error("numeric literals are not supported "
                        "(positional predicates are outside the subset)")
        name = self._ncname_here()
        if name is None:
            self._error(f"expected {what}")
        return name

    def _peek_word(self) -> str | None:
        """The next name token, if any, without consuming it."""
        save = self.pos
        self._ws()
        name = self._ncname_here()
        self.pos = save
        return name

    def _take_word(self, word: str) -> None:
        self._ws()
        name = self._ncname_here()
        if name != word:
            self._error(f"expected {word!r}")

    def _word_then_var(self, word: str) -> bool:
        """True if the next tokens are `word $`, the shape of a binding
        clause; leaves the input untouched."""
        save = self.pos
        self._ws()
        if self._ncname_here() != word:
            self.pos = save
            return False
        self._ws()
        ok = self._peek() == "$"
        self.pos = save
        return ok

    def _variable(self) -> tuple[str, int]:
        self._ws()
        at = self.pos
        if self._peek() != "$":
            self._error("expected a variable")
        self.pos += 1
        name = self._ncname_here()
        if name is None:
            self._error("expected a variable name after $")
        return name, at

    def _string_literal(self) -> str:
        quote = self._peek()
        self.pos += 1
        out = []
        while True:
            if self.pos >= len(self.text):
                self._error("unterminated string literal")
            ch = self.text[self.pos]
            self.pos += 1
            if ch == quote:
                if self._peek() == quote:  # doubled quote escapes itself
                    out.append(quote)
                    self.pos += 1
                else:
                    return "".join(out)
            else:
                out.append(ch)

    # --- expressions ---

    def parse(self) -> Expr:
        expr = self._expr_single()
        self._ws()
        if self.pos != len(self.text):
            self._error("unexpected text after the end of the query")
        return expr

    def _expr_single(self) -> Expr:
        if self._word_then_var("for"):
            return self._flwor()
        return self._and_chain()

    def _and_chain(self) -> Expr:
        terms = [self._comparison()]
        while True:
            save = self.pos
            self._ws()
            if self._ncname_here() == "and":
                terms.append(self._comparison())
            else:
                self.pos = save
                break
        return terms[0] if len(terms) == 1 else AndExpr(tuple(terms))

    def _comparison(self) -> Expr:
        left = self._operand()
        save = self.pos
        self._ws()
        op = None
        word = self._ncname_here()
        if word == "eq":
            op = "eq"
        elif word is None and self._peek() == "=":
            self.pos += 1
            op = "="
        if op is None:
            self.pos = save
            return left
        right = self._operand()
        save = self.pos
        self._ws()
        if self._peek() == "=" or self._peek_word() == "eq":
            self._error("comparisons do not chain; parenthesize one side")
        self.pos = save
        return Comparison(op, left, right)

    def _operand(self) -> Expr:
        self._ws()
        ch = self._peek()
        if ch == "(":
            self.pos += 1
            inner = self._expr_single()
            self._expect_punct(")")
            return inner
        if ch in "\"'":
            return Literal(self._string_literal())
        if ch == "<":
            return self._constructor()
        if ch == "$":
            name, at = self._variable()
            if name not in self.scope:
                line, col = self._line_col(at)
                raise UnboundVariable(name, line, col)
            steps = self._path_steps()
            if steps:
                return PathExpr("var", name, steps)
            return VarRef(name)
        if ch == "/":
            return PathExpr("root", None, self._path_steps(absolute=True))
        if ch == ".":
            self.pos += 1
            return PathExpr("context", None, self._path_steps())
        if ch.isdigit():
            self._error("numeric literals are not supported "
                        "(positional predicates are outside the subset)")
        if ch == "@" or ch in _NAME_START:
            return self._name_operand()
        self._error("expected an expression")

    def _name_operand(self) -> Expr:
        """A relative path, or a function call if a ( follows the name."""
        if self._peek() != "@":
            save = self.pos
            name = self._ncname_here()
            self._ws()
            if self._peek() == "(":
                if name not in _FUNCTIONS:
                    self.pos = save
                    self._error(f"unknown function {name}()")
                self.pos += 1
                args = []
                if not self._try_punct(")"):
                    args.append(self._expr_single())
                    while self._try_punct(","):
                        args.append(self._expr_single())
                    self._expect_punct(")")
                if len(args) != _FUNCTIONS[name]:
                    self._error(f"{name}() takes {_FUNCTIONS[name]} argument", save)
                return FunctionCall(name, tuple(args))
            self.pos = save
        first = self._one_step("child")
        return PathExpr("context", None, (first, *self._path_steps()))

    def _path_steps(self, absolute: bool = False) -> tuple[Step, ...]:
        """Zero or more `/step` / `//step` continuations; an absolute
        path (the caller saw the leading /) must yield a first step."""
        steps: list[Step] = []
        while True:
            required = absolute and not steps
            save = self.pos
            if not self._try_punct("/"):
                break
            axis = "child"
            if self._peek() == "/":
                self.pos += 1
                axis = "descendant"
            self._ws()
            if self._peek() != "@" and self._peek() not in _NAME_START:
                if required:
                    self._error("expected a step after /")
                self.pos = save
                break
            steps.append(self._one_step(axis))
        return tuple(steps)

    def _one_step(self, axis: str) -> Step:
        if self._peek() == "@":
            self.pos += 1
            test: NameTest | AttrTest = AttrTest(self._ncname("an attribute name"))
        else:
            test = NameTest(self._ncname("a step name"))
        predicates = []
        while self._try_punct("["):
            predicates.append(self._expr_single())
            self._expect_punct("]")
        return Step(axis, test, tuple(predicates))

    # --- FLWOR ---

    def _flwor(self) -> FLWORExpr:
        saved_scope = set(self.scope)
        fors: list[ForClause] = []
        lets: list[LetClause] = []
        where = None
        group = None
        while True:
            word = self._peek_word()
            if word == "for" and self._word_then_var("for"):
                if lets or where or group:
                    self._error("for clauses must come before let/where/group")
                self._take_word("for")
                var, _ = self._variable()
                self._take_word("in")
                source = self._expr_single()
                self.scope.add(var)
                fors.append(ForClause(var, source))
            elif word == "let" and self._word_then_var("let"):
                if where or group:
                    self._error("let clauses must come before where/group")
                self._take_word("let")
                var, _ = self._variable()
                self._expect_punct(":=")
                value = self._expr_single()
                self.scope.add(var)
                lets.append(LetClause(var, value))
            elif word == "where":
                if where or group:
                    self._error("duplicate or misplaced where clause")
                self._take_word("where")
                where = self._expr_single()
            elif word == "group":
                if group:
                    self._error("duplicate group clause")
                self._take_word("group")
                retained = [self._scoped_variable()]
                while self._try_punct(","):
                    retained.append(self._scoped_variable())
                self._take_word("by")
                keys = [self._scoped_variable()]
                while self._try_punct(","):
                    keys.append(self._scoped_variable())
                group = GroupClause(tuple(retained), tuple(keys))
            elif word == "return":
                self._take_word("return")
                ret = self._expr_single()
                self.scope = saved_scope
                return FLWORExpr(tuple(fors), tuple(lets), where, group, ret)
            else:
                self._error("expected a for/let/where/group/return clause")

    def _scoped_variable(self) -> str:
        name, at = self._variable()
        if name not in self.scope:
            line, col = self._line_col(at)
            raise UnboundVariable(name, line, col)
        return name

    # --- element constructors ---

    def _constructor(self) -> ElementConstructor:
        self._expect_punct("<")
        name = self._ncname_here()
        if name is None:
            self._error("expected an element name after <")
        attributes = []
        while True:
            self._ws()
            if self._try_punct("/>"):
                return ElementConstructor(name, tuple(attributes), ())
            if self._peek() == ">":
                self.pos += 1
                break
            attr = self._ncname_here()
            if attr is None:
                self._error("expected an attribute name or > in constructor")
            self._expect_punct("=")
            self._ws()
            if self._peek() not in "\"'":
                self._error("constructor attribute values must be quoted strings")
            quote = self._peek()
            self.pos += 1
            end = self.text.find(quote, self.pos)
            if end < 0:
                self._error("unterminated attribute value")
            attributes.append((attr, self._unescape(self.text[self.pos:end])))
            self.pos = end + 1
        content = self._constructor_content(name)
        return ElementConstructor(name, tuple(attributes), content)

    def _constructor_content(self, name: str) -> tuple:
        parts: list = []
        buf: list[str] = []

        def flush() -> None:
            if buf:
                text = self._unescape("".join(buf))
                buf.clear()
                if text.strip():
                    parts.append(text)

        while True:
            if self.pos >= len(self.text):
                self._error(f"unterminated <{name}> constructor")
            ch = self.text[self.pos]
            if ch == "<":
                if self._peek(1) == "/":
                    flush()
                    self.pos += 2
                    closing = self._ncname_here()
                    if closing != name:
                        self._error(f"mismatched closing tag </{closing}>, "
                                    f"expected </{name}>")
                    self._expect_punct(">")
                    return tuple(parts)
                flush()
                parts.append(self._constructor())
            elif ch == "{":
                flush()
                self.pos += 1
                expr = self._expr_single()
                self._expect_punct("}")
                parts.append(EnclosedExpr(expr))
            elif ch == "}":
                self._error("unescaped } in element content")
            else:
                buf.append(ch)
                self.pos += 1

    def _unescape(self, text: str) -> str:
        if "&" not in text:
            return text
        out = []
        i = 0
        while i < len(text):
            ch = text[i]
            if ch != "&":
                out.append(ch)
                i += 1
                continue
            end = text.find(";", i + 1)
            entity = text[i + 1:end] if end > 0 else ""
            if entity not in _ENTITIES:
                self._error(f"unknown entity &{entity};")
            out.append(_ENTITIES[entity])
            i = end + 1
        return "".join(out)


def parse_query(text: str) -> Expr:
    """Parse query text to an AST, or raise QuerySyntaxError."""
    return _Parser(text).parse()
