"""Functional-program instruction language: parsing, printing, the registry.

Programs are nested calls in concrete syntax, e.g.

    filterDistMoreThan(1.2, filterBook(TABLE), viewer)

Identifiers may contain letters, digits, underscores, and hyphens, so frame
symbols such as ``table-intrinsic`` or ``alarm_clock-relative`` are plain
symbols. Numbers parse to int or float literals.
"""

from __future__ import annotations

from dataclasses import dataclass


class DSLError(Exception):
    pass


class ProgramSyntaxError(DSLError):
    def __init__(self, message, position):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class UnknownFunction(DSLError):
    pass


class ArityMismatch(DSLError):
    pass


@dataclass(frozen=True)
class Call:
    """One node of a program tree: a named function applied to arguments.

    Arguments are Call nodes, Symbol leaves, or numeric literals.
    """

    name: str
    args: tuple

    def __str__(self):
        return print_program(self)


@dataclass(frozen=True)
class Symbol:
    name: str

    def __str__(self):
        return self.name


# arity per function; sources and literals are leaves
FUNCTIONS = {
    "pick": 1,
    "place": 1,
    "unique": 1,
    "filter": 2,
    "filterBook": 1,
    "filterSlot": 1,
    "filterSpace": 1,
    "filterAttrSmall": 1,
    "filterAttrMedium": 1,
    "filterAttrLarge": 1,
    "filterAttrEmpty": 1,
    "filterAttrNonEmpty": 1,
    "filterAttrEmptiest": 1,
    "filterAttrHeight": 2,
    "filterAttrWidth": 2,
    "filterAttrIndex1D": 2,
    "filterAttrIndex2D": 3,
    "filterDistClosest": 2,
    "filterDistFarthest": 2,
    "filterDistRankClosest": 3,
    "filterDistRankFarthest": 3,
    "filterDistLessThan": 3,
    "filterDistMoreThan": 3,
    "filterDistEqualTo": 3,
    "filterDistRange": 4,
    "filterRelLeft": 2,
    "filterRelRight": 2,
    "filterRelFront": 2,
    "filterRelBehind": 2,
    "filterRelUpper": 2,
    "filterRelLower": 2,
    "filterRelLeftMost": 2,
    "filterRelRightMost": 2,
    "filterRelRankLeftMost": 3,
    "filterRelRankRightMost": 3,
    "filterRelBetween": 3,
    "filterOriLeft": 2,
    "filterOriRight": 2,
    "filterOriFront": 2,
    "filterOriBehind": 2,
    "filterOriAbove": 2,
    "filterOriBelow": 2,
    "filterOriDirectLeft": 2,
    "filterOriDirectRight": 2,
    "filterOriDirectAbove": 2,
    "filterOriDirectBelow": 2,
    "filterOriRankLeftMost": 3,
    "filterOriRankRightMost": 3,
    "filterOriClockPosition": 3,
    "filterOriTiltDegree": 3,
    "filterOriFlat": 1,
    "filterOriVertical": 1,
    "filterOriTilted": 1,
    "placeOriFlat": 1,
    "placeOriVertical": 1,
    "placeOriTilted": 1,
    "placeOriTiltDegree": 2,
}

SOURCES = ("TABLE", "SHELF")

_IDENT_CHARS = set("abcdefghijklmnopqrstuvwxyz"
                   "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-")
_NUM_CHARS = set("0123456789.+-eE")


def _tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "(),":
            tokens.append((c, i))
            i += 1
        elif c.isdigit() or (c in "+-." and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            while j < n and text[j] in _NUM_CHARS:
                j += 1
            tokens.append(("num", i, text[i:j]))
            i = j
        elif c in _IDENT_CHARS:
            j = i
            while j < n and text[j] in _IDENT_CHARS:
                j += 1
            tokens.append(("ident", i, text[i:j]))
            i = j
        else:
            raise ProgramSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(("end", n))
    return tokens


def _parse_number(text, pos):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise ProgramSyntaxError(f"bad number {text!r}", pos) from None


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.take()
        if tok[0] != kind:
            raise ProgramSyntaxError(f"expected {kind!r}, got {tok[0]!r}",
                                     tok[1])
        return tok

    def parse_expr(self):
        tok = self.take()
        if tok[0] == "num":
            return _parse_number(tok[2], tok[1])
        if tok[0] != "ident":
            raise ProgramSyntaxError("expected expression", tok[1])
        name = tok[2]
        if self.peek()[0] != "(":
            return Symbol(name)
        if name not in FUNCTIONS:
            raise UnknownFunction(name)
        self.take()
        args = []
        if self.peek()[0] != ")":
            args.append(self.parse_expr())
            while self.peek()[0] == ",":
                self.take()
                args.append(self.parse_expr())
        self.expect(")")
        if len(args) != FUNCTIONS[name]:
            raise ArityMismatch(
                f"{name} takes {FUNCTIONS[name]} args, got {len(args)}")
        return Call(name, tuple(args))


def parse_program(text):
    """Parse concrete syntax into a Call/Symbol/literal tree."""
    parser = _Parser(_tokenize(text))
    tree = parser.parse_expr()
    tok = parser.peek()
    if tok[0] != "end":
        raise ProgramSyntaxError("trailing input", tok[1])
    return tree


def _format_literal(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def print_program(node):
    """Canonical concrete syntax; parse_program(print_program(x)) == x."""
    if isinstance(node, Call):
        args = ", ".join(print_program(a) for a in node.args)
        return f"{node.name}({args})"
    if isinstance(node, Symbol):
        return node.name
    return _format_literal(node)


def program_depth(node):
    """Nesting depth counting spatial-filter calls only."""
    if not isinstance(node, Call):
        return 0
    inner = max((program_depth(a) for a in node.args), default=0)
    spatial = node.name.startswith(("filterAttr", "filterDist", "filterRel",
                                    "filterOri", "placeOri"))
    return inner + (1 if spatial else 0)
