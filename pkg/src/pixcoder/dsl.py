"""Layout DSL: ordered labeled trees, a brace-block text syntax, and grammar checks.

Syntax::

    body {
      stack {
        row {
          label
          btn
        }
      }
      footer {
        btn-home
      }
    }

A block is ``token { ... }``; a bare token is a leaf. Tokens are separated by
whitespace. ``serialize`` always produces the canonical form shown above.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator

CONTAINERS = ("body", "stack", "row", "footer")


class DslSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class InvalidTree(ValueError):
    pass


@dataclass(frozen=True)
class DslTree:
    label: str
    children: tuple["DslTree", ...] = ()

    def __post_init__(self):
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))

    def __iter__(self) -> Iterator["DslTree"]:
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def __str__(self):
        if not self.children:
            return self.label
        return f"{self.label}{{{' '.join(str(c) for c in self.children)}}}"


def node(label: str, *children: DslTree | str) -> DslTree:
    """Shorthand builder; string children become leaves."""
    return DslTree(label, tuple(DslTree(c) if isinstance(c, str) else c for c in children))


def node_count(tree: DslTree) -> int:
    return sum(1 for _ in tree)


@dataclass(frozen=True)
class Grammar:
    """Structural rules for one platform.

    The tree shape is fixed: ``body { stack { row* } footer }``. Rows hold
    row-control leaves, the footer holds footer-control leaves. ``framed``
    maps a control to the (left, right) neighbours it must appear between.
    """

    platform: str
    row_tokens: tuple[str, ...]
    footer_tokens: tuple[str, ...]
    rows: tuple[int, int] = (1, 8)
    row_arity: tuple[int, int] = (1, 4)
    footer_arity: tuple[int, int] = (1, 4)
    framed: dict = field(default_factory=dict, hash=False, compare=False)

    @property
    def alphabet(self) -> frozenset[str]:
        return frozenset(CONTAINERS) | frozenset(self.row_tokens) | frozenset(self.footer_tokens)


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


def _check_leaves(block: DslTree, path: str, allowed, arity, framed) -> list[Violation]:
    out = []
    lo, hi = arity
    if not lo <= len(block.children) <= hi:
        out.append(Violation(path, f"{block.label} has {len(block.children)} controls, expected {lo}..{hi}"))
    tokens = [c.label for c in block.children]
    for i, child in enumerate(block.children):
        where = f"{path}/{child.label}[{i}]"
        if child.label not in allowed:
            out.append(Violation(where, f"{child.label!r} not allowed in {block.label}"))
        if child.children:
            out.append(Violation(where, f"control {child.label!r} cannot have children"))
        if child.label in framed:
            left, right = framed[child.label]
            if not (0 < i < len(tokens) - 1 and tokens[i - 1] == left and tokens[i + 1] == right):
                out.append(Violation(where, f"{child.label} must appear as {left} {child.label} {right}"))
    return out


def validate(tree: DslTree, grammar: Grammar) -> list[Violation]:
    """All grammar violations in ``tree``; an empty list means the tree is valid."""
    if tree.label != "body":
        return [Violation(tree.label, "root must be 'body'")]
    labels = [c.label for c in tree.children]
    if labels != ["stack", "footer"]:
        return [Violation("body", f"body must contain exactly 'stack' then 'footer', got {labels}")]
    stack, footer = tree.children
    out = []
    lo, hi = grammar.rows
    if not lo <= len(stack.children) <= hi:
        out.append(Violation("body/stack", f"{len(stack.children)} rows, expected {lo}..{hi}"))
    for i, row in enumerate(stack.children):
        path = f"body/stack/row[{i}]"
        if row.label != "row":
            out.append(Violation(path, f"stack only holds rows, got {row.label!r}"))
            continue
        out += _check_leaves(row, path, grammar.row_tokens, grammar.row_arity, grammar.framed)
    out += _check_leaves(footer, "body/footer", grammar.footer_tokens, grammar.footer_arity, {})
    return out


_TOKEN = re.compile(r"\s*(?:(?P<brace>[{}])|(?P<word>[A-Za-z][A-Za-z0-9_-]*)|(?P<bad>\S))")


def _tokens(text: str):
    line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def position(offset):
        lo, hi = 0, len(line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if line_starts[mid] <= offset:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1, offset - line_starts[lo] + 1

    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if not m:
            return
        pos = m.end()
        kind = m.lastgroup
        value = m.group(kind)
        yield kind, value, position(m.start(kind))


def default_alphabet() -> frozenset[str]:
    from .platforms import PLATFORMS

    tokens = set(CONTAINERS)
    for spec in PLATFORMS.values():
        tokens |= set(spec.row_tokens) | set(spec.footer_tokens)
    return frozenset(tokens)


def parse(text: str, alphabet: Iterable[str] | None = None) -> DslTree:
    """Parse DSL text into a tree.

    Raises DslSyntaxError for unbalanced braces, stray characters, unknown
    tokens, empty input, or more than one top-level node.
    """
    alphabet = frozenset(alphabet) if alphabet is not None else default_alphabet()
    # each frame: (label, children, position of the opening token)
    stack: list[tuple[str, list, tuple]] = [("", [], (1, 1))]
    pending = None  # last bare word, may still be opened as a block
    end = (1, 1)

    def flush():
        nonlocal pending
        if pending is not None:
            stack[-1][1].append(DslTree(pending[0]))
            pending = None

    for kind, value, where in _tokens(text):
        end = where
        if kind == "bad":
            raise DslSyntaxError(f"unexpected character {value!r}", *where)
        if kind == "word":
            if value not in alphabet:
                raise DslSyntaxError(f"unknown token {value!r}", *where)
            flush()
            pending = (value, where)
        elif value == "{":
            if pending is None:
                raise DslSyntaxError("'{' must follow a token", *where)
            stack.append((pending[0], [], pending[1]))
            pending = None
        else:
            flush()
            if len(stack) == 1:
                raise DslSyntaxError("unmatched '}'", *where)
            label, children, _ = stack.pop()
            stack[-1][1].append(DslTree(label, tuple(children)))
    flush()
    if len(stack) > 1:
        label, _, where = stack[-1]
        raise DslSyntaxError(f"unclosed block {label!r}", *where)
    top = stack[0][1]
    if not top:
        raise DslSyntaxError("empty DSL", *end)
    if len(top) > 1:
        raise DslSyntaxError(f"expected a single root, found {len(top)} top-level nodes", *end)
    return top[0]


def serialize(tree: DslTree, alphabet: Iterable[str] | None = None) -> str:
    alphabet = frozenset(alphabet) if alphabet is not None else default_alphabet()
    lines: list[str] = []

    def emit(t: DslTree, depth: int):
        if t.label not in alphabet:
            raise InvalidTree(f"label {t.label!r} is not in the token alphabet")
        pad = "  " * depth
        if not t.children:
            lines.append(pad + t.label)
            return
        lines.append(f"{pad}{t.label} {{")
        for c in t.children:
            emit(c, depth + 1)
        lines.append(pad + "}")

    emit(tree, 0)
    return "\n".join(lines)


@lru_cache(maxsize=1024)
def _leaf(label: str) -> DslTree:
    # trees are immutable, so identical leaves can be shared
    return DslTree(label)


def make_tree(rows, footer) -> DslTree:
    """``body { stack { row{...}... } footer{...} }`` from token sequences."""
    rows = tuple(DslTree("row", tuple(map(_leaf, r))) for r in rows)
    return DslTree("body", (DslTree("stack", rows), DslTree("footer", tuple(map(_leaf, footer)))))


def split_tree(tree: DslTree) -> tuple[list[tuple[str, ...]], tuple[str, ...]]:
    """Inverse of make_tree: the row token sequences and the footer tokens."""
    stack, footer = tree.children
    rows = [tuple(c.label for c in row.children) for row in stack.children]
    return rows, tuple(c.label for c in footer.children)
