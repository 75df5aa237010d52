"""S-expression ASTs: parse, serialize, flatten, and strip to pure structure.

Grammar:  node := atom | "(" label node* ")"
          atom := [id:|lit:]?[a-z0-9_]+
Atoms are whitespace-separated; input may arrive mixed-case and is lowercased
on read. A sigil marks leaf kind (id: identifier, lit: literal, bare =
structure); internal-node labels are bare. The challenge condition replaces
every identifier label with the shared token "ID" and every literal with
"LIT", leaving structure untouched, so anonymized trees are uppercase-marked
and never collide with source tokens.

All traversals are iterative: corpora may contain trees deeper than the
interpreter recursion limit.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass

__all__ = [
    "AstNode",
    "AstParseError",
    "parse_sexpr",
    "serialize_sexpr",
    "flatten_ast",
    "challenge_transform",
    "challenge_strip_code",
    "count_nodes",
    "identifier_labels",
]

KIND_STRUCTURE = "structure"
KIND_IDENTIFIER = "identifier"
KIND_LITERAL = "literal"

ID_PLACEHOLDER = "ID"
LIT_PLACEHOLDER = "LIT"


@dataclass(frozen=True, eq=False)
class AstNode:
    label: str
    kind: str = KIND_STRUCTURE
    children: tuple["AstNode", ...] = ()

    def __post_init__(self):
        if not self.label:
            raise ValueError("AST labels must be nonempty")
        if self.kind not in (KIND_STRUCTURE, KIND_IDENTIFIER, KIND_LITERAL):
            raise ValueError(f"unknown node kind {self.kind!r}")
        if self.kind != KIND_STRUCTURE and self.children:
            raise ValueError(f"{self.kind} nodes must be leaves")

    # equality must survive trees deeper than the recursion limit
    def __eq__(self, other):
        if not isinstance(other, AstNode):
            return NotImplemented
        todo = [(self, other)]
        while todo:
            a, b = todo.pop()
            if a.label != b.label or a.kind != b.kind or len(a.children) != len(b.children):
                return False
            todo.extend(zip(a.children, b.children))
        return True

    def __hash__(self):
        return hash((self.label, self.kind, len(self.children)))


class AstParseError(ValueError):
    """Parse failure; `offset` is the byte offset where it was detected."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_ATOM = re.compile(r"(id:|lit:)?([A-Za-z0-9_]+)")

_SIGIL_KIND = {"id:": KIND_IDENTIFIER, "lit:": KIND_LITERAL, None: KIND_STRUCTURE}


def _atom_node(token: str, offset: int) -> AstNode:
    m = _ATOM.fullmatch(token)
    if not m:
        raise AstParseError(f"malformed atom {token!r}", offset)
    return AstNode(label=m.group(2).lower(), kind=_SIGIL_KIND[m.group(1)])


def parse_sexpr(text: str) -> AstNode:
    """Parse one node. Errors carry the byte offset of the problem."""
    stack: list[tuple[str, int, list[AstNode]]] = []  # (label, open offset, children)
    root: AstNode | None = None
    expect_label = False

    def complete(node: AstNode, offset: int):
        nonlocal root
        if stack:
            stack[-1][2].append(node)
        elif root is None:
            root = node
        else:
            raise AstParseError("trailing content after root node", offset)

    for m in _TOKEN.finditer(text):
        tok, off = m.group(0), m.start()
        if expect_label:
            if tok in ("(", ")"):
                raise AstParseError("empty node: expected label", off)
            node = _atom_node(tok, off)
            if node.kind != KIND_STRUCTURE:
                raise AstParseError("structure label cannot carry a sigil", off)
            stack.append((node.label, off, []))
            expect_label = False
        elif tok == "(":
            if root is not None and not stack:
                raise AstParseError("trailing content after root node", off)
            expect_label = True
        elif tok == ")":
            if not stack:
                raise AstParseError("unbalanced parentheses", off)
            label, _, children = stack.pop()
            complete(AstNode(label=label, children=tuple(children)), off)
        else:
            complete(_atom_node(tok, off), off)

    end = len(text)
    if expect_label or stack:
        raise AstParseError("unbalanced parentheses", end)
    if root is None:
        raise AstParseError("empty input", end)
    return root


def serialize_sexpr(root: AstNode) -> str:
    """Canonical form; childless structure nodes render as bare atoms."""
    parts: list[str] = []
    todo: list[object] = [root]
    while todo:
        item = todo.pop()
        if isinstance(item, str):
            parts.append(item)
            continue
        if item.kind == KIND_IDENTIFIER:
            parts.append(f"id:{item.label}")
        elif item.kind == KIND_LITERAL:
            parts.append(f"lit:{item.label}")
        elif not item.children:
            parts.append(item.label)
        else:
            parts.append(f"({item.label}")
            todo.append(")")
            todo.extend(reversed(item.children))
    # parens hug their own node; plain atoms are space-separated
    text = ""
    for part in parts:
        if text and part != ")" and not text.endswith("("):
            text += " "
        text += part
    return text


def flatten_ast(root: AstNode) -> list[str]:
    """Parenthesized pre-order: internal nodes emit "(", label, children, ")".

    Token count is always #nodes + 2 * #internal-nodes.
    """
    out: list[str] = []
    todo: list[object] = [root]
    while todo:
        item = todo.pop()
        if isinstance(item, str):
            out.append(item)
        elif item.children:
            out.append("(")
            out.append(item.label)
            todo.append(")")
            todo.extend(reversed(item.children))
        else:
            out.append(item.label)
    return out


def challenge_transform(root: AstNode) -> AstNode:
    """Anonymize: identifier leaves -> "ID", literal leaves -> "LIT".

    Structure labels and tree shape are untouched. The result is for model
    input, not reserialization (placeholders are deliberately uppercase).
    """
    # post-order rebuild with an explicit stack
    out: dict[int, AstNode] = {}
    todo: list[tuple[AstNode, bool]] = [(root, False)]
    while todo:
        node, expanded = todo.pop()
        if node.kind == KIND_IDENTIFIER:
            out[id(node)] = AstNode(ID_PLACEHOLDER, KIND_IDENTIFIER)
        elif node.kind == KIND_LITERAL:
            out[id(node)] = AstNode(LIT_PLACEHOLDER, KIND_LITERAL)
        elif not expanded and node.children:
            todo.append((node, True))
            todo.extend((c, False) for c in node.children)
        else:
            children = tuple(out[id(c)] for c in node.children)
            out[id(node)] = AstNode(node.label, KIND_STRUCTURE, children)
    return out[id(root)]


def challenge_strip_code(record):
    """Replace a record's code tokens with its anonymized flat AST."""
    ast = getattr(record, "ast", None)
    if ast is None:
        raise ValueError(f"record {record.id}: challenge mode requires an AST")
    return dataclasses.replace(record, code_tokens=flatten_ast(challenge_transform(ast)))


def count_nodes(root: AstNode) -> tuple[int, int]:
    """(total nodes, internal nodes)."""
    total = internal = 0
    todo = [root]
    while todo:
        node = todo.pop()
        total += 1
        if node.children:
            internal += 1
            todo.extend(node.children)
    return total, internal


def identifier_labels(root: AstNode) -> set[str]:
    """All identifier and literal labels in the tree (the anonymization target)."""
    found = set()
    todo = [root]
    while todo:
        node = todo.pop()
        if node.kind in (KIND_IDENTIFIER, KIND_LITERAL):
            found.add(node.label)
        todo.extend(node.children)
    return found
