"""Named regular-expression abstractions over literal values.

Every node that carries a value is tested against each table entry in
order; a match appends an empty ``ABS-<NAME>`` child after the node's
existing children. The pass only adds nodes, so stripping every ``ABS-*``
node gives back the input.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

from .tree import AstNode, DocumentRoot, NodeTypeError, check_node_type, transform


class TableError(ValueError):
    pass


@dataclass(frozen=True)
class Abstraction:
    name: str
    pattern: re.Pattern

    @property
    def node_type(self) -> str:
        return "ABS-" + self.name


@dataclass(frozen=True)
class AbstractionTable:
    entries: tuple[Abstraction, ...]

    def __post_init__(self) -> None:
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise TableError("abstraction names must be unique")
        for entry in self.entries:
            try:
                check_node_type(entry.node_type)
            except NodeTypeError as exc:
                raise TableError(str(exc)) from None

    @classmethod
    def of(cls, pairs: Iterable[tuple[str, str]]) -> AbstractionTable:
        try:
            return cls(tuple(Abstraction(name, re.compile(rx)) for name, rx in pairs))
        except re.error as exc:
            raise TableError(f"bad pattern: {exc}") from None

    def matches(self, value: str) -> list[str]:
        return [e.node_type for e in self.entries if e.pattern.search(value)]

    def __len__(self) -> int:
        return len(self.entries)


def parse_table(text: str) -> AbstractionTable:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        name, tab, pattern = line.partition("\t")
        if not tab or not name.strip():
            raise TableError(f"line {lineno}: expected NAME<TAB>pattern")
        pairs.append((name.strip(), pattern))
    return AbstractionTable.of(pairs)


def load_table(path: str | Path) -> AbstractionTable:
    return parse_table(Path(path).read_text(encoding="utf-8"))


def default_table() -> AbstractionTable:
    text = (resources.files("dockast") / "data" / "abstractions.tsv").read_text(encoding="utf-8")
    return parse_table(text)


def abstract_node(root: AstNode, table: AbstractionTable) -> AstNode:
    def tag(node: AstNode) -> AstNode:
        if node.value is None:
            return node
        extra = tuple(AstNode(t) for t in table.matches(node.value))
        return node.with_children(node.children + extra) if extra else node

    return transform(root, tag)


def abstract_document(doc: DocumentRoot, table: AbstractionTable) -> DocumentRoot:
    return doc.replace(root=abstract_node(doc.root, table), representation="abstracted")


def strip_node(root: AstNode) -> AstNode:
    def strip(node: AstNode) -> AstNode:
        if any(c.type.startswith("ABS-") for c in node.children):
            return node.with_children(c for c in node.children if not c.type.startswith("ABS-"))
        return node

    return transform(root, strip)


def strip_abstractions(doc: DocumentRoot) -> DocumentRoot:
    rep = "phase-3" if doc.representation == "abstracted" else doc.representation
    return doc.replace(root=strip_node(doc.root), representation=rep)
