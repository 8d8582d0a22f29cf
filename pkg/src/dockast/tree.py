"""Typed tree nodes shared by every representation, plus navigation helpers.

Trees are immutable: every rewrite returns a new tree and leaves its input
untouched, so documents can be shared freely between worker processes.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Iterator, Mapping, Sequence

Path = tuple[int, ...]

NODE_TYPE_RE = re.compile(r"[A-Z0-9]+(?:-[A-Z0-9]+)*\Z")

# MAYBE covers MAYBE-SEMANTIC-COMMAND, the one Phase-II tag outside the
# four families.
NODE_TYPE_FAMILIES = frozenset({"DOCKER", "BASH", "SC", "ABS", "UNKNOWN", "MAYBE"})

SHA_RE = re.compile(r"[0-9a-f]{64}\Z")
LEGACY_SHA_RE = re.compile(r"[0-9a-f]{40}\Z")


class NodeTypeError(ValueError):
    """Raised when a node tag violates the node-type grammar."""


class PathError(LookupError):
    """Raised when a child-index path does not address a node."""


@lru_cache(maxsize=4096)
def is_valid_node_type(tag: str) -> bool:
    if not isinstance(tag, str) or not NODE_TYPE_RE.match(tag):
        return False
    return tag.split("-", 1)[0] in NODE_TYPE_FAMILIES


def check_node_type(tag: str) -> str:
    if not is_valid_node_type(tag):
        raise NodeTypeError(f"invalid node type {tag!r}")
    return tag


@dataclass(frozen=True)
class AstNode:
    type: str
    value: str | None = None
    children: tuple[AstNode, ...] = ()

    def __post_init__(self) -> None:
        check_node_type(self.type)
        if self.value is not None and not isinstance(self.value, str):
            raise TypeError(f"node value must be str or None, got {type(self.value).__name__}")
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))
        for child in self.children:
            if not isinstance(child, AstNode):
                raise TypeError(f"child of {self.type} is not an AstNode: {child!r}")

    def with_children(self, children: Sequence[AstNode]) -> AstNode:
        return AstNode(self.type, self.value, tuple(children))

    def child_types(self) -> list[str]:
        return [c.type for c in self.children]

    def __repr__(self) -> str:
        bits = [self.type]
        if self.value is not None:
            bits.append(repr(self.value))
        if self.children:
            bits.append("[" + ", ".join(repr(c) for c in self.children) + "]")
        return " ".join(bits)


def leaf(node_type: str, value: str | None = None) -> AstNode:
    return AstNode(node_type, value)


def branch(node_type: str, *children: AstNode, value: str | None = None) -> AstNode:
    return AstNode(node_type, value, children)


@dataclass(frozen=True)
class DocumentRoot:
    """One Dockerfile's tree, keyed by the SHA-256 of its source bytes.

    ``representation`` marks which stage produced the document;
    ``directives`` holds parser directives such as ``escape``; ``flags``
    records soft per-file failures; ``extra`` carries unknown top-level keys
    read in permissive mode.
    """

    file_sha: str
    root: AstNode
    representation: str | None = None
    directives: Mapping[str, str] = field(default_factory=dict, hash=False)
    flags: tuple[str, ...] = ()
    extra: Mapping[str, Any] = field(default_factory=dict, hash=False)
    allow_legacy_sha: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        ok = SHA_RE.match(self.file_sha or "") or (
            self.allow_legacy_sha and LEGACY_SHA_RE.match(self.file_sha or "")
        )
        if not ok:
            raise ValueError(f"file_sha must be 64 lowercase hex chars, got {self.file_sha!r}")
        if self.root.type != "DOCKER-FILE":
            raise ValueError(f"document root must be DOCKER-FILE, got {self.root.type}")
        object.__setattr__(self, "flags", tuple(sorted(set(self.flags))))
        object.__setattr__(self, "directives", dict(self.directives))
        object.__setattr__(self, "extra", dict(self.extra))

    def replace(self, **changes: Any) -> DocumentRoot:
        fields = {
            "file_sha": self.file_sha,
            "root": self.root,
            "representation": self.representation,
            "directives": self.directives,
            "flags": self.flags,
            "extra": self.extra,
            "allow_legacy_sha": self.allow_legacy_sha,
        }
        fields.update(changes)
        return DocumentRoot(**fields)


def walk(root: AstNode) -> Iterator[tuple[Path, AstNode]]:
    """Pre-order traversal yielding ``(path, node)`` pairs."""
    stack: list[tuple[Path, AstNode]] = [((), root)]
    while stack:
        path, node = stack.pop()
        yield path, node
        for i in range(len(node.children) - 1, -1, -1):
            stack.append((path + (i,), node.children[i]))


def find_subtrees(
    root: AstNode, predicate: Callable[[AstNode], bool]
) -> list[tuple[Path, AstNode]]:
    return [(path, node) for path, node in walk(root) if predicate(node)]


def of_type(*types: str) -> Callable[[AstNode], bool]:
    wanted = frozenset(types)
    return lambda node: node.type in wanted


def get_subtree(root: AstNode, path: Sequence[int]) -> AstNode:
    node = root
    for depth, idx in enumerate(path):
        if not isinstance(idx, int) or idx < 0 or idx >= len(node.children):
            raise PathError(f"path {tuple(path)} is invalid at depth {depth}")
        node = node.children[idx]
    return node


def replace_subtree(root: AstNode, path: Sequence[int], replacement: AstNode) -> AstNode:
    if not path:
        return replacement
    idx = path[0]
    if not isinstance(idx, int) or idx < 0 or idx >= len(root.children):
        raise PathError(f"path {tuple(path)} does not address a child of {root.type}")
    children = list(root.children)
    children[idx] = replace_subtree(children[idx], path[1:], replacement)
    return root.with_children(children)


def count_nodes(root: AstNode) -> int:
    return sum(1 for _ in walk(root))


def transform(root: AstNode, fn: Callable[[AstNode], AstNode]) -> AstNode:
    """Rebuild bottom-up, applying ``fn`` to each node after its children."""
    children = tuple(transform(c, fn) for c in root.children)
    if any(new is not old for new, old in zip(children, root.children)):
        root = root.with_children(children)
    return fn(root)
