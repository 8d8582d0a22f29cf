"""Phase-III rewriting of Phase-II documents with command schemas."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from .schema import CommandSchema, WordArg, parse_words
from .shell import MSC, literal_text
from .tree import AstNode, DocumentRoot, Path, replace_subtree, walk


@dataclass(frozen=True)
class Substitution:
    path: Path
    original: AstNode
    replacement: AstNode


def command_words(msc: AstNode) -> tuple[list[AstNode], list[WordArg], list[AstNode]]:
    """Split a MAYBE-SEMANTIC-COMMAND into (assignments, words, redirections)."""
    assigns, words, redirs = [], [], []
    for child in msc.children:
        if child.type == "BASH-COMMAND-COMMAND" or child.type == "BASH-COMMAND-ARGS":
            words += [WordArg(literal_text(w), w) for w in child.children]
        elif child.type == "BASH-REDIRECT":
            redirs.append(child)
        else:
            assigns.append(child)
    return assigns, words, redirs


def enrich_command(msc: AstNode, schemas: Mapping[str, CommandSchema]) -> AstNode | None:
    assigns, words, redirs = command_words(msc)
    if not words or words[0].text is None:
        return None
    schema = schemas.get(words[0].text)
    if schema is None:
        return None
    parsed = parse_words(schema, words)
    if parsed is None:
        return None
    if assigns or redirs:
        # prefix assignments and redirections survive around the parsed words
        parsed = parsed.with_children((*assigns, *parsed.children, *redirs))
    return parsed


def enrich_with_log(doc: DocumentRoot, schemas: Mapping[str, CommandSchema]) -> tuple[DocumentRoot, list[Substitution]]:
    log: list[Substitution] = []

    def visit(node: AstNode, path: Path) -> AstNode:
        if node.type == MSC:
            replacement = enrich_command(node, schemas)
            if replacement is not None:
                log.append(Substitution(path, node, replacement))
                node = replacement
        if not node.children:
            return node
        children = tuple(visit(c, path + (i,)) for i, c in enumerate(node.children))
        if any(a is not b for a, b in zip(children, node.children)):
            node = node.with_children(children)
        return node

    root = visit(doc.root, ())
    return doc.replace(root=root, representation="phase-3"), log


def enrich(doc: DocumentRoot, schemas: Mapping[str, CommandSchema]) -> DocumentRoot:
    """Replace every MAYBE-SEMANTIC-COMMAND that a schema parses with its
    ``SC-*`` tree; everything else is left as it was."""
    return enrich_with_log(doc, schemas)[0]


def restore(doc: DocumentRoot, log: Iterable[Substitution]) -> DocumentRoot:
    """Undo :func:`enrich_with_log` by putting the logged originals back."""
    root = doc.root
    for sub in reversed(list(log)):
        root = replace_subtree(root, sub.path, sub.original)
    return doc.replace(root=root, representation="phase-2")


def command_counts(docs: Iterable[DocumentRoot]) -> Counter:
    counts: Counter = Counter()
    for doc in docs:
        for _, node in walk(doc.root):
            if node.type == "BASH-COMMAND-COMMAND" and node.children:
                name = literal_text(node.children[0])
                if name is not None:
                    counts[name] += 1
    return counts


def rank_commands(docs: Iterable[DocumentRoot], n: int) -> list[tuple[str, int]]:
    """Most frequent command names, ties broken alphabetically."""
    if n < 1:
        raise ValueError("n must be at least 1")
    ranked = sorted(command_counts(docs).items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:n]
