"""Canonical JSONL encoding of documents.

Each document is one JSON object on one line. Keys are emitted in a fixed
order (``file_sha``, ``type``, ``value``, ``children``, then stage metadata)
without insignificant whitespace, so equal documents encode to equal bytes.
"""
from __future__ import annotations

import gzip
import io
import json
import lzma
from pathlib import Path
from typing import IO, Any, Iterable, Iterator

from .tree import AstNode, DocumentRoot, NodeTypeError

_NODE_KEYS = frozenset({"type", "value", "children"})
_DOC_KEYS = frozenset({"file_sha", "type", "value", "children", "rep", "directives", "flags"})


class DecodeError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + message)


def node_to_obj(node: AstNode) -> dict[str, Any]:
    obj: dict[str, Any] = {"type": node.type}
    if node.value is not None:
        obj["value"] = node.value
    obj["children"] = [node_to_obj(c) for c in node.children]
    return obj


def doc_to_obj(doc: DocumentRoot) -> dict[str, Any]:
    obj: dict[str, Any] = {"file_sha": doc.file_sha}
    obj.update(node_to_obj(doc.root))
    if doc.representation is not None:
        obj["rep"] = doc.representation
    if doc.directives:
        obj["directives"] = {k: doc.directives[k] for k in sorted(doc.directives)}
    if doc.flags:
        obj["flags"] = list(doc.flags)
    for key in sorted(doc.extra):
        obj[key] = doc.extra[key]
    return obj


def dumps_compact(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def serialize_jsonl(doc: DocumentRoot) -> str:
    """Encode ``doc`` as a single line (no trailing newline)."""
    return dumps_compact(doc_to_obj(doc))


def obj_to_node(obj: Any, *, strict: bool = True) -> AstNode:
    if not isinstance(obj, dict):
        raise ValueError(f"node must be a JSON object, got {type(obj).__name__}")
    if strict:
        unknown = set(obj) - _NODE_KEYS
        if unknown:
            raise ValueError(f"unknown node keys {sorted(unknown)}")
    if "type" not in obj:
        raise ValueError("node without 'type'")
    value = obj.get("value")
    if value is not None and not isinstance(value, str):
        raise ValueError(f"node value must be a string, got {value!r}")
    children = obj.get("children", [])
    if not isinstance(children, list):
        raise ValueError("'children' must be a list")
    return AstNode(obj["type"], value, tuple(obj_to_node(c, strict=strict) for c in children))


def obj_to_doc(obj: Any, *, strict: bool = True) -> DocumentRoot:
    if not isinstance(obj, dict):
        raise ValueError("document must be a JSON object")
    extra = {k: v for k, v in obj.items() if k not in _DOC_KEYS}
    if strict and extra:
        raise ValueError(f"unknown document keys {sorted(extra)}")
    if "file_sha" not in obj:
        raise ValueError("document without 'file_sha'")
    root = obj_to_node({k: obj[k] for k in ("type", "value", "children") if k in obj}, strict=strict)
    flags = obj.get("flags", [])
    directives = obj.get("directives", {})
    if not isinstance(flags, list) or not all(isinstance(f, str) for f in flags):
        raise ValueError("'flags' must be a list of strings")
    if not isinstance(directives, dict):
        raise ValueError("'directives' must be an object")
    return DocumentRoot(
        file_sha=obj["file_sha"],
        root=root,
        representation=obj.get("rep"),
        directives=directives,
        flags=tuple(flags),
        extra=extra,
        allow_legacy_sha=not strict,
    )


def deserialize_jsonl(line: str, *, strict: bool = True, lineno: int | None = None) -> DocumentRoot:
    """Decode one line. ``strict=False`` keeps unknown top-level keys in
    ``extra``, ignores unknown node keys and accepts 40-hex legacy ids."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DecodeError(f"malformed JSON: {exc.msg}", lineno) from None
    try:
        return obj_to_doc(obj, strict=strict)
    except (ValueError, TypeError, NodeTypeError) as exc:
        raise DecodeError(str(exc), lineno) from None


def open_text(path: str | Path, mode: str = "r") -> IO[str]:
    """Open plain, ``.xz`` or ``.gz`` files as UTF-8 text by suffix."""
    path = Path(path)
    if path.suffix == ".xz":
        return lzma.open(path, mode + "t", encoding="utf-8")
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8", newline="\n")


def iter_jsonl(path: str | Path, *, strict: bool = True) -> Iterator[DocumentRoot]:
    with open_text(path) as fh:
        yield from parse_lines(fh, strict=strict)


def parse_lines(lines: Iterable[str], *, strict: bool = True) -> Iterator[DocumentRoot]:
    for lineno, line in enumerate(lines, 1):
        if line.strip():
            yield deserialize_jsonl(line, strict=strict, lineno=lineno)


def read_jsonl(path: str | Path, *, strict: bool = True) -> list[DocumentRoot]:
    return list(iter_jsonl(path, strict=strict))


def encode_documents(docs: Iterable[DocumentRoot]) -> bytes:
    buf = io.StringIO()
    for doc in docs:
        buf.write(serialize_jsonl(doc))
        buf.write("\n")
    return buf.getvalue().encode("utf-8")


def write_jsonl(path: str | Path, docs: Iterable[DocumentRoot]) -> None:
    path = Path(path)
    data = encode_documents(docs)
    if path.suffix == ".xz":
        data = lzma.compress(data)
    elif path.suffix == ".gz":
        data = gzip.compress(data, mtime=0)
    path.write_bytes(data)
