"""Phase-I parsing: Dockerfile source text to a ``DOCKER-*`` tree.

Continuation lines are joined the way Docker joins them (the escape
character and newline are removed), comment lines are dropped, and each
instruction becomes one ``DOCKER-<NAME>`` child of ``DOCKER-FILE``. RUN
payloads are kept as a single raw ``BASH-LITERAL`` for the shell phase.
"""
from __future__ import annotations

import json
import re
import shlex
from dataclasses import dataclass, field

from .tree import AstNode, DocumentRoot

DIRECTIVES = frozenset({
    "FROM", "RUN", "CMD", "COPY", "ADD", "EXPOSE", "ENV", "ARG", "LABEL",
    "WORKDIR", "USER", "VOLUME", "ENTRYPOINT", "ONBUILD", "STOPSIGNAL",
    "HEALTHCHECK", "SHELL", "MAINTAINER",
})

PARSER_DIRECTIVES = ("escape", "syntax")

WARN_FIRST_NOT_FROM = "first-instruction-not-from"

_PARSER_DIRECTIVE_RE = re.compile(r"^\s*#\s*([A-Za-z][A-Za-z0-9_-]*)\s*=\s*(.*?)\s*$")
_INSTRUCTION_RE = re.compile(r"(\S+)\s*(.*)\Z", re.S)
_FLAG_RE = re.compile(r"\s*(--[A-Za-z][\w-]*(?:=\S*)?)(?:\s+|\Z)")


class DockerfileError(ValueError):
    pass


class EmptyFile(DockerfileError):
    def __init__(self) -> None:
        super().__init__("file contains no instructions")


class UnknownDirective(DockerfileError):
    def __init__(self, keyword: str, lineno: int | None = None):
        self.keyword = keyword
        self.lineno = lineno
        where = f" on line {lineno}" if lineno else ""
        super().__init__(f"unknown directive {keyword!r}{where}")


@dataclass(frozen=True)
class Instruction:
    keyword: str
    args: str
    lineno: int


@dataclass(frozen=True)
class ParsedDockerfile:
    root: AstNode
    directives: dict[str, str] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()


def is_known_directive(keyword: str) -> bool:
    return keyword.upper() in DIRECTIVES


def split_instructions(source: str) -> tuple[dict[str, str], list[Instruction]]:
    """Split source into parser directives and logical instructions."""
    lines = source.splitlines()
    directives: dict[str, str] = {}
    i = 0
    while i < len(lines):
        m = _PARSER_DIRECTIVE_RE.match(lines[i])
        if not m:
            break
        name = m.group(1).lower()
        if name not in PARSER_DIRECTIVES or name in directives:
            break
        directives[name] = m.group(2)
        i += 1

    escape = directives.get("escape", "\\")
    if escape not in ("\\", "`"):
        escape = "\\"

    instructions: list[Instruction] = []
    buf: list[str] | None = None
    start = 0
    for lineno in range(i + 1, len(lines) + 1):
        line = lines[lineno - 1]
        stripped = line.strip()
        if buf is None:
            if not stripped or stripped.startswith("#"):
                continue
            buf, start = [], lineno
            line = line.lstrip()
        elif not stripped or stripped.startswith("#"):
            # comment and blank lines inside a continuation are skipped
            continue
        body = line.rstrip()
        if body.endswith(escape):
            buf.append(body[:-1])
            continue
        buf.append(line)
        instructions.append(_make_instruction("".join(buf), start))
        buf = None
    if buf is not None:
        instructions.append(_make_instruction("".join(buf), start))
    return directives, instructions


def _make_instruction(text: str, lineno: int) -> Instruction:
    m = _INSTRUCTION_RE.match(text.strip())
    assert m is not None
    return Instruction(m.group(1), m.group(2).strip(), lineno)


def count_instructions(source: str) -> int:
    return len(split_instructions(source)[1])


def parse_instruction(inst: Instruction) -> AstNode:
    keyword = inst.keyword.upper()
    if keyword not in DIRECTIVES:
        raise UnknownDirective(keyword, inst.lineno)
    return AstNode(f"DOCKER-{keyword}", None, tuple(_BUILDERS[keyword](inst.args, inst.lineno)))


def parse_dockerfile_detailed(source: str) -> ParsedDockerfile:
    directives, instructions = split_instructions(source)
    if not instructions:
        raise EmptyFile()
    children = tuple(parse_instruction(inst) for inst in instructions)
    warnings = ()
    if instructions[0].keyword.upper() not in ("FROM", "ARG"):
        warnings = (WARN_FIRST_NOT_FROM,)
    return ParsedDockerfile(AstNode("DOCKER-FILE", None, children), directives, warnings)


def parse_dockerfile(source: str) -> AstNode:
    """Parse Dockerfile text into a ``DOCKER-FILE`` tree.

    Raises ``EmptyFile`` when nothing but comments and blank lines remain,
    and ``UnknownDirective`` for an unrecognized instruction keyword.
    """
    return parse_dockerfile_detailed(source).root


def parse_document(source: str | bytes, file_sha: str) -> DocumentRoot:
    if isinstance(source, bytes):
        source = source.decode("utf-8", errors="replace")
    parsed = parse_dockerfile_detailed(source)
    return DocumentRoot(
        file_sha=file_sha,
        root=parsed.root,
        representation="phase-1",
        directives=parsed.directives,
        flags=parsed.warnings,
    )


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    offending: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def validate_known_directives(root: AstNode) -> ValidationReport:
    bad = []
    for child in root.children:
        name = child.type[len("DOCKER-"):] if child.type.startswith("DOCKER-") else None
        if name not in DIRECTIVES:
            bad.append(child.type)
    return ValidationReport(not bad, tuple(bad))


# -- per-directive child builders ------------------------------------------


def _lit(node_type: str, value: str) -> AstNode:
    return AstNode(node_type, value)


def _take_flags(args: str) -> tuple[list[str], str]:
    flags = []
    while True:
        m = _FLAG_RE.match(args)
        if not m:
            return flags, args.strip()
        flags.append(m.group(1))
        args = args[m.end():]


def parse_exec_form(args: str) -> list[str] | None:
    """Return the JSON-array form of ``args``, or None for shell form."""
    if not args.lstrip().startswith("["):
        return None
    try:
        value = json.loads(args)
    except json.JSONDecodeError:
        return None
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return value
    return None


def _from(args, lineno):
    flags, rest = _take_flags(args)
    out = [_lit("DOCKER-FLAG", f) for f in flags]
    tokens = rest.split()
    if not tokens:
        return out
    image, tail = tokens[0], tokens[1:]
    digest = tag = None
    if "@" in image:
        image, digest = image.split("@", 1)
    slash = image.rfind("/")
    colon = image.rfind(":")
    if colon > slash:
        image, tag = image[:colon], image[colon + 1:]
    out.append(_lit("DOCKER-IMAGE-NAME", image))
    if tag is not None:
        out.append(_lit("DOCKER-IMAGE-TAG", tag))
    if digest is not None:
        out.append(_lit("DOCKER-IMAGE-DIGEST", digest))
    if len(tail) >= 2 and tail[0].upper() == "AS":
        out.append(_lit("DOCKER-FROM-ALIAS", tail[1]))
        tail = tail[2:]
    out.extend(_lit("DOCKER-EXTRA-ARG", t) for t in tail)
    return out


def _exec_or_shell(arg_type):
    def build(args, lineno):
        items = parse_exec_form(args)
        if items is None:
            return [_lit("BASH-LITERAL", args)] if args else []
        return [_lit(arg_type, item) for item in items]
    return build


def _paths(args, lineno):
    flags, rest = _take_flags(args)
    out = [_lit("DOCKER-FLAG", f) for f in flags]
    items = parse_exec_form(rest)
    if items is None:
        items = rest.split()
    if not items:
        return out
    out.extend(_lit("DOCKER-PATH-SRC", p) for p in items[:-1])
    out.append(_lit("DOCKER-PATH-DST", items[-1]))
    return out


def _split_words(args: str) -> list[str]:
    lex = shlex.shlex(args, posix=True)
    lex.whitespace_split = True
    lex.commenters = ""
    try:
        return list(lex)
    except ValueError:
        return args.split()


def _pairs(args, lineno, legacy=True):
    first = args.split(None, 1)
    if not first:
        return []
    if legacy and "=" not in first[0]:
        name = first[0]
        value = first[1].strip() if len(first) > 1 else ""
        return [_lit("DOCKER-NAME", name), _lit("DOCKER-VALUE", value)]
    out = []
    for word in _split_words(args):
        name, eq, value = word.partition("=")
        out.append(_lit("DOCKER-NAME", name))
        if eq:
            out.append(_lit("DOCKER-VALUE", value))
    return out


def _arg(args, lineno):
    return _pairs(args, lineno, legacy=False)


def _single(node_type):
    def build(args, lineno):
        return [_lit(node_type, args)] if args else []
    return build


def _ports(args, lineno):
    return [_lit("DOCKER-PORT", p) for p in args.split()]


def _volume(args, lineno):
    items = parse_exec_form(args)
    if items is None:
        items = args.split()
    return [_lit("DOCKER-PATH", p) for p in items]


def _onbuild(args, lineno):
    m = _INSTRUCTION_RE.match(args)
    if not m:
        return []
    return [parse_instruction(Instruction(m.group(1), m.group(2).strip(), lineno))]


def _healthcheck(args, lineno):
    if args.upper() == "NONE":
        return [_lit("DOCKER-LITERAL", args)]
    flags, rest = _take_flags(args)
    out = [_lit("DOCKER-FLAG", f) for f in flags]
    m = _INSTRUCTION_RE.match(rest)
    if m and m.group(1).upper() == "CMD":
        out.append(parse_instruction(Instruction(m.group(1), m.group(2).strip(), lineno)))
    elif rest:
        out.append(_lit("DOCKER-LITERAL", rest))
    return out


def _shell(args, lineno):
    items = parse_exec_form(args)
    if items is None:
        return [_lit("DOCKER-LITERAL", args)] if args else []
    return [_lit("DOCKER-SHELL-ARG", item) for item in items]


_BUILDERS = {
    "FROM": _from,
    "RUN": _exec_or_shell("DOCKER-RUN-ARG"),
    "CMD": _exec_or_shell("DOCKER-CMD-ARG"),
    "ENTRYPOINT": _exec_or_shell("DOCKER-ENTRYPOINT-ARG"),
    "COPY": _paths,
    "ADD": _paths,
    "EXPOSE": _ports,
    "ENV": _pairs,
    "LABEL": _pairs,
    "ARG": _arg,
    "WORKDIR": _single("DOCKER-PATH"),
    "USER": _single("DOCKER-USER-NAME"),
    "VOLUME": _volume,
    "ONBUILD": _onbuild,
    "STOPSIGNAL": _single("DOCKER-SIGNAL"),
    "HEALTHCHECK": _healthcheck,
    "SHELL": _shell,
    "MAINTAINER": _single("DOCKER-LITERAL"),
}


# -- reconstruction --------------------------------------------------------

_SAFE_WORD_RE = re.compile(r"[^\s\"'\\]+\Z")


def _quote(value: str) -> str:
    if _SAFE_WORD_RE.match(value):
        return value
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _has_ws(items) -> bool:
    return any(not i or re.search(r"\s", i) for i in items)


def format_instruction(node: AstNode) -> str:
    keyword = node.type[len("DOCKER-"):]
    kids = node.children
    flags = [c.value for c in kids if c.type == "DOCKER-FLAG"]
    rest = [c for c in kids if c.type != "DOCKER-FLAG"]
    parts: list[str] = [keyword, *flags]

    if keyword == "FROM":
        image = ""
        for c in rest:
            if c.type == "DOCKER-IMAGE-NAME":
                image = c.value
            elif c.type == "DOCKER-IMAGE-TAG":
                image += ":" + c.value
            elif c.type == "DOCKER-IMAGE-DIGEST":
                image += "@" + c.value
        if image:
            parts.append(image)
        parts += [f"AS {c.value}" for c in rest if c.type == "DOCKER-FROM-ALIAS"]
        parts += [c.value for c in rest if c.type == "DOCKER-EXTRA-ARG"]
    elif keyword in ("RUN", "CMD", "ENTRYPOINT", "SHELL"):
        if len(rest) == 1 and rest[0].type in ("BASH-LITERAL", "DOCKER-LITERAL"):
            parts.append(rest[0].value)
        elif rest:
            parts.append(json.dumps([c.value for c in rest]))
        elif keyword != "RUN":
            parts.append("[]")
    elif keyword in ("COPY", "ADD"):
        items = [c.value for c in rest]
        parts.append(json.dumps(items) if _has_ws(items) else " ".join(items))
    elif keyword == "VOLUME":
        items = [c.value for c in rest]
        parts.append(json.dumps(items) if _has_ws(items) or not items else " ".join(items))
    elif keyword in ("ENV", "LABEL", "ARG"):
        words, i = [], 0
        while i < len(rest):
            name = rest[i].value
            if i + 1 < len(rest) and rest[i + 1].type == "DOCKER-VALUE":
                words.append(f"{name}={_quote(rest[i + 1].value)}")
                i += 2
            else:
                words.append(name)
                i += 1
        parts += words
    elif keyword in ("ONBUILD", "HEALTHCHECK"):
        for c in rest:
            parts.append(format_instruction(c) if c.type.startswith("DOCKER-") and c.type in _NESTED else c.value)
    else:
        parts += [c.value for c in rest]
    return " ".join(p for p in parts if p != "")


_NESTED = {f"DOCKER-{d}" for d in DIRECTIVES}


def format_dockerfile(root: AstNode, directives: dict[str, str] | None = None) -> str:
    """Render a Phase-I tree back to Dockerfile text."""
    lines = [f"# {k}={v}" for k, v in (directives or {}).items()]
    lines += [format_instruction(child) for child in root.children]
    return "\n".join(lines) + "\n"
