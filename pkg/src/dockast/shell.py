"""Phase-II parsing: embedded shell in RUN instructions to ``BASH-*`` trees.

The grammar covers command lists (``;``, newline, ``&``), ``&&``/``||``
chains, pipelines, simple commands with prefix assignments and
redirections, array assignments, quoting, parameter and command
substitution, subshells and brace groups. Anything else (compound
keywords, function definitions, heredocs, arithmetic) is kept verbatim in
an ``UNKNOWN-BASH-FRAGMENT`` leaf.

Newline-separated statements become sibling children of ``BASH-SCRIPT``.
Statements joined by ``;`` or ``&`` on one line sit under ``BASH-SEMI``;
``&&``, ``||`` and ``|`` runs become ``BASH-AND-IF``, ``BASH-OR-IF`` and
``BASH-PIPE`` nodes over their operands.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .tree import AstNode, DocumentRoot, transform

PARSE_ERROR_FLAG = "shell-parse-error"

MSC = "MAYBE-SEMANTIC-COMMAND"
UNKNOWN = "UNKNOWN-BASH-FRAGMENT"

CONNECTORS = {"&&": "BASH-AND-IF", "||": "BASH-OR-IF"}
SEPARATORS = frozenset({";", "&", "\n"})

_REDIR_OPS = ("&>>", "<<<", "<<-", "&>", ">>", "<<", "<>", "<&", ">&", ">|", "<", ">")
_CONTROL_OPS = ("&&", "||", "|&", ";;", ";", "&", "|", "(", ")", "\n")
_META = frozenset(" \t\n;&|()<>")

_ASSIGN_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*(?:\[[^\]]*\])?)(\+?=)")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")

_OPENERS = frozenset({"if", "case", "for", "while", "until", "select"})
_CLOSERS = frozenset({"fi", "esac", "done"})
_COMPOUND_START = _OPENERS | {"function", "[["}
_RESERVED = frozenset({"then", "else", "elif", "do", "in", "!"}) | _CLOSERS


class ShellParseError(ValueError):
    """Raised for input the lexer cannot delimit, e.g. an unterminated quote."""


class _Unsupported(Exception):
    pass


# -- tokens ----------------------------------------------------------------


@dataclass
class Word:
    parts: list
    start: int
    end: int

    def plain(self) -> str | None:
        """The text of a word made of a single unquoted literal part."""
        if len(self.parts) == 1 and self.parts[0][0] == "lit":
            return self.parts[0][1]
        return None


@dataclass
class ArrayAssign:
    name: str
    op: str
    elements: list
    start: int
    end: int


@dataclass
class Op:
    op: str
    start: int
    end: int
    redirect: bool = False


class _Lexer:
    def __init__(self, src: str):
        self.src = src
        self.n = len(src)

    def tokens(self) -> list:
        src, n = self.src, self.n
        out: list = []
        i = 0
        while i < n:
            c = src[i]
            if c in " \t\r":
                i += 1
            elif c == "\\" and src.startswith("\\\n", i):
                i += 2
            elif c == "#":
                j = src.find("\n", i)
                i = n if j < 0 else j
            elif c.isdigit() and (m := re.match(r"\d+(?=[<>])", src[i:])):
                op = self._redirect_at(i + m.end())
                out.append(Op(m.group(0) + op, i, i + m.end() + len(op), True))
                i += m.end() + len(op)
            elif c in "<>" and src.startswith(("<(", ">("), i):
                j = self._match_paren(i + 1)
                out.append(Word([("procsub", src[i:j + 1])], i, j + 1))
                i = j + 1
            elif c in "<>" or src.startswith(("&>", "&>>"), i):
                op = self._redirect_at(i)
                out.append(Op(op, i, i + len(op), True))
                i += len(op)
            elif c in _META:
                op = next(o for o in _CONTROL_OPS if src.startswith(o, i))
                out.append(Op(op, i, i + len(op)))
                i += len(op)
            else:
                tok, i = self._word(i)
                out.append(tok)
        return out

    def _redirect_at(self, i: int) -> str:
        for op in _REDIR_OPS:
            if self.src.startswith(op, i):
                return op
        raise ShellParseError(f"expected redirection at offset {i}")

    def _match_paren(self, i: int) -> int:
        """Index of the ``)`` closing the ``(`` at ``i``, quote-aware."""
        src, depth = self.src, 0
        while i < self.n:
            c = src[i]
            if c == "\\":
                i += 2
                continue
            if c == "'":
                j = src.find("'", i + 1)
                if j < 0:
                    raise ShellParseError("unterminated single quote")
                i = j + 1
                continue
            if c == '"':
                _, i = self._double(i + 1)
                continue
            if c == "(":
                depth += 1
            elif c == ")":
                depth -= 1
                if depth == 0:
                    return i
            i += 1
        raise ShellParseError("unterminated parenthesis")

    def _word(self, i: int):
        src, n = self.src, self.n
        start = i
        parts: list = []
        buf: list[str] = []

        def flush():
            if buf:
                parts.append(("lit", "".join(buf)))
                buf.clear()

        while i < n:
            c = src[i]
            if c == "(" and not parts and buf and _ASSIGN_RE.fullmatch("".join(buf)):
                m = _ASSIGN_RE.fullmatch("".join(buf))
                return self._array(m.group(1), m.group(2), start, i + 1)
            if c in _META:
                break
            if c == "\\":
                if i + 1 < n:
                    if src[i + 1] != "\n":
                        buf.append(src[i + 1])
                    i += 2
                else:
                    buf.append("\\")
                    i += 1
            elif c == "'":
                j = src.find("'", i + 1)
                if j < 0:
                    raise ShellParseError(f"unterminated single quote at offset {i}")
                flush()
                parts.append(("sq", src[i + 1:j]))
                i = j + 1
            elif c == '"':
                flush()
                sub, i = self._double(i + 1)
                parts.append(("dq", sub))
            elif c == "$":
                part, j = self._dollar(i)
                if part is None:
                    buf.append("$")
                else:
                    flush()
                    parts.append(part)
                i = j
            elif c == "`":
                flush()
                part, i = self._backtick(i)
                parts.append(part)
            else:
                buf.append(c)
                i += 1
        flush()
        return Word(parts, start, i), i

    def _array(self, name: str, op: str, start: int, i: int):
        src, n = self.src, self.n
        elements = []
        while True:
            while i < n and src[i] in " \t\r\n":
                i += 1
            if src.startswith("\\\n", i):
                i += 2
                continue
            if i >= n:
                raise ShellParseError("unterminated array assignment")
            if src[i] == ")":
                return ArrayAssign(name, op, elements, start, i + 1), i + 1
            if src[i] == "#":
                j = src.find("\n", i)
                i = n if j < 0 else j
                continue
            if src[i] in _META:
                raise _Unsupported(f"unexpected {src[i]!r} in array")
            word, i = self._word(i)
            elements.append(word)

    def _double(self, i: int):
        src, n = self.src, self.n
        parts: list = []
        buf: list[str] = []
        while i < n:
            c = src[i]
            if c == '"':
                if buf:
                    parts.append(("lit", "".join(buf)))
                return parts, i + 1
            if c == "\\" and i + 1 < n and src[i + 1] in '$`"\\\n':
                if src[i + 1] != "\n":
                    buf.append(src[i + 1])
                i += 2
                continue
            if c in "$`":
                part, j = self._dollar(i) if c == "$" else self._backtick(i)
                if part is None:
                    buf.append("$")
                else:
                    if buf:
                        parts.append(("lit", "".join(buf)))
                        buf = []
                    parts.append(part)
                i = j
                continue
            buf.append(c)
            i += 1
        raise ShellParseError("unterminated double quote")

    def _dollar(self, i: int):
        src, n = self.src, self.n
        nxt = src[i + 1] if i + 1 < n else ""
        if nxt == "{":
            depth, j = 0, i + 1
            while j < n:
                if src[j] == "\\":
                    j += 2
                    continue
                if src[j] == "{":
                    depth += 1
                elif src[j] == "}":
                    depth -= 1
                    if depth == 0:
                        return ("var", src[i + 2:j]), j + 1
                j += 1
            raise ShellParseError("unterminated ${")
        if nxt == "(":
            j = self._match_paren(i + 1)
            if src.startswith("((", i + 1):
                return ("arith", src[i:j + 1]), j + 1
            return ("cmdsub", src[i + 2:j]), j + 1
        if nxt == "'":
            j = i + 2
            while j < n and src[j] != "'":
                j += 2 if src[j] == "\\" else 1
            if j >= n:
                raise ShellParseError("unterminated $'...' quote")
            return ("sq", src[i + 2:j]), j + 1
        if nxt == '"':
            sub, j = self._double(i + 2)
            return ("dq", sub), j
        m = _NAME_RE.match(src, i + 1)
        if m:
            return ("var", m.group(0)), m.end()
        if nxt and nxt in "0123456789@*#?$!-":
            return ("var", nxt), i + 2
        return None, i + 1

    def _backtick(self, i: int):
        src = self.src
        j = i + 1
        while j < self.n:
            if src[j] == "\\":
                j += 2
                continue
            if src[j] == "`":
                inner = re.sub(r"\\([`$\\])", r"\1", src[i + 1:j])
                return ("cmdsub", inner), j + 1
            j += 1
        raise ShellParseError("unterminated backquote")


def tokenize(src: str) -> list:
    return _Lexer(src).tokens()


# -- words to nodes --------------------------------------------------------


def _part_node(part) -> AstNode:
    kind, payload = part
    if kind == "lit":
        return AstNode("BASH-LITERAL", payload)
    if kind == "sq":
        return AstNode("BASH-SINGLE-QUOTED", payload)
    if kind == "var":
        return AstNode("BASH-VARIABLE", payload)
    if kind == "dq":
        return AstNode("BASH-DOUBLE-QUOTED", None, tuple(_part_node(p) for p in payload))
    if kind == "cmdsub":
        try:
            return AstNode("BASH-COMMAND-SUBSTITUTION", None, (parse_shell(payload),))
        except ShellParseError:
            return AstNode(UNKNOWN, "$(" + payload + ")")
    return AstNode(UNKNOWN, payload)


def _parts_node(parts: list) -> AstNode:
    if len(parts) == 1:
        return _part_node(parts[0])
    if not parts:
        return AstNode("BASH-LITERAL", "")
    return AstNode("BASH-CONCAT", None, tuple(_part_node(p) for p in parts))


def word_node(word: Word) -> AstNode:
    return _parts_node(word.parts)


def literal_text(node: AstNode) -> str | None:
    """Static text of a word node, or None when it depends on expansions."""
    if node.type in ("BASH-LITERAL", "BASH-SINGLE-QUOTED"):
        return node.value
    if node.type in ("BASH-DOUBLE-QUOTED", "BASH-CONCAT"):
        pieces = []
        for child in node.children:
            text = literal_text(child)
            if text is None:
                return None
            pieces.append(text)
        return "".join(pieces)
    return None


def _assignment(word: Word) -> AstNode | None:
    if not word.parts or word.parts[0][0] != "lit":
        return None
    m = _ASSIGN_RE.match(word.parts[0][1])
    if not m:
        return None
    rest_lit = word.parts[0][1][m.end():]
    rhs_parts = ([("lit", rest_lit)] if rest_lit else []) + word.parts[1:]
    rhs = (_parts_node(rhs_parts),) if rhs_parts else ()
    return _assign_node(m.group(1), m.group(2), rhs)


def _assign_node(name: str, op: str, rhs: tuple) -> AstNode:
    return AstNode(
        "BASH-ASSIGN",
        "+=" if op == "+=" else None,
        (AstNode("BASH-ASSIGN-LHS", name), AstNode("BASH-ASSIGN-RHS", None, rhs)),
    )


def _array_node(tok: ArrayAssign) -> AstNode:
    array = AstNode("BASH-ARRAY", None, tuple(word_node(w) for w in tok.elements))
    return _assign_node(tok.name, tok.op, (array,))


# -- parser ----------------------------------------------------------------


class _Parser:
    def __init__(self, src: str, tokens: list):
        self.src = src
        self.toks = tokens
        self.pos = 0

    def peek(self, k: int = 0):
        j = self.pos + k
        return self.toks[j] if j < len(self.toks) else None

    def at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return isinstance(tok, Op) and not tok.redirect and tok.op in ops

    def at_word(self, text: str) -> bool:
        tok = self.peek()
        return isinstance(tok, Word) and tok.plain() == text

    def skip_newlines(self) -> None:
        while self.at_op("\n"):
            self.pos += 1

    def fragment(self, start: int, end: int | None = None) -> AstNode:
        begin = self.toks[start].start
        stop = len(self.src) if end is None else self.toks[end - 1].end
        return AstNode(UNKNOWN, self.src[begin:stop].strip())

    def script(self, terminator: str | None = None, top: bool = False) -> list[AstNode]:
        statements: list[AstNode] = []
        line: list[AstNode] = []

        def flush() -> None:
            if len(line) == 1:
                statements.append(line[0])
            elif line:
                statements.append(AstNode("BASH-SEMI", None, tuple(line)))
            line.clear()

        while True:
            while self.at_op(*SEPARATORS):
                if self.peek().op == "\n":
                    flush()
                self.pos += 1
            tok = self.peek()
            if tok is None:
                break
            if terminator == ")" and self.at_op(")"):
                break
            if terminator == "}" and self.at_word("}"):
                break
            start = self.pos
            try:
                node = self.and_or()
                if self.peek() is not None and not self.at_op(*SEPARATORS):
                    if not (terminator == ")" and self.at_op(")")) and not (
                        terminator == "}" and self.at_word("}")
                    ):
                        raise _Unsupported("unexpected token")
                line.append(node)
            except _Unsupported:
                if not top:
                    raise
                line.append(self.fragment(start))
                self.pos = len(self.toks)
        flush()
        return statements

    def and_or(self) -> AstNode:
        node = self.pipeline()
        operands = [node]
        current = None
        while self.at_op("&&", "||"):
            op = self.peek().op
            self.pos += 1
            self.skip_newlines()
            rhs = self.pipeline()
            if current is None or op == current:
                operands.append(rhs)
            else:
                operands = [AstNode(CONNECTORS[current], None, tuple(operands)), rhs]
            current = op
        if current is None:
            return node
        return AstNode(CONNECTORS[current], None, tuple(operands))

    def pipeline(self) -> AstNode:
        negate = False
        if self.at_word("!"):
            negate = True
            self.pos += 1
        commands = [self.command()]
        while self.at_op("|", "|&"):
            self.pos += 1
            self.skip_newlines()
            commands.append(self.command())
        node = commands[0] if len(commands) == 1 else AstNode("BASH-PIPE", None, tuple(commands))
        return AstNode("BASH-NOT", None, (node,)) if negate else node

    def command(self) -> AstNode:
        tok = self.peek()
        if tok is None:
            raise _Unsupported("missing command")
        if isinstance(tok, Op) and not tok.redirect:
            if tok.op == "(":
                self.pos += 1
                body = self.script(terminator=")")
                if not self.at_op(")"):
                    raise _Unsupported("unclosed subshell")
                self.pos += 1
                return self._group("BASH-SUBSHELL", body)
            raise _Unsupported(f"unexpected {tok.op!r}")
        if isinstance(tok, Word):
            text = tok.plain()
            if text == "{":
                self.pos += 1
                body = self.script(terminator="}")
                if not self.at_word("}"):
                    raise _Unsupported("unclosed brace group")
                self.pos += 1
                return self._group("BASH-BRACE-GROUP", body)
            nxt, nxt2 = self.peek(1), self.peek(2)
            is_funcdef = (
                text is not None and _NAME_RE.fullmatch(text)
                and isinstance(nxt, Op) and nxt.op == "("
                and isinstance(nxt2, Op) and nxt2.op == ")"
            )
            if text in _COMPOUND_START or is_funcdef:
                return self.compound()
            if text in _RESERVED:
                raise _Unsupported(f"reserved word {text!r}")
        return self.simple()

    def _group(self, node_type: str, body: list[AstNode]) -> AstNode:
        children = [AstNode("BASH-SCRIPT", None, tuple(body))]
        children += self.redirections()
        return AstNode(node_type, None, tuple(children))

    def redirections(self) -> list[AstNode]:
        out = []
        while isinstance(self.peek(), Op) and self.peek().redirect:
            out.append(self.redirect())
        return out

    def redirect(self) -> AstNode:
        tok = self.peek()
        if tok.op.lstrip("0123456789") in ("<<", "<<-"):
            raise _Unsupported("heredoc")
        self.pos += 1
        target = self.peek()
        if not isinstance(target, Word):
            raise _Unsupported("redirection without target")
        self.pos += 1
        return AstNode("BASH-REDIRECT", tok.op, (word_node(target),))

    def compound(self) -> AstNode:
        """Consume a construct outside the subset as one opaque fragment."""
        start = self.pos
        first = self.peek().plain()
        depth = 0
        prev = None
        if first == "[[":
            while self.peek() is not None and not self.at_word("]]"):
                self.pos += 1
            if self.peek() is not None:
                self.pos += 1
        else:
            if first == "function" or first not in _OPENERS:
                # function name [()] body, or name () body
                self.pos += 2 if first == "function" else 1
                if self.at_op("("):
                    self.pos += 2
                self.skip_newlines()
            closed = False
            while (tok := self.peek()) is not None:
                self.pos += 1
                text = tok.plain() if isinstance(tok, Word) else None
                command_pos = prev is None or (
                    isinstance(prev, Op) and not prev.redirect
                ) or (isinstance(prev, Word) and prev.plain() in {"then", "do", "else", "elif", "{"})
                if text is not None and command_pos:
                    if text in _OPENERS or text == "{":
                        depth += 1
                    elif text in _CLOSERS or text == "}":
                        depth -= 1
                        if depth <= 0:
                            closed = True
                            break
                prev = tok
            if not closed:
                self.pos = len(self.toks)
        while isinstance(self.peek(), Op) and self.peek().redirect:
            self.pos += 1
            if isinstance(self.peek(), Word):
                self.pos += 1
        return self.fragment(start, self.pos)

    def simple(self) -> AstNode:
        start = self.pos
        assigns: list[AstNode] = []
        words: list[Word] = []
        redirs: list[AstNode] = []
        while (tok := self.peek()) is not None:
            if isinstance(tok, ArrayAssign):
                if words:
                    raise _Unsupported("array literal in argument position")
                assigns.append(_array_node(tok))
                self.pos += 1
            elif isinstance(tok, Word):
                node = None if words else _assignment(tok)
                if node is not None:
                    assigns.append(node)
                else:
                    words.append(tok)
                self.pos += 1
            elif tok.redirect:
                redirs.append(self.redirect())
            else:
                break
        if words:
            children = list(assigns)
            children.append(AstNode("BASH-COMMAND-COMMAND", None, (word_node(words[0]),)))
            if len(words) > 1:
                children.append(AstNode("BASH-COMMAND-ARGS", None, tuple(word_node(w) for w in words[1:])))
            children += redirs
            return AstNode(MSC, None, tuple(children))
        if assigns and not redirs:
            return assigns[0] if len(assigns) == 1 else AstNode("BASH-ASSIGN-LIST", None, tuple(assigns))
        if self.pos > start:
            return self.fragment(start, self.pos)
        raise _Unsupported("empty command")


def parse_shell(payload: str) -> AstNode:
    """Parse a shell-form payload into a ``BASH-SCRIPT`` tree.

    Raises ``ShellParseError`` only when the input cannot be delimited
    (unterminated quotes or substitutions); unsupported constructs become
    ``UNKNOWN-BASH-FRAGMENT`` leaves instead.
    """
    try:
        tokens = tokenize(payload)
    except _Unsupported:
        return AstNode("BASH-SCRIPT", None, (AstNode(UNKNOWN, payload.strip()),))
    parser = _Parser(payload, tokens)
    return AstNode("BASH-SCRIPT", None, tuple(parser.script(top=True)))


def _is_shell_form_run(node: AstNode) -> bool:
    return (
        node.type == "DOCKER-RUN"
        and len(node.children) == 1
        and node.children[0].type == "BASH-LITERAL"
    )


def expand_run_nodes(doc: DocumentRoot) -> DocumentRoot:
    """Replace the raw payload of every shell-form RUN with its parse.

    A payload that fails to lex stays as its raw literal and the document
    gains the ``shell-parse-error`` flag.
    """
    failed = False

    def expand(node: AstNode) -> AstNode:
        nonlocal failed
        if not _is_shell_form_run(node):
            return node
        try:
            script = parse_shell(node.children[0].value or "")
        except ShellParseError:
            failed = True
            return node
        return node.with_children((script,))

    root = transform(doc.root, expand)
    flags = doc.flags + ((PARSE_ERROR_FLAG,) if failed else ())
    return doc.replace(root=root, flags=flags, representation="phase-2")
