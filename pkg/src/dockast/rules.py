"""Tree implication rules and violation reporting.

A rule fires at every node its antecedent pattern matches. The firing is
satisfied when the consequent pattern matches that node or one of its
descendants; otherwise it is one violation.

A pattern matches a node when the node's type equals the pattern's type,
its value equals the pattern's value (if given), each required abstraction
tag is present as an ``ABS-*`` child, and every child pattern matches some
proper descendant. Child patterns are matched independently of each other
and of order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

from .tree import AstNode, DocumentRoot, Path as TreePath, is_valid_node_type, walk


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class TreePattern:
    type: str
    value: str | None = None
    abs: tuple[str, ...] = ()
    children: tuple[TreePattern, ...] = ()

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)


@dataclass(frozen=True)
class TreeRule:
    id: str
    antecedent: TreePattern
    consequent: TreePattern
    severity: str = "warning"
    message: str = ""


@dataclass(frozen=True, order=True)
class Violation:
    path: TreePath
    rule_id: str


# -- loading ---------------------------------------------------------------


def _tag(raw: Any, where: str) -> str:
    if not isinstance(raw, str) or not is_valid_node_type(raw):
        raise RuleError(f"{where}: invalid node type {raw!r}")
    return raw


def pattern_from_obj(obj: Any, where: str = "pattern") -> TreePattern:
    if not isinstance(obj, dict) or "type" not in obj:
        raise RuleError(f"{where}: pattern must be an object with a 'type'")
    unknown = set(obj) - {"type", "value", "abs", "children"}
    if unknown:
        raise RuleError(f"{where}: unknown pattern keys {sorted(unknown)}")
    value = obj.get("value")
    if value is not None and not isinstance(value, str):
        raise RuleError(f"{where}: value must be a string")
    tags = []
    for name in obj.get("abs") or []:
        tag = name if isinstance(name, str) and name.startswith("ABS-") else f"ABS-{name}"
        tags.append(_tag(tag, where))
    children = tuple(pattern_from_obj(c, where) for c in obj.get("children") or [])
    return TreePattern(_tag(obj["type"], where), value, tuple(tags), children)


def pattern_to_obj(p: TreePattern) -> dict[str, Any]:
    obj: dict[str, Any] = {"type": p.type}
    if p.value is not None:
        obj["value"] = p.value
    if p.abs:
        obj["abs"] = list(p.abs)
    if p.children:
        obj["children"] = [pattern_to_obj(c) for c in p.children]
    return obj


def rules_from_obj(data: Any) -> list[TreeRule]:
    if not isinstance(data, list):
        raise RuleError("rule file must hold a JSON array")
    rules, seen = [], set()
    for i, raw in enumerate(data):
        if not isinstance(raw, dict):
            raise RuleError(f"rule #{i} is not an object")
        missing = {"id", "antecedent", "consequent"} - set(raw)
        if missing:
            raise RuleError(f"rule #{i} lacks {sorted(missing)}")
        rid = raw["id"]
        if rid in seen:
            raise RuleError(f"duplicate rule id {rid!r}")
        seen.add(rid)
        rules.append(TreeRule(
            id=str(rid),
            antecedent=pattern_from_obj(raw["antecedent"], f"{rid} antecedent"),
            consequent=pattern_from_obj(raw["consequent"], f"{rid} consequent"),
            severity=str(raw.get("severity", "warning")),
            message=str(raw.get("message", "")),
        ))
    return rules


def load_rules(text: str) -> list[TreeRule]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RuleError(f"malformed rule file: {exc}") from None
    return rules_from_obj(data)


def load_rules_file(path: str | Path) -> list[TreeRule]:
    return load_rules(Path(path).read_text(encoding="utf-8"))


def default_rules() -> list[TreeRule]:
    return load_rules((resources.files("dockast") / "data" / "rules.json").read_text(encoding="utf-8"))


# -- matching --------------------------------------------------------------


class _Matcher:
    """Memoized pattern matching over one tree."""

    def __init__(self, root: AstNode):
        self.nodes = list(walk(root))
        # pre-order makes each subtree a contiguous index range
        self.end: list[int] = [0] * len(self.nodes)
        depth = [len(p) for p, _ in self.nodes]
        stack: list[int] = []
        for i, d in enumerate(depth):
            while stack and depth[stack[-1]] >= d:
                self.end[stack.pop()] = i
            stack.append(i)
        for i in stack:
            self.end[i] = len(self.nodes)
        self.memo: dict[tuple[int, int], bool] = {}

    def matches(self, pattern: TreePattern, i: int) -> bool:
        key = (id(pattern), i)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        node = self.nodes[i][1]
        ok = node.type == pattern.type and (pattern.value is None or node.value == pattern.value)
        if ok and pattern.abs:
            kids = {c.type for c in node.children}
            ok = all(t in kids for t in pattern.abs)
        if ok:
            for child in pattern.children:
                if not any(self.matches(child, j) for j in range(i + 1, self.end[i])):
                    ok = False
                    break
        self.memo[key] = ok
        return ok

    def within(self, pattern: TreePattern, i: int) -> bool:
        return any(self.matches(pattern, j) for j in range(i, self.end[i]))


def matches_at(pattern: TreePattern, root: AstNode, path: Sequence[int] = ()) -> bool:
    m = _Matcher(root)
    index = {p: k for k, (p, _) in enumerate(m.nodes)}
    return m.matches(pattern, index[tuple(path)])


def check_tree(root: AstNode, rules: Sequence[TreeRule]) -> list[Violation]:
    m = _Matcher(root)
    out = []
    for i, (path, _) in enumerate(m.nodes):
        for rule in rules:
            if m.matches(rule.antecedent, i) and not m.within(rule.consequent, i):
                out.append(Violation(path, rule.id))
    out.sort()
    return out


def check_document(doc: DocumentRoot, rules: Sequence[TreeRule]) -> list[Violation]:
    """Violations in pre-order of their paths, then by rule id."""
    return check_tree(doc.root, rules)


# -- reporting -------------------------------------------------------------


@dataclass
class StreamStats:
    files: int = 0
    violations: int = 0
    per_rule: dict[str, int] = field(default_factory=dict)

    @property
    def mean(self) -> Fraction | None:
        return Fraction(self.violations, self.files) if self.files else None

    def merge(self, other: StreamStats) -> StreamStats:
        per_rule = dict(self.per_rule)
        for k, v in other.per_rule.items():
            per_rule[k] = per_rule.get(k, 0) + v
        return StreamStats(self.files + other.files, self.violations + other.violations, per_rule)


def stream_stats(docs: Iterable[DocumentRoot], rules: Sequence[TreeRule]) -> StreamStats:
    stats = StreamStats(per_rule={r.id: 0 for r in rules})
    for doc in docs:
        stats.files += 1
        for v in check_document(doc, rules):
            stats.violations += 1
            stats.per_rule[v.rule_id] += 1
    return stats


@dataclass
class CorpusReport:
    rule_ids: list[str]
    gold: StreamStats
    corpus: StreamStats

    @property
    def ratio(self) -> Fraction | None:
        """Corpus mean over gold mean; None when undefined."""
        g, c = self.gold.mean, self.corpus.mean
        if g is None or c is None or g == 0:
            return None
        return c / g

    def rows(self) -> list[tuple[str, int, int]]:
        return [(rid, self.gold.per_rule.get(rid, 0), self.corpus.per_rule.get(rid, 0)) for rid in self.rule_ids]

    def to_dict(self) -> dict[str, Any]:
        def fmt(x: Fraction | None):
            return None if x is None else float(x)

        return {
            "rules": [{"id": r, "gold": g, "corpus": c} for r, g, c in self.rows()],
            "gold": {"files": self.gold.files, "violations": self.gold.violations, "mean": fmt(self.gold.mean)},
            "corpus": {"files": self.corpus.files, "violations": self.corpus.violations, "mean": fmt(self.corpus.mean)},
            "ratio": fmt(self.ratio),
        }

    def format(self) -> str:
        width = max([len("rule")] + [len(r) for r in self.rule_ids])
        lines = [f"{'rule':<{width}}  {'gold':>6}  {'corpus':>6}"]
        lines += [f"{rid:<{width}}  {g:>6}  {c:>6}" for rid, g, c in self.rows()]

        def mean(s: StreamStats) -> str:
            return "n/a" if s.mean is None else f"{float(s.mean):.4f}"

        lines.append(f"{'total':<{width}}  {self.gold.violations:>6}  {self.corpus.violations:>6}")
        lines.append(f"files: gold={self.gold.files} corpus={self.corpus.files}")
        lines.append(f"mean violations per file: gold={mean(self.gold)} corpus={mean(self.corpus)}")
        ratio = self.ratio
        lines.append("corpus/gold ratio: " + ("undefined (gold mean is zero or a stream is empty)" if ratio is None else f"{float(ratio):.4f}"))
        return "\n".join(lines)


def corpus_report(
    gold_docs: Iterable[DocumentRoot],
    corpus_docs: Iterable[DocumentRoot],
    rules: Sequence[TreeRule],
) -> CorpusReport:
    return CorpusReport([r.id for r in rules], stream_stats(gold_docs, rules), stream_stats(corpus_docs, rules))
