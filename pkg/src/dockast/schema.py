"""Declarative command-line schemas and the invocation parser they drive.

A schema describes one utility: its scenarios (usually sub-commands), the
typed flags each scenario accepts and its positional parameters. Scenarios
pull in shared flag groups either with YAML merge keys or with an explicit
``inherit`` list; the latter is checked for conflicting definitions.

Example schema::

    command: npm
    flag-groups:
      common: &common
        help: {long: --help, short: -h, type: boolean}
    scenarios:
      - match: [install]
        flags:
          <<: *common
          production: {long: --production, type: boolean}
        positionals:
          - {name: package, arity: optional-many}
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import yaml

from .tree import AstNode, NodeTypeError, check_node_type

VALUE_TYPES = ("boolean", "scalar", "array")
ARITIES = ("one", "optional", "many", "optional-many")


class SchemaError(ValueError):
    pass


class SchemaConflict(SchemaError):
    pass


def tag_segment(text: str) -> str:
    """Uppercase ``text`` with every non-alphanumeric run turned into ``-``."""
    seg = re.sub(r"[^A-Za-z0-9]+", "-", text).strip("-").upper()
    if not seg:
        raise SchemaError(f"cannot derive a node name from {text!r}")
    return seg


@dataclass(frozen=True)
class FlagSpec:
    long: str | None
    short: str | None
    value_type: str
    node_name: str

    @property
    def spelling(self) -> str:
        return self.long or self.short  # type: ignore[return-value]

    @property
    def takes_value(self) -> bool:
        return self.value_type != "boolean"


@dataclass(frozen=True)
class PositionalSpec:
    name: str
    arity: str
    node_name: str


@dataclass(frozen=True)
class Scenario:
    match: tuple[str, ...]
    node_name: str
    flags: tuple[FlagSpec, ...] = ()
    positionals: tuple[PositionalSpec, ...] = ()
    alt_matches: tuple[tuple[str, ...], ...] = ()
    by_long: Mapping[str, FlagSpec] = field(default_factory=dict, compare=False, hash=False, repr=False)
    by_short: Mapping[str, FlagSpec] = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "by_long", {f.long: f for f in self.flags if f.long})
        object.__setattr__(self, "by_short", {f.short: f for f in self.flags if f.short})


@dataclass(frozen=True)
class CommandSchema:
    utility: str
    scenarios: tuple[Scenario, ...]
    aliases: tuple[str, ...] = ()

    @property
    def prefix(self) -> str:
        return "SC-" + tag_segment(self.utility)

    @property
    def names(self) -> tuple[str, ...]:
        return (self.utility, *self.aliases)

    def select(self, words: Sequence[str | None]) -> tuple[Scenario, int] | None:
        """Longest matching sub-command prefix, then declaration order.

        Returns the scenario and the number of words its match consumed.
        """
        best = None
        for scenario in self.scenarios:
            for match in (scenario.match, *scenario.alt_matches):
                k = len(match)
                if k <= len(words) and tuple(words[:k]) == match:
                    if best is None or k > best[1]:
                        best = (scenario, k)
        return best


# -- loading ---------------------------------------------------------------


def _flag(prefix: str, key: str | None, raw: Mapping) -> FlagSpec:
    if not isinstance(raw, Mapping):
        raise SchemaError(f"flag {key!r} must be a mapping")
    long, short = raw.get("long"), raw.get("short")
    if not long and not short:
        raise SchemaError(f"flag {key!r} needs a long or short form")
    if long is not None and not (isinstance(long, str) and long.startswith("--") and len(long) > 2):
        raise SchemaError(f"bad long flag {long!r}")
    if short is not None and not (isinstance(short, str) and short.startswith("-") and not short.startswith("--") and len(short) > 1):
        raise SchemaError(f"bad short flag {short!r}")
    value_type = raw.get("type", "boolean")
    if value_type not in VALUE_TYPES:
        raise SchemaError(f"unknown value type {value_type!r} for flag {long or short}")
    name = raw.get("name") or (long[2:] if long else short[1:])
    return FlagSpec(long, short, value_type, f"{prefix}-F-{tag_segment(name)}")


def _flag_list(prefix: str, raw, where: str) -> list[FlagSpec]:
    if raw is None:
        return []
    if isinstance(raw, Mapping):
        return [_flag(prefix, k, v) for k, v in raw.items()]
    if isinstance(raw, list):
        return [_flag(prefix, None, v) for v in raw]
    raise SchemaError(f"flags of {where} must be a list or mapping")


def _merge_flags(flags: Iterable[FlagSpec], where: str) -> tuple[FlagSpec, ...]:
    merged: list[FlagSpec] = []
    seen: dict[str, FlagSpec] = {}
    for flag in flags:
        keys = [k for k in (flag.long, flag.short) if k] + [flag.node_name]
        clash = next((k for k in keys if k in seen), None)
        if clash is not None:
            raise SchemaConflict(f"{where}: flag {clash} defined twice")
        for k in keys:
            seen[k] = flag
        merged.append(flag)
    return tuple(merged)


def _words(raw) -> tuple[str, ...]:
    if not raw:
        return ()
    if isinstance(raw, str):
        return tuple(raw.split())
    return tuple(str(m) for m in raw)


def schema_from_mapping(doc: Mapping) -> CommandSchema:
    if not isinstance(doc, Mapping):
        raise SchemaError("schema document must be a mapping")
    utility = doc.get("command")
    if not isinstance(utility, str) or not utility.strip():
        raise SchemaError("schema needs a non-empty 'command'")
    prefix = "SC-" + tag_segment(utility)
    groups_raw = doc.get("flag-groups") or {}
    if not isinstance(groups_raw, Mapping):
        raise SchemaError("'flag-groups' must be a mapping")
    groups = {name: _flag_list(prefix, raw, f"group {name}") for name, raw in groups_raw.items()}

    scenarios_raw = doc.get("scenarios")
    if not isinstance(scenarios_raw, list) or not scenarios_raw:
        raise SchemaError("schema needs a non-empty 'scenarios' list")
    scenarios = []
    for raw in scenarios_raw:
        if not isinstance(raw, Mapping):
            raise SchemaError("each scenario must be a mapping")
        match = _words(raw.get("match"))
        alt_matches = tuple(_words(m) for m in raw.get("also-match") or [])
        name = raw.get("name") or "-".join([prefix, *(tag_segment(m) for m in match)])
        try:
            check_node_type(name)
        except NodeTypeError as exc:
            raise SchemaError(str(exc)) from None
        inherited: list[FlagSpec] = []
        for group in raw.get("inherit") or []:
            if group not in groups:
                raise SchemaError(f"scenario {name} inherits unknown group {group!r}")
            inherited += groups[group]
        flags = _merge_flags(inherited + _flag_list(prefix, raw.get("flags"), name), name)
        positionals = []
        for pos in raw.get("positionals") or []:
            if not isinstance(pos, Mapping) or "name" not in pos:
                raise SchemaError(f"positional of {name} needs a name")
            arity = pos.get("arity", "one")
            if arity not in ARITIES:
                raise SchemaError(f"unknown arity {arity!r}")
            positionals.append(PositionalSpec(pos["name"], arity, f"{prefix}-{tag_segment(pos['name'])}"))
        scenarios.append(Scenario(match, name, flags, tuple(positionals), alt_matches))

    names = [s.node_name for s in scenarios]
    if len(set(names)) != len(names):
        raise SchemaError(f"duplicate scenario names in {utility} schema")
    aliases = tuple(doc.get("aliases") or ())
    return CommandSchema(utility, tuple(scenarios), aliases)


def load_schema(text: str) -> CommandSchema:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError(f"invalid YAML: {exc}") from None
    return schema_from_mapping(doc)


def load_schema_file(path: str | Path) -> CommandSchema:
    return load_schema(Path(path).read_text(encoding="utf-8"))


class SchemaSet(dict):
    """Schemas keyed by every command name (utility and aliases)."""

    @classmethod
    def of(cls, schemas: Iterable[CommandSchema]) -> SchemaSet:
        out = cls()
        for schema in schemas:
            for name in schema.names:
                if name in out:
                    raise SchemaConflict(f"two schemas claim command {name!r}")
                out[name] = schema
        return out

    def utilities(self) -> list[str]:
        return sorted({s.utility for s in self.values()})


def load_schemas(directory: str | Path) -> SchemaSet:
    return SchemaSet.of(load_schema_file(p) for p in sorted(Path(directory).glob("*.yaml")))


def default_schemas() -> SchemaSet:
    root = resources.files("dockast") / "data" / "schemas"
    texts = sorted((p.name, p.read_text(encoding="utf-8")) for p in root.iterdir() if p.name.endswith(".yaml"))
    return SchemaSet.of(load_schema(t) for _, t in texts)


# -- invocation parsing ----------------------------------------------------


@dataclass(frozen=True)
class WordArg:
    """One argument word: its static text (None if it has expansions) and
    the Phase-II node it came from."""

    text: str | None
    node: AstNode

    @classmethod
    def literal(cls, text: str) -> WordArg:
        return cls(text, AstNode("BASH-LITERAL", text))


class _NoMatch(Exception):
    pass


def _allocate(arities: Sequence[str], count: int) -> list[int] | None:
    """Split ``count`` positional words over the specs, greedy left to right."""
    minimum = {"one": 1, "optional": 0, "many": 1, "optional-many": 0}
    bounded = {"one": 1, "optional": 1}

    def go(i: int, left: int) -> list[int] | None:
        if i == len(arities):
            return [] if left == 0 else None
        rest_min = sum(minimum[a] for a in arities[i + 1:])
        hi = bounded.get(arities[i], left - rest_min)
        for take in range(min(hi, left - rest_min), minimum[arities[i]] - 1, -1):
            tail = go(i + 1, left - take)
            if tail is not None:
                return [take, *tail]
        return None

    return go(0, count)


def _parse_scenario(schema: CommandSchema, scenario: Scenario, args: Sequence[WordArg]) -> AstNode:
    items: list = []  # AstNode for flags, WordArg for positionals
    arrays: dict[str, int] = {}

    def add_flag(flag: FlagSpec, value: AstNode | None) -> None:
        if flag.value_type == "array" and flag.node_name in arrays:
            idx = arrays[flag.node_name]
            items[idx] = items[idx].with_children(items[idx].children + (value,))
            return
        if flag.value_type == "array":
            arrays[flag.node_name] = len(items)
        items.append(AstNode(flag.node_name, None, (value,) if value is not None else ()))

    i = 0
    while i < len(args):
        text = args[i].text
        i += 1
        if text is None or text == "-" or not text.startswith("-"):
            items.append(args[i - 1])
            continue
        if text.startswith("--"):
            name, eq, val = text.partition("=")
            flag = scenario.by_long.get(name)
            if flag is None or (eq and not flag.takes_value):
                raise _NoMatch(text)
            if not flag.takes_value:
                add_flag(flag, None)
            elif eq:
                add_flag(flag, AstNode("BASH-LITERAL", val))
            elif i < len(args):
                add_flag(flag, args[i].node)
                i += 1
            else:
                raise _NoMatch(f"{name} needs a value")
            continue
        flag = scenario.by_short.get(text)
        if flag is not None:
            if not flag.takes_value:
                add_flag(flag, None)
            elif i < len(args):
                add_flag(flag, args[i].node)
                i += 1
            else:
                raise _NoMatch(f"{text} needs a value")
            continue
        # clustered short flags: -xzf, or an attached value: -ofile
        letters = text[1:]
        for j, letter in enumerate(letters):
            flag = scenario.by_short.get("-" + letter)
            if flag is None:
                raise _NoMatch(text)
            if not flag.takes_value:
                add_flag(flag, None)
                continue
            attached = letters[j + 1:]
            if attached:
                add_flag(flag, AstNode("BASH-LITERAL", attached))
            elif i < len(args):
                add_flag(flag, args[i].node)
                i += 1
            else:
                raise _NoMatch(f"-{letter} needs a value")
            break

    positional_words = [it for it in items if isinstance(it, WordArg)]
    counts = _allocate([p.arity for p in scenario.positionals], len(positional_words))
    if counts is None:
        raise _NoMatch("positional arity mismatch")
    names = [spec.node_name for spec, k in zip(scenario.positionals, counts) for _ in range(k)]
    named = iter(names)
    children = []
    for it in items:
        if isinstance(it, WordArg):
            node_name = next(named)
            if it.text is not None:
                children.append(AstNode(node_name, it.text))
            else:
                children.append(AstNode(node_name, None, (it.node,)))
        else:
            children.append(it)
    return AstNode(scenario.node_name, None, tuple(children))


def parse_words(schema: CommandSchema, words: Sequence[WordArg]) -> AstNode | None:
    if not words or words[0].text not in schema.names:
        return None
    rest = words[1:]
    selected = schema.select([w.text for w in rest])
    if selected is None:
        return None
    scenario, consumed = selected
    try:
        return _parse_scenario(schema, scenario, rest[consumed:])
    except _NoMatch:
        return None


def parse_invocation(schema: CommandSchema, words: Sequence[str]) -> AstNode | None:
    """Parse a literal word sequence (``words[0]`` is the utility).

    Returns the ``SC-*`` tree, or None when no scenario accepts the words
    (unknown flag, missing flag value, positional count out of range).
    """
    return parse_words(schema, [WordArg.literal(w) for w in words])


def invocation_words(schema: CommandSchema, node: AstNode) -> list[str]:
    """Render an ``SC-*`` tree back to words, using each flag's canonical
    spelling (long form when it exists)."""
    from .shell import literal_text

    scenario = next(s for s in schema.scenarios if s.node_name == node.type)
    flags = {f.node_name: f for f in scenario.flags}
    words = [schema.utility, *scenario.match]
    for child in node.children:
        flag = flags.get(child.type)
        if flag is None:
            words.append(child.value if child.value is not None else literal_text(child.children[0]) or "")
        elif flag.value_type == "array":
            for value in child.children:
                words += [flag.spelling, literal_text(value) or ""]
        else:
            words.append(flag.spelling)
            words += [literal_text(value) or "" for value in child.children]
    return words
