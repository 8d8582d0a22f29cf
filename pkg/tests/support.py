"""Shared generators and independent oracles for the test suite."""
from __future__ import annotations

import hashlib
import itertools
import random
from pathlib import Path
from typing import Any

from dockast.corpus import CorpusRecord
from dockast.rules import TreePattern, TreeRule
from dockast.tree import AstNode, DocumentRoot

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
GOLDEN = HERE / "golden"
ELLIPSIS = "..."
FIXED_TIME = "2020-01-01T00:00:00Z"
GOLD_GLOB = "gold/*"


# -- golden trees with elided regions ---------------------------------------


def tree_matches(pattern: dict[str, Any], obj: dict[str, Any]) -> bool:
    """Structural equality where ``"..."`` in a child list stands for zero
    or more arbitrary siblings. Values are compared where the pattern has one."""
    if pattern["type"] != obj["type"]:
        return False
    if "value" in pattern and pattern["value"] != obj.get("value"):
        return False
    if "children" not in pattern:
        return True
    return _seq_matches(pattern["children"], obj.get("children", []))


def _seq_matches(pats: list, objs: list) -> bool:
    if not pats:
        return not objs
    head, rest = pats[0], pats[1:]
    if head == ELLIPSIS:
        return any(_seq_matches(rest, objs[k:]) for k in range(len(objs) + 1))
    return bool(objs) and tree_matches(head, objs[0]) and _seq_matches(rest, objs[1:])


# -- random trees ----------------------------------------------------------

TYPE_POOL = [
    "DOCKER-FILE", "DOCKER-RUN", "DOCKER-FROM", "BASH-SCRIPT", "BASH-LITERAL",
    "BASH-PIPE", "SC-NPM-INSTALL", "SC-NPM-F-PRODUCTION", "SC-X-Y-Z", "ABS-NUMBER",
    "UNKNOWN-BASH-FRAGMENT", "MAYBE-SEMANTIC-COMMAND", "DOCKER-IMAGE-NAME",
]
VALUE_POOL = ["", "npm", "--production", "a b", "q\"uote", "back\\slash", "tab\there",
              "line\nbreak", "ünï©ødé", "😀", "{}", "[1,2]", "null", "0", "3.14"]


def random_value(rng: random.Random) -> str | None:
    r = rng.random()
    if r < 0.45:
        return None
    if r < 0.8:
        return rng.choice(VALUE_POOL)
    alphabet = "abcXYZ019 -_/.:@\"\\\n\té中\U0001f600\x00\x1f"
    return "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))


def random_node(rng: random.Random, budget: int, types=TYPE_POOL, values=random_value) -> AstNode:
    """A tree with at most ``budget`` nodes."""
    budget -= 1
    kids = []
    while budget > 0 and rng.random() < 0.6:
        size = rng.randint(1, budget)
        kids.append(random_node(rng, size, types, values))
        budget -= size
    return AstNode(rng.choice(types), values(rng), tuple(kids))


def random_sha(rng: random.Random) -> str:
    return hashlib.sha256(rng.randbytes(8)).hexdigest()


def random_document(rng: random.Random, budget: int = 30) -> DocumentRoot:
    root = random_node(rng, budget)
    root = AstNode("DOCKER-FILE", root.value, root.children)
    rep = rng.choice([None, "phase-1", "phase-2", "phase-3", "abstracted"])
    directives = rng.choice([{}, {"escape": "`"}, {"syntax": "docker/dockerfile:1", "escape": "\\"}])
    flags = tuple(rng.sample(["shell-parse-error", "first-instruction-not-from"], rng.randint(0, 2)))
    return DocumentRoot(random_sha(rng), root, rep, directives, flags)


# -- random Dockerfile sources ---------------------------------------------

_IMAGES = ["ubuntu:20.04", "alpine", "node:18", "python:3.11-slim", "debian@sha256:" + "ab" * 32, "centos:7 AS build"]
_PACKAGES = ["curl", "git", "wget", "vim", "nginx", "python3", "ca-certificates"]
_URLS = ["https://example.com/a.sh", "http://mirror.example.org/pkg.tar.gz",
         "https://github.com/org/repo/archive/v1.2.3.tar.gz", "ftp://old.example.net/x"]


def _run_line(rng: random.Random) -> str:
    pick = rng.randrange(14)
    pkgs = " ".join(rng.sample(_PACKAGES, rng.randint(1, 3)))
    if pick == 0:
        flags = " ".join(f for f in ("-y", "--no-install-recommends") if rng.random() < 0.5)
        return f"apt-get update && apt-get install {flags} {pkgs}".replace("  ", " ")
    if pick == 1:
        return "npm install" + rng.choice(["", " --production", " express", " -g yarn"])
    if pick == 2:
        return "pip install " + rng.choice(["", "--no-cache-dir "]) + rng.choice(["flask", "-r requirements.txt", "numpy==1.26.0"])
    if pick == 3:
        return "curl " + rng.choice(["", "-fsSL ", "-sL ", "--fail "]) + rng.choice(_URLS) + rng.choice(["", " -o /tmp/x", " | sh"])
    if pick == 4:
        return "apk add " + rng.choice(["", "--no-cache "]) + pkgs
    if pick == 5:
        return "yum install " + rng.choice(["", "-y "]) + pkgs
    if pick == 6:
        return f"mkdir -p /opt/app{rng.randint(0, 99)} && cd /opt && ls -la"
    if pick == 7:
        return "echo \"hello $USER\" > /tmp/greeting 2>&1"
    if pick == 8:
        return "VERSION=1.2.3 ./configure --prefix=/usr/local"
    if pick == 9:
        return "if [ -f /x ]; then echo yes; fi"
    if pick == 10:
        return "echo 'unterminated"
    if pick == 11:
        return "git clone https://github.com/org/repo.git /src && cd /src && git checkout v2.0.1"
    if pick == 12:
        return "tar -xzf /tmp/pkg.tar.gz -C /opt || true"
    return "wget -q " + rng.choice(_URLS)


def random_dockerfile(rng: random.Random) -> str:
    lines = []
    if rng.random() < 0.1:
        lines.append("# syntax=docker/dockerfile:1")
    lines.append(f"FROM {rng.choice(_IMAGES)}")
    for _ in range(rng.randint(0, 6)):
        kind = rng.randrange(10)
        if kind < 5:
            lines.append(f"RUN {_run_line(rng)}")
        elif kind == 5:
            lines.append(f"ENV APP_HOME=/srv/{rng.randint(0, 9)} PORT={rng.randint(1000, 9999)}")
        elif kind == 6:
            lines.append(f"COPY --chown=app:app src{rng.randint(0, 3)} /srv/")
        elif kind == 7:
            lines.append(f"EXPOSE {rng.randint(1, 65535)}/tcp")
        elif kind == 8:
            lines.append(f"WORKDIR /work/{rng.randint(0, 9)}")
        else:
            lines.append('CMD ["sh", "-c", "echo done"]')
    if rng.random() < 0.08:
        lines.append("BOGUS directive")
    return "\n".join(lines) + "\n"


def random_corpus(rng: random.Random, max_files: int = 6) -> list[CorpusRecord]:
    """Records with unique paths, some duplicated contents and some gold tags."""
    sources = [random_dockerfile(rng) for _ in range(rng.randint(1, max_files))]
    records = []
    for i in range(rng.randint(len(sources), len(sources) + 3)):
        text = sources[i] if i < len(sources) else rng.choice(sources)
        tag = "gold" if rng.random() < 0.3 else "corpus"
        folder = "gold" if tag == "gold" else "other"
        records.append(CorpusRecord.from_bytes(f"{folder}/f{i:03d}.Dockerfile", text.encode(), tag, FIXED_TIME))
    return records


# -- brute-force rule oracle -----------------------------------------------


def _is_descendant(a: tuple, b: tuple) -> bool:
    """True when path ``b`` lies strictly below path ``a``."""
    return len(b) > len(a) and b[: len(a)] == a


def _flatten(p: TreePattern, parent: int | None, out: list) -> None:
    out.append((p, parent))
    me = len(out) - 1
    for c in p.children:
        _flatten(c, me, out)


def _label_ok(p: TreePattern, node: AstNode) -> bool:
    if node.type != p.type or (p.value is not None and node.value != p.value):
        return False
    have = {c.type for c in node.children}
    return all(t in have for t in p.abs)


def embeds_at(pattern: TreePattern, nodes: list[tuple[tuple, AstNode]], at: tuple) -> bool:
    """Enumerate every assignment of pattern nodes to tree nodes."""
    flat: list = []
    _flatten(pattern, None, flat)
    node_at = dict(nodes)
    if not _label_ok(pattern, node_at[at]):
        return False
    choices = [[path for path, n in nodes if _label_ok(p, n)] for p, _ in flat[1:]]
    for combo in itertools.product(*choices):
        assign = (at,) + combo
        if all(_is_descendant(assign[parent], assign[k]) for k, (_, parent) in enumerate(flat) if parent is not None):
            return True
    return False


def brute_force_violations(root: AstNode, rules: list[TreeRule]) -> set[tuple[tuple, str]]:
    from dockast.tree import walk

    nodes = list(walk(root))
    out = set()
    for path, _ in nodes:
        for rule in rules:
            if not embeds_at(rule.antecedent, nodes, path):
                continue
            below = [q for q, _ in nodes if q == path or _is_descendant(path, q)]
            if not any(embeds_at(rule.consequent, nodes, q) for q in below):
                out.add((path, rule.id))
    return out


RULE_TYPES = ["SC-A", "SC-B", "BASH-C", "DOCKER-D", "ABS-T", "ABS-U"]
RULE_VALUES = [None, None, "x", "y"]


def small_tree(rng: random.Random, budget: int) -> AstNode:
    return random_node(rng, budget, RULE_TYPES, lambda r: r.choice(RULE_VALUES))


def sized_tree(rng: random.Random, n: int) -> AstNode:
    """A tree with exactly ``n`` nodes: each new node hangs off a random earlier one."""
    parents = [None] + [rng.randrange(i) for i in range(1, n)]
    kids: list[list[AstNode]] = [[] for _ in range(n)]
    nodes: list[AstNode | None] = [None] * n
    for i in reversed(range(n)):
        nodes[i] = AstNode(rng.choice(RULE_TYPES), rng.choice(RULE_VALUES), tuple(reversed(kids[i])))
        if parents[i] is not None:
            kids[parents[i]].append(nodes[i])
    return nodes[0]


def random_pattern(rng: random.Random, size: int) -> TreePattern:
    size -= 1
    kids = []
    while size > 0:
        k = rng.randint(1, size)
        kids.append(random_pattern(rng, k))
        size -= k
    tags = tuple(rng.sample(["ABS-T", "ABS-U"], rng.choice([0, 0, 0, 1])))
    return TreePattern(rng.choice(RULE_TYPES[:4]), rng.choice(RULE_VALUES), tags, tuple(kids))


def random_rules(rng: random.Random, n: int = 3) -> list[TreeRule]:
    return [TreeRule(f"r{i}", random_pattern(rng, rng.randint(1, 3)), random_pattern(rng, rng.randint(1, 3)))
            for i in range(n)]
