"""Acceptance criteria, one test each, each printing a single PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` to see the lines.
"""
from __future__ import annotations

import hashlib
import json
import random
import time
from importlib import resources

import pytest

from dockast.abstraction import abstract_document, abstract_node, default_table, strip_abstractions
from dockast.codec import deserialize_jsonl, doc_to_obj, serialize_jsonl
from dockast.corpus import REP0, CorpusRecord, deduplicate, ingest, phase1, run_pipeline
from dockast.dockerfile import DockerfileError, parse_document
from dockast.enrich import enrich, enrich_command
from dockast.rules import check_document, corpus_report, default_rules
from dockast.schema import default_schemas
from dockast.shell import expand_run_nodes
from dockast.tree import AstNode, DocumentRoot, branch, count_nodes, leaf, walk

from support import (
    FIXED_TIME,
    FIXTURES,
    GOLD_GLOB,
    brute_force_violations,
    random_corpus,
    random_dockerfile,
    random_document,
    random_rules,
    sized_tree,
    tree_matches,
)

SCHEMAS = default_schemas()
TABLE = default_table()
MINI = resources.files("dockast") / "data" / "minicorpus"


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
        assert ok, detail

    return emit


def _pipeline(records):
    return run_pipeline(records, SCHEMAS, TABLE)


# 1 ----------------------------------------------------------------------


def test_reference_trees(report):
    stages = {"rep2": "phase-1", "rep3": "phase-2", "rep4": "phase-3", "rep5": "abstracted"}
    failed = []
    for name, stage in stages.items():
        ref = FIXTURES / "reference"
        rec = CorpusRecord.from_bytes(f"{name}.Dockerfile", (ref / f"{name}.Dockerfile").read_bytes())
        (doc,) = _pipeline([rec]).documents[stage]["corpus"]
        if not tree_matches(json.loads((ref / f"{name}.json").read_text()), doc_to_obj(doc)):
            failed.append(name)
    report(1, not failed, f"4 reference trees reproduced exactly outside elided regions; mismatches={failed}")


# 2 ----------------------------------------------------------------------


def test_npm_trace(report):
    start = time.perf_counter()
    doc = parse_document("FROM node:12\nRUN npm install --production\n", "0" * 64)
    doc = enrich(expand_run_nodes(doc), SCHEMAS)
    elapsed = time.perf_counter() - start
    run = doc.root.children[1]
    want = branch("DOCKER-RUN", branch("BASH-SCRIPT", branch("SC-NPM-INSTALL", leaf("SC-NPM-F-PRODUCTION"))))
    ok = run == want and elapsed < 1.0
    report(2, ok, f"SC-NPM-INSTALL[SC-NPM-F-PRODUCTION] produced={run == want} in {elapsed * 1000:.1f} ms (< 1000 ms)")


# 3 ----------------------------------------------------------------------


def _dedup_failures(rng: random.Random) -> list[str]:
    recs = random_corpus(rng)
    result = _pipeline(recs)
    arts = result.artifacts
    problems = []

    unique = deduplicate(recs)
    if deduplicate(unique) != unique:
        problems.append("dedup not idempotent")
    again = _pipeline(unique).artifacts
    if {k: v for k, v in again.items() if not k.startswith(REP0)} != {k: v for k, v in arts.items() if not k.startswith(REP0)}:
        problems.append("pipeline over deduplicated input differs")

    shuffled = recs[:]
    rng.shuffle(shuffled)
    if _pipeline(shuffled).artifacts != arts:
        problems.append("not permutation invariant")

    # each representation's ids are a subset of the previous one's
    chain = [{hashlib.sha256(r.data).hexdigest() for r in recs}, {r.file_sha for r in unique}]
    for stage in ("phase-1", "phase-2", "phase-3", "abstracted"):
        chain.append(set(result.shas(stage, "corpus")))
    for earlier, later in zip(chain, chain[1:]):
        if not later <= earlier:
            problems.append("sha chain broken")
    stage_sets = chain[2:]
    if any(s != stage_sets[0] for s in stage_sets):
        problems.append("AST stages disagree on ids")
    if stage_sets[0] | {r["file_sha"] for r in result.rejects} != chain[1]:
        problems.append("accepted plus rejected is not the unique set")
    return problems


def test_dedup_properties(report):
    rng = random.Random(20240601)
    failures = []
    for i in range(1000):
        problems = _dedup_failures(rng)
        if problems:
            failures.append((i, problems))
    report(3, not failures, f"1000 random corpora, idempotence/permutation/sha-chain failures={len(failures)} {failures[:3]}")


# 4 ----------------------------------------------------------------------


def test_roundtrip(report):
    rng = random.Random(4242)
    failures = 0
    for _ in range(10_000):
        doc = random_document(rng, rng.randint(1, 40))
        line = serialize_jsonl(doc)
        back = deserialize_jsonl(line)
        if back != doc or serialize_jsonl(back) != line or serialize_jsonl(doc) != line:
            failures += 1
    report(4, failures == 0, f"10000 generated trees, round-trip or byte-determinism failures={failures}")


# 5 ----------------------------------------------------------------------


def _rep4_documents(n: int, seed: int):
    rng = random.Random(seed)
    docs = []
    while len(docs) < n:
        src = random_dockerfile(rng)
        try:
            doc = parse_document(src, "%064x" % rng.getrandbits(256))
        except DockerfileError:
            continue
        docs.append(enrich(expand_run_nodes(doc), SCHEMAS))
    return docs


def test_abstraction_reversible(report):
    failures = 0
    tagged = 0
    for doc in _rep4_documents(1000, 55):
        out = abstract_document(doc, TABLE)
        tagged += count_nodes(out.root) > count_nodes(doc.root)
        if strip_abstractions(out) != doc:
            failures += 1
    url = abstract_node(AstNode("BASH-SINGLE-QUOTED", "https://example.com/install"), TABLE)
    tags = [c.type for c in url.children]
    ok = failures == 0 and tags == ["ABS-PROBABLY-URL", "ABS-URL-PROTOCOL-HTTPS"]
    report(5, ok, f"1000 phase-3 docs ({tagged} gained tags), strip(abstract(d)) != d for {failures}; URL tags={tags}")


# 6 ----------------------------------------------------------------------


def test_checker_matches_oracle(report):
    rng = random.Random(606)
    discrepancies = nonempty = 0
    sizes = []
    for i in range(1000):
        tree = sized_tree(rng, 1 + i % 40)
        sizes.append(count_nodes(tree))
        rules = random_rules(rng)
        doc = DocumentRoot("%064x" % i, AstNode("DOCKER-FILE", None, (tree,)), "abstracted")
        got = {(v.path[1:], v.rule_id) for v in check_document(doc, rules)}
        expected = brute_force_violations(tree, rules)
        nonempty += bool(expected)
        if got != expected:
            discrepancies += 1
    ok = discrepancies == 0 and max(sizes) <= 40
    report(6, ok, f"1000 documents of {min(sizes)}..{max(sizes)} nodes ({nonempty} with violations), "
                  f"discrepancies vs brute force={discrepancies}")


# 7 ----------------------------------------------------------------------


def test_planted_ratio(report):
    records = ingest(str(MINI), GOLD_GLOB, ingest_time=FIXED_TIME)
    docs = _pipeline(records).documents["phase-3"]
    rep = corpus_report(docs["gold"], docs["corpus"], default_rules())
    ok = rep.ratio == 5
    report(7, ok, f"gold {rep.gold.violations}/{rep.gold.files}, corpus {rep.corpus.violations}/{rep.corpus.files}, "
                  f"ratio={None if rep.ratio is None else float(rep.ratio)} (want exactly 5)")


# 8 ----------------------------------------------------------------------


def _p99(samples: list[float]) -> float:
    ordered = sorted(samples)
    return ordered[min(len(ordered) - 1, int(0.99 * len(ordered)))]


def test_throughput(report):
    commands = []
    for rec in deduplicate(ingest(str(MINI), ingest_time=FIXED_TIME)):
        try:
            doc = expand_run_nodes(phase1(rec))
        except DockerfileError:
            continue
        commands += [n for _, n in walk(doc.root) if n.type == "MAYBE-SEMANTIC-COMMAND"]
    samples = []
    for _ in range(20):
        for msc in commands:
            start = time.perf_counter()
            enrich_command(msc, SCHEMAS)
            samples.append(time.perf_counter() - start)
    p99 = _p99(samples)

    rng = random.Random(500)
    records = [CorpusRecord.from_bytes(f"f{i:04d}/Dockerfile", random_dockerfile(rng).encode(), ingest_time=FIXED_TIME)
               for i in range(500)]
    start = time.perf_counter()
    result = _pipeline(records)
    wall = time.perf_counter() - start
    ok = p99 < 0.010 and wall < 60 and len(result.rejects) < 500
    report(8, ok, f"p99 Phase-III invocation parse {p99 * 1000:.3f} ms over {len(samples)} calls (< 10 ms); "
                  f"500-file pipeline {wall:.2f} s (< 60 s)")
