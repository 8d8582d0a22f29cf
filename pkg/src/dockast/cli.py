"""``dockast`` command line: one subcommand per stage plus the full pipeline.

Exit codes: 0 success, 1 violations found (``check --fail-on-violation``),
2 usage, configuration or I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from functools import partial
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .abstraction import TableError, abstract_document, default_table, load_table
from .codec import DecodeError, read_jsonl, write_jsonl
from .corpus import (
    deduplicate,
    ingest,
    jsonl_bytes,
    load_manifest,
    map_records,
    process_phase1,
    reject_records,
    run_pipeline,
)
from .enrich import enrich, rank_commands
from .rules import RuleError, corpus_report, default_rules, load_rules_file
from .schema import SchemaError, default_schemas, load_schemas
from .shell import expand_run_nodes
from .tree import DocumentRoot

log = logging.getLogger("dockast")

EXIT_OK, EXIT_VIOLATIONS, EXIT_ERROR = 0, 1, 2


class CliError(Exception):
    """Reported on stderr and mapped to exit code 2."""


# -- helpers ---------------------------------------------------------------


def _load_docs(path: str, expect: Sequence[str], permissive: bool) -> list[DocumentRoot]:
    try:
        docs = read_jsonl(path, strict=not permissive)
    except FileNotFoundError:
        raise CliError(f"input not found: {path}") from None
    except (OSError, EOFError) as exc:
        raise CliError(f"cannot read {path}: {exc}") from None
    except DecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}: {exc}") from None
    for n, doc in enumerate(docs, 1):
        rep = doc.representation
        if rep is None and permissive:
            continue
        if rep not in expect:
            raise CliError(f"{path}: document {n} has representation {rep!r}, expected {' or '.join(expect)}")
    return docs


def _write_docs(path: str, docs: Sequence[DocumentRoot]) -> None:
    try:
        write_jsonl(path, docs)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}") from None


def _schemas(path: str | None):
    try:
        return default_schemas() if path is None else load_schemas(path)
    except (SchemaError, OSError) as exc:
        raise CliError(f"bad schemas: {exc}") from None


def _table(path: str | None):
    try:
        return default_table() if path is None else load_table(path)
    except (TableError, OSError) as exc:
        raise CliError(f"bad abstraction table: {exc}") from None


def _rules(path: str | None):
    try:
        return default_rules() if path is None else load_rules_file(path)
    except (RuleError, OSError) as exc:
        raise CliError(f"bad rules: {exc}") from None


def _ingest(args):
    if not Path(args.input).is_dir():
        raise CliError(f"input directory not found: {args.input}")
    return ingest(args.input, args.gold_marker, ingest_time=args.ingest_time)


def _report_rejects(rejects, path: str | None) -> None:
    for r in rejects:
        print(f"rejected {r['source_path']}: {r['reason']}: {r['error']}", file=sys.stderr)
    if path:
        try:
            Path(path).write_bytes(jsonl_bytes(rejects))
        except OSError as exc:
            raise CliError(f"cannot write {path}: {exc}") from None


def _check_jobs(jobs: int) -> int:
    if jobs < 1:
        raise CliError("--jobs must be at least 1")
    return jobs


# -- subcommands -----------------------------------------------------------


def cmd_parse(args) -> int:
    jobs = _check_jobs(args.jobs)
    unique = deduplicate(_ingest(args))
    processed = map_records(process_phase1, unique, jobs)
    docs = [p.stages[0] for p in processed if p.reason is None]
    _write_docs(args.output, docs)
    _report_rejects(reject_records(unique, processed), args.rejects)
    return EXIT_OK


def _stage(expect: str, fn: Callable[[DocumentRoot], DocumentRoot]):
    def run(args) -> int:
        jobs = _check_jobs(args.jobs)
        docs = _load_docs(args.input, (expect,), args.permissive)
        _write_docs(args.output, map_records(fn(args), docs, jobs))
        return EXIT_OK

    return run


cmd_shell = _stage("phase-1", lambda args: expand_run_nodes)
cmd_enrich = _stage("phase-2", lambda args: partial(enrich, schemas=_schemas(args.schemas)))
cmd_abstract = _stage("phase-3", lambda args: partial(abstract_document, table=_table(args.table)))


def cmd_check(args) -> int:
    rules = _rules(args.rules)
    accepted = ("phase-3", "abstracted")
    gold = _load_docs(args.gold, accepted, args.permissive)
    corpus = _load_docs(args.corpus, accepted, args.permissive)
    report = corpus_report(gold, corpus, rules)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(report.format())
    if args.fail_on_violation and (report.gold.violations or report.corpus.violations):
        return EXIT_VIOLATIONS
    return EXIT_OK


def cmd_stats(args) -> int:
    if args.top < 1:
        raise CliError("--top must be at least 1")
    docs = _load_docs(args.input, ("phase-2",), args.permissive)
    for name, count in rank_commands(docs, args.top):
        print(f"{count}\t{name}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    jobs = _check_jobs(args.jobs)
    schemas, table = _schemas(args.schemas), _table(args.table)
    manifest = None
    if args.manifest:
        try:
            manifest = load_manifest(args.manifest)
        except (OSError, ValueError) as exc:
            raise CliError(f"bad manifest: {exc}") from None
    records = _ingest(args)
    result = run_pipeline(records, schemas, table, manifest=manifest, jobs=jobs)
    try:
        result.write(args.output)
    except OSError as exc:
        raise CliError(f"cannot write {args.output}: {exc}") from None
    _report_rejects(result.rejects, None)
    n = len(result.documents["abstracted"]["corpus"])
    print(f"{len(records)} files, {n} parsed, {len(result.rejects)} rejected -> {args.output}", file=sys.stderr)
    return EXIT_OK


# -- argument parsing ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dockast", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def io(sp, output=True):
        sp.add_argument("--input", required=True)
        if output:
            sp.add_argument("--output", required=True)

    def jobs(sp):
        sp.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")

    def permissive(sp):
        sp.add_argument("--permissive", action="store_true",
                        help="accept unknown keys, legacy 40-hex ids and lines without a representation marker")

    def ingest_opts(sp):
        sp.add_argument("--gold-marker", metavar="GLOB", help="relative paths matching GLOB are tagged gold")
        sp.add_argument("--ingest-time", metavar="ISO", help="fixed ingest timestamp (default: file mtime)")
        jobs(sp)

    sp = sub.add_parser("parse", help="ingest a directory and write Phase-I ASTs")
    io(sp)
    ingest_opts(sp)
    sp.add_argument("--rejects", metavar="FILE", help="also write rejected files as JSONL")
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("shell", help="Phase I -> Phase II: parse embedded shell")
    io(sp)
    jobs(sp)
    permissive(sp)
    sp.set_defaults(func=cmd_shell)

    sp = sub.add_parser("enrich", help="Phase II -> Phase III: apply command schemas")
    io(sp)
    jobs(sp)
    permissive(sp)
    sp.add_argument("--schemas", metavar="DIR", help="directory of *.yaml schemas (default: bundled)")
    sp.set_defaults(func=cmd_enrich)

    sp = sub.add_parser("abstract", help="Phase III -> abstracted: tag literals")
    io(sp)
    jobs(sp)
    permissive(sp)
    sp.add_argument("--table", metavar="FILE", help="abstraction table TSV (default: bundled)")
    sp.set_defaults(func=cmd_abstract)

    sp = sub.add_parser("check", help="evaluate rules over gold and corpus streams")
    sp.add_argument("--gold", required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--rules", metavar="FILE", help="rule JSON (default: bundled)")
    sp.add_argument("--json", action="store_true", help="print the report as JSON")
    sp.add_argument("--fail-on-violation", action="store_true", help="exit 1 when any violation is found")
    permissive(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("stats", help="rank command names in Phase-II ASTs")
    io(sp, output=False)
    sp.add_argument("--top", type=int, default=10)
    permissive(sp)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("pipeline", help="run every stage and write the artifact tree")
    io(sp)
    ingest_opts(sp)
    sp.add_argument("--schemas", metavar="DIR")
    sp.add_argument("--table", metavar="FILE")
    sp.add_argument("--manifest", metavar="FILE", help="JSONL metadata keyed by source_path")
    sp.set_defaults(func=cmd_pipeline)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"dockast: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
