"""Multi-phase Dockerfile ASTs, command schemas, abstractions and tree rules."""
from __future__ import annotations

from .tree import AstNode, DocumentRoot, walk
from .codec import deserialize_jsonl, read_jsonl, serialize_jsonl, write_jsonl
from .dockerfile import parse_dockerfile, parse_document, validate_known_directives
from .shell import expand_run_nodes, parse_shell
from .schema import CommandSchema, SchemaSet, default_schemas, load_schema, load_schemas, parse_invocation
from .enrich import enrich, rank_commands
from .abstraction import AbstractionTable, abstract_document, default_table, load_table, strip_abstractions
from .rules import TreeRule, check_document, corpus_report, default_rules, load_rules
from .corpus import CorpusRecord, deduplicate, ingest, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "AbstractionTable",
    "AstNode",
    "CommandSchema",
    "CorpusRecord",
    "DocumentRoot",
    "SchemaSet",
    "TreeRule",
    "abstract_document",
    "check_document",
    "corpus_report",
    "deduplicate",
    "default_rules",
    "default_schemas",
    "default_table",
    "deserialize_jsonl",
    "enrich",
    "expand_run_nodes",
    "ingest",
    "load_rules",
    "load_schema",
    "load_schemas",
    "load_table",
    "parse_dockerfile",
    "parse_document",
    "parse_invocation",
    "parse_shell",
    "rank_commands",
    "read_jsonl",
    "run_pipeline",
    "serialize_jsonl",
    "strip_abstractions",
    "validate_known_directives",
    "walk",
]
