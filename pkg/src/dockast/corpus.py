"""Corpus ingestion, deduplication and the five-representation pipeline.

Output layout (relative to the output directory)::

    0a-original-dockerfile-sources/{gold,corpus}.tar   sources/<id>.Dockerfile
    0b-deduplicated-dockerfile-sources/{gold,corpus}.tar
                                                       deduplicated-sources/<sha>.Dockerfile
    1-phase-1-asts/{gold,corpus}.jsonl
    2-phase-2-dockerfile-asts/{gold,corpus}.jsonl
    3-phase-3-dockerfile-asts/{gold,corpus}.jsonl
    4-abstracted-asts/{gold,corpus}.jsonl
    5-dockerfile-metadata/{gold,corpus}.jsonl
    rejects.jsonl

The corpus stream holds every file; the gold stream holds the gold-tagged
subset. Everything is sorted by file hash (sources by path) before it is
written, so the bytes do not depend on the order files were read in.
"""
from __future__ import annotations

import fnmatch
import hashlib
import io
import json
import logging
import tarfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import partial
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from .abstraction import AbstractionTable, abstract_document
from .codec import dumps_compact, encode_documents
from .dockerfile import DockerfileError, parse_document, validate_known_directives
from .enrich import enrich
from .schema import CommandSchema
from .shell import expand_run_nodes
from .tree import DocumentRoot

log = logging.getLogger(__name__)

TAGS = ("gold", "corpus")
STREAMS = ("gold", "corpus")

REP0 = "0a-original-dockerfile-sources"
REP1 = "0b-deduplicated-dockerfile-sources"
REP2 = "1-phase-1-asts"
REP3 = "2-phase-2-dockerfile-asts"
REP4 = "3-phase-3-dockerfile-asts"
REP5 = "4-abstracted-asts"
META = "5-dockerfile-metadata"
REJECTS = "rejects.jsonl"

STAGES = {"phase-1": REP2, "phase-2": REP3, "phase-3": REP4, "abstracted": REP5}

_RESERVED_META = frozenset({"file_sha", "source_path", "tag", "ingest_time"})


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def format_time(ts: float | datetime) -> str:
    if not isinstance(ts, datetime):
        ts = datetime.fromtimestamp(ts, tz=timezone.utc)
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class CorpusRecord:
    file_sha: str
    source_path: str
    tag: str
    data: bytes = field(repr=False)
    ingest_time: str

    def __post_init__(self) -> None:
        if self.tag not in TAGS:
            raise ValueError(f"tag must be one of {TAGS}, got {self.tag!r}")

    @classmethod
    def from_bytes(cls, source_path: str, data: bytes, tag: str = "corpus", ingest_time: str = "1970-01-01T00:00:00Z") -> CorpusRecord:
        return cls(sha256_hex(data), source_path, tag, data, ingest_time)


GoldMarker = Callable[[str], bool] | str | None


def _gold_predicate(marker: GoldMarker) -> Callable[[str], bool]:
    if marker is None:
        return lambda path: False
    if isinstance(marker, str):
        return lambda path: fnmatch.fnmatchcase(path, marker)
    return marker


def ingest(
    directory: str | Path,
    gold_marker: GoldMarker = None,
    *,
    ingest_time: str | None = None,
) -> list[CorpusRecord]:
    """Collect every file below ``directory`` whose name contains
    "dockerfile" (any case).

    ``gold_marker`` is a predicate or glob over the POSIX path relative to
    ``directory``. The ingest time defaults to each file's modification
    time; pass ``ingest_time`` to pin it. Unreadable files are skipped with
    a warning.
    """
    root = Path(directory)
    if not root.is_dir():
        raise NotADirectoryError(str(root))
    is_gold = _gold_predicate(gold_marker)
    records = []
    for path in sorted(root.rglob("*")):
        if "dockerfile" not in path.name.lower() or not path.is_file():
            continue
        rel = path.relative_to(root).as_posix()
        try:
            data = path.read_bytes()
            stamp = ingest_time or format_time(path.stat().st_mtime)
        except OSError as exc:
            log.warning("skipping unreadable file %s: %s", rel, exc)
            continue
        records.append(CorpusRecord(sha256_hex(data), rel, "gold" if is_gold(rel) else "corpus", data, stamp))
    return records


def deduplicate(records: Iterable[CorpusRecord]) -> list[CorpusRecord]:
    """Keep one record per distinct hash (the smallest source path),
    sorted by hash."""
    best: dict[str, CorpusRecord] = {}
    for rec in records:
        cur = best.get(rec.file_sha)
        if cur is None or rec.source_path < cur.source_path:
            best[rec.file_sha] = rec
    return [best[k] for k in sorted(best)]


def load_manifest(path: str | Path) -> dict[str, dict[str, Any]]:
    """Sidecar metadata: JSONL objects keyed by ``source_path``."""
    out: dict[str, dict[str, Any]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if not isinstance(obj, dict) or "source_path" not in obj:
                raise ValueError(f"{path}:{lineno}: manifest entries need a source_path")
            out[obj["source_path"]] = {k: v for k, v in obj.items() if k not in _RESERVED_META}
    return out


def metadata_record(rec: CorpusRecord, passthrough: Mapping[str, Any] | None = None) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "file_sha": rec.file_sha,
        "source_path": rec.source_path,
        "tag": rec.tag,
        "ingest_time": rec.ingest_time,
    }
    for key in sorted(passthrough or {}):
        if key not in _RESERVED_META:
            obj[key] = passthrough[key]
    return obj


# -- per-file stages -------------------------------------------------------


@dataclass(frozen=True)
class Processed:
    file_sha: str
    stages: tuple[DocumentRoot, ...] = ()
    reason: str | None = None
    error: str | None = None


def phase1(rec: CorpusRecord) -> DocumentRoot:
    try:
        text = rec.data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DockerfileError(f"not UTF-8: {exc}") from None
    doc = parse_document(text, rec.file_sha)
    report = validate_known_directives(doc.root)
    if not report.ok:
        raise DockerfileError(f"unknown directives {list(report.offending)}")
    return doc


def process_phase1(rec: CorpusRecord) -> Processed:
    try:
        return Processed(rec.file_sha, (phase1(rec),))
    except DockerfileError as exc:
        return Processed(rec.file_sha, reason=type(exc).__name__, error=str(exc))


def process_record(rec: CorpusRecord, schemas: Mapping[str, CommandSchema], table: AbstractionTable) -> Processed:
    first = process_phase1(rec)
    if first.reason is not None:
        return first
    doc1 = first.stages[0]
    doc2 = expand_run_nodes(doc1)
    doc3 = enrich(doc2, schemas)
    doc4 = abstract_document(doc3, table)
    return Processed(rec.file_sha, (doc1, doc2, doc3, doc4))


def map_records(fn: Callable, records: Sequence, jobs: int = 1) -> list:
    if jobs <= 1 or len(records) < 2:
        return [fn(r) for r in records]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, records, chunksize=max(1, len(records) // (jobs * 4))))


# -- artifacts -------------------------------------------------------------


def tar_bytes(members: Iterable[tuple[str, bytes]]) -> bytes:
    """An uncompressed tar with fixed metadata, so equal inputs give equal bytes."""
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w", format=tarfile.USTAR_FORMAT) as tar:
        for name, data in members:
            info = tarfile.TarInfo(name)
            info.size = len(data)
            info.mtime = 0
            info.mode = 0o644
            info.uid = info.gid = 0
            info.uname = info.gname = ""
            tar.addfile(info, io.BytesIO(data))
    return buf.getvalue()


def jsonl_bytes(objs: Iterable[Mapping[str, Any]]) -> bytes:
    return "".join(dumps_compact(o) + "\n" for o in objs).encode("utf-8")


@dataclass
class PipelineResult:
    artifacts: dict[str, bytes]
    rejects: list[dict[str, Any]]
    documents: dict[str, dict[str, list[DocumentRoot]]]

    def shas(self, stage: str, stream: str = "corpus") -> list[str]:
        return [d.file_sha for d in self.documents[stage][stream]]

    def write(self, outdir: str | Path) -> list[Path]:
        outdir = Path(outdir)
        written = []
        for rel in sorted(self.artifacts):
            path = outdir / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(self.artifacts[rel])
            written.append(path)
        return written


def _streams(items: Sequence, tag_of: Callable) -> dict[str, list]:
    return {"gold": [x for x in items if tag_of(x) == "gold"], "corpus": list(items)}


def run_pipeline(
    records: Iterable[CorpusRecord],
    schemas: Mapping[str, CommandSchema],
    table: AbstractionTable,
    *,
    manifest: Mapping[str, Mapping[str, Any]] | None = None,
    jobs: int = 1,
) -> PipelineResult:
    """Run every representation over ``records``.

    Records may contain duplicates: the original-sources archive keeps
    them, everything after it works on the deduplicated set. Files that
    fail Phase I are left out of the AST streams and listed in the rejects
    report.
    """
    originals = sorted(records, key=lambda r: (r.source_path, r.file_sha))
    unique = deduplicate(originals)
    tag = {r.file_sha: r.tag for r in unique}

    processed = map_records(partial(process_record, schemas=schemas, table=table), unique, jobs)

    artifacts: dict[str, bytes] = {}
    ids = {id(r): i for i, r in enumerate(originals, 1)}
    for stream, recs in _streams(originals, lambda r: r.tag).items():
        artifacts[f"{REP0}/{stream}.tar"] = tar_bytes((f"sources/{ids[id(r)]}.Dockerfile", r.data) for r in recs)
    for stream, recs in _streams(unique, lambda r: r.tag).items():
        artifacts[f"{REP1}/{stream}.tar"] = tar_bytes((f"deduplicated-sources/{r.file_sha}.Dockerfile", r.data) for r in recs)
        meta = [metadata_record(r, (manifest or {}).get(r.source_path)) for r in recs]
        artifacts[f"{META}/{stream}.jsonl"] = jsonl_bytes(meta)

    good = [p for p in processed if p.reason is None]
    documents: dict[str, dict[str, list[DocumentRoot]]] = {}
    for k, (stage, folder) in enumerate(STAGES.items()):
        docs = [p.stages[k] for p in good]
        documents[stage] = _streams(docs, lambda d: tag[d.file_sha])
        for stream, stream_docs in documents[stage].items():
            artifacts[f"{folder}/{stream}.jsonl"] = encode_documents(stream_docs)

    rejects = reject_records(unique, processed)
    artifacts[REJECTS] = jsonl_bytes(rejects)
    return PipelineResult(artifacts, rejects, documents)


def reject_records(unique: Sequence[CorpusRecord], processed: Sequence[Processed]) -> list[dict[str, Any]]:
    by_sha = {r.file_sha: r for r in unique}
    return [
        {"file_sha": p.file_sha, "source_path": by_sha[p.file_sha].source_path, "reason": p.reason, "error": p.error}
        for p in processed if p.reason is not None
    ]
