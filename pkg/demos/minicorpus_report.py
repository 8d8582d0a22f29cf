"""Run the full pipeline over the bundled mini corpus and compare gold to the rest.

Usage: python3 demos/minicorpus_report.py [OUTPUT_DIR]
"""
import sys
import tempfile
from importlib import resources

from dockast import corpus_report, default_rules, default_schemas, default_table, ingest, rank_commands, run_pipeline


def main(outdir: str) -> None:
    root = resources.files("dockast") / "data" / "minicorpus"
    records = ingest(str(root), "gold/*", ingest_time="2020-01-01T00:00:00Z")
    result = run_pipeline(records, default_schemas(), default_table())
    result.write(outdir)
    print(f"wrote {len(result.artifacts)} artifacts to {outdir}")
    for r in result.rejects:
        print(f"rejected {r['source_path']}: {r['reason']}")

    print("\nmost common commands:")
    for name, count in rank_commands(result.documents["phase-2"]["corpus"], 5):
        print(f"  {count:>3}  {name}")

    docs = result.documents["phase-3"]
    print()
    print(corpus_report(docs["gold"], docs["corpus"], default_rules()).format())


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="dockast-"))
