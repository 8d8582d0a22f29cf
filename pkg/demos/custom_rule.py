"""Write a rule that uses literal tags: downloads must use HTTPS."""
from dockast import abstract_document, check_document, default_schemas, default_table, enrich, expand_run_nodes
from dockast import load_rules, parse_document

RULES = load_rules("""[
  {"id": "curl-https-only",
   "message": "fetch over https",
   "antecedent": {"type": "SC-CURL"},
   "consequent": {"type": "SC-CURL", "children": [{"type": "SC-CURL-URL", "abs": ["URL-PROTOCOL-HTTPS"]}]}}
]""")

SOURCE = """\
FROM alpine
RUN curl -fsSL https://example.com/ok.sh -o /tmp/ok.sh
RUN curl -fsSL http://example.com/plain.sh -o /tmp/plain.sh
"""


def main():
    doc = parse_document(SOURCE, "0" * 64)
    doc = abstract_document(enrich(expand_run_nodes(doc), default_schemas()), default_table())
    for v in check_document(doc, RULES):
        line = v.path[0] + 1
        print(f"instruction {line}: {v.rule_id}")


if __name__ == "__main__":
    main()
