"""Follow one Dockerfile through every representation and print each tree."""
import json

from dockast import abstract_document, default_schemas, default_table, enrich, expand_run_nodes, parse_document
from dockast.codec import doc_to_obj
from dockast.corpus import sha256_hex

SOURCE = """\
FROM node:12
WORKDIR /app
COPY package.json .
RUN npm install --production && curl -fsSL https://example.com/install | sh
CMD ["node", "index.js"]
"""


def show(title, doc):
    run = doc_to_obj(doc)["children"][3]
    print(f"--- {title} ({doc.representation}): the RUN instruction")
    print(json.dumps(run, indent=2))


def main():
    phase1 = parse_document(SOURCE, sha256_hex(SOURCE.encode()))
    phase2 = expand_run_nodes(phase1)
    phase3 = enrich(phase2, default_schemas())
    abstracted = abstract_document(phase3, default_table())
    for title, doc in [("top-level parse", phase1), ("shell parse", phase2),
                       ("command schemas", phase3), ("literal tags", abstracted)]:
        show(title, doc)


if __name__ == "__main__":
    main()
