"""Serve a saved n-gram model over the external generator protocol.

    python -m dstforge.generator.serve MODEL.json
"""

import argparse
import json
import sys

from dstforge.generator.ngram import NGramModel


def serve(model: NGramModel, stdin=sys.stdin, stdout=sys.stdout) -> int:
    session = None
    for line in stdin:
        if not line.strip():
            continue
        msg = json.loads(line)
        op = msg.get("op")
        if op == "vocab":
            if msg.get("tokens") != model.vocab.tokens:
                print("vocab mismatch between engine and model", file=sys.stderr)
                return 1
        elif op == "start":
            session = model.start(msg["input"])
        elif op == "step":
            if session is None:
                print("step before start", file=sys.stderr)
                return 1
            scores = session.score_next(msg["emitted"])
            stdout.write(json.dumps({"scores": scores.tolist()}) + "\n")
            stdout.flush()
        elif op == "end":
            session = None
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("model")
    args = parser.parse_args(argv)
    with open(args.model, encoding="utf-8") as f:
        model = NGramModel.loads(f.read())
    return serve(model)


if __name__ == "__main__":
    sys.exit(main())
