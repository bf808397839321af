"""Run the regression manifest and report one line per entry."""

import argparse
import sys

from qccs.corpus.runner import run_manifest


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--include-slow", action="store_true", help="include key length 2")
    ap.add_argument("--only", action="append", help="run only this entry (repeatable)")
    args = ap.parse_args()
    outs = run_manifest(include_slow=args.include_slow, only=args.only,
                        on_result=lambda o: print(o.line(), flush=True))
    bad = sum(not o.ok for o in outs)
    print(f"{len(outs) - bad}/{len(outs)} runs as expected")
    sys.exit(4 if bad else 0)


if __name__ == "__main__":
    main()
