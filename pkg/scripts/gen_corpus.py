"""Regenerate the corpus source files from their templates."""

import argparse
from pathlib import Path

from qccs.corpus import files_dir, write_files


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--target", type=Path, default=None,
                    help=f"output directory (default: {files_dir()})")
    args = ap.parse_args()
    for p in write_files(args.target):
        print(p)


if __name__ == "__main__":
    main()
