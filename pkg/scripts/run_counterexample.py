"""Check the measurement counterexample and print the distinguishing formula."""

import argparse
import json
import time

from qccs.bisim import open_bisim, replay_witness
from qccs.corpus import counterexample_pairs
from qccs.logic import Checker, distinguish


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sigma", default="+", help="ket of the environment qubit (default +)")
    ap.add_argument("--json", action="store_true", help="also print the witness document")
    args = ap.parse_args()

    t0 = time.perf_counter()
    inst, [plain, had] = counterexample_pairs(args.sigma)
    r1 = open_bisim(*plain, inst.sem)
    print(f"M01[q; x].nil  vs  I[q].nil        : {r1.summary()}")
    r2 = open_bisim(*had, inst.sem)
    print(f"Hd[q].M01[q; x].nil vs Hd[q].I[q].nil: {r2.summary()}")
    if r2.witness is not None:
        print(f"witness replays: {replay_witness(r2)}")
        f = distinguish(r2.game, *r2.roots)
        ch = Checker(inst.sem)
        print(f"formula: {f}")
        print(f"  left {ch.sat(had[0], f)}, right {ch.sat(had[1], f)}")
        if args.json:
            print(json.dumps(r2.to_document(), indent=2))
    print(f"elapsed {time.perf_counter() - t0:.2f}s")


if __name__ == "__main__":
    main()
