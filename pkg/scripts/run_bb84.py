"""BB84 against its specification for a given key length, plus the tester checks."""

import argparse
import time

from qccs.bisim import open_bisim
from qccs.corpus import MAX_N, PSI, instantiate, load
from qccs.logic import Checker, parse_formula
from qccs.semantics import Configuration, barb_states, barb_value, build_plts


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=1, choices=range(1, MAX_N + 1), help="key length")
    ap.add_argument("--literal", action="store_true",
                    help="compare the literal variants instead (expected: distinguished)")
    ap.add_argument("--max-states", type=int, default=200_000)
    args = ap.parse_args()

    inst = load("bb84", args.n)
    left, right = ("BB84_lit", "BB84_spc_lit") if args.literal else ("BB84", "BB84_spc")
    t, _, rho = instantiate(left, args.n)
    s, _, _ = instantiate(right, args.n)
    res = open_bisim(Configuration(t, rho), Configuration(s, rho), inst.sem, max_states=args.max_states)
    print(f"{left} vs {right} (n={args.n}): {res.summary()}  "
          f"[{len(res.game.space)} states, {len(res.game.history) - 1} rounds, {res.elapsed:.1f}s]")

    if args.n == 1 and not args.literal:
        tb, _, _ = instantiate("TestBB84", 1)
        c = Configuration(tb, rho)
        ch = Checker(inst.sem)
        for p in (0.1, 0.5, 1.0):
            print(f"TestBB84 |= psi_{p}: {ch.sat(c, parse_formula(PSI, {'p': p}))}")
        t0 = time.perf_counter()
        space, i = build_plts(c, inst.sem)
        for chan in ("fail", "suc"):
            v = barb_value(space.plts(), i, barb_states(space, chan))
            print(f"max probability of {chan}: {v:.12g}")
        print(f"barbs in {time.perf_counter() - t0:.2f}s")


if __name__ == "__main__":
    main()
