"""Command line interface: ``qccs parse|lts|bisim|check|barbs|corpus``.

Exit codes: 0 ok, 1 other error, 2 parse error, 3 state budget exceeded,
4 corpus verdict mismatch, 5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .bisim import bisim, replay_witness
from .family import default_family, identity_family, load_family
from .logic import Checker, FormulaError, distinguish, parse_formula
from .semantics import (
    MAX_STATES, BudgetExceeded, Configuration, Semantics, barb_states, barb_value, build_plts,
    initial_state,
)
from .syntax import ParseError, check_legal, parse_file, parse_process, source_text
from .corpus import state_from_document

EXIT_OK, EXIT_OTHER, EXIT_PARSE, EXIT_BUDGET, EXIT_MISMATCH, EXIT_IO = 0, 1, 2, 3, 4, 5

log = logging.getLogger("qccs")


class UsageError(Exception):
    pass


# ═══════════════════════════════════════════════════════════════════════
# Helpers
# ═══════════════════════════════════════════════════════════════════════


def _family(spec: str | None):
    if spec in (None, "default"):
        return default_family()
    if spec == "identity":
        return identity_family()
    return load_family(spec)


def _state(defs, sem, spec: str | None):
    if spec is None:
        return initial_state(sem.reg, defs.init)
    p = Path(spec)
    text = p.read_text(encoding="utf-8") if p.exists() else spec
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = text.strip()  # a bare ket string
    return state_from_document(sem.reg, doc)


def _term(defs, text: str | None, what: str = "process"):
    t = parse_process(text, defs) if text is not None else defs.main
    if t is None:
        raise UsageError(f"no {what}: the file has no 'main' and no --term was given")
    rep = check_legal(t, defs)
    if not rep.ok:
        raise UsageError(f"{what} is not legal: {rep}")
    return t


def _checked(defs, t, side: str):
    if t is None:
        raise UsageError(f"the {side} file has no 'main'")
    rep = check_legal(t, defs)
    if not rep.ok:
        raise UsageError(f"{side} process is not legal: {rep}")
    return t


def _params(items) -> dict:
    out = {}
    for it in items or ():
        if "=" not in it:
            raise UsageError(f"--param expects name=value, got {it!r}")
        k, v = it.split("=", 1)
        out[k.strip()] = float(v)
    return out


def _emit(args, doc: dict):
    text = json.dumps(doc, indent=2, default=str)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


# ═══════════════════════════════════════════════════════════════════════
# Commands
# ═══════════════════════════════════════════════════════════════════════


def cmd_parse(args) -> int:
    defs = parse_file(args.file)
    print(source_text(defs), end="")
    bad = 0
    for d in defs.consts.values():
        rep = check_legal(d.body, defs)
        if not rep.ok:
            print(f"// def {d.name}: {rep}")
            bad += 1
    if defs.main is not None:
        print(f"// main: {check_legal(defs.main, defs)}")
    return EXIT_OK if not bad else EXIT_OTHER


def cmd_lts(args) -> int:
    defs = parse_file(args.file)
    sem = Semantics(defs, p_floor=args.p_floor)
    c = Configuration(_term(defs, args.term), _state(defs, sem, args.state))
    space, i = build_plts(c, sem, args.max_states)
    doc = space.export()
    doc["initial"] = i
    _emit(args, doc)
    print(f"{len(space)} states", file=sys.stderr)
    return EXIT_OK


def cmd_bisim(args) -> int:
    defs = parse_file(args.file_a)
    left_main, right_main = defs.main, None
    if args.file_b:
        other = parse_file(args.file_b)
        right_main = other.main
        defs = defs.merged(other)
    elif args.right is None:
        raise UsageError("give a second file or --right")
    left_t = _term(defs, args.left, "left process") if args.left else _checked(defs, left_main, "left")
    right_t = _term(defs, args.right, "right process") if args.right else _checked(defs, right_main, "right")
    sem = Semantics(defs)
    rho = _state(defs, sem, args.state)
    fam = _family(args.family)
    res = bisim(Configuration(left_t, rho), Configuration(right_t, rho), sem, args.mode, fam,
                max_states=args.max_states, tol=args.tol)
    print(res.summary())
    doc = res.to_document()
    if res.witness is not None:
        doc["witness_replays"] = replay_witness(res)
        if args.formula:
            doc["formula"] = str(distinguish(res.game, *res.roots))
            print(doc["formula"])
    if args.out or args.json:
        _emit(args, doc)
    return EXIT_OK


def cmd_check(args) -> int:
    defs = parse_file(args.file)
    sem = Semantics(defs)
    c = Configuration(_term(defs, args.term), _state(defs, sem, args.state))
    p = Path(args.formula)
    text = p.read_text(encoding="utf-8") if p.exists() else args.formula
    f = parse_formula(text, _params(args.param), defs.qchannels)
    ch = Checker(sem, family=_family(args.family))
    ch.space.max_states = args.max_states
    verdict = ch.sat(c, f)
    print(verdict)
    if args.witness:
        i = ch.state(c)
        for key, w in ch.witnesses.items():
            if w.state == i:
                print(json.dumps({"action": str(w.action),
                                  "theta": [[p, ch.space.configs[s].key] for s, p in w.theta.items()]}))
    return EXIT_OK


def cmd_barbs(args) -> int:
    defs = parse_file(args.file)
    sem = Semantics(defs)
    c = Configuration(_term(defs, args.term), _state(defs, sem, args.state))
    space, i = build_plts(c, sem, args.max_states)
    v = barb_value(space.plts(), i, barb_states(space, args.channel))
    print(f"{v:.12g}")
    return EXIT_OK


def cmd_corpus(args) -> int:
    from .corpus.runner import run_manifest

    fam = _family(args.family) if args.family else None
    outs = run_manifest(include_slow=args.include_slow, only=args.only, family=fam,
                        max_states=args.max_states, on_result=lambda o: print(o.line(), flush=True))
    bad = [o for o in outs if not o.ok]
    print(f"{len(outs) - len(bad)}/{len(outs)} runs as expected")
    return EXIT_MISMATCH if bad else EXIT_OK


# ═══════════════════════════════════════════════════════════════════════
# Argument parsing
# ═══════════════════════════════════════════════════════════════════════


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--max-states", type=int, default=MAX_STATES, help="state budget")
    common.add_argument("--tol", type=float, default=1e-9, help="numerical tolerance")
    common.add_argument("--family", default=None,
                        help="super-operator family: default, identity or a JSON file")
    common.add_argument("--seed", type=int, default=0, help="random seed (for sampled runs)")
    common.add_argument("--threads", type=int, default=1,
                        help="accepted for compatibility; runs are single-threaded")
    common.add_argument("--out", default=None, help="write the JSON document here")
    common.add_argument("--state", default=None,
                        help='initial state: JSON {"ket": ".."} / {"matrix": ..}, a file, or a ket string')
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="qccs", description="qCCS toolkit")
    ap.add_argument("--version", action="version", version=f"qccs {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("parse", parents=[common], help="parse a file and print it back")
    p.add_argument("file")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("lts", parents=[common], help="export the reachable pLTS as JSON")
    p.add_argument("file")
    p.add_argument("--term", default=None, help="process term (default: main)")
    p.add_argument("--p-floor", type=float, default=1e-12, help="drop measurement branches below this")
    p.set_defaults(func=cmd_lts)

    p = sub.add_parser("bisim", parents=[common], help="decide bisimilarity of two processes")
    p.add_argument("file_a")
    p.add_argument("file_b", nargs="?")
    p.add_argument("--left", default=None, help="left term (default: main of the first file)")
    p.add_argument("--right", default=None, help="right term (default: main of the second file)")
    p.add_argument("--mode", choices=["ground", "open", "strong"], default="open")
    p.add_argument("--formula", action="store_true", help="print a distinguishing formula")
    p.add_argument("--json", action="store_true", help="print the result document")
    p.set_defaults(func=cmd_bisim)

    p = sub.add_parser("check", parents=[common], help="model check a formula")
    p.add_argument("file")
    p.add_argument("formula", help="formula text or a file containing it")
    p.add_argument("--term", default=None)
    p.add_argument("--param", action="append", help="bind a weight parameter, e.g. p=0.5")
    p.add_argument("--witness", action="store_true", help="print the derivative found for the top diamond")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("barbs", parents=[common], help="maximal probability of a barb")
    p.add_argument("file")
    p.add_argument("channel")
    p.add_argument("--term", default=None)
    p.set_defaults(func=cmd_barbs)

    p = sub.add_parser("corpus", parents=[common], help="run the regression manifest")
    p.add_argument("--include-slow", action="store_true", help="also run key length 2")
    p.add_argument("--only", action="append", help="run just this entry (repeatable)")
    p.set_defaults(func=cmd_corpus)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ParseError, FormulaError) as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except BudgetExceeded as e:
        print(f"budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
