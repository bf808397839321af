"""Regression runner over ``manifest.json``."""

from __future__ import annotations

import time
from dataclasses import dataclass

from ..bisim import bisim
from ..family import SuperOpFamily
from ..logic import Checker, parse_formula
from ..semantics import barb_states, barb_value, build_plts
from . import Instance, instance_for, manifest

BARB_TOL = 1e-9


@dataclass
class RunOutcome:
    name: str
    kind: str
    expected: object
    got: object
    ok: bool
    elapsed: float
    result: object = None

    def line(self) -> str:
        mark = "PASS" if self.ok else "FAIL"
        return f"{mark} {self.name}: expected {self.expected}, got {self.got} ({self.elapsed:.2f}s)"


def run_one(run: dict, family: SuperOpFamily | None = None, max_states: int = 200_000,
            inst: Instance | None = None) -> RunOutcome:
    inst = inst or instance_for(run)
    t0 = time.perf_counter()
    kind = run["kind"]
    if kind == "bisim":
        rho = inst.state(run["state"]) if "state" in run else inst.rho
        res = bisim(inst.config(run["left"], rho), inst.config(run["right"], rho), inst.sem,
                    run.get("mode", "open"), family, max_states=max_states)
        got = res.verdict
        ok = got == run["expected"]
    elif kind == "check":
        c = inst.config(run["term"])
        f = parse_formula(run["formula"], run.get("params"), inst.defs.qchannels)
        res = Checker(inst.sem).sat(c, f)
        got = str(res)
        ok = got == run["expected"]
    elif kind == "barb":
        space, i = build_plts(inst.config(run["term"]), inst.sem, max_states)
        got = barb_value(space.plts(), i, barb_states(space, run["chan"]))
        res = got
        ok = abs(got - run["expected"]) <= BARB_TOL
    else:
        raise ValueError(f"unknown run kind {kind!r}")
    return RunOutcome(run["name"], kind, run["expected"], got, ok, time.perf_counter() - t0, res)


def run_manifest(include_slow: bool = False, only: list[str] | None = None,
                 family: SuperOpFamily | None = None, max_states: int = 200_000, on_result=None):
    out = []
    cache: dict = {}
    for run in manifest():
        if only and run["name"] not in only:
            continue
        if run.get("slow") and not include_slow and not only:
            continue
        key = (run["source"], run.get("n"))
        if key not in cache:
            cache[key] = instance_for(run)
        o = run_one(run, family, max_states, cache[key])
        out.append(o)
        if on_result is not None:
            on_result(o)
    return out
