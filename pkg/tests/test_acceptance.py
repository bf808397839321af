"""Acceptance suite: one PASS/FAIL line per criterion, printed at the end of the run.

Each criterion is one test; the summary lines are collected in ``RESULTS``
and written by ``pytest_terminal_summary`` in ``conftest.py``.
"""

import functools
import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

from qccs import qlin
from qccs.bisim import Context, congruence_harness, ground_bisim, open_bisim, replay_witness
from qccs.corpus import PSI, counterexample_pairs, instantiate, load, manifest
from qccs.corpus.runner import run_one
from qccs.dist import Distribution, compose, convex_sum, left_decompose, lift_check
from qccs.family import default_family
from qccs.logic import Checker, Truth, distinguish, parse_formula
from qccs.semantics import Configuration, barb_states, barb_value, build_plts
from qccs.syntax import parse_process

from oracles import lift_hall, naive_weak_bisim, random_fraction_dist
from terms import classical_env, classical_term, classical_variant, config

RESULTS: dict = {}
BB84_RESULTS: dict = {}


def criterion(number: int, title: str):
    """Record a PASS/FAIL line for the wrapped test, re-raising failures."""
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*a, **k):
            t0 = time.perf_counter()
            try:
                detail = fn(*a, **k)
            except BaseException as exc:
                RESULTS[number] = f"FAIL criterion {number} ({title}): {type(exc).__name__}: {exc}"[:300]
                raise
            dt = time.perf_counter() - t0
            extra = f"; {detail}" if detail else ""
            RESULTS[number] = f"PASS criterion {number} ({title}) in {dt:.1f}s{extra}"
        return wrapper
    return deco


# ═══════════════════════════════════════════════════════════════════════
# 1. Measurement counterexample
# ═══════════════════════════════════════════════════════════════════════


@criterion(1, "counterexample")
def test_counterexample():
    t0 = time.perf_counter()
    inst, [(m, i), (hm, hi)] = counterexample_pairs()
    plain = open_bisim(m, i, inst.sem, default_family())
    assert plain.equivalent and plain.summary() == "equivalent (modulo family default)"
    had = open_bisim(hm, hi, inst.sem, default_family())
    assert not had.equivalent
    assert replay_witness(had)
    f = distinguish(had.game, *had.roots)
    # verify the formula from its printed form on a fresh checker
    g = parse_formula(str(f))
    ch = Checker(inst.sem)
    assert ch.sat(hm, g) is Truth.TRUE
    assert ch.sat(hi, g) is Truth.FALSE
    dt = time.perf_counter() - t0
    assert dt < 5.0, f"took {dt:.2f}s"
    return f"formula {g}"


# ═══════════════════════════════════════════════════════════════════════
# 2. BB84 against its specification
# ═══════════════════════════════════════════════════════════════════════


def _bb84(n):
    inst = load("bb84", n)
    t, _, rho = instantiate("BB84", n)
    s, _, _ = instantiate("BB84_spc", n)
    return open_bisim(Configuration(t, rho), Configuration(s, rho), inst.sem)


@criterion(2, "BB84 equivalent to BB84_spc, n=1 under 30s and n=2 under 10min")
def test_bb84_open_bisimilar():
    r1 = _bb84(1)
    assert r1.equivalent and r1.elapsed < 30, (r1.verdict, r1.elapsed)
    r2 = _bb84(2)
    assert r2.equivalent and r2.elapsed < 600, (r2.verdict, r2.elapsed)
    BB84_RESULTS.update({1: r1, 2: r2})
    return f"n=1 {r1.elapsed:.1f}s ({len(r1.game.space)} states), n=2 {r2.elapsed:.1f}s ({len(r2.game.space)} states)"


# ═══════════════════════════════════════════════════════════════════════
# 3. The tester
# ═══════════════════════════════════════════════════════════════════════


@criterion(3, "TestBB84 satisfies psi_p and never fails")
def test_testbb84():
    inst = load("bb84", 1)
    t, _, rho = instantiate("TestBB84", 1)
    c = Configuration(t, rho)
    ch = Checker(inst.sem)
    for p in (0.1, 0.5, 1.0):
        assert ch.sat(c, parse_formula(PSI, {"p": p})) is Truth.TRUE, p
    never = parse_formula("<fail!0>true")
    ch.state(c)
    n = len(ch.space)
    assert all(ch.sat(s, never) is Truth.FALSE for s in range(n))
    space, i = build_plts(c, inst.sem)
    v = barb_value(space.plts(), i, barb_states(space, "fail"))
    assert abs(v) <= 1e-9
    return f"{n} reachable configurations, fail barb {v:.1e}"


# ═══════════════════════════════════════════════════════════════════════
# 4. Lifting
# ═══════════════════════════════════════════════════════════════════════


@criterion(4, "lifting agrees with the brute-force oracle")
def test_lifting(rng):
    for _ in range(1000):
        left = list(range(int(rng.integers(1, 6))))
        right = [f"t{k}" for k in range(int(rng.integers(1, 6)))]
        rel = {(s, t) for s in left for t in right if rng.random() < rng.uniform(0.2, 0.9)}
        d, e = random_fraction_dist(rng, left), random_fraction_dist(rng, right)
        got = lift_check(rel, Distribution({k: float(v) for k, v in d.items()}),
                         Distribution({k: float(v) for k, v in e.items()}))
        assert bool(got) == lift_hall(rel, d, e)
    worst = 0.0
    for _ in range(200):
        S, T = list(range(5)), list(range(10, 15))
        rel = {(s, t) for s in S for t in T if rng.random() < 0.7} | {(s, 10 + s) for s in S}
        ws = rng.dirichlet(np.ones(3))
        pieces = [(float(w), Distribution(dict(zip(S, rng.dirichlet(np.ones(5)))))) for w in ws]
        theta = convex_sum(pieces).map(lambda s: 10 + s)
        parts = left_decompose(rel, pieces, theta)
        rebuilt = convex_sum(zip(ws, parts))
        worst = max(worst, max(abs(rebuilt[t] - theta[t]) for t in T))
        assert all(lift_check(rel, di, ti) for (_, di), ti in zip(pieces, parts))
    assert worst <= 1e-9
    # composition on every relation over 2-point sets and every distribution on a 1/2 grid
    A, B, C = (0, 1), ("m", "n"), ("x", "y")
    grid = lambda X: [Distribution(dict(zip(X, (Fraction(k, 2), 1 - Fraction(k, 2))))) for k in range(3)]
    rels = lambda X, Y: [frozenset(c) for k in range(5) for c in itertools.combinations(itertools.product(X, Y), k)]
    memo = {}

    def lifts(r, i, d, j, e):
        if (r, i, j) not in memo:
            memo[(r, i, j)] = bool(lift_check(r, d, e))
        return memo[(r, i, j)]

    gA, gB, gC = (list(enumerate(grid(X))) for X in (A, B, C))
    for r1 in rels(A, B):
        for r2 in rels(B, C):
            r12 = frozenset(compose(r1, r2))
            for i, d in gA:
                for k, f in gC:
                    if any(lifts(r1, i, d, j, e) and lifts(r2, j, e, k, f) for j, e in gB):
                        assert lifts(r12, i, d, k, f)
    return f"left_decompose error {worst:.1e}"


# ═══════════════════════════════════════════════════════════════════════
# 5. Quantum kernel
# ═══════════════════════════════════════════════════════════════════════


@criterion(5, "quantum kernel")
def test_quantum_kernel(rng):
    reg = qlin.QReg(("a", "b", "c"))
    m = qlin.basis_measurement([0, 1])
    for _ in range(1000):
        rho = qlin.DensityOp(reg, qlin.random_density(rng, 8, int(rng.integers(1, 9))))
        total = sum(p for _, p, _ in qlin.measure(m, rho, ("b", "c")))
        assert abs(total - 1.0) <= 1e-9
    reg2 = qlin.QReg(("a", "b"))
    bell = qlin.DensityOp.from_vector(reg2, (qlin.ket("00") + qlin.ket("11")) / np.sqrt(2))
    red = qlin.partial_trace(bell, ["b"])
    assert np.max(np.abs(red.mat - np.eye(2) / 2)) <= 1e-9
    fam = default_family()
    worst = 0.0
    members = fam.members(("a", "b"))
    for member in members:
        ks = [np.eye(4, dtype=complex)]
        for gname, tg in member:
            op = fam._by_name[gname].op
            ks = [qlin.embed(k, tg, reg2) @ prev for k in op.kraus for prev in ks]
        s = sum(k.conj().T @ k for k in ks)
        worst = max(worst, float(np.max(np.abs(s - np.eye(4)))))
    assert worst <= 1e-9
    return f"{len(members)} family members on two qubits"


# ═══════════════════════════════════════════════════════════════════════
# 6. Ground bisimilarity against the fixpoint oracle
# ═══════════════════════════════════════════════════════════════════════


def _size(sem, c):
    return len(build_plts(c, sem)[0])


@criterion(6, "ground_bisim matches the all-relations fixpoint")
def test_ground_against_oracle(rng):
    defs, sem = classical_env()
    done = eq = 0
    while done < 200:
        p = classical_term(rng)
        q = classical_variant(rng, p) if rng.random() < 0.6 else classical_term(rng)
        cp, cq = config(sem, p), config(sem, q)
        if max(_size(sem, cp), _size(sem, cq)) > 6:
            continue
        res = ground_bisim(cp, cq, sem)
        assert res.relation_pairs() == naive_weak_bisim(res.game.plts), (p, q)
        done += 1
        eq += res.equivalent
    return f"{eq} equivalent / {done - eq} distinguished"


# ═══════════════════════════════════════════════════════════════════════
# 7. Relations and contexts
# ═══════════════════════════════════════════════════════════════════════


def _is_equivalence(res) -> bool:
    n = len(res.game.space)
    pairs = res.relation_pairs()
    refl = all((s, s) in pairs for s in range(n))
    sym = all((b, a) in pairs for a, b in pairs)
    succ: dict = {}
    for a, b in pairs:
        succ.setdefault(a, set()).add(b)
    trans = all(succ[b] <= succ[a] for a, b in pairs)
    return refl and sym and trans


@criterion(7, "corpus relations are equivalences and survive static contexts")
def test_relations_and_contexts():
    checked = 0
    for run in manifest():
        if run["kind"] != "bisim":
            continue
        if run.get("slow"):
            res = BB84_RESULTS.get(run.get("n")) if run["expected"] == "equivalent" else None
            if res is None:
                res = run_one(run).result
        else:
            res = run_one(run).result
        assert _is_equivalence(res), run["name"]
        checked += 1
    wrapped = 0
    inst, [(m, i), _] = counterexample_pairs()
    d = inst.defs
    ctxs = [
        Context("par", parse_process("Hd[e].c!0.nil", d), "|| Hd[e].c!0"),
        Context("relabel", {"c": "c"}, "[c->c]"),
        Context("restrict", {"c"}, "\\ {c}"),
        Context("if", parse_process("if 1 = 1 then nil", d).cond, "if 1 = 1"),
    ]
    for e in congruence_harness(m, i, inst.sem, ctxs):
        assert e.preserved, str(e.context)
        wrapped += 1
    bb = load("bb84", 1)
    t, _, rho = instantiate("BB84", 1)
    s, _, _ = instantiate("BB84_spc", 1)
    bd = bb.defs
    ctxs = [
        Context("par", parse_process("Tester", bd), "|| Tester"),
        Context("relabel", {"key_a": "key_b"}, "[key_a->key_b]"),
        Context("restrict", {"key_b"}, "\\ {key_b}"),
        Context("if", parse_process("if 0 = 0 then nil", bd).cond, "if 0 = 0"),
    ]
    for e in congruence_harness(Configuration(t, rho), Configuration(s, rho), bb.sem, ctxs):
        assert e.preserved, str(e.context)
        wrapped += 1
    return f"{checked} corpus relations, {wrapped} wrapped pairs"
