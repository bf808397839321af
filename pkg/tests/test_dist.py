"""Distributions, lifting and weak derivatives."""

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qccs.dist import (
    PLTS, TAU, Distribution, DistError, WeakOracle, compose, convex_sum, derivative_vertices,
    left_decompose, lift_check, point,
)

from oracles import _hull_match, hull_vertices, lift_hall, random_fraction_dist


def random_relation(rng, left, right, density):
    return {(s, t) for s in left for t in right if rng.random() < density}


def random_acyclic_plts(rng, n, labels=("a", "b"), max_out=2):
    """tau edges only go to higher indices, so the result is tau-acyclic."""
    trans = [[] for _ in range(n)]
    for s in range(n):
        for _ in range(int(rng.integers(0, max_out + 1))):
            lab = TAU if rng.random() < 0.5 else str(rng.choice(labels))
            lo = s + 1 if lab == TAU else 0
            if lo >= n:
                continue
            k = int(rng.integers(1, min(3, n - lo) + 1))
            tgt = rng.choice(np.arange(lo, n), size=k, replace=False)
            w = rng.dirichlet(np.ones(k))
            trans[s].append((lab, Distribution(dict(zip(map(int, tgt), w)))))
    return PLTS(n, trans)


# ═══════════════════════════════════════════════════════════════════════
# Distribution basics
# ═══════════════════════════════════════════════════════════════════════


class TestDistribution:
    def test_zero_weights_dropped(self):
        d = Distribution({"a": 1.0, "b": 0.0})
        assert d.support() == {"a"} and len(d) == 1

    def test_must_sum_to_one(self):
        with pytest.raises(DistError):
            Distribution({"a": 0.5})
        with pytest.raises(DistError):
            Distribution({"a": 1.5, "b": -0.5})

    def test_close_equality_and_hash(self):
        d = Distribution({"a": 0.5, "b": 0.5})
        e = Distribution({"b": 0.5 + 1e-12, "a": 0.5 - 1e-12})
        assert d == e
        assert hash(d) == hash(e)

    def test_map_merges(self):
        d = Distribution({1: 0.25, 2: 0.25, 3: 0.5}).map(lambda s: s % 2)
        assert d[1] == pytest.approx(0.75) and d[0] == pytest.approx(0.25)

    def test_convex_sum(self):
        d = convex_sum([(0.5, point("a")), (0.5, Distribution({"a": 0.5, "b": 0.5}))])
        assert d["a"] == pytest.approx(0.75)
        with pytest.raises(DistError):
            convex_sum([(0.4, point("a"))])


class TestPLTS:
    def test_from_edges(self):
        p = PLTS.from_edges([("x", "a", {"y": 0.5, "z": 0.5}), ("y", TAU, {"z": 1.0})])
        assert p.n == 3 and p.names == {"x": 0, "y": 1, "z": 2}
        assert p.labels() == {"a", TAU}
        assert p.is_tau_acyclic()

    def test_tau_cycle_detected(self):
        p = PLTS.from_edges([(0, TAU, {1: 1.0}), (1, TAU, {0: 1.0})])
        assert not p.is_tau_acyclic()

    def test_unknown_target_rejected(self):
        with pytest.raises(DistError):
            PLTS(1, [[("a", point(3))]])


# ═══════════════════════════════════════════════════════════════════════
# Lifting
# ═══════════════════════════════════════════════════════════════════════


class TestLifting:
    def test_agrees_with_hall_oracle(self, rng):
        agree, positives = 0, 0
        for _ in range(1000):
            left = list(range(int(rng.integers(1, 6))))
            right = [f"t{i}" for i in range(int(rng.integers(1, 6)))]
            rel = random_relation(rng, left, right, rng.uniform(0.2, 0.9))
            d = random_fraction_dist(rng, left)
            e = random_fraction_dist(rng, right)
            want = lift_hall(rel, d, e)
            got = lift_check(rel, Distribution({k: float(v) for k, v in d.items()}),
                             Distribution({k: float(v) for k, v in e.items()}))
            assert bool(got) == want, (rel, d, e)
            positives += want
            agree += 1
        assert agree == 1000
        # the sample must exercise both outcomes
        assert 50 < positives < 950

    def test_witness_marginals(self, rng):
        for _ in range(200):
            left, right = list(range(4)), list(range(10, 14))
            rel = random_relation(rng, left, right, 0.6)
            d = Distribution(dict(zip(left, rng.dirichlet(np.ones(4)))))
            e = Distribution(dict(zip(right, rng.dirichlet(np.ones(4)))))
            res = lift_check(rel, d, e)
            if not res:
                continue
            for s in left:
                assert sum(w for w, a, _ in res.witness if a == s) == pytest.approx(d[s], abs=1e-9)
            for t in right:
                assert sum(w for w, _, b in res.witness if b == t) == pytest.approx(e[t], abs=1e-9)
            assert all((s, t) in rel for _, s, t in res.witness)

    def test_callable_relation(self):
        d = Distribution({1: 0.5, 2: 0.5})
        e = Distribution({3: 0.5, 4: 0.5})
        assert lift_check(lambda s, t: (s + t) % 2 == 0, d, e)
        assert not lift_check(lambda s, t: s == 1, d, e)

    def test_left_decompose_reconstructs(self, rng):
        worst = 0.0
        for _ in range(300):
            left, right = list(range(5)), list(range(10, 15))
            rel = random_relation(rng, left, right, 0.7)
            k = int(rng.integers(1, 4))
            ps = rng.dirichlet(np.ones(k))
            pieces = [(float(p), Distribution(dict(zip(left, rng.dirichlet(np.ones(5)))))) for p in ps]
            total = convex_sum(pieces)
            # theta built through a random related coupling so the lifting holds
            acc = {}
            for s, m in total.items():
                img = [t for (a, t) in rel if a == s]
                if not img:
                    break
                for t, q in zip(img, rng.dirichlet(np.ones(len(img)))):
                    acc[t] = acc.get(t, 0.0) + m * q
            else:
                theta = Distribution(acc)
                parts = left_decompose(rel, pieces, theta)
                rebuilt = convex_sum(zip([p for p, _ in pieces], parts))
                worst = max(worst, max(abs(rebuilt[t] - theta[t]) for t in set(theta) | set(rebuilt)))
                for (_, di), ti in zip(pieces, parts):
                    assert lift_check(rel, di, ti)
        assert worst <= 1e-9

    def test_left_decompose_rejects_unrelated(self):
        with pytest.raises(DistError):
            left_decompose(set(), [(1.0, point(0))], point(1))

    def test_composition_exhaustive(self):
        # every relation on 2x2 points, every distribution on a 1/2 grid
        A, B, C = (0, 1), ("m", "n"), ("x", "y")
        grid = lambda S: [Distribution(dict(zip(S, (Fraction(i, 2), 1 - Fraction(i, 2)))))
                          for i in range(3)]
        rels = lambda X, Y: [frozenset(c) for k in range(len(X) * len(Y) + 1)
                             for c in itertools.combinations(itertools.product(X, Y), k)]
        memo = {}

        def lifts(r, i, d, j, e):
            key = (r, i, j)
            if key not in memo:
                memo[key] = bool(lift_check(r, d, e))
            return memo[key]

        gA, gB, gC = list(enumerate(grid(A))), list(enumerate(grid(B))), list(enumerate(grid(C)))
        checked = 0
        for r1 in rels(A, B):
            for r2 in rels(B, C):
                r12 = frozenset(compose(r1, r2))
                for i, d in gA:
                    for k, f in gC:
                        via = any(lifts(r1, i, d, j, e) and lifts(r2, j, e, k, f) for j, e in gB)
                        direct = lifts(r12, i, d, k, f)
                        # composing liftings lands inside the lifting of the composite
                        if via:
                            assert direct
                        checked += 1
        assert checked == 16 * 16 * 9

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=50)
    def test_lifting_of_identity_is_equality(self, seed):
        rng = np.random.default_rng(seed)
        d = Distribution(dict(zip(range(4), rng.dirichlet(np.ones(4)))))
        ident = {(i, i) for i in range(4)}
        assert lift_check(ident, d, d)
        e = Distribution(dict(zip(range(4), rng.dirichlet(np.ones(4)))))
        assert bool(lift_check(ident, d, e)) == d.close_to(e, 1e-7)


# ═══════════════════════════════════════════════════════════════════════
# Weak derivatives
# ═══════════════════════════════════════════════════════════════════════


class TestWeakDerivatives:
    def test_tau_chain(self):
        p = PLTS.from_edges([(0, TAU, {1: 0.5, 2: 0.5}), (1, "a", {3: 1.0}), (2, TAU, {3: 1.0})])
        o = WeakOracle(p)
        ident = {(i, i) for i in range(4)}
        # stop anywhere along the way: {0}, {1,2}, {1,3}
        assert o.match(point(0), TAU, point(0), ident)
        assert o.match(point(0), TAU, Distribution({1: 0.5, 3: 0.5}), ident)
        assert not o.match(point(0), TAU, point(3), ident)
        # a is only available on the left branch
        assert not o.match(point(0), "a", point(3), ident)

    def test_strong_mode_takes_one_step(self):
        p = PLTS.from_edges([(0, TAU, {1: 1.0}), (1, "a", {2: 1.0}), (0, "a", {3: 1.0})])
        o = WeakOracle(p, "strong")
        ident = {(i, i) for i in range(4)}
        assert o.match(point(0), "a", point(3), ident)
        assert not o.match(point(0), "a", point(2), ident)
        assert WeakOracle(p).match(point(0), "a", point(2), ident)

    def test_divergent_tau_loop_does_not_stop(self):
        p = PLTS.from_edges([(0, TAU, {0: 1.0}), (0, "a", {1: 1.0})])
        o = WeakOracle(p)
        assert o.match(point(0), "a", point(1), {(1, 1)})
        # a tau self-loop yields no derivative without stopping at 0
        assert not o.match(point(0), TAU, point(1), {(1, 1)}).ok

    def test_match_blocks(self):
        p = PLTS.from_edges([(0, TAU, {1: 0.5, 2: 0.5}), (1, TAU, {3: 1.0}), (2, "x", {2: 1.0}), (3, "x", {3: 1.0})])
        o = WeakOracle(p)
        block = {0: "A", 1: "A", 2: "B", 3: "B"}.get
        assert o.match_blocks(point(0), TAU, {"B": 1.0}, block)
        assert o.match_blocks(point(0), TAU, {"A": 0.5, "B": 0.5}, block)
        assert not o.match_blocks(point(0), TAU, {"C": 1.0}, block)

    def test_agrees_with_hull_of_schedulers(self, rng):
        ok_seen = bad_seen = 0
        for _ in range(150):
            n = int(rng.integers(2, 7))
            p = random_acyclic_plts(rng, n)
            s = int(rng.integers(0, n))
            lab = TAU if rng.random() < 0.4 else "a"
            verts = hull_vertices(p, s, lab)
            ident = {(i, i) for i in range(n)}
            if verts and rng.random() < 0.6:
                w = rng.dirichlet(np.ones(len(verts)))
                acc = {}
                for wi, v in zip(w, verts):
                    for t, q in v.items():
                        acc[t] = acc.get(t, 0.0) + wi * q
                target = Distribution(acc)
            else:
                k = int(rng.integers(1, n + 1))
                sup = rng.choice(n, size=k, replace=False)
                target = Distribution(dict(zip(map(int, sup), rng.dirichlet(np.ones(k)))))
            want = _hull_match(verts, dict(target.items()), ident)
            got = WeakOracle(p).match(point(s), lab, target, ident)
            assert bool(got) == want
            if got:
                assert got.theta.close_to(target, 1e-7)
            ok_seen += want
            bad_seen += not want
        assert ok_seen > 10 and bad_seen > 10

    def test_vertex_enumeration_spans_same_hull(self, rng):
        for _ in range(60):
            n = int(rng.integers(2, 6))
            p = random_acyclic_plts(rng, n)
            lab = "a" if rng.random() < 0.5 else TAU
            mine = derivative_vertices(p, point(0), lab)
            ref = hull_vertices(p, 0, lab)
            ident = {(i, i) for i in range(n)}
            for v in mine:
                assert _hull_match(ref, dict(v.items()), ident)
            for v in ref:
                assert _hull_match([dict(m.items()) for m in mine], v, ident)
