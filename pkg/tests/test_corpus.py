"""The executable corpus and its regression manifest."""

import pytest

from qccs import corpus
from qccs.corpus import (
    MAX_N, bb84_source, counterexample_pairs, files_dir, generated_files, instantiate, load,
    manifest,
)
from qccs.corpus.runner import run_manifest, run_one
from qccs.semantics import Configuration, build_plts
from qccs.syntax import check_legal, parse_source
from qccs.values import Bits


def outcome_pairs(space, i, memo=None):
    """Every ``(key_a value, key_b value)`` combination along maximal paths from ``i``."""
    memo = {} if memo is None else memo
    if i in memo:
        return memo[i]
    memo[i] = set()
    out = set()
    ts = space.trans[i] or []
    if not ts:
        out.add((None, None))
    for a, d in ts:
        for t in d:
            for ka, kb in outcome_pairs(space, t, memo):
                if a.kind == "cout" and a.chan == "key_a":
                    ka = a.value
                if a.kind == "cout" and a.chan == "key_b":
                    kb = a.value
                out.add((ka, kb))
    memo[i] = out
    return out


# ═══════════════════════════════════════════════════════════════════════
# Sources
# ═══════════════════════════════════════════════════════════════════════


class TestSources:
    def test_files_match_generator(self):
        for name, text in generated_files().items():
            assert (files_dir() / name).read_text(encoding="utf-8") == text, name

    @pytest.mark.parametrize("kind, n", [("counterexample", None), ("bb84", 1), ("bb84", 2),
                                         ("bb84", 3), ("eavesdropper", None)])
    def test_sources_parse_and_definitions_are_legal(self, kind, n):
        inst = load(kind, n)
        for d in inst.defs.consts.values():
            from qccs.syntax import check_definition
            assert check_definition(d, inst.defs), d.name

    def test_key_length_bounds(self):
        with pytest.raises(ValueError):
            bb84_source(0)
        with pytest.raises(ValueError):
            bb84_source(MAX_N + 1)

    def test_unknown_names(self):
        with pytest.raises(KeyError):
            load("nope")
        with pytest.raises(KeyError):
            instantiate("Alice")

    def test_counterexample_environment(self):
        inst, [(m, i), (hm, hi)] = counterexample_pairs()
        assert m.rho.close_to(inst.state("0+"))
        inst2, pairs = counterexample_pairs([[0.5, 0], [0, 0.5]])
        assert abs(pairs[0][0].rho.mat[1, 1] - 0.5) < 1e-12


@pytest.fixture(scope="module")
def space():
    t, defs, rho = instantiate("BB84", 1)
    inst = load("bb84", 1)
    return build_plts(Configuration(t, rho), inst.sem)


class TestBB84Structure:
    def test_acyclic(self, space):
        sp, i = space
        assert sp.plts().is_tau_acyclic()
        assert all(ts is not None for ts in sp.trans)

    def test_keys_agree_on_every_path(self, space):
        sp, i = space
        pairs = outcome_pairs(sp, i)
        assert all(ka == kb for ka, kb in pairs)
        assert {ka for ka, _ in pairs} == {Bits(""), Bits("0"), Bits("1")}

    def test_branching_is_uniform(self, space):
        sp, _ = space
        probs = {round(p, 9) for ts in sp.trans for _, d in ts for p in d.values()}
        assert probs <= {0.5, 1.0}

    def test_specification_owns_the_same_qubits(self):
        t, defs, rho = instantiate("BB84_spc", 1)
        assert t.qv == {"q1", "r1"}
        assert check_legal(t, defs)


# ═══════════════════════════════════════════════════════════════════════
# Manifest
# ═══════════════════════════════════════════════════════════════════════


class TestManifest:
    def test_entries_are_well_formed(self):
        runs = manifest()
        names = [r["name"] for r in runs]
        assert len(names) == len(set(names))
        for r in runs:
            assert r["kind"] in ("bisim", "check", "barb")
            assert r["source"] in corpus.SOURCES

    def test_default_runs_as_expected(self):
        lines = []
        outs = run_manifest(on_result=lambda o: lines.append(o.line()))
        assert len(outs) == sum(1 for r in manifest() if not r.get("slow"))
        bad = [o.line() for o in outs if not o.ok]
        assert not bad, bad
        assert all(line.startswith("PASS") for line in lines)

    def test_final_relations_are_equivalences(self):
        for run in manifest():
            if run["kind"] != "bisim" or run.get("slow"):
                continue
            res = run_one(run).result
            g = res.game
            n = len(g.space)
            pairs = res.relation_pairs()
            rel = lambda a, b: (a, b) in pairs
            assert all(rel(s, s) for s in range(n))
            assert all(rel(b, a) for a, b in pairs)
            # transitivity holds because blocks partition the states
            blocks = {}
            for s, b in enumerate(g.final):
                blocks.setdefault(int(b), set()).add(s)
            assert pairs == {(a, b) for blk in blocks.values() for a in blk for b in blk}

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            run_one({"name": "x", "kind": "dance", "source": "counterexample", "expected": 0})
