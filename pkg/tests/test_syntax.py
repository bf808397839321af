"""Parsing, printing, legality and substitution."""

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from qccs.syntax import (
    ParseError, alpha_equivalent, check_legal, fv, normal_form, parse_process, parse_source,
    qv, source_text, substitute, to_text,
)
from qccs.syntax.ast import (
    BinOp, CInput, COutput, Compare, Const, ConstApp, If, Measure, Nil, Par, QInput, QOutput,
    Relabel, Restrict, Sum, SuperOpApp, Tau, Var, cmp_bits, eval_expr, remstr_bits, substr_bits,
)
from qccs.values import Bits

from oracles import qv_oracle

ENV = """\
qubits q r s;
chan c, d : {0, 1};
chan k : bits 0..2;
qchan e, f;
superop H = unitary(H);
superop C = unitary(CNOT);
meas M = basis("0");
def P(x; v) = c!v.e!x.nil;
def Q(x, y) = C[x, y].nil;
"""


@pytest.fixture(scope="module")
def defs():
    return parse_source(ENV)


def parse(text, d):
    return parse_process(text, d)


# ═══════════════════════════════════════════════════════════════════════
# Random terms
# ═══════════════════════════════════════════════════════════════════════

QVARS = ("q", "r", "s", "z")
CVARS = ("x", "y")

exprs = st.one_of(
    st.sampled_from([Const(Fraction(0)), Const(Fraction(1)), Const(Fraction(1, 2)), Const(Bits("01"))]),
    st.sampled_from([Var(v) for v in CVARS]),
)
exprs = st.one_of(exprs, st.builds(BinOp, st.sampled_from("+-*"), exprs, exprs))


def _prefixes(cont):
    return st.one_of(
        st.builds(Tau, cont),
        st.builds(CInput, st.sampled_from("cd"), st.sampled_from(CVARS), cont),
        st.builds(COutput, st.sampled_from("cd"), exprs, cont),
        st.builds(QInput, st.sampled_from("ef"), st.sampled_from(QVARS), cont),
        st.builds(QOutput, st.sampled_from("ef"), st.sampled_from(QVARS), cont),
        st.builds(SuperOpApp, st.just("H"), st.sampled_from(QVARS).map(lambda q: (q,)), cont),
        st.builds(Measure, st.just("M"), st.sampled_from(QVARS).map(lambda q: (q,)),
                  st.sampled_from(CVARS), cont),
        st.builds(If, st.builds(Compare, st.sampled_from(["=", "<"]), exprs, exprs), cont),
        st.builds(Restrict, cont, st.sets(st.sampled_from("cdef"), max_size=2)),
        st.builds(Relabel, cont, st.just((("c", "d"),))),
    )


terms = st.recursive(
    st.one_of(st.just(Nil()), st.builds(ConstApp, st.just("Q"), st.just(("q", "r")))),
    lambda sub: st.one_of(_prefixes(sub), st.builds(Sum, sub, sub), st.builds(Par, sub, sub)),
    max_leaves=8,
)


# ═══════════════════════════════════════════════════════════════════════
# Parser and printer
# ═══════════════════════════════════════════════════════════════════════


class TestRoundTrip:
    @given(terms)
    @settings(max_examples=150)
    def test_print_then_parse_is_identity(self, t):
        d = parse_source(ENV)
        back = parse(to_text(t), d)
        assert back == t
        assert alpha_equivalent(back, t)

    @given(terms)
    @settings(max_examples=80)
    def test_normal_form_reparses(self, t):
        # canonical binder names start with '_', which user sources may not use
        nf = normal_form(t)
        assert normal_form(t) == nf

    def test_alpha_equivalence(self, defs):
        a = parse("c?x.d!x.nil", defs)
        b = parse("c?y.d!y.nil", defs)
        c = parse("c?y.d!x.nil", defs)
        assert alpha_equivalent(a, b)
        assert not alpha_equivalent(a, c)
        assert alpha_equivalent(parse("e?z.H[z].nil", defs), parse("e?w.H[w].nil", defs))

    def test_source_round_trip(self, defs):
        again = parse_source(source_text(defs))
        assert again.qubits == defs.qubits
        assert set(again.consts) == set(defs.consts)
        for name in defs.consts:
            assert again.consts[name].body == defs.consts[name].body
        assert again.channels == defs.channels


class TestParser:
    def test_precedence(self, defs):
        t = parse("tau.nil + c!0.nil || d!1.nil", defs)
        assert isinstance(t, Par) and isinstance(t.left, Sum)
        # postfix operators bind tighter than prefixes
        t = parse("c!0.nil \\ {c}", defs)
        assert isinstance(t, COutput) and isinstance(t.cont, Restrict)
        t = parse("(c!0.nil) \\ {c}", defs)
        assert isinstance(t, Restrict)

    def test_zero_is_nil(self, defs):
        assert parse("tau.0", defs) == Tau(Nil())

    def test_if_else_desugars(self, defs):
        t = parse("c?x.if x = 0 then d!0.nil else d!1.nil", defs)
        assert isinstance(t.cont, Sum)
        assert isinstance(t.cont.left, If) and isinstance(t.cont.right, If)

    def test_quantum_channel_prefix(self, defs):
        assert isinstance(parse("e!q.nil", defs), QOutput)
        assert isinstance(parse("e?z.nil", defs), QInput)

    def test_constants(self, defs):
        t = parse("P(q; 1)", defs)
        assert t == ConstApp("P", ("q",), (Const(Fraction(1)),))

    def test_family_sugar_expands_to_guarded_sum(self):
        d = parse_source(ENV + "family Had = hadamard;\n")
        t = parse("c?x.Had{'1'}[q].nil", d)
        assert isinstance(t.cont, Sum)
        assert "Had_1" in d.superops and "Had_0" in d.superops

    @pytest.mark.parametrize("src, where", [
        ("c!0.", "expected a process"),
        ("g!0.nil", "undeclared channel"),
        ("X[q].nil", "unknown operator"),
        ("H[q; x].nil", "takes no result"),
        ("c!0.nil )", "unexpected"),
        ("c?x.nil [c->e]", "mixes classical and quantum"),
    ])
    def test_errors_carry_position(self, defs, src, where):
        with pytest.raises(ParseError) as exc:
            parse(src, defs)
        assert where in str(exc.value)
        assert exc.value.line >= 1

    def test_reserved_names(self, defs):
        with pytest.raises(ParseError):
            parse("c?_x.nil", defs)

    def test_duplicate_declarations(self):
        with pytest.raises(ParseError):
            parse_source("qubits q q;")
        with pytest.raises(ParseError):
            parse_source("def A = nil; def A = nil;")


# ═══════════════════════════════════════════════════════════════════════
# Free variables and legality
# ═══════════════════════════════════════════════════════════════════════


class TestFreeVariables:
    @given(terms)
    @settings(max_examples=150)
    def test_qv_matches_inductive_definition(self, t):
        assert set(qv(t)) == qv_oracle(t)

    def test_fv(self, defs):
        t = parse("c?x.d!(x + y).M[q; z].c!z.nil", defs)
        assert fv(t) == {"y"}

    def test_qv_examples(self, defs):
        assert qv(parse("e?z.H[z].e!z.nil", defs)) == set()
        assert qv(parse("e!q.nil || H[r].nil", defs)) == {"q", "r"}
        assert qv(parse("Q(r, s)", defs)) == {"r", "s"}


class TestLegality:
    def test_send_then_use(self, defs):
        rep = check_legal(parse("e!q.H[q].nil", defs), defs)
        assert not rep and rep.condition == "1"

    def test_shared_between_components(self, defs):
        rep = check_legal(parse("H[q].nil || e!q.nil", defs), defs)
        assert not rep and rep.condition == "2"
        assert "par" not in rep.path or rep.path == ()

    def test_definition_body_uses_only_parameters(self):
        d = parse_source(ENV + "def Bad(x) = C[x, s].nil;\n")
        rep = check_legal(parse("Bad(q)", d), d)
        assert not rep and rep.condition == "3"

    def test_first_violation_reported(self, defs):
        rep = check_legal(parse("(e!q.H[q].nil + tau.nil) || H[q].nil", defs), defs)
        assert rep.condition == "2"
        rep = check_legal(parse("tau.(e!q.H[q].nil) + (H[r].nil || H[r].nil)", defs), defs)
        assert rep.condition == "1" and rep.path[0] == "sum.left"

    def test_arity_and_repeats(self, defs):
        assert check_legal(parse("C[q].nil", defs), defs).condition == "arity"
        assert check_legal(parse("C[q, q].nil", defs), defs).condition == "distinct"
        assert check_legal(parse("Q(q, q)", defs), defs).condition == "distinct"

    def test_legal_examples(self, defs):
        for src in ("e?z.H[z].e!z.nil", "H[q].nil || H[r].nil", "P(q; 0) || Q(r, s)"):
            assert check_legal(parse(src, defs), defs), src


# ═══════════════════════════════════════════════════════════════════════
# Substitution and classical functions
# ═══════════════════════════════════════════════════════════════════════


class TestSubstitution:
    def test_classical_respects_binders(self, defs):
        t = parse("d!x.c?x.d!x.nil", defs)
        out = substitute(t, {"x": Fraction(1)})
        assert to_text(out) == "d!1.c?x.d!x.nil"

    def test_quantum_renaming_avoids_capture(self, defs):
        t = parse("e?r.C[q, r].nil", defs)
        out = substitute(t, qrename={"q": "r"})
        assert qv(out) == {"r"}
        assert out.qvar != "r"
        assert alpha_equivalent(out, parse("e?w.C[r, w].nil", defs))

    def test_renaming_must_be_injective(self, defs):
        with pytest.raises(ValueError):
            substitute(parse("C[q, r].nil", defs), qrename={"q": "s", "r": "s"})

    @given(terms, st.sampled_from(QVARS), st.sampled_from(("a", "b")))
    @settings(max_examples=100)
    def test_renaming_maps_free_qubits(self, t, old, new):
        out = substitute(t, qrename={old: new})
        want = {new if q == old else q for q in qv_oracle(t)}
        assert qv_oracle(out) == want


class TestBitFunctions:
    def test_cmp(self):
        # keep the key bits where the two bases agree
        assert cmp_bits(Bits("101"), Bits("011"), Bits("001")) == Bits("11")
        assert cmp_bits(Bits("101"), Bits("011"), Bits("111")) == Bits("01")
        assert cmp_bits(Bits("1"), Bits("0"), Bits("1")) == Bits("")

    def test_substr_and_remstr(self):
        assert substr_bits(Bits("1100"), Bits("1010")) == Bits("10")
        assert remstr_bits(Bits("1100"), Bits("1010")) == Bits("10")
        assert substr_bits(Bits("1101"), Bits("0011")) + remstr_bits(Bits("1101"), Bits("0011")) \
            == Bits("01") + Bits("11")

    def test_eval(self):
        e = parse_process("c!(x * 2 + 1).nil", parse_source(ENV)).expr
        assert eval_expr(e, {"x": Fraction(3)}) == 7
