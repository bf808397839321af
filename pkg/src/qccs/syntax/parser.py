"""Recursive-descent parser for ``.qccs`` source files.

The grammar is documented in ``docs/grammar.md``.  Errors carry a line and
column.  Names beginning with an underscore are reserved for the printer's
normal forms and are rejected here.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .. import qlin
from ..values import Bits, all_bit_strings
from .ast import (
    BBin, BConst, BNot, Call, CInput, COutput, Compare, Const, ConstApp, Definition, Defs,
    If, Measure, Neg, Nil, Par, QInput, QOutput, Relabel, Restrict, Sum, SuperOpApp, Tau,
    Var, BinOp, FUNCTIONS, make_sum,
)


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.msg = msg
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # ident, num, rat, bits, str, sym, eof
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<rat>\#-?\d+/\d+)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
  | (?P<bits>'[01]*')
  | (?P<str>"[^"\n]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>\|\||->|=>|<=|>=|!=|\.\.|[()\[\]{},;:.?!+\-*/=<>\\|])
    """,
    re.VERBOSE,
)

KEYWORDS = {"nil", "tau", "if", "then", "else", "true", "false", "not", "and", "or", "def", "main"}
DECL_WORDS = {"qubits", "chan", "qchan", "superop", "meas", "relabel", "family", "def", "main", "init"}


def tokenize(src: str) -> list[Token]:
    toks = []
    pos = 0
    line, col = 1, 1
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if not m:
            raise ParseError(f"unexpected character {src[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group(kind)
        if kind != "ws":
            toks.append(Token(kind, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    toks.append(Token("eof", "", line, col))
    return toks


class _Backtrack(Exception):
    pass


class Parser:
    def __init__(self, src: str, defs: Defs | None = None):
        self.toks = tokenize(src)
        self.i = 0
        self.defs = defs if defs is not None else Defs()
        self._prescan()

    # -- token helpers ---------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col)

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("sym", "ident") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str = "identifier") -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            self.error(f"expected {what}, found {t.text or 'end of input'!r}")
        if t.text.startswith("_"):
            self.error(f"names starting with '_' are reserved: {t.text}")
        self.i += 1
        return t.text

    # -- prescan: names and kinds of every top-level declaration ----------

    def _prescan(self):
        self.kinds: dict[str, str] = {}
        depth = 0
        start = True
        for k, t in enumerate(self.toks):
            if start and t.kind == "ident" and t.text in DECL_WORDS:
                names = []
                if t.text in ("superop", "meas", "relabel", "family", "def"):
                    nxt = self.toks[k + 1]
                    if nxt.kind == "ident":
                        names = [nxt.text]
                elif t.text in ("chan", "qchan"):
                    j = k + 1
                    while self.toks[j].kind == "ident":
                        names.append(self.toks[j].text)
                        if self.toks[j + 1].text == ",":
                            j += 2
                        else:
                            break
                for nm in names:
                    self.kinds.setdefault(nm, t.text)
            start = False
            if t.kind == "sym":
                if t.text in "([{":
                    depth += 1
                elif t.text in ")]}":
                    depth -= 1
                elif t.text == ";" and depth == 0:
                    start = True

    def kind_of(self, name: str) -> str | None:
        d = self.defs
        if name in d.superops:
            return "superop"
        if name in d.measurements:
            return "meas"
        if name in d.qchannels:
            return "qchan"
        if name in d.channels:
            return "chan"
        if name in d.consts:
            return "def"
        if name in d.families:
            return "family"
        return self.kinds.get(name)

    # ═══════════════════════════════════════════════════════════════════
    # Files
    # ═══════════════════════════════════════════════════════════════════

    def parse_file(self) -> Defs:
        while self.tok.kind != "eof":
            self.statement()
        return self.defs

    def statement(self):
        t = self.tok
        word = t.text if t.kind == "ident" else None
        if word == "qubits":
            self.i += 1
            names = []
            while self.tok.kind == "ident":
                names.append(self.ident("qubit name"))
                self.accept(",")
            for k, q in enumerate(names):
                if q in self.defs.qubits or q in names[:k]:
                    self.error(f"qubit {q} declared twice", t)
            self.defs.qubits = self.defs.qubits + tuple(names)
        elif word == "chan":
            self.i += 1
            names = [self.ident("channel name")]
            while self.accept(","):
                names.append(self.ident("channel name"))
            self.expect(":")
            dom = self.domain()
            for c in names:
                self.defs.channels[c] = dom
        elif word == "qchan":
            self.i += 1
            self.defs.qchannels.add(self.ident("channel name"))
            while self.accept(","):
                self.defs.qchannels.add(self.ident("channel name"))
        elif word == "superop":
            self.i += 1
            name = self.ident("super-operator name")
            self.expect("=")
            op = self.superop_expr(name)
            self.defs.superops[name] = op
        elif word == "meas":
            self.i += 1
            name = self.ident("measurement name")
            self.expect("=")
            self.defs.measurements[name] = self.meas_expr(name)
        elif word == "relabel":
            self.i += 1
            name = self.ident("relabelling name")
            self.expect("=")
            self.defs.relabels[name] = self.relabel_map(closing="}", opening="{")
        elif word == "family":
            self.i += 1
            name = self.ident("family name")
            self.expect("=")
            kind = self.ident("family kind")
            if kind not in FAMILY_KINDS:
                self.error(f"unknown family kind {kind!r}; expected one of {sorted(FAMILY_KINDS)}")
            self.defs.families[name] = kind
        elif word == "def":
            self.i += 1
            name = self.ident("constant name")
            qps, cps = [], []
            if self.accept("("):
                qps, cps = self.param_lists()
                self.expect(")")
            self.expect("=")
            body = self.process()
            if name in self.defs.consts:
                self.error(f"constant {name} defined twice", t)
            self.defs.consts[name] = Definition(name, tuple(qps), tuple(cps), body)
        elif word == "main":
            self.i += 1
            self.expect("=")
            self.defs.main = self.process()
        elif word == "init":
            self.i += 1
            self.expect("=")
            self.defs.init = self.init_expr()
        else:
            self.error(f"expected a declaration, found {t.text or 'end of input'!r}")
        self.expect(";")

    def param_lists(self):
        qps, cps = [], []
        if not self.at(";") and not self.at(")"):
            qps.append(self.ident("parameter"))
            while self.accept(","):
                qps.append(self.ident("parameter"))
        if self.accept(";"):
            if not self.at(")"):
                cps.append(self.ident("parameter"))
                while self.accept(","):
                    cps.append(self.ident("parameter"))
        return qps, cps

    def domain(self) -> tuple:
        if self.accept("{"):
            vals = [self.literal_value()]
            while self.accept(","):
                vals.append(self.literal_value())
            self.expect("}")
            out = []
            for v in vals:
                if v not in out:
                    out.append(v)
            return tuple(out)
        if self.at("bits"):
            self.i += 1
            lo = self.integer()
            hi = lo
            if self.accept(".."):
                hi = self.integer()
            return tuple(all_bit_strings(lo, hi))
        lo = self.integer()
        self.expect("..")
        hi = self.integer()
        return tuple(Fraction(k) for k in range(lo, hi + 1))

    def integer(self) -> int:
        t = self.tok
        neg = self.accept("-")
        t = self.tok
        if t.kind != "num" or not t.text.isdigit():
            self.error("expected an integer")
        self.i += 1
        return -int(t.text) if neg else int(t.text)

    def literal_value(self):
        t = self.tok
        if t.kind == "bits":
            self.i += 1
            return Bits(t.text[1:-1])
        e = self.expr()
        from .ast import fold
        e = fold(e)
        if not isinstance(e, Const):
            self.error("expected a constant value", t)
        return e.value

    def init_expr(self):
        t = self.tok
        if t.kind == "str":
            self.i += 1
            return ("ket", t.text[1:-1])
        if self.at("mixed"):
            self.i += 1
            return ("matrix", self.matrix_expr())
        return ("matrix", self.matrix_expr())

    # -- operator constructors -------------------------------------------

    def string_arg(self) -> str:
        self.expect("(")
        t = self.tok
        if t.kind not in ("str", "bits"):
            self.error("expected a quoted string")
        self.i += 1
        self.expect(")")
        return t.text[1:-1]

    def superop_expr(self, name: str):
        t = self.tok
        try:
            return self._superop_expr(name)
        except qlin.QLinError as exc:
            self.error(str(exc), t)

    def _superop_expr(self, name: str):
        if self.at("unitary"):
            self.i += 1
            self.expect("(")
            m = self.matrix_expr()
            self.expect(")")
            return qlin.unitary_channel(m, name)
        if self.at("kraus"):
            self.i += 1
            self.expect("(")
            ks = [self.matrix_expr()]
            while self.accept(","):
                ks.append(self.matrix_expr())
            self.expect(")")
            return qlin.SuperOp(tuple(ks), True, name=name)
        if self.at("set"):
            self.i += 1
            s = self.string_arg()
            return qlin.set_channel(s, name)
        if self.at("dephase"):
            self.i += 1
            k = 1
            if self.accept("("):
                k = self.integer()
                self.expect(")")
            op = qlin.dephase_channel(k)
            return qlin.SuperOp(op.kraus, True, name=name)
        if self.at("hpattern"):
            self.i += 1
            s = self.string_arg()
            return qlin.unitary_channel(qlin.hadamard_pattern([int(c) for c in s]), name)
        m = self.matrix_expr()
        return qlin.unitary_channel(m, name)

    def meas_expr(self, name: str):
        t = self.tok
        try:
            return self._meas_expr(name)
        except qlin.QLinError as exc:
            self.error(str(exc), t)

    def _meas_expr(self, name: str):
        if self.at("basis"):
            self.i += 1
            s = self.string_arg()
            m = qlin.basis_measurement([int(c) for c in s], label=Bits)
            return qlin.ProjMeasurement(m.outcomes, name=name)
        if self.at("spectral"):
            self.i += 1
            self.expect("(")
            a = self.matrix_expr()
            self.expect(")")
            m = qlin.spectral(a)
            outs = tuple((_eigen_value(lam), E) for lam, E in m.outcomes)
            return qlin.ProjMeasurement(outs, name=name)
        if self.at("projectors"):
            self.i += 1
            self.expect("(")
            outs = []
            while True:
                v = self.literal_value()
                self.expect(":")
                outs.append((v, self.matrix_expr()))
                if not self.accept(","):
                    break
            self.expect(")")
            return qlin.ProjMeasurement(tuple(outs), name=name)
        self.error("expected basis(...), spectral(...) or projectors(...)")

    def matrix_expr(self) -> np.ndarray:
        t = self.tok
        if t.kind == "ident" and t.text in qlin.GATES:
            self.i += 1
            return qlin.gate(t.text)
        if self.at("proj"):
            self.i += 1
            return qlin.ket_projector(self.string_arg())
        if self.at("tensor"):
            self.i += 1
            self.expect("(")
            ms = [self.matrix_expr()]
            while self.accept(","):
                ms.append(self.matrix_expr())
            self.expect(")")
            return qlin.tensor_all(ms)
        if self.at("["):
            rows = self.nested_list()
            try:
                m = np.array(rows, dtype=complex)
            except ValueError:
                self.error("ragged matrix literal", t)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                self.error("matrix literal must be square", t)
            return m
        self.error("expected a matrix (gate name, proj(..), tensor(..) or [[..]])")

    def nested_list(self):
        # rows of entries; an entry is a number or a [re, im] pair
        self.expect("[")
        rows = []
        while True:
            self.expect("[")
            row = []
            while True:
                if self.at("["):
                    self.i += 1
                    re_ = self.real()
                    self.expect(",")
                    im_ = self.real()
                    self.expect("]")
                    row.append(complex(re_, im_))
                else:
                    row.append(complex(self.real()))
                if not self.accept(","):
                    break
            self.expect("]")
            rows.append(row)
            if not self.accept(","):
                break
        self.expect("]")
        return rows

    def real(self) -> float:
        v = self._real_term()
        while self.at("+") or self.at("-"):
            op = self.tok.text
            self.i += 1
            w = self._real_term()
            v = v + w if op == "+" else v - w
        return v

    def _real_term(self) -> float:
        v = self._real_atom()
        while self.at("*") or self.at("/"):
            op = self.tok.text
            self.i += 1
            w = self._real_atom()
            v = v * w if op == "*" else v / w
        return v

    def _real_atom(self) -> float:
        t = self.tok
        if self.accept("-"):
            return -self._real_atom()
        if self.accept("("):
            v = self.real()
            self.expect(")")
            return v
        if self.at("sqrt"):
            self.i += 1
            self.expect("(")
            v = self.real()
            self.expect(")")
            return float(np.sqrt(v))
        if t.kind == "num":
            self.i += 1
            return float(t.text)
        if t.kind == "rat":
            self.i += 1
            return float(Fraction(t.text[1:]))
        self.error("expected a number")

    def relabel_map(self, opening: str, closing: str) -> dict:
        self.expect(opening)
        out = {}
        if not self.at(closing):
            while True:
                a = self.ident("channel")
                self.expect("->")
                b = self.ident("channel")
                out[a] = b
                if not self.accept(","):
                    break
        self.expect(closing)
        return out

    # ═══════════════════════════════════════════════════════════════════
    # Processes
    # ═══════════════════════════════════════════════════════════════════

    def process(self):
        p = self.sum_()
        while self.accept("||"):
            p = Par(p, self.sum_())
        return p

    def sum_(self):
        p = self.prefixed()
        while self.accept("+"):
            p = Sum(p, self.prefixed())
        return p

    def prefixed(self):
        t = self.tok
        if self.accept("tau"):
            self.expect(".")
            return Tau(self.prefixed())
        if self.accept("if"):
            b = self.bexpr()
            self.expect("then")
            p = self.prefixed()
            if self.accept("else"):
                q = self.prefixed()
                return Sum(If(b, p), If(BNot(b), q))
            return If(b, p)
        if t.kind == "ident" and t.text not in KEYWORDS:
            nxt = self.peek()
            if nxt.kind == "sym" and nxt.text in ("?", "!"):
                return self.channel_prefix()
            kind = self.kind_of(t.text)
            if nxt.text == "[" and kind in ("superop", "meas"):
                return self.operator_prefix()
            if nxt.text == "{" and kind == "family":
                return self.family_prefix()
            if nxt.text == "[" and kind is None:
                self.error(f"unknown operator name {t.text}")
        return self.postfix()

    def channel_prefix(self):
        ct = self.tok
        chan = self.ident("channel")
        kind = self.kind_of(chan)
        if kind not in ("chan", "qchan"):
            self.error(f"undeclared channel {chan}", ct)
        direction = self.tok.text
        self.i += 1
        if kind == "qchan":
            q = self.ident("quantum variable")
            self.expect(".")
            cont = self.prefixed()
            return QInput(chan, q, cont) if direction == "?" else QOutput(chan, q, cont)
        if direction == "?":
            x = self.ident("variable")
            self.expect(".")
            return CInput(chan, x, self.prefixed())
        e = self.expr()
        self.expect(".")
        return COutput(chan, e, self.prefixed())

    def qvar_list(self, stop: tuple = ("]",)):
        qs = [self.ident("quantum variable")]
        while self.accept(","):
            qs.append(self.ident("quantum variable"))
        return qs

    def operator_prefix(self):
        nt = self.tok
        name = self.ident()
        kind = self.kind_of(name)
        self.expect("[")
        qs = self.qvar_list()
        if kind == "meas":
            self.expect(";")
            x = self.ident("variable")
            self.expect("]")
            self.expect(".")
            return Measure(name, tuple(qs), x, self.prefixed())
        if self.at(";"):
            self.error(f"{name} is a super-operator; it takes no result variable", nt)
        self.expect("]")
        self.expect(".")
        return SuperOpApp(name, tuple(qs), self.prefixed())

    def family_prefix(self):
        nt = self.tok
        name = self.ident()
        kind = self.defs.families[name] if name in self.defs.families else None
        if kind is None:
            # declared later in the file; the prescan saw it
            self.error(f"family {name} must be declared before use", nt)
        self.expect("{")
        idx = self.expr()
        self.expect("}")
        self.expect("[")
        qs = self.qvar_list()
        x = None
        if FAMILY_KINDS[kind][0] == "meas":
            self.expect(";")
            x = self.ident("variable")
        self.expect("]")
        self.expect(".")
        cont = self.prefixed()
        n = len(qs)
        members = []
        for bits in all_bit_strings(n, n):
            mname = family_member(self.defs, name, kind, bits)
            if x is None:
                body = SuperOpApp(mname, tuple(qs), cont)
            else:
                body = Measure(mname, tuple(qs), x, cont)
            members.append(If(Compare("=", idx, Const(bits)), body))
        return make_sum(members)

    def postfix(self):
        p = self.atom()
        while True:
            if self.at("["):
                self.i += 1
                if self.tok.kind == "ident" and self.peek().text == "]":
                    nt = self.tok
                    name = self.ident()
                    if name not in self.defs.relabels:
                        self.error(f"unknown relabelling {name}", nt)
                    fn = self.defs.relabels[name]
                    self.expect("]")
                else:
                    self.i -= 1
                    fn = self.relabel_map("[", "]")
                self._check_relabel(fn)
                p = Relabel(p, fn)
            elif self.at("\\"):
                self.i += 1
                self.expect("{")
                chans = []
                if not self.at("}"):
                    chans.append(self.ident("channel"))
                    while self.accept(","):
                        chans.append(self.ident("channel"))
                self.expect("}")
                p = Restrict(p, frozenset(chans))
            else:
                return p

    def _check_relabel(self, fn: dict):
        for a, b in fn.items():
            ka, kb = self.kind_of(a), self.kind_of(b)
            if ka not in ("chan", "qchan") or kb not in ("chan", "qchan"):
                self.error(f"relabelling {a}->{b} names an undeclared channel")
            if ka != kb:
                self.error(f"relabelling {a}->{b} mixes classical and quantum channels")

    def atom(self):
        t = self.tok
        if self.accept("nil"):
            return Nil()
        if t.kind == "num" and t.text == "0":
            self.i += 1
            return Nil()
        if self.accept("("):
            p = self.process()
            self.expect(")")
            return p
        if t.kind == "ident" and t.text not in KEYWORDS:
            name = self.ident("constant")
            kind = self.kind_of(name)
            if kind not in (None, "def"):
                self.error(f"{name} is a {kind}, not a process constant", t)
            qa, ca = [], []
            if self.accept("("):
                if not self.at(";") and not self.at(")"):
                    qa.append(self.ident("quantum variable"))
                    while self.accept(","):
                        qa.append(self.ident("quantum variable"))
                if self.accept(";"):
                    if not self.at(")"):
                        ca.append(self.expr())
                        while self.accept(","):
                            ca.append(self.expr())
                self.expect(")")
            return ConstApp(name, tuple(qa), tuple(ca))
        self.error(f"expected a process, found {t.text or 'end of input'!r}")

    # ═══════════════════════════════════════════════════════════════════
    # Expressions
    # ═══════════════════════════════════════════════════════════════════

    def expr(self):
        e = self.term()
        while self.at("+") or self.at("-"):
            # `+` after an expression inside an output prefix is always arithmetic:
            # the prefix continues with `.`
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.at("*"):
            self.i += 1
            e = BinOp("*", e, self.unary())
        return e

    def unary(self):
        if self.accept("-"):
            return Neg(self.unary())
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Const(Fraction(t.text))
        if t.kind == "rat":
            self.i += 1
            return Const(Fraction(t.text[1:]))
        if t.kind == "bits":
            self.i += 1
            return Const(Bits(t.text[1:-1]))
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "ident" and t.text not in KEYWORDS:
            name = self.ident("variable")
            if self.at("(") and name in FUNCTIONS:
                self.i += 1
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[name][0]
                if len(args) != arity:
                    self.error(f"{name} takes {arity} argument(s), given {len(args)}", t)
                return Call(name, tuple(args))
            return Var(name)
        self.error(f"expected an expression, found {t.text or 'end of input'!r}")

    def bexpr(self):
        left = self.bor()
        if self.accept("=>"):
            return BBin("=>", left, self.bexpr())
        return left

    def bor(self):
        b = self.band()
        while self.accept("or"):
            b = BBin("or", b, self.band())
        return b

    def band(self):
        b = self.bnot()
        while self.accept("and"):
            b = BBin("and", b, self.bnot())
        return b

    def bnot(self):
        if self.accept("not"):
            return BNot(self.bnot())
        return self.batom()

    def batom(self):
        if self.accept("true"):
            return BConst(True)
        if self.accept("false"):
            return BConst(False)
        if self.at("("):
            save = self.i
            try:
                self.i += 1
                b = self.bexpr()
                self.expect(")")
                if self.tok.text in ("=", "!=", "<", ">", "<=", ">="):
                    raise _Backtrack
                return b
            except (ParseError, _Backtrack):
                self.i = save
        left = self.expr()
        t = self.tok
        if t.text not in ("=", "!=", "<", ">", "<=", ">="):
            self.error("expected a comparison operator")
        self.i += 1
        right = self.expr()
        if t.text == "!=":
            return BNot(Compare("=", left, right))
        return Compare(t.text, left, right)


def _eigen_value(lam: float) -> Fraction:
    return Fraction(round(lam * 10**7)) / 10**7 if abs(lam) > 1e-12 else Fraction(0)


# ═══════════════════════════════════════════════════════════════════════
# Indexed families
# ═══════════════════════════════════════════════════════════════════════

# kind -> (table, constructor taking a Bits index)
FAMILY_KINDS = {
    "set": ("superop", lambda b: qlin.set_channel(str(b))),
    "hadamard": ("superop", lambda b: qlin.unitary_channel(qlin.hadamard_pattern(list(b)))),
    "basis": ("meas", lambda b: qlin.basis_measurement(list(b), label=Bits)),
}


def family_member(defs: Defs, fam: str, kind: str, bits: Bits) -> str:
    table_kind, make = FAMILY_KINDS[kind]
    name = f"{fam}_{bits}" if len(bits) else f"{fam}_e"
    table = defs.superops if table_kind == "superop" else defs.measurements
    if name not in table:
        obj = make(bits)
        if table_kind == "superop":
            obj = qlin.SuperOp(obj.kraus, obj.trace_preserving, name=name)
        else:
            obj = qlin.ProjMeasurement(obj.outcomes, name=name)
        table[name] = obj
    return name


# ═══════════════════════════════════════════════════════════════════════
# Entry points
# ═══════════════════════════════════════════════════════════════════════


def parse_source(src: str, defs: Defs | None = None) -> Defs:
    """Parse a whole source file.  ``defs.main`` holds the main term if given."""
    return Parser(src, defs).parse_file()


def parse_process(src: str, defs: Defs | None = None):
    """Parse a bare process term against an existing environment."""
    p = Parser(src, defs if defs is not None else Defs())
    t = p.process()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r} after process")
    return t


def parse_file(path) -> Defs:
    with open(path, encoding="utf-8") as fh:
        return parse_source(fh.read())
