"""Quantum Hennessy-Milner logic: formulas, satisfaction and distinguishing formulas.

Configuration formulas::

    phi := E{q1,..}[>=p] | phi & phi | <a> psi | !phi | SO(op[q];..).phi | true | false
    psi := ( p1*phi1 (+) p2*phi2 ... )          weights sum to 1

``sat`` is three-valued.  For a diamond the set of weak derivatives is a
polytope and the distributions satisfying a fixed ``psi`` form a convex set,
so existence is one joint feasibility program (derivative flow plus the
weight matrix ``w(s, i)``).  ``unknown`` only arises when a sub-formula is
undecided at some candidate state and the two bracketing programs disagree.
"""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import qlin
from .dist import TOL, DerivativeProgram, Distribution, point
from .family import SuperOpFamily, default_family
from .semantics import Action, Configuration, Semantics, StateSpace, parse_action
from .syntax.printer import matrix_text


class FormulaError(ValueError):
    pass


class Truth(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"

    def __invert__(self):
        return {Truth.TRUE: Truth.FALSE, Truth.FALSE: Truth.TRUE}.get(self, Truth.UNKNOWN)

    @property
    def decided(self) -> bool:
        return self is not Truth.UNKNOWN

    @staticmethod
    def of(b: bool) -> "Truth":
        return Truth.TRUE if b else Truth.FALSE

    def __str__(self):
        return self.value


# ═══════════════════════════════════════════════════════════════════════
# Formula AST
# ═══════════════════════════════════════════════════════════════════════


class Formula:
    """Base class.  ``key`` is the printed form, used for memoisation."""

    @property
    def key(self) -> str:
        k = self.__dict__.get("_key")
        if k is None:
            k = to_text(self)
            object.__setattr__(self, "_key", k)
        return k

    def __eq__(self, other):
        return isinstance(other, Formula) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __str__(self):
        return self.key

    def __repr__(self):
        return f"Formula({self.key})"

    def __and__(self, other):
        return And((self, other))

    def __invert__(self):
        return Not(self)


@dataclass(frozen=True, eq=False, repr=False)
class ProjAtom(Formula):
    """``E{q}[>=p]``: ``q`` not owned and ``tr(E rho) >= p``."""

    E: np.ndarray
    qvars: tuple
    p: float
    label: str = ""  # ket string for printing, empty for explicit matrices

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0 + TOL:
            raise FormulaError(f"threshold {self.p} outside [0, 1]")
        E = np.asarray(self.E, dtype=complex)
        if E.shape != (2 ** len(self.qvars),) * 2:
            raise FormulaError(f"projector of shape {E.shape} does not fit qubits {self.qvars}")
        if len(set(self.qvars)) != len(self.qvars):
            raise FormulaError("repeated qubit in atom")
        if not np.allclose(E @ E, E, atol=1e-7) or not qlin.is_hermitian(E):
            raise FormulaError("atom matrix is not a projector")
        object.__setattr__(self, "E", E)


@dataclass(frozen=True, eq=False, repr=False)
class And(Formula):
    parts: tuple = ()


@dataclass(frozen=True, eq=False, repr=False)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True, eq=False, repr=False)
class DistFormula:
    items: tuple  # ((weight, Formula), ...)

    def __post_init__(self):
        if not self.items:
            raise FormulaError("empty distribution formula")
        for w, _ in self.items:
            if w < -TOL:
                raise FormulaError(f"negative weight {w}")
        tot = sum(w for w, _ in self.items)
        if abs(tot - 1.0) > 1e-7:
            raise FormulaError(f"weights sum to {tot}, not 1")


@dataclass(frozen=True, eq=False, repr=False)
class Diamond(Formula):
    action: Action
    psi: DistFormula


@dataclass(frozen=True, eq=False, repr=False)
class SuperOpMod(Formula):
    """``SO(op[q];..).phi``: apply the listed super-operators, then check ``phi``."""

    ops: tuple  # ((name, qubits), ...)
    arg: Formula


TRUE_F = And(())
FALSE_F = Not(TRUE_F)


def make_and(parts) -> Formula:
    flat = []
    seen = set()
    for f in parts:
        for g in (f.parts if isinstance(f, And) else (f,)):
            if g.key not in seen:
                seen.add(g.key)
                flat.append(g)
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def depth(f: Formula) -> int:
    if isinstance(f, ProjAtom):
        return 0
    if isinstance(f, And):
        return max((depth(g) for g in f.parts), default=0)
    if isinstance(f, Not):
        return depth(f.arg)
    if isinstance(f, SuperOpMod):
        return depth(f.arg)
    if isinstance(f, Diamond):
        return 1 + max(depth(g) for _, g in f.psi.items)
    raise TypeError(f)


def size(f: Formula) -> int:
    if isinstance(f, ProjAtom):
        return 1
    if isinstance(f, And):
        return 1 + sum(size(g) for g in f.parts)
    if isinstance(f, (Not, SuperOpMod)):
        return 1 + size(f.arg)
    return 1 + sum(size(g) for _, g in f.psi.items)


# ═══════════════════════════════════════════════════════════════════════
# Printer
# ═══════════════════════════════════════════════════════════════════════


def _num(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def to_text(f) -> str:
    if isinstance(f, ProjAtom):
        if f.label == "I":
            head = "I"
        elif f.label:
            head = "proj(" + ", ".join(f'"{k}"' for k in f.label.split(",")) + ")"
        else:
            head = matrix_text(f.E)
        return f"{head}{{{','.join(f.qvars)}}}[>={_num(f.p)}]"
    if isinstance(f, And):
        if not f.parts:
            return "true"
        return " & ".join(_wrap(g) for g in f.parts)
    if isinstance(f, Not):
        if isinstance(f.arg, And) and not f.arg.parts:
            return "false"
        return "!" + _wrap(f.arg)
    if isinstance(f, SuperOpMod):
        ops = ";".join(f"{n}[{','.join(q)}]" for n, q in f.ops)
        return f"SO({ops})." + _wrap(f.arg)
    if isinstance(f, Diamond):
        return f"<{f.action}>" + dist_text(f.psi)
    raise TypeError(f"not a formula: {f!r}")


def dist_text(psi: DistFormula) -> str:
    return "( " + " (+) ".join(f"{_num(w)}*{_wrap(g)}" for w, g in psi.items) + " )"


def _wrap(f) -> str:
    s = to_text(f)
    if isinstance(f, And) and len(f.parts) > 1:
        return f"({s})"
    return s


# ═══════════════════════════════════════════════════════════════════════
# Parser
# ═══════════════════════════════════════════════════════════════════════

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<str>"[^"]*")
  | (?P<rat>\#-?\d+/\d+)
  | (?P<num>\d+(\.\d*)?([eE][-+]?\d+)?|\.\d+([eE][-+]?\d+)?)
  | (?P<diamond><[^<>]+>)
  | (?P<oplus>\(\+\))
  | (?P<ge>>=)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>[()\[\]{},.&!*;+\-/:])
""", re.VERBOSE)


def _tokens(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise FormulaError(f"unexpected character {text[pos]!r} at offset {pos}")
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("eof", "", pos))
    return out


class _FormulaParser:
    def __init__(self, text: str, params: dict | None, qchannels):
        self.toks = _tokens(text)
        self.i = 0
        self.params = {k: float(v) for k, v in (params or {}).items()}
        self.qchannels = set(qchannels)

    @property
    def tok(self):
        return self.toks[self.i]

    def at(self, s: str) -> bool:
        return self.tok[1] == s

    def accept(self, s: str) -> bool:
        if self.at(s):
            self.i += 1
            return True
        return False

    def expect(self, s: str):
        if not self.accept(s):
            self.error(f"expected {s!r}")

    def error(self, msg: str):
        kind, text, pos = self.tok
        raise FormulaError(f"offset {pos}: {msg}, found {text or 'end of input'!r}")

    def parse(self) -> Formula:
        f = self.formula()
        if self.tok[0] != "eof":
            self.error("trailing input")
        return f

    def formula(self) -> Formula:
        parts = [self.unary()]
        while self.accept("&"):
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary(self) -> Formula:
        kind, text, _ = self.tok
        if self.accept("!"):
            return Not(self.unary())
        if kind == "diamond":
            self.i += 1
            try:
                act = parse_action(text[1:-1], self.qchannels)
            except ValueError as e:
                raise FormulaError(str(e)) from None
            return Diamond(act, self.dist())
        if self.at("true"):
            self.i += 1
            return TRUE_F
        if self.at("false"):
            self.i += 1
            return FALSE_F
        if self.at("SO"):
            self.i += 1
            self.expect("(")
            ops = [self.op_app()]
            while self.accept(";"):
                ops.append(self.op_app())
            self.expect(")")
            self.expect(".")
            return SuperOpMod(tuple(ops), self.unary())
        if self.at("("):
            self.i += 1
            f = self.formula()
            self.expect(")")
            return f
        return self.atom()

    def op_app(self):
        kind, name, _ = self.tok
        if kind != "ident":
            self.error("expected a super-operator name")
        self.i += 1
        return name, self.bracket_qubits("[", "]")

    def bracket_qubits(self, lo, hi) -> tuple:
        self.expect(lo)
        qs = []
        while not self.at(hi):
            kind, q, _ = self.tok
            if kind != "ident":
                self.error("expected a qubit name")
            qs.append(q)
            self.i += 1
            if not self.accept(","):
                break
        self.expect(hi)
        return tuple(qs)

    def atom(self) -> Formula:
        label = ""
        if self.at("proj"):
            self.i += 1
            self.expect("(")
            kets = [self.string()]
            while self.accept(","):
                kets.append(self.string())
            self.expect(")")
            E = _span_projector(kets)
            label = ",".join(kets)
        elif self.at("I"):
            self.i += 1
            E = None
            label = "I"
        elif self.at("["):
            E = self.matrix()
        else:
            self.error("expected a formula")
        qs = self.bracket_qubits("{", "}")
        if E is None:
            E = np.eye(2 ** len(qs))
        self.expect("[")
        self.expect(">=")
        p = self.weight()
        self.expect("]")
        if E.shape[0] != 2 ** len(qs):
            raise FormulaError(f"projector does not fit qubits {qs}")
        return ProjAtom(E, qs, p, label)

    def string(self) -> str:
        kind, text, _ = self.tok
        if kind != "str":
            self.error("expected a ket string")
        self.i += 1
        return text[1:-1]

    def matrix(self) -> np.ndarray:
        def lst():
            self.expect("[")
            items = []
            while not self.at("]"):
                items.append(lst() if self.at("[") else self.signed_number())
                if not self.accept(","):
                    break
            self.expect("]")
            return items

        rows = lst()
        try:
            return np.array([[complex(*x) if isinstance(x, list) else complex(x) for x in r] for r in rows])
        except TypeError:
            raise FormulaError("malformed matrix literal") from None

    def signed_number(self) -> float:
        neg = self.accept("-")
        v = self.number()
        return -v if neg else v

    def number(self) -> float:
        kind, text, _ = self.tok
        if kind == "num":
            self.i += 1
            return float(text)
        if kind == "rat":
            self.i += 1
            return float(Fraction(text[1:]))
        if kind == "ident" and text in self.params:
            self.i += 1
            return self.params[text]
        if kind == "ident":
            raise FormulaError(f"unbound parameter {text!r} (pass it with --param {text}=...)")
        self.error("expected a number")

    # weights: arithmetic over numbers and parameters
    def weight(self) -> float:
        v = self.wterm()
        while self.tok[1] in ("+", "-"):
            op = self.tok[1]
            self.i += 1
            r = self.wterm()
            v = v + r if op == "+" else v - r
        return v

    def wterm(self) -> float:
        v = self.watom()
        while self.at("/"):
            self.i += 1
            v = v / self.watom()
        return v

    def watom(self) -> float:
        if self.accept("("):
            v = self.weight()
            self.expect(")")
            return v
        if self.accept("-"):
            return -self.watom()
        return self.number()

    def dist(self) -> DistFormula:
        if not self.at("("):
            return DistFormula(((1.0, self.unary()),))
        save = self.i
        self.i += 1
        try:
            items = [self.dist_item()]
        except FormulaError:
            self.i = save
            return DistFormula(((1.0, self.unary()),))
        while self.accept("(+)"):
            items.append(self.dist_item())
        self.expect(")")
        try:
            return DistFormula(tuple(items))
        except FormulaError as e:
            raise FormulaError(f"offset {self.tok[2]}: {e}") from None

    def dist_item(self):
        w = self.weight_prefix()
        return w, self.unary()

    def weight_prefix(self) -> float:
        # weight '*' ; the weight may contain '*' only inside parentheses
        v = self.watom()
        while self.at("/"):
            self.i += 1
            v = v / self.watom()
        self.expect("*")
        return v


def parse_formula(text: str, params: dict | None = None, qchannels=()) -> Formula:
    """Parse formula text; ``params`` binds identifiers used in weights and thresholds."""
    return _FormulaParser(text, params, qchannels).parse()


def _span_projector(kets: list[str]) -> np.ndarray:
    vecs = [qlin.ket(k) for k in kets]
    if len({len(k) for k in kets}) != 1:
        raise FormulaError("kets of different lengths in proj(...)")
    M = np.array(vecs).T
    G = M.conj().T @ M
    if not np.allclose(G, np.eye(len(kets)), atol=1e-9):
        raise FormulaError("proj(...) kets must be orthonormal")
    return M @ M.conj().T


# ═══════════════════════════════════════════════════════════════════════
# Satisfaction
# ═══════════════════════════════════════════════════════════════════════


@dataclass
class DiamondWitness:
    state: int
    action: Action
    theta: Distribution
    weights: list = field(default_factory=list)  # (w, state, item index)


class Checker:
    """Model checker over a growing state space.

    Super-operator names resolve against the environment's ``superop``
    declarations and then against ``family`` generators.
    """

    def __init__(self, sem: Semantics, space: StateSpace | None = None,
                 family: SuperOpFamily | None = None, tol: float = TOL):
        self.sem = sem
        self.space = space if space is not None else StateSpace(sem)
        self.family = family if family is not None else default_family()
        self.tol = tol
        self._memo: dict = {}
        self._plts = None
        self._plts_n = -1
        self._oracle_graphs: dict = {}
        self.witnesses: dict = {}

    # -- states ---------------------------------------------------------

    def state(self, c) -> int:
        if isinstance(c, (int, np.integer)):
            return int(c)
        i = self.space.intern(c)
        self.space.explore()
        return i

    def plts(self):
        if self._plts_n != len(self.space):
            self._plts = self.space.plts()
            self._plts_n = len(self.space)
            self._oracle_graphs = {}
        return self._plts

    def superop(self, name: str):
        if name in self.sem.defs.superops:
            return self.sem.defs.superops[name]
        for g in self.family.generators:
            if g.name == name:
                return g.op
        raise FormulaError(f"unknown super-operator {name!r}")

    # -- clauses --------------------------------------------------------

    def sat(self, c, f: Formula) -> Truth:
        i = self.state(c)
        key = (i, f.key)
        got = self._memo.get(key)
        if got is None:
            got = self._sat(i, f)
            self._memo[key] = got
        return got

    def _sat(self, i: int, f: Formula) -> Truth:
        c = self.space.configs[i]
        if isinstance(f, ProjAtom):
            if set(f.qvars) & c.qv:
                return Truth.FALSE
            unknown = set(f.qvars) - set(self.sem.reg.vars)
            if unknown:
                raise FormulaError(f"atom mentions undeclared qubits {sorted(unknown)}")
            val = qlin.expectation(f.E, c.rho, f.qvars)
            return Truth.of(val >= f.p - self.tol)
        if isinstance(f, And):
            out = Truth.TRUE
            for g in f.parts:
                t = self.sat(i, g)
                if t is Truth.FALSE:
                    return Truth.FALSE
                if t is Truth.UNKNOWN:
                    out = Truth.UNKNOWN
            return out
        if isinstance(f, Not):
            return ~self.sat(i, f.arg)
        if isinstance(f, SuperOpMod):
            rho = c.rho
            for name, qs in f.ops:
                if set(qs) & c.qv:
                    return Truth.FALSE
                op = self.superop(name)
                if op.arity != len(qs):
                    raise FormulaError(f"{name} acts on {op.arity} qubits, got {len(qs)}")
                rho = qlin.apply_superop(op, rho, qs)
            j = self.state(Configuration(c.term, rho))
            return self.sat(j, f.arg)
        if isinstance(f, Diamond):
            return self._diamond(i, f)
        raise TypeError(f"not a formula: {f!r}")

    def _diamond(self, i: int, f: Diamond) -> Truth:
        from .dist import phase_graph

        plts = self.plts()
        g = phase_graph(plts, point(i), f.action)
        finals = sorted({nd[1] for nd in g.finals})
        items = f.psi.items
        table = {s: [self.sat(s, phi) for _, phi in items] for s in finals}
        ok_true = self._feasible(g, items, i, f.action, lambda s, k: table[s][k] is Truth.TRUE)
        if ok_true:
            return Truth.TRUE
        if not any(t is Truth.UNKNOWN for row in table.values() for t in row):
            return Truth.FALSE
        ok_maybe = self._feasible(g, items, i, f.action, lambda s, k: table[s][k] is not Truth.FALSE,
                                  record=False)
        return Truth.UNKNOWN if ok_maybe else Truth.FALSE

    def _feasible(self, graph, items, i, action, allowed, record=True) -> bool:
        ks = range(len(items))
        prog = DerivativeProgram(graph, lambda s: any(allowed(s, k) for k in ks))
        if not prog.feasible_shape:
            return False
        lp = prog.lp
        w = {}
        for s, j in prog.stop_vars.items():
            row = {j: -1.0}
            for k in ks:
                if allowed(s, k):
                    w[(s, k)] = lp.var()
                    row[w[(s, k)]] = 1.0
            lp.eq(row, 0.0)
        for k in ks:
            cols = {v: 1.0 for (s, kk), v in w.items() if kk == k}
            if not cols:
                if items[k][0] > self.tol:
                    return False
                continue
            lp.eq(cols, items[k][0])
        x = prog.solve()
        if x is None:
            return False
        if record:
            self.witnesses[(i, str(action), dist_text(Diamond(action, DistFormula(items)).psi))] = DiamondWitness(
                i, action, prog.theta(x),
                [(float(x[v]), s, k) for (s, k), v in w.items() if x[v] > 1e-12])
        return True

    def sat_dist(self, d: Distribution, psi: DistFormula) -> Truth:
        """``d`` (over state indices) satisfies ``psi``: a transportation problem."""
        from .dist import _LP

        def solve(allowed):
            lp = _LP()
            w = {}
            for s in d:
                for k in range(len(psi.items)):
                    if allowed(s, k):
                        w[(s, k)] = lp.var()
            for s, p in d.items():
                cols = {v: 1.0 for (ss, _), v in w.items() if ss == s}
                if not cols:
                    return False
                lp.eq(cols, p)
            for k, (p, _) in enumerate(psi.items):
                cols = {v: 1.0 for (_, kk), v in w.items() if kk == k}
                if not cols:
                    if p > self.tol:
                        return False
                    continue
                lp.eq(cols, p)
            return lp.solve() is not None

        table = {s: [self.sat(s, phi) for _, phi in psi.items] for s in d}
        if solve(lambda s, k: table[s][k] is Truth.TRUE):
            return Truth.TRUE
        if not any(t is Truth.UNKNOWN for r in table.values() for t in r):
            return Truth.FALSE
        return Truth.UNKNOWN if solve(lambda s, k: table[s][k] is not Truth.FALSE) else Truth.FALSE


def sat(c: Configuration, f: Formula, sem: Semantics, family: SuperOpFamily | None = None) -> Truth:
    return Checker(sem, family=family).sat(c, f)


def sat_dist(d: Distribution, psi: DistFormula, sem: Semantics) -> Truth:
    """``d`` is a distribution over configurations."""
    ch = Checker(sem)
    idx = Distribution({ch.state(c): p for c, p in d.items()})
    return ch.sat_dist(idx, psi)


# ═══════════════════════════════════════════════════════════════════════
# Distinguishing formulas
# ═══════════════════════════════════════════════════════════════════════


class DistinguishError(RuntimeError):
    pass


def distinguish(game, x: int, y: int, checker: Checker | None = None) -> Formula:
    """A formula true at state ``x`` and false at ``y`` of a solved game.

    Built along the refinement history: a pair split in round ``k`` gets a
    formula whose sub-formulas distinguish pairs split before ``k``.
    """
    memo: dict = {}
    f = _distinguish(game, x, y, memo)
    ch = checker or Checker(game.sem, game.space, game.family)
    tx, ty = ch.sat(x, f), ch.sat(y, f)
    if tx is not Truth.TRUE or ty is not Truth.FALSE:
        raise DistinguishError(f"synthesised formula does not verify (left {tx}, right {ty}): {f}")
    return f


def _distinguish(game, x: int, y: int, memo: dict) -> Formula:
    got = memo.get((x, y))
    if got is not None:
        return got
    w = game.explain(x, y)
    if w is None:
        raise DistinguishError(f"states {x} and {y} are not distinguished")
    space = game.space
    cx, cy = space.configs[x], space.configs[y]
    if w.kind == "qv":
        only_y = sorted(cy.qv - cx.qv)
        if only_y:
            f = ProjAtom(np.eye(2), (only_y[0],), 1.0, "I")
        else:
            f = Not(ProjAtom(np.eye(2), (sorted(cx.qv - cy.qv)[0],), 1.0, "I"))
    elif w.kind == "ptr":
        f = _ptr_atom(game.sem.reg, cx, cy)
    elif w.kind == "superop":
        a, b = w.sub.pair
        f = SuperOpMod(tuple(w.member), _distinguish(game, a, b, memo))
    elif w.challenger != x:
        f = Not(_distinguish(game, y, x, memo))
    else:
        prev = game.history[w.round - 1]
        finals = game.closure_states(y, w.action)
        items = []
        for s, p in sorted(w.distribution.items()):
            conj = [_distinguish(game, s, t, memo) for t in finals if prev[t] != prev[s]]
            items.append((p, make_and(conj) if conj else TRUE_F))
        tot = sum(p for p, _ in items)
        items = tuple((p / tot, g) for p, g in items)
        f = Diamond(w.action, DistFormula(_merge_items(items)))
    memo[(x, y)] = f
    return f


def _merge_items(items) -> tuple:
    acc: dict = {}
    order = []
    for p, g in items:
        if g.key not in acc:
            acc[g.key] = [0.0, g]
            order.append(g.key)
        acc[g.key][0] += p
    return tuple((acc[k][0], acc[k][1]) for k in order)


def _ptr_atom(reg: qlin.QReg, cx: Configuration, cy: Configuration) -> ProjAtom:
    """Projector onto the positive part of ``ptr(x) - ptr(y)`` on the fewest qubits that differ."""
    free = reg.complement(cx.qv)
    for k in range(1, len(free) + 1):
        for qs in itertools.combinations(free, k):
            rx = qlin.reduced(cx.rho, qs)
            ry = qlin.reduced(cy.rho, qs)
            A = rx.mat - ry.mat
            vals, vecs = np.linalg.eigh((A + A.conj().T) / 2)
            pos = vecs[:, vals > qlin.EIG_TOL]
            if pos.shape[1] == 0:
                continue
            E = pos @ pos.conj().T
            tx = float(np.real(np.trace(E @ rx.mat)))
            ty = float(np.real(np.trace(E @ ry.mat)))
            if tx - ty > 2 * TOL:
                return ProjAtom(E, tuple(qs), (tx + ty) / 2, _ket_label(E))
    raise DistinguishError("reduced states are too close to separate")


def _ket_label(E: np.ndarray) -> str:
    n = int(round(np.log2(E.shape[0])))
    for ks in itertools.product("01+-", repeat=n):
        k = "".join(ks)
        if np.allclose(E, qlin.ket_projector(k), atol=1e-9):
            return k
    return ""


# ═══════════════════════════════════════════════════════════════════════
# Random formulas
# ═══════════════════════════════════════════════════════════════════════


def atom_pool(qubits) -> list[ProjAtom]:
    """Single-qubit atoms in the Z and X bases plus owner tests ``I{q}[>=1]``."""
    out = []
    for q in qubits:
        out.append(ProjAtom(np.eye(2), (q,), 1.0, "I"))
        for k in "01+-":
            for p in (0.5, 1.0):
                out.append(ProjAtom(qlin.ket_projector(k), (q,), p, k))
    return out


def random_formula(rng: np.random.Generator, max_depth: int, actions: list, atoms: list,
                   ops: list = (), max_size: int = 12) -> Formula:
    """A random formula of modal depth at most ``max_depth``.

    ``actions`` should come from the alphabet of the system under test;
    ``ops`` are ``((name, qubits), ...)`` members for ``SO`` modalities.
    """
    budget = [max_size]

    def gen(d: int) -> Formula:
        budget[0] -= 1
        choices = ["atom"]
        if budget[0] > 0:
            choices += ["not", "and"]
            if d > 0 and actions:
                choices += ["diamond", "diamond"]
            if ops:
                choices.append("so")
        kind = choices[int(rng.integers(len(choices)))]
        if kind == "atom":
            if rng.random() < 0.15 or not atoms:
                return TRUE_F
            return atoms[int(rng.integers(len(atoms)))]
        if kind == "not":
            return Not(gen(d))
        if kind == "and":
            return make_and([gen(d), gen(d)])
        if kind == "so":
            return SuperOpMod(tuple(ops[int(rng.integers(len(ops)))]), gen(d))
        a = actions[int(rng.integers(len(actions)))]
        if rng.random() < 0.5:
            items = ((1.0, gen(d - 1)),)
        else:
            p = float(rng.choice([0.25, 0.5, 0.75]))
            items = ((p, gen(d - 1)), (1.0 - p, gen(d - 1)))
        return Diamond(a, DistFormula(items))

    return gen(max_depth)
