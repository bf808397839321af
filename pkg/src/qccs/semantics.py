"""Operational semantics: configurations, transitions and reachable pLTSs.

Transitions are derived in two stages.  First a term yields *derivations*
``(action, quantum effect, target builder)`` that do not look at the state;
these are cached per term.  Then the effect (nothing, a super-operator or a
measurement) is applied to the density operator.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from . import qlin
from .dist import PLTS, Distribution, DerivativeProgram, phase_graph, point
from .qlin import DensityOp, QReg
from .syntax.analysis import check_legal, fv, substitute
from .syntax.ast import (
    CInput, COutput, ConstApp, Defs, EvalError, If, Measure, Nil, Par, Proc, QInput,
    QOutput, Relabel, Restrict, Sum, SuperOpApp, Tau, eval_bexpr, eval_expr,
)
from .syntax.printer import normal_form, to_text
from .values import Bits, as_value, format_value

MAX_STATES = 200_000
RECURSION_LIMIT = 200


class SemanticsError(RuntimeError):
    pass


class BudgetExceeded(SemanticsError):
    pass


# ═══════════════════════════════════════════════════════════════════════
# Actions and configurations
# ═══════════════════════════════════════════════════════════════════════


@dataclass(frozen=True, order=True)
class Action:
    """One of ``tau``, ``c?v``, ``c!v`` (classical) or ``c?r``, ``c!r`` (quantum)."""

    kind: str  # tau | cin | cout | qin | qout
    chan: str = ""
    value: object = None  # a classical value, or a qubit name for quantum actions

    def __str__(self):
        if self.kind == "tau":
            return "tau"
        sym = "?" if self.kind in ("cin", "qin") else "!"
        v = self.value if self.kind in ("qin", "qout") else format_value(self.value)
        return f"{self.chan}{sym}{v}"

    def __repr__(self):
        return f"Action({self})"

    @property
    def is_tau(self) -> bool:
        return self.kind == "tau"

    def cn(self) -> frozenset:
        return frozenset() if self.kind == "tau" else frozenset([self.chan])

    def qbv(self) -> frozenset:
        return frozenset([self.value]) if self.kind == "qin" else frozenset()

    def relabel(self, fn: dict) -> "Action":
        if self.kind == "tau" or self.chan not in fn:
            return self
        return Action(self.kind, fn[self.chan], self.value)

    def sort_key(self):
        return (self.kind, self.chan, str(self.value))


TAU = Action("tau")


def parse_action(text: str, qchannels: Iterable[str] = ()) -> Action:
    text = text.strip()
    if text == "tau":
        return TAU
    for sym, kin, kout in (("?", "cin", "qin"), ("!", "cout", "qout")):
        if sym in text:
            chan, val = text.split(sym, 1)
            chan, val = chan.strip(), val.strip()
            if chan in set(qchannels):
                return Action(kout, chan, val)
            if val.startswith("'"):
                v = Bits(val.strip("'"))
            elif val.startswith("#"):
                v = Fraction(val[1:])
            else:
                v = Fraction(val)
            return Action(kin if sym == "?" else "cout", chan, v)
    raise ValueError(f"cannot parse action {text!r}")


class Configuration:
    """A pair of a closed term and a density operator over the full register."""

    __slots__ = ("term", "rho", "_key")

    def __init__(self, term: Proc, rho: DensityOp):
        self.term = term
        self.rho = rho
        self._key = normal_form(term)

    @property
    def key(self) -> str:
        return self._key

    @property
    def qv(self) -> frozenset:
        return self.term.qv

    def ptr(self) -> DensityOp:
        """State of the qubits not owned by the process."""
        return qlin.partial_trace(self.rho, self.term.qv)

    def __hash__(self):
        return hash(self._key)

    def __eq__(self, other):
        return (isinstance(other, Configuration) and self._key == other._key
                and self.rho.close_to(other.rho))

    def __repr__(self):
        return f"<{self._key}, {fingerprint(self.rho)}>"


def fingerprint(rho: DensityOp) -> str:
    m = np.round(rho.mat, 6) + 0.0  # normalises -0.0
    return hashlib.sha1(np.ascontiguousarray(m).tobytes()).hexdigest()[:12]


def check_configuration(c: Configuration, defs: Defs):
    if fv(c.term):
        raise SemanticsError(f"configuration term has free variables {sorted(fv(c.term))}")
    rep = check_legal(c.term, defs)
    if not rep.ok:
        raise SemanticsError(str(rep))
    missing = c.term.qv - set(c.rho.reg.vars)
    if missing:
        raise SemanticsError(f"process owns qubits {sorted(missing)} outside the register")


# ═══════════════════════════════════════════════════════════════════════
# Derivations
# ═══════════════════════════════════════════════════════════════════════

# A derivation is (action, effect, build) where effect is None,
# ("so", name, qvars) or ("ms", name, qvars) and build(label) -> target term.


def _const(t):
    return lambda _l=None: t


class Semantics:
    """Transition relation for one definitions environment and register."""

    def __init__(self, defs: Defs, reg: QReg | None = None, p_floor: float = qlin.P_FLOOR):
        self.defs = defs
        self.reg = reg if reg is not None else QReg(tuple(defs.qubits))
        self.p_floor = p_floor
        self._cache: dict[str, list] = {}

    # -- term level -----------------------------------------------------

    def derivations(self, t: Proc, depth: int = 0) -> list:
        key = normal_form(t)
        got = self._cache.get(key)
        if got is None:
            got = self._derive(t, depth)
            self._cache[key] = got
        return got

    def _derive(self, t: Proc, depth: int) -> list:
        if depth > RECURSION_LIMIT:
            raise SemanticsError("unguarded recursion (constant unfolding does not reach a prefix)")
        d = self.defs
        if isinstance(t, Nil):
            return []
        if isinstance(t, Tau):
            return [(TAU, None, _const(t.cont))]
        if isinstance(t, CInput):
            out = []
            for v in d.domain(t.chan):
                out.append((Action("cin", t.chan, v), None, _const(substitute(t.cont, {t.var: v}))))
            return out
        if isinstance(t, COutput):
            try:
                v = eval_expr(t.expr)
            except EvalError as exc:
                raise SemanticsError(f"cannot evaluate output on {t.chan}: {exc}") from None
            if v not in d.domain(t.chan):
                raise SemanticsError(
                    f"value {format_value(v)} is outside the declared domain of channel {t.chan}")
            return [(Action("cout", t.chan, v), None, _const(t.cont))]
        if isinstance(t, QInput):
            owned = t.qv
            out = []
            for r in self.reg.vars:
                if r not in owned:
                    out.append((Action("qin", t.chan, r), None,
                                _const(substitute(t.cont, {}, {t.qvar: r}))))
            return out
        if isinstance(t, QOutput):
            return [(Action("qout", t.chan, t.qvar), None, _const(t.cont))]
        if isinstance(t, SuperOpApp):
            if t.op not in d.superops:
                raise SemanticsError(f"unbound super-operator {t.op}")
            return [(TAU, ("so", t.op, t.qvars), _const(t.cont))]
        if isinstance(t, Measure):
            if t.meas not in d.measurements:
                raise SemanticsError(f"unbound measurement {t.meas}")
            cont, x = t.cont, t.var
            return [(TAU, ("ms", t.meas, t.qvars), lambda lab: substitute(cont, {x: as_value(lab)}))]
        if isinstance(t, Sum):
            return self.derivations(t.left, depth) + self.derivations(t.right, depth)
        if isinstance(t, Par):
            return self._par(t, depth)
        if isinstance(t, Relabel):
            fn = t.mapping()
            fnt = t.fn
            out = []
            for a, eff, mk in self.derivations(t.cont, depth):
                out.append((a.relabel(fn), eff, (lambda l, mk=mk: Relabel(mk(l), fnt))))
            return out
        if isinstance(t, Restrict):
            L = t.chans
            out = []
            for a, eff, mk in self.derivations(t.cont, depth):
                if a.cn() & L:
                    continue
                out.append((a, eff, (lambda l, mk=mk: Restrict(mk(l), L))))
            return out
        if isinstance(t, If):
            try:
                ok = eval_bexpr(t.cond)
            except EvalError as exc:
                raise SemanticsError(f"cannot evaluate condition: {exc}") from None
            return self.derivations(t.cont, depth) if ok else []
        if isinstance(t, ConstApp):
            return self.derivations(self.unfold(t), depth + 1)
        raise TypeError(f"not a process term: {t!r}")

    def unfold(self, t: ConstApp) -> Proc:
        dfn = self.defs.consts.get(t.name)
        if dfn is None:
            raise SemanticsError(f"undefined constant {t.name}")
        if len(dfn.qparams) != len(t.qargs) or len(dfn.cparams) != len(t.cargs):
            raise SemanticsError(f"wrong number of arguments to {t.name}")
        try:
            vals = {x: eval_expr(e) for x, e in zip(dfn.cparams, t.cargs)}
        except EvalError as exc:
            raise SemanticsError(f"cannot evaluate arguments of {t.name}: {exc}") from None
        return substitute(dfn.body, vals, dict(zip(dfn.qparams, t.qargs)))

    def _par(self, t: Par, depth: int) -> list:
        P1, P2 = t.left, t.right
        L = self.derivations(P1, depth)
        R = self.derivations(P2, depth)
        out = []
        # Int and its mirror image
        for a, eff, mk in L:
            if not (a.qbv() & P2.qv):
                out.append((a, eff, (lambda l, mk=mk: Par(mk(l), P2))))
        for a, eff, mk in R:
            if not (a.qbv() & P1.qv):
                out.append((a, eff, (lambda l, mk=mk: Par(P1, mk(l)))))
        # C-Com and Q-Com, both directions
        outs_r: dict = {}
        for a, eff, mk in R:
            if a.kind in ("cout", "qout"):
                outs_r.setdefault((a.chan, a.value), []).append(mk)
        outs_l: dict = {}
        for a, eff, mk in L:
            if a.kind in ("cout", "qout"):
                outs_l.setdefault((a.chan, a.value), []).append(mk)
        for a, eff, mk in L:
            if a.kind in ("cin", "qin"):
                for mk2 in outs_r.get((a.chan, a.value), ()):
                    out.append((TAU, None, (lambda l, m1=mk, m2=mk2: Par(m1(None), m2(None)))))
        for a, eff, mk in R:
            if a.kind in ("cin", "qin"):
                for mk1 in outs_l.get((a.chan, a.value), ()):
                    out.append((TAU, None, (lambda l, m1=mk1, m2=mk: Par(m1(None), m2(None)))))
        return out

    # -- configuration level -------------------------------------------

    def apply_effect(self, eff, rho: DensityOp) -> list[tuple]:
        """``[(label, p, rho')]`` for an effect."""
        if eff is None:
            return [(None, 1.0, rho)]
        kind, name, qvars = eff
        if kind == "so":
            return [(None, 1.0, qlin.apply_superop(self.defs.superops[name], rho, qvars))]
        m = self.defs.measurements[name]
        return [(lab, p, st) for lab, p, st in qlin.measure(m, rho, qvars, self.p_floor)]

    def step(self, c: Configuration) -> list[tuple[Action, Distribution]]:
        """All transitions of ``c`` as ``(action, distribution over configurations)``."""
        out = []
        for a, eff, mk in self.derivations(c.term):
            branches = self.apply_effect(eff, c.rho)
            d = Distribution(((Configuration(mk(lab), st), p) for lab, p, st in branches))
            out.append((a, d))
        return out

    def raw_step(self, term: Proc, rho: DensityOp):
        """Like ``step`` but returns ``(action, [(p, term, rho)])`` without building keys."""
        out = []
        for a, eff, mk in self.derivations(term):
            out.append((a, [(p, mk(lab), st) for lab, p, st in self.apply_effect(eff, rho)]))
        return out


# ═══════════════════════════════════════════════════════════════════════
# State spaces
# ═══════════════════════════════════════════════════════════════════════


class StateSpace:
    """Incrementally explored set of configurations, indexed ``0..n-1``.

    Configurations are bucketed by the normal form of their term; inside a
    bucket density operators are compared entrywise within ``tol``.
    """

    def __init__(self, sem: Semantics, max_states: int = MAX_STATES, tol: float = qlin.TOL):
        self.sem = sem
        self.max_states = max_states
        self.tol = tol
        self.configs: list[Configuration] = []
        self.trans: list[list | None] = []
        self._buckets: dict[str, list[int]] = {}
        self._frontier: list[int] = []
        self.tags: list = []  # free-form per-state annotations (e.g. family images)

    def __len__(self):
        return len(self.configs)

    def intern(self, c: Configuration, tag=None) -> int:
        bucket = self._buckets.setdefault(c.key, [])
        for i in bucket:
            if np.max(np.abs(self.configs[i].rho.mat - c.rho.mat), initial=0.0) <= self.tol:
                return i
        if len(self.configs) >= self.max_states:
            raise BudgetExceeded(f"state budget of {self.max_states} configurations exceeded")
        i = len(self.configs)
        self.configs.append(c)
        self.trans.append(None)
        self.tags.append(tag)
        bucket.append(i)
        self._frontier.append(i)
        return i

    def lookup(self, c: Configuration) -> int | None:
        for i in self._buckets.get(c.key, ()):
            if np.max(np.abs(self.configs[i].rho.mat - c.rho.mat), initial=0.0) <= self.tol:
                return i
        return None

    def explore(self, on_new: Callable[[int], None] | None = None):
        """Expand every unexplored state (breadth first)."""
        sem = self.sem
        while self._frontier:
            batch, self._frontier = self._frontier, []
            for i in batch:
                if self.trans[i] is not None:
                    continue
                c = self.configs[i]
                ts = []
                for a, branches in sem.raw_step(c.term, c.rho):
                    tg = [(self.intern(Configuration(t, st)), p) for p, t, st in branches]
                    ts.append((a, Distribution(tg)))
                self.trans[i] = ts
                if on_new is not None:
                    on_new(i)

    def plts(self) -> PLTS:
        trans = [t if t is not None else [] for t in self.trans]
        return PLTS(len(self.configs), trans, tau=TAU, display=[c.key for c in self.configs])

    def export(self) -> dict:
        p = self.plts()
        doc = p.to_document(label_str=str, fingerprints=[fingerprint(c.rho) for c in self.configs])
        for st, c in zip(doc["states"], self.configs):
            st["term"] = to_text(c.term)
        return doc


def build_plts(init: Configuration, sem: Semantics, max_states: int = MAX_STATES) -> tuple[StateSpace, int]:
    """Reachable pLTS of ``init``; returns the space and the index of ``init``."""
    check_configuration(init, sem.defs)
    space = StateSpace(sem, max_states)
    i = space.intern(init)
    space.explore()
    return space, i


# ═══════════════════════════════════════════════════════════════════════
# Barbs
# ═══════════════════════════════════════════════════════════════════════


def barb_states(space: StateSpace, chan: str) -> set:
    return {i for i, ts in enumerate(space.trans) if ts and any(
        a.kind == "cout" and a.chan == chan for a, _ in ts)}


def barb_value(plts: PLTS, start: int, good: set) -> float:
    """Largest ``V(Theta)`` over weak tau-derivatives ``Theta`` of ``start``."""
    prog = DerivativeProgram(phase_graph(plts, point(start), plts.tau))
    cost = {j: -1.0 for s, j in prog.stop_vars.items() if s in good}
    if not cost:
        return 0.0
    x = prog.lp.solve(cost)
    if x is None:
        raise SemanticsError("weak derivative program is infeasible")
    return float(min(1.0, max(0.0, sum(x[j] for j in cost))))


def barbs(c: Configuration, chan: str, sem: Semantics, max_states: int = MAX_STATES) -> float:
    space, i = build_plts(c, sem, max_states)
    return barb_value(space.plts(), i, barb_states(space, chan))


# ═══════════════════════════════════════════════════════════════════════
# Initial states
# ═══════════════════════════════════════════════════════════════════════


def initial_state(reg: QReg, spec=None) -> DensityOp:
    """Build a density operator from ``("ket", "0+")``, ``("matrix", M)``, a ``DensityOp``
    or ``None`` (all qubits in ``|0>``)."""
    if spec is None:
        return DensityOp.from_ket(reg, "0" * reg.n)
    if isinstance(spec, DensityOp):
        if spec.reg.vars != reg.vars:
            raise SemanticsError("initial state register does not match the declared qubits")
        return spec
    kind, val = spec
    if kind == "ket":
        return DensityOp.from_ket(reg, val)
    if kind == "matrix":
        return DensityOp(reg, np.asarray(val, dtype=complex))
    raise SemanticsError(f"unknown initial state form {kind!r}")
