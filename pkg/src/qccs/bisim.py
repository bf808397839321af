"""Ground, weak open and strong open bisimilarity by partition refinement.

The refinement works on one state space holding every configuration
reachable from the compared roots (plus super-operator images in the open
modes).  The initial partition groups states by owned qubits and by the
reduced state of the remaining qubits.  Each round collects, per block, the
*challenges* ``(action, block masses)`` induced by the strong transitions of
its members, and splits the block by which challenges each member can answer
with a weak (or strong) move, together with the blocks of its super-operator
images.  Splits never separate bisimilar states, and at the fixpoint every
member answers every challenge of its block, so the final partition is the
largest bisimulation on the explored states.

Super-operator images are skipped for *quantum-inert* states (terms with no
reachable quantum prefix).  For two inert related states closure under any
super-operator on the unowned qubits follows from ground bisimilarity alone,
because their transitions never touch the state.  A block mixing inert and
non-inert states gets images for all of its members, and refinement
restarts.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import qlin
from .dist import STRONG, WEAK, Distribution, WeakOracle, lift_check, point
from .family import SuperOpFamily, default_family, identity_family
from .semantics import (
    TAU, BudgetExceeded, Configuration, Semantics, StateSpace, check_configuration, fingerprint,
)
from .syntax.analysis import substitute
from .syntax.ast import (
    ConstApp, If, Measure, Nil, Par, Proc, QInput, QOutput, Relabel, Restrict, Sum,
    SuperOpApp, children,
)
from .syntax.printer import to_text

MASS_DIGITS = 9

EQUIVALENT = "equivalent"
DISTINGUISHED = "distinguished"


# ═══════════════════════════════════════════════════════════════════════
# Quantum inertness
# ═══════════════════════════════════════════════════════════════════════


def is_inert(t: Proc, defs, _memo: dict | None = None) -> bool:
    """True when no quantum prefix is reachable from ``t`` (constants unfolded)."""
    memo = _memo if _memo is not None else {}
    stack = [t]
    seen_consts = set()
    while stack:
        x = stack.pop()
        if isinstance(x, (SuperOpApp, Measure, QInput, QOutput)):
            return False
        if isinstance(x, ConstApp):
            if x.name in memo:
                if not memo[x.name]:
                    return False
                continue
            if x.name in seen_consts:
                continue
            seen_consts.add(x.name)
            d = defs.consts.get(x.name)
            if d is not None:
                stack.append(d.body)
            continue
        stack.extend(children(x))
    for c in seen_consts:
        memo.setdefault(c, True)
    return True


# ═══════════════════════════════════════════════════════════════════════
# Results
# ═══════════════════════════════════════════════════════════════════════


@dataclass
class Witness:
    """A failing position of the bisimulation game.

    ``kind`` is ``qv`` or ``ptr`` (the pair fails the static conditions),
    ``move`` (``challenger`` has a move the ``defender`` cannot answer) or
    ``superop`` (the images under ``member`` are distinguished, see ``sub``).
    """

    kind: str
    pair: tuple
    round: int
    challenger: int | None = None
    defender: int | None = None
    action: object = None
    distribution: Distribution | None = None
    strong_transition: bool = False
    member: tuple | None = None
    sub: "Witness | None" = None

    def to_document(self, space: StateSpace) -> dict:
        def cfg(i):
            c = space.configs[i]
            return {"index": i, "term": to_text(c.term), "qv": sorted(c.qv),
                    "fingerprint": fingerprint(c.rho)}

        doc = {"kind": self.kind, "round": self.round, "pair": [cfg(i) for i in self.pair]}
        if self.kind == "move":
            doc["challenger"] = cfg(self.challenger)
            doc["defender"] = cfg(self.defender)
            doc["action"] = str(self.action)
            doc["strong_transition"] = self.strong_transition
            doc["distribution"] = [[round(p, 12), cfg(s)] for s, p in sorted(self.distribution.items())]
        if self.kind == "superop":
            doc["member"] = SuperOpFamily.member_text(self.member)
            doc["sub"] = self.sub.to_document(space)
        if self.kind == "ptr":
            a, b = (space.configs[i].ptr() for i in self.pair)
            doc["ptr_gap"] = float(np.max(np.abs(a.mat - b.mat)))
        return doc


@dataclass
class BisimResult:
    verdict: str
    mode: str
    family: str
    game: "Game"
    roots: tuple
    witness: Witness | None = None
    elapsed: float = 0.0

    def __bool__(self):
        return self.verdict == EQUIVALENT

    @property
    def equivalent(self) -> bool:
        return self.verdict == EQUIVALENT

    @property
    def modulo_family(self) -> bool:
        return self.mode != "ground" and self.family != "identity"

    def summary(self) -> str:
        if self.verdict == EQUIVALENT and self.modulo_family:
            return f"{EQUIVALENT} (modulo family {self.family})"
        return self.verdict

    @property
    def blocks(self) -> np.ndarray:
        return self.game.final

    def related(self, i: int, j: int) -> bool:
        return bool(self.game.final[i] == self.game.final[j])

    def relation_pairs(self) -> set:
        groups: dict = {}
        for s, b in enumerate(self.game.final):
            groups.setdefault(int(b), []).append(s)
        return {(a, b) for g in groups.values() for a in g for b in g}

    def to_document(self) -> dict:
        g = self.game
        doc = {
            "verdict": self.verdict,
            "summary": self.summary(),
            "mode": self.mode,
            "family": self.family,
            "states": len(g.space),
            "blocks": int(len(set(g.final.tolist()))),
            "rounds": len(g.history) - 1,
            "roots": list(self.roots),
        }
        if self.witness is not None:
            doc["witness"] = self.witness.to_document(g.space)
        return doc


# ═══════════════════════════════════════════════════════════════════════
# The refinement engine
# ═══════════════════════════════════════════════════════════════════════


class Game:
    def __init__(self, sem: Semantics, roots: list[Configuration], mode: str = "ground",
                 family: SuperOpFamily | None = None, max_states: int = 200_000,
                 closure_depth: int = 1, tol: float = qlin.TOL, check: bool = True):
        if mode not in ("ground", "open", "strong"):
            raise ValueError(f"unknown mode {mode!r}")
        self.sem = sem
        self.mode = mode
        self.match_mode = STRONG if mode == "strong" else WEAK
        if mode == "ground":
            family = identity_family()
        self.family = family if family is not None else default_family()
        self.closure_depth = closure_depth
        self.tol = tol
        for c in roots:
            if check:
                check_configuration(c, sem.defs)
            self.family.check_targets(c.qv)
        self.space = StateSpace(sem, max_states, tol)
        self.roots = tuple(self.space.intern(c, tag=0) for c in roots)
        self.space.explore(on_new=self._inherit_level)
        self.images: dict[int, dict] = {}
        self._inert_memo: dict = {}
        self._inert: dict[int, bool] = {}
        self.history: list[np.ndarray] = []
        self.final: np.ndarray | None = None
        self.lp_calls = 0

    # -- exploration ----------------------------------------------------

    def _inherit_level(self, i: int):
        lvl = self.space.tags[i]
        for _, d in self.space.trans[i]:
            for t in d:
                if self.space.tags[t] is None or self.space.tags[t] > lvl:
                    self.space.tags[t] = lvl

    def free(self, s: int) -> tuple:
        return self.space.sem.reg.complement(self.space.configs[s].qv)

    def inert(self, s: int) -> bool:
        got = self._inert.get(s)
        if got is None:
            got = is_inert(self.space.configs[s].term, self.sem.defs, self._inert_memo)
            self._inert[s] = got
        return got

    def wants_images(self, s: int) -> bool:
        if self.mode == "ground" or not self.family.generators:
            return False
        lvl = self.space.tags[s]
        return lvl is not None and lvl < self.closure_depth and bool(self.free(s))

    def add_images(self, states) -> bool:
        added = False
        for s in states:
            if s in self.images:
                continue
            c = self.space.configs[s]
            lvl = self.space.tags[s]
            imgs = {}
            for m in self.family.members(self.free(s)):
                rho = self.family.apply(m, c.rho)
                before = len(self.space)
                j = self.space.intern(Configuration(c.term, rho), tag=lvl + 1)
                if self.space.tags[j] is None or self.space.tags[j] > lvl + 1:
                    self.space.tags[j] = lvl + 1
                imgs[m] = j
                added = added or len(self.space) > before
            self.images[s] = imgs
        self.space.explore(on_new=self._inherit_level)
        return added

    # -- refinement -----------------------------------------------------

    def solve(self):
        self.add_images([s for s in range(len(self.space)) if self.wants_images(s) and not self.inert(s)])
        while True:
            self._refine()
            # blocks mixing inert and non-inert image-worthy states need images everywhere
            missing = []
            groups: dict = {}
            for s, b in enumerate(self.final):
                groups.setdefault(int(b), []).append(s)
            for members in groups.values():
                if any(s in self.images for s in members):
                    missing.extend(s for s in members if s not in self.images and self.wants_images(s))
            if not missing:
                return
            self.add_images(missing)

    def _refine(self):
        n = len(self.space)
        self.plts = self.space.plts()
        self.oracle = WeakOracle(self.plts, self.match_mode)
        self._weak_labels = self._compute_weak_labels()
        part = self._initial_partition()
        self.history = [part]
        while True:
            nxt = self._round(part)
            if len(set(nxt.tolist())) == len(set(part.tolist())):
                break
            self.history.append(nxt)
            part = nxt
        self.final = part

    def _initial_partition(self) -> np.ndarray:
        n = len(self.space)
        key_of = {}
        reps: dict = {}
        out = np.empty(n, dtype=np.int64)
        nxt = 0
        for s in range(n):
            c = self.space.configs[s]
            qv = tuple(sorted(c.qv))
            pt = c.ptr().mat
            found = None
            for b, m in reps.get(qv, ()):
                if np.max(np.abs(m - pt), initial=0.0) <= self.tol:
                    found = b
                    break
            if found is None:
                found = nxt
                nxt += 1
                reps.setdefault(qv, []).append((found, pt))
            out[s] = found
        return out

    def _compute_weak_labels(self) -> list:
        n = self.plts.n
        own = [frozenset(a for a, _ in (self.plts.trans[s]) if not a.is_tau) for s in range(n)]
        tau_succ = [set() for _ in range(n)]
        for s in range(n):
            for d in self.plts.successors(s, TAU):
                tau_succ[s].update(d)
        labels = list(own)
        changed = True
        while changed:
            changed = False
            for s in range(n - 1, -1, -1):
                acc = labels[s]
                for t in tau_succ[s]:
                    if not labels[t] <= acc:
                        acc = acc | labels[t]
                if acc is not labels[s] and acc != labels[s]:
                    labels[s] = acc
                    changed = True
        return labels

    @staticmethod
    def masses(d: Distribution, part) -> tuple:
        acc: dict = {}
        for t, p in d.items():
            b = int(part[t])
            acc[b] = acc.get(b, 0.0) + p
        return tuple(sorted((b, round(p, MASS_DIGITS)) for b, p in acc.items()))

    def challenges(self, members, part) -> list:
        seen = {}
        for t in members:
            for a, d in self.plts.trans[t]:
                key = (a, self.masses(d, part))
                if key not in seen:
                    seen[key] = (t, d)
        return sorted(seen, key=lambda k: (k[0].sort_key(), k[1]))

    def matches(self, s: int, ch, part, cache: dict | None = None):
        """Can ``s`` answer challenge ``ch``?  Returns the answering distribution or None."""
        if cache is not None and (s, ch) in cache:
            return cache[(s, ch)]
        res = self._matches(s, ch, part)
        if cache is not None:
            cache[(s, ch)] = res
        return res

    def _matches(self, s: int, ch, part):
        label, masses = ch
        if not label.is_tau and label not in self._weak_labels[s]:
            return None
        succ = self.plts.successors(s, label)
        for d in succ:
            if self.masses(d, part) == masses:
                return d
        if self.match_mode == WEAK and label.is_tau and masses == ((int(part[s]), 1.0),):
            return point(s)
        if self.match_mode == STRONG and len(succ) < 2:
            return None
        self.lp_calls += 1
        target = dict(masses)
        res = self.oracle.match_blocks(point(s), label, target, lambda t: int(part[t]))
        return res.theta if res.ok else None

    def image_signature(self, s: int, part) -> tuple:
        imgs = self.images.get(s)
        if not imgs:
            return ()
        return tuple(int(part[j]) for j in imgs.values())

    def _round(self, part) -> np.ndarray:
        n = len(part)
        groups: dict = {}
        for s in range(n):
            groups.setdefault(int(part[s]), []).append(s)
        sig_of = np.empty(n, dtype=object)
        cache: dict = {}
        for b, members in groups.items():
            if len(members) == 1:
                sig_of[members[0]] = (b,)
                continue
            chs = self.challenges(members, part)
            for s in members:
                sig = tuple(self.matches(s, ch, part, cache) is not None for ch in chs)
                sig_of[s] = (b, sig, self.image_signature(s, part))
        ids: dict = {}
        out = np.empty(n, dtype=np.int64)
        for s in range(n):
            k = sig_of[s]
            if k not in ids:
                ids[k] = len(ids)
            out[s] = ids[k]
        return out

    # -- explanations ---------------------------------------------------

    def split_round(self, x: int, y: int) -> int | None:
        for k, part in enumerate(self.history):
            if part[x] != part[y]:
                return k
        return None

    def explain(self, x: int, y: int) -> Witness | None:
        k = self.split_round(x, y)
        if k is None:
            return None
        cx, cy = self.space.configs[x], self.space.configs[y]
        if k == 0:
            return Witness("qv" if cx.qv != cy.qv else "ptr", (x, y), 0)
        prev = self.history[k - 1]
        ix, iy = self.images.get(x, {}), self.images.get(y, {})
        for m in ix:
            if m in iy and prev[ix[m]] != prev[iy[m]]:
                return Witness("superop", (x, y), k, member=m, sub=self.explain(ix[m], iy[m]))
        members = [s for s in range(len(prev)) if prev[s] == prev[x]]
        chs = self.challenges(members, prev)
        # challenges from the pair's own transitions first, so witnesses use real transitions
        own = {(a, self.masses(d, prev)) for s in (x, y) for a, d in self.plts.trans[s]}
        chs = sorted(chs, key=lambda ch: ch not in own)
        for ch in chs:
            mx, my = self.matches(x, ch, prev), self.matches(y, ch, prev)
            if (mx is None) != (my is None):
                chal, dfd, theta = (x, y, mx) if mx is not None else (y, x, my)
                strong = any(d is theta for d in self.plts.successors(chal, ch[0]))
                return Witness("move", (x, y), k, chal, dfd, ch[0], theta, strong)
        raise RuntimeError("split without a recorded reason")

    def closure_states(self, s: int, label) -> list[int]:
        """States where mass may stop in some ``s ==label==>`` derivative."""
        g = self.oracle.graph(point(s), label)
        return sorted({nd[1] for nd in g.finals})


# ═══════════════════════════════════════════════════════════════════════
# Replay and certification
# ═══════════════════════════════════════════════════════════════════════


def replay_witness(result: BisimResult, w: Witness | None = None) -> bool:
    """Re-run the failing query of a witness against the final relation.

    True when the position still fails: the challenger's move exists and the
    defender has no answer lifting the final partition.
    """
    g = result.game
    w = w or result.witness
    if w is None:
        return False
    cx, cy = (g.space.configs[i] for i in w.pair)
    if w.kind == "qv":
        return cx.qv != cy.qv
    if w.kind == "ptr":
        return cx.qv == cy.qv and not cx.ptr().close_to(cy.ptr(), g.tol)
    if w.kind == "superop":
        x, y = w.pair
        return (g.images[x][w.member] in w.sub.pair and g.images[y][w.member] in w.sub.pair
                and replay_witness(result, w.sub))
    # challenger's move must exist
    if w.strong_transition:
        exists = any(d.close_to(w.distribution) for d in g.plts.successors(w.challenger, w.action))
    else:
        exists = g.oracle.match(point(w.challenger), w.action, w.distribution,
                                lambda s, t: s == t).ok
    if not exists:
        return False
    final = g.final
    masses = dict(Game.masses(w.distribution, final))
    ans = g.oracle.match_blocks(point(w.defender), w.action, masses, lambda t: int(final[t]))
    return not ans.ok


def certify(result: BisimResult, limit: int | None = None) -> list[str]:
    """Independently re-check that the final partition is a bisimulation.

    For every state, every own transition must be answered by every other
    member of its block (lifting through ``lift_check`` on the answering
    derivative), and images must stay related.  Returns the violations.
    """
    g = result.game
    final = g.final
    rel = lambda a, b: final[a] == final[b]
    groups: dict = {}
    for s, b in enumerate(final):
        groups.setdefault(int(b), []).append(s)
    bad = []
    checked = 0
    for members in groups.values():
        ref = g.space.configs[members[0]]
        for s in members:
            c = g.space.configs[s]
            if c.qv != ref.qv or not c.ptr().close_to(ref.ptr(), 1e-9):
                bad.append(f"static mismatch in block of {members[0]} at {s}")
        for s in members:
            for a, d in g.plts.trans[s]:
                for t in members:
                    if t == s:
                        continue
                    masses = dict(Game.masses(d, final))
                    res = g.oracle.match_blocks(point(t), a, masses, lambda u: int(final[u]))
                    checked += 1
                    if not res.ok or not lift_check(rel, d, res.theta).ok:
                        bad.append(f"{t} cannot answer {s} --{a}-->")
                    if limit is not None and checked >= limit:
                        return bad
        for s in members:
            for m, j in g.images.get(s, {}).items():
                for t in members:
                    jt = g.images.get(t, {}).get(m)
                    if jt is not None and final[jt] != final[j]:
                        bad.append(f"images of {s} and {t} under {m} split")
    return bad


# ═══════════════════════════════════════════════════════════════════════
# Entry points
# ═══════════════════════════════════════════════════════════════════════


def _run(c: Configuration, d: Configuration, sem: Semantics, mode: str, fam, **kw) -> BisimResult:
    t0 = time.perf_counter()
    g = Game(sem, [c, d], mode, fam, **kw)
    g.solve()
    x, y = g.roots
    if g.final[x] == g.final[y]:
        res = BisimResult(EQUIVALENT, mode, g.family.name, g, (x, y))
    else:
        res = BisimResult(DISTINGUISHED, mode, g.family.name, g, (x, y), g.explain(x, y))
    res.elapsed = time.perf_counter() - t0
    return res


def ground_bisim(c: Configuration, d: Configuration, sem: Semantics, **kw) -> BisimResult:
    return _run(c, d, sem, "ground", None, **kw)


def open_bisim(c: Configuration, d: Configuration, sem: Semantics,
               fam: SuperOpFamily | None = None, **kw) -> BisimResult:
    return _run(c, d, sem, "open", fam, **kw)


def strong_open_bisim(c: Configuration, d: Configuration, sem: Semantics,
                      fam: SuperOpFamily | None = None, **kw) -> BisimResult:
    return _run(c, d, sem, "strong", fam, **kw)


def bisim(c, d, sem, mode: str = "open", fam=None, **kw) -> BisimResult:
    return _run(c, d, sem, mode, fam, **kw)


@dataclass
class ProcessVerdict:
    verdict: str
    results: list = field(default_factory=list)  # (state index, values, BisimResult)

    def __bool__(self):
        return self.verdict == EQUIVALENT


def process_bisim(p: Proc, q: Proc, sem: Semantics, states: list, vals: list | None = None,
                  params: tuple = (), fam: SuperOpFamily | None = None, mode: str = "open",
                  stop_early: bool = True, **kw) -> ProcessVerdict:
    """Check ``p`` and ``q`` over a grid of states and classical parameter values.

    Only a ``distinguished`` verdict is conclusive: the universal
    quantification over states and values is sampled.
    """
    vals = vals or [()]
    out = ProcessVerdict(EQUIVALENT)
    for vi, v in enumerate(vals):
        if len(v) != len(params):
            raise ValueError(f"value tuple {v} does not match parameters {params}")
        env = dict(zip(params, v))
        pp, qq = substitute(p, env), substitute(q, env)
        for si, rho in enumerate(states):
            r = _run(Configuration(pp, rho), Configuration(qq, rho), sem, mode, fam, **kw)
            out.results.append((si, v, r))
            if not r:
                out.verdict = DISTINGUISHED
                if stop_early:
                    return out
    return out


# ═══════════════════════════════════════════════════════════════════════
# Congruence harness
# ═══════════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class Context:
    """A one-hole context.  ``kind`` is par, relabel, restrict, if or prefix."""

    kind: str
    arg: object
    label: str = ""

    @property
    def dynamic(self) -> bool:
        return self.kind in ("prefix", "sum")

    def fill(self, t: Proc) -> Proc:
        if self.kind == "par":
            return Par(t, self.arg)
        if self.kind == "relabel":
            return Relabel(t, self.arg)
        if self.kind == "restrict":
            return Restrict(t, self.arg)
        if self.kind == "if":
            return If(self.arg, t)
        if self.kind == "sum":
            return Sum(t, self.arg)
        if self.kind == "prefix":
            return self.arg(t)
        raise ValueError(f"unknown context kind {self.kind}")

    def __str__(self):
        return self.label or self.kind


@dataclass
class HarnessEntry:
    context: Context
    result: BisimResult | None
    preserved: bool
    note: str = ""


def congruence_harness(c: Configuration, d: Configuration, sem: Semantics, contexts: list[Context],
                       mode: str = "open", fam: SuperOpFamily | None = None, **kw) -> list[HarnessEntry]:
    """Wrap both sides in each context and re-check equivalence.

    A static context that breaks the verdict would indicate a bug.  Dynamic
    contexts (prefix, sum) are reported with an explanatory note instead.
    """
    out = []
    for ctx in contexts:
        tc, td = ctx.fill(c.term), ctx.fill(d.term)
        if ctx.kind == "par" and (ctx.arg.qv & (c.qv | d.qv)):
            raise ValueError(f"context {ctx} shares qubits with the configurations")
        r = _run(Configuration(tc, c.rho), Configuration(td, d.rho), sem, mode, fam, **kw)
        note = ""
        if not r and ctx.dynamic:
            note = "dynamic context: expected possible breakage"
        elif not r:
            note = "static context broke equivalence"
        out.append(HarnessEntry(ctx, r, bool(r), note))
    return out
