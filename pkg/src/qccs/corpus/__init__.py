"""Executable example corpus: the measurement counterexample and BB84.

BB84 sources are produced from one template for any key length ``n`` and
written to ``files/`` by ``scripts/gen_corpus.py``; ``instantiate`` builds
configurations straight from the template so the files are never the only
copy.  ``manifest.json`` lists every regression run with its expected
outcome.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .. import qlin
from ..semantics import Configuration, Semantics, initial_state
from ..syntax import check_legal, parse_process, parse_source
from ..syntax.ast import Defs

MAX_N = 3

COUNTEREXAMPLE_SOURCE = """\
// A measurement and the identity agree on |0>, whatever the environment holds.
qubits q e;
meas M01 = projectors(0: proj("0"), 1: proj("1"));
superop I = unitary(I);
superop Hd = unitary(H);
chan c : {0};
init = "0+";
"""

PSI = "<suc!0>(1*true) & !<tau>( p*<fail!0>(1*true) (+) (1-p)*true )"


def _names(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(1, n + 1)]


def bb84_source(n: int) -> str:
    """BB84, its specification and the test harness for key length ``n``."""
    if not 1 <= n <= MAX_N:
        raise ValueError(f"key length {n} outside 1..{MAX_N}")
    qs, rs = _names("q", n), _names("r", n)
    Q, R = ", ".join(qs), ", ".join(rs)
    S = ", ".join(_names("s", n))
    ident = "I" if n == 1 else "tensor(" + ", ".join(["I"] * n) + ")"
    ran = lambda reg, x: f"SetP[{reg}].Mz[{reg}; {x}].Set0[{reg}]."
    send = "".join(f"A2B!{q}." for q in qs)
    recv = "".join(f"A2B?{s}." for s in _names("s", n))
    outputs = "(key_a!cmp(kb, ba, bb).nil || key_b!cmp(kb, ba, bb).nil)"
    return f"""\
// BB84 key distribution with key length {n}.
// Ran[x; k] = SetP[x].Mz[x; k].Set0[x] draws k uniformly whatever x holds.
qubits {" ".join(qs + rs)};
qchan A2B;
chan a2b, b2a : bits {n};
chan key_a, key_b : bits 0..{n};
chan suc, fail : {{0}};
superop SetP = set("{'+' * n}");
superop Set0 = set("{'0' * n}");
superop Id = unitary({ident});
meas Mz = basis("{'0' * n}");
family Set = set;
family Had = hadamard;
family Mb = basis;

def Alice({Q}) = {ran(Q, "ba")}{ran(Q, "ka")}Set{{ka}}[{Q}].Had{{ba}}[{Q}].{send}WaitA(; ba, ka);
def WaitA(; ba, ka) = b2a?bb.a2b!ba.key_a!cmp(ka, ba, bb).nil;

// Bob resets the measured qubits so the final state does not depend on his outcome.
def Bob({R}) = {recv}{ran(R, "bb")}Mb{{bb}}[{S}; kb].Set0[{S}].b2a!bb.WaitB(; bb, kb);
def WaitB(; bb, kb) = a2b?ba.key_b!cmp(kb, ba, bb).nil;
def BB84({Q}, {R}) = (Alice({Q}) || Bob({R})) \\ {{a2b, b2a, A2B}};

// Id keeps the q-qubits owned until the r-qubits are released, as in BB84.
def BB84_spc({Q}, {R}) = {ran(Q, "ba")}{ran(Q, "kb")}{ran(R, "bb")}Id[{Q}].{outputs};

// Literal variants: Bob keeps his measured qubits and BB84_spc_lit releases q first.
def Bob_lit({R}) = {recv}{ran(R, "bb")}Mb{{bb}}[{S}; kb].b2a!bb.WaitB(; bb, kb);
def BB84_lit({Q}, {R}) = (Alice({Q}) || Bob_lit({R})) \\ {{a2b, b2a, A2B}};
def BB84_spc_lit({Q}, {R}) = {ran(Q, "ba")}{ran(Q, "kb")}{ran(R, "bb")}{outputs};

def Tester = key_a?x.key_b?y.(if x = y then suc!0.nil else fail!0.nil);
def TestBB84({Q}, {R}) = (BB84({Q}, {R}) || Tester) \\ {{key_a, key_b}};
init = "{'0' * (2 * n)}";
"""


def eavesdropper_source() -> str:
    """Key length 1 with an intercept-resend eavesdropper on the quantum channel."""
    base = bb84_source(1)
    extra = """
qchan A2E, E2B;
def Eve(e1) = A2E?t.SetP[e1].Mz[e1; be].Set0[e1].Mb{be}[t; ke].Set{ke}[t].Had{be}[t].E2B!t.nil;
def BB84E(q1, r1, e1) = (Alice(q1)[A2B->A2E] || Eve(e1) || Bob(r1)[A2B->E2B]) \\ {a2b, b2a, A2E, E2B};
def TestBB84E(q1, r1, e1) = (BB84E(q1, r1, e1) || Tester) \\ {key_a, key_b};
"""
    base = base.replace("qubits q1 r1;", "qubits q1 r1 e1;").replace('init = "00";', 'init = "000";')
    return base + extra


SOURCES = {
    "counterexample": lambda n=None: COUNTEREXAMPLE_SOURCE,
    "bb84": lambda n=1: bb84_source(n),
    "eavesdropper": lambda n=None: eavesdropper_source(),
}


def source_file_name(kind: str, n: int | None = None) -> str:
    if kind == "bb84":
        return f"bb84_n{n}.qccs"
    return f"{kind}.qccs"


def generated_files() -> dict[str, str]:
    """File name to contents for everything under ``files/``."""
    out = {source_file_name("counterexample"): COUNTEREXAMPLE_SOURCE,
           source_file_name("eavesdropper"): eavesdropper_source()}
    for n in (1, 2):
        out[source_file_name("bb84", n)] = bb84_source(n)
    return out


def files_dir() -> Path:
    return Path(str(resources.files(__package__) / "files"))


def write_files(target: Path | None = None) -> list[Path]:
    target = Path(target) if target is not None else files_dir()
    target.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in generated_files().items():
        p = target / name
        p.write_text(text, encoding="utf-8")
        paths.append(p)
    return paths


# ═══════════════════════════════════════════════════════════════════════
# Instances
# ═══════════════════════════════════════════════════════════════════════


@dataclass
class Instance:
    name: str
    defs: Defs
    sem: Semantics
    rho: qlin.DensityOp

    def term(self, text: str):
        t = parse_process(text, self.defs)
        rep = check_legal(t, self.defs)
        if not rep.ok:
            raise ValueError(f"{text}: {rep}")
        return t

    def config(self, text: str, rho: qlin.DensityOp | None = None) -> Configuration:
        return Configuration(self.term(text), rho if rho is not None else self.rho)

    def state(self, spec) -> qlin.DensityOp:
        return state_from_document(self.sem.reg, spec)


def load(kind: str, n: int | None = None) -> Instance:
    if kind not in SOURCES:
        raise KeyError(f"unknown corpus source {kind!r}")
    defs = parse_source(SOURCES[kind](n) if n is not None else SOURCES[kind]())
    sem = Semantics(defs)
    return Instance(kind if n is None else f"{kind}_n{n}", defs, sem, initial_state(sem.reg, defs.init))


def bb84_args(n: int) -> str:
    return ", ".join(_names("q", n) + _names("r", n))


def instantiate(name: str, n: int = 1) -> tuple:
    """``(term, defs, rho)`` for BB84, BB84_spc, their literal variants or TestBB84."""
    inst = load("bb84", n)
    if name not in ("BB84", "BB84_spc", "BB84_lit", "BB84_spc_lit", "TestBB84"):
        raise KeyError(f"unknown BB84 process {name!r}")
    return inst.term(f"{name}({bb84_args(n)})"), inst.defs, inst.rho


def counterexample_pairs(sigma: str | np.ndarray = "+") -> tuple[Instance, list]:
    """The unprefixed and Hadamard-prefixed pairs over ``|0><0| (x) sigma``.

    ``sigma`` is a ket string or a 2x2 density matrix for the environment qubit.
    """
    inst = load("counterexample")
    if isinstance(sigma, str):
        rho = qlin.DensityOp.from_ket(inst.sem.reg, "0" + sigma)
    else:
        mat = np.kron(qlin.ket_projector("0"), np.asarray(sigma, dtype=complex))
        rho = qlin.DensityOp(inst.sem.reg, mat)
    pairs = [
        (inst.config("M01[q; x].nil", rho), inst.config("I[q].nil", rho)),
        (inst.config("Hd[q].M01[q; x].nil", rho), inst.config("Hd[q].I[q].nil", rho)),
    ]
    return inst, pairs


# ═══════════════════════════════════════════════════════════════════════
# State documents and the manifest
# ═══════════════════════════════════════════════════════════════════════


def state_from_document(reg: qlin.QReg, doc) -> qlin.DensityOp:
    """``{"ket": "0+"}``, ``{"matrix": [[...]]}`` with complex entries as ``[re, im]``,
    a bare ket string, or ``None`` for all qubits in ``|0>``."""
    if doc is None:
        return initial_state(reg)
    if isinstance(doc, str):
        return qlin.DensityOp.from_ket(reg, doc)
    if "ket" in doc:
        return qlin.DensityOp.from_ket(reg, doc["ket"])
    if "matrix" in doc:
        m = np.array([[complex(*x) if isinstance(x, list) else complex(x) for x in row]
                      for row in doc["matrix"]])
        return qlin.DensityOp(reg, m)
    raise ValueError("state document needs 'ket' or 'matrix'")


def manifest() -> list[dict]:
    text = (resources.files(__package__) / "manifest.json").read_text(encoding="utf-8")
    return json.loads(text)["runs"]


def instance_for(run: dict) -> Instance:
    return load(run["source"], run.get("n"))
