"""Fault-tolerant gadgets for the four-qubit amplitude-damping code.

Gadgets are built as graphs of locations with classically controlled
sub-blocks. A statevector engine propagates encoded inputs through a gadget
with damping faults inserted at chosen locations, branching on every
measurement. On top of that sit the single-fault property checks and the
malignant-pair ledgers used for the pseudothreshold estimates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channel_core import ket

KINDS = ("prep0", "prepPlus", "cnot", "cz", "x", "z", "h", "rest", "measZ", "measX")
TWO_QUBIT = ("cnot", "cz")
MEASUREMENTS = ("measZ", "measX")
FIDELITY_TOL = 1e-9
PRUNE_TOL = 1e-24

S2 = 1 / math.sqrt(2)
E1 = np.array([[0, 1], [0, 0]], dtype=complex)
ZMAT = np.diag([1.0 + 0j, -1.0])
XMAT = np.array([[0, 1], [1, 0]], dtype=complex)
HMAT = S2 * np.array([[1, 1], [1, -1]], dtype=complex)
CNOT4 = np.eye(4, dtype=complex)[[0, 1, 3, 2]].reshape(2, 2, 2, 2)
CZ4 = np.diag([1, 1, 1, -1]).astype(complex).reshape(2, 2, 2, 2)
ZERO = np.array([1, 0], dtype=complex)
PLUS = S2 * np.array([1, 1], dtype=complex)
MINUS = S2 * np.array([1, -1], dtype=complex)

# Leung code logical states on (d0, d1, d2, d3)
LOGICAL = {
    "0": S2 * (ket("0000") + ket("1111")),
    "1": S2 * (ket("0011") + ket("1100")),
}
LOGICAL["+"] = S2 * (LOGICAL["0"] + LOGICAL["1"])
LOGICAL["-"] = S2 * (LOGICAL["0"] - LOGICAL["1"])
LOGICAL_INPUTS = ("0", "1", "+", "-")
AMPLITUDES = {"0": (1, 0), "1": (0, 1), "+": (S2, S2), "-": (S2, -S2)}


# ---- graph ----

@dataclass
class Loc:
    """A physical location. Faults act after it, or before it for measurements."""

    id: int
    kind: str
    wires: tuple
    bit: str | None = None
    part: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown location kind {self.kind}")
        need = 2 if self.kind in TWO_QUBIT else 1
        if len(self.wires) != need:
            raise ValueError(f"{self.kind} acts on {need} wire(s)")
        if (self.kind in MEASUREMENTS) != (self.bit is not None):
            raise ValueError("measurements, and only measurements, produce a bit")


@dataclass
class Init:
    """Noiseless preparation of a fresh wire in |0> or |+>, or a wire pair in a Bell state."""

    wire: str | tuple
    state: str = "0"


@dataclass
class Cond:
    """Sub-block run only on branches whose bits satisfy the predicate.

    Only representative blocks enter location censuses; the others are
    symmetric copies acting on a different pair of qubits.
    """

    predicate: str
    body: list
    representative: bool = True


@dataclass
class Classical:
    """Derived classical bit computed from earlier bits."""

    bit: str
    fn: Callable
    description: str = ""


@dataclass
class Halt:
    reason: str = "uncorrectable syndrome"


@dataclass
class Marker:
    """Point where input errors are injected; wires are the ones it may touch."""

    name: str
    wires: tuple


@dataclass
class GadgetGraph:
    name: str
    nodes: list
    blocks: dict          # block name -> tuple of 4 data wires
    input_blocks: tuple   # blocks carrying an encoded input
    output_blocks: tuple  # blocks carrying an encoded output
    outcome_bit: str | None = None
    meta: dict = field(default_factory=dict)

    def locations(self, representative_only: bool = False) -> list:
        out = []

        def walk(nodes, rep):
            for nd in nodes:
                if isinstance(nd, Loc):
                    if rep or not representative_only:
                        out.append(nd)
                elif isinstance(nd, Cond):
                    walk(nd.body, rep and nd.representative)

        walk(self.nodes, True)
        return out

    def census(self, part: str | None = None) -> dict:
        """Location counts by kind over the representative branch."""
        counts = {}
        for loc in self.locations(representative_only=True):
            if part is not None and not loc.part.endswith(part):
                continue
            counts[loc.kind] = counts.get(loc.kind, 0) + 1
        counts["total"] = sum(counts.values())
        return counts

    def location(self, loc_id: int) -> Loc:
        for loc in self.locations():
            if loc.id == loc_id:
                return loc
        raise KeyError(f"no location {loc_id} in {self.name}")

    def markers(self) -> list:
        return [nd for nd in _walk_all(self.nodes) if isinstance(nd, Marker)]


def _walk_all(nodes):
    for nd in nodes:
        yield nd
        if isinstance(nd, Cond):
            yield from _walk_all(nd.body)


class _Builder:
    def __init__(self):
        self.counter = itertools.count()
        self.stack = [[]]

    @property
    def body(self):
        return self.stack[-1]

    def loc(self, kind, *wires, bit=None, part=""):
        self.body.append(Loc(next(self.counter), kind, tuple(wires), bit, part))

    def rest(self, *wires, part=""):
        for w in wires:
            self.loc("rest", w, part=part)

    def init(self, wire, state="0"):
        self.body.append(Init(wire, state))

    def classical(self, bit, fn, description=""):
        self.body.append(Classical(bit, fn, description))

    def cond(self, predicate, representative=True):
        builder = self

        class _Ctx:
            def __enter__(self_inner):
                builder.stack.append([])

            def __exit__(self_inner, *exc):
                body = builder.stack.pop()
                builder.body.append(Cond(predicate, body, representative))

        return _Ctx()


# ---- gadget construction ----

def _data(block: str) -> tuple:
    return tuple(f"{block}{k}" for k in range(4))


def _bit(tag, name):
    return f"{tag}.{name}"


def _rz_unit(b: _Builder, d: tuple, tag: str, z_choice: str, part: str, representative=True):
    """Measure XXXX with a |+> ancilla; on c=1 apply Z on the wire named by z_choice."""
    anc, c = f"{tag}.rz", _bit(tag, "c")
    b.loc("prepPlus", anc, part=part)
    for w in d:
        b.loc("cnot", anc, w, part=part)
    b.loc("measX", anc, bit=c, part=part)
    b.rest(*d, part=part)
    for k, w in enumerate(d):
        rep = representative and k == 0
        with b.cond(f"{c} == 1 and {z_choice} == {k}", representative=rep):
            b.loc("z", w, part=part)
            b.rest(*(v for v in d if v != w), part=part)


def _part2(b: _Builder, d: tuple, tag: str, pair: tuple, bits: tuple, part: str, rep: bool):
    """Second syndrome round on one data pair, X recovery, then the Z recovery."""
    i, j = pair
    others = tuple(w for k, w in enumerate(d) if k not in pair)
    a3, a4 = f"{tag}.a3", f"{tag}.a4"
    u, h = (_bit(tag, x) for x in bits)
    b.init(a3)
    b.init(a4)
    b.loc("cnot", d[i], a3, part=part)
    b.loc("cnot", d[j], a4, part=part)
    b.rest(*others, part=part)
    b.loc("measZ", a3, bit=u, part=part)
    b.loc("measZ", a4, bit=h, part=part)
    b.rest(*d, part=part)
    with b.cond(f"{u} == 0 and {h} == 1", representative=rep):
        b.loc("x", d[i], part=part)
        b.rest(*(w for w in d if w != d[i]), part=part)
    with b.cond(f"{u} == 1 and {h} == 0", representative=False):
        b.loc("x", d[j], part=part)
        b.rest(*(w for w in d if w != d[j]), part=part)


def ec_unit(b: _Builder, block: str, tag: str, representative=True) -> None:
    """Append an error-correction unit on block (bits prefixed by tag)."""
    d = _data(block)
    s, t = _bit(tag, "s"), _bit(tag, "t")
    a1, a2 = f"{tag}.a1", f"{tag}.a2"
    p1, p2 = f"{tag}.part1", f"{tag}.part2"
    b.init(a1)
    b.init(a2)
    b.loc("cnot", d[0], a1, part=p1)
    b.loc("cnot", d[2], a2, part=p1)
    b.rest(d[1], d[3], part=p1)
    b.loc("cnot", d[1], a1, part=p1)
    b.loc("cnot", d[3], a2, part=p1)
    b.rest(d[0], d[2], part=p1)
    b.loc("measZ", a1, bit=s, part=p1)
    b.loc("measZ", a2, bit=t, part=p1)
    b.rest(*d, part=p1)
    with b.cond(f"{s} == 1 and {t} == 1", representative=False):
        b.body.append(Halt("double damping"))
    zc = _bit(tag, "zq")
    b.classical(zc, lambda bits, s=s: 0 if bits.get(s) == 1 else 2, "pair index for Z recovery")
    with b.cond(f"{s} == 1 and {t} == 0", representative=representative):
        _part2(b, d, tag, (0, 1), ("u", "h"), p2, representative)
        _rz_unit(b, d, tag, zc, p2, representative)
    with b.cond(f"{s} == 0 and {t} == 1", representative=False):
        _part2(b, d, tag, (2, 3), ("v", "g"), p2, False)
        _rz_unit(b, d, tag, zc, p2, False)


def _ec_triggered(tag):
    return f"({tag}.s == 1 or {tag}.t == 1)"


def _diagnosed(bits, tag) -> int | None:
    """Data qubit diagnosed as damped by an EC unit, or None."""
    s, t = bits.get(f"{tag}.s"), bits.get(f"{tag}.t")
    if s == 1 and t == 0:
        u, h = bits.get(f"{tag}.u"), bits.get(f"{tag}.h")
        return {(0, 1): 0, (1, 0): 1}.get((u, h))
    if s == 0 and t == 1:
        v, g = bits.get(f"{tag}.v"), bits.get(f"{tag}.g")
        return {(0, 1): 2, (1, 0): 3}.get((v, g))
    return None


# Transversal CZ pairing a_k -- b_PI[k]; realizes logical CZ on the code.
CZ_PAIRING = (0, 2, 1, 3)


def _cz_core(b: _Builder):
    a, bb = _data("a"), _data("b")
    for k in range(4):
        b.loc("cz", a[k], bb[CZ_PAIRING[k]], part="cz")
    ec_unit(b, "a", "eca")
    ec_unit(b, "b", "ecb")
    # Cross phase recovery: a damping before the CZ leaves Z on the partner block.
    for src, dst, dst_block, pairing in (("eca", "ecb", bb, CZ_PAIRING), ("ecb", "eca", a, CZ_PAIRING)):
        zq = f"x{dst}.zq"
        b.classical(zq, lambda bits, src=src, pairing=pairing: _cross_target(bits, src, pairing),
                    f"partner qubit of the damping diagnosed by {src}")
        pred = f"{_ec_triggered(src)} and not {_ec_triggered(dst)}"
        with b.cond(pred, representative=False):
            _rz_unit(b, dst_block, f"x{dst}", zq, f"x{dst}.rz", representative=False)


def _cross_target(bits, src, pairing):
    k = _diagnosed(bits, src)
    if k is None:
        k = 0 if bits.get(f"{src}.s") == 1 else 2
    return pairing[k]


def _bell_measure(b: _Builder, q, r, tag, part):
    """Bell-basis measurement: x bit from q, z bit from r."""
    b.loc("cnot", q, r, part=part)
    b.loc("h", q, part=part)
    b.loc("measZ", q, bit=f"{tag}.x", part=part)
    b.loc("measZ", r, bit=f"{tag}.z", part=part)


def decode_xbar(bits) -> int | None:
    """Logical X outcome (0 for +, 1 for -) from three Bell measurements."""
    pairs = {}
    for tag in ("anc", "d01", "d23"):
        pairs[tag] = None if bits[f"{tag}.z"] == 1 else bits[f"{tag}.x"]
    p, q = pairs["d01"], pairs["d23"]
    if p is not None and q is not None:
        if p == q:
            return p
        return pairs["anc"]
    if p is not None:
        return p
    if q is not None:
        return q
    return None


def decode_zbar(bits) -> int | None:
    """Logical Z outcome from four Z measurements; None when undecidable."""
    m = tuple(bits[f"m{k}"] for k in range(4))
    if m in ((0, 0, 0, 0), (1, 1, 1, 1)):
        return 0
    if m in ((0, 0, 1, 1), (1, 1, 0, 0)):
        return 1
    ones = sum(m)
    if ones % 2 == 1:
        return 0 if ones > 2 else 1
    return None


def _logical_x(b: _Builder):
    d = _data("d")
    c0, c1 = "lx.c0", "lx.c1"
    for w in (c0, c1, "lx.p0", "lx.p1"):
        b.init(w)
    b.loc("cnot", d[2], c0, part="copy")
    b.loc("cnot", d[3], c1, part="copy")
    b.loc("cnot", d[2], "lx.p0", part="parity")
    b.loc("cnot", d[3], "lx.p0", part="parity")
    b.loc("cnot", c0, "lx.p1", part="parity")
    b.loc("cnot", c1, "lx.p1", part="parity")
    b.loc("measZ", "lx.p0", bit="lx.s", part="parity")
    b.loc("measZ", "lx.p1", bit="lx.t", part="parity")
    with b.cond("lx.s == 0 and lx.t == 0"):
        for w in (d[2], d[3], c0, c1):
            b.loc("x", w, part="ecprime")
        b.loc("cnot", d[2], c0, part="ecprime")
        b.loc("cnot", d[3], c1, part="ecprime")
        b.loc("measZ", c0, bit="lx.x", part="ecprime")
        b.loc("measZ", c1, bit="lx.y", part="ecprime")
        with b.cond("lx.x == 1 or lx.y == 1", representative=False):
            ec_unit(b, "d", "lxec", representative=False)
            b.classical("lx.redo", lambda bits: int(
                (bits["lx.x"] == 1 and _diagnosed(bits, "lxec") == 3)
                or (bits["lx.y"] == 1 and _diagnosed(bits, "lxec") == 2)), "inconsistent diagnosis")
            with b.cond("lx.redo == 1", representative=False):
                b.loc("x", d[2], part="ecprime")
                b.loc("x", d[3], part="ecprime")
            # A damped copy ancilla leaves a bare (I+Z) error that EC cannot see.
            b.classical("lxz.zq", lambda bits: 2, "Z recovery on d2")
            with b.cond(f"not {_ec_triggered('lxec')}", representative=False):
                _rz_unit(b, d, "lxz", "lxz.zq", "ecprime", representative=False)
    with b.cond("lx.s == 1 or lx.t == 1", representative=False):
        b.init("lx.p2")
        b.init("lx.p3")
        b.loc("cnot", d[2], "lx.p2", part="diag")
        b.loc("cnot", d[3], "lx.p3", part="diag")
        b.loc("measZ", "lx.p2", bit="lx.u", part="diag")
        b.loc("measZ", "lx.p3", bit="lx.h", part="diag")
        with b.cond("lx.u == 1", representative=False):
            b.loc("x", d[2], part="diag")
        with b.cond("lx.h == 1", representative=False):
            b.loc("x", d[3], part="diag")
        b.loc("measZ", c0, bit="lx.k0", part="diag")
        b.loc("measZ", c1, bit="lx.k1", part="diag")
        b.classical("lx.zq", lambda bits: 2, "Z recovery on d2")
        _rz_unit(b, d, "lx", "lx.zq", "diag", representative=False)


def build_gadget(name: str) -> GadgetGraph:
    b = _Builder()
    d = _data("d")
    if name == "ec_unit":
        b.body.append(Marker("input", d))
        ec_unit(b, "d", "ec")
        return GadgetGraph(name, b.body, {"d": d}, ("d",), ("d",))
    if name == "recovery_R":
        b.body.append(Marker("input", d))
        b.classical("ec.zq", lambda bits: 0, "Z recovery on d0")
        _part2(b, d, "ec", (0, 1), ("u", "h"), "ec.part2", True)
        _rz_unit(b, d, "ec", "ec.zq", "ec.part2")
        meta = {"preset": {"ec.s": 1, "ec.t": 0}, "input_error_wires": d[:2]}
        return GadgetGraph(name, b.body, {"d": d}, ("d",), ("d",), meta=meta)
    if name == "memory":
        b.body.append(Marker("input", d))
        ec_unit(b, "d", "ec1")
        b.rest(*d, part="wait")
        ec_unit(b, "d", "ec2")
        return GadgetGraph(name, b.body, {"d": d}, ("d",), ("d",))
    if name == "bell_prep":
        q = ("q0", "q1", "q2", "q3")
        for w in q:
            b.init(w)
        b.loc("h", "q0", part="copies")
        b.loc("cnot", "q0", "q1", part="copies")
        b.loc("h", "q2", part="copies")
        b.loc("cnot", "q2", "q3", part="copies")
        b.body.append(Marker("input", q))
        b.loc("cnot", "q2", "q0", part="xcheck")
        b.loc("cnot", "q3", "q1", part="xcheck")
        b.loc("measX", "q2", bit="bx0", part="xcheck")
        b.loc("measX", "q3", bit="bx1", part="xcheck")
        b.init("bz")
        b.loc("cnot", "q0", "bz", part="zcheck")
        b.loc("cnot", "q1", "bz", part="zcheck")
        b.loc("measZ", "bz", bit="bz0", part="zcheck")
        b.classical("accept", lambda bits: int((bits["bx0"] ^ bits["bx1"]) == 0 and bits["bz0"] == 0))
        return GadgetGraph(name, b.body, {"q": ("q0", "q1")}, (), ("q",), outcome_bit="accept")
    if name == "xbar_meas":
        b.init(("anc0", "anc1"), "bell")
        b.body.append(Marker("input", d + ("anc0", "anc1")))
        b.loc("cnot", "anc0", d[0], part="couple")
        b.loc("cnot", "anc1", d[1], part="couple")
        _bell_measure(b, "anc0", "anc1", "anc", "bellmeas")
        _bell_measure(b, d[0], d[1], "d01", "bellmeas")
        _bell_measure(b, d[2], d[3], "d23", "bellmeas")
        b.classical("xbar", decode_xbar, "X-bar decoder")
        return GadgetGraph(name, b.body, {"d": d}, ("d",), (), outcome_bit="xbar")
    if name == "zbar_meas":
        b.body.append(Marker("input", d))
        for k in range(4):
            b.loc("measZ", d[k], bit=f"m{k}", part="meas")
        b.classical("zbar", decode_zbar, "Z-bar decoder")
        return GadgetGraph(name, b.body, {"d": d}, ("d",), (), outcome_bit="zbar")
    if name == "logical_x":
        b.body.append(Marker("input", d))
        _logical_x(b)
        return GadgetGraph(name, b.body, {"d": d}, ("d",), ("d",))
    if name == "cz_gadget":
        b.body.append(Marker("input", _data("a") + _data("b")))
        _cz_core(b)
        blocks = {"a": _data("a"), "b": _data("b")}
        return GadgetGraph(name, b.body, blocks, ("a", "b"), ("a", "b"))
    if name == "cz_exrec":
        b.body.append(Marker("input", _data("a") + _data("b")))
        ec_unit(b, "a", "leca")
        ec_unit(b, "b", "lecb")
        _cz_core(b)
        blocks = {"a": _data("a"), "b": _data("b")}
        return GadgetGraph(name, b.body, blocks, ("a", "b"), ("a", "b"))
    if name == "transversal_cnot":
        # Deliberately non-fault-tolerant reference: CNOT a_k -> b_k, then EC on both.
        b.body.append(Marker("input", _data("a") + _data("b")))
        for k in range(4):
            b.loc("cnot", f"a{k}", f"b{k}", part="cnot")
        ec_unit(b, "a", "eca")
        ec_unit(b, "b", "ecb")
        blocks = {"a": _data("a"), "b": _data("b")}
        return GadgetGraph(name, b.body, blocks, ("a", "b"), ("a", "b"))
    raise ValueError(f"unknown gadget {name!r}")


GADGETS = ("ec_unit", "recovery_R", "memory", "bell_prep", "xbar_meas", "zbar_meas",
           "logical_x", "cz_gadget", "cz_exrec")


# ---- statevector engine ----

class WireState:
    """Unnormalized pure state over a dynamic list of named wires."""

    __slots__ = ("wires", "psi")

    def __init__(self, wires, psi):
        self.wires = list(wires)
        self.psi = np.asarray(psi, dtype=complex).reshape((2,) * len(self.wires))

    def copy(self):
        return WireState(self.wires, self.psi.copy())

    def norm2(self) -> float:
        return float(np.vdot(self.psi, self.psi).real)

    def add(self, wire, vec):
        if wire in self.wires:
            raise ValueError(f"wire {wire} already live")
        self.psi = np.multiply.outer(self.psi, vec)
        self.wires.append(wire)

    def apply1(self, op, wire):
        ax = self.wires.index(wire)
        self.psi = np.moveaxis(np.tensordot(op, self.psi, axes=([1], [ax])), 0, ax)

    def apply2(self, op4, w1, w2):
        a1, a2 = self.wires.index(w1), self.wires.index(w2)
        out = np.tensordot(op4, self.psi, axes=([2, 3], [a1, a2]))
        self.psi = np.moveaxis(out, (0, 1), (a1, a2))

    def project_out(self, wire, vec):
        """Contract wire with <vec| and drop it."""
        ax = self.wires.index(wire)
        self.psi = np.tensordot(vec.conj(), self.psi, axes=([0], [ax]))
        self.wires.pop(ax)

    def vector(self, order) -> np.ndarray:
        if sorted(order) != sorted(self.wires):
            raise ValueError(f"live wires {self.wires} differ from requested {list(order)}")
        perm = [self.wires.index(w) for w in order]
        return np.transpose(self.psi, perm).reshape(-1)


@dataclass
class Branch:
    bits: dict
    state: WireState
    halted: bool = False
    weight: float = 1.0

    def copy(self):
        return Branch(dict(self.bits), self.state.copy(), self.halted, self.weight)


@dataclass(frozen=True)
class Fault:
    """Fault at a location: kind damp or phase, on the given subset of the location's wires."""

    loc: int
    kind: str = "damp"
    placement: str = "all"   # control | target | both | all

    def wires(self, loc: Loc) -> tuple:
        if loc.kind in TWO_QUBIT:
            return {"control": (loc.wires[0],), "target": (loc.wires[1],),
                    "both": loc.wires, "all": loc.wires}[self.placement]
        return loc.wires


def fault_cases(graph: GadgetGraph) -> list:
    """All single damping faults: one per location, three placements on two-qubit gates."""
    out = []
    for loc in graph.locations():
        if loc.kind in TWO_QUBIT:
            out.extend(Fault(loc.id, "damp", p) for p in ("control", "target", "both"))
        else:
            out.append(Fault(loc.id, "damp"))
    return out


class _Ns:
    """Attribute bag for dotted bit names; unset bits read as None."""

    def __getattr__(self, name):
        return None


class _Env(dict):
    def __missing__(self, key):
        return _Ns()


def _eval_predicate(pred: str, bits: dict) -> bool:
    env = _Env()
    for key, val in bits.items():
        head, _, tail = key.partition(".")
        if tail:
            setattr(env.setdefault(head, _Ns()), tail, val)
        else:
            env[key] = val
    return bool(eval(pred, {"__builtins__": {}}, env))


def _fault_op(kind):
    return E1 if kind == "damp" else ZMAT


class Engine:
    """Runs a gadget graph on one input with a fixed set of faults."""

    def __init__(self, graph: GadgetGraph, faults=(), input_errors=(), kraus_p: float | None = None):
        self.graph = graph
        self.faults = {}
        for f in faults:
            self.faults.setdefault(f.loc, []).append(f)
        self.locs = {loc.id: loc for loc in graph.locations()}
        for lid in self.faults:
            if lid not in self.locs:
                raise ValueError(f"invalid location {lid}")
        self.input_errors = tuple(input_errors)  # (wire, kind) pairs
        self.kraus_p = kraus_p

    def run(self, state: WireState, bits=None) -> list:
        branches = [Branch(dict(bits or {}), state)]
        return self._run(self.graph.nodes, branches)

    def _run(self, nodes, branches):
        for nd in nodes:
            live = [b for b in branches if not b.halted]
            if not live:
                break
            done = [b for b in branches if b.halted]
            if isinstance(nd, Cond):
                take, skip = [], []
                for br in live:
                    (take if _eval_predicate(nd.predicate, br.bits) else skip).append(br)
                branches = done + skip + (self._run(nd.body, take) if take else [])
            elif isinstance(nd, Halt):
                for br in live:
                    br.halted = True
                branches = done + live
            elif isinstance(nd, Classical):
                for br in live:
                    br.bits[nd.bit] = nd.fn(br.bits)
                branches = done + live
            elif isinstance(nd, Init):
                for br in live:
                    if nd.state == "bell":
                        w0, w1 = nd.wire
                        br.state.add(w0, ZERO)
                        br.state.add(w1, ZERO)
                        br.state.apply1(HMAT, w0)
                        br.state.apply2(CNOT4, w0, w1)
                    else:
                        br.state.add(nd.wire, ZERO if nd.state == "0" else PLUS)
                branches = done + live
            elif isinstance(nd, Marker):
                for wire, kind in self.input_errors:
                    for br in live:
                        br.state.apply1(_fault_op(kind), wire)
                branches = done + self._prune(live)
            elif isinstance(nd, Loc):
                branches = done + self._prune(self._location(nd, live))
        return branches

    def _prune(self, branches):
        return [b for b in branches if b.halted or b.state.norm2() > PRUNE_TOL]

    def _faults_at(self, loc, branches):
        faults = self.faults.get(loc.id, [])
        if self.kraus_p is not None and loc.id in self.faults:
            return self._kraus(loc, faults, branches)
        for f in faults:
            for w in f.wires(loc):
                for br in branches:
                    br.state.apply1(_fault_op(f.kind), w)
        return branches

    def _kraus(self, loc, faults, branches):
        p = self.kraus_p
        k0 = np.diag([1.0, math.sqrt(1 - p)]).astype(complex)
        k1 = math.sqrt(p) * E1
        for f in faults:
            for w in f.wires(loc):
                nxt = []
                for br in branches:
                    b1 = br.copy()
                    br.state.apply1(k0, w)
                    b1.state.apply1(k1, w)
                    nxt.extend([br, b1])
                branches = nxt
        return branches

    def _location(self, loc, branches):
        kind, w = loc.kind, loc.wires
        if kind in MEASUREMENTS:
            branches = self._faults_at(loc, branches)
            out = []
            basis = (ZERO, np.array([0, 1], dtype=complex)) if kind == "measZ" else (PLUS, MINUS)
            for br in branches:
                for outcome, vec in enumerate(basis):
                    nb = br if outcome == 1 else br.copy()
                    nb.state.project_out(w[0], vec)
                    nb.bits[loc.bit] = outcome
                    out.append(nb)
            return out
        for br in branches:
            st = br.state
            if kind == "prep0":
                st.add(w[0], ZERO)
            elif kind == "prepPlus":
                st.add(w[0], PLUS)
            elif kind == "cnot":
                st.apply2(CNOT4, *w)
            elif kind == "cz":
                st.apply2(CZ4, *w)
            elif kind == "x":
                st.apply1(XMAT, w[0])
            elif kind == "z":
                st.apply1(ZMAT, w[0])
            elif kind == "h":
                st.apply1(HMAT, w[0])
        return self._faults_at(loc, branches)


# ---- inputs and checks ----

def encoded_input(graph: GadgetGraph, logical) -> WireState:
    """Product of encoded logical states over the gadget's input blocks."""
    if isinstance(logical, str):
        logical = (logical,) * len(graph.input_blocks)
    wires, vec = [], np.ones(1, dtype=complex)
    for block, lab in zip(graph.input_blocks, logical):
        wires.extend(graph.blocks[block])
        vec = np.kron(vec, LOGICAL[lab] if isinstance(lab, str) else _encode(lab))
    return WireState(wires, vec)


def _encode(amps) -> np.ndarray:
    a, b = amps
    return a * LOGICAL["0"] + b * LOGICAL["1"]


def inject_and_propagate(graph, input_logical="0", faults=(), input_errors=(), bits=None,
                         kraus_p=None) -> list:
    """Run graph on an encoded input; returns every surviving measurement branch."""
    if isinstance(graph, str):
        graph = build_gadget(graph)
    faults = [f if isinstance(f, Fault) else Fault(*f) for f in faults]
    if graph.input_blocks:
        state = encoded_input(graph, input_logical)
    else:
        state = WireState([], np.ones(()))
    preset = dict(graph.meta.get("preset", {}))
    preset.update(bits or {})
    return Engine(graph, faults, input_errors, kraus_p).run(state, preset)


def _ideal_ec(state: WireState, block: str, wires: tuple) -> list:
    g = GadgetGraph("ideal_ec", [], {block: wires}, (block,), (block,))
    b = _Builder()
    ec_unit(b, block, f"chk{block}")
    g.nodes = b.body
    return Engine(g).run(state.copy())


def logical_fidelity(state: WireState, target: np.ndarray, order) -> float:
    v = state.vector(order)
    n2 = np.vdot(v, v).real
    return float(abs(np.vdot(target, v)) ** 2 / n2)


def check_correctable(branch, original_logical, blocks=None) -> bool:
    """True iff fault-free EC on every output block restores the target logical state.

    original_logical is a label or amplitude pair per block, or a full target
    vector over the blocks' data wires. A halted EC counts as failure.
    """
    state = branch.state if isinstance(branch, Branch) else branch
    if blocks is None:
        blocks = {"d": _data("d")}
    names = list(blocks)
    order = [w for n in names for w in blocks[n]]
    if isinstance(original_logical, np.ndarray) and original_logical.size == 2 ** len(order):
        target = original_logical
    else:
        labs = original_logical if isinstance(original_logical, (list, tuple)) and \
            len(original_logical) == len(names) and not _is_amp_pair(original_logical) else (original_logical,) * len(names)
        target = np.ones(1, dtype=complex)
        for lab in labs:
            target = np.kron(target, LOGICAL[lab] if isinstance(lab, str) else _encode(lab))
    current = [Branch({}, state.copy())]
    for n in names:
        nxt = []
        for br in current:
            for out in _ideal_ec(br.state, n, blocks[n]):
                if out.halted:
                    return False
                nxt.append(out)
        current = nxt
    return all(logical_fidelity(br.state, target, order) > 1 - FIDELITY_TOL for br in current)


def _is_amp_pair(x):
    return len(x) == 2 and all(isinstance(v, (int, float, complex, np.number)) for v in x)


# ---- target maps for property checks ----

def _lx_target(lab):
    a, b = AMPLITUDES[lab]
    return _encode((b, a))


def _cz_target(la, lb):
    a = AMPLITUDES[la]
    b = AMPLITUDES[lb]
    amps = np.array([a[0] * b[0], a[0] * b[1], a[1] * b[0], -a[1] * b[1]])
    out = np.zeros(256, dtype=complex)
    for i, j in itertools.product(range(2), range(2)):
        out += amps[2 * i + j] * np.kron(LOGICAL[str(i)], LOGICAL[str(j)])
    return out


def _cnot_target(la, lb):
    a = AMPLITUDES[la]
    b = AMPLITUDES[lb]
    out = np.zeros(256, dtype=complex)
    for i, j in itertools.product(range(2), range(2)):
        out += a[i] * b[j] * np.kron(LOGICAL[str(i)], LOGICAL[str(j ^ i)])
    return out


# ---- property verification ----

@dataclass
class CaseRecord:
    gadget: str
    logical: tuple
    faults: tuple
    input_errors: tuple
    syndromes: dict
    verdict: str

    def to_dict(self):
        return {"gadget": self.gadget, "logical": list(self.logical),
                "fault_locations": [f.loc for f in self.faults],
                "placement": [f.placement for f in self.faults],
                "input_errors": [list(e) for e in self.input_errors],
                "syndromes": self.syndromes, "verdict": self.verdict}


@dataclass
class PropertyReport:
    gadget: str
    property_id: str
    passed: bool
    n_cases: int
    n_branches: int
    n_halted: int
    counterexample: CaseRecord | None = None
    records: list = field(default_factory=list)

    def __str__(self):
        tag = "pass" if self.passed else "FAIL"
        out = f"{self.gadget} {self.property_id}: {tag} ({self.n_cases} cases, {self.n_branches} branches, {self.n_halted} halted)"
        if self.counterexample is not None:
            out += f"\n  counterexample: {self.counterexample.to_dict()}"
        return out


PROPERTIES = {
    "ec_unit": ("P1", "P2"),
    "recovery_R": ("P1",),
    "memory": ("P1", "P2"),
    "bell_prep": ("P3",),
    "xbar_meas": ("P4",),
    "zbar_meas": ("P4",),
    "logical_x": ("P2", "P5"),
    "cz_gadget": ("P2", "P5"),
    "cz_exrec": ("P2", "P5"),
    "transversal_cnot": ("P5",),
}


def _cases(graph, prop):
    """(faults, input_errors) pairs quantified by the property."""
    data = graph.meta.get("input_error_wires") or [w for blk in graph.input_blocks for w in graph.blocks[blk]]
    inputs = [()] + [((w, "damp"),) for w in data]
    faults = [(f,) for f in fault_cases(graph)]
    if prop == "P1":
        return [((), e) for e in inputs]
    if prop == "P2":
        return [((), ())] + [(f, ()) for f in faults]
    if prop == "P3":
        q = ("q0", "q1", "q2", "q3")
        marks = [((w, "damp"),) for w in q]
        return [((), ())] + [((), m) for m in marks] + [(f, ()) for f in faults]
    if prop == "P4":
        extra = []
        if graph.name == "xbar_meas":
            extra = [((), ((w, "damp"),)) for w in ("anc0", "anc1")]
        return [((), e) for e in inputs] + extra + [(f, ()) for f in faults]
    if prop == "P5":
        return [((), e) for e in inputs] + [(f, ()) for f in faults if f]
    raise ValueError(f"unknown property {prop}")


def _logical_inputs(graph):
    if graph.name in ("bell_prep",):
        return [()]
    if len(graph.input_blocks) == 2:
        return list(itertools.product(LOGICAL_INPUTS, repeat=2))
    return [(lab,) for lab in LOGICAL_INPUTS]


def _bell_ok(state: WireState) -> bool:
    v = state.vector(("q0", "q1"))
    v = v / np.linalg.norm(v)
    for t in (S2 * np.array([1, 0, 0, 1]), np.array([0, 1, 0, 0]), np.array([0, 0, 1, 0])):
        if abs(abs(np.vdot(t, v)) - 1) < FIDELITY_TOL:
            return True
    return False


def _judge(graph, prop, logical, branch) -> str:
    """Verdict for one output branch: ok, halt, or a failure reason."""
    if branch.halted:
        return "halt"
    if prop == "P3":
        if branch.bits["accept"] == 0:
            return "reject"
        return "ok" if _bell_ok(branch.state) else "bad accepted state"
    if prop == "P4":
        val = branch.bits[graph.outcome_bit]
        if val is None:
            return "undecodable"
        lab = logical[0]
        expect = {"xbar_meas": {"+": 0, "-": 1}, "zbar_meas": {"0": 0, "1": 1}}[graph.name].get(lab)
        if expect is not None and val != expect:
            return "wrong outcome"
        return "ok"
    blocks = {n: graph.blocks[n] for n in graph.output_blocks}
    if prop == "P1" and graph.name in ("ec_unit", "recovery_R"):
        order = graph.blocks["d"]
        fid = logical_fidelity(branch.state, LOGICAL[logical[0]], order)
        return "ok" if fid > 1 - FIDELITY_TOL else "output differs from input"
    return "ok" if check_correctable(branch, logical_target(graph.name, logical), blocks) else "uncorrectable"


def logical_target(gadget: str, logical: tuple) -> np.ndarray:
    """Ideal encoded output of a gadget for product logical inputs."""
    if gadget == "logical_x":
        return _lx_target(logical[0])
    if gadget in ("cz_gadget", "cz_exrec"):
        return _cz_target(*logical)
    if gadget == "transversal_cnot":
        return _cnot_target(*logical)
    out = np.ones(1, dtype=complex)
    for lab in logical:
        out = np.kron(out, LOGICAL[lab])
    return out


def verify_property(gadget, property_id: str, keep_records: bool = False) -> PropertyReport:
    """Exhaustive single-fault verification of one property on one gadget."""
    graph = build_gadget(gadget) if isinstance(gadget, str) else gadget
    if property_id not in PROPERTIES.get(graph.name, ()):
        raise ValueError(f"{property_id} is not defined for {graph.name}")
    cases = _cases(graph, property_id)
    n_cases = n_branches = n_halted = 0
    first_bad = None
    records = []
    for logical in _logical_inputs(graph):
        for faults, errs in cases:
            n_cases += 1
            for br in inject_and_propagate(graph, logical, faults, errs):
                n_branches += 1
                verdict = _judge(graph, property_id, logical, br)
                n_halted += verdict == "halt"
                rec = CaseRecord(graph.name, logical, tuple(faults), tuple(errs),
                                 {k: v for k, v in br.bits.items() if v is not None}, verdict)
                if keep_records:
                    records.append(rec)
                if verdict not in ("ok", "halt", "reject") and first_bad is None:
                    first_bad = rec
    return PropertyReport(graph.name, property_id, first_bad is None, n_cases, n_branches,
                          n_halted, first_bad, records)


SYNDROME_TABLE = {
    (0, 0, None, None, None, None): "no error or undetected fault",
    (1, 0, 0, 1, None, None): "qubit 1 damped",
    (1, 0, 1, 0, None, None): "qubit 2 damped",
    (1, 0, 1, 1, None, None): "fault in one CNOT",
    (0, 1, None, None, 0, 1): "qubit 3 damped",
    (0, 1, None, None, 1, 0): "qubit 4 damped",
    (0, 1, None, None, 1, 1): "fault in one CNOT",
}


def syndrome_key(bits: dict, tag: str = "ec") -> tuple:
    return tuple(bits.get(f"{tag}.{k}") for k in ("s", "t", "u", "h", "v", "g"))


def classify_syndrome(bits: dict, tag: str = "ec") -> str:
    key = syndrome_key(bits, tag)
    if key[0] == 1 and key[1] == 1:
        return "end computation"
    return SYNDROME_TABLE.get(key, "higher order")


def completeness_check(graph, logical="0", locations=(), p=0.1) -> float:
    """Total branch probability with full damping Kraus pairs at the given locations."""
    if isinstance(graph, str):
        graph = build_gadget(graph)
    faults = [Fault(lid, "damp", "all") for lid in locations]
    branches = inject_and_propagate(graph, logical, faults, kraus_p=p)
    return float(sum(br.state.norm2() for br in branches))


# ---- malignant-pair ledgers ----

def _evaluate(expr: str, env: dict) -> int:
    val = eval(expr, {"__builtins__": {}, "C": math.comb}, dict(env))
    if int(val) != val:
        raise ValueError(f"non-integer count from {expr}")
    return int(val)


@dataclass(frozen=True)
class LedgerEntry:
    block_pair: str
    count: int
    derivation: str
    note: str = ""

    def check(self, env=None) -> bool:
        return _evaluate(self.derivation, env or {}) == self.count


def _entry(pair, expr, env, note=""):
    return LedgerEntry(pair, _evaluate(expr, env), expr, note)


@dataclass
class Ledger:
    unit: str
    entries: list
    damping_pairs: int
    z_locations: int
    A: int
    reference_A: int
    env: dict

    @property
    def p_th(self) -> float:
        return 1.0 / self.A

    @property
    def reference_p_th(self) -> float:
        return 1.0 / self.reference_A

    @property
    def matches_reference(self) -> bool:
        return self.A == self.reference_A

    def entries_consistent(self) -> bool:
        return all(e.check(self.env) for e in self.entries)

    def table(self) -> str:
        lines = ["block_pair,derivation,count"]
        lines += [f"{e.block_pair},{e.derivation},{e.count}" for e in self.entries]
        lines.append(f"damping_pairs,,{self.damping_pairs}")
        lines.append(f"z_locations,,{self.z_locations}")
        lines.append(f"A,,{self.A}")
        lines.append(f"p_th,,{self.p_th:.6e}")
        lines.append(f"reference_A,,{self.reference_A}")
        lines.append(f"reference_p_th,,{self.reference_p_th:.6e}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"unit": self.unit,
                "entries": [{"block_pair": e.block_pair, "derivation": e.derivation, "count": e.count,
                             "note": e.note} for e in self.entries],
                "damping_pairs": self.damping_pairs, "z_locations": self.z_locations, "A": self.A,
                "p_th": self.p_th, "reference_A": self.reference_A, "reference_p_th": self.reference_p_th,
                "matches_reference": self.matches_reference}


def n_ec() -> dict:
    """Malignant pairs inside one EC unit, from the location census."""
    census = build_gadget("ec_unit")
    part1 = census.census("part1")["total"]
    part2 = census.census("part2")["total"]
    env = {"P1": part1, "P2": part2}
    parity = _entry("EC part1 x part1", "C(P1, 2) - (3*4 + 12*2 + 1)", env,
                    "same-data-line pairs, data x ancilla-measurement pairs and the measurement pair are benign")
    cross = _entry("EC part1 x part2", "4*(P2 - 8)", env,
                   "four first-step data faults trigger part 2; the 7 rests around X measurement and Z plus the Z gate are benign")
    total = parity.count + cross.count
    return {"parity": parity, "cross": cross, "N_EC": total, "P1": part1, "P2": part2}


def ledger(unit: str) -> Ledger:
    ec = n_ec()
    env = {"N_EC": ec["N_EC"], "P1": ec["P1"], "P2": ec["P2"]}
    if unit == "memory":
        entries = [
            ec["parity"], ec["cross"],
            _entry("within EC (both units)", "2*N_EC", env),
            _entry("rest x rest", "C(4, 2)", env, "two damped data lines in the waiting step"),
            _entry("EC x rest", "2*(10*3)", env, "per EC, 10 undetected single-error locations times 3 other data rests"),
        ]
        damping = sum(e.count for e in entries[2:])
        z = _entry("Z locations", "2*(P1 - 2) + 4", env, "phase faults on data-line locations of part 1 plus the rests")
        entries.append(z)
        return Ledger("memory", entries, damping, z.count, damping + z.count, 356, env)
    if unit == "cz_exrec":
        spec = [
            ("(2,1)", "3*7 + 2*8 + 2*8 + 3*7", "leading EC_b against leading EC_a"),
            ("(3,1)", "10*3", "CZ layer against leading EC_a"),
            ("(3,2)", "10*3", "CZ layer against leading EC_b"),
            ("(3,3)", "C(4, 2)", "two CZ gates"),
            ("(4,1)", "(3*10 + 2*11 + 3*10 + 2*11) + 10*17", "trailing EC_a against leading EC_a"),
            ("(4,2)", "10*6 + 10*18", "trailing EC_a against leading EC_b"),
            ("(4,3)", "(10 + 11 + 11 + 10) + 17*4", "trailing EC_a against the CZ layer"),
            ("(4,4)", "N_EC", "within trailing EC_a"),
            ("(5,1)", "10*6 + 10*18", "trailing EC_b against leading EC_a"),
            ("(5,2)", "(3*10 + 2*11 + 3*10 + 2*11) + 10*17", "trailing EC_b against leading EC_b"),
            ("(5,3)", "(10 + 11 + 11 + 10) + 17*4", "trailing EC_b against the CZ layer"),
            ("(5,4)", "4*(10 + 18)*2", "trailing EC_b against trailing EC_a"),
            ("(5,5)", "N_EC", "within trailing EC_b"),
        ]
        entries = [ec["parity"], ec["cross"]] + [_entry(p, e, env, n) for p, e, n in spec]
        damping = sum(e.count for e in entries[2:])
        z = _entry("Z locations", "(P1 - 2)*4 + 4", env, "part-1 data-line phase faults in four EC units plus the CZ gates")
        entries.append(z)
        return Ledger("cz_exrec", entries, damping, z.count, damping + z.count, 1880, env)
    raise ValueError(f"unknown ledger unit {unit!r}")


REFERENCE_EXREC_ENTRIES = (74, 30, 30, 6, 274, 240, 110, 134, 240, 274, 110, 224, 134)
