"""Recursive Cartan parameterization of 2-, 3- and 4-qubit unitaries.

Qubit 0 is the leftmost factor of every Kronecker product and Pauli word.
For n >= 3 the local slots K = SU(2^{n-1}) x SU(2) act as a nested Cartan
form on qubits 0..n-2 and an Euler-angle SU(2) on the last qubit.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel_core import PAULI, dagger, kron2, kron_all
from .qec_petz import Codespace

F_WORDS = {
    3: ("XXZ", "YYZ", "ZZZ"),
    4: ("XXIZ", "YYIZ", "ZZIZ", "IIXZ", "XXXZ", "YYXZ", "ZZXZ"),
}
J_WORDS = {
    3: ("XXX", "YYX", "ZZX", "IIX"),
    4: ("IIIX", "XXIX", "YYIX", "ZZIX", "IIXX", "XXXX", "YYXX", "ZZXX"),
}
H2_WORDS = ("XX", "YY", "ZZ")
MODES = ("unstructured", "structured_trivial")


@lru_cache(maxsize=None)
def pauli_word(word: str) -> np.ndarray:
    try:
        m = kron_all([PAULI[ch] for ch in word])
    except KeyError as exc:
        raise ValueError(f"invalid Pauli letter in {word!r}") from exc
    m.setflags(write=False)
    return m


def pauli_string_exp(word: str, theta: float, n: int | None = None) -> np.ndarray:
    """exp(-i theta P) = cos(theta) I - i sin(theta) P."""
    if n is not None and len(word) != n:
        raise ValueError(f"word {word!r} does not have length {n}")
    p = pauli_word(word)
    return np.cos(theta) * np.eye(p.shape[0]) - 1j * np.sin(theta) * p


@lru_cache(maxsize=None)
def _joint_diagonalization(words: tuple):
    """Common eigenbasis C and sign table D (len(words) x dim) of commuting Pauli words."""
    mats = [pauli_word(w) for w in words]
    for a in mats:
        for b in mats:
            if np.abs(a @ b - b @ a).max() > 1e-12:
                raise ValueError("Pauli words do not commute")
    weights = np.sqrt(np.arange(2, len(words) + 2, dtype=float))
    _, c = np.linalg.eigh(sum(w * m for w, m in zip(weights, mats)))
    d = np.array([np.real(np.einsum("ji,jk,ki->i", c.conj(), m, c)) for m in mats])
    d = np.round(d)
    for m, row in zip(mats, d):
        if np.abs((c * row) @ dagger(c) - m).max() > 1e-12:
            raise ValueError("joint diagonalization failed")
    c.setflags(write=False)
    d.setflags(write=False)
    return c, d


def commuting_exp(words, coeffs) -> np.ndarray:
    """exp(-i sum_k c_k P_k) for commuting words via their shared eigenbasis."""
    c, d = _joint_diagonalization(tuple(words))
    phase = np.exp(-1j * (np.asarray(coeffs, float) @ d))
    return (c * phase) @ dagger(c)


def commuting_exp_product(words, coeffs) -> np.ndarray:
    """Same factor as an ordered product of single-word exponentials."""
    out = np.eye(2 ** len(words[0]), dtype=complex)
    for w, c in zip(words, coeffs):
        out = out @ pauli_string_exp(w, c)
    return out


def _rz(a):
    return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])


def _ry(b):
    c, s = np.cos(b / 2), np.sin(b / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def su2(angles) -> np.ndarray:
    """Euler form Rz(a) Ry(b) Rz(c)."""
    a, b, c = angles
    return _rz(a) @ _ry(b) @ _rz(c)


def n_nonlocal_top(n: int) -> int:
    return 3 if n == 2 else 2 * len(F_WORDS[n]) + len(J_WORDS[n])


@dataclass(frozen=True)
class KSlot:
    """One local factor K = (nested Cartan on qubits 0..n-2) x SU(2) on qubit n-1."""

    sub: "CartanParams | None"
    su2: np.ndarray | None

    def matrix(self, n: int) -> np.ndarray:
        left = np.eye(2 ** (n - 1), dtype=complex) if self.sub is None else build_unitary(self.sub)
        right = np.eye(2, dtype=complex) if self.su2 is None else su2(self.su2)
        return kron2(left, right)

    def is_local_trivial(self) -> bool:
        return self.su2 is None and (self.sub is None or self.sub.locals_trivial())


@dataclass(frozen=True)
class CartanParams:
    """n=2: nonlocal (c1, c2, c3), locals = 4 Euler triples (U1, U2, U3, U4) or None.
    n=3, 4: nonlocal = (c^(1), a, c^(2)), locals = 4 KSlot or None.
    """

    n: int
    nonlocal_: np.ndarray
    locals: tuple = (None, None, None, None)

    def __post_init__(self):
        if self.n not in (2, 3, 4):
            raise ValueError(f"unsupported qubit count {self.n}")
        v = np.asarray(self.nonlocal_, dtype=float)
        if v.shape != (n_nonlocal_top(self.n),):
            raise ValueError(f"nonlocal vector for n={self.n} needs {n_nonlocal_top(self.n)} entries")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite parameters")
        object.__setattr__(self, "nonlocal_", v)
        if len(self.locals) != 4:
            raise ValueError("exactly four local slots required")

    def split(self):
        nf = len(F_WORDS[self.n])
        v = self.nonlocal_
        return v[:nf], v[nf:-nf], v[-nf:]

    def locals_trivial(self) -> bool:
        if self.n == 2:
            return all(s is None for s in self.locals)
        return all(s is None or s.is_local_trivial() for s in self.locals)


def build_unitary(params: CartanParams) -> np.ndarray:
    n = params.n
    if n == 2:
        ident = np.eye(2, dtype=complex)
        u1, u2, u3, u4 = (ident if s is None else su2(s) for s in params.locals)
        core = commuting_exp(H2_WORDS, params.nonlocal_)
        return kron2(u1, u2) @ core @ kron2(u3, u4)
    c1, a, c2 = params.split()
    f1 = commuting_exp(F_WORDS[n], c1)
    j = commuting_exp(J_WORDS[n], a)
    f2 = commuting_exp(F_WORDS[n], c2)
    ks = [None if s is None else s.matrix(n) for s in params.locals]
    out = None
    for k, f in zip(ks, (f1, j, f2, None)):
        for m in (k, f):
            if m is not None:
                out = m if out is None else out @ m
    return out


def _apply_commuting_exp(words, coeffs, v):
    c, d = _joint_diagonalization(tuple(words))
    phase = np.exp(-1j * (np.asarray(coeffs, float) @ d))
    return c @ (phase[:, None] * (c.conj().T @ v))


def apply_unitary(params: CartanParams, v: np.ndarray) -> np.ndarray:
    """U @ v applied factor by factor; v has shape (2^n, k)."""
    n = params.n
    if n == 2:
        ident = None
        u1, u2, u3, u4 = (ident if s is None else su2(s) for s in params.locals)
        v = _apply_pair(u3, u4, v)
        v = _apply_commuting_exp(H2_WORDS, params.nonlocal_, v)
        return _apply_pair(u1, u2, v)
    c1, a, c2 = params.split()
    seq = [(params.locals[0], None), (None, (F_WORDS[n], c1)), (params.locals[1], None),
           (None, (J_WORDS[n], a)), (params.locals[2], None), (None, (F_WORDS[n], c2)),
           (params.locals[3], None)]
    for slot, fac in reversed(seq):
        if fac is not None:
            v = _apply_commuting_exp(fac[0], fac[1], v)
        elif slot is not None:
            v = _apply_kslot(slot, n, v)
    return v


def _apply_pair(a, b, v):
    if a is None and b is None:
        return v
    k = v.shape[1]
    t = v.reshape(2, 2, k)
    if a is not None:
        t = np.einsum("ij,jbk->ibk", a, t)
    if b is not None:
        t = np.einsum("ij,ajk->aik", b, t)
    return t.reshape(4, k)


def _apply_kslot(slot: KSlot, n: int, v):
    k = v.shape[1]
    t = v.reshape(2 ** (n - 1), 2, k)
    if slot.su2 is not None:
        t = np.einsum("ij,ajk->aik", su2(slot.su2), t)
    if slot.sub is not None:
        t = apply_unitary(slot.sub, t.reshape(2 ** (n - 1), 2 * k)).reshape(2 ** (n - 1), 2, k)
    return t.reshape(2**n, k)


def n_params(n: int, mode: str = "unstructured") -> int:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if n == 2:
        return 3 if mode == "structured_trivial" else 15
    sub = n_params(n - 1, mode)
    per_slot = sub + (3 if mode == "unstructured" else 0)
    return n_nonlocal_top(n) + 4 * per_slot


def params_from_vector(n: int, x, mode: str = "unstructured") -> CartanParams:
    x = np.asarray(x, dtype=float)
    if x.shape != (n_params(n, mode),):
        raise ValueError(f"expected {n_params(n, mode)} parameters for n={n}, mode={mode}")
    k = n_nonlocal_top(n)
    head, rest = x[:k], x[k:]
    if n == 2:
        if mode == "structured_trivial":
            return CartanParams(2, head)
        return CartanParams(2, head, tuple(rest[3 * i: 3 * i + 3] for i in range(4)))
    per = len(rest) // 4
    slots = []
    for i in range(4):
        chunk = rest[i * per:(i + 1) * per]
        if mode == "unstructured":
            slots.append(KSlot(params_from_vector(n - 1, chunk[:-3], mode), chunk[-3:]))
        else:
            slots.append(KSlot(params_from_vector(n - 1, chunk, mode), None))
    return CartanParams(n, head, tuple(slots))


def random_params(n: int, rng: np.random.Generator, mode: str = "unstructured") -> CartanParams:
    return params_from_vector(n, rng.uniform(0, 2 * np.pi, n_params(n, mode)), mode)


def initial_basis(n: int):
    d = 2**n
    e0 = np.zeros(d, dtype=complex)
    e1 = np.zeros(d, dtype=complex)
    e0[0] = 1.0
    e1[d // 2] = 1.0
    return e0, e1


def encode(u: np.ndarray, basis=None) -> Codespace:
    """Codewords U|0_init>, U|1_init>; default initial pair is |0...0>, |10...0>."""
    u = np.asarray(u, dtype=complex)
    dev = np.abs(dagger(u) @ u - np.eye(u.shape[0])).max()
    if dev > 1e-8:
        raise ValueError(f"encoding matrix is not unitary (deviation {dev:.2e})")
    if basis is None:
        basis = initial_basis(int(round(np.log2(u.shape[0]))))
    return Codespace(u @ np.column_stack(basis))


# ---- circuit emission (n = 3, trivial SU(2) factors) ----

_SQ = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "S": (np.eye(2) + 1j * PAULI["X"]) / np.sqrt(2),
}
_SQ["Hdg"] = dagger(_SQ["H"])
_SQ["Sdg"] = dagger(_SQ["S"])


@dataclass(frozen=True)
class Gate:
    kind: str
    wires: tuple
    angle: float | None = None

    def to_text(self) -> str:
        s = f"{self.kind} {','.join(map(str, self.wires))}"
        return s if self.angle is None else f"{s} {self.angle!r}"


@dataclass(frozen=True)
class CircuitDescription:
    n_qubits: int
    gates: tuple

    def __post_init__(self):
        for g in self.gates:
            if g.kind not in ("H", "Hdg", "S", "Sdg", "CNOT", "Rz"):
                raise ValueError(f"unknown gate kind {g.kind}")
            if any(not 0 <= w < self.n_qubits for w in g.wires):
                raise ValueError(f"wire out of range in {g}")
            if g.angle is not None and not np.isfinite(g.angle):
                raise ValueError("non-finite angle")

    def to_text(self) -> str:
        return "\n".join(g.to_text() for g in self.gates) + ("\n" if self.gates else "")

    @classmethod
    def from_text(cls, n_qubits: int, text: str) -> "CircuitDescription":
        gates = []
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            wires = tuple(int(w) for w in parts[1].split(","))
            angle = float(parts[2]) if len(parts) > 2 else None
            gates.append(Gate(parts[0], wires, angle))
        return cls(n_qubits, tuple(gates))

    def count(self, kind: str) -> int:
        return sum(g.kind == kind for g in self.gates)


def _embed(op: np.ndarray, wire: int, n: int) -> np.ndarray:
    mats = [np.eye(2, dtype=complex)] * n
    mats[wire] = op
    return kron_all(mats)


def _cnot(c: int, t: int, n: int) -> np.ndarray:
    d = 2**n
    m = np.zeros((d, d), dtype=complex)
    for i in range(d):
        bit = (i >> (n - 1 - c)) & 1
        m[i ^ (bit << (n - 1 - t)), i] = 1.0
    return m


def gate_matrix(g: Gate, n: int) -> np.ndarray:
    if g.kind == "CNOT":
        return _cnot(g.wires[0], g.wires[1], n)
    if g.kind == "Rz":
        return _embed(_rz(g.angle), g.wires[0], n)
    return _embed(_SQ[g.kind], g.wires[0], n)


def circuit_unitary(circ: CircuitDescription) -> np.ndarray:
    u = np.eye(2**circ.n_qubits, dtype=complex)
    for g in circ.gates:
        u = gate_matrix(g, circ.n_qubits) @ u
    return u


def _pauli_term_gates(word: str, coeff: float):
    """Gates for exp(-i coeff P): basis change, CNOT parity ladder, Rz(2 coeff), undo."""
    support = [q for q, ch in enumerate(word) if ch != "I"]
    pre, post = [], []
    for q in support:
        if word[q] == "X":
            pre.append(Gate("H", (q,)))
            post.append(Gate("Hdg", (q,)))
        elif word[q] == "Y":
            # S^dag Z S = -Y on each of an even number of Y sites
            pre.append(Gate("S", (q,)))
            post.append(Gate("Sdg", (q,)))
    ladder = [Gate("CNOT", (a, b)) for a, b in zip(support[:-1], support[1:])]
    rz = Gate("Rz", (support[-1],), 2.0 * float(coeff))
    return pre + ladder + [rz] + ladder[::-1] + post


def _factor_gates(words, coeffs, tol):
    gates = []
    for w, c in zip(words, coeffs):
        if abs(c) > tol:
            if sum(ch == "Y" for ch in w) % 2:
                raise ValueError("odd Y count not supported by the templates")
            gates += _pauli_term_gates(w, c)
    return gates


def emit_circuit(params: CartanParams, tol: float = 0.0) -> CircuitDescription:
    """Gate list for a 3-qubit Cartan unitary whose SU(2) factors are all trivial."""
    if params.n != 3:
        raise ValueError("circuit emission is implemented for n=3 only")
    if not params.locals_trivial():
        raise ValueError("emit_circuit needs trivial local SU(2) factors")
    c1, a, c2 = params.split()
    factors = [None, F_WORDS[3], None, J_WORDS[3], None, F_WORDS[3], None]
    coeffs = [None, c1, None, a, None, c2, None]
    slots = list(params.locals)
    timeline = []
    # matrix order K1 F1 K2 J K3 F2 K4 -> time order reversed
    for idx in range(6, -1, -1):
        if idx % 2 == 0:
            slot = slots[idx // 2]
            if slot is not None and slot.sub is not None:
                timeline += _factor_gates(tuple(w + "I" for w in H2_WORDS), slot.sub.nonlocal_, tol)
        else:
            timeline += _factor_gates(factors[idx], coeffs[idx], tol)
    return CircuitDescription(3, tuple(timeline))


def phase_aligned_distance(a: np.ndarray, b: np.ndarray) -> float:
    """max |a - e^{i phi} b| with the global phase chosen from the largest entry."""
    k = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    ph = a[k] / b[k]
    ph /= abs(ph)
    return float(np.abs(a - ph * b).max())
