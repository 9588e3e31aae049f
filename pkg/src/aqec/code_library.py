"""Fixed codes: Leung 4-qubit, 3-qubit codes, [[5,1,3]] and numerically found table codes."""

from __future__ import annotations

import json
import re
from functools import lru_cache
from importlib import resources

import numpy as np

from .cartan import pauli_word
from .channel_core import QuantumChannel, ket
from .qec_petz import Codespace

S2 = np.sqrt(0.5)
TABLE_CODES = ("3q_unstructured", "4q_unstructured", "3q_structured", "4q_structured", "4q_spinchain")

LEUNG_STABILIZERS = ("XXXX", "ZZII", "IIZZ")
LEUNG_LOGICALS = {"X": "XXII", "Z": "ZIIZ"}
BITFLIP_STABILIZERS = ("ZZI", "IZZ")
FIVE_QUBIT_STABILIZERS = ("XZZXI", "IXZZX", "XIXZZ", "ZXIXZ")
FIVE_QUBIT_LOGICALS = {"X": "XXXXX", "Z": "ZZZZZ"}


def leung_4qubit() -> Codespace:
    return Codespace.from_codewords([S2 * (ket("0000") + ket("1111")), S2 * (ket("1100") + ket("0011"))])


def ad_3qubit() -> Codespace:
    return Codespace.from_codewords([S2 * (ket("000") + ket("111")), S2 * (ket("100") + ket("011"))])


def bitflip_3qubit() -> Codespace:
    return Codespace.from_codewords([ket("000"), ket("111")])


def stabilizer_projector(generators) -> np.ndarray:
    p = None
    for g in generators:
        m = pauli_word(g)
        term = 0.5 * (np.eye(m.shape[0]) + m)
        p = term if p is None else p @ term
    return p


def perfect_5qubit() -> Codespace:
    """[[5,1,3]]: |0_L> is the projected |00000>, |1_L> = X^{x5} |0_L>."""
    p = stabilizer_projector(FIVE_QUBIT_STABILIZERS)
    z0 = p @ ket("00000")
    z0 /= np.linalg.norm(z0)
    z1 = pauli_word(FIVE_QUBIT_LOGICALS["X"]) @ z0
    return Codespace.from_codewords([z0, z1])


def syndrome(generators, error_word: str, code: Codespace) -> tuple:
    """Eigenvalues (+1/-1) of each generator on E|0_L>."""
    v = pauli_word(error_word) @ code.codewords[0]
    return tuple(int(round(np.real(np.vdot(v, pauli_word(g) @ v)))) for g in generators)


def single_qubit_paulis(n: int):
    words = ["I" * n]
    for q in range(n):
        words += ["I" * q + p + "I" * (n - q - 1) for p in "XYZ"]
    return words


def syndrome_recovery(code: Codespace, generators, correctable=None) -> QuantumChannel:
    """Stabilizer decoder: project on each syndrome, undo the first listed error with it.

    Syndromes not produced by any correctable error are left uncorrected.
    """
    n = len(generators[0])
    correctable = single_qubit_paulis(n) if correctable is None else correctable
    dim = 2**n
    table = {}
    for e in correctable:
        table.setdefault(syndrome(generators, e, code), e)
    kraus = []
    for signs in np.ndindex(*(2,) * len(generators)):
        s = tuple(1 - 2 * b for b in signs)
        proj = np.eye(dim, dtype=complex)
        for g, sv in zip(generators, s):
            proj = proj @ (0.5 * (np.eye(dim) + sv * pauli_word(g)))
        fix = pauli_word(table[s]) if s in table else np.eye(dim)
        kraus.append(fix @ proj)
    return QuantumChannel.from_kraus(kraus)


_ENTRY = re.compile(r"^\s*([-+]?\d*\.?\d+)\s*(?:([-+])\s*(\d*\.?\d+)\s*(i?))?\s*$")


def parse_entry(text: str) -> complex:
    """Parse 'a', 'a+bi' or 'a+b'.

    The printed tables drop the imaginary unit on a few entries; reading
    'a+b' as a+bi restores unit norm and orthogonality for every code.
    """
    m = _ENTRY.match(text)
    if not m:
        raise ValueError(f"cannot parse table entry {text!r}")
    re_part = float(m.group(1))
    if m.group(2) is None:
        return complex(re_part, 0.0)
    im = float(m.group(3)) * (1 if m.group(2) == "+" else -1)
    return complex(re_part, im)


@lru_cache(maxsize=None)
def _table_data():
    text = resources.files("aqec").joinpath("data/table_codes.json").read_text()
    return json.loads(text)["codes"]


def load_table_code(name: str, ortho_tol: float = 5e-3) -> Codespace:
    data = _table_data()
    if name not in data:
        raise ValueError(f"unknown table code {name!r}; choose from {TABLE_CODES}")
    words = [np.array([parse_entry(x) for x in col]) for col in data[name]["codewords"]]
    words = [w / np.linalg.norm(w) for w in words]
    overlap = abs(np.vdot(words[0], words[1]))
    if overlap > ortho_tol:
        raise ValueError(f"table code {name} codewords overlap {overlap:.2e} > {ortho_tol}")
    w1 = words[1] - np.vdot(words[0], words[1]) * words[0]
    return Codespace.from_codewords([words[0], w1 / np.linalg.norm(w1)])


def get_code(name: str) -> Codespace:
    """Resolve 'leung', '3q', 'bitflip', '5q', 'table:<name>' or 'file:<path>'."""
    fixed = {"leung": leung_4qubit, "3q": ad_3qubit, "bitflip": bitflip_3qubit, "5q": perfect_5qubit}
    if name in fixed:
        return fixed[name]()
    if name.startswith("table:"):
        return load_table_code(name[6:])
    if name.startswith("file:"):
        with open(name[5:]) as fh:
            return Codespace.from_json(fh.read())
    raise ValueError(f"unknown code {name!r}")
