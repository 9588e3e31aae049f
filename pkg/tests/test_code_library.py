import numpy as np
import pytest

from aqec.cartan import pauli_word
from aqec.channel_core import make_amplitude_damping, make_named, tensor_power
from aqec.code_library import (
    FIVE_QUBIT_STABILIZERS, LEUNG_LOGICALS, LEUNG_STABILIZERS, TABLE_CODES, get_code, leung_4qubit, load_table_code,
    parse_entry, perfect_5qubit, syndrome_recovery,
)
from aqec.qec_petz import petz_fidelity_loss, worst_case_fidelity


def logical_action(code, word):
    v = code.basis
    return v.conj().T @ pauli_word(word) @ v


def test_leung_stabilizers_and_logicals():
    code = leung_4qubit()
    for g in LEUNG_STABILIZERS:
        assert np.abs(pauli_word(g) @ code.basis - code.basis).max() < 1e-14
    assert np.abs(logical_action(code, LEUNG_LOGICALS["X"]) - [[0, 1], [1, 0]]).max() < 1e-14
    assert np.abs(logical_action(code, LEUNG_LOGICALS["Z"]) - np.diag([1, -1])).max() < 1e-14


def test_five_qubit_code_stabilized():
    code = perfect_5qubit()
    for g in FIVE_QUBIT_STABILIZERS:
        assert np.abs(pauli_word(g) @ code.basis - code.basis).max() < 1e-12
    assert np.abs(logical_action(code, "ZZZZZ") - np.diag([1, -1])).max() < 1e-12


def test_five_qubit_corrects_depolarizing_to_first_order():
    code = perfect_5qubit()
    rec = syndrome_recovery(code, FIVE_QUBIT_STABILIZERS)
    for p in (0.01, 0.02):
        loss = 1 - worst_case_fidelity(tensor_power(make_named("depolarizing", p), 5), rec, code)
        assert loss < 15 * p**2


def test_syndrome_recovery_perfect_on_single_flip():
    code = perfect_5qubit()
    rec = syndrome_recovery(code, FIVE_QUBIT_STABILIZERS)
    # any single-qubit Pauli on qubit 2, applied with certainty, is undone
    for e in "XYZ":
        err = type(rec).from_kraus([pauli_word("II" + e + "II")])
        assert abs(worst_case_fidelity(err, rec, code) - 1) < 1e-12


def test_leung_beats_bare_qubit_at_small_damping():
    p = 0.05
    loss = petz_fidelity_loss(tensor_power(make_amplitude_damping(p), 4), leung_4qubit())
    assert loss < 2 * p**2 < p


@pytest.mark.parametrize("text,want", [("0.5", 0.5), ("-0.25", -0.25), ("0.1+0.2i", 0.1 + 0.2j),
                                        ("0.1-0.2i", 0.1 - 0.2j), ("0.3+0.4", 0.3 + 0.4j), (".5", 0.5)])
def test_parse_entry(text, want):
    assert abs(parse_entry(text) - want) < 1e-15


def test_parse_entry_rejects_garbage():
    with pytest.raises(ValueError):
        parse_entry("abc")


@pytest.mark.parametrize("name", TABLE_CODES)
def test_table_codes_load(name):
    code = load_table_code(name)
    assert code.dim == 2
    assert np.abs(code.basis.conj().T @ code.basis - np.eye(2)).max() < 1e-12


def test_get_code_names(tmp_path):
    assert get_code("leung").n_qubits == 4
    assert get_code("3q").n_qubits == 3
    assert get_code("5q").n_qubits == 5
    path = tmp_path / "c.json"
    path.write_text(leung_4qubit().to_json())
    assert np.abs(get_code(f"file:{path}").basis - leung_4qubit().basis).max() == 0
    with pytest.raises(ValueError):
        get_code("nope")
    with pytest.raises(ValueError):
        get_code("table:nope")
