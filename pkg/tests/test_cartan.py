import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aqec.cartan import (
    CircuitDescription, F_WORDS, J_WORDS, apply_unitary, build_unitary, circuit_unitary, commuting_exp,
    commuting_exp_product, emit_circuit, encode, n_params, params_from_vector, pauli_string_exp, pauli_word,
    phase_aligned_distance, random_params, su2,
)

seeds = st.integers(0, 2**31 - 1)


def expm_hermitian(h):
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w)) @ v.conj().T


def test_pauli_word_ordering():
    # qubit 0 is the leftmost Kronecker factor
    x = np.array([[0, 1], [1, 0]])
    assert np.abs(pauli_word("XI") - np.kron(x, np.eye(2))).max() == 0
    with pytest.raises(ValueError):
        pauli_word("XQ")


@given(st.floats(-7, 7))
def test_pauli_string_exp(theta):
    p = pauli_word("XYZ")
    assert np.abs(pauli_string_exp("XYZ", theta) - expm_hermitian(theta * p)).max() < 1e-12


@pytest.mark.parametrize("n", [3, 4])
@pytest.mark.parametrize("family", ["F", "J"])
def test_commuting_exp_matches_dense(n, family):
    words = (F_WORDS if family == "F" else J_WORDS)[n]
    c = np.random.default_rng(n).uniform(-3, 3, len(words))
    h = sum(ci * pauli_word(w) for ci, w in zip(c, words))
    want = expm_hermitian(h)
    assert np.abs(commuting_exp(words, c) - want).max() < 1e-12
    assert np.abs(commuting_exp_product(words, c) - want).max() < 1e-12


def test_noncommuting_words_rejected():
    with pytest.raises(ValueError):
        commuting_exp(("XI", "ZI"), (0.1, 0.2))


def test_su2_is_special_unitary():
    u = su2((0.3, 1.1, -2.0))
    assert np.abs(u @ u.conj().T - np.eye(2)).max() < 1e-14
    assert abs(np.linalg.det(u) - 1) < 1e-14


def test_parameter_counts():
    # unstructured: nonlocal head + 4 slots of (sub-block + Euler triple)
    assert [n_params(n) for n in (2, 3, 4)] == [15, 10 + 4 * 18, 22 + 4 * 85]
    assert [n_params(n, "structured_trivial") for n in (2, 3, 4)] == [3, 10 + 4 * 3, 22 + 4 * 22]
    with pytest.raises(ValueError):
        params_from_vector(3, np.zeros(5))


@given(seeds, st.sampled_from([2, 3, 4]), st.sampled_from(["unstructured", "structured_trivial"]))
@settings(max_examples=25, deadline=None)
def test_build_unitary_is_unitary_and_matches_apply(seed, n, mode):
    rng = np.random.default_rng(seed)
    p = random_params(n, rng, mode)
    u = build_unitary(p)
    assert np.abs(u @ u.conj().T - np.eye(2**n)).max() < 1e-10
    v = rng.normal(size=(2**n, 2)) + 1j * rng.normal(size=(2**n, 2))
    assert np.abs(apply_unitary(p, v) - u @ v).max() < 1e-10


def test_zero_parameters_give_identity():
    for n in (2, 3, 4):
        p = params_from_vector(n, np.zeros(n_params(n)))
        assert np.abs(build_unitary(p) - np.eye(2**n)).max() < 1e-14


def test_encode_default_basis():
    code = encode(np.eye(8))
    assert code.basis[0, 0] == 1 and code.basis[4, 1] == 1
    with pytest.raises(ValueError):
        encode(np.ones((8, 8)))


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_emitted_circuit_reproduces_unitary(seed):
    p = random_params(3, np.random.default_rng(seed), "structured_trivial")
    circ = emit_circuit(p)
    assert phase_aligned_distance(circuit_unitary(circ), build_unitary(p)) < 1e-9
    back = CircuitDescription.from_text(3, circ.to_text())
    assert phase_aligned_distance(circuit_unitary(back), build_unitary(p)) < 1e-9


def test_emit_rejects_nontrivial_locals():
    with pytest.raises(ValueError):
        emit_circuit(random_params(3, np.random.default_rng(0), "unstructured"))
    with pytest.raises(ValueError):
        emit_circuit(random_params(4, np.random.default_rng(0), "structured_trivial"))
