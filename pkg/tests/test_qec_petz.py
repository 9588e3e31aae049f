import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aqec.channel_core import (
    apply, compose, haar_unitary, identity_channel, make_amplitude_damping, make_named, make_random_channel,
    tensor_power,
)
from aqec.cartan import pauli_word
from aqec.code_library import bitflip_3qubit, leung_4qubit
from aqec.qec_petz import (
    Codespace, check_aqec, check_perfect_qec, code_kraus, m_matrix, m_matrix_reference, petz_code_kraus,
    petz_fidelity_loss, petz_recovery, worst_case_fidelity, worst_case_fidelity_bruteforce, worst_case_from_m,
)


def petz_reference(channel, code):
    """Petz Kraus operators straight from the definition, via a full eigendecomposition."""
    p = code.projector()
    ep = sum(k @ p @ k.conj().T for k in channel.kraus)
    w, u = np.linalg.eigh(ep)
    keep = w > 1e-10 * w.max()
    inv = (u[:, keep] / np.sqrt(w[keep])) @ u[:, keep].conj().T
    return [p @ k.conj().T @ inv for k in channel.kraus]


def sampled_min_fidelity(akraus, n=200_000, seed=0):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    amp = np.einsum("ni,kij,nj->nk", psi.conj(), akraus, psi)
    return float((np.abs(amp) ** 2).sum(axis=1).min())


def random_code(n_qubits, rng):
    u = haar_unitary(2**n_qubits, rng)
    return Codespace(u[:, :2])


def test_petz_matches_definition():
    ch = tensor_power(make_amplitude_damping(0.15), 4)
    code = leung_4qubit()
    rec = petz_recovery(ch, code)
    ref = petz_reference(ch, code)
    assert np.abs(np.stack(rec.kraus) - np.stack(ref)).max() < 1e-10


def test_petz_code_kraus_matches_composition():
    rng = np.random.default_rng(3)
    ch = tensor_power(make_random_channel(0.3, 5), 3)
    code = random_code(3, rng)
    fast = petz_code_kraus(ch, code)
    slow = code_kraus(ch, petz_recovery(ch, code), code)
    assert np.abs(m_matrix(fast) - m_matrix(slow)).max() < 1e-10


def test_petz_is_trace_preserving_on_image():
    ch = tensor_power(make_amplitude_damping(0.3), 4)
    code = leung_4qubit()
    rec = petz_recovery(ch, code)
    rho = code.basis @ np.array([[0.5, 0.5], [0.5, 0.5]]) @ code.basis.conj().T
    out = apply(rec, apply(ch, rho))
    assert abs(np.trace(out) - 1) < 1e-12


def test_m_matrix_against_reference():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(6, 2, 2)) + 1j * rng.normal(size=(6, 2, 2))
    assert np.abs(m_matrix(a) - m_matrix_reference(a)).max() < 1e-12


def test_perfect_recovery_gives_unit_fidelity():
    code = bitflip_3qubit()
    errs = [pauli_word(w) for w in ("III", "XII", "IXI", "IIX")]
    assert check_perfect_qec(code, errs).satisfied
    weights = [0.7, 0.1, 0.1, 0.1]
    ch = type(identity_channel(8)).from_kraus([np.sqrt(w) * e for w, e in zip(weights, errs)])
    assert abs(worst_case_fidelity(ch, petz_recovery(ch, code), code) - 1) < 1e-12
    # two-qubit flips are not correctable
    assert not check_perfect_qec(code, errs + [pauli_word("XXI")]).satisfied


def test_leung_fidelity_frozen():
    # value cross-checked against sampled_min_fidelity below
    ch = tensor_power(make_amplitude_damping(0.1), 4)
    code = leung_4qubit()
    f = 1 - petz_fidelity_loss(ch, code)
    assert abs(f - 0.98331913) < 1e-7
    assert abs(sampled_min_fidelity(petz_code_kraus(ch, code)) - f) < 1e-5


@given(st.integers(0, 10_000), st.floats(0.01, 0.5))
@settings(max_examples=15, deadline=None)
def test_eigenformula_vs_sampling(seed, alpha):
    rng = np.random.default_rng(seed)
    code = random_code(2, rng)
    ch = tensor_power(make_random_channel(alpha, seed), 2)
    ak = petz_code_kraus(ch, code)
    exact = worst_case_from_m(m_matrix(ak))
    sampled = sampled_min_fidelity(ak, n=50_000, seed=seed)
    assert exact <= sampled + 1e-12
    assert sampled - exact < 2e-3


def test_non_unital_worst_case_off_axis():
    # plain damping without recovery: worst state is |1>, F = 1 - p
    p = 0.37
    code = Codespace(np.eye(2, dtype=complex))
    f = worst_case_fidelity(make_amplitude_damping(p), identity_channel(2), code)
    assert abs(f - (1 - p)) < 1e-12
    # depolarizing is unital and isotropic: F = 1 - p/2
    f = worst_case_fidelity(make_named("depolarizing", 0.2), identity_channel(2), code)
    assert abs(f - 0.9) < 1e-12


def test_bruteforce_upper_bounds_exact():
    ch = tensor_power(make_amplitude_damping(0.2), 4)
    code = leung_4qubit()
    rec = petz_recovery(ch, code)
    exact = worst_case_fidelity(ch, rec, code)
    brute = worst_case_fidelity_bruteforce(ch, rec, code, grid=(61, 121))
    assert exact <= brute + 1e-12
    assert brute - exact < 1e-3


def test_aqec_witness_exact_for_perfect_code():
    code = bitflip_3qubit()
    ch = tensor_power(make_named("bitflip", 0.1), 3)
    w = check_aqec(code, ch)
    # one- and zero-flip Kraus pairs satisfy the conditions exactly
    single = [0, 1, 2, 4]
    assert w.delta_norm[np.ix_(single, single)].max() < 1e-10
    assert w.delta_norm.max() > 1e-3


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        petz_recovery(make_amplitude_damping(0.1), leung_4qubit())
    with pytest.raises(ValueError):
        Codespace(np.ones((4, 2)))


def test_compose_with_supported_recovery():
    ch = tensor_power(make_amplitude_damping(0.1), 4)
    code = leung_4qubit()
    total = compose(petz_recovery(ch, code), ch)
    a = worst_case_fidelity(total, identity_channel(16), code)
    assert abs(a - (1 - petz_fidelity_loss(ch, code))) < 1e-12
