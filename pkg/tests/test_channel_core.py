import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aqec.channel_core import (
    DampingDirection, QuantumChannel, apply, compose, conjugate, identity_channel, make_amplitude_damping,
    make_named, make_random_channel, make_rotated_amplitude_damping, tensor, tensor_power,
)

probs = st.floats(0.0, 1.0, allow_nan=False)


def rand_rho(dim, rng):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def choi(ch):
    d = ch.dim_in
    out = np.zeros((d * ch.dim_out, d * ch.dim_out), dtype=complex)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d))
            e[i, j] = 1
            out += np.kron(e, sum(k @ e @ k.conj().T for k in ch.kraus))
    return out


@given(probs)
def test_amplitude_damping_action(p):
    ch = make_amplitude_damping(p)
    rho = np.array([[0.3, 0.2 - 0.1j], [0.2 + 0.1j, 0.7]])
    # closed form: excited population decays by (1-p), coherence by sqrt(1-p)
    want = np.array([[0.3 + 0.7 * p, np.sqrt(1 - p) * rho[0, 1]], [np.sqrt(1 - p) * rho[1, 0], 0.7 * (1 - p)]])
    assert np.abs(apply(ch, rho) - want).max() < 1e-12


@given(probs, st.floats(0, np.pi), st.floats(0, 2 * np.pi))
@settings(max_examples=50)
def test_rotated_damping_is_conjugated_damping(g, theta, phi):
    d = DampingDirection(theta, phi)
    u = d.local_unitary()
    a = make_rotated_amplitude_damping(g, d)
    b = conjugate(make_amplitude_damping(g), u)
    assert np.abs(choi(a) - choi(b)).max() < 1e-12
    # the fixed point is |v><v|
    v, _ = d.vectors()
    rho = np.outer(v, v.conj())
    assert np.abs(apply(a, rho) - rho).max() < 1e-12


@given(st.floats(0, 1), st.integers(0, 10_000))
@settings(max_examples=30)
def test_random_channel_is_cptp(alpha, seed):
    ch = make_random_channel(alpha, seed)
    assert np.abs(ch.completeness() - np.eye(2)).max() < 1e-10
    assert np.linalg.eigvalsh(choi(ch)).min() > -1e-12


def test_random_channel_alpha_zero_is_identity():
    ch = make_random_channel(0.0, 3)
    rho = rand_rho(2, np.random.default_rng(0))
    assert np.abs(apply(ch, rho) - rho).max() < 1e-12


@pytest.mark.parametrize("name", ["bitflip", "phaseflip", "depolarizing"])
def test_named_channels(name):
    p = 0.3
    ch = make_named(name, p)
    rho = rand_rho(2, np.random.default_rng(1))
    x = np.array([[0, 1], [1, 0]])
    z = np.diag([1, -1])
    want = {
        "bitflip": (1 - p) * rho + p * x @ rho @ x,
        "phaseflip": (1 - p) * rho + p * z @ rho @ z,
        "depolarizing": (1 - p) * rho + p * np.eye(2) / 2,
    }[name]
    assert np.abs(apply(ch, rho) - want).max() < 1e-12


def test_tensor_power_matches_product_state_action():
    ch = make_amplitude_damping(0.2)
    rng = np.random.default_rng(2)
    a, b, c = (rand_rho(2, rng) for _ in range(3))
    got = apply(tensor_power(ch, 3), np.kron(np.kron(a, b), c))
    want = np.kron(np.kron(apply(ch, a), apply(ch, b)), apply(ch, c))
    assert np.abs(got - want).max() < 1e-12
    assert tensor_power(ch, 3).n_kraus == 8


def test_compose_order():
    ad = make_amplitude_damping(0.4)
    bf = make_named("bitflip", 1.0)
    rho = np.diag([0.0, 1.0])
    # damp first, then flip: |1> -> 0.4|0><0| + 0.6|1><1| -> swapped
    out = apply(compose(bf, ad), rho)
    assert np.abs(out - np.diag([0.6, 0.4])).max() < 1e-12


def test_invalid_inputs_rejected():
    with pytest.raises(ValueError):
        make_amplitude_damping(1.2)
    with pytest.raises(ValueError):
        QuantumChannel.from_kraus([np.eye(2), np.eye(2)])
    with pytest.raises(ValueError):
        apply(identity_channel(2), np.eye(2))
    with pytest.raises(ValueError):
        DampingDirection(4.0, 0.0)
    with pytest.raises(ValueError):
        make_named("erasure", 0.1)
    with pytest.raises(ValueError):
        tensor([])


def test_json_roundtrip():
    ch = make_random_channel(0.4, 7)
    back = QuantumChannel.from_json(ch.to_json())
    assert np.abs(choi(back) - choi(ch)).max() < 1e-14
