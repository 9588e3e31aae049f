"""Kraus-form quantum channels and the named single-qubit noise models."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import reduce
from itertools import product

import numpy as np

CPTP_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def as_matrix(a) -> np.ndarray:
    m = np.array(a, dtype=complex)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("expected a nonempty 2-d matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def kron2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two matrices without np.kron's generic overhead."""
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1])


def kron_all(mats) -> np.ndarray:
    return reduce(kron2, [np.atleast_2d(m) for m in mats])


def ket(bits: str) -> np.ndarray:
    """Computational basis vector; qubit 0 is the leftmost character."""
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


def _check_prob(p, name="p"):
    if not (0.0 <= p <= 1.0) or not np.isfinite(p):
        raise ValueError(f"{name}={p} outside [0, 1]")


@dataclass(frozen=True)
class QuantumChannel:
    """Channel rho -> sum_i K_i rho K_i^dagger.

    ``support`` is None for trace-preserving channels. Recovery maps that are
    trace preserving only on a subspace carry the projector onto it there.
    """

    dim_in: int
    dim_out: int
    kraus: tuple
    support: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        ks = []
        for k in self.kraus:
            m = as_matrix(k)
            if m.shape != (self.dim_out, self.dim_in):
                raise ValueError(f"Kraus shape {m.shape} != {(self.dim_out, self.dim_in)}")
            m.setflags(write=False)
            ks.append(m)
        if not ks:
            raise ValueError("a channel needs at least one Kraus operator")
        object.__setattr__(self, "kraus", tuple(ks))
        target = np.eye(self.dim_in) if self.support is None else self.support
        dev = np.abs(self.completeness() - target).max()
        if dev > (CPTP_TOL if self.support is None else 1e-9):
            raise ValueError(f"Kraus set not trace preserving (deviation {dev:.2e})")

    @classmethod
    def from_kraus(cls, kraus, drop_zero=True, support=None) -> "QuantumChannel":
        ks = [as_matrix(k) for k in kraus]
        if drop_zero:
            kept = [k for k in ks if np.abs(k).max() > 0]
            ks = kept or ks[:1]
        return cls(ks[0].shape[1], ks[0].shape[0], tuple(ks), support)

    @property
    def n_kraus(self) -> int:
        return len(self.kraus)

    def stack(self) -> np.ndarray:
        return np.stack(self.kraus)

    def completeness(self) -> np.ndarray:
        k = self.stack()
        return np.einsum("kji,kjl->il", k.conj(), k)

    def to_json(self) -> str:
        return json.dumps(
            {
                "dim_in": self.dim_in,
                "dim_out": self.dim_out,
                "kraus": [[[[z.real, z.imag] for z in row] for row in k] for k in self.kraus],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "QuantumChannel":
        d = json.loads(text)
        ks = [np.array([[complex(re, im) for re, im in row] for row in k]) for k in d["kraus"]]
        ch = cls.from_kraus(ks, drop_zero=False)
        if (ch.dim_in, ch.dim_out) != (d["dim_in"], d["dim_out"]):
            raise ValueError("dimension fields disagree with Kraus shapes")
        return ch


def apply_unchecked(channel: QuantumChannel, rho: np.ndarray) -> np.ndarray:
    k = channel.stack()
    return np.einsum("kij,jl,kml->im", k, rho, k.conj())


def apply(channel: QuantumChannel, rho) -> np.ndarray:
    rho = as_matrix(rho)
    if rho.shape != (channel.dim_in, channel.dim_in):
        raise ValueError(f"state shape {rho.shape} does not match dim_in={channel.dim_in}")
    if np.abs(rho - dagger(rho)).max() > CPTP_TOL:
        raise ValueError("input state is not Hermitian")
    if abs(np.trace(rho) - 1) > CPTP_TOL:
        raise ValueError("input state does not have unit trace")
    return apply_unchecked(channel, rho)


def compose(second: QuantumChannel, first: QuantumChannel) -> QuantumChannel:
    """Channel second o first (first acts first)."""
    if first.dim_out != second.dim_in:
        raise ValueError("dimension mismatch in composition")
    ks = [b @ a for b, a in product(second.kraus, first.kraus)]
    support = None
    if first.support is not None or second.support is not None:
        support = sum(dagger(k) @ k for k in ks)
    return QuantumChannel.from_kraus(ks, support=support)


def identity_channel(dim: int) -> QuantumChannel:
    return QuantumChannel.from_kraus([np.eye(dim)])


def make_amplitude_damping(p: float) -> QuantumChannel:
    _check_prob(p)
    e0 = np.diag([1.0, np.sqrt(1 - p)]).astype(complex)
    e1 = np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)
    return QuantumChannel.from_kraus([e0, e1])


@dataclass(frozen=True)
class DampingDirection:
    theta: float
    phi: float

    def __post_init__(self):
        if not (0 <= self.theta <= np.pi + 1e-12):
            raise ValueError("theta outside [0, pi]")
        if not (0 <= self.phi <= 2 * np.pi + 1e-12):
            raise ValueError("phi outside [0, 2pi]")

    def vectors(self):
        c, s = np.cos(self.theta / 2), np.sin(self.theta / 2)
        ph = np.exp(1j * self.phi)
        v = np.array([c, ph * s])
        vp = np.array([-np.conj(ph) * s, c])
        return v, vp

    def local_unitary(self) -> np.ndarray:
        """U = |v><0| + |v_perp><1|; conjugating plain damping by U gives the rotated channel."""
        v, vp = self.vectors()
        return np.column_stack([v, vp])


def make_rotated_amplitude_damping(gamma: float, direction: DampingDirection) -> QuantumChannel:
    _check_prob(gamma, "gamma")
    v, vp = direction.vectors()
    e0 = np.outer(v, v.conj()) + np.sqrt(1 - gamma) * np.outer(vp, vp.conj())
    e1 = np.sqrt(gamma) * np.outer(v, vp.conj())
    return QuantumChannel.from_kraus([e0, e1])


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def make_random_channel(alpha: float, seed: int) -> QuantumChannel:
    """(1 - alpha) id + alpha Phi with Phi a Haar-random qubit channel."""
    _check_prob(alpha, "alpha")
    w = haar_unitary(4, np.random.default_rng(seed)).reshape(2, 2, 2, 2)
    # w[sys_out, anc_out, sys_in, anc_in]; ancilla starts in |0>
    phis = [w[:, k, :, 0] for k in range(2)]
    ks = [np.sqrt(1 - alpha) * I2] + [np.sqrt(alpha) * f for f in phis]
    return QuantumChannel.from_kraus(ks)


def make_named(name: str, p: float) -> QuantumChannel:
    _check_prob(p)
    if name == "bitflip":
        ks = [np.sqrt(1 - p) * I2, np.sqrt(p) * X]
    elif name == "phaseflip":
        ks = [np.sqrt(1 - p) * I2, np.sqrt(p) * Z]
    elif name == "depolarizing":
        ks = [np.sqrt(1 - 3 * p / 4) * I2] + [np.sqrt(p) * s / 2 for s in (X, Y, Z)]
    else:
        raise ValueError(f"unknown channel name {name!r}")
    return QuantumChannel.from_kraus(ks)


def tensor(channels) -> QuantumChannel:
    channels = list(channels)
    if not channels:
        raise ValueError("tensor needs at least one channel")
    ks = [kron_all(combo) for combo in product(*(c.kraus for c in channels))]
    return QuantumChannel.from_kraus(ks, drop_zero=False)


def tensor_power(channel: QuantumChannel, n: int) -> QuantumChannel:
    return tensor([channel] * n)


def conjugate(channel: QuantumChannel, u: np.ndarray) -> QuantumChannel:
    """Channel U E(U^dag . U) U^dag."""
    return QuantumChannel.from_kraus([u @ k @ dagger(u) for k in channel.kraus], drop_zero=False)
