"""Codespaces, Petz recovery, worst-case fidelity and QEC condition checks."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .channel_core import I2, X, Y, Z, QuantumChannel, dagger

PAULIS = np.stack([I2, X, Y, Z])
SUPPORT_TOL = 1e-10
IMAG_TOL = 1e-9


@dataclass(frozen=True)
class Codespace:
    """Orthonormal codewords stored as the columns of ``basis`` (D x d)."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.array(self.basis, dtype=complex)
        if b.ndim != 2 or b.shape[1] > b.shape[0]:
            raise ValueError("basis must be D x d with d <= D")
        dev = np.abs(dagger(b) @ b - np.eye(b.shape[1])).max()
        if dev > 1e-10:
            raise ValueError(f"codewords not orthonormal (deviation {dev:.2e})")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def from_codewords(cls, words) -> "Codespace":
        return cls(np.column_stack([np.asarray(w, dtype=complex) for w in words]))

    @property
    def phys_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.phys_dim)))

    @property
    def codewords(self):
        return [self.basis[:, i] for i in range(self.dim)]

    def projector(self) -> np.ndarray:
        return self.basis @ dagger(self.basis)

    def pauli_frame(self) -> dict:
        """Logical Paulis sigma_a = V s_a V^dag supported on the codespace."""
        if self.dim != 2:
            raise ValueError("Pauli frame needs a qubit code")
        v = self.basis
        return {k: v @ s @ dagger(v) for k, s in zip("0xyz", PAULIS)}

    def to_json(self) -> str:
        return json.dumps(
            {
                "phys_dim": self.phys_dim,
                "codewords": [[[z.real, z.imag] for z in w] for w in self.codewords],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Codespace":
        d = json.loads(text)
        words = [[complex(re, im) for re, im in w] for w in d["codewords"]]
        code = cls.from_codewords(words)
        if code.phys_dim != d["phys_dim"]:
            raise ValueError("phys_dim disagrees with codeword length")
        return code


def _check_dims(channel: QuantumChannel, code: Codespace):
    if channel.dim_in != code.phys_dim or channel.dim_out != code.phys_dim:
        raise ValueError(
            f"channel dims ({channel.dim_in}, {channel.dim_out}) do not match code dimension {code.phys_dim}"
        )


def inv_sqrt_on_support(a: np.ndarray, tol: float = SUPPORT_TOL):
    """Return (a^{-1/2} on its support, projector onto the support)."""
    w, u = np.linalg.eigh(a)
    wmax = w.max(initial=0.0)
    if wmax <= 0:
        raise ValueError("operator is numerically zero; recovery undefined")
    keep = w > tol * wmax
    us = u[:, keep]
    return (us / np.sqrt(w[keep])) @ dagger(us), us @ dagger(us)


def petz_recovery(channel: QuantumChannel, code: Codespace, tol: float = SUPPORT_TOL) -> QuantumChannel:
    """Kraus R_i = P E_i^dag E(P)^{-1/2}."""
    _check_dims(channel, code)
    p = code.projector()
    ks = channel.stack()
    ep = np.einsum("kij,jl,kml->im", ks, p, ks.conj())
    q, support = inv_sqrt_on_support(ep, tol)
    rs = [p @ dagger(e) @ q for e in channel.kraus]
    return QuantumChannel.from_kraus(rs, support=support)


def code_kraus(channel: QuantumChannel, recovery: QuantumChannel, code: Codespace) -> np.ndarray:
    """Kraus operators of recovery o channel in the code frame, shape (K, d, d)."""
    _check_dims(channel, code)
    v = code.basis
    ev = np.einsum("kij,jl->kil", channel.stack(), v)
    vr = np.einsum("ji,kjl->kil", v.conj(), recovery.stack())
    a = np.einsum("rij,ejl->reil", vr, ev)
    return a.reshape(-1, code.dim, code.dim)


def petz_code_kraus(channel: QuantumChannel, code: Codespace, tol: float = SUPPORT_TOL) -> np.ndarray:
    """Code-frame Kraus operators of Petz o channel without forming the recovery.

    With W = [E_1 V, ..., E_K V] = U S Vh, the blocks of Vh^dag S Vh are
    exactly V^dag R_i E_j V.
    """
    _check_dims(channel, code)
    return _petz_blocks(channel.stack(), code.basis, tol)


def _petz_blocks(ks: np.ndarray, v: np.ndarray, tol: float) -> np.ndarray:
    nk, dim = ks.shape[0], v.shape[1]
    w = np.einsum("kij,jl->ikl", ks, v).reshape(ks.shape[1], nk * dim)
    _, s, vh = np.linalg.svd(w, full_matrices=False)
    if s[0] <= 0:
        raise ValueError("E(P) is numerically zero; recovery undefined")
    keep = s**2 > tol * s[0] ** 2
    vh = vh[keep]
    g = (vh.conj().T * s[keep]) @ vh
    return g.reshape(nk, dim, nk, dim).transpose(0, 2, 1, 3).reshape(nk * nk, dim, dim)


_PVEC = PAULIS.reshape(4, 4).T.copy()  # column b = row-major vec(s_b)


def m_matrix(akraus: np.ndarray) -> np.ndarray:
    """Complex 4x4 M_ab = 1/2 tr(s_a M(s_b)) for a qubit map with Kraus ``akraus``.

    Uses vec(A S A^dag) = (A kron conj(A)) vec(S) with row-major vec.
    """
    liou = np.einsum("kij,klm->iljm", akraus, akraus.conj()).reshape(4, 4)
    return 0.5 * (_PVEC.conj().T @ liou @ _PVEC)


def m_matrix_reference(akraus: np.ndarray) -> np.ndarray:
    """Direct trace formula for M, used as a cross-check."""
    t = np.einsum("kij,bjl,kml->bim", akraus, PAULIS, akraus.conj())
    return 0.5 * np.einsum("aij,bji->ab", PAULIS, t)


def real_m(m: np.ndarray) -> np.ndarray:
    im = np.abs(m.imag).max()
    if im > IMAG_TOL:
        raise ValueError(f"M matrix has imaginary residue {im:.2e}; map is not Hermiticity preserving")
    return m.real


def t_matrix(channel: QuantumChannel, recovery: QuantumChannel, code: Codespace) -> np.ndarray:
    if code.dim != 2:
        raise ValueError("T matrix needs a qubit code")
    return real_m(m_matrix(code_kraus(channel, recovery, code)))[1:, 1:]


def loss_from_t(t: np.ndarray) -> float:
    ts = 0.5 * (t + t.T)
    return float(np.clip(0.5 * (1 - np.linalg.eigvalsh(ts)[0]), 0.0, 1.0))


def fidelity_loss(channel: QuantumChannel, recovery: QuantumChannel, code: Codespace) -> float:
    """eta = (1 - t_min)/2; the worst-case squared fidelity is 1 - eta."""
    return loss_from_t(t_matrix(channel, recovery, code))


def petz_fidelity_loss(channel: QuantumChannel, code: Codespace) -> float:
    if code.dim != 2:
        raise ValueError("fidelity loss needs a qubit code")
    return loss_from_t(real_m(m_matrix(petz_code_kraus(channel, code)))[1:, 1:])


def min_fidelity_squared(channel, recovery, code) -> float:
    return 1.0 - fidelity_loss(channel, recovery, code)


def min_fidelity(channel, recovery, code) -> float:
    """Unsquared worst-case fidelity."""
    return float(np.sqrt(min_fidelity_squared(channel, recovery, code)))


def worst_case_from_m(m: np.ndarray) -> float:
    """Exact min over pure qubit states of <psi|M(psi)|psi>, M given in the Pauli basis.

    F(r) = (c + b.r + r^T S r)/2 on the unit sphere, solved through the
    trust-region secular equation. Covers maps that are not unital.
    """
    m = real_m(m) if np.iscomplexobj(m) else m
    c = m[0, 0]
    b = m[0, 1:] + m[1:, 0]
    s = 0.5 * (m[1:, 1:] + m[1:, 1:].T)
    lam, q = np.linalg.eigh(s)
    g = q.T @ b / 2
    lmin = lam[0]
    scale = max(1.0, np.abs(lam).max(), np.abs(g).max())
    degen = np.abs(lam - lmin) < 1e-12 * scale
    hard = np.linalg.norm(g[degen]) < 1e-14 * scale

    def radius2(mu):
        return np.sum(g**2 / (lam - mu) ** 2)

    if hard:
        rest = ~degen
        y = np.zeros(3)
        y[rest] = -g[rest] / (lam[rest] - lmin)
        r2 = y @ y
        if r2 <= 1.0:
            y[np.flatnonzero(degen)[0]] = np.sqrt(1.0 - r2)
            r = q @ y
            return float(0.5 * (c + b @ r + r @ s @ r))
    lo, hi = lmin - np.linalg.norm(g) - 1.0, lmin
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if radius2(mid) > 1.0:
            hi = mid
        else:
            lo = mid
    mu = 0.5 * (lo + hi)
    y = -g / (lam - mu)
    y /= np.linalg.norm(y)
    r = q @ y
    return float(0.5 * (c + b @ r + r @ s @ r))


def worst_case_fidelity(channel, recovery, code) -> float:
    """Exact worst-case squared fidelity, valid without unitality."""
    return worst_case_from_m(m_matrix(code_kraus(channel, recovery, code)))


def bloch_grid(grid=(181, 361)):
    nt, npf = grid
    return np.linspace(0, np.pi, nt), np.linspace(0, 2 * np.pi, npf)


def worst_case_fidelity_bruteforce(channel, recovery, code, grid=(181, 361)) -> float:
    """Minimum of <psi|M(psi)|psi> over a (theta, phi) grid of pure codestates."""
    if code.dim != 2:
        raise ValueError("brute-force fidelity needs a qubit code")
    return bruteforce_from_kraus(code_kraus(channel, recovery, code), grid)[0]


def bruteforce_from_kraus(akraus: np.ndarray, grid=(181, 361)):
    """Returns (min fidelity, theta, phi) for code-frame Kraus operators."""
    a = akraus.reshape(akraus.shape[0], 4)
    gram = np.einsum("ka,kb->ab", a.conj(), a)
    thetas, phis = bloch_grid(grid)
    val, i, j = _kernels.grid_min_fidelity(gram, thetas, phis)
    return float(val), float(thetas[i]), float(phis[j])


@dataclass(frozen=True)
class PerfectQecReport:
    satisfied: bool
    alpha: np.ndarray
    residual: float


def check_perfect_qec(code: Codespace, errors, tol: float = 1e-9) -> PerfectQecReport:
    es = np.stack([np.asarray(e, dtype=complex) for e in errors])
    if es.shape[1:] != (code.phys_dim, code.phys_dim):
        raise ValueError("error operators do not match the code dimension")
    p = code.projector()
    pe = np.einsum("kij,jl->kil", es, p)
    blocks = np.einsum("kji,ljm->klim", pe.conj(), pe)
    alpha = np.einsum("klii->kl", blocks) / code.dim
    resid = blocks - alpha[:, :, None, None] * p
    res = float(np.linalg.norm(resid, ord=2, axis=(2, 3)).max())
    return PerfectQecReport(res < tol, alpha, res)


@dataclass(frozen=True)
class AqecWitness:
    beta: np.ndarray
    delta_norm: np.ndarray

    def __str__(self):
        with np.printoptions(precision=5, suppress=True, linewidth=120):
            return f"beta =\n{self.beta}\nmax |Delta_ij| = {self.delta_norm.max():.3e}\n|Delta_ij| =\n{self.delta_norm}"


def check_aqec(code: Codespace, channel: QuantumChannel, tol: float = SUPPORT_TOL) -> AqecWitness:
    _check_dims(channel, code)
    p = code.projector()
    ks = channel.stack()
    ep = np.einsum("kij,jl,kml->im", ks, p, ks.conj())
    q, _ = inv_sqrt_on_support(ep, tol)
    pe = np.einsum("kij,jl->kil", ks, p)
    blocks = np.einsum("kji,jm,lmn->klin", pe.conj(), q, pe)
    beta = np.einsum("klii->kl", blocks) / code.dim
    delta = blocks - beta[:, :, None, None] * p
    return AqecWitness(beta, np.linalg.norm(delta, ord=2, axis=(2, 3)))
