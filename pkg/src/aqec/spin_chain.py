"""Single-excitation dynamics of spin chains, the induced damping channel,
AQEC-protected transfer, and static coupling disorder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from . import _kernels
from .channel_core import QuantumChannel, identity_channel, tensor_power
from .code_library import FIVE_QUBIT_STABILIZERS, leung_4qubit as leung_code, syndrome_recovery
from .qec_petz import (
    PAULIS,
    Codespace,
    loss_from_t,
    m_matrix,
    petz_code_kraus,
    petz_recovery,
    real_m,
    worst_case_from_m,
    worst_case_fidelity,
)


@dataclass(frozen=True)
class ChainSpec:
    """H = -sum J_k (XX + YY) - sum Jt_k ZZ + sum B_k Z on N sites; s, r are 1-based."""

    N: int
    J: tuple
    Jt: tuple
    B: tuple
    s: int = 1
    r: int | None = None

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("a chain needs at least two sites")
        r = self.N if self.r is None else self.r
        object.__setattr__(self, "r", r)
        for name, vals, k in (("J", self.J, self.N - 1), ("Jt", self.Jt, self.N - 1), ("B", self.B, self.N)):
            if len(vals) != k:
                raise ValueError(f"{name} needs {k} entries")
            object.__setattr__(self, name, tuple(float(v) for v in vals))
        if not (1 <= self.s <= self.N and 1 <= r <= self.N):
            raise ValueError(f"sites s={self.s}, r={r} outside 1..{self.N}")


def xxx_chain(N: int, s: int = 1, r: int | None = None, delta=None) -> ChainSpec:
    """Heisenberg chain with J = Jt = (1 + Delta_k)/2 and no field."""
    d = np.zeros(N - 1) if delta is None else np.asarray(delta, float)
    j = tuple((1 + d) / 2)
    return ChainSpec(N, j, j, (0.0,) * N, s, r)


def build_single_excitation_hamiltonian(spec: ChainSpec) -> np.ndarray:
    """Matrix of H on {|j>} measured from the |0...0> energy."""
    n = spec.N
    h = np.zeros((n, n))
    jt = np.asarray(spec.Jt)
    for k in range(n - 1):
        h[k, k + 1] = h[k + 1, k] = -2.0 * spec.J[k]
    diag = -2.0 * np.asarray(spec.B)
    diag[:-1] += 2 * jt
    diag[1:] += 2 * jt
    h[np.diag_indices(n)] = diag
    return h


def _xxx_hamiltonians(N: int, deltas: np.ndarray) -> np.ndarray:
    """Batch of disordered XXX single-excitation matrices, deltas shape (S, N-1)."""
    S = deltas.shape[0]
    jk = (1 + deltas) / 2
    h = np.zeros((S, N, N))
    idx = np.arange(N - 1)
    h[:, idx, idx + 1] = -2 * jk
    h[:, idx + 1, idx] = -2 * jk
    h[:, idx, idx] += 2 * jk
    h[:, idx + 1, idx + 1] += 2 * jk
    return h


@dataclass(frozen=True)
class TransitionRecord:
    t: float
    f: complex

    def __post_init__(self):
        if abs(self.f) > 1 + 1e-9:
            raise ValueError(f"|f| = {abs(self.f)} exceeds 1")

    @property
    def magnitude(self) -> float:
        return abs(self.f)

    @property
    def phase(self) -> float:
        return float(np.angle(self.f))

    @property
    def p(self) -> float:
        return float(1 - abs(self.f) ** 2)


def propagator(spec: ChainSpec, t: float) -> np.ndarray:
    w, u = np.linalg.eigh(build_single_excitation_hamiltonian(spec))
    return (u * np.exp(-1j * w * t)) @ u.T


def transition_amplitude(spec: ChainSpec, t: float) -> TransitionRecord:
    if t < 0:
        raise ValueError("time must be nonnegative")
    w, u = np.linalg.eigh(build_single_excitation_hamiltonian(spec))
    f = np.sum(u[spec.r - 1] * u[spec.s - 1] * np.exp(-1j * w * t))
    return TransitionRecord(float(t), complex(f))


def amplitude_trace(spec: ChainSpec, times: np.ndarray, chunk: int = 200_000) -> np.ndarray:
    w, u = np.linalg.eigh(build_single_excitation_hamiltonian(spec))
    amp = u[spec.r - 1] * u[spec.s - 1]
    out = np.empty(len(times), dtype=complex)
    for a in range(0, len(times), chunk):
        tt = np.asarray(times[a:a + chunk])
        out[a:a + chunk] = np.exp(-1j * np.outer(tt, w)) @ amp
    return out


DISORDER_HORIZON = 100.0


def optimal_time(spec: ChainSpec, tmax: float = 4000.0, dt: float = 0.01) -> TransitionRecord:
    """Grid maximizer of |f| over (0, tmax]."""
    times = dt * np.arange(1, int(round(tmax / dt)) + 1)
    f = amplitude_trace(spec, times)
    k = int(np.argmax(np.abs(f)))
    return TransitionRecord(float(times[k]), complex(f[k]))


def induced_channel(rec: TransitionRecord) -> QuantumChannel:
    f = rec.f
    if abs(f) > 1 + 1e-9:
        raise ValueError("|f| > 1")
    mag2 = min(abs(f) ** 2, 1.0)
    e0 = np.array([[1, 0], [0, f]], dtype=complex)
    e1 = np.array([[0, np.sqrt(1 - mag2)], [0, 0]], dtype=complex)
    return QuantumChannel.from_kraus([e0, e1])


def noqec_fidelity(rec: TransitionRecord, compensated: bool = True) -> float:
    """Worst-case squared fidelity of the bare transfer; |f|^2 after phase compensation."""
    if compensated:
        return float(abs(rec.f) ** 2)
    ch = induced_channel(rec)
    return worst_case_fidelity(ch, identity_channel(2), Codespace(np.eye(2)))


def aqec_transfer_fidelity(rec: TransitionRecord, code: Codespace, recovery: str = "petz") -> float:
    """Worst-case squared fidelity of recovery o (induced channel)^{x n} on the code."""
    ch = tensor_power(induced_channel(rec), code.n_qubits)
    if recovery == "petz":
        return 1.0 - loss_from_t(real_m(m_matrix(petz_code_kraus(ch, code)))[1:, 1:])
    if recovery == "stabilizer":
        if code.n_qubits != 5:
            raise ValueError("stabilizer recovery is wired for the five-qubit code")
        # the five-qubit protocol cancels the phase before decoding
        ch = tensor_power(induced_channel(TransitionRecord(rec.t, abs(rec.f))), 5)
        return worst_case_fidelity(ch, syndrome_recovery(code, FIVE_QUBIT_STABILIZERS), code)
    raise ValueError(f"unknown recovery {recovery!r}")


def code_m_matrix(rec: TransitionRecord, code: Codespace) -> np.ndarray:
    ch = tensor_power(induced_channel(rec), code.n_qubits)
    return m_matrix(petz_code_kraus(ch, code))


def repeated_qec(p: float, alpha: float, k: int) -> float:
    """1 - p_new with p_new = 1 - (1 - alpha p^2)^k."""
    if not 0 <= p <= 1:
        raise ValueError("p outside [0, 1]")
    if k < 1:
        raise ValueError("k must be >= 1")
    if alpha * p * p > 1:
        raise ValueError("alpha p^2 > 1")
    return float((1 - alpha * p * p) ** k)


def repeated_transfer(segment: ChainSpec, total_length: int, tmax: float = 4000.0, dt: float = 0.01) -> dict:
    """Relay over total_length sites with a QEC round after every segment hop.

    Each hop covers segment.N - 1 sites in the segment's optimal time, so the
    hop count is ceil((total_length - 1) / (segment.N - 1)).
    """
    if total_length < 2:
        raise ValueError("total length must be at least 2")
    hops = -(-(total_length - 1) // (segment.N - 1))
    rec = optimal_time(segment, tmax, dt)
    p = rec.p
    leung = aqec_transfer_fidelity(rec, leung_code())
    return {
        "hops": hops,
        "t_hop": rec.t,
        "p": p,
        "F2_noqec": (1 - p) ** hops,
        "F2_repeated_formula": repeated_qec(p, 7 / 4, hops) if 7 / 4 * p * p <= 1 else float("nan"),
        "F2_repeated_exact": leung ** hops,
    }


# ---- disorder ----

@dataclass(frozen=True)
class DisorderSpec:
    delta: float
    n_samples: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("disorder strength must be nonnegative")
        if self.n_samples < 1:
            raise ValueError("need at least one sample")


def _require_xxx(spec: ChainSpec):
    if not (np.allclose(spec.J, 0.5) and np.allclose(spec.Jt, 0.5) and np.allclose(spec.B, 0.0)):
        raise ValueError("disorder model is defined on the uniform XXX chain")


def disorder_deltas(spec: ChainSpec, dis: DisorderSpec) -> np.ndarray:
    rng = np.random.default_rng(dis.seed)
    return rng.uniform(-dis.delta, dis.delta, size=(dis.n_samples, spec.N - 1))


def disorder_sample(spec: ChainSpec, t: float, dis: DisorderSpec, chunk: int = 4096) -> np.ndarray:
    """Transition amplitudes f_{r,s}(t) for i.i.d. uniform coupling disorder."""
    _require_xxx(spec)
    deltas = disorder_deltas(spec, dis)
    out = np.empty(dis.n_samples, dtype=complex)
    for a in range(0, dis.n_samples, chunk):
        hams = _xxx_hamiltonians(spec.N, deltas[a:a + chunk])
        out[a:a + chunk] = _kernels.batch_transfer(hams, t, spec.r - 1, spec.s - 1)
    return out


def site_probabilities(spec: ChainSpec, t: float, dis: DisorderSpec) -> np.ndarray:
    """Disorder average of |f_{n,s}(t)|^2 for every site n."""
    _require_xxx(spec)
    hams = _xxx_hamiltonians(spec.N, disorder_deltas(spec, dis))
    w, u = np.linalg.eigh(hams)
    col = np.einsum("bnk,bk,bk->bn", u, u[:, spec.s - 1, :], np.exp(-1j * w * t))
    return np.mean(np.abs(col) ** 2, axis=0)


def bond_perturbations(N: int) -> np.ndarray:
    """dH/dDelta_i for the XXX chain, shape (N-1, N, N)."""
    v = np.zeros((N - 1, N, N))
    for i in range(N - 1):
        v[i, i, i + 1] = v[i, i + 1, i] = -1.0
        v[i, i, i] = v[i, i + 1, i + 1] = 1.0
    return v


def simpson_panels(t: float, spectral_width: float, minimum: int = 2000) -> int:
    """Even panel count resolving the fastest integrand oscillation (~20 points per period)."""
    p = max(minimum, int(np.ceil(20 * t * max(spectral_width, 1.0) / (2 * np.pi))) * 2)
    return p + (p % 2)


def dyson_coefficients(spec: ChainSpec, t: float, panels: int | None = None, chunk: int = 20_000) -> np.ndarray:
    """c_i = -i int_0^t [e^{-iH0(t-t')} V_i e^{-iH0 t'}]_{rs} dt' by composite Simpson."""
    _require_xxx(spec)
    h0 = build_single_excitation_hamiltonian(spec)
    w, u = np.linalg.eigh(h0)
    vt = np.einsum("ka,ikl,lb->iab", u, bond_perturbations(spec.N), u)
    ur, us = u[spec.r - 1], u[spec.s - 1]
    if t == 0:
        return np.zeros(spec.N - 1, dtype=complex)
    n = panels or simpson_panels(t, w.max() - w.min())
    if n % 2:
        n += 1
    grid = np.linspace(0.0, t, n + 1)
    weights = np.ones(n + 1)
    weights[1:-1:2] = 4
    weights[2:-1:2] = 2
    weights *= t / (3 * n)
    total = np.zeros(spec.N - 1, dtype=complex)
    for a in range(0, n + 1, chunk):
        tp = grid[a:a + chunk]
        left = ur * np.exp(-1j * np.outer(t - tp, w))
        right = us * np.exp(-1j * np.outer(tp, w))
        g = np.einsum("tk,ikl,tl->it", left, vt, right)
        total += g @ weights[a:a + chunk]
    return -1j * total


def dyson_coefficients_exact(spec: ChainSpec, t: float) -> np.ndarray:
    """Closed form through divided differences of exp(-i w t) (Frechet derivative)."""
    _require_xxx(spec)
    w, u = np.linalg.eigh(build_single_excitation_hamiltonian(spec))
    vt = np.einsum("ka,ikl,lb->iab", u, bond_perturbations(spec.N), u)
    e = np.exp(-1j * w * t)
    dw = w[:, None] - w[None, :]
    close = np.abs(dw) < 1e-12
    safe = np.where(close, 1.0, dw)
    dd = np.where(close, -1j * t * e[:, None], (e[:, None] - e[None, :]) / safe)
    weights = u[spec.r - 1][:, None] * u[spec.s - 1][None, :] * dd
    return np.einsum("ab,iab->i", weights, vt)


# ---- first-order density of f ----

@dataclass(frozen=True)
class PiecewiseDensity:
    """Density x -> g((x - loc) / scale) / scale with g piecewise polynomial.

    g equals pieces[j] on [breaks[j], breaks[j+1]] and vanishes outside. The
    normalized coordinates keep the polynomials well conditioned.
    """

    breaks: np.ndarray
    pieces: tuple
    loc: float = 0.0
    scale: float = 1.0

    def _g(self, y):
        out = np.zeros_like(y)
        last = len(self.pieces) - 1
        for j, poly in enumerate(self.pieces):
            lo, hi = self.breaks[j], self.breaks[j + 1]
            m = (y >= lo) & ((y < hi) if j < last else (y <= hi))
            out[m] = poly(y[m])
        return out

    def __call__(self, x):
        y = (np.asarray(x, float) - self.loc) / self.scale
        return self._g(y) / self.scale

    def _moment_g(self, k: int) -> float:
        acc = 0.0
        for j, poly in enumerate(self.pieces):
            q = (poly * Polynomial([0, 1]) ** k).integ()
            acc += q(self.breaks[j + 1]) - q(self.breaks[j])
        return float(acc)

    def total(self) -> float:
        return self._moment_g(0)

    def mean(self) -> float:
        return self.loc + self.scale * self._moment_g(1) / self.total()

    def variance(self) -> float:
        m0 = self.total()
        m1 = self._moment_g(1) / m0
        return self.scale**2 * (self._moment_g(2) / m0 - m1 * m1)

    def cdf(self, x) -> np.ndarray:
        y = (np.atleast_1d(np.asarray(x, float)) - self.loc) / self.scale
        out = np.zeros_like(y)
        acc = 0.0
        for j, poly in enumerate(self.pieces):
            lo, hi = self.breaks[j], self.breaks[j + 1]
            q = poly.integ()
            inside = (y >= lo) & (y < hi)
            out[inside] = acc + q(y[inside]) - q(lo)
            acc += q(hi) - q(lo)
            out[y >= hi] = acc
        return out

    def bin_probabilities(self, edges) -> np.ndarray:
        return np.diff(self.cdf(np.asarray(edges, float)))

    @property
    def support(self) -> tuple:
        return (self.loc + self.scale * self.breaks[0], self.loc + self.scale * self.breaks[-1])


@dataclass(frozen=True)
class PointMass:
    location: float

    def mean(self) -> float:
        return self.location

    def variance(self) -> float:
        return 0.0

    def total(self) -> float:
        return 1.0


def _box(w: float) -> PiecewiseDensity:
    return PiecewiseDensity(np.array([-w, w]), (Polynomial([1.0 / (2 * w)]),))


def _convolve_box(g: PiecewiseDensity, w: float) -> PiecewiseDensity:
    """h(x) = (G(x + w) - G(x - w)) / (2w) with G the CDF of g."""
    b = g.breaks
    prims = []
    acc = 0.0
    for j, poly in enumerate(g.pieces):
        q = poly.integ()
        prims.append(q - q(b[j]) + acc)
        acc = acc + q(b[j + 1]) - q(b[j])
    total = acc

    def cdf_piece(x_lo, x_hi):
        mid = 0.5 * (x_lo + x_hi)
        if mid <= b[0]:
            return Polynomial([0.0])
        if mid >= b[-1]:
            return Polynomial([total])
        j = int(np.searchsorted(b, mid, side="right") - 1)
        return prims[j]

    nb = np.unique(np.concatenate([b - w, b + w]))
    pieces = []
    for lo, hi in zip(nb[:-1], nb[1:]):
        up = cdf_piece(lo + w, hi + w)(Polynomial([w, 1.0]))
        dn = cdf_piece(lo - w, hi - w)(Polynomial([-w, 1.0]))
        pieces.append((up - dn) / (2 * w))
    return PiecewiseDensity(nb, tuple(pieces))


def weighted_uniform_sum_density(weights, tol: float = 1e-14):
    """Density of sum_i a_i U_i, U_i ~ U[-1, 1] independent; PointMass if all a_i vanish."""
    a = np.abs(np.asarray(weights, float))
    scale = a.max(initial=0.0)
    a = a[a > tol * max(scale, 1e-300)]
    if a.size == 0:
        return PointMass(0.0)
    y = a / scale
    dens = _box(y[0])
    for w in y[1:]:
        dens = _convolve_box(dens, w)
    return PiecewiseDensity(dens.breaks, dens.pieces, 0.0, float(scale))


def first_order_density(spec: ChainSpec, t: float, delta: float, component: str = "re", coeffs=None):
    """Density of comp(f0) + sum_i comp(c_i) Delta_i with Delta_i ~ U[-delta, delta]."""
    if component not in ("re", "im"):
        raise ValueError("component must be 're' or 'im'")
    c = dyson_coefficients(spec, t) if coeffs is None else np.asarray(coeffs)
    f0 = transition_amplitude(spec, t).f
    pick = np.real if component == "re" else np.imag
    center = float(pick(f0))
    dens = weighted_uniform_sum_density(delta * pick(c))
    if isinstance(dens, PointMass):
        return PointMass(center)
    return PiecewiseDensity(dens.breaks, dens.pieces, center, dens.scale)


# ---- AQEC with a recovery built from the disorder-averaged amplitude ----

def _apply_local_batch(op: np.ndarray, kraus: np.ndarray) -> np.ndarray:
    """Apply per-qubit channels kraus (S, n, K, 2, 2) to operators op (S, 2^n, 2^n)."""
    S, n = kraus.shape[:2]
    t = op.reshape((S,) + (2,) * (2 * n))
    for q in range(n):
        t = np.moveaxis(t, (1 + q, 1 + n + q), (-2, -1))
        k = kraus[:, q]
        t = np.einsum("skab,s...bc,skdc->s...ad", k, t, k.conj())
        t = np.moveaxis(t, (-2, -1), (1 + q, 1 + n + q))
    return t.reshape(S, 2**n, 2**n)


def _damping_kraus(fs: np.ndarray) -> np.ndarray:
    """Kraus stacks (..., 2, 2, 2) of the induced channel for an array of amplitudes."""
    fs = np.asarray(fs, complex)
    k = np.zeros(fs.shape + (2, 2, 2), dtype=complex)
    k[..., 0, 0, 0] = 1.0
    k[..., 0, 1, 1] = fs
    k[..., 1, 0, 1] = np.sqrt(np.clip(1 - np.abs(fs) ** 2, 0, None))
    return k


def mismatched_m_matrices(recovery: QuantumChannel, code: Codespace, fs: np.ndarray) -> np.ndarray:
    """Pauli-basis matrices of recovery o (E_f1 x ... x E_fn) on the code.

    fs has shape (S, n): one amplitude per physical qubit and sample.
    """
    n = code.n_qubits
    fs = np.asarray(fs, complex)
    if fs.ndim == 1:
        fs = np.repeat(fs[:, None], n, axis=1)
    if fs.shape[1] != n:
        raise ValueError(f"need {n} amplitudes per sample")
    S = fs.shape[0]
    frame = [code.basis @ s @ code.basis.conj().T for s in PAULIS]
    rs = recovery.stack()
    g = np.stack([np.einsum("kji,jl,klm->im", rs.conj(), s, rs) for s in frame])
    kraus = _damping_kraus(fs)
    m = np.empty((S, 4, 4), dtype=complex)
    for b, sb in enumerate(frame):
        out = _apply_local_batch(np.broadcast_to(sb, (S,) + sb.shape).copy(), kraus)
        m[:, :, b] = 0.5 * np.einsum("aij,sji->sa", g, out)
    return m


def disorder_avg_recovery_fidelity(spec: ChainSpec, t: float, dis: DisorderSpec, code: Codespace,
                                   chunk: int = 2000, return_samples: bool = False):
    """<F^2_min> with the Petz map of the mean-amplitude channel.

    Each code qubit travels along its own chain; the chains carry independent
    disorder, so one sample draws n_qubits independent amplitudes.
    """
    n = code.n_qubits
    draws = DisorderSpec(dis.delta, dis.n_samples * n, dis.seed)
    fs = disorder_sample(spec, t, draws).reshape(dis.n_samples, n)
    fbar = complex(np.mean(fs))
    ch_avg = tensor_power(induced_channel(TransitionRecord(t, fbar)), n)
    rec = petz_recovery(ch_avg, code)
    vals = np.empty(dis.n_samples)
    for a in range(0, dis.n_samples, chunk):
        ms = mismatched_m_matrices(rec, code, fs[a:a + chunk])
        vals[a:a + chunk] = [worst_case_from_m(m) for m in ms]
    mean = float(vals.mean())
    return (mean, vals) if return_samples else mean


