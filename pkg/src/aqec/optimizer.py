"""Nelder-Mead downhill simplex and the Cartan-parameter encoding search."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import cartan
from .channel_core import QuantumChannel, kron_all
from .qec_petz import Codespace, _petz_blocks, loss_from_t, m_matrix, real_m

SEARCH_MODES = ("structured_trivial", "structured_nontrivial", "unstructured")


@dataclass(frozen=True)
class NMConfig:
    alpha: float = 1.0
    beta: float = 2.0
    delta: float = 0.5
    sigma: float = 0.5
    max_iters: int = 50_000
    spread_tol: float = 1e-9
    degeneracy_check_every: int = 0  # 0 -> every m iterations

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 1 and 0 < self.delta < 1 and 0 < self.sigma < 1):
            raise ValueError("invalid Nelder-Mead coefficients")


@dataclass
class NMResult:
    best_x: np.ndarray
    best_value: float
    history: list
    iterations: int
    evaluations: int
    converged: bool


def random_simplex(m: int, rng: np.random.Generator, low=0.0, high=2 * np.pi) -> np.ndarray:
    return rng.uniform(low, high, size=(m + 1, m))


def _degenerate(simplex: np.ndarray) -> bool:
    d = simplex[1:] - simplex[0]
    s = np.linalg.svd(d, compute_uv=False)
    return s[-1] <= 1e-10 * max(s[0], 1e-300)


def nelder_mead(objective, simplex, config: NMConfig = NMConfig(), rng=None) -> NMResult:
    """Sort / reflect / expand / contract / shrink until the value spread drops below tol."""
    xs = np.array(simplex, dtype=float)
    m = xs.shape[1]
    if xs.shape != (m + 1, m):
        raise ValueError("simplex must have m+1 vertices of length m")
    rng = rng if rng is not None else np.random.default_rng(0)
    nevals = 0

    def f(x):
        nonlocal nevals
        nevals += 1
        v = float(objective(x))
        if not np.isfinite(v):
            raise FloatingPointError(f"objective returned {v}")
        return v

    fs = np.array([f(x) for x in xs])
    history = []
    check_every = config.degeneracy_check_every or max(m, 1)
    converged = False
    it = 0
    a, b, dlt, sg = config.alpha, config.beta, config.delta, config.sigma
    while it < config.max_iters:
        order = np.argsort(fs, kind="stable")
        xs, fs = xs[order], fs[order]
        if fs[-1] - fs[0] < config.spread_tol:
            converged = True
            break
        it += 1
        if m > 1 and it % check_every == 0 and _degenerate(xs):
            scale = max(np.abs(xs - xs[0]).max(), 1e-3)
            xs[1:] = xs[0] + rng.uniform(-scale, scale, size=(m, m))
            fs[1:] = [f(x) for x in xs[1:]]
            history.append(float(fs.min()))
            continue
        xbar = xs[:-1].mean(axis=0)
        xw = xs[-1]
        xr = xbar + a * (xbar - xw)
        fr = f(xr)
        if fs[0] <= fr < fs[-2]:
            xs[-1], fs[-1] = xr, fr
        elif fr < fs[0]:
            xe = xbar + b * (xr - xbar)
            fe = f(xe)
            xs[-1], fs[-1] = (xe, fe) if fe <= fr else (xr, fr)
        else:
            xc = xbar + dlt * (xw - xbar)
            fc = f(xc)
            if fc <= fr:
                xs[-1], fs[-1] = xc, fc
            else:
                xs[1:] = xs[0] + sg * (xs[1:] - xs[0])
                fs[1:] = [f(x) for x in xs[1:]]
        history.append(float(fs.min()))
    k = int(np.argmin(fs))
    return NMResult(xs[k].copy(), float(fs[k]), history, it, nevals, converged)


@dataclass(frozen=True)
class SearchConfig:
    mode: str = "structured_trivial"
    n_qubits: int = 4
    nm: NMConfig = field(default_factory=NMConfig)
    restarts: int = 20
    seed: int = 0
    final_local: np.ndarray | None = None  # single-qubit layer for structured_nontrivial
    workers: int | None = None

    def __post_init__(self):
        if self.mode not in SEARCH_MODES:
            raise ValueError(f"unknown search mode {self.mode!r}")
        if self.n_qubits not in (2, 3, 4):
            raise ValueError(f"unsupported qubit count {self.n_qubits}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.mode == "structured_nontrivial" and self.final_local is None:
            raise ValueError("structured_nontrivial needs final_local")


@dataclass
class SearchResult:
    code: Codespace
    fidelity_loss: float
    trace: list
    best_x: np.ndarray
    iterations: int
    restart: int
    config: SearchConfig
    restart_losses: list

    def to_json(self, channel_params: dict | None = None) -> str:
        return json.dumps(
            {
                "mode": self.config.mode,
                "n": self.config.n_qubits,
                "channel_params": channel_params or {},
                "best_fidelity_loss": self.fidelity_loss,
                "codewords": [[[z.real, z.imag] for z in w] for w in self.code.codewords],
                "iterations": self.iterations,
                "seed": self.config.seed,
                "restarts": self.config.restarts,
                "restart_losses": self.restart_losses,
            },
            sort_keys=True,
            indent=2,
        )

    def trace_csv(self) -> str:
        lines = ["iteration,best_value"]
        lines += [f"{i},{v!r}" for i, v in enumerate(self.trace)]
        return "\n".join(lines) + "\n"


def _cartan_mode(mode: str) -> str:
    return "unstructured" if mode == "unstructured" else "structured_trivial"


def make_objective(channel: QuantumChannel, config: SearchConfig):
    n = config.n_qubits
    if channel.dim_in != 2**n:
        raise ValueError(f"channel acts on dimension {channel.dim_in}, expected {2**n}")
    ks = channel.stack()
    cmode = _cartan_mode(config.mode)
    layer = None
    if config.mode == "structured_nontrivial":
        layer = kron_all([np.asarray(config.final_local, dtype=complex)] * n)
    v0 = np.column_stack(cartan.initial_basis(n))

    def codewords(x):
        v = cartan.apply_unitary(cartan.params_from_vector(n, x, cmode), v0)
        return v if layer is None else layer @ v

    def objective(x):
        a = _petz_blocks(ks, codewords(x), 1e-10)
        return loss_from_t(real_m(m_matrix(a))[1:, 1:])

    return objective, codewords


def run_search(channel: QuantumChannel, config: SearchConfig) -> SearchResult:
    objective, codewords = make_objective(channel, config)
    m = cartan.n_params(config.n_qubits, _cartan_mode(config.mode))
    seqs = np.random.SeedSequence(config.seed).spawn(config.restarts)

    def one(ss):
        rng = np.random.default_rng(ss)
        return nelder_mead(objective, random_simplex(m, rng), config.nm, rng)

    workers = config.workers or int(os.environ.get("AQEC_THREADS", "1"))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, seqs))
    else:
        results = [one(s) for s in seqs]
    losses = [r.best_value for r in results]
    k = int(np.argmin(losses))  # first minimum -> lowest restart index on ties
    best = results[k]
    v = codewords(best.best_x)
    q, _ = np.linalg.qr(v)  # re-orthonormalize away rounding
    code = Codespace(v if np.abs(v.conj().T @ v - np.eye(2)).max() < 1e-12 else q)
    return SearchResult(
        code=code,
        fidelity_loss=best.best_value,
        trace=best.history,
        best_x=best.best_x,
        iterations=best.iterations,
        restart=k,
        config=config,
        restart_losses=losses,
    )
