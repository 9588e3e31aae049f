"""Hot loops with numba and pure-numpy implementations.

Set ``AQEC_DISABLE_NUMBA=1`` to force the numpy path. Both paths are always
importable so they can be benchmarked against each other.
"""

from __future__ import annotations

import os

import numpy as np

JIT_OPTIONS = dict(nogil=True, cache=True, fastmath=False)

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("AQEC_DISABLE_NUMBA", "0").lower() not in ("1", "true", "yes")


def grid_min_fidelity_numpy(gram, thetas, phis):
    """min over the grid of w^H G w with w_ab = conj(psi_a) psi_b."""
    c = np.cos(thetas / 2)[:, None]
    s = np.sin(thetas / 2)[:, None] * np.exp(1j * phis)[None, :]
    c = np.broadcast_to(c, s.shape)
    w = np.stack([c * c, c * s, c * s.conj(), np.abs(s) ** 2], axis=-1)
    vals = np.einsum("...a,ab,...b->...", w.conj(), gram, w).real
    k = int(np.argmin(vals))
    i, j = divmod(k, len(phis))
    return vals[i, j], i, j


def batch_transfer_numpy(hams, t, r, s):
    """f = <r|exp(-iHt)|s> for a stack of real symmetric matrices (0-based r, s)."""
    w, u = np.linalg.eigh(hams)
    return np.einsum("bk,bk,bk->b", u[:, r, :], u[:, s, :], np.exp(-1j * w * t))


if HAVE_NUMBA:

    @numba.njit(**JIT_OPTIONS)
    def _grid_min_fidelity_jit(gram, thetas, phis):
        best = np.inf
        bi = 0
        bj = 0
        w = np.empty(4, dtype=np.complex128)
        for i in range(thetas.shape[0]):
            c = np.cos(thetas[i] / 2)
            sn = np.sin(thetas[i] / 2)
            for j in range(phis.shape[0]):
                s = sn * np.exp(1j * phis[j])
                w[0] = c * c
                w[1] = c * s
                w[2] = c * np.conj(s)
                w[3] = sn * sn
                acc = 0.0
                for a in range(4):
                    row = 0.0j
                    for b in range(4):
                        row += gram[a, b] * w[b]
                    acc += (np.conj(w[a]) * row).real
                if acc < best:
                    best = acc
                    bi = i
                    bj = j
        return best, bi, bj

    @numba.njit(**JIT_OPTIONS)
    def _batch_transfer_jit(hams, t, r, s):
        out = np.empty(hams.shape[0], dtype=np.complex128)
        for b in range(hams.shape[0]):
            w, u = np.linalg.eigh(hams[b])
            acc = 0.0j
            for k in range(w.shape[0]):
                acc += u[r, k] * u[s, k] * np.exp(-1j * w[k] * t)
            out[b] = acc
        return out


def grid_min_fidelity(gram, thetas, phis, use_numba=None):
    if use_numba if use_numba is not None else USE_NUMBA:
        v, i, j = _grid_min_fidelity_jit(np.ascontiguousarray(gram, dtype=np.complex128),
                                         np.asarray(thetas, float), np.asarray(phis, float))
        return float(v), int(i), int(j)
    return grid_min_fidelity_numpy(gram, thetas, phis)


def batch_transfer(hams, t, r, s, use_numba=None):
    if use_numba if use_numba is not None else USE_NUMBA:
        return _batch_transfer_jit(np.ascontiguousarray(hams, dtype=np.float64), float(t), int(r), int(s))
    return batch_transfer_numpy(hams, t, r, s)
