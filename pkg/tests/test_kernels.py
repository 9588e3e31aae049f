import os
import subprocess
import sys

import numpy as np
import pytest

from aqec import _kernels


def test_grid_min_paths_agree():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    gram = a @ a.conj().T
    th = np.linspace(0, np.pi, 37)
    ph = np.linspace(0, 2 * np.pi, 73)
    v0, i0, j0 = _kernels.grid_min_fidelity(gram, th, ph, use_numba=False)
    # direct evaluation at every grid point
    vals = np.empty((37, 73))
    for i, t in enumerate(th):
        for j, p in enumerate(ph):
            psi = np.array([np.cos(t / 2), np.exp(1j * p) * np.sin(t / 2)])
            w = np.outer(psi.conj(), psi).reshape(-1).conj()
            vals[i, j] = np.real(w.conj() @ gram @ w)
    assert abs(v0 - vals.min()) < 1e-12
    if _kernels.HAVE_NUMBA:
        v1, i1, j1 = _kernels.grid_min_fidelity(gram, th, ph, use_numba=True)
        assert abs(v1 - v0) < 1e-12 and (i1, j1) == (i0, j0)


@pytest.mark.parametrize("flag,expect", [("1", "False"), ("0", str(_kernels.HAVE_NUMBA))])
def test_disable_switch(flag, expect):
    env = dict(os.environ, AQEC_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "from aqec import _kernels; print(_kernels.USE_NUMBA)"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    assert out == expect
