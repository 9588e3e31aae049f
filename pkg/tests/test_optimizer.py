import json

import numpy as np
import pytest

from aqec.channel_core import make_amplitude_damping, tensor_power
from aqec.optimizer import NMConfig, SearchConfig, make_objective, nelder_mead, random_simplex, run_search
from aqec.qec_petz import Codespace, petz_fidelity_loss


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def test_nelder_mead_rosenbrock():
    res = nelder_mead(rosenbrock, np.array([[-1.2, 1.0], [-1.0, 1.0], [-1.2, 1.2]]),
                      NMConfig(spread_tol=1e-16))
    assert res.converged
    assert np.abs(res.best_x - 1).max() < 1e-4
    # recorded best value never increases
    assert all(b <= a for a, b in zip(res.history, res.history[1:]))


def test_nelder_mead_quadratic_in_higher_dimension():
    c = np.arange(6.0)
    res = nelder_mead(lambda x: np.sum((x - c) ** 2), random_simplex(6, np.random.default_rng(0), -1, 1),
                      NMConfig(spread_tol=1e-14))
    assert np.abs(res.best_x - c).max() < 1e-4


def test_nelder_mead_respects_iteration_cap():
    res = nelder_mead(rosenbrock, np.array([[-1.2, 1.0], [-1.0, 1.0], [-1.2, 1.2]]), NMConfig(max_iters=5))
    assert res.iterations == 5 and not res.converged


def test_nelder_mead_rejects_bad_input():
    with pytest.raises(ValueError):
        nelder_mead(rosenbrock, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        NMConfig(beta=0.5)
    with pytest.raises(FloatingPointError):
        nelder_mead(lambda x: np.nan, np.eye(3, 2))


def test_objective_is_petz_loss():
    ch = tensor_power(make_amplitude_damping(0.1), 3)
    cfg = SearchConfig(mode="structured_trivial", n_qubits=3)
    obj, words = make_objective(ch, cfg)
    x = np.random.default_rng(1).uniform(0, 2 * np.pi, 22)
    assert abs(obj(x) - petz_fidelity_loss(ch, Codespace(words(x)))) < 1e-10


def test_search_is_deterministic_and_reports():
    ch = tensor_power(make_amplitude_damping(0.1), 2)
    cfg = SearchConfig(mode="structured_trivial", n_qubits=2, restarts=3, seed=5, nm=NMConfig(max_iters=300))
    a, b = run_search(ch, cfg), run_search(ch, cfg)
    assert a.fidelity_loss == b.fidelity_loss
    assert a.fidelity_loss == min(a.restart_losses)
    assert abs(petz_fidelity_loss(ch, a.code) - a.fidelity_loss) < 1e-9
    d = json.loads(a.to_json({"gamma": 0.1}))
    assert d["n"] == 2 and len(d["codewords"]) == 2
    assert a.trace_csv().startswith("iteration,best_value\n")


def test_threaded_search_matches_serial():
    ch = tensor_power(make_amplitude_damping(0.1), 2)
    base = dict(mode="unstructured", n_qubits=2, restarts=2, seed=1, nm=NMConfig(max_iters=200))
    a = run_search(ch, SearchConfig(**base))
    b = run_search(ch, SearchConfig(workers=2, **base))
    assert a.restart_losses == b.restart_losses


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(mode="bogus")
    with pytest.raises(ValueError):
        SearchConfig(mode="structured_nontrivial")
    with pytest.raises(ValueError):
        make_objective(make_amplitude_damping(0.1), SearchConfig(n_qubits=2))
