import math

import numpy as np
import pytest

import apspec

GOLDEN = (1 + math.sqrt(5)) / 2


def test_frequency_sets_and_gaps():
    assert apspec.quasi_periodic_set([1.0], 2) == [-2, -1, 0, 1, 2]
    assert apspec.limit_periodic_set([1, 2], 2) == [-1, 0, 1]
    assert apspec.min_gap([0.5, 1 / 3]) == pytest.approx(1 / 3)
    c, witness = apspec.diophantine_constant([1.0, 1.0], 1, 1.0)
    assert c == 0.0 and sorted(map(abs, witness)) == [1, 1]


def test_weights():
    assert [apspec.weight_exponent(k) for k in range(1, 5)] == [1, 3, 4, 7]
    assert apspec.s_weight([2.0], [(-2.0, 3.0), (0.0, 0.0), (2.0, 3.0)]) == pytest.approx(1.5)


def test_free_kernel_closed_form():
    pairs = [(0.0, 1.0), (0.0, 2.0), (-3.0, 1.0)]
    values, snapped = apspec.projector_kernel(100.0, 4000, [2.0], pairs)
    d = np.array([x - y for x, y in snapped])
    exact = np.sin(2.0 * d) / (np.pi * d)
    assert np.max(np.abs(values[0] - exact)) <= 0.02 * np.max(np.abs(exact))


def test_conjugation_order():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(20, 20)) + 1j * rng.normal(size=(20, 20))
    b = rng.normal(size=(20, 20)) + 1j * rng.normal(size=(20, 20))
    P, G = (a + a.conj().T) / 2, (b + b.conj().T) / 2
    G /= np.linalg.norm(G, 2)
    errs = [np.linalg.norm(apspec.conjugate_truncated(P, h * G, 2) - apspec.conjugate_exact(P, h * G))
            for h in (0.04, 0.02)]
    assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.3)


def test_shooting_and_flow():
    r = apspec.shoot_rotation(1.0, 2.0, [1.3], [0.4], [0.4 + 1.3 + 0.03])
    assert r["residual"] <= 1e-8
    assert apspec.prufer_endpoint_angles(lambda x: 0.0, 0.0, 1.0, [2.0], [0.1])[0] == pytest.approx(2.1)


def test_experiment_driver(tmp_path):
    schema = apspec.experiment_schema("diophantine")
    assert "omega" in schema["params"]
    with pytest.raises(apspec.ConfigError, match="params.L"):
        apspec.validate_config({"kind": "kernel-sweep", "params": {"L": -1.0}})
    out = apspec.run_experiment({"kind": "diophantine", "params": {"omega": [1.0, GOLDEN], "n_max": 50}}, tmp_path)
    assert out["report"]["c"] > 0.8
    assert (tmp_path / "manifest.json").exists()
    with pytest.raises(apspec.ResolutionError):
        apspec.run_experiment({"kind": "gauge-sweep", "params": {"box_size": 64, "hs": [0.0625]}}, tmp_path / "bad")
