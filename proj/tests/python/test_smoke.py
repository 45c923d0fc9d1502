"""Smoke tests for the pybind11 module.

Run against an installed `condscore` package, or set CONDSCORE_MODULE_DIR to
the CMake build directory containing the compiled `_condscore` extension.
"""

import math
import os
import sys

import numpy as np
import pytest

_mod_dir = os.environ.get("CONDSCORE_MODULE_DIR")
if _mod_dir:
    sys.path.insert(0, _mod_dir)
    import _condscore as cs
else:
    cs = pytest.importorskip("condscore")


def test_fourier_basis_orthonormal():
    t = np.linspace(0.0, 1.0, 101)
    B = cs.fourier_basis(5, t)
    w = np.zeros_like(t)
    w[1:-1] = (t[2:] - t[:-2]) / 2
    w[0] = w[-1] = (t[1] - t[0]) / 2
    gram = (B * w) @ B.T
    assert np.abs(gram - np.eye(5)).max() < 1e-6


def test_brownian_bridge_spectrum():
    t = np.linspace(0.0, 1.0, 201)
    K = cs.brownian_bridge_kernel(1.0, t)
    lam, funcs = cs.eigen_decompose(K, t, 5)
    for k in range(1, 4):
        truth = 1.0 / (k * math.pi) ** 2
        assert abs(lam[k - 1] - truth) / truth < 2e-3
    assert funcs.shape[1] == len(t)


def test_estimate_error_kernel_two_replicates():
    t = np.linspace(0.0, 1.0, 11)
    rng = np.random.default_rng(0)
    r = rng.standard_normal((2, 11))
    K = cs.estimate_error_kernel([r], t)
    d = (r[0] - r[1]) / np.sqrt(2.0)
    assert np.abs(K - np.outer(d, d)).max() < 1e-12


def test_fit_gaussian_reduces_to_ols_without_error():
    rng = np.random.default_rng(1)
    n, p = 300, 2
    X = rng.poisson(2.0, (n, p)).astype(float)
    y = 0.5 + X @ np.array([1.0, -0.5]) + rng.standard_normal(n)
    out = cs.fit(X, y, np.zeros(p), "gaussian")
    assert out["converged"]
    assert np.abs(out["beta"] - out["naive_beta"]).max() < 1e-8
    assert abs(out["beta0"] - out["naive_beta0"]) < 1e-8


def test_fit_binary_corrects_toward_truth():
    rng = np.random.default_rng(2)
    n = 4000
    lam = 0.6
    beta_true = 0.8
    x = rng.poisson(2.0, n).astype(float)
    w = x + rng.standard_normal(n) * math.sqrt(lam)
    pr = 1.0 / (1.0 + np.exp(-(-1.5 + beta_true * x)))
    y = (rng.random(n) < pr).astype(float)
    out = cs.fit(w[:, None], y, np.array([lam]), "binary")
    assert out["converged"]
    naive = out["naive_beta"][0]
    corrected = out["beta"][0]
    assert abs(corrected - beta_true) < abs(naive - beta_true)


def test_run_scenario_smoke_and_determinism():
    kwargs = dict(
        family="gaussian",
        setting="sqexp",
        n=80,
        noise=2.0,
        length_scale=0.1,
        reps=2,
        replicates_per_subject=5,
        grid_size=51,
        seed=5,
    )
    a = cs.run_scenario(**kwargs)
    b = cs.run_scenario(**kwargs, threads=2)
    assert a["failures"] == 0
    assert a["mean_E_co"] >= 0.0
    assert a["E_co_reps"] == b["E_co_reps"]


def test_invalid_family_raises():
    with pytest.raises(Exception):
        cs.fit(np.zeros((4, 1)), np.zeros(4), np.zeros(1), "poisson")
