import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffrelu.exceptions import DocumentError, FittingError, ShapeError
from ffrelu.fourier import (CosineTerm, FourierFeaturesNetwork, FourierFeaturesRegressor, beta_evaluate,
                            deserialize_ff, ff_evaluate, ff_intermediate_bound, fit_ff_layerwise,
                            serialize_ff, to_cosine_form)
from ffrelu.harness import target_library


def _complex_oracle(phi, X):
    """Residual recursion written with Python complex scalars."""
    out = []
    for x in X:
        def beta(l):
            return sum(phi.amp[l, k] * cmath.exp(1j * float(np.dot(phi.freq[l, k], x)))
                       for k in range(phi.w_ff)).real

        def beta_p(l, z):
            return sum(phi.amp_prime[l - 1, k] * cmath.exp(1j * phi.freq_prime[l - 1, k] * z)
                       for k in range(phi.w_ff)).real

        z = 0.0
        for l in range(1, phi.l_ff):
            z = z + beta(l) + beta_p(l, z)
        out.append(beta(0) + z)
    return np.array(out)


def test_cosine_form_examples():
    assert to_cosine_form(1.0, 2.0) == CosineTerm(1.0, (2.0,), 0.0)
    t = to_cosine_form(1j, 1.0)
    assert t.amplitude == pytest.approx(1.0) and t.phase == pytest.approx(-math.pi / 2)
    assert to_cosine_form(0.0, 3.0) == CosineTerm(0.0, (3.0,), 0.0)


def test_cosine_form_negative_real_phase_in_range():
    t = to_cosine_form(-2.0, 1.0)
    assert t.phase == pytest.approx(math.pi) and -math.pi < t.phase <= math.pi


def test_cosine_form_identity(rng):
    x = rng.uniform(-5, 5, 1000)
    for _ in range(20):
        b = complex(*rng.normal(size=2))
        w = rng.uniform(0, 10)
        t = to_cosine_form(b, w)
        lhs = t.amplitude * np.cos(w * x - t.phase)
        rhs = b.real * np.cos(w * x) - b.imag * np.sin(w * x)
        assert np.max(np.abs(lhs - rhs) / (1 + np.abs(rhs))) <= 1e-12


def test_beta_evaluate_examples(rng):
    assert beta_evaluate([], [0.3]) == 0.0
    assert beta_evaluate([CosineTerm(1.0, (0.0,), 0.0)], [0.7]) == 1.0
    b = rng.normal(size=5) + 1j * rng.normal(size=5)
    w = rng.uniform(0, 8, (5, 2))
    terms = [to_cosine_form(bk, wk) for bk, wk in zip(b, w)]
    X = rng.uniform(0, 1, (1000, 2))
    want = np.real(np.exp(1j * X @ w.T) @ b)
    assert np.max(np.abs(beta_evaluate(terms, X) - want) / (1 + np.abs(want))) <= 1e-12


def test_ff_evaluate_examples(rng):
    zero = FourierFeaturesNetwork.zeros(3, 2)
    assert np.all(zero.predict(np.linspace(0, 1, 11)) == 0.0)
    phi = FourierFeaturesNetwork.zeros(1, 2)
    phi.freq[0, 0, 0] = 2 * math.pi
    phi.amp[0, 0] = 1.0
    x = np.linspace(0, 1, 101)
    assert np.max(np.abs(phi.predict(x) - np.cos(2 * math.pi * x))) <= 1e-12
    assert ff_evaluate(phi, [0.25]) == pytest.approx(0.0, abs=1e-12)


def test_ff_matches_complex_oracle(rng):
    phi = FourierFeaturesNetwork.random(3, 4, rng=rng)
    X = rng.uniform(0, 1, (1000, 1))
    want = _complex_oracle(phi, X)
    assert np.max(np.abs(phi.predict(X) - want) / (1 + np.abs(want))) <= 1e-10


def test_ff_base_case_and_cosine_form(rng):
    phi = FourierFeaturesNetwork.random(4, 2, dim=2, rng=rng)
    X = rng.uniform(0, 1, (500, 2))
    b0 = beta_evaluate(phi.beta_terms(0), X)
    b1 = beta_evaluate(phi.beta_terms(1), X)
    bp = beta_evaluate(phi.beta_prime_terms(1), [0.0])
    want = b0 + b1 + bp
    assert np.max(np.abs(phi.predict(X) - want) / (1 + np.abs(want))) <= 1e-12


def test_shape_errors():
    with pytest.raises(ShapeError):
        FourierFeaturesNetwork(np.zeros((1, 2, 1)), np.zeros((1, 2)), np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        FourierFeaturesNetwork(-np.ones((2, 2, 1)), np.zeros((2, 2)), np.zeros((1, 2)), np.zeros((1, 2)))


def test_intermediate_bound_examples(rng):
    assert ff_intermediate_bound(FourierFeaturesNetwork.zeros(3, 3)) == 0.0
    phi = FourierFeaturesNetwork.zeros(2, 2)
    phi.amp[1] = [0.1 + 0.1j, -0.2]
    phi.amp_prime[0] = [0.05, 0.0]
    assert ff_intermediate_bound(phi) <= abs(0.1 + 0.1j) + 0.2 + 0.05 + 1e-15


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6), l=st.integers(2, 5), grid=st.sampled_from([None, 64, 512]))
def test_intermediate_bound_is_sound(seed, l, grid):
    phi = FourierFeaturesNetwork.random(3, l, rng=seed)
    D = ff_intermediate_bound(phi, grid=grid)
    zs = phi.z_values(phi.domain.grid(10 ** 4))
    assert all(np.max(np.abs(z)) <= D + 1e-12 for z in zs)


def test_fit_zero_target():
    X = np.linspace(0, 1, 256)
    phi = fit_ff_layerwise(X.reshape(-1, 1), np.zeros(256), 8, 3, 20.0)
    assert phi.meta["train_rmse"] <= 1e-10
    assert np.max(np.abs(phi.amp)) <= 1e-10


def test_fit_exact_cosine():
    X = np.linspace(0, 1, 512).reshape(-1, 1)
    phi = fit_ff_layerwise(X, np.cos(2 * math.pi * X[:, 0]), 4, 2, 30.0, include_freqs=(2 * math.pi,))
    assert phi.meta["train_rmse"] <= 1e-8


def test_fit_larger_model_is_better():
    f = target_library("regularized_sine")
    X = f.domain.grid(2048)
    y = f(X)
    small = fit_ff_layerwise(X, y, 4, 2, 100.0, seed=0)
    big = fit_ff_layerwise(X, y, 16, 3, 100.0, seed=0)
    assert big.meta["train_rmse"] < small.meta["train_rmse"]


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000), l=st.integers(2, 5))
def test_fit_rmse_is_monotone(seed, l):
    f = target_library("regularized_sine")
    X = f.domain.grid(512)
    hist = fit_ff_layerwise(X, f(X), 8, l, 60.0, seed=seed).meta["rmse_history"]
    assert len(hist) == l and all(b <= a for a, b in zip(hist, hist[1:]))


def test_fit_is_deterministic():
    X = np.linspace(0, 1, 256).reshape(-1, 1)
    y = np.sin(7 * X[:, 0])
    a = fit_ff_layerwise(X, y, 6, 3, 20.0, seed=5)
    b = fit_ff_layerwise(X, y, 6, 3, 20.0, seed=5)
    assert np.array_equal(a.amp, b.amp) and np.array_equal(a.freq, b.freq)


def test_fit_underdetermined():
    with pytest.raises(FittingError):
        fit_ff_layerwise(np.linspace(0, 1, 10).reshape(-1, 1), np.zeros(10), 4, 2, 10.0)


def test_regressor_estimator_api():
    X = np.linspace(0, 1, 300).reshape(-1, 1)
    y = np.cos(2 * math.pi * X[:, 0])
    est = FourierFeaturesRegressor(w_ff=4, l_ff=2, freq_budget=10.0, include_freqs=(2 * math.pi,))
    assert est.fit(X, y) is est
    assert est.score(X, y) > 1 - 1e-10
    assert est.get_params()["w_ff"] == 4


def test_document_round_trip(rng):
    phi = FourierFeaturesNetwork.random(3, 3, dim=2, rng=rng)
    back = deserialize_ff(serialize_ff(phi))
    X = rng.uniform(0, 1, (50, 2))
    assert np.array_equal(back.predict(X), phi.predict(X))
    with pytest.raises(DocumentError):
        deserialize_ff(b'{"kind": "relu_network"}')
