import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffrelu.cosine import W_COS
from ffrelu.exceptions import CertificationError
from ffrelu.fourier import CosineTerm, FourierFeaturesNetwork, beta_evaluate, fit_ff_layerwise
from ffrelu.harness import TargetFunction, target_library
from ffrelu.network import DomainBox, validate
from ffrelu.pipeline import (DEPTH_ABSORB, WIDTH_ABSORB, ComplexityLedger, EpsBudget, ReluApproximator,
                             approximate_target, build_beta_net, build_dot_product_net,
                             build_ff_approx, build_z_net, implied_constant, width_bound)


def _small_phi(w, l, seed, dim=1):
    return FourierFeaturesNetwork.random(w, l, dim=dim, rng=seed)


def test_dot_product_examples(rng):
    zero = build_dot_product_net([0.0], 0.0)
    assert np.all(zero.predict(np.linspace(0, 1, 5)) == 0.0)
    net = build_dot_product_net([1.0, 2.0, 3.0], 0.5)
    assert net.evaluate([1.0, 1.0, 1.0]) == pytest.approx(5.5, abs=1e-12)
    assert net.width == 2 and net.depth == 1
    w = rng.uniform(0, 10, 3)
    X = rng.uniform(0, 1, (1000, 3))
    net = build_dot_product_net(w, 0.3)
    assert np.max(np.abs(net.predict(X) - (X @ w - 0.3))) <= 1e-12
    with pytest.raises(ValueError):
        build_dot_product_net([-1.0, 1.0])


def test_beta_single_cosine():
    terms = [CosineTerm(1.0, (2 * math.pi,), 0.0)]
    net = build_beta_net(terms, 1e-2)
    x = np.linspace(0, 1, 10 ** 5)
    assert net.meta["certified_sup"] <= 1e-2
    assert np.max(np.abs(net.predict(x) - np.cos(2 * math.pi * x))) <= 1e-2


def test_beta_zero_amplitudes():
    net = build_beta_net([CosineTerm(0.0, (3.0,), 0.1)] * 3, 1e-2)
    assert net.meta["certified_sup"] == 0.0
    assert np.all(net.predict(np.linspace(0, 1, 11)) == 0.0)


def test_beta_width_ledger(rng):
    terms = [CosineTerm(float(a), (float(w),), float(p)) for a, w, p in
             zip(rng.uniform(0.1, 1, 4), rng.uniform(0, 10, 4), rng.uniform(-3, 3, 4))]
    wide = build_beta_net(terms, 1e-2, mode=WIDTH_ABSORB)
    assert wide.width <= 4 * W_COS
    deep = build_beta_net(terms, 1e-2, mode=DEPTH_ABSORB)
    one = build_beta_net(terms[:1], 1e-2, mode=DEPTH_ABSORB)
    assert deep.width == one.width == W_COS + 2 and deep.depth > wide.depth
    x = np.linspace(0, 1, 10 ** 4)
    for net in (wide, deep):
        assert validate(net)
        assert np.max(np.abs(net.predict(x) - beta_evaluate(terms, x.reshape(-1, 1)))) <= 1e-2


def test_beta_two_dimensional(rng):
    terms = [CosineTerm(0.5, (3.0, 1.0), 0.4), CosineTerm(0.3, (0.0, 5.0), -1.0)]
    net = build_beta_net(terms, 5e-2)
    X = net.domain.grid(200)
    assert np.max(np.abs(net.predict(X) - beta_evaluate(terms, X))) <= 5e-2


def test_beta_on_negative_domain():
    terms = [CosineTerm(0.4, (2.0,), 0.3), CosineTerm(0.2, (5.0,), -1.2)]
    net = build_beta_net(terms, 1e-2, domain=DomainBox(-1.5, 1.5))
    x = np.linspace(-1.5, 1.5, 10 ** 4)
    assert np.max(np.abs(net.predict(x) - beta_evaluate(terms, x.reshape(-1, 1)))) <= 1e-2


def test_z_net_trivial():
    net = build_z_net(FourierFeaturesNetwork.zeros(2, 2), 1e-2)
    assert np.all(net.predict(np.linspace(0, 1, 11)) == 0.0)


def test_z_net_two_layers():
    phi = _small_phi(2, 2, 3)
    net = build_z_net(phi, 1e-2)
    x = np.linspace(0, 1, 10 ** 4).reshape(-1, 1)
    z2 = beta_evaluate(phi.beta_terms(1), x) + beta_evaluate(phi.beta_prime_terms(1), [0.0])
    assert np.max(np.abs(net.predict(x) - z2)) <= 1e-2


def test_z_net_four_layers():
    phi = _small_phi(2, 4, 11)
    net = build_z_net(phi, 5e-2)
    x = np.linspace(0, 1, 10 ** 4).reshape(-1, 1)
    assert np.max(np.abs(net.predict(x) - phi.z_values(x)[-1])) <= 5e-2
    widths = [max(s["beta"]["width"], s["beta_prime"]["width"]) for s in net.meta["stagewise"]]
    assert net.width == max(widths) + 2


def test_z_intermediate_ranges_are_certified():
    phi = _small_phi(2, 3, 5)
    net = build_z_net(phi, 1e-2)
    D = net.meta["D"]
    zs = phi.z_values(np.linspace(0, 1, 10 ** 4))
    assert all(np.max(np.abs(z)) <= D + 0.125 for z in zs)


def test_ff_approx_trivial():
    net, ledger = build_ff_approx(FourierFeaturesNetwork.zeros(2, 2), 1e-2)
    assert net.meta["certified_sup"] == 0.0
    assert np.all(net.predict(np.linspace(0, 1, 11)) == 0.0)
    assert ledger.w <= ledger.w_bound


def test_ff_approx_random():
    phi = _small_phi(2, 2, 7)
    net, ledger = build_ff_approx(phi, 1e-2)
    x = np.linspace(0, 1, 10 ** 4)
    assert net.meta["certified_sup"] <= 1e-2
    assert np.max(np.abs(net.predict(x) - phi.predict(x))) <= 1e-2
    assert ledger.w <= W_COS * phi.w_ff + 2 and ledger.l <= ledger.l_bound


def test_ff_approx_halving_eps_deepens_only():
    phi = _small_phi(2, 2, 9)
    a, _ = build_ff_approx(phi, 2e-2)
    b, _ = build_ff_approx(phi, 1e-2)
    assert b.width == a.width and b.depth > a.depth


def test_ff_approx_depth_mode():
    phi = _small_phi(3, 2, 1)
    net, ledger = build_ff_approx(phi, 5e-2, mode=DEPTH_ABSORB)
    assert net.width <= width_bound(phi, DEPTH_ABSORB)
    x = np.linspace(0, 1, 10 ** 4)
    assert np.max(np.abs(net.predict(x) - phi.predict(x))) <= 5e-2


def test_ff_approx_two_dimensional():
    phi = _small_phi(2, 2, 4, dim=2)
    net, ledger = build_ff_approx(phi, 1e-1)
    X = net.domain.grid(200)
    assert np.max(np.abs(net.predict(X) - phi.predict(X))) <= 1e-1
    assert net.width <= W_COS * phi.w_ff + 3


def test_ff_approx_dense_sampling_honesty():
    phi = _small_phi(2, 3, 2)
    net, _ = build_ff_approx(phi, 5e-2)
    x = np.linspace(0, 1, 10 ** 6)
    assert np.max(np.abs(net.predict(x) - phi.predict(x))) <= net.meta["certified_sup"] + 1e-12


def test_width_is_eps_independent():
    phi = _small_phi(2, 2, 8)
    widths = {build_ff_approx(phi, eps)[0].width for eps in (1e-1, 1e-2, 1e-3)}
    assert len(widths) == 1


def test_ledger_and_budget_guards():
    with pytest.raises(CertificationError):
        ComplexityLedger(10, 5, 9, 100)
    with pytest.raises(CertificationError):
        ComplexityLedger(9, 101, 9, 100)
    b = EpsBudget(0.1)
    assert b.eps_ff + b.eps_relu <= b.eps_total
    with pytest.raises(ValueError):
        EpsBudget(0.1, 0.08, 0.08)
    with pytest.raises(ValueError):
        b.allocate("x", 0.0)


def test_implied_constant():
    assert implied_constant(0.0, 1.0) == 0.0
    assert implied_constant(0.1, 0.5) == pytest.approx(0.02)


def test_approximate_zero_target():
    f = TargetFunction("zero", lambda X: np.zeros(len(X)), 1, linf_norm=0.0, fhat_l1=0.0)
    phi = FourierFeaturesNetwork.zeros(2, 2)
    net, rep = approximate_target(f, 0.1, phi=phi)
    assert rep.l2_error == 0.0 and rep.ratio == 0.0
    assert np.all(net.predict(np.linspace(0, 1, 11)) == 0.0)


def test_approximate_cosine_target():
    f = target_library("cosine")
    cfg = {"w_ff": 4, "l_ff": 2, "freq_budget": 20.0, "n_samples": 512, "include_freqs": (2 * math.pi,)}
    net, rep = approximate_target(f, 1e-2, fit_config=cfg)
    assert rep.l2_error <= 1e-2
    assert rep.eps_relu_certified <= 5e-3 and rep.WL == rep.W * rep.L
    doc = rep.to_dict()
    assert set(doc) >= {"eps_tol", "eps_ff_measured", "eps_relu_certified", "l2_error", "W", "L",
                        "WL", "bound_rhs", "ratio", "stagewise"}


def test_triangle_accounting():
    f = target_library("gaussian")
    cfg = {"w_ff": 8, "l_ff": 2, "freq_budget": 30.0, "n_samples": 512}
    net, rep = approximate_target(f, 0.1, fit_config=cfg)
    x = np.linspace(0, 1, 10 ** 4).reshape(-1, 1)
    phi = fit_ff_layerwise(f.domain.grid(512), f(f.domain.grid(512)), 8, 2, 30.0)
    total = np.abs(f(x) - net.predict(x))
    assert np.all(total <= np.abs(f(x) - phi.predict(x)) + rep.eps_relu_certified + 1e-12)


def test_relu_approximator():
    X = np.linspace(0, 1, 400).reshape(-1, 1)
    y = np.cos(2 * math.pi * X[:, 0])
    est = ReluApproximator(w_ff=4, l_ff=2, freq_budget=20.0, eps=1e-2, include_freqs=(2 * math.pi,))
    assert est.fit(X, y) is est
    assert est.certified_sup_ <= 1e-2
    assert np.max(np.abs(est.predict(X) - y)) <= 1e-2
    with pytest.raises(ValueError):
        est.fit(X + 2, y)


@settings(max_examples=6, deadline=None)
@given(seed=st.integers(0, 10 ** 5), l=st.integers(2, 3), eps=st.sampled_from([1e-1, 5e-2]))
def test_ff_approx_certificate_holds(seed, l, eps):
    phi = _small_phi(2, l, seed)
    net, ledger = build_ff_approx(phi, eps)
    x = np.linspace(0, 1, 10 ** 4)
    assert np.max(np.abs(net.predict(x) - phi.predict(x))) <= net.meta["certified_sup"] <= eps
