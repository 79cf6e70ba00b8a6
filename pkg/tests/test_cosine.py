import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffrelu.certify import pwl_sup_certificate
from ffrelu.cosine import (W_COS, W_COS_CEILING, build_cosine, build_periodizer, build_product,
                           build_square, cosine_depth_bound, depth_scale, polynomial_for)
from ffrelu.network import exact_pwl_1d, validate


def _certify(net, f, curvature, eps):
    bound, _ = pwl_sup_certificate(exact_pwl_1d(net), f, curvature, target=eps)
    return bound


def test_square_at_zero():
    net = build_square(1e-3, 1.0)
    assert abs(net.evaluate([0.0])) <= 1e-3


def test_square_certified():
    net = build_square(1e-3, 1.0)
    assert validate(net) and net.width <= 3
    assert _certify(net, np.square, 2.0, 1e-3) <= 1e-3


def test_square_depth_grows_additively():
    depths = [build_square(2.0 ** -k, 1.0).depth for k in range(3, 21)]
    steps = np.diff(depths)
    assert np.all(steps >= 0) and np.all(steps <= 1)


def test_product_examples(rng):
    net = build_product(1e-3, 1.0, 1.0)
    xs = rng.uniform(-1, 1, 100)
    assert np.max(np.abs(net.predict(np.column_stack([xs, np.zeros(100)])))) <= 1e-3
    assert abs(net.evaluate([1.0, 1.0]) - 1.0) <= 1e-3


def test_product_grid_certified():
    net = build_product(1e-4, 2.0, 2.0)
    X = net.domain.grid(300)
    assert np.max(np.abs(net.predict(X) - X[:, 0] * X[:, 1])) <= 1e-4


def test_periodizer_affine_when_already_canonical():
    net = build_periodizer(1.0, 1.0, 0.5)
    assert net.meta["folds"] == 0 and net.depth == 1
    x = np.linspace(-0.5, 0.5, 101)
    assert np.allclose(net.predict(x), x + 1.0, atol=1e-14)


def test_periodizer_folds_exactly(rng):
    a = 4 * math.pi
    net = build_periodizer(a, 0.0, 1.0)
    x = rng.uniform(-1, 1, 10 ** 4)
    s = net.predict(x)
    assert np.all(s >= -1e-12) and np.all(s <= math.pi + 1e-12)
    assert np.max(np.abs(np.cos(s) - np.cos(a * x))) <= 1e-12


def test_periodizer_depth_is_logarithmic():
    excess = [build_periodizer(float(a), 0.0, 1.0).depth - math.log2(a) for a in 2.0 ** np.arange(1, 11)]
    assert max(excess) <= 3.0


def test_polynomial_truncation_budget():
    for eps in (1e-1, 1e-3, 1e-6):
        deg, tail, q = polynomial_for(eps)
        assert deg % 2 == 1 and tail <= eps / 2
        x = np.linspace(-1, 1, 2001)
        poly = x * np.polyval(q[::-1], x * x)
        assert np.max(np.abs(poly + np.sin(np.pi * x / 2))) <= eps / 2 + 1e-12


def test_cosine_constant_case():
    net = build_cosine(0.0, 0.0, 1.0, 0.1)
    assert net.meta["certified_sup"] == 0.0
    assert np.all(net.predict(np.linspace(-1, 1, 11)) == 1.0)


def test_cosine_unit_frequency():
    net = build_cosine(1.0, 0.0, math.pi, 0.1)
    assert net.meta["certified_sup"] <= 0.1
    assert _certify(net, np.cos, 1.0, 0.1) <= 0.1
    assert net.meta["builder"] == "cosine" and net.meta["W_cos"] == W_COS


def test_cosine_depth_constant_across_eps():
    a, v = 2 * math.pi, -math.pi / 2
    R = a + abs(v)
    ratios = []
    for eps in (1e-1, 1e-2, 1e-3, 1e-4):
        net = build_cosine(a, v, 1.0, eps)
        assert net.depth <= cosine_depth_bound(eps, R)
        ratios.append(net.depth / depth_scale(eps, R))
    assert max(ratios) / min(ratios) <= 4.0


def test_cosine_width_constant_in_eps():
    widths = {build_cosine(3.0, 0.4, 2.0, eps).width for eps in (1e-1, 1e-3, 1e-5, 1e-7)}
    assert widths == {W_COS} and W_COS <= W_COS_CEILING


def test_cosine_rejects_bad_eps():
    with pytest.raises(ValueError):
        build_cosine(1.0, 0.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        build_cosine(1.0, 0.0, -1.0, 0.1)


@pytest.mark.parametrize("a,v,D,eps", [(2 * math.pi, 0.0, 1.0, 1e-2), (5.0, 1.3, 2.0, 1e-3)])
def test_cosine_certificate_is_honest(a, v, D, eps):
    net = build_cosine(a, v, D, eps)
    x = np.linspace(-D, D, 10 ** 6)
    y = net.predict(x)
    assert np.max(np.abs(y - np.cos(a * x + v))) <= net.meta["certified_sup"] + 1e-12
    assert np.all(np.abs(y) <= 1 + eps)


@settings(max_examples=15, deadline=None)
@given(a=st.floats(0.1, 20.0), D=st.floats(0.2, 2.0), k=st.integers(1, 3))
def test_cosine_symmetry(a, D, k):
    eps = 10.0 ** -k
    net = build_cosine(a, 0.0, D, eps)
    x = np.linspace(0, D, 2001)
    assert np.max(np.abs(net.predict(x) - net.predict(-x))) <= 2 * eps
