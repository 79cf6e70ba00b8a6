"""ReLU networks for squares, products and ``cos(a x + v)`` on ``[-D, D]``.

Squares use sawtooth composition: with tent ``g(t) = 2 relu(t) - 4 relu(t - 1/2)``
on [0, 1] and ``g_s`` its s-fold composition, ``t - sum_{s<=m} g_s(t) / 4**s``
interpolates ``t**2`` at dyadic points with error at most ``2**(-2m-2)``.
Products use ``xy = ((x + y)**2 - (x - y)**2) / 4``.

The cosine net folds ``a x + v`` exactly into [0, pi], then evaluates an odd
Chebyshev polynomial of ``x = 2s/pi - 1`` (``cos s = -sin(pi x / 2)``) by
Horner's rule in ``x**2``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C

from ._validation import check_eps
from .calculus import compose
from .certify import pwl_sup_certificate
from .exceptions import CertificationError
from .network import (AffineLayer, DomainBox, ReluNetwork, constant_net,
                      exact_pwl_1d, pad_width)

W_COS = 8
W_COS_TARGET = 9
W_COS_CEILING = 16
CERT_RETRIES = 4


class _Aff:
    """Affine expression over the neurons of the latest layer."""

    __slots__ = ("w", "b")

    def __init__(self, w, b=0.0):
        self.w = np.asarray(w, dtype=float)
        self.b = float(b)

    def __add__(self, other):
        if isinstance(other, _Aff):
            return _Aff(self.w + other.w, self.b + other.b)
        return _Aff(self.w, self.b + other)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other if isinstance(other, _Aff) else self + (-other)

    def __rsub__(self, other):
        return (-1.0) * self + other

    def __mul__(self, k):
        return _Aff(k * self.w, k * self.b)

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self


class _Chain:
    """Builds a layer stack one hidden layer at a time."""

    def __init__(self, in_dim):
        self.in_dim = in_dim
        self.rows = []
        self.width = in_dim

    def inputs(self):
        return [_Aff(np.eye(self.width)[i]) for i in range(self.width)]

    def layer(self, exprs):
        self.rows.append(([e.w for e in exprs], [e.b for e in exprs]))
        self.width = len(exprs)
        return [_Aff(np.eye(self.width)[i]) for i in range(self.width)]

    def finish(self, out, domain, width=None, meta=None):
        W = max(width or 0, max(len(b) for _, b in self.rows))
        layers, prev = [], self.in_dim
        for i, (ws, bs) in enumerate(self.rows):
            cols = self.in_dim if i == 0 else W
            M = np.zeros((W, cols))
            M[:len(ws), :prev] = np.array(ws)
            b = np.zeros(W)
            b[:len(bs)] = bs
            layers.append(AffineLayer(M, b))
            prev = len(bs)
        M = np.zeros((1, W))
        M[0, :prev] = out.w
        layers.append(AffineLayer(M, [out.b]))
        return ReluNetwork(domain, layers, meta)


def _squares(chain, values, bounds, m, carries):
    """Append layers approximating ``v**2`` for each value with ``|v| <= bound``.

    ``carries`` are nonnegative expressions passed through unchanged. Uses
    ``m + 1`` hidden layers and ``3 * len(values)`` neurons besides the carries.
    """
    k = len(values)
    nc = len(carries)
    v = chain.layer(sum(([x, -x] for x in values), []) + list(carries))
    ts = [(v[2 * i] + v[2 * i + 1]) * (1.0 / bounds[i]) for i in range(k)]
    v = chain.layer(sum(([t, t - 0.5, t] for t in ts), []) + v[2 * k:2 * k + nc])
    for s in range(1, m):
        exprs = []
        for i in range(k):
            a, c, acc = v[3 * i:3 * i + 3]
            g = 2.0 * a - 4.0 * c
            exprs += [g, g - 0.5, acc - g * (0.25 ** s)]
        v = chain.layer(exprs + v[3 * k:3 * k + nc])
    out = []
    for i in range(k):
        a, c, acc = v[3 * i:3 * i + 3]
        out.append((acc - (2.0 * a - 4.0 * c) * (0.25 ** m)) * (bounds[i] ** 2))
    return out, v[3 * k:3 * k + nc]


def _product(chain, p, q, bound, m, carries):
    """Append layers approximating ``p * q`` with ``|p| + |q| <= bound``."""
    (su, sv), carries = _squares(chain, [p + q, p - q], [bound, bound], m, carries)
    return (su - sv) * 0.25, carries


def square_levels(bound, eps):
    """Smallest m with ``bound**2 * 2**(-2m-2) <= eps``."""
    m = 1
    while bound * bound * 2.0 ** (-2 * m - 2) > eps:
        m += 1
    return m


def product_levels(bound, eps):
    m = 1
    while bound * bound * 2.0 ** (-2 * m - 3) > eps:
        m += 1
    return m


def build_square(eps, bound):
    """Net on ``[-bound, bound]`` with sup error at most ``eps`` against ``x**2``.

    Width 3, depth ``m + 1`` with ``m = ceil(log2(bound / sqrt(eps)) - 1)``.
    """
    eps = check_eps(eps)
    if bound <= 0:
        raise ValueError("bound must be positive")
    m = square_levels(bound, eps)
    chain = _Chain(1)
    (sq,), _ = _squares(chain, chain.inputs(), [float(bound)], m, [])
    err = bound * bound * 2.0 ** (-2 * m - 2)
    return chain.finish(sq, DomainBox(-bound, bound, 1),
                        meta={"builder": "square", "eps": eps, "bound": float(bound), "levels": m,
                              "error_bound": err, "range": [0.0, bound * bound + err]})


def build_product(eps, bx, by):
    """Net on ``[-b, b]**2`` (``b = max(bx, by)``) with sup error at most
    ``eps`` against ``x * y``. Width 6."""
    eps = check_eps(eps)
    if bx <= 0 or by <= 0:
        raise ValueError("bounds must be positive")
    b = float(max(bx, by))
    B = 2.0 * b
    m = product_levels(B, eps)
    chain = _Chain(2)
    x, y = chain.inputs()
    pr, _ = _product(chain, x, y, B, m, [])
    err = B * B * 2.0 ** (-2 * m - 3)
    return chain.finish(pr, DomainBox(-b, b, 2),
                        meta={"builder": "product", "eps": eps, "bound": b, "levels": m,
                              "error_bound": err, "range": [-b * b - err, b * b + err]})


def build_periodizer(a, v, D):
    """Width-2 net mapping ``x in [-D, D]`` to ``s in [0, pi]`` with
    ``cos(s) = cos(a x + v)`` exactly.

    An absolute-value layer (skipped when ``a x + v >= 0``) is followed by
    folds ``s -> P - |s - P|`` for ``P = 2**(k-1) pi, ..., pi``.
    """
    a, v, D = float(a), float(v), float(D)
    if D <= 0:
        raise ValueError("D must be positive")
    lo, hi = v - abs(a) * D, v + abs(a) * D
    dom = DomainBox(-D, D, 1)
    chain = _Chain(1)
    (x,) = chain.inputs()
    t = a * x + v
    if lo >= 0.0 and hi <= math.pi:
        (n,) = chain.layer([t])
        return chain.finish(n, dom, meta={"builder": "periodizer", "folds": 0, "abs": False,
                                          "range": [0.0, math.pi]})
    if lo < 0.0:
        n0, n1 = chain.layer([t, -t])
        s = n0 + n1
        R = max(-lo, hi)
        use_abs = True
    else:
        s, R, use_abs = t, hi, False
    k = 0
    while (2 ** k) * math.pi < R:
        k += 1
    for j in range(k - 1, -1, -1):
        P = (2 ** j) * math.pi
        n0, n1 = chain.layer([s - P, P - s])
        s = P - n0 - n1
    return chain.finish(s, dom, meta={"builder": "periodizer", "folds": k, "abs": use_abs,
                                      "range": [0.0, math.pi]})


@functools.lru_cache(maxsize=None)
def _cheb_coeffs():
    return C.chebinterpolate(lambda x: -np.sin(np.pi * x / 2.0), 41)


def polynomial_for(eps):
    """Odd Chebyshev truncation of ``-sin(pi x / 2)`` on [-1, 1] with tail at
    most ``eps / 2``. Returns ``(degree, tail_bound, q)`` where the polynomial
    is ``x * sum_i q[i] (x**2)**i``."""
    a = _cheb_coeffs()
    for deg in range(1, len(a) - 8, 2):
        tail = float(np.sum(np.abs(a[deg + 1:])))
        if tail <= eps / 2.0:
            mono = C.cheb2poly(a[:deg + 1])
            mono[0::2] = 0.0
            return deg, tail, mono[1::2].copy()
    raise ValueError(f"eps {eps} too small for the tabulated expansion")


@dataclass
class _Plan:
    levels: list
    bounds: list
    budget: list
    error_bound: float


def _max_abs_poly(coeffs, hi):
    """Exact ``max |sum_i coeffs[i] u**i|`` over ``u in [0, hi]``."""
    poly = np.polynomial.Polynomial(coeffs)
    pts = [0.0, hi]
    if len(coeffs) > 2:
        crit = poly.deriv().roots()
        pts += [r.real for r in crit if abs(r.imag) < 1e-12 and 0.0 < r.real < hi]
    return float(max(abs(poly(u)) for u in pts))


def _plan(q, eps_mult, extra):
    """Choose sawtooth levels for the square of x and each Horner product.

    Op shares of ``eps_mult`` halve along the chain: square, Horner products,
    final product with x. Product input bounds use the exact maxima of the
    Horner partial polynomials plus their propagated error bounds.
    """
    K = len(q) - 1
    if K == 0:
        return _Plan([], [], [], 0.0)
    n_ops = K + 1
    weights = np.array([2.0 ** -(i + 1) for i in range(n_ops)])
    shares = eps_mult * weights / weights.sum()
    partial = {j: _max_abs_poly(q[j:], 1.0 + shares[0]) for j in range(K)}
    amp = abs(q[K]) + sum(partial[j + 1] + eps_mult for j in range(K - 1))
    levels = [square_levels(1.0, shares[0] / amp) + extra]
    bounds = [1.0]
    err_u = 2.0 ** (-2 * levels[0] - 2)
    E = abs(q[K]) * err_u
    Y = _max_abs_poly(q[K - 1:], 1.0 + err_u) + E
    for i, j in enumerate(range(K - 2, -1, -1)):
        B = (1.0 + err_u) + Y
        m = product_levels(B, shares[1 + i]) + extra
        delta = B * B * 2.0 ** (-2 * m - 3)
        levels.append(m)
        bounds.append(B)
        E = Y * err_u + E + delta
        Y = _max_abs_poly(q[j:], 1.0 + err_u) + E
    B = 1.0 + Y
    m = product_levels(B, shares[-1]) + extra
    levels.append(m)
    bounds.append(B)
    total = E + B * B * 2.0 ** (-2 * m - 3)
    return _Plan(levels, bounds, shares.tolist(), total)


def _canonical_net(q, plan):
    """Net on [0, pi] approximating ``cos(s)`` through ``x = 2s/pi - 1``."""
    K = len(q) - 1
    chain = _Chain(1)
    (s,) = chain.inputs()
    x = s * (2.0 / math.pi) - 1.0
    if K == 0:
        (s,) = chain.layer([s])
        return chain.finish((s * (2.0 / math.pi) - 1.0) * q[0], DomainBox(0.0, math.pi, 1), width=W_COS)
    (u,), (s,) = _squares(chain, [x], [plan.bounds[0]], plan.levels[0], [s])
    y = u * q[K] + q[K - 1]
    carries = [s, u]
    for i, j in enumerate(range(K - 2, -1, -1)):
        prod, carries = _product(chain, carries[1], y, plan.bounds[1 + i], plan.levels[1 + i], carries)
        y = prod + q[j]
    xs = carries[0] * (2.0 / math.pi) - 1.0
    p, _ = _product(chain, xs, y, plan.bounds[-1], plan.levels[-1], [])
    return chain.finish(p, DomainBox(0.0, math.pi, 1), width=W_COS)


@functools.lru_cache(maxsize=256)
def _canonical_cached(eps_key):
    eps = 2.0 ** (eps_key / 4.0)
    return _canonical_build(eps)


def _canonical_build(eps):
    deg, tail, q = polynomial_for(eps)
    for extra in range(CERT_RETRIES):
        plan = _plan(q, eps / 2.0, extra)
        net = _canonical_net(q, plan)
        pwl = exact_pwl_1d(net)
        cert, observed = pwl_sup_certificate(pwl, np.cos, 1.0, target=eps)
        if cert <= eps:
            meta = {"builder": "cosine_canonical", "eps": eps, "degree": deg,
                    "truncation_bound": tail, "levels": plan.levels, "apriori_bound": tail + plan.error_bound,
                    "certified_sup": cert, "observed_sup": observed,
                    "breakpoints": int(pwl.breakpoints.size),
                    "range": [pwl.min(), pwl.max()]}
            return net.with_meta(**meta)
    raise CertificationError(f"canonical cosine net not certified at eps={eps:g} (bound {cert:.3g})")


def canonical_cosine(eps):
    """Certified net on [0, pi] for ``cos``. Nets are cached on a quarter-octave
    grid of tolerances no larger than ``eps``."""
    eps = check_eps(eps)
    key = math.floor(4.0 * math.log2(eps))
    return _canonical_cached(key)


def depth_scale(eps, R):
    """``log2(1/eps)**2 + log2(ceil(R))``, the depth normaliser for cosine nets."""
    return math.log2(1.0 / eps) ** 2 + math.log2(max(1, math.ceil(R)))


def cosine_depth_bound(eps, R):
    """Documented depth ceiling for ``build_cosine``: ``6 + depth_scale``."""
    return 6.0 + depth_scale(eps, R)


def build_cosine(a, v, D, eps):
    """Net on ``[-D, D]`` within ``eps`` of ``cos(a x + v)``, width ``W_COS``."""
    eps = check_eps(eps)
    a, v, D = float(a), float(v), float(D)
    if D <= 0:
        raise ValueError("D must be positive")
    R = abs(a) * D + abs(v)
    base = {"builder": "cosine", "a": a, "v": v, "D": D, "eps": eps, "W_cos": W_COS,
            "W_cos_target_met": W_COS <= W_COS_TARGET}
    dom = DomainBox(-D, D, 1)
    if a == 0.0:
        c = math.cos(v)
        net = pad_width(constant_net(c, dom), W_COS)
        return net.with_meta(**base, certified_sup=0.0, range=[c, c],
                             depth_constant=net.depth / depth_scale(eps, R))
    canon = canonical_cosine(eps)
    per = build_periodizer(a, v, D)
    net = compose([pad_width(per, W_COS), canon])
    if net.width > W_COS_CEILING or net.depth > cosine_depth_bound(eps, R):
        raise CertificationError(f"cosine net exceeds its ledger: W={net.width}, L={net.depth}")
    meta = dict(base)
    meta.update(certified_sup=canon.meta["certified_sup"], range=list(canon.meta["range"]),
                degree=canon.meta["degree"], folds=per.meta["folds"],
                depth_constant=net.depth / depth_scale(eps, R))
    return net.with_meta(**meta)
