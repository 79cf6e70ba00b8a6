"""Compilation of Fourier features residual networks into certified ReLU networks.

The chain is: cosine terms -> ``beta`` nets, the residual recursion for
``z_L`` as a type-2 special network, then ``beta_0 + z_L`` in standard form.
Each stage carries an a-priori sup-error certificate.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y

from ._validation import check_eps, check_points
from .calculus import compose, linear_combine_width
from .certify import pwl_sup_certificate
from .cosine import W_COS, build_cosine, cosine_depth_bound
from .exceptions import CertificationError, CompositionDomainError, FFReluError
from .fourier import (FourierFeaturesNetwork, beta_evaluate, ff_intermediate_bound,
                      fit_ff_layerwise)
from .harness import bound_rhs, l2_error
from .network import (AffineLayer, DomainBox, ReluNetwork, check_valid, constant_net,
                      exact_pwl_1d, extend_depth, pad_width, restrict_domain, scale_output)
from .special import pad_special, special_concat, special_recursive, special_sum, to_standard

WIDTH_ABSORB = "width_absorb"
DEPTH_ABSORB = "depth_absorb"
MODES = (WIDTH_ABSORB, DEPTH_ABSORB)
PRIME_MARGIN = 0.125
COSINE_EPS_CAP = 0.4
CERT_GRID_1D = 10 ** 4
CERT_GRID_ND = 200


@dataclass
class EpsBudget:
    """Tolerance split between the Fourier features stage and the ReLU stage."""

    eps_total: float
    eps_ff: float = None
    eps_relu: float = None
    allocations: dict = field(default_factory=dict)

    def __post_init__(self):
        self.eps_total = check_eps(self.eps_total, "eps_total")
        if self.eps_ff is None:
            self.eps_ff = self.eps_total / 2.0
        if self.eps_relu is None:
            self.eps_relu = self.eps_total / 2.0
        if self.eps_ff <= 0 or self.eps_relu <= 0:
            raise ValueError("stage allocations must be positive")
        if self.eps_ff + self.eps_relu > self.eps_total * (1 + 1e-12):
            raise ValueError("stage allocations exceed the total tolerance")

    def allocate(self, name, value):
        if not value > 0:
            raise ValueError(f"allocation {name} must be positive")
        self.allocations[name] = float(value)
        return float(value)


@dataclass
class ComplexityLedger:
    """Achieved and predicted width/depth. Construction asserts ``w <= w_bound``
    and ``l <= l_bound``."""

    w: int
    l: int
    w_bound: float
    l_bound: float
    stagewise: list = field(default_factory=list)

    def __post_init__(self):
        if self.w > self.w_bound:
            raise CertificationError(f"width {self.w} exceeds ledger bound {self.w_bound}")
        if self.l > self.l_bound:
            raise CertificationError(f"depth {self.l} exceeds ledger bound {self.l_bound}")

    def to_dict(self):
        return asdict(self)


# -- dot products and cosine sums ----------------------------------------------

def build_dot_product_net(omega, shift=0.0, domain=None):
    """Width-2 depth-1 net realizing ``omega . x - shift`` on ``[0, 1]^d``."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if omega.ndim != 1:
        raise ValueError("omega must be a vector")
    if np.any(omega < 0):
        raise ValueError("frequencies must be nonnegative")
    d = omega.size
    domain = domain or DomainBox(0.0, 1.0, d)
    shift = float(shift)
    layers = [AffineLayer(np.vstack([omega, -omega]), np.zeros(2)),
              AffineLayer([[1.0, -1.0]], [-shift])]
    lo = float(np.sum(np.minimum(omega * domain.lo, omega * domain.hi)))
    hi = float(np.sum(np.maximum(omega * domain.lo, omega * domain.hi)))
    return ReluNetwork(domain, layers, {"builder": "dot_product", "range": [lo - shift, hi - shift]})


def _zero_beta(domain, mode):
    net = constant_net(0.0, domain)
    return net.with_meta(builder="beta", certified_sup=0.0, n_terms=0, mode=mode,
                         depth_bound=1.0, term_depth_bounds=[])


def _term_net(term, eps_k, domain):
    """Net for ``cos(w . x - phase)`` on ``domain`` and its depth bound."""
    if domain.dim == 1:
        D = max(abs(domain.lo), abs(domain.hi))
        w = term.frequency[0]
        net = restrict_domain(build_cosine(w, -term.phase, D, eps_k), domain.lo, domain.hi)
        return net, cosine_depth_bound(eps_k, abs(w) * D + abs(term.phase))
    omega = np.asarray(term.frequency)
    dot = build_dot_product_net(omega, term.phase, domain)
    Omega = max(abs(v) for v in dot.meta["range"])
    if Omega == 0.0:
        Omega = 1.0
    cos = build_cosine(1.0, 0.0, Omega, eps_k)
    net = compose([pad_width(dot, cos.width), cos])
    net = net.with_meta(certified_sup=cos.meta["certified_sup"], range=cos.meta["range"])
    return net, 1.0 + cosine_depth_bound(eps_k, Omega)


def build_beta_net(terms, eps, domain=None, mode=WIDTH_ABSORB, verify=True):
    """ReLU net within ``eps`` of ``sum_k b_k cos(w_k . x - phi_k)`` on ``domain``.

    Each nonzero term gets tolerance ``eps / (n |b_k|)`` (capped below 1/2).
    ``width_absorb`` stacks the terms side by side at a common depth;
    ``depth_absorb`` chains them through a special network so the width does
    not grow with the number of terms. With ``verify`` the a-priori
    certificate is cross-checked exactly (d = 1) or on a grid.
    """
    eps = check_eps(eps)
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    terms = list(terms)
    if not terms:
        raise ValueError("build_beta_net needs at least one term")
    domain = domain or DomainBox(0.0, 1.0, len(terms[0].frequency))
    live = [t for t in terms if t.amplitude != 0.0]
    if not live:
        return _zero_beta(domain, mode)
    n = len(live)
    nets, bounds, cert = [], [], 0.0
    for t in live:
        eps_k = min(COSINE_EPS_CAP, eps / (n * t.amplitude))
        net, lb = _term_net(t, eps_k, domain)
        cert += t.amplitude * net.meta["certified_sup"]
        nets.append(scale_output(net, t.amplitude))
        bounds.append(lb)
    total_amp = float(sum(t.amplitude for t in live))
    if mode == WIDTH_ABSORB:
        depth = max(net.depth for net in nets)
        out = linear_combine_width([extend_depth(net, depth) for net in nets], [1.0] * n)
        depth_bound = max(bounds)
    else:
        s = special_sum(nets)
        out = to_standard(s)
        depth_bound = float(sum(bounds))
    if cert > eps * (1 + 1e-12):
        raise CertificationError(f"beta net certificate {cert:.3e} exceeds eps={eps:.3e}")
    out = out.with_meta(builder="beta", certified_sup=cert, n_terms=n, mode=mode,
                        range=[-total_amp - cert, total_amp + cert], depth_bound=depth_bound,
                        term_depth_bounds=bounds)
    if verify:
        observed = beta_sup_error(out, live)
        if observed > cert * (1 + 1e-9) + 1e-12:
            raise CertificationError(
                f"beta net error {observed:.3e} exceeds its certificate {cert:.3e}")
        out.meta["observed_sup"] = observed
    return out


def beta_sup_error(net, terms):
    """Largest observed ``|net - beta|``: at breakpoints and bisection points
    of the exact piecewise-linear form in 1D, on a grid otherwise."""
    dom = net.domain
    if dom.dim == 1:
        pwl = exact_pwl_1d(net)
        curv = float(sum(t.amplitude * t.frequency[0] ** 2 for t in terms))
        _, observed = pwl_sup_certificate(
            pwl, lambda x: beta_evaluate(terms, x.reshape(-1, 1)), curv,
            target=max(net.meta.get("certified_sup", 0.0), 1e-15), max_rounds=8)
        return observed
    X = dom.grid(CERT_GRID_ND if dom.dim == 2 else 40)
    return float(np.max(np.abs(net.predict(X) - beta_evaluate(terms, X))))


# -- the residual recursion ----------------------------------------------------

def _pad_all(nets, width):
    return [pad_width(n, width) for n in nets]


def _prime_domain(D):
    r = D + PRIME_MARGIN
    return DomainBox(-r, r, 1)


def _z_special(phi, eps, mode, grid):
    """Type-2 special network for ``z_L`` plus its a-priori error bound."""
    L = phi.l_ff
    D = ff_intermediate_bound(phi, grid)
    pdom = _prime_domain(D)
    lams = [phi.lipschitz_prime(j) for j in range(1, L)]
    # T[j] bounds the error carried into stage j; stage j spends at most T[j+1]/2
    T = [0.0] * (L + 1)
    T[L] = eps
    for j in range(L - 1, 0, -1):
        T[j] = 0.0 if j == 1 else min(T[j + 1] / (2.0 * (1.0 + lams[j - 1])), PRIME_MARGIN)
    h_list, hp_list, stages = [], [], []
    E = 0.0
    for j in range(1, L):
        e = T[j + 1] / 2.0 if j == 1 else T[j + 1] / 4.0
        h = build_beta_net(phi.beta_terms(j), e, phi.domain, mode, verify=False)
        hp = build_beta_net(phi.beta_prime_terms(j), e, pdom, mode, verify=False)
        E_next = E * (1.0 + lams[j - 1]) + h.meta["certified_sup"] + hp.meta["certified_sup"]
        stages.append({"stage": f"z_{j + 1}", "eps_beta": e, "eps_beta_prime": e,
                       "lipschitz_prime": lams[j - 1], "carried_error": E,
                       "error_bound": E_next, "beta": _stage(h), "beta_prime": _stage(hp)})
        if E_next > T[j + 1] * (1 + 1e-12):
            raise CertificationError(f"stage z_{j + 1}: error bound {E_next:.3e} exceeds "
                                     f"its budget {T[j + 1]:.3e}")
        E = E_next
        h_list.append(h)
        hp_list.append(hp)
    w = max(n.width for n in h_list + hp_list)
    p_ranges = [[0.0, 0.0]] + [[-(D + T[j]), D + T[j]] for j in range(2, L)]
    try:
        s = special_recursive(_pad_all(h_list, w), _pad_all(hp_list, w), p_ranges)
    except CompositionDomainError as exc:
        raise CertificationError(f"intermediate range violation: {exc}") from None
    s.meta.update(error_bound=E, D=D, stage_budgets=T[1:], stages=stages)
    return s


def _stage(net):
    return {"width": net.width, "depth": net.depth, "certified_sup": net.meta["certified_sup"],
            "depth_bound": net.meta["depth_bound"], "n_terms": net.meta["n_terms"]}


def build_z_net(phi, eps, mode=WIDTH_ABSORB, grid=None):
    """Standard ReLU net within ``eps`` of ``z_L`` on the domain of ``phi``."""
    eps = check_eps(eps)
    grid = grid or _default_grid(phi.dim)
    s = _z_special(phi, eps, mode, grid)
    net = to_standard(s, "declared")
    check_valid(net)
    observed = _grid_check(net, lambda X: phi.z_values(X)[-1], s.meta["error_bound"], "z")
    return net.with_meta(builder="z", certified_sup=s.meta["error_bound"], observed_sup=observed,
                         D=s.meta["D"], stagewise=s.meta["stages"],
                         depth_bound=_z_depth_bound(s.meta["stages"]))


def _z_depth_bound(stages):
    return float(sum(st["beta"]["depth_bound"] + st["beta_prime"]["depth_bound"] for st in stages))


def _default_grid(d):
    return CERT_GRID_1D if d == 1 else (CERT_GRID_ND if d == 2 else 24)


def _cert_points(domain):
    return domain.grid(_default_grid(domain.dim))


def _grid_check(net, f, cert, stage):
    X = _cert_points(net.domain)
    observed = float(np.max(np.abs(net.predict(X) - f(X))))
    if observed > cert * (1 + 1e-9) + 1e-12:
        raise CertificationError(f"stage {stage}: grid error {observed:.3e} exceeds "
                                 f"certificate {cert:.3e}")
    return observed


def width_bound(phi, mode):
    d = phi.dim
    if mode == WIDTH_ABSORB:
        return W_COS * phi.w_ff + d + 1
    return max(W_COS + d + 1, W_COS + 3) + d + 1


def build_ff_approx(phi, eps, mode=WIDTH_ABSORB, grid=None):
    """Certified ReLU approximation of ``f_Phi``; returns ``(net, ledger)``.

    ``beta_0`` and ``z_L`` each get ``eps/2``. The recursion's special network
    and a special sum for ``beta_0`` are concatenated before conversion, so
    the width is that of the recursion.
    """
    eps = check_eps(eps)
    budget = EpsBudget(eps, eps / 2.0, eps / 2.0)
    grid = grid or _default_grid(phi.dim)
    try:
        b0 = build_beta_net(phi.beta_terms(0), budget.allocate("beta_0", eps / 2.0),
                            phi.domain, mode, verify=False)
        zs = _z_special(phi, budget.allocate("z", eps / 2.0), mode, grid)
    except FFReluError as exc:
        raise type(exc)(f"build_ff_approx: {exc}") from None
    s0 = special_sum([b0])
    w = max(zs.width, s0.width)
    s = special_concat(pad_special(zs, w), pad_special(s0, w))
    net = to_standard(s, "declared")
    check_valid(net)
    cert = b0.meta["certified_sup"] + zs.meta["error_bound"]
    if cert > eps * (1 + 1e-12):
        raise CertificationError(f"certificate {cert:.3e} exceeds eps={eps:.3e}")
    observed = _grid_check(net, phi.predict, cert, "f_Phi")
    stagewise = [{"stage": "beta_0", **_stage(b0)}] + zs.meta["stages"]
    l_bound = b0.meta["depth_bound"] + _z_depth_bound(zs.meta["stages"])
    ledger = ComplexityLedger(net.width, net.depth, width_bound(phi, mode), l_bound, stagewise)
    net = net.with_meta(builder="ff_approx", eps=eps, mode=mode, certified_sup=cert,
                        observed_sup=observed, D=zs.meta["D"], ledger=ledger.to_dict(),
                        budget=asdict(budget))
    return net, ledger


# -- end to end ------------------------------------------------------------------

@dataclass
class ApproxReport:
    eps_tol: float
    eps_ff_measured: float
    eps_relu_certified: float
    l2_error: float
    W: int
    L: int
    WL: int
    bound_rhs: float
    ratio: float | None
    stagewise: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), default=float)


def implied_constant(err, rhs):
    """``err**2 / rhs``, equal to ``err**2 * W L`` over the WL-free part of
    the bound; zero for a zero error."""
    if err == 0.0:
        return 0.0
    return err * err / rhs


def _fit_for(target, config):
    cfg = dict(config)
    n = int(cfg.pop("n_samples", 2048))
    seed = int(cfg.pop("seed", 0))
    X = target.domain.grid(n) if target.dim == 1 else \
        np.random.default_rng(seed).uniform(0.0, 1.0, (n, target.dim))
    return fit_ff_layerwise(X, target(X), cfg.pop("w_ff"), cfg.pop("l_ff"),
                            cfg.pop("freq_budget"), seed=seed, **cfg)


def approximate_target(target, eps_tol, phi=None, fit_config=None, mode=WIDTH_ABSORB,
                       l2_grid=None):
    """Fit (or take) a Fourier features network for ``target`` and compile it
    with tolerance ``eps_tol / 2``. Returns ``(net, report)``."""
    eps_tol = check_eps(eps_tol, "eps_tol")
    if phi is None:
        if fit_config is None:
            raise ValueError("supply either phi or fit_config")
        phi = _fit_for(target, fit_config)
    net, ledger = build_ff_approx(phi, eps_tol / 2.0, mode)
    if target.linf_norm is None or target.fhat_l1 is None:
        target.with_norms()
    ff_err = l2_error(target, phi, grid=l2_grid)
    err = l2_error(target, net, grid=l2_grid)
    if target.linf_norm == 0.0:
        rhs, ratio = 0.0, (0.0 if err == 0.0 else None)
    else:
        rhs = bound_rhs(target, net.width, net.depth)
        ratio = implied_constant(err, rhs)
    report = ApproxReport(eps_tol, ff_err, net.meta["certified_sup"], err, net.width, net.depth,
                          net.width * net.depth, rhs, ratio, ledger.stagewise)
    return net.with_meta(report=report.to_dict()), report


class ReluApproximator(RegressorMixin, BaseEstimator):
    """Fits a Fourier features network and compiles it into a certified ReLU net."""

    def __init__(self, w_ff=16, l_ff=2, freq_budget=100.0, eps=0.05, mode=WIDTH_ABSORB,
                 ridge=1e-10, include_freqs=(), random_state=0):
        self.w_ff = w_ff
        self.l_ff = l_ff
        self.freq_budget = freq_budget
        self.eps = eps
        self.mode = mode
        self.ridge = ridge
        self.include_freqs = include_freqs
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if X.min() < 0.0 or X.max() > 1.0:
            raise ValueError("inputs must lie in [0, 1]^d")
        self.ff_network_ = fit_ff_layerwise(X, y, self.w_ff, self.l_ff, self.freq_budget,
                                            seed=self.random_state, ridge=self.ridge,
                                            include_freqs=self.include_freqs)
        self.network_, self.ledger_ = build_ff_approx(self.ff_network_, self.eps, self.mode)
        self.certified_sup_ = self.network_.meta["certified_sup"]
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "network_")
        X = check_points(X, self.n_features_in_)
        return self.network_.predict(X)
