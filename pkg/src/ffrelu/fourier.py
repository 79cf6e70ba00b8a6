"""Fourier features residual networks.

A network holds frequency/amplitude tuples per layer and realizes

    z_1 = 0,  z_{l+1} = z_l + beta_l(x) + beta'_l(z_l),  f = beta_0(x) + z_L

with ``beta_l(x) = Re sum_k b_lk exp(i w_lk . x)`` and
``beta'_l(z) = Re sum_k b'_lk exp(i w'_lk z)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y

from ._validation import check_points, check_positive_int
from .exceptions import DocumentError, DomainError, FittingError, ShapeError
from .network import DomainBox, domain_from_doc, parse_document


@dataclass(frozen=True)
class CosineTerm:
    """``amplitude * cos(frequency . x - phase)``."""

    amplitude: float
    frequency: tuple
    phase: float


def to_cosine_form(b, omega):
    b = complex(b)
    omega = tuple(float(w) for w in np.atleast_1d(omega))
    amp = abs(b)
    if amp == 0.0:
        return CosineTerm(0.0, omega, 0.0)
    phase = math.atan2(-b.imag, b.real)
    if phase <= -math.pi:
        phase = math.pi
    return CosineTerm(amp, omega, phase)


def beta_evaluate(terms, theta):
    """Sum of cosine terms at one point (d-vector) or at the rows of an array."""
    theta = np.asarray(theta, dtype=float)
    single = theta.ndim <= 1
    X = theta.reshape(1, -1) if single else theta
    total = np.zeros(X.shape[0])
    for t in terms:
        total += t.amplitude * np.cos(X @ np.asarray(t.frequency) - t.phase)
    return float(total[0]) if single else total


class FourierFeaturesNetwork:
    """Frequency/amplitude tuples of a Fourier features residual network.

    ``freq`` has shape (L_FF, W_FF, d) and ``amp`` (L_FF, W_FF), for layers
    0 .. L_FF-1. ``freq_prime`` and ``amp_prime`` have shape (L_FF-1, W_FF)
    and belong to layers 1 .. L_FF-1.
    """

    def __init__(self, freq, amp, freq_prime, amp_prime, domain=None, meta=None):
        freq = np.asarray(freq, dtype=float)
        amp = np.asarray(amp, dtype=complex)
        freq_prime = np.asarray(freq_prime, dtype=float)
        amp_prime = np.asarray(amp_prime, dtype=complex)
        if freq.ndim != 3:
            raise ShapeError("freq must have shape (L_FF, W_FF, d)")
        l_ff, w_ff, d = freq.shape
        if l_ff < 2:
            raise ShapeError("L_FF must be at least 2")
        if amp.shape != (l_ff, w_ff):
            raise ShapeError(f"amp must have shape {(l_ff, w_ff)}, got {amp.shape}")
        if freq_prime.shape != (l_ff - 1, w_ff) or amp_prime.shape != (l_ff - 1, w_ff):
            raise ShapeError(f"primed tuples must have shape {(l_ff - 1, w_ff)}")
        if np.any(freq < 0) or np.any(freq_prime < 0):
            raise ValueError("frequencies must be nonnegative")
        for a in (freq, amp, freq_prime, amp_prime):
            if not np.all(np.isfinite(a)):
                raise ValueError("non-finite tuple entry")
        self.freq, self.amp = freq, amp
        self.freq_prime, self.amp_prime = freq_prime, amp_prime
        self.domain = domain or DomainBox(0.0, 1.0, d)
        if self.domain.dim != d:
            raise ShapeError("domain dimension does not match frequency dimension")
        self.meta = dict(meta or {})

    @property
    def w_ff(self):
        return self.freq.shape[1]

    @property
    def l_ff(self):
        return self.freq.shape[0]

    @property
    def dim(self):
        return self.freq.shape[2]

    def __repr__(self):
        return f"FourierFeaturesNetwork(W_FF={self.w_ff}, L_FF={self.l_ff}, d={self.dim})"

    @classmethod
    def zeros(cls, w_ff, l_ff, dim=1):
        return cls(np.zeros((l_ff, w_ff, dim)), np.zeros((l_ff, w_ff)),
                   np.zeros((l_ff - 1, w_ff)), np.zeros((l_ff - 1, w_ff)))

    @classmethod
    def random(cls, w_ff, l_ff, dim=1, rng=None, amp_scale=0.5, max_freq=2 * math.pi,
               max_freq_prime=2 * math.pi):
        """Random tuples with per-layer amplitude sums of about ``amp_scale``."""
        rng = np.random.default_rng(rng)

        def amps(shape):
            z = rng.normal(size=shape) + 1j * rng.normal(size=shape)
            return amp_scale * z / np.abs(z).sum(axis=-1, keepdims=True)

        return cls(rng.uniform(0, max_freq, (l_ff, w_ff, dim)), amps((l_ff, w_ff)),
                   rng.uniform(0, max_freq_prime, (l_ff - 1, w_ff)), amps((l_ff - 1, w_ff)))

    def beta_terms(self, layer):
        return [to_cosine_form(b, w) for b, w in zip(self.amp[layer], self.freq[layer])]

    def beta_prime_terms(self, layer):
        """Terms of ``beta'_layer`` for ``layer`` in 1 .. L_FF-1."""
        if not 1 <= layer < self.l_ff:
            raise IndexError("primed layers are numbered 1 .. L_FF-1")
        return [to_cosine_form(b, w) for b, w in
                zip(self.amp_prime[layer - 1], self.freq_prime[layer - 1])]

    def _beta(self, layer, X):
        return np.real(np.exp(1j * (X @ self.freq[layer].T)) @ self.amp[layer])

    def _beta_prime(self, layer, z):
        return np.real(np.exp(1j * np.outer(z, self.freq_prime[layer - 1])) @ self.amp_prime[layer - 1])

    def z_values(self, X):
        """``[z_1, ..., z_L]`` at the rows of X."""
        X = check_points(X, self.dim)
        z = np.zeros(X.shape[0])
        out = [z]
        for l in range(1, self.l_ff):
            z = z + self._beta(l, X) + self._beta_prime(l, z)
            out.append(z)
        return out

    def predict(self, X, check_domain=True):
        X = check_points(X, self.dim)
        if check_domain and not self.domain.contains(X):
            raise DomainError("points outside the network domain")
        return self._beta(0, X) + self.z_values(X)[-1]

    __call__ = predict

    def lipschitz_prime(self, layer):
        """``sum_k |b'_lk| w'_lk``, a Lipschitz constant of ``beta'_layer``."""
        return float(np.sum(np.abs(self.amp_prime[layer - 1]) * self.freq_prime[layer - 1]))

    def amplitude_sum(self, layer):
        return float(np.sum(np.abs(self.amp[layer])))


def ff_evaluate(phi, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.ndim <= 1 and theta.size == phi.dim:
        return float(phi.predict(theta.reshape(1, -1))[0])
    return phi.predict(theta)


def ff_intermediate_bound(phi, grid=None):
    """Upper bound on ``max_j sup |z_j|`` over the domain.

    Always sound: the amplitude-sum bound, optionally tightened by a grid
    maximum plus a Lipschitz covering margin (``grid`` points per axis).
    """
    amp_bound = 0.0
    for l in range(1, phi.l_ff):
        amp_bound += float(np.sum(np.abs(phi.amp[l])) + np.sum(np.abs(phi.amp_prime[l - 1])))
    if grid is None or amp_bound == 0.0:
        return amp_bound
    X = phi.domain.grid(grid)
    zs = phi.z_values(X)
    h = phi.domain.span / (grid - 1)
    radius = math.sqrt(phi.dim) * h / 2.0
    lip, best = 0.0, 0.0
    for l in range(1, phi.l_ff):
        lam = phi.lipschitz_prime(l)
        lip = lip * (1.0 + lam) + float(np.sum(np.abs(phi.amp[l]) * np.linalg.norm(phi.freq[l], axis=1)))
        best = max(best, float(np.max(np.abs(zs[l]))) + lip * radius)
    return min(amp_bound, best)


# -- fitting ---------------------------------------------------------------

def _features(t, omegas):
    arg = np.atleast_2d(t) @ np.atleast_2d(omegas).T if np.ndim(t) == 2 else np.outer(t, omegas)
    return np.hstack([np.cos(arg), np.sin(arg)])


def _solve(A, r, ridge):
    n, p = A.shape
    G = A.T @ A + ridge * n * np.eye(p)
    try:
        return np.linalg.solve(G, A.T @ r)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(A, r, rcond=None)[0]


def _to_complex(coef, w):
    """Coefficients of [cos | sin] features as complex amplitudes ``c - i s``."""
    return coef[:w] - 1j * coef[w:2 * w]


def fit_ff_layerwise(X, y, w_ff, l_ff, freq_budget, seed=0, prime_budget=2 * math.pi,
                     ridge=1e-10, include_freqs=(), domain=None):
    """Greedy layerwise least-squares fit of a Fourier features network.

    Layer 0 fits ``y``; each later layer fits the remaining residual with
    fresh features in ``x`` and in the current ``z``. Frequencies are uniform
    on ``[0, freq_budget]^d`` (layer 0 also gets the zero frequency and any
    ``include_freqs``). A layer that would raise the training RMSE is zeroed.
    """
    w_ff = check_positive_int(w_ff, "w_ff")
    l_ff = check_positive_int(l_ff, "l_ff", minimum=2)
    X = check_points(X, np.asarray(X).shape[1] if np.ndim(X) == 2 else 1)
    y = np.asarray(y, dtype=float).reshape(-1)
    n, d = X.shape
    if y.shape != (n,):
        raise ShapeError("X and y must have the same number of samples")
    if n < 4 * w_ff:
        raise FittingError(f"need at least {4 * w_ff} samples for w_ff={w_ff}, got {n}")
    rng = np.random.default_rng(seed)
    fixed = [np.broadcast_to(np.asarray(f, dtype=float), (d,)) for f in include_freqs]
    fixed.append(np.zeros(d))
    fixed = fixed[:w_ff]
    freq = np.zeros((l_ff, w_ff, d))
    freq[0, :len(fixed)] = fixed
    freq[0, len(fixed):] = rng.uniform(0.0, freq_budget, (w_ff - len(fixed), d))
    freq[1:] = rng.uniform(0.0, freq_budget, (l_ff - 1, w_ff, d))
    freq_prime = rng.uniform(0.0, prime_budget, (l_ff - 1, w_ff))
    amp = np.zeros((l_ff, w_ff), complex)
    amp_prime = np.zeros((l_ff - 1, w_ff), complex)

    A = _features(X, freq[0])
    coef = _solve(A, y, ridge)
    amp[0] = _to_complex(coef, w_ff)
    base = A @ coef
    z = np.zeros(n)
    history = [float(np.sqrt(np.mean((y - base) ** 2)))]
    for l in range(1, l_ff):
        r = y - base - z
        A = np.hstack([_features(X, freq[l]), _features(z, freq_prime[l - 1])])
        coef = _solve(A, r, ridge)
        step = A @ coef
        rmse = float(np.sqrt(np.mean((r - step) ** 2)))
        if rmse <= history[-1]:
            amp[l] = _to_complex(coef[:2 * w_ff], w_ff)
            amp_prime[l - 1] = _to_complex(coef[2 * w_ff:], w_ff)
            z = z + step
            history.append(rmse)
        else:
            history.append(history[-1])
    if not np.all(np.isfinite(amp)) or not np.all(np.isfinite(amp_prime)):
        raise FittingError("least-squares solve produced non-finite amplitudes")
    meta = {"train_rmse": history[-1], "rmse_history": history, "seed": seed,
            "freq_budget": float(freq_budget)}
    return FourierFeaturesNetwork(freq, amp, freq_prime, amp_prime,
                                  domain or DomainBox(0.0, 1.0, d), meta)


class FourierFeaturesRegressor(RegressorMixin, BaseEstimator):
    """Estimator wrapper around ``fit_ff_layerwise``."""

    def __init__(self, w_ff=16, l_ff=2, freq_budget=100.0, prime_budget=2 * math.pi,
                 ridge=1e-10, include_freqs=(), random_state=0):
        self.w_ff = w_ff
        self.l_ff = l_ff
        self.freq_budget = freq_budget
        self.prime_budget = prime_budget
        self.ridge = ridge
        self.include_freqs = include_freqs
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self.network_ = fit_ff_layerwise(X, y, self.w_ff, self.l_ff, self.freq_budget,
                                         seed=self.random_state, prime_budget=self.prime_budget,
                                         ridge=self.ridge, include_freqs=self.include_freqs)
        self.train_rmse_ = self.network_.meta["train_rmse"]
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "network_")
        return self.network_.predict(X, check_domain=False)


# -- documents -------------------------------------------------------------

def ff_to_document(phi):
    layers = []
    for l in range(phi.l_ff):
        item = {"freq": phi.freq[l].tolist(), "amp_re": phi.amp[l].real.tolist(),
                "amp_im": phi.amp[l].imag.tolist()}
        if l > 0:
            item.update(freq_prime=phi.freq_prime[l - 1].tolist(),
                        amp_prime_re=phi.amp_prime[l - 1].real.tolist(),
                        amp_prime_im=phi.amp_prime[l - 1].imag.tolist())
        layers.append(item)
    return {"kind": "fourier_features", "w_ff": phi.w_ff, "l_ff": phi.l_ff, "dim": phi.dim,
            "layers": layers, "domain": phi.domain.to_dict(), "meta": phi.meta}


def ff_from_document(doc):
    if doc.get("kind") != "fourier_features":
        raise DocumentError(f"expected kind 'fourier_features', got {doc.get('kind')!r}", "kind")
    try:
        w, l, d = int(doc["w_ff"]), int(doc["l_ff"]), int(doc["dim"])
        items = doc["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DocumentError(f"bad header: {exc}", "$") from None
    if not isinstance(items, list) or len(items) != l:
        raise DocumentError(f"expected {l} layers", "layers")
    freq = np.zeros((l, w, d))
    amp = np.zeros((l, w), complex)
    fp = np.zeros((l - 1, w))
    ap = np.zeros((l - 1, w), complex)
    for i, item in enumerate(items):
        loc = f"layers[{i}]"
        try:
            freq[i] = np.asarray(item["freq"], dtype=float).reshape(w, d)
            amp[i] = np.asarray(item["amp_re"], float) + 1j * np.asarray(item["amp_im"], float)
            if i > 0:
                fp[i - 1] = np.asarray(item["freq_prime"], dtype=float)
                ap[i - 1] = (np.asarray(item["amp_prime_re"], float)
                             + 1j * np.asarray(item["amp_prime_im"], float))
        except (KeyError, TypeError, ValueError) as exc:
            raise DocumentError(f"bad layer entry: {exc}", loc) from None
    dom = domain_from_doc(doc["domain"]) if "domain" in doc else None
    try:
        return FourierFeaturesNetwork(freq, amp, fp, ap, dom, doc.get("meta") or {})
    except (ShapeError, ValueError) as exc:
        raise DocumentError(str(exc), "layers") from None


def serialize_ff(phi):
    return json.dumps(ff_to_document(phi)).encode("utf-8")


def deserialize_ff(data):
    return ff_from_document(parse_document(data))
