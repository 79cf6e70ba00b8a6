"""Error metrics, target functions, the alpha exponent and bound evaluation."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import sici

from ._validation import check_eps, check_points
from .certify import pwl_sup_certificate
from .exceptions import DataError, ShapeError
from .network import DomainBox, ReluNetwork, exact_pwl_1d

TABLE_EPS = tuple(10.0 ** -k for k in range(1, 11))
L2_POINTS_1D = 2 ** 14
L2_POINTS_ND = 256


def alpha(eps):
    """``-log2(log2(1/eps)**2) / log2(eps)``."""
    eps = check_eps(eps)
    return -math.log2(math.log2(1.0 / eps) ** 2) / math.log2(eps)


def alpha_table_value(eps):
    """Smallest three-decimal value not below ``alpha(eps)``."""
    return math.ceil(alpha(eps) * 1000.0 - 1e-9) / 1000.0


def alpha_table(eps_values=TABLE_EPS):
    return [(e, alpha(e), alpha_table_value(e)) for e in eps_values]


def sine_integral(x):
    """``Si(x) = int_0^x sin(t)/t dt``."""
    return sici(x)[0]


@dataclass
class TargetFunction:
    """Target on ``[0, 1]^dim`` with norm metadata.

    ``curvature`` bounds ``|f''|`` in 1D and enables certified sup errors.
    ``extension_window`` is the half-width of the window on which ``func`` is
    sampled for the Fourier norm estimate; None means zero extension.
    """

    name: str
    func: Callable
    dim: int = 1
    linf_norm: float | None = None
    fhat_l1: float | None = None
    omega_max: float | None = None
    curvature: float | None = None
    extension_window: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.linf_norm is not None and self.fhat_l1 is not None:
            if self.linf_norm > self.fhat_l1 * (1 + 1e-9):
                raise DataError(f"{self.name}: sup norm {self.linf_norm} exceeds "
                                f"Fourier L1 norm {self.fhat_l1}")

    def __call__(self, X):
        X = check_points(X, self.dim)
        return np.asarray(self.func(X), dtype=float).reshape(-1)

    @property
    def domain(self):
        return DomainBox(0.0, 1.0, self.dim)

    def with_norms(self, grid=2 ** 16, fft_points=2 ** 20):
        """Fill in missing norms: grid maximum for the sup norm, FFT estimate
        for the Fourier L1 norm."""
        linf = self.linf_norm
        if linf is None:
            linf = estimate_linf(self, grid)
        fhat = self.fhat_l1
        if fhat is None:
            fhat = estimate_fhat_l1(self, fft_points)
            self.meta["fhat_l1_estimated"] = True
        self.linf_norm, self.fhat_l1 = float(linf), float(fhat)
        self.__post_init__()
        return self


def estimate_linf(f, grid=2 ** 16):
    n = grid if f.dim == 1 else max(64, int(round(grid ** (1.0 / f.dim))))
    return float(np.max(np.abs(f(f.domain.grid(n + 1 if f.dim == 1 else n)))))


def estimate_fhat_l1(f, n=2 ** 20):
    """Estimate of ``int |f^(w)| dw`` with ``f(x) = int f^(w) exp(iwx) dw``.

    The function is sampled on a window around [0, 1]^d where it is evaluated
    by its own formula (or is zero outside [0, 1]^d when no window is set).
    With window-periodic samples the integral reduces to ``sum |FFT| / N``.
    """
    if f.dim != 1:
        raise DataError("Fourier norm estimation is implemented for d = 1; supply fhat_l1")
    half = f.extension_window
    if half is None:
        x = np.linspace(-1.0, 2.0, n, endpoint=False)
        vals = np.where((x >= 0) & (x <= 1), f.func(np.clip(x, 0, 1).reshape(-1, 1)), 0.0)
    else:
        x = 0.5 + np.linspace(-half, half, n, endpoint=False)
        vals = f.func(x.reshape(-1, 1))
    return float(np.sum(np.abs(np.fft.fft(np.asarray(vals).reshape(-1)))) / n)


def _regularized_sine(X, width=1e-2):
    t = X[:, 0] - 0.5
    return sine_integral(t / width) * np.exp(-t * t / 2.0)


def target_library(name, **kw):
    """Named targets: ``regularized_sine``, ``cosine``, ``gaussian``, ``product2d``."""
    if name == "regularized_sine":
        width = float(kw.get("width", 1e-2))
        # |Si''| < 0.44, |Si'| <= 1, |Si| < 1.86 and the Gaussian factor has |g'| <= 1/2, |g''| <= 1
        curv = 1.0 / width ** 2 + 2.0 / width + 3.0
        return TargetFunction("regularized_sine", lambda X: _regularized_sine(X, width), 1,
                              omega_max=1.0 / width, curvature=curv, extension_window=16.0,
                              meta={"width": width})
    if name == "cosine":
        w = float(kw.get("freq", 2 * math.pi))
        phase = float(kw.get("phase", 0.0))
        return TargetFunction("cosine", lambda X: np.cos(w * X[:, 0] + phase), 1,
                              linf_norm=1.0 if w >= math.pi or phase == 0.0 else None,
                              fhat_l1=1.0, omega_max=w, curvature=w * w, meta={"freq": w})
    if name == "gaussian":
        c = float(kw.get("center", 0.5))
        s = float(kw.get("scale", 0.1))
        return TargetFunction("gaussian", lambda X: np.exp(-(X[:, 0] - c) ** 2 / (2 * s * s)), 1,
                              linf_norm=1.0 if 0.0 <= c <= 1.0 else None, fhat_l1=1.0,
                              curvature=1.0 / (s * s), meta={"center": c, "scale": s})
    if name == "product2d":
        w = float(kw.get("freq", 2 * math.pi))
        return TargetFunction("product2d", lambda X: np.cos(w * X[:, 0]) * np.cos(w * X[:, 1]), 2,
                              linf_norm=1.0, fhat_l1=1.0, omega_max=w, meta={"freq": w})
    raise KeyError(f"unknown target {name!r}")


def _as_callable(g, dim):
    if isinstance(g, (ReluNetwork, TargetFunction)) or hasattr(g, "predict"):
        return lambda X: np.asarray(g.predict(X) if hasattr(g, "predict") else g(X)).reshape(-1)
    return lambda X: np.asarray(g(X), dtype=float).reshape(-1)


def _trapezoid_weights(n):
    w = np.full(n, 1.0 / (n - 1))
    w[[0, -1]] *= 0.5
    return w


def l2_error(f, net, grid=None, dim=None, return_info=False):
    """Trapezoid-rule estimate of ``||f - net||_{L2([0,1]^d)}``.

    ``grid`` counts intervals per axis. The Richardson-style check compares
    against the estimate on the half grid.
    """
    d = dim or getattr(f, "dim", None) or net.domain.dim
    if hasattr(net, "domain") and net.domain.dim != d:
        raise ShapeError("target and network dimensions differ")
    n = grid or (L2_POINTS_1D if d == 1 else L2_POINTS_ND)
    F, G = _as_callable(f, d), _as_callable(net, d)

    def at(n_int):
        X = DomainBox(0.0, 1.0, d).grid(n_int + 1)
        e2 = (F(X) - G(X)) ** 2
        w1 = _trapezoid_weights(n_int + 1)
        W = w1
        for _ in range(d - 1):
            W = np.multiply.outer(W, w1)
        return float(np.sqrt(max(0.0, np.dot(W.ravel(), e2))))

    val = at(n)
    if not return_info:
        return val
    coarse = at(max(2, n // 2))
    return val, {"intervals_per_axis": n, "richardson_delta": abs(val - coarse)}


def sup_error(f, net, grid=None):
    """``(value, certified)``. In 1D with a curvature bound (or a network
    target) the value is a certified upper bound from breakpoint
    propagation; otherwise it is a grid maximum."""
    d = getattr(f, "dim", None) or net.domain.dim
    if net.domain.dim != d:
        raise ShapeError("target and network dimensions differ")
    if d == 1 and isinstance(net, ReluNetwork):
        pwl = exact_pwl_1d(net)
        if isinstance(f, ReluNetwork):
            other = exact_pwl_1d(f)
            x = np.union1d(pwl.breakpoints, other.breakpoints)
            return float(np.max(np.abs(pwl(x) - other(x)))), True
        curv = getattr(f, "curvature", None)
        if curv is not None:
            F = _as_callable(f, 1)
            grid_x = np.linspace(net.domain.lo, net.domain.hi, (grid or L2_POINTS_1D) + 1)
            tight = float(np.max(np.abs(F(grid_x.reshape(-1, 1)) - pwl(grid_x))))
            bound, _ = pwl_sup_certificate(pwl, lambda x: F(x.reshape(-1, 1)), curv,
                                           target=tight * 1.01 + 1e-12)
            return max(bound, tight), True
    n = grid or (L2_POINTS_1D if d == 1 else L2_POINTS_ND)
    X = DomainBox(0.0, 1.0, d).grid(n + 1) if d > 1 else np.linspace(0, 1, n + 1).reshape(-1, 1)
    F, G = _as_callable(f, d), _as_callable(net, d)
    return float(np.max(np.abs(F(X) - G(X)))), False


def bound_rhs(f, w, l):
    """``d ||f||_inf**2 / (W L) * (1 + ln(||f^||_1 / ||f||_inf))**2``."""
    if f.linf_norm is None or f.fhat_l1 is None:
        raise DataError(f"{f.name}: sup norm and Fourier L1 norm are required")
    if w * l <= 0:
        raise ValueError("W * L must be positive")
    return f.dim * f.linf_norm ** 2 / (w * l) * (1.0 + math.log(f.fhat_l1 / f.linf_norm)) ** 2


def bound_ratio(err, f, w, l):
    """``err**2 / bound_rhs``: the implied constant."""
    return err * err / bound_rhs(f, w, l)


REPORT_COLUMNS = ("eps", "W", "L", "WL", "l2_error", "sup_error", "bound_rhs", "ratio", "seed")


def write_report_csv(rows):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(REPORT_COLUMNS)
    for r in rows:
        wr.writerow([repr(float(r[c])) if c not in ("W", "L", "WL", "seed") else int(r[c])
                     for c in REPORT_COLUMNS])
    return buf.getvalue()


def read_report_csv(text):
    rd = csv.DictReader(io.StringIO(text))
    if tuple(rd.fieldnames or ()) != REPORT_COLUMNS:
        raise DataError(f"unexpected CSV header {rd.fieldnames}")
    return [{c: (int(v) if c in ("W", "L", "WL", "seed") else float(v)) for c, v in row.items()}
            for row in rd]
