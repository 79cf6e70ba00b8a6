"""Standard uniform-width ReLU networks: representation, evaluation, padding,
depth extension, exact 1D piecewise-linear form and JSON documents."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._validation import check_points, check_positive_int
from .exceptions import DocumentError, DomainError, ShapeError

DOMAIN_TOL = 1e-12
KINK_DEDUPE_REL = 1e-12


@dataclass(frozen=True)
class DomainBox:
    """The hypercube ``[lo, hi]^dim``."""

    lo: float
    hi: float
    dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        check_positive_int(self.dim, "dim")
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or not self.lo < self.hi:
            raise ValueError(f"domain needs finite lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def span(self):
        return self.hi - self.lo

    @property
    def nonnegative(self):
        return self.lo >= 0.0

    def contains(self, X, tol=DOMAIN_TOL):
        X = np.asarray(X, dtype=float)
        return bool(np.all(X >= self.lo - tol) and np.all(X <= self.hi + tol))

    def contains_interval(self, lo, hi, tol=DOMAIN_TOL):
        return lo >= self.lo - tol and hi <= self.hi + tol

    def grid(self, n):
        """Tensor grid with ``n`` points per axis, as an (n**dim, dim) array."""
        axis = np.linspace(self.lo, self.hi, n)
        mesh = np.meshgrid(*([axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "dim": self.dim}


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AffineLayer:
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.bias, dtype=float).reshape(-1)
        if w.ndim != 2:
            raise ShapeError(f"weights must be 2D, got shape {w.shape}")
        object.__setattr__(self, "weights", _readonly(w))
        object.__setattr__(self, "bias", _readonly(b))

    @property
    def rows(self):
        return self.weights.shape[0]

    @property
    def cols(self):
        return self.weights.shape[1]

    def apply(self, H):
        return H @ self.weights.T + self.bias

    def equals(self, other):
        return (self.weights.shape == other.weights.shape
                and np.array_equal(self.weights, other.weights)
                and np.array_equal(self.bias, other.bias))


def forward(layers, X, masks=None):
    """Forward pass through an affine stack.

    ``masks[l]`` marks ReLU-free neurons of hidden layer ``l``; ``None`` means
    every hidden neuron is rectified.
    """
    H = X
    last = len(layers) - 1
    for i, layer in enumerate(layers):
        H = layer.apply(H)
        if i < last:
            if masks is None or masks[i] is None:
                H = np.maximum(H, 0.0)
            else:
                H = np.where(masks[i], H, np.maximum(H, 0.0))
    return H


class ReluNetwork:
    """Fixed-width ReLU network ``A_L o relu o ... o relu o A_0`` on a box.

    ``layers`` holds the ``depth + 1`` affine maps. ``meta`` is a free-form
    dict; the key ``"range"`` holds a declared output interval used by
    composition checks.
    """

    def __init__(self, domain, layers, meta=None):
        if not isinstance(domain, DomainBox):
            raise TypeError("domain must be a DomainBox")
        layers = tuple(l if isinstance(l, AffineLayer) else AffineLayer(*l) for l in layers)
        if len(layers) < 2:
            raise ShapeError("a network needs at least one hidden layer")
        self.domain = domain
        self.layers = layers
        self.meta = dict(meta or {})

    @property
    def width(self):
        return self.layers[0].rows

    @property
    def depth(self):
        return len(self.layers) - 1

    @property
    def input_dim(self):
        return self.layers[0].cols

    def __repr__(self):
        return (f"ReluNetwork(W={self.width}, L={self.depth}, d={self.domain.dim}, "
                f"domain=[{self.domain.lo:g}, {self.domain.hi:g}])")

    def predict(self, X, check_domain=True):
        X = check_points(X, self.domain.dim)
        if check_domain and not self.domain.contains(X):
            raise DomainError(f"points outside [{self.domain.lo}, {self.domain.hi}]^{self.domain.dim}")
        return forward(self.layers, X)[:, 0]

    __call__ = predict

    def evaluate(self, point):
        """Value at a single point."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.shape != (self.domain.dim,):
            raise ShapeError(f"expected a point of dimension {self.domain.dim}, got shape {point.shape}")
        return float(self.predict(point.reshape(1, -1))[0])

    def hidden_activations(self, X):
        X = check_points(X, self.domain.dim)
        out, H = [], X
        for layer in self.layers[:-1]:
            H = np.maximum(layer.apply(H), 0.0)
            out.append(H)
        return out

    def with_meta(self, **updates):
        meta = dict(self.meta)
        meta.update(updates)
        return ReluNetwork(self.domain, self.layers, meta)

    def structurally_equal(self, other):
        return (self.domain == other.domain and len(self.layers) == len(other.layers)
                and all(a.equals(b) for a, b in zip(self.layers, other.layers)))

    @property
    def n_parameters(self):
        return sum(l.weights.size + l.bias.size for l in self.layers)


@dataclass(frozen=True)
class ValidationResult:
    valid: bool
    layer: int | None = None
    message: str = ""

    def __bool__(self):
        return self.valid


def validate(net):
    """Check the uniform-width layer shapes of ``net``; report the first violation."""
    layers, d = net.layers, net.domain.dim
    w = layers[0].rows
    for i, layer in enumerate(layers):
        if layer.bias.shape != (layer.rows,):
            return ValidationResult(False, i, f"shape mismatch: bias length {layer.bias.size} != {layer.rows} rows")
        if not (np.all(np.isfinite(layer.weights)) and np.all(np.isfinite(layer.bias))):
            return ValidationResult(False, i, "non-finite entry")
        want_cols = d if i == 0 else w
        want_rows = 1 if i == len(layers) - 1 else w
        if layer.cols != want_cols:
            return ValidationResult(False, i, f"expected {want_cols} columns, got {layer.cols}")
        if layer.rows != want_rows:
            return ValidationResult(False, i, f"expected {want_rows} rows, got {layer.rows}")
    return ValidationResult(True)


def check_valid(net):
    res = validate(net)
    if not res:
        raise ShapeError(f"invalid network at layer {res.layer}: {res.message}")
    return net


def identity_net(domain=None):
    """Width-2 depth-1 net realizing ``relu(x) - relu(-x) = x``."""
    domain = domain or DomainBox(-1.0, 1.0)
    return ReluNetwork(domain, [AffineLayer([[1.0], [-1.0]], [0.0, 0.0]),
                                AffineLayer([[1.0, -1.0]], [0.0])])


def constant_net(value, domain, width=1):
    d = domain.dim
    return ReluNetwork(domain, [AffineLayer(np.zeros((width, d)), np.zeros(width)),
                                AffineLayer(np.zeros((1, width)), [float(value)])],
                       {"range": [float(value), float(value)]})


def pad_width(net, target_w):
    """Append dead neurons so every hidden layer has ``target_w`` neurons."""
    w = net.width
    if target_w < w:
        raise ValueError(f"target width {target_w} is smaller than width {w}")
    if target_w == w:
        return net
    extra = target_w - w
    layers = []
    for i, layer in enumerate(net.layers):
        W, b = layer.weights, layer.bias
        if i > 0:
            W = np.hstack([W, np.zeros((W.shape[0], extra))])
        if i < net.depth:
            W = np.vstack([W, np.zeros((extra, W.shape[1]))])
            b = np.concatenate([b, np.zeros(extra)])
        layers.append(AffineLayer(W, b))
    return ReluNetwork(net.domain, layers, net.meta)


def extend_depth(net, target_l):
    """Append width-2 identity blocks so the net has depth ``target_l``."""
    if target_l < net.depth:
        raise ValueError(f"target depth {target_l} is smaller than depth {net.depth}")
    if net.layers[-1].rows != 1:
        raise ShapeError("depth extension needs a scalar-output network")
    if target_l == net.depth:
        return net
    if net.width < 2:
        net = pad_width(net, 2)
    w = net.width
    out = net.layers[-1]
    row = out.weights[0]
    layers = list(net.layers[:-1])
    first = np.zeros((w, w))
    first[0], first[1] = row, -row
    layers.append(AffineLayer(first, np.zeros(w)))
    ident = np.zeros((w, w))
    ident[:2, :2] = [[1.0, -1.0], [-1.0, 1.0]]
    for _ in range(target_l - net.depth - 1):
        layers.append(AffineLayer(ident, np.zeros(w)))
    last = np.zeros((1, w))
    last[0, :2] = [1.0, -1.0]
    layers.append(AffineLayer(last, out.bias))
    return ReluNetwork(net.domain, layers, net.meta)


def restrict_domain(net, lo, hi):
    dom = DomainBox(lo, hi, net.domain.dim)
    if not net.domain.contains_interval(dom.lo, dom.hi):
        raise DomainError(f"[{lo}, {hi}] is not inside [{net.domain.lo}, {net.domain.hi}]")
    return ReluNetwork(dom, net.layers, net.meta)


def scale_output(net, coeff, offset=0.0):
    """Net realizing ``coeff * f + offset``."""
    out = net.layers[-1]
    layers = list(net.layers[:-1]) + [AffineLayer(coeff * out.weights, coeff * out.bias + offset)]
    meta = {k: v for k, v in net.meta.items() if k != "range"}
    if "range" in net.meta:
        lo, hi = sorted((coeff * net.meta["range"][0] + offset, coeff * net.meta["range"][1] + offset))
        meta["range"] = [lo, hi]
    return ReluNetwork(net.domain, layers, meta)


# -- exact piecewise-linear form in one dimension -----------------------------

@dataclass(frozen=True, eq=False)
class PiecewiseLinear1D:
    """Continuous piecewise-linear function given by its values at breakpoints."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 2:
            raise ShapeError("breakpoints and values must be equal-length vectors of length >= 2")
        if np.any(np.diff(x) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", _readonly(x))
        object.__setattr__(self, "values", _readonly(v))

    @property
    def slopes(self):
        return np.diff(self.values) / np.diff(self.breakpoints)

    @property
    def interior_breakpoints(self):
        """Points where the slope actually changes."""
        s = self.slopes
        scale = 1.0 + np.abs(s[:-1]) + np.abs(s[1:])
        kink = np.abs(np.diff(s)) > 1e-9 * scale
        return self.breakpoints[1:-1][kink]

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.breakpoints, self.values)

    def continuity_defect(self):
        """Largest relative mismatch between a segment's end and the next start."""
        x, v = self.breakpoints, self.values
        end = v[:-1] + self.slopes * np.diff(x)
        return float(np.max(np.abs(end - v[1:]) / (1.0 + np.abs(v[1:]))))

    def min(self):
        return float(self.values.min())

    def max(self):
        return float(self.values.max())


def propagate_kinks(layers, lo, hi, masks=None, track_ranges=False):
    """Breakpoint propagation through a scalar-input affine stack.

    Returns ``(points, outputs, ranges)``. Between consecutive points every
    neuron is affine. ``ranges[l]`` is a (min, max) pair of arrays for hidden
    layer ``l`` when ``track_ranges`` is set.
    """
    tol = KINK_DEDUPE_REL * (hi - lo)
    xs = np.array([lo, hi], dtype=float)
    H = xs.reshape(-1, 1)
    ranges = []
    last = len(layers) - 1
    for i, layer in enumerate(layers[:-1]):
        Z = layer.apply(H)
        relu = np.ones(layer.rows, bool) if masks is None or masks[i] is None else ~np.asarray(masks[i])
        Zr = Z[:, relu]
        seg, col = np.nonzero(Zr[:-1] * Zr[1:] < 0.0)
        if seg.size:
            z0, z1 = Zr[seg, col], Zr[seg + 1, col]
            frac = z0 / (z0 - z1)
            roots = xs[seg] + (xs[seg + 1] - xs[seg]) * frac
            order = np.argsort(roots)
            roots, seg, frac = roots[order], seg[order], frac[order]
            keep = (roots - xs[seg] > tol) & (xs[seg + 1] - roots > tol)
            roots, seg, frac = roots[keep], seg[keep], frac[keep]
            if roots.size:
                gap = np.concatenate([[np.inf], np.diff(roots)])
                keep = gap > tol
                roots, seg, frac = roots[keep], seg[keep], frac[keep]
                Hnew = H[seg] + (H[seg + 1] - H[seg]) * frac[:, None]
                xs_all = np.concatenate([xs, roots])
                order = np.argsort(xs_all, kind="stable")
                xs = xs_all[order]
                H = np.vstack([H, Hnew])[order]
                Z = layer.apply(H)
        if masks is None or masks[i] is None:
            H = np.maximum(Z, 0.0)
        else:
            H = np.where(masks[i], Z, np.maximum(Z, 0.0))
        if track_ranges:
            ranges.append((H.min(axis=0), H.max(axis=0)))
    out = layers[last].apply(H)
    return xs, out, ranges


def exact_pwl_1d(net):
    """Exact piecewise-linear form of a scalar-input network."""
    if net.domain.dim != 1:
        raise ShapeError(f"exact_pwl_1d supports d = 1 only, got d = {net.domain.dim}")
    xs, out, _ = propagate_kinks(net.layers, net.domain.lo, net.domain.hi)
    return PiecewiseLinear1D(xs, out[:, 0])


def interval_bounds(layers, lo, hi, masks=None):
    """Sound layerwise interval enclosure. Returns per-hidden-layer bounds and
    the output bound."""
    l = np.asarray(lo, dtype=float)
    u = np.asarray(hi, dtype=float)
    hidden = []
    last = len(layers) - 1
    for i, layer in enumerate(layers):
        c, r = (l + u) / 2.0, (u - l) / 2.0
        mid = layer.weights @ c + layer.bias
        rad = np.abs(layer.weights) @ r
        l, u = mid - rad, mid + rad
        if i < last:
            relu = np.ones(layer.rows, bool) if masks is None or masks[i] is None else ~np.asarray(masks[i])
            l = np.where(relu, np.maximum(l, 0.0), l)
            u = np.where(relu, np.maximum(u, 0.0), u)
            hidden.append((l.copy(), u.copy()))
    return hidden, (l, u)


def certified_range(net):
    """Enclosure of the realized function's range: exact in 1D, interval
    arithmetic otherwise."""
    if net.domain.dim == 1:
        pwl = exact_pwl_1d(net)
        return pwl.min(), pwl.max()
    d = net.domain.dim
    _, (l, u) = interval_bounds(net.layers, np.full(d, net.domain.lo), np.full(d, net.domain.hi))
    return float(l[0]), float(u[0])


def output_range(net):
    """Declared range if present, else a certified one."""
    if "range" in net.meta:
        lo, hi = net.meta["range"]
        return float(lo), float(hi)
    return certified_range(net)


# -- documents -----------------------------------------------------------------

def layers_to_doc(layers):
    return [{"rows": l.rows, "cols": l.cols, "weights": l.weights.ravel().tolist(),
             "bias": l.bias.tolist()} for l in layers]


def layers_from_doc(items):
    if not isinstance(items, list) or not items:
        raise DocumentError("layers must be a nonempty list", "layers")
    layers = []
    for i, item in enumerate(items):
        loc = f"layers[{i}]"
        try:
            rows, cols = int(item["rows"]), int(item["cols"])
            w = np.asarray(item["weights"], dtype=float)
            b = np.asarray(item["bias"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise DocumentError(f"bad layer entry: {exc}", loc) from None
        if w.size != rows * cols:
            raise DocumentError(f"weights has {w.size} entries, expected {rows}x{cols}", loc + ".weights")
        if b.shape != (rows,):
            raise DocumentError(f"bias has {b.size} entries, expected {rows}", loc + ".bias")
        layers.append(AffineLayer(w.reshape(rows, cols), b))
    return layers


def domain_from_doc(item):
    try:
        return DomainBox(float(item["lo"]), float(item["hi"]), int(item["dim"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DocumentError(f"bad domain: {exc}", "domain") from None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def to_document(net):
    return {"kind": "relu", "domain": net.domain.to_dict(),
            "layers": layers_to_doc(net.layers), "meta": _jsonable(net.meta)}


def parse_document(data):
    """Decode JSON bytes or text into a dict, raising DocumentError with the
    character offset on syntax errors."""
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DocumentError("document is not UTF-8", f"byte {exc.start}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise DocumentError(exc.msg, f"line {exc.lineno} column {exc.colno} (char {exc.pos})") from None
    if not isinstance(doc, dict):
        raise DocumentError("top level must be an object", "$")
    return doc


def from_document(doc):
    if doc.get("kind") != "relu":
        raise DocumentError(f"expected kind 'relu', got {doc.get('kind')!r}", "kind")
    net = ReluNetwork(domain_from_doc(doc.get("domain")), layers_from_doc(doc.get("layers")),
                      doc.get("meta") or {})
    res = validate(net)
    if not res:
        raise DocumentError(f"invalid network: {res.message}", f"layers[{res.layer}]")
    return net


def serialize(net):
    return json.dumps(to_document(net)).encode("utf-8")


def deserialize(data):
    return from_document(parse_document(data))
