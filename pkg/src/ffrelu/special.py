"""Networks with ReLU-free source and collation channels.

Hidden layer layout, top to bottom: ``source_width`` source neurons carrying
the input unchanged, the computational channel, and one collation neuron at
the last index. Source and collation neurons skip the ReLU. Type 1 forbids
the collation neuron from feeding the computational channel; type 2 allows
it. ``to_standard`` rewrites a special network into a plain ReLU network.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._validation import check_points
from .exceptions import (CompositionDomainError, ConversionError, DocumentError,
                         DomainError, ShapeError)
from .network import (AffineLayer, DomainBox, ReluNetwork, ValidationResult,
                      domain_from_doc, forward, interval_bounds, layers_from_doc,
                      layers_to_doc, output_range, parse_document, propagate_kinks,
                      _jsonable)

TYPE1, TYPE2 = "type1", "type2"


@dataclass(frozen=True, eq=False)
class ChannelLayout:
    source_width: int
    collation_index: int
    net_type: str
    relu_free_mask: tuple

    @classmethod
    def default(cls, source_width, width, depth, net_type):
        mask = np.zeros(width, bool)
        mask[:source_width] = True
        mask[width - 1] = True
        return cls(source_width, width - 1, net_type, tuple(mask.copy() for _ in range(depth)))

    def to_dict(self):
        return {"source_width": self.source_width, "collation_index": self.collation_index,
                "net_type": self.net_type,
                "relu_free_mask": [m.astype(bool).tolist() for m in self.relu_free_mask]}


class SpecialNetwork:
    def __init__(self, domain, layers, layout, meta=None):
        self.domain = domain
        self.layers = tuple(layers)
        self.layout = layout
        self.meta = dict(meta or {})

    @property
    def width(self):
        return self.layers[0].rows

    @property
    def depth(self):
        return len(self.layers) - 1

    @property
    def net_type(self):
        return self.layout.net_type

    @property
    def comp_slice(self):
        return slice(self.layout.source_width, self.layout.collation_index)

    def __repr__(self):
        return (f"SpecialNetwork({self.net_type}, W={self.width}, L={self.depth}, "
                f"d={self.domain.dim})")

    def predict(self, X, check_domain=True):
        X = check_points(X, self.domain.dim)
        if check_domain and not self.domain.contains(X):
            raise DomainError("points outside the network domain")
        return forward(self.layers, X, self.layout.relu_free_mask)[:, 0]

    __call__ = predict

    def hidden_activations(self, X):
        X = check_points(X, self.domain.dim)
        out, H = [], X
        for layer, mask in zip(self.layers[:-1], self.layout.relu_free_mask):
            Z = layer.apply(H)
            H = np.where(mask, Z, np.maximum(Z, 0.0))
            out.append(H)
        return out

    def has_feedback(self):
        c, comp = self.layout.collation_index, self.comp_slice
        return any(np.any(l.weights[comp, c] != 0.0) for l in self.layers[1:-1])

    def collation_chain_is_unit(self):
        """Collation carries forward with weight 1 and enters the output with weight 1."""
        c = self.layout.collation_index
        return (all(l.weights[c, c] == 1.0 for l in self.layers[1:-1])
                and self.layers[-1].weights[0, c] == 1.0)


def validate_special(s):
    """Check shapes and channel discipline of a special network."""
    lay, d, W = s.layout, s.domain.dim, s.width
    src, c = lay.source_width, lay.collation_index
    if src != d:
        return ValidationResult(False, None, f"source width {src} != input dimension {d}")
    if W < src + 2:
        return ValidationResult(False, 0, f"width {W} leaves no computational neuron")
    if c != W - 1:
        return ValidationResult(False, None, "collation neuron must be the last hidden neuron")
    if len(lay.relu_free_mask) != s.depth:
        return ValidationResult(False, None, "one mask per hidden layer is required")
    want_mask = np.zeros(W, bool)
    want_mask[:src] = True
    want_mask[c] = True
    for i, layer in enumerate(s.layers):
        want_cols = d if i == 0 else W
        want_rows = 1 if i == s.depth else W
        if layer.weights.shape != (want_rows, want_cols) or layer.bias.shape != (want_rows,):
            return ValidationResult(False, i, f"expected a {want_rows}x{want_cols} layer")
        if not (np.all(np.isfinite(layer.weights)) and np.all(np.isfinite(layer.bias))):
            return ValidationResult(False, i, "non-finite entry")
        if i == s.depth:
            break
        if not np.array_equal(np.asarray(lay.relu_free_mask[i], bool), want_mask):
            return ValidationResult(False, i, "ReLU-free mask must cover exactly source and collation")
        src_rows = layer.weights[:src]
        if not (np.array_equal(src_rows, np.eye(src, want_cols)) and np.all(layer.bias[:src] == 0.0)):
            return ValidationResult(False, i, "source neurons must copy the input with zero bias")
        if lay.net_type == TYPE1 and i > 0 and np.any(layer.weights[src:c, c] != 0.0):
            return ValidationResult(False, i, "type-1 collation feeds the computational channel")
    if lay.net_type not in (TYPE1, TYPE2):
        return ValidationResult(False, None, f"unknown net type {lay.net_type!r}")
    return ValidationResult(True)


def check_special(s):
    res = validate_special(s)
    if not res:
        raise ShapeError(f"invalid special network at layer {res.layer}: {res.message}")
    return s


def special_range(s):
    """Enclosure of the realized range: exact in 1D, interval arithmetic otherwise."""
    if "range" in s.meta:
        return tuple(float(v) for v in s.meta["range"])
    if s.domain.dim == 1:
        _, out, _ = propagate_kinks(s.layers, s.domain.lo, s.domain.hi, s.layout.relu_free_mask)
        return float(out.min()), float(out.max())
    d = s.domain.dim
    _, (l, u) = interval_bounds(s.layers, np.full(d, s.domain.lo), np.full(d, s.domain.hi),
                                s.layout.relu_free_mask)
    return float(l[0]), float(u[0])


class _Builder:
    """Accumulates hidden layers of a special network with layout
    ``[source d | computational wc | collation 1]``."""

    def __init__(self, d, wc):
        self.d, self.wc = d, wc
        self.W = d + wc + 1
        self.c = self.W - 1
        self.comp = slice(d, d + wc)
        self.layers = []
        self.coll_lower = []

    def new(self, first):
        cols = self.d if first else self.W
        M = np.zeros((self.W, cols))
        M[:self.d, :self.d] = np.eye(self.d)
        return M, np.zeros(self.W)

    def push(self, M, b, coll_lower):
        self.layers.append(AffineLayer(M, b))
        self.coll_lower.append(float(coll_lower))


def _check_common(nets, what):
    if not nets:
        raise ValueError(f"{what} needs at least one network")
    w, dom = nets[0].width, nets[0].domain
    for j, n in enumerate(nets):
        if n.width != w:
            raise ShapeError(f"{what}: net {j} has width {n.width}, expected {w}")
        if n.domain != dom:
            raise ShapeError(f"{what}: net {j} has a different domain")
    return w, dom


def special_sum(nets):
    """Type-1 special network realizing ``f_1 + ... + f_J`` with width
    ``W + 1 + d`` and depth ``L_1 + ... + L_J``."""
    nets = list(nets)
    w, dom = _check_common(nets, "special_sum")
    d = dom.dim
    bld = _Builder(d, w)
    ranges = [output_range(n) for n in nets]
    acc_lo, acc_hi = 0.0, 0.0
    prev_out = None
    for j, net in enumerate(nets):
        for l in range(net.depth):
            M, b = bld.new(j == 0 and l == 0)
            layer = net.layers[l]
            if l == 0:
                M[bld.comp, :d] = layer.weights
                if j > 0:
                    M[bld.c, bld.c] = 1.0
                    M[bld.c, bld.comp] = prev_out.weights[0]
                    b[bld.c] = prev_out.bias[0]
            else:
                M[bld.comp, bld.comp] = layer.weights
                M[bld.c, bld.c] = 1.0
            b[bld.comp] = layer.bias
            bld.push(M, b, acc_lo)
        prev_out = net.layers[-1]
        acc_lo += ranges[j][0]
        acc_hi += ranges[j][1]
    out = np.zeros((1, bld.W))
    out[0, bld.c] = 1.0
    out[0, bld.comp] = prev_out.weights[0]
    bld.layers.append(AffineLayer(out, prev_out.bias))
    layout = ChannelLayout.default(d, bld.W, len(bld.layers) - 1, TYPE1)
    return SpecialNetwork(dom, bld.layers, layout,
                          {"builder": "special_sum", "collation_lower": bld.coll_lower,
                           "range": [acc_lo, acc_hi]})


def special_iterated_sum(h, coeffs):
    """Type-1 special network realizing ``a_0 x + sum_j a_j h^{oj}(x)``.

    The first hidden layer's collation holds ``a_0 x``; the first hidden layer
    of block ``j + 1`` holds ``a_0 x + sum_{k <= j} a_k h^{ok}(x)``.
    """
    coeffs = [float(a) for a in coeffs]
    if len(coeffs) < 2:
        raise ValueError("need coefficients a_0 and at least a_1")
    if h.domain.dim != 1:
        raise ShapeError("special_iterated_sum needs a scalar-input network")
    m = len(coeffs) - 1
    dom = h.domain
    lo, hi = output_range(h)
    if m >= 2 and not dom.contains_interval(lo, hi):
        raise CompositionDomainError(
            f"range [{lo:.6g}, {hi:.6g}] is not inside domain [{dom.lo:.6g}, {dom.hi:.6g}]")
    a0 = coeffs[0]
    bld = _Builder(1, h.width)
    Mout, bout = h.layers[-1].weights, h.layers[-1].bias
    first = h.layers[0]
    coll_lo = min(a0 * dom.lo, a0 * dom.hi)
    for j in range(1, m + 1):
        for l in range(h.depth):
            M, b = bld.new(j == 1 and l == 0)
            if l == 0 and j == 1:
                M[bld.comp, 0] = first.weights[:, 0]
                M[bld.c, 0] = a0
                b[bld.comp] = first.bias
            elif l == 0:
                M[bld.comp, bld.comp] = np.outer(first.weights[:, 0], Mout[0])
                b[bld.comp] = first.weights[:, 0] * bout[0] + first.bias
                M[bld.c, bld.c] = 1.0
                M[bld.c, bld.comp] = coeffs[j - 1] * Mout[0]
                b[bld.c] = coeffs[j - 1] * bout[0]
            else:
                M[bld.comp, bld.comp] = h.layers[l].weights
                b[bld.comp] = h.layers[l].bias
                M[bld.c, bld.c] = 1.0
            bld.push(M, b, coll_lo)
        coll_lo += min(coeffs[j] * lo, coeffs[j] * hi)
    out = np.zeros((1, bld.W))
    out[0, bld.c] = 1.0
    out[0, bld.comp] = coeffs[m] * Mout[0]
    bld.layers.append(AffineLayer(out, coeffs[m] * bout))
    layout = ChannelLayout.default(1, bld.W, len(bld.layers) - 1, TYPE1)
    return SpecialNetwork(dom, bld.layers, layout,
                          {"builder": "special_iterated_sum", "collation_lower": bld.coll_lower})


def special_recursive(h_list, hprime_list, p_ranges=None):
    """Type-2 special network realizing ``p_{n+1}`` for the recursion
    ``p_1 = 0``, ``p_{j+1} = p_j + h_j(x) + h'_j(p_j)``.

    Blocks run in the order ``h'_1, h_1, h'_2, h_2, ...``. ``p_ranges`` may
    declare enclosures of ``p_1 .. p_n``; otherwise they are accumulated from
    the constituent ranges.
    """
    h_list, hprime_list = list(h_list), list(hprime_list)
    n = len(h_list)
    if n == 0 or len(hprime_list) != n:
        raise ValueError("h_list and hprime_list must be nonempty and of equal length")
    w, dom = _check_common(h_list, "special_recursive")
    for j, hp in enumerate(hprime_list):
        if hp.width != w:
            raise ShapeError(f"special_recursive: h'_{j + 1} has width {hp.width}, expected {w}")
        if hp.domain.dim != 1:
            raise ShapeError(f"special_recursive: h'_{j + 1} must take scalar input")
    d = dom.dim
    h_rng = [output_range(h) for h in h_list]
    hp_rng = [output_range(hp) for hp in hprime_list]
    P = []
    cur = (0.0, 0.0)
    for j in range(n):
        if p_ranges is not None:
            cur = tuple(float(v) for v in p_ranges[j])
        P.append(cur)
        dj = hprime_list[j].domain
        if not dj.contains_interval(*cur):
            raise CompositionDomainError(
                f"stage {j + 1}: p_{j + 1} range [{cur[0]:.6g}, {cur[1]:.6g}] is not inside "
                f"[{dj.lo:.6g}, {dj.hi:.6g}]")
        cur = (cur[0] + h_rng[j][0] + hp_rng[j][0], cur[1] + h_rng[j][1] + hp_rng[j][1])
    bld = _Builder(d, w)
    prev = None
    for j in range(n):
        hp, h = hprime_list[j], h_list[j]
        # h'_j reads p_j = collation plus the previous block's output
        for l in range(hp.depth):
            M, b = bld.new(j == 0 and l == 0)
            layer = hp.layers[l]
            if l == 0:
                col = layer.weights[:, 0]
                b[bld.comp] = layer.bias
                if j > 0:
                    M[bld.comp, bld.c] = col
                    M[bld.comp, bld.comp] = np.outer(col, prev.weights[0])
                    b[bld.comp] += col * prev.bias[0]
                    M[bld.c, bld.c] = 1.0
                    M[bld.c, bld.comp] = prev.weights[0]
                    b[bld.c] = prev.bias[0]
            else:
                M[bld.comp, bld.comp] = layer.weights
                b[bld.comp] = layer.bias
                M[bld.c, bld.c] = 1.0
            bld.push(M, b, P[j][0])
        prev = hp.layers[-1]
        for l in range(h.depth):
            M, b = bld.new(False)
            layer = h.layers[l]
            if l == 0:
                M[bld.comp, :d] = layer.weights
                M[bld.c, bld.comp] = prev.weights[0]
                b[bld.c] = prev.bias[0]
            else:
                M[bld.comp, bld.comp] = layer.weights
            M[bld.c, bld.c] = 1.0
            b[bld.comp] = layer.bias
            bld.push(M, b, P[j][0] + hp_rng[j][0])
        prev = h.layers[-1]
    out = np.zeros((1, bld.W))
    out[0, bld.c] = 1.0
    out[0, bld.comp] = prev.weights[0]
    bld.layers.append(AffineLayer(out, prev.bias))
    layout = ChannelLayout.default(d, bld.W, len(bld.layers) - 1, TYPE2)
    return SpecialNetwork(dom, bld.layers, layout,
                          {"builder": "special_recursive", "collation_lower": bld.coll_lower,
                           "range": list(cur), "p_ranges": [list(p) for p in P]})


def pad_special(s, target_w):
    """Insert dead neurons between the computational channel and the collation neuron."""
    W = s.width
    if target_w < W:
        raise ValueError(f"target width {target_w} is smaller than width {W}")
    if target_w == W:
        return s
    extra, c = target_w - W, s.layout.collation_index
    layers = []
    for i, layer in enumerate(s.layers):
        M, b = layer.weights, layer.bias
        if i > 0:
            M = np.insert(M, [c] * extra, 0.0, axis=1)
        if i < s.depth:
            M = np.insert(M, [c] * extra, 0.0, axis=0)
            b = np.insert(b, [c] * extra, 0.0)
        layers.append(AffineLayer(M, b))
    layout = ChannelLayout.default(s.layout.source_width, target_w, s.depth, s.net_type)
    return SpecialNetwork(s.domain, layers, layout, s.meta)


def special_concat(a, b):
    """Special network realizing ``f_a + f_b`` with depth ``L_a + L_b``.

    ``f_a`` is handed to the second operand's collation, so the second operand
    must have a unit collation chain and no feedback; the operands are swapped
    when only the first qualifies.
    """
    if a.width != b.width:
        raise ShapeError(f"width mismatch: {a.width} vs {b.width}")
    if a.domain != b.domain or a.layout.source_width != b.layout.source_width:
        raise ShapeError("domain or source width mismatch")

    def ok_second(s):
        return s.collation_chain_is_unit() and not s.has_feedback()

    if not ok_second(b):
        if ok_second(a):
            a, b = b, a
        else:
            raise ShapeError("neither operand can receive the other's output in its collation")
    d, c = a.layout.source_width, a.layout.collation_index
    ra = special_range(a)
    rb = special_range(b)
    out_a = a.layers[-1]
    first_b = b.layers[0]
    M = np.zeros((b.width, a.width))
    M[:, :d] = first_b.weights
    M[c] += out_a.weights[0]
    bias = first_b.bias.copy()
    bias[c] += out_a.bias[0]
    layers = list(a.layers[:-1]) + [AffineLayer(M, bias)] + list(b.layers[1:])
    net_type = TYPE1 if a.net_type == TYPE1 and b.net_type == TYPE1 else TYPE2
    layout = ChannelLayout.default(d, a.width, len(layers) - 1, net_type)
    coll_lo = None
    if "collation_lower" in a.meta and "collation_lower" in b.meta:
        coll_lo = list(a.meta["collation_lower"]) + [v + ra[0] for v in b.meta["collation_lower"]]
    meta = {"builder": "special_concat", "range": [ra[0] + rb[0], ra[1] + rb[1]]}
    if coll_lo is not None:
        meta["collation_lower"] = coll_lo
    return SpecialNetwork(a.domain, layers, layout, meta)


def collation_lower_bounds(s, method="auto"):
    """Lower bounds on the collation neuron of every hidden layer."""
    if method == "auto":
        if "collation_lower" in s.meta:
            method = "declared"
        elif s.domain.dim == 1:
            method = "exact"
        else:
            method = "interval"
    c = s.layout.collation_index
    if method == "declared":
        return np.asarray(s.meta["collation_lower"], dtype=float)
    if method == "exact":
        if s.domain.dim != 1:
            raise ValueError("exact collation bounds need d = 1")
        _, _, ranges = propagate_kinks(s.layers, s.domain.lo, s.domain.hi,
                                       s.layout.relu_free_mask, track_ranges=True)
        return np.array([r[0][c] for r in ranges])
    if method == "interval":
        d = s.domain.dim
        hidden, _ = interval_bounds(s.layers, np.full(d, s.domain.lo), np.full(d, s.domain.hi),
                                    s.layout.relu_free_mask)
        return np.array([lu[0][c] for lu in hidden])
    raise ValueError(f"unknown method {method!r}")


def collation_shift_constants(s, method="auto"):
    """Constants ``C_l >= 0`` with ``g_l + C_l >= 0`` for the collation value
    ``g_l`` of every hidden layer ``l = 0 .. L-1``."""
    lower = collation_lower_bounds(s, method)
    if not np.all(np.isfinite(lower)):
        raise ConversionError("collation channel is not certifiably bounded")
    return np.maximum(0.0, -lower)


def to_standard(s, method="auto"):
    """Rewrite a special network as a standard ReLU network.

    The collation neuron of layer ``l`` stores ``g_l + S_l`` with
    ``S_l = C_0 + ... + C_l``; readers of the collation subtract the shift in
    their bias. On domains reaching below zero each source neuron is split into
    ``relu(x)`` and ``relu(-x)``, placed right after the positive sources.
    """
    check_special(s)
    C = collation_shift_constants(s, method)
    S = np.cumsum(C)
    d, W, c, L = s.layout.source_width, s.width, s.layout.collation_index, s.depth
    expand = s.domain.lo < 0.0
    if expand:
        Wn = W + d
        new_idx = np.concatenate([np.arange(d), np.arange(d, W) + d])
    else:
        Wn = W
        new_idx = np.arange(W)

    def expand_cols(M):
        if not expand:
            return M.copy()
        out = np.zeros((M.shape[0], Wn))
        out[:, new_idx] = M
        out[:, d:2 * d] = -M[:, :d]
        return out

    layers = []
    for l in range(L + 1):
        layer = s.layers[l]
        M = layer.weights if l == 0 else expand_cols(layer.weights)
        b = layer.bias.copy()
        if l > 0:
            b -= layer.weights[:, c] * S[l - 1]
        if l < L:
            b[c] += S[l]
            if expand:
                rows = np.zeros((Wn, M.shape[1]))
                bias = np.zeros(Wn)
                rows[new_idx] = M
                bias[new_idx] = b
                if l == 0:
                    rows[d:2 * d, :d] = -np.eye(d)
                else:
                    rows[:d] = 0.0
                    rows[:d, :d] = np.eye(d)
                    rows[d:2 * d, d:2 * d] = np.eye(d)
                M, b = rows, bias
        layers.append(AffineLayer(M, b))
    for layer in layers:
        if not (np.all(np.isfinite(layer.weights)) and np.all(np.isfinite(layer.bias))):
            raise ConversionError("conversion produced non-finite parameters")
    meta = {k: v for k, v in s.meta.items() if k not in ("collation_lower", "p_ranges")}
    meta.update({"converted_from": s.net_type, "collation_shifts": S.tolist(),
                 "source_expanded": bool(expand), "special_layout": s.layout.to_dict()})
    return ReluNetwork(s.domain, layers, meta)


def from_standard(net, layout=None, shifts=None, expanded=None):
    """Undo ``to_standard`` using the layout and shifts it recorded in ``meta``."""
    lay = layout or _layout_from_dict(net.meta["special_layout"])
    S = np.asarray(net.meta["collation_shifts"] if shifts is None else shifts, dtype=float)
    expand = net.meta["source_expanded"] if expanded is None else expanded
    d, c = lay.source_width, lay.collation_index
    W = c + 1
    L = net.depth
    keep = np.concatenate([np.arange(d), np.arange(d, W) + d]) if expand else np.arange(W)
    layers = []
    for l, layer in enumerate(net.layers):
        M = layer.weights if l == 0 else layer.weights[:, keep]
        b = layer.bias.copy()
        if l < L:
            M, b = M[keep], b[keep]
            b[c] -= S[l]
        if l > 0:
            b = b + M[:, c] * S[l - 1]
        layers.append(AffineLayer(M, b))
    return SpecialNetwork(net.domain, layers, lay, {})


def _layout_from_dict(item):
    try:
        return ChannelLayout(int(item["source_width"]), int(item["collation_index"]),
                             str(item["net_type"]),
                             tuple(np.asarray(m, dtype=bool) for m in item["relu_free_mask"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DocumentError(f"bad layout: {exc}", "layout") from None


def special_to_document(s):
    return {"kind": "special", "domain": s.domain.to_dict(), "layers": layers_to_doc(s.layers),
            "layout": s.layout.to_dict(), "meta": _jsonable(s.meta)}


def special_from_document(doc):
    if doc.get("kind") != "special":
        raise DocumentError(f"expected kind 'special', got {doc.get('kind')!r}", "kind")
    s = SpecialNetwork(domain_from_doc(doc.get("domain")), layers_from_doc(doc.get("layers")),
                       _layout_from_dict(doc.get("layout") or {}), doc.get("meta") or {})
    res = validate_special(s)
    if not res:
        raise DocumentError(f"invalid special network: {res.message}",
                            f"layers[{res.layer}]" if res.layer is not None else "layout")
    return s


def serialize_special(s):
    return json.dumps(special_to_document(s)).encode("utf-8")


def deserialize_special(data):
    return special_from_document(parse_document(data))
