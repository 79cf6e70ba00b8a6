"""Network algebra: composition, width-wise linear combination and input shifts.

The core operations reject mismatched shapes; ``compose_padded`` and
``linear_combine`` first pad or extend their inputs.
"""
import numpy as np
from scipy.linalg import block_diag

from .exceptions import CompositionDomainError, ShapeError
from .network import (AffineLayer, DomainBox, ReluNetwork, extend_depth,
                      output_range, pad_width)


def compose(nets, check_ranges=True):
    """Realize ``f_J o ... o f_1``. All nets must share one width."""
    nets = list(nets)
    if not nets:
        raise ValueError("compose needs at least one network")
    w = nets[0].width
    for j, net in enumerate(nets):
        if net.width != w:
            raise ShapeError(f"net {j} has width {net.width}, expected {w}")
        if j > 0 and net.domain.dim != 1:
            raise ShapeError(f"net {j} must take scalar input")
    if check_ranges:
        for j in range(len(nets) - 1):
            lo, hi = output_range(nets[j])
            dom = nets[j + 1].domain
            if not dom.contains_interval(lo, hi):
                raise CompositionDomainError(
                    f"range [{lo:.6g}, {hi:.6g}] of net {j} is not inside domain "
                    f"[{dom.lo:.6g}, {dom.hi:.6g}] of net {j + 1}")
    layers = list(nets[0].layers[:-1])
    prev_out = nets[0].layers[-1]
    for net in nets[1:]:
        first = net.layers[0]
        layers.append(AffineLayer(first.weights @ prev_out.weights,
                                  first.weights[:, 0] * prev_out.bias[0] + first.bias))
        layers.extend(net.layers[1:-1])
        prev_out = net.layers[-1]
    layers.append(prev_out)
    meta = {}
    if "range" in nets[-1].meta:
        meta["range"] = list(nets[-1].meta["range"])
    return ReluNetwork(nets[0].domain, layers, meta)


def compose_padded(nets, check_ranges=True):
    w = max(n.width for n in nets)
    return compose([pad_width(n, w) for n in nets], check_ranges=check_ranges)


def linear_combine_width(nets, coeffs):
    """Realize ``sum_j a_j f_j`` by stacking the nets side by side."""
    nets, coeffs = list(nets), [float(a) for a in coeffs]
    if not nets:
        raise ValueError("linear_combine_width needs at least one network")
    if len(nets) != len(coeffs):
        raise ValueError("one coefficient per network is required")
    dom, depth = nets[0].domain, nets[0].depth
    for j, net in enumerate(nets):
        if net.domain != dom:
            raise ShapeError(f"net {j} has a different domain")
        if net.depth != depth:
            raise ShapeError(f"net {j} has depth {net.depth}, expected {depth}")
    layers = [AffineLayer(np.vstack([n.layers[0].weights for n in nets]),
                          np.concatenate([n.layers[0].bias for n in nets]))]
    for l in range(1, depth):
        layers.append(AffineLayer(block_diag(*[n.layers[l].weights for n in nets]),
                                  np.concatenate([n.layers[l].bias for n in nets])))
    out_w = np.hstack([a * n.layers[-1].weights for a, n in zip(coeffs, nets)])
    out_b = sum(a * n.layers[-1].bias[0] for a, n in zip(coeffs, nets))
    layers.append(AffineLayer(out_w, [out_b]))
    meta = {}
    if all("range" in n.meta for n in nets):
        lo = hi = 0.0
        for a, n in zip(coeffs, nets):
            r0, r1 = sorted((a * n.meta["range"][0], a * n.meta["range"][1]))
            lo, hi = lo + r0, hi + r1
        meta["range"] = [lo, hi]
    return ReluNetwork(dom, layers, meta)


def linear_combine(nets, coeffs):
    depth = max(n.depth for n in nets)
    return linear_combine_width([extend_depth(n, depth) for n in nets], coeffs)


def shift_input(net, c):
    """Net on ``[lo + c, hi + c]`` with ``g(x + c) = f(x)``. Only the first bias changes."""
    if net.domain.dim != 1:
        raise ShapeError("shift_input supports scalar input only")
    c = float(c)
    if c == 0.0:
        return net
    first = net.layers[0]
    layers = [AffineLayer(first.weights, first.bias - c * first.weights[:, 0])] + list(net.layers[1:])
    dom = DomainBox(net.domain.lo + c, net.domain.hi + c, 1)
    return ReluNetwork(dom, layers, net.meta)
