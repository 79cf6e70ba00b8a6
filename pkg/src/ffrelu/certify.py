"""Sup-norm certificates for piecewise-linear approximants."""
import numpy as np


def pwl_sup_certificate(pwl, f, curvature, target=None, max_rounds=30, max_segments=2 ** 21):
    """Upper bound on ``sup |pwl - f|`` over the pwl's interval.

    ``curvature`` bounds ``|f''|``. On a segment of length h the error is at
    most the larger endpoint error plus ``curvature * h**2 / 8``. Segments
    whose bound exceeds ``target`` are bisected until the bound drops below
    it, ``max_rounds`` is reached or the segment count would pass
    ``max_segments``; the bound stays valid when refinement stops early.

    Returns ``(bound, observed)`` where ``observed`` is the largest error seen
    at an evaluated point.
    """
    x = np.asarray(pwl.breakpoints, dtype=float)
    e = np.abs(np.asarray(pwl.values) - f(x))
    observed = float(e.max())
    seg_lo, seg_hi = x[:-1], x[1:]
    e_lo, e_hi = e[:-1], e[1:]
    settled = 0.0
    for _ in range(max_rounds + 1):
        h = seg_hi - seg_lo
        bound = np.maximum(e_lo, e_hi) + curvature * h * h / 8.0
        if target is None:
            return float(max(settled, bound.max())), observed
        bad = bound > target
        if bound[~bad].size:
            settled = max(settled, float(bound[~bad].max()))
        if not bad.any():
            return settled, observed
        if 2 * int(bad.sum()) > max_segments:
            return float(max(settled, bound[bad].max())), observed
        lo, hi, el, eh = seg_lo[bad], seg_hi[bad], e_lo[bad], e_hi[bad]
        mid = 0.5 * (lo + hi)
        em = np.abs(pwl(mid) - f(mid))
        observed = max(observed, float(em.max()))
        seg_lo = np.concatenate([lo, mid])
        seg_hi = np.concatenate([mid, hi])
        e_lo = np.concatenate([el, em])
        e_hi = np.concatenate([em, eh])
    h = seg_hi - seg_lo
    bound = np.maximum(e_lo, e_hi) + curvature * h * h / 8.0
    return float(max(settled, bound.max())), observed


def grid_sup(f, g, X):
    """Largest ``|f - g|`` over the rows of ``X``."""
    return float(np.max(np.abs(np.asarray(f(X)) - np.asarray(g(X)))))
