"""Independent brute-force oracles used only by the tests.

The grid-search minimizer evaluates the same weighted range-residual
objective the solver minimizes, but by exhaustive evaluation over a dense
grid (coarse pass, then a fine pass around the best coarse cell). It shares
no code with the package solver.
"""

from __future__ import annotations

import numpy as np


def range_objective(x, y, anchor_xy, dists, weights):
    """sum_i w_i * (||p - a_i|| - d_i)^2 evaluated on broadcastable x, y."""
    total = 0.0
    for (ax, ay), d, w in zip(anchor_xy, dists, weights):
        total = total + w * (np.hypot(x - ax, y - ay) - d) ** 2
    return total


def grid_search_position(
    anchor_xy,
    dists,
    weights=None,
    coarse=0.01,
    fine=0.001,
    margin=3.0,
):
    """Objective-minimizing point by exhaustive grid search.

    Coarse grid over the anchors' bounding box expanded by ``margin`` meters,
    then a fine grid spanning +/- 1.5 coarse cells around the best coarse
    point. Returns (x, y).
    """
    anchor_xy = np.asarray(anchor_xy, dtype=float)
    dists = np.asarray(dists, dtype=float)
    if weights is None:
        weights = np.ones(len(dists))
    x0, y0 = anchor_xy.min(axis=0) - margin
    x1, y1 = anchor_xy.max(axis=0) + margin

    xs = np.arange(x0, x1 + coarse / 2, coarse)
    ys = np.arange(y0, y1 + coarse / 2, coarse)
    obj = range_objective(xs[None, :], ys[:, None], anchor_xy, dists, weights)
    iy, ix = np.unravel_index(np.argmin(obj), obj.shape)
    bx, by = xs[ix], ys[iy]

    half = 1.5 * coarse
    xs = np.arange(bx - half, bx + half + fine / 2, fine)
    ys = np.arange(by - half, by + half + fine / 2, fine)
    obj = range_objective(xs[None, :], ys[:, None], anchor_xy, dists, weights)
    iy, ix = np.unravel_index(np.argmin(obj), obj.shape)
    return float(xs[ix]), float(ys[iy])
