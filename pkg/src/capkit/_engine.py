"""Vectorized tree kernels shared by the content and integration modules.

Arrays here are always in Morton order, so a dyadic cube ``k`` levels above the
leaves is a contiguous block of ``2**(d*k)`` entries.  Rows of a 2-D input are
independent trees of equal depth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def content_tree(mask: np.ndarray, d: int, depth: int, beta: float, leaf_side: float):
    """Dyadic content of every cube, finest level first.

    ``mask`` has shape ``(R, 2**(d*depth))``.  Returns a list whose entry ``k``
    has shape ``(R, 2**(d*(depth-k)))`` and holds the content of each cube
    ``k`` levels above the leaves.
    """
    c = np.where(mask, leaf_side ** beta, 0.0)
    out = [c]
    fan = 1 << d
    for k in range(1, depth + 1):
        cap = (leaf_side * 2.0 ** k) ** beta
        s = c.reshape(c.shape[0], -1, fan).sum(axis=2)
        c = np.minimum(s, cap)
        out.append(c)
    return out


@dataclass
class LayerEvents:
    """Superlevel-set growth of a row, in order of decreasing value.

    ``values[i]`` is the value at which ``weights[i]`` of content is added, so
    ``C({h > t}) = weights[values > t].sum()``.
    """
    values: np.ndarray
    weights: np.ndarray

    def content_above(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        csum = np.concatenate([[0.0], np.cumsum(self.weights)])
        # values are nonincreasing; count how many exceed t
        k = np.searchsorted(-self.values, -t, side="left")
        return csum[k]


def choquet_rows(h: np.ndarray, d: int, depth: int, beta: float, leaf_side: float,
                 levels: bool = False, events: bool = False):
    """Choquet integral of each nonnegative row of ``h`` over its root cube.

    Each leaf enters as an event of weight ``leaf_side**beta`` at its value.
    Going up a level the events of the children are merged in time order and
    their running total is clipped at the cube's cap ``l**beta``; the integral
    is then the weighted sum of the event values.

    Returns the integrals ``(R,)``; with ``levels`` also the per-level
    integrals (finest first, entry ``k`` of shape ``(R, 2**(d*(depth-k)))``);
    with ``events`` also the event arrays ``(values, weights)`` of shape
    ``(R, L)``, each row in order of nonincreasing value.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.ndim == 1:
        h = h[None, :]
    R, L = h.shape
    order = np.argsort(-h, axis=1, kind="stable")
    T = np.empty((R, L), dtype=np.int64)
    np.put_along_axis(T, order, np.broadcast_to(np.arange(L), (R, L)), axis=1)
    V = h
    W = np.where(h > 0, leaf_side ** beta, 0.0)
    per_level = [W * V] if levels else None
    for k in range(1, depth + 1):
        g = 1 << (d * k)
        Tg = T.reshape(R, -1, g)
        idx = np.argsort(Tg, axis=2, kind="stable")
        Tg = np.take_along_axis(Tg, idx, axis=2)
        Vg = np.take_along_axis(V.reshape(R, -1, g), idx, axis=2)
        Wg = np.take_along_axis(W.reshape(R, -1, g), idx, axis=2)
        S = np.cumsum(Wg, axis=2)
        prev = np.concatenate([np.zeros(S.shape[:2] + (1,)), S[..., :-1]], axis=2)
        cap = (leaf_side * 2.0 ** k) ** beta
        Wg = np.minimum(Wg, np.maximum(cap - prev, 0.0))
        if levels:
            per_level.append((Wg * Vg).sum(axis=2))
        T, V, W = Tg.reshape(R, L), Vg.reshape(R, L), Wg.reshape(R, L)
    total = per_level[-1].reshape(R) if levels else (W * V).sum(axis=1)
    out = [total]
    if levels:
        out.append(per_level)
    if events:
        out.append((V, W))
    return out[0] if len(out) == 1 else tuple(out)


def blocks(m: np.ndarray, d: int, n: int, level: int) -> np.ndarray:
    """View Morton data as one row per cube at ``level``."""
    return m.reshape(1 << (d * level), 1 << (d * (n - level)))
