"""Gauss-Legendre helpers."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a: float, b: float, n: int):
    """Nodes and weights of the ``n``-point rule on ``[a, b]``."""
    if n < 1:
        raise ValueError("need at least one quadrature node")
    x, w = _leggauss(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_gauss_legendre(edges, order: int = 8):
    """Nodes and weights of ``order``-point rules on each panel ``[edges[i], edges[i+1]]``."""
    edges = np.asarray(edges, dtype=float)
    x, w = _leggauss(int(order))
    left, right = edges[:-1, None], edges[1:, None]
    half = 0.5 * (right - left)
    nodes = left + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()
