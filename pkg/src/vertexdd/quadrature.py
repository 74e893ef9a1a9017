"""Collapsed-coordinate Gauss rules on tetrahedra and Gauss rules on segments."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=None)
def tet_rule(q: int):
    """Conical product rule with ``q**3`` points, exact to degree ``2q - 1``.

    Returns barycentric coordinates (npts, 4) and weights summing to 1 (the
    reference volume is factored out, so ``sum(w * f) * vol`` integrates f).
    """
    a, wa = roots_jacobi(q, 2.0, 0.0)
    b, wb = roots_jacobi(q, 1.0, 0.0)
    c, wc = roots_legendre(q)
    a, b, c = (a + 1) / 2, (b + 1) / 2, (c + 1) / 2
    wa, wb, wc = wa / 8, wb / 4, wc / 2
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    W = wa[:, None, None] * wb[None, :, None] * wc[None, None, :]
    # Duffy map from the unit cube onto the simplex
    x = A
    y = (1 - A) * B
    z = (1 - A) * (1 - B) * C
    lam = np.stack([1 - x - y - z, x, y, z], axis=-1).reshape(-1, 4)
    w = 6.0 * W.ravel()
    return lam, w


@lru_cache(maxsize=None)
def segment_rule(q: int):
    """Gauss-Legendre on [0, 1]: points and weights summing to 1."""
    t, w = roots_legendre(q)
    return (t + 1) / 2, w / 2
