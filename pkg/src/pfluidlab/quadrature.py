"""Quadrature rules on the reference simplex.

Conical-product (Stroud) rules built from Gauss-Jacobi lines: always positive
weights, exact for total degree <= 2*n_line - 1.  Orders 1..6 are supported;
the weights sum to the reference simplex volume 1/d!.
"""

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

__all__ = ["simplex_rule"]

MAX_ORDER = 6


def _gauss_jacobi_01(n: int, alpha: int):
    """Nodes/weights for integral over [0,1] with weight (1-x)^alpha."""
    t, w = roots_jacobi(n, alpha, 0.0)
    return 0.5 * (t + 1.0), w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def simplex_rule(dim: int, order: int):
    """Positive-weight rule exact for polynomials of total degree <= order.

    Returns (points, weights): points (nq, dim) in the reference simplex
    conv{0, e_1, ..., e_dim}, weights summing to 1/dim!.
    """
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if not (1 <= order <= MAX_ORDER):
        raise ValueError(f"order must be in 1..{MAX_ORDER}, got {order}")
    n = (order + 2) // 2  # ceil((order+1)/2) line points

    if dim == 2:
        x, wx = _gauss_jacobi_01(n, 1)
        y, wy = _gauss_jacobi_01(n, 0)
        X, Y = np.meshgrid(x, y, indexing="ij")
        WX, WY = np.meshgrid(wx, wy, indexing="ij")
        pts = np.stack([X, (1.0 - X) * Y], axis=-1).reshape(-1, 2)
        wts = (WX * WY).reshape(-1)
    else:
        x, wx = _gauss_jacobi_01(n, 2)
        y, wy = _gauss_jacobi_01(n, 1)
        z, wz = _gauss_jacobi_01(n, 0)
        X, Y, Z = np.meshgrid(x, y, z, indexing="ij")
        WX, WY, WZ = np.meshgrid(wx, wy, wz, indexing="ij")
        pts = np.stack(
            [X, (1.0 - X) * Y, (1.0 - X) * (1.0 - Y) * Z], axis=-1
        ).reshape(-1, 3)
        wts = (WX * WY * WZ).reshape(-1)

    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts
