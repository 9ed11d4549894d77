"""Gauss-Legendre rules on intervals and composite through-thickness rules."""
import numpy as np


def gauss_legendre(n, a=-1.0, b=1.0):
    """``n``-point Gauss-Legendre nodes and weights mapped to ``[a, b]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_gauss(breaks, n):
    """
    ``n``-point Gauss rule on every sub-interval of ``breaks``. Exact for
    piecewise polynomials of degree ``2n - 1`` with kinks at the breaks.
    """
    breaks = np.asarray(breaks, dtype=float)
    if np.any(np.diff(breaks) <= 0):
        raise ValueError("breaks must be strictly increasing")
    nodes, weights = zip(*(gauss_legendre(n, a, b) for a, b in zip(breaks[:-1], breaks[1:])))
    return np.concatenate(nodes), np.concatenate(weights)


def thickness_rule(n=8, interfaces=()):
    """
    Through-thickness rule on ``(-1/2, 1/2)``. Without interfaces a single
    ``n``-point Gauss rule; with layer interfaces an ``n``-point rule per
    layer so piecewise smooth stiffness is integrated layer by layer.
    """
    inner = [t for t in sorted(interfaces) if -0.5 < t < 0.5]
    return composite_gauss([-0.5, *inner, 0.5], n)


def tensor_rule_2d(xbreaks, ybreaks, n):
    """
    Product Gauss rule on a structured rectangular grid. Points are ordered
    element by element (x index slowest), then Gauss point (x slowest).
    Returns ``points (N, 2)``, ``weights (N,)`` and the element index of
    each point.
    """
    gx, wx = gauss_legendre(n, 0.0, 1.0)
    xbreaks, ybreaks = np.asarray(xbreaks, float), np.asarray(ybreaks, float)
    hx, hy = np.diff(xbreaks), np.diff(ybreaks)
    X = xbreaks[:-1, None] + hx[:, None] * gx[None, :]          # (nx, n)
    Y = ybreaks[:-1, None] + hy[:, None] * gx[None, :]          # (ny, n)
    Wx = hx[:, None] * wx[None, :]
    Wy = hy[:, None] * wx[None, :]
    nx, ny = len(hx), len(hy)
    px = np.broadcast_to(X[:, None, :, None], (nx, ny, n, n))
    py = np.broadcast_to(Y[None, :, None, :], (nx, ny, n, n))
    w = Wx[:, None, :, None] * Wy[None, :, None, :]
    pts = np.stack([px.reshape(-1), py.reshape(-1)], axis=1)
    elem = np.repeat(np.arange(nx * ny), n * n)
    return pts, w.reshape(-1), elem
