"""
Stiffness fields ``C(x1, x2, x3)`` on ``omega x (-1/2, 1/2)``.

Every material returns Mandel ``(..., 6, 6)`` arrays broadcast against the
coordinate arrays. ``interfaces`` lists the x3 positions where the field
may jump, so quadrature rules can be split there.
"""
import numpy as np

from . import tensor_core as tc


class MaterialField:
    interfaces = ()
    name = "material"

    def stiffness(self, x1, x2, x3):
        raise NotImplementedError

    def __call__(self, x1, x2, x3):
        return self.stiffness(x1, x2, x3)

    def check(self, xbreaks, ybreaks, n=4, rtol=1e-10):
        """
        Coercivity check on a product grid of Gauss points per cell (and per
        layer through the thickness). Returns the smallest eigenvalue seen.
        """
        from .quadrature import composite_gauss, thickness_rule
        xs, _ = composite_gauss(xbreaks, n)
        ys, _ = composite_gauss(ybreaks, n)
        zs, _ = thickness_rule(n, self.interfaces)
        X1, X2, X3 = np.meshgrid(xs, ys, zs, indexing='ij')
        C = self.stiffness(X1, X2, X3)
        return float(np.min(tc.check_coercive(C, rtol=rtol, what=self.name)))


class Homogeneous(MaterialField):
    def __init__(self, C, name="homogeneous"):
        self.C = np.array(C, dtype=float)
        self.C.setflags(write=False)
        self.name = name
        tc.check_coercive(self.C, what=name)

    def stiffness(self, x1, x2, x3):
        shape = np.broadcast(np.asarray(x1), np.asarray(x2), np.asarray(x3)).shape
        return np.broadcast_to(self.C, shape + (6, 6)).copy()


class Layered(MaterialField):
    """Piecewise constant in x3: ``layers[k]`` occupies ``[breaks[k], breaks[k+1])``."""

    def __init__(self, breaks, layers, name="laminate"):
        breaks = np.asarray(breaks, dtype=float)
        layers = np.asarray(layers, dtype=float)
        if len(breaks) != len(layers) + 1:
            raise ValueError("need one more break than layers")
        if abs(breaks[0] + 0.5) > 1e-14 or abs(breaks[-1] - 0.5) > 1e-14:
            raise ValueError("layer breaks must span [-1/2, 1/2]")
        if np.any(np.diff(breaks) <= 0):
            raise ValueError("layer breaks must increase")
        tc.check_coercive(layers, what=name)
        self.breaks = breaks
        self.layers = layers
        self.interfaces = tuple(breaks[1:-1])
        self.name = name

    def stiffness(self, x1, x2, x3):
        shape = np.broadcast(np.asarray(x1), np.asarray(x2), np.asarray(x3)).shape
        k = np.clip(np.searchsorted(self.breaks, np.broadcast_to(x3, shape), side='right') - 1,
                    0, len(self.layers) - 1)
        return self.layers[k]


class Graded(MaterialField):
    """
    Polynomial stiffness ``sum_k x1^a x2^b x3^c C_k`` with ``terms`` a list of
    ``(C_k, (a, b, c))``. Bilinear in-plane and polynomial in x3 is the
    intended use, but any exponents are accepted.
    """

    def __init__(self, terms, name="graded"):
        self.terms = [(np.array(M, dtype=float), tuple(int(p) for p in powers))
                      for M, powers in terms]
        for M, _ in self.terms:
            if np.max(np.abs(M - M.T)) > 1e-12 * np.max(np.abs(M)):
                raise tc.CoercivityError(f"{name}: coefficient matrix not symmetric")
        self.name = name

    def stiffness(self, x1, x2, x3):
        x1, x2, x3 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, x3)))
        out = np.zeros(x1.shape + (6, 6))
        for M, (a, b, c) in self.terms:
            out += (x1 ** a * x2 ** b * x3 ** c)[..., None, None] * M
        return out

    @property
    def is_even(self):
        return all(c % 2 == 0 for _, (_, _, c) in self.terms)


def random_graded(rng, shift=1.0, gradient=0.3):
    """
    Seeded fully anisotropic graded material
    ``C0 + x3 C1 + x3^2 C2 + x1 C3 + x2 C4`` with small random perturbations
    around an SPD ``C0``; the perturbation size keeps it coercive on the unit
    square times ``(-1/2, 1/2)``.
    """
    C0 = tc.random_spd(rng, shift=shift, spread=2.0)
    terms = [(C0, (0, 0, 0))]
    for powers in ((0, 0, 1), (0, 0, 2), (1, 0, 0), (0, 1, 0)):
        A = rng.standard_normal((6, 6))
        A = 0.5 * (A + A.T)
        A *= gradient * shift / np.linalg.norm(A, 2)
        terms.append((A, powers))
    return Graded(terms, name="random graded")
