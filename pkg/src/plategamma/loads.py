"""
Load data in rescaled coordinates: body force ``b``, face tractions on
``x3 = +-1/2``, lateral tractions on the Neumann strip, the generalized
force ``H`` and a Kirchhoff-Love boundary displacement ``g``.
"""
from dataclasses import dataclass, field

import numpy as np

from .tensor_core import INPLANE, SQRT2


class Polynomial:
    """``sum c x1^i x2^j x3^k`` stored as ``{(i, j, k): c}``."""

    def __init__(self, terms=None):
        self.terms = {}
        for powers, c in (terms or {}).items():
            powers = tuple(int(p) for p in powers) + (0,) * (3 - len(powers))
            if c != 0:
                self.terms[powers] = self.terms.get(powers, 0.0) + float(c)

    @classmethod
    def constant(cls, c):
        return cls({(0, 0, 0): c})

    @classmethod
    def from_table(cls, rows):
        """Rows ``[coef, i, j, k]`` (missing exponents default to 0)."""
        terms = {}
        for row in rows:
            c, *powers = row
            key = tuple(int(p) for p in powers) + (0,) * (3 - len(powers))
            terms[key] = terms.get(key, 0.0) + float(c)
        return cls(terms)

    def __call__(self, x1, x2, x3=0.0):
        x1, x2, x3 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, x3)))
        out = np.zeros(x1.shape)
        for (i, j, k), c in self.terms.items():
            out = out + c * x1 ** i * x2 ** j * x3 ** k
        return out

    def diff(self, axis):
        terms = {}
        for powers, c in self.terms.items():
            if powers[axis] > 0:
                p = list(powers)
                p[axis] -= 1
                terms[tuple(p)] = terms.get(tuple(p), 0.0) + c * powers[axis]
        return Polynomial(terms)

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        return f"Polynomial({self.terms})"


ZERO = Polynomial()


class VectorField:
    """A tuple of :class:`Polynomial` components evaluated to ``(..., n)``."""

    def __init__(self, components):
        self.components = tuple(c if isinstance(c, Polynomial) else Polynomial.constant(c)
                                for c in components)

    def __call__(self, x1, x2, x3=0.0):
        return np.stack([c(x1, x2, x3) for c in self.components], axis=-1)

    def __bool__(self):
        return any(bool(c) for c in self.components)


def constant_vector(*values):
    return VectorField([Polynomial.constant(v) for v in values])


class KLDisplacement:
    """
    Kirchhoff-Love field ``g_a = eta_a - x3 d_a eta_3``, ``g_3 = eta_3`` built
    from polynomials ``eta_a(x1, x2)``; ``(Eg)_i3 = 0`` holds by construction.
    """

    def __init__(self, eta1=ZERO, eta2=ZERO, eta3=ZERO):
        self.eta = (eta1, eta2, eta3)
        for e in self.eta:
            if any(k[2] for k in e.terms):
                raise ValueError("Kirchhoff-Love data must not depend on x3")

    def __bool__(self):
        return any(bool(e) for e in self.eta)

    def displacement(self, x1, x2, x3):
        e1, e2, e3 = self.eta
        x3 = np.asarray(x3, dtype=float)
        return np.stack([e1(x1, x2) - x3 * e3.diff(0)(x1, x2),
                         e2(x1, x2) - x3 * e3.diff(1)(x1, x2),
                         e3(x1, x2) + 0.0 * x3], axis=-1)

    def membrane_strain(self, x1, x2):
        """Mandel ``E(eta_1, eta_2)``."""
        e1, e2, _ = self.eta
        return np.stack([e1.diff(0)(x1, x2), e2.diff(1)(x1, x2),
                         SQRT2 * 0.5 * (e1.diff(1)(x1, x2) + e2.diff(0)(x1, x2))], axis=-1)

    def curvature(self, x1, x2):
        """Mandel ``-grad grad eta_3``."""
        e3 = self.eta[2]
        d1, d2 = e3.diff(0), e3.diff(1)
        return -np.stack([d1.diff(0)(x1, x2), d2.diff(1)(x1, x2),
                          SQRT2 * d1.diff(1)(x1, x2)], axis=-1)

    def strain(self, x1, x2, x3):
        """Full Mandel ``Eg``; transverse slots vanish."""
        x1, x2, x3 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, x3)))
        out = np.zeros(x1.shape + (6,))
        out[..., INPLANE] = self.membrane_strain(x1, x2) + x3[..., None] * self.curvature(x1, x2)
        return out


@dataclass(frozen=True)
class LoadSpec:
    """
    Rescaled loads. ``body(x1, x2, x3)``, ``lateral(x1, x2, x3)`` and the face
    tractions ``top(x1, x2)`` (``x3 = +1/2``), ``bottom(x1, x2)`` return
    ``(..., 3)``; ``H(x1, x2, x3)`` returns Mandel ``(..., 6)``. ``None`` means
    absent. The lateral traction acts only on Neumann edges.
    """
    body: object = None
    top: object = None
    bottom: object = None
    lateral: object = None
    H: object = None
    g: KLDisplacement = field(default_factory=KLDisplacement)

    def body_at(self, x1, x2, x3):
        shape = np.broadcast(np.asarray(x1), np.asarray(x2), np.asarray(x3)).shape
        return np.zeros(shape + (3,)) if self.body is None else np.broadcast_to(
            self.body(x1, x2, x3), shape + (3,))

    def face_at(self, which, x1, x2):
        f = self.top if which == 'top' else self.bottom
        shape = np.broadcast(np.asarray(x1), np.asarray(x2)).shape
        return np.zeros(shape + (3,)) if f is None else np.broadcast_to(f(x1, x2), shape + (3,))

    def lateral_at(self, x1, x2, x3):
        shape = np.broadcast(np.asarray(x1), np.asarray(x2), np.asarray(x3)).shape
        return np.zeros(shape + (3,)) if self.lateral is None else np.broadcast_to(
            self.lateral(x1, x2, x3), shape + (3,))

    def H_at(self, x1, x2, x3):
        shape = np.broadcast(np.asarray(x1), np.asarray(x2), np.asarray(x3)).shape
        return np.zeros(shape + (6,)) if self.H is None else np.broadcast_to(
            self.H(x1, x2, x3), shape + (6,))

    def F_at(self, C, x1, x2, x3):
        """
        ``F = H - C Eg``: the generalized force seen by the lifted unknown
        ``u = w - g``.
        """
        Eg = self.g.strain(x1, x2, x3)
        return self.H_at(x1, x2, x3) - np.einsum('...ij,...j->...i', C, Eg)

    def scale(self):
        """Rough magnitude of the data, used to make residual tolerances relative."""
        pts = np.linspace(0.0, 1.0, 5)
        X1, X2, X3 = np.meshgrid(pts, pts, pts - 0.5, indexing='ij')
        vals = [np.max(np.abs(self.body_at(X1, X2, X3))),
                np.max(np.abs(self.face_at('top', X1[..., 0], X2[..., 0]))),
                np.max(np.abs(self.face_at('bottom', X1[..., 0], X2[..., 0]))),
                np.max(np.abs(self.lateral_at(X1, X2, X3))),
                np.max(np.abs(self.H_at(X1, X2, X3)))]
        if self.g:
            vals.append(np.max(np.abs(self.g.displacement(X1, X2, X3))))
        return max(max(vals), 1e-300)
