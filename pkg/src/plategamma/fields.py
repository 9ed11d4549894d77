"""
Tensor fields sampled on product quadrature sets ``omega x (-1/2, 1/2)``.

A :class:`Sampling` pairs an in-plane rule (points and weights on omega)
with a through-thickness rule on ``(-1/2, 1/2)``. Field values carry the
axes ``(in-plane point, thickness point, component)``.
"""
from dataclasses import dataclass

import numpy as np

from .tensor_core import INPLANE, TRANSVERSE


@dataclass(frozen=True)
class Sampling:
    points: np.ndarray    # (P, 2)
    weights: np.ndarray   # (P,)
    x3: np.ndarray        # (Z,)
    wz: np.ndarray        # (Z,)

    @property
    def shape(self):
        return (len(self.weights), len(self.wz))

    @property
    def volume_weights(self):
        return self.weights[:, None] * self.wz[None, :]

    def coords(self):
        """All 3D points as ``(x1, x2, x3)`` arrays of shape ``(P, Z)``."""
        P, Z = self.shape
        x1 = np.broadcast_to(self.points[:, 0:1], (P, Z))
        x2 = np.broadcast_to(self.points[:, 1:2], (P, Z))
        x3 = np.broadcast_to(self.x3[None, :], (P, Z))
        return x1, x2, x3

    def matches(self, other, tol=1e-13):
        if self is other:
            return True
        if self.shape != other.shape:
            return False
        return (np.allclose(self.points, other.points, rtol=0, atol=tol)
                and np.allclose(self.weights, other.weights, rtol=tol, atol=0)
                and np.allclose(self.x3, other.x3, rtol=0, atol=tol)
                and np.allclose(self.wz, other.wz, rtol=tol, atol=0))

    def integrate(self, values):
        """Integral over omega x (-1/2, 1/2) of a ``(P, Z, ...)`` array."""
        return np.tensordot(self.volume_weights, values, axes=([0, 1], [0, 1]))

    def thickness_moment(self, values, power):
        """``int x3^power values dx3`` for a ``(P, Z, ...)`` array."""
        wk = self.wz * self.x3 ** power
        return np.einsum('z,pz...->p...', wk, values)


@dataclass(frozen=True)
class StressField:
    """Symmetric tensor field in Mandel form, values of shape ``(P, Z, 6)``."""
    sampling: Sampling
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.sampling.shape + (6,):
            raise ValueError(f"values shape {self.values.shape} does not match sampling "
                             f"{self.sampling.shape + (6,)}")

    def _check(self, other):
        if not self.sampling.matches(other.sampling):
            raise ValueError("fields are sampled on different quadrature sets")

    def __sub__(self, other):
        self._check(other)
        return StressField(self.sampling, self.values - other.values)

    def __add__(self, other):
        self._check(other)
        return StressField(self.sampling, self.values + other.values)

    def inner(self, other):
        self._check(other)
        return float(self.sampling.integrate(np.einsum('pzi,pzi->pz', self.values, other.values)))

    def l2_norm(self, components=None):
        v = self.values if components is None else self.values[..., components]
        return float(np.sqrt(self.sampling.integrate(np.sum(v * v, axis=-1))))

    def resultants(self):
        """In-plane resultants ``(S^N, S^M)``, each ``(P, 3)`` in 2D Mandel form."""
        plane = self.values[..., INPLANE]
        return (self.sampling.thickness_moment(plane, 0),
                self.sampling.thickness_moment(plane, 1))

    def transverse(self):
        """The ``S_i3`` entries (tensor components, not Mandel weighted), ``(P, Z, 3)``."""
        return self.values[..., TRANSVERSE] * np.array([1 / np.sqrt(2), 1 / np.sqrt(2), 1.0])


def affine_inplane(sampling, SN, SM):
    """In-plane Mandel part ``S^N + 12 x3 S^M`` at every thickness point."""
    return SN[:, None, :] + 12.0 * sampling.x3[None, :, None] * SM[:, None, :]


def project_L(S):
    """
    Orthogonal projection onto fields whose in-plane part is affine in x3:
    ``Pi(S)_ab = S^N_ab + 12 x3 S^M_ab`` and ``Pi(S)_i3 = S_i3``.
    """
    SN, SM = S.resultants()
    out = S.values.copy()
    out[..., INPLANE] = affine_inplane(S.sampling, SN, SM)
    return StressField(S.sampling, out)
