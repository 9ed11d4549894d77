"""
Closed-form reduction of a 3D stiffness field and transverse load data to
plate-level tensors, and the explicit complementary-energy split.

Every quantity is evaluated pointwise over the in-plane samples of a
:class:`~plategamma.fields.Sampling`. Through-thickness integrals use the
sampling's thickness rule, so all identities below hold to rounding when
the same rule is used consistently.

Conventions (Mandel form throughout):

* 3D stiffness ``C``: ``(P, Z, 6, 6)``; plane tensors: ``(..., 3, 3)``.
* the shear block ``c_ij = C_i3j3`` is in tensor components.
* transverse vectors such as ``z`` follow ``Z = Zbar + z (.) e3``, i.e.
  ``z_a = 2 Z_a3`` and ``z_3 = Z_33``.
"""
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import tensor_core as tc
from .fields import Sampling, StressField, affine_inplane
from .tensor_core import INPLANE, TRANSVERSE, TRANSVERSE_SCALE

COND_WARN = 1e12


class ConsistencyError(RuntimeError):
    """Reconstructed fields violate their defining equations."""


def _guarded_inv(A, what):
    cond = np.linalg.cond(A)
    if not np.all(np.isfinite(cond)):
        raise np.linalg.LinAlgError(f"{what} is singular")
    if np.max(cond) > COND_WARN:
        warnings.warn(f"{what} is nearly singular (condition number {np.max(cond):.2e})",
                      RuntimeWarning, stacklevel=3)
    inv = np.linalg.inv(A)
    return 0.5 * (inv + np.swapaxes(inv, -1, -2))


def _blocks(C):
    C = np.asarray(C, dtype=float)
    Mpp = C[..., INPLANE[:, None], INPLANE[None, :]]
    Mpt = C[..., INPLANE[:, None], TRANSVERSE[None, :]]
    Mtt = C[..., TRANSVERSE[:, None], TRANSVERSE[None, :]]
    return Mpp, Mpt, Mtt


def shear_block(C):
    """``c_ij = C_i3j3`` as a symmetric ``(..., 3, 3)`` matrix."""
    _, _, Mtt = _blocks(C)
    return TRANSVERSE_SCALE[:, None] * Mtt * TRANSVERSE_SCALE[None, :]


def _coupling(C):
    """``C_ab j3`` with the in-plane pair in Mandel form, ``(..., 3, 3)``."""
    _, Mpt, _ = _blocks(C)
    return Mpt * TRANSVERSE_SCALE


def plane_reduce(C):
    """
    Condensed in-plane stiffness ``C_abgd - C_abj3 c^-1_ji C_i3gd``.

    It equals the quadratic form ``min_b C(A + b (.) e3).(A + b (.) e3)``
    restricted to in-plane ``A``.
    """
    Mpp, _, _ = _blocks(C)
    K = _coupling(C)
    cinv = _guarded_inv(shear_block(C), "shear block")
    out = Mpp - K @ cinv @ np.swapaxes(K, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def transverse_minimizer(C, A):
    """
    ``b_min = -c^-1 (C A)_i3`` for in-plane Mandel ``A``; the minimizer of
    ``b -> C(A + b (.) e3).(A + b (.) e3)``.
    """
    K = _coupling(C)
    rhs = np.einsum('...ai,...a->...i', K, A)
    return -np.linalg.solve(shear_block(C), rhs[..., None])[..., 0]


def moments(Cbar, x3, wz):
    """``int x3^i Cbar dx3`` for ``i = 0, 1, 2``; ``Cbar`` is ``(P, Z, 3, 3)``."""
    return tuple(np.einsum('z,pzij->pij', wz * x3 ** i, Cbar) for i in range(3))


def hat_C(C0, C1, C2):
    """``12 (C2 - C1 C0^-1 C1)``, the bending stiffness after eliminating the membrane part."""
    C0inv = _guarded_inv(C0, "zeroth moment")
    out = 12.0 * (C2 - C1 @ C0inv @ C1)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def compliance_blocks(C0, C1, Chat):
    """
    Blocks of the inverse of ``[[C0, 12 C1], [C1, 12 C2]]`` written through
    ``Chat``: returns ``(Cnn, Cnm, Cmn, Cmm)``.
    """
    C0inv = _guarded_inv(C0, "zeroth moment")
    Chinv = _guarded_inv(Chat, "bending stiffness")
    Cnn = C0inv + 12.0 * C0inv @ C1 @ Chinv @ C1 @ C0inv
    Cnm = -12.0 * C0inv @ C1 @ Chinv
    Cmn = -Chinv @ C1 @ C0inv
    Cmm = Chinv
    return 0.5 * (Cnn + np.swapaxes(Cnn, -1, -2)), Cnm, Cmn, Cmm


def transverse_components(F):
    """``F_i3`` tensor components ``(F13, F23, F33)`` of Mandel ``(..., 6)`` data."""
    return np.asarray(F)[..., TRANSVERSE] * TRANSVERSE_SCALE


def load_reduction(C, F, x3, wz, C0, C1, Chat):
    """
    Load tensors generated by the transverse data ``F_i3``.

    Returns ``(f, fN, fM, zn, zm, c_density)`` where ``f_ab = C_abj3
    c^-1_ji F_i3`` (``(P, Z, 3)``), ``fN``/``fM`` its zeroth and first
    moments, ``zn``/``zm`` the load parts of the reconstructed strains and
    ``c_density = 1/2 c^-1 F.F`` pointwise.
    """
    Ft = transverse_components(F)
    cvec = np.linalg.solve(shear_block(C), Ft[..., None])[..., 0]      # c^-1 F
    f = np.einsum('...ai,...i->...a', _coupling(C), cvec)
    fN = np.einsum('z,pza->pa', wz, f)
    fM = np.einsum('z,pza->pa', wz * x3, f)
    C0inv = _guarded_inv(C0, "zeroth moment")
    zm = np.linalg.solve(Chat, (np.einsum('pab,pb->pa', C1 @ C0inv, fN) - fM)[..., None])[..., 0]
    zn = -np.einsum('pab,pb->pa', C0inv, fN + 12.0 * np.einsum('pab,pb->pa', C1, zm))
    c_density = 0.5 * np.einsum('...i,...i->...', Ft, cvec)
    return f, fN, fM, zn, zm, c_density


@dataclass(frozen=True)
class ReducedModel:
    """
    Plate tensors at every in-plane sample. ``F`` is the Mandel field whose
    ``i3`` entries drive the load terms (zero for pure body/surface loads).
    """
    sampling: Sampling
    C: np.ndarray
    F: np.ndarray
    shear: np.ndarray
    Cbar: np.ndarray
    C0: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    Chat: np.ndarray
    Cnn: np.ndarray
    Cnm: np.ndarray
    Cmn: np.ndarray
    Cmm: np.ndarray
    f: np.ndarray
    fN: np.ndarray
    fM: np.ndarray
    zn: np.ndarray
    zm: np.ndarray
    c_density: np.ndarray

    @cached_property
    def compliance(self):
        return tc.inverse(self.C)

    @property
    def energy_constant(self):
        """The constant ``c = 1/2 int c f.f`` of the explicit ``f_perp``."""
        return float(self.sampling.integrate(self.c_density))

    @property
    def ABD(self):
        """Plate stiffness ``[[C0, C1], [C1, C2]]`` acting on (membrane strain, curvature)."""
        top = np.concatenate([self.C0, self.C1], axis=-1)
        bottom = np.concatenate([self.C1, self.C2], axis=-1)
        return np.concatenate([top, bottom], axis=-2)


def build_reduced_model(sampling, C, F=None, check=True):
    """
    Evaluate every plate tensor from stiffness samples ``C`` (``(P, Z, 6, 6)``)
    and optional Mandel load data ``F`` (``(P, Z, 6)``).
    """
    C = np.asarray(C, dtype=float)
    P, Z = sampling.shape
    if C.shape != (P, Z, 6, 6):
        raise ValueError(f"stiffness samples have shape {C.shape}, expected {(P, Z, 6, 6)}")
    if check:
        tc.check_coercive(C)
    F = np.zeros((P, Z, 6)) if F is None else np.asarray(F, dtype=float)
    x3, wz = sampling.x3, sampling.wz
    shear = shear_block(C)
    Cbar = plane_reduce(C)
    C0, C1, C2 = moments(Cbar, x3, wz)
    Chat = hat_C(C0, C1, C2)
    Cnn, Cnm, Cmn, Cmm = compliance_blocks(C0, C1, Chat)
    f, fN, fM, zn, zm, c_density = load_reduction(C, F, x3, wz, C0, C1, Chat)
    return ReducedModel(sampling, C, F, shear, Cbar, C0, C1, C2, Chat,
                        Cnn, Cnm, Cmn, Cmm, f, fN, fM, zn, zm, c_density)


def lift_resultants(model, SN, SM):
    """The element of L with resultants ``(SN, SM)`` and ``i3`` entries ``F_i3``."""
    S = model.F.copy()
    S[..., INPLANE] = affine_inplane(model.sampling, SN, SM)
    return StressField(model.sampling, S)


@dataclass(frozen=True)
class ZReconstruction:
    ZN: np.ndarray        # (P, 3)
    ZM: np.ndarray        # (P, 3)
    Zbar: np.ndarray      # (P, Z, 3)  ZN + 12 x3 ZM
    z: np.ndarray         # (P, Z, 3)
    Z: StressField        # strain-like field Zbar + z (.) e3
    Lambda: StressField   # C Z - S^L, the optimal L-perp complement
    S_L: StressField

    @property
    def psi(self):
        """Transverse entries of ``Z`` as matrix entries ``(Z13, Z23, Z33)``."""
        return self.z * np.array([0.5, 0.5, 1.0])


def reconstruct_Z(model, SN, SM, rtol=1e-9):
    """
    Solve the constitutive system for ``Z`` given the resultants of ``S^L``
    and return ``Z`` together with ``Lambda = C Z - S^L``.

    Raises :class:`ConsistencyError` if ``(CZ)_i3 = F_i3``, ``(CZ)^N = S^N``
    or ``(CZ)^M = S^M`` fails by more than ``rtol`` relative.
    """
    s = model.sampling
    ZN = np.einsum('pab,pb->pa', model.Cnn, SN) + np.einsum('pab,pb->pa', model.Cnm, SM) + model.zn
    ZM = np.einsum('pab,pb->pa', model.Cmn, SN) + np.einsum('pab,pb->pa', model.Cmm, SM) + model.zm
    Zbar = affine_inplane(s, ZN, ZM)
    Z = np.zeros(s.shape + (6,))
    Z[..., INPLANE] = Zbar
    CZbar_t = transverse_components(tc.apply(model.C, Z))
    Ft = transverse_components(model.F)
    z = np.linalg.solve(model.shear, (Ft - CZbar_t)[..., None])[..., 0]
    Z[..., TRANSVERSE] = z * TRANSVERSE_SCALE
    S_L = lift_resultants(model, SN, SM)
    CZ = tc.apply(model.C, Z)
    Lam = StressField(s, CZ - S_L.values)

    scale = max(np.max(np.abs(S_L.values)), np.max(np.abs(CZ)), np.finfo(float).tiny)
    CZf = StressField(s, CZ)
    CN, CM = CZf.resultants()
    res = (np.max(np.abs(transverse_components(CZ) - Ft)),
           np.max(np.abs(CN - SN)), np.max(np.abs(CM - SM)))
    if max(res) > rtol * scale:
        raise ConsistencyError(
            "reconstruction residuals (i3, N, M) = ({:.2e}, {:.2e}, {:.2e}) exceed {:.1e}; "
            "thickness quadrature too coarse?".format(*res, rtol * scale))
    return ZReconstruction(ZN, ZM, Zbar, z, StressField(s, Z), Lam, S_L)


def system_residuals(model, rec):
    """Max-norm residuals of the three lines of the system defining ``Z``."""
    CZ = StressField(model.sampling, tc.apply(model.C, rec.Z.values))
    CN, CM = CZ.resultants()
    SN, SM = rec.S_L.resultants()
    return (float(np.max(np.abs(transverse_components(CZ.values) - transverse_components(model.F)))),
            float(np.max(np.abs(CN - SN))), float(np.max(np.abs(CM - SM))))


def _compliance_energy(model, A, B):
    return float(model.sampling.integrate(
        np.einsum('pzi,pzij,pzj->pz', A, model.compliance, B)))


def dual_energy(model, S):
    """``1/2 int C^-1 S.S`` over the sampled domain."""
    return 0.5 * _compliance_energy(model, S.values, S.values)


def F_perp(model, S_L, S_c):
    """``int C^-1 S_L.S_c + 1/2 C^-1 S_c.S_c`` evaluated directly."""
    return _compliance_energy(model, S_L.values, S_c.values) + 0.5 * _compliance_energy(
        model, S_c.values, S_c.values)


def f_perp(model, SN, SM):
    """
    Closed-form ``inf`` of :func:`F_perp` over the orthogonal complement of L:
    ``1/2 int Cbar Zbar.Zbar - C^-1 S_L.S_L + c``.
    """
    rec = reconstruct_Z(model, SN, SM)
    barE = model.sampling.integrate(np.einsum('pzi,pzij,pzj->pz', rec.Zbar, model.Cbar, rec.Zbar))
    return 0.5 * float(barE) - dual_energy(model, rec.S_L) + model.energy_constant


def F_star_L(model, SN, SM):
    """Reduced dual energy ``1/2 int C^-1 S_L.S_L + f_perp(S_L)``."""
    S_L = lift_resultants(model, SN, SM)
    return dual_energy(model, S_L) + f_perp(model, SN, SM)


def random_L_perp(model, rng, scale=1.0):
    """A random field with zero resultants and zero ``i3`` entries."""
    s = model.sampling
    R = scale * rng.standard_normal(s.shape + (6,))
    R[..., TRANSVERSE] = 0.0
    Rf = StressField(s, R)
    RN, RM = Rf.resultants()
    R[..., INPLANE] -= affine_inplane(s, RN, RM)
    return StressField(s, R)
