"""
Symmetric second- and fourth-order tensor algebra in the orthonormal
(Mandel) representation.

A symmetric 3x3 matrix ``A`` is stored as the 6-vector

    [A11, A22, A33, sqrt(2) A23, sqrt(2) A13, sqrt(2) A12]

and a symmetric 2x2 matrix as ``[A11, A22, sqrt(2) A12]``. With these
weights the Euclidean inner product of two vectors equals the full
contraction ``A:B``, a fourth-order tensor with major and minor symmetries
becomes a symmetric 6x6 (or 3x3) matrix, matrix products are tensor
compositions and the matrix inverse is the tensor inverse.

All routines accept stacked inputs with arbitrary leading batch axes.
"""
import numpy as np

SQRT2 = np.sqrt(2.0)

# (i, j) pairs of the Mandel slots, zero based.
SYM3_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
SYM2_PAIRS = ((0, 0), (1, 1), (0, 1))
SYM3_WEIGHTS = np.array([1.0, 1.0, 1.0, SQRT2, SQRT2, SQRT2])
SYM2_WEIGHTS = np.array([1.0, 1.0, SQRT2])

# Slots of the Sym3 vector holding the in-plane part (11, 22, 12) and the
# transverse part ordered as (13, 23, 33), i.e. the i3 entries for i = 1, 2, 3.
INPLANE = np.array([0, 1, 5])
TRANSVERSE = np.array([4, 3, 2])

# Maps the vector b to the Mandel transverse slots of b (.) e3:
# (b (.) e3)_{a3} = b_a / 2 carries weight sqrt(2), (b (.) e3)_{33} = b_3.
TRANSVERSE_SCALE = np.array([1.0 / SQRT2, 1.0 / SQRT2, 1.0])

# Voigt engineering order (11, 22, 33, 23, 13, 12) is the same slot order,
# only the shear weights differ.
_VOIGT_TO_MANDEL = np.outer(SYM3_WEIGHTS, SYM3_WEIGHTS)


class CoercivityError(ValueError):
    """Raised when a stiffness tensor is not uniformly positive definite."""


def to_mandel(A):
    """Symmetric ``(..., 3, 3)`` matrices to ``(..., 6)`` Mandel vectors."""
    A = np.asarray(A, dtype=float)
    return np.stack([A[..., i, j] for i, j in SYM3_PAIRS], axis=-1) * SYM3_WEIGHTS


def from_mandel(v):
    """Inverse of :func:`to_mandel`; the result is exactly symmetric."""
    v = np.asarray(v, dtype=float)
    s = v / SYM3_WEIGHTS
    A = np.empty(v.shape[:-1] + (3, 3))
    for k, (i, j) in enumerate(SYM3_PAIRS):
        A[..., i, j] = s[..., k]
        A[..., j, i] = s[..., k]
    return A


def sym2_to_mandel(A):
    """Symmetric ``(..., 2, 2)`` matrices to ``(..., 3)`` Mandel vectors."""
    A = np.asarray(A, dtype=float)
    return np.stack([A[..., i, j] for i, j in SYM2_PAIRS], axis=-1) * SYM2_WEIGHTS


def sym2_from_mandel(v):
    v = np.asarray(v, dtype=float)
    s = v / SYM2_WEIGHTS
    A = np.empty(v.shape[:-1] + (2, 2))
    for k, (i, j) in enumerate(SYM2_PAIRS):
        A[..., i, j] = s[..., k]
        A[..., j, i] = s[..., k]
    return A


def contract(A, B):
    """Full contraction ``A:B`` of two Mandel vectors (3D or 2D)."""
    return np.einsum('...i,...i->...', A, B)


def tensor_to_mandel(C):
    """
    Fourth-order tensor ``C_ijkl`` of shape ``(..., 3, 3, 3, 3)`` to its
    ``(..., 6, 6)`` Mandel matrix. Minor symmetries are assumed.
    """
    C = np.asarray(C, dtype=float)
    M = np.empty(C.shape[:-4] + (6, 6))
    for I, (i, j) in enumerate(SYM3_PAIRS):
        for J, (k, l) in enumerate(SYM3_PAIRS):
            M[..., I, J] = C[..., i, j, k, l]
    return M * _VOIGT_TO_MANDEL


def mandel_to_tensor(M):
    """Inverse of :func:`tensor_to_mandel`, filling all 81 components."""
    M = np.asarray(M, dtype=float)
    s = M / _VOIGT_TO_MANDEL
    C = np.empty(M.shape[:-2] + (3, 3, 3, 3))
    for I, (i, j) in enumerate(SYM3_PAIRS):
        for J, (k, l) in enumerate(SYM3_PAIRS):
            for a, b in {(i, j), (j, i)}:
                for c, d in {(k, l), (l, k)}:
                    C[..., a, b, c, d] = s[..., I, J]
    return C


def from_voigt(V):
    """
    Engineering Voigt stiffness (order 11, 22, 33, 23, 13, 12, strains with
    engineering shear) to Mandel.
    """
    return np.asarray(V, dtype=float) * _VOIGT_TO_MANDEL


def to_voigt(M):
    return np.asarray(M, dtype=float) / _VOIGT_TO_MANDEL


def from_21_constants(c):
    """
    Build a Voigt-ordered stiffness from its 21 upper-triangular entries
    (row-major: C11, C12, ..., C16, C22, ..., C66) and convert to Mandel.
    """
    c = np.asarray(c, dtype=float)
    if c.shape[-1] != 21:
        raise ValueError(f"expected 21 constants, got {c.shape[-1]}")
    V = np.zeros(c.shape[:-1] + (6, 6))
    iu = np.triu_indices(6)
    V[..., iu[0], iu[1]] = c
    V[..., iu[1], iu[0]] = c
    return from_voigt(V)


def isotropic(lam, mu):
    """Isotropic stiffness ``lam I(x)I + 2 mu Id`` for Lame constants."""
    M = np.zeros((6, 6))
    M[:3, :3] = lam
    M += 2.0 * mu * np.eye(6)
    return M


def isotropic_from_young(E, nu):
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    return isotropic(lam, mu)


def orthotropic(E1, E2, E3, nu12, nu13, nu23, G12, G13, G23):
    """Orthotropic stiffness in the material axes from engineering constants."""
    S = np.zeros((6, 6))
    S[0, 0], S[1, 1], S[2, 2] = 1.0 / E1, 1.0 / E2, 1.0 / E3
    S[0, 1] = S[1, 0] = -nu12 / E1
    S[0, 2] = S[2, 0] = -nu13 / E1
    S[1, 2] = S[2, 1] = -nu23 / E2
    S[3, 3], S[4, 4], S[5, 5] = 1.0 / G23, 1.0 / G13, 1.0 / G12
    return from_voigt(np.linalg.inv(S))


def rotation_matrix(R):
    """
    6x6 Mandel representation of ``A -> R A R^T`` for a rotation ``R``.
    It is orthogonal, so a stiffness transforms as ``Q M Q^T``.
    """
    R = np.asarray(R, dtype=float)
    Q = np.empty(R.shape[:-2] + (6, 6))
    for J, (k, l) in enumerate(SYM3_PAIRS):
        E = np.zeros((3, 3))
        E[k, l] = E[l, k] = 1.0
        E /= np.sqrt(np.sum(E * E))
        Q[..., :, J] = to_mandel(R @ E @ np.swapaxes(R, -1, -2))
    return Q


def rotate(M, R):
    """Rotate a Mandel stiffness by the 3x3 rotation ``R``."""
    Q = rotation_matrix(R)
    return Q @ M @ np.swapaxes(Q, -1, -2)


def rotation_about_x3(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def apply(C, E):
    """``(C E)_ij = C_ijkl E_kl`` with both operands in Mandel form."""
    return np.einsum('...ij,...j->...i', C, E)


def coercivity_constant(C):
    """
    Smallest eigenvalue of the Mandel matrix. Because the basis is
    orthonormal this is the best constant in ``C A.A >= c |A|^2``.
    Non positive definite inputs give a value <= 0.
    """
    return np.linalg.eigvalsh(C)[..., 0]


def check_coercive(C, rtol=1e-10, what="stiffness"):
    """
    Raise :class:`CoercivityError` unless every stacked matrix is symmetric
    with smallest eigenvalue >= ``rtol`` times its largest eigenvalue.
    """
    C = np.asarray(C, dtype=float)
    scale = np.max(np.abs(C), axis=(-2, -1), keepdims=True)
    if np.any(np.abs(C - np.swapaxes(C, -1, -2)) > 1e-12 * scale):
        raise CoercivityError(f"{what} is not symmetric")
    ev = np.linalg.eigvalsh(C)
    bad = ev[..., 0] < rtol * ev[..., -1]
    if np.any(bad):
        worst = np.min(ev[..., 0] / ev[..., -1])
        raise CoercivityError(
            f"{what} is not coercive: min/max eigenvalue ratio {worst:.3e} < {rtol:.0e}")
    return ev[..., 0]


def inverse(C, rtol=1e-10):
    """Tensor inverse of a coercive stiffness (compliance), Mandel form."""
    check_coercive(C, rtol=rtol)
    C = np.asarray(C, dtype=float)
    inv = np.linalg.inv(C)
    return 0.5 * (inv + np.swapaxes(inv, -1, -2))


def random_spd(rng, n=6, shift=0.5, spread=1.0):
    """
    Seeded SPD matrix ``Q diag(d) Q^T + shift I`` with Haar-random ``Q``.
    Used to build random fully anisotropic stiffness tensors.
    """
    A = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(R))
    d = rng.uniform(0.0, spread, size=n)
    M = (Q * d) @ Q.T + shift * np.eye(n)
    return 0.5 * (M + M.T)
