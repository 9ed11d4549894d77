"""
Rescaled three-dimensional primal problem at finite thickness.

The thin body is mapped to the fixed domain ``omega x (-1/2, 1/2)`` and the
thickness enters only through the scaled strain

    E^eps v = (P^eps)^-1 E v (P^eps)^-1,   P^eps = diag(1, 1, eps),

so one hexahedral mesh serves every ``eps``. The unknown is the lifted
displacement ``u = w - g`` minimizing

    F^eps(v) = int 1/2 C E^eps v . E^eps v - F . E^eps v - b . v - <f, v>

with ``F = H - C E g``. The element is a tensor-product Lagrange brick of
order 1 or 2.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import tensor_core as tc
from .fields import Sampling, StressField
from .plate2d import EDGES, lagrange
from .quadrature import composite_gauss, gauss_legendre, tensor_rule_2d
from .solvers import SolverError, solve_spd
from .tensor_core import SQRT2

_INV_SQRT2 = 1.0 / SQRT2


def scaled_strain(eps, grad):
    """
    Mandel ``E^eps v`` from displacement gradients ``grad[..., i, j] = d_j v_i``.
    In-plane entries unscaled, ``(a, 3)`` entries divided by ``eps`` and the
    ``(3, 3)`` entry by ``eps**2``.
    """
    if not eps > 0:
        raise ValueError(f"thickness parameter must be positive, got {eps}")
    g = np.asarray(grad, dtype=float)
    out = np.empty(g.shape[:-2] + (6,))
    out[..., 0] = g[..., 0, 0]
    out[..., 1] = g[..., 1, 1]
    out[..., 2] = g[..., 2, 2] / eps ** 2
    out[..., 3] = _INV_SQRT2 * (g[..., 1, 2] + g[..., 2, 1]) / eps
    out[..., 4] = _INV_SQRT2 * (g[..., 0, 2] + g[..., 2, 0]) / eps
    out[..., 5] = _INV_SQRT2 * (g[..., 0, 1] + g[..., 1, 0])
    return out


@dataclass(frozen=True)
class BrickMesh3D:
    """
    Structured brick grid with per-direction breaks. ``dirichlet`` names the
    in-plane edges whose lateral faces are clamped. ``zbreaks`` normally
    spans ``(-1/2, 1/2)``; any interval is accepted so physical thin meshes
    can be built with ``eps = 1``.
    """
    xbreaks: np.ndarray
    ybreaks: np.ndarray
    zbreaks: np.ndarray
    order: int = 2
    dirichlet: frozenset = frozenset(EDGES)

    def __post_init__(self):
        for name in ('xbreaks', 'ybreaks', 'zbreaks'):
            b = np.asarray(getattr(self, name), dtype=float)
            if len(b) < 2 or np.any(np.diff(b) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, b)
        object.__setattr__(self, 'dirichlet', frozenset(self.dirichlet))
        if not self.dirichlet:
            raise ValueError("the Dirichlet part of the boundary must be nonempty")
        if self.dirichlet - set(EDGES):
            raise ValueError(f"unknown edge names {sorted(self.dirichlet - set(EDGES))}")
        if self.order not in (1, 2):
            raise ValueError("brick order must be 1 or 2")

    @classmethod
    def box(cls, L1, L2, n1, n2, n3, order=2, dirichlet=EDGES, z=(-0.5, 0.5)):
        return cls(np.linspace(0.0, L1, n1 + 1), np.linspace(0.0, L2, n2 + 1),
                   np.linspace(z[0], z[1], n3 + 1), order, dirichlet)

    @property
    def shape(self):
        return len(self.xbreaks) - 1, len(self.ybreaks) - 1, len(self.zbreaks) - 1

    @property
    def node_shape(self):
        p = self.order
        return tuple(p * n + 1 for n in self.shape)

    @property
    def ndof(self):
        return 3 * int(np.prod(self.node_shape))

    @property
    def n_quad(self):
        return self.order + 1

    @property
    def neumann(self):
        return tuple(e for e in EDGES if e not in self.dirichlet)

    def node_coordinates(self, axis):
        b = (self.xbreaks, self.ybreaks, self.zbreaks)[axis]
        p = self.order
        sub = np.linspace(0.0, 1.0, p + 1)[:-1]
        return np.append((b[:-1, None] + np.diff(b)[:, None] * sub).reshape(-1), b[-1])

    def element_dofs(self, ex, ey, ez):
        """Global DOFs of bricks, ``(n, 3 (p+1)^3)``; local node (a, b, c) with a slowest."""
        p = self.order
        _, Ny, Nz = self.node_shape
        ex, ey, ez = (np.asarray(v) for v in (ex, ey, ez))
        out = []
        for a in range(p + 1):
            for b in range(p + 1):
                for c in range(p + 1):
                    node = ((p * ex + a) * Ny + (p * ey + b)) * Nz + (p * ez + c)
                    out += [3 * node, 3 * node + 1, 3 * node + 2]
        return np.stack(out, axis=-1)

    @cached_property
    def fixed(self):
        """Mask of DOFs on the lateral faces above Dirichlet edges."""
        Nx, Ny, Nz = self.node_shape
        I, J = np.meshgrid(np.arange(Nx), np.arange(Ny), indexing='ij')
        hit = np.zeros((Nx, Ny), dtype=bool)
        d = self.dirichlet
        if 'left' in d:
            hit |= I == 0
        if 'right' in d:
            hit |= I == Nx - 1
        if 'bottom' in d:
            hit |= J == 0
        if 'top' in d:
            hit |= J == Ny - 1
        nodes = np.broadcast_to(hit[:, :, None], (Nx, Ny, Nz)).reshape(-1)
        return np.repeat(nodes, 3)

    @cached_property
    def column_transform(self):
        """
        Sparse ``T`` with ``u = T v``, where ``v`` holds, per through-thickness
        node column and component, the bottom value followed by successive
        differences. The penalized transverse strains act on small differences
        in this basis, which keeps rounding out of the ``1/eps**2`` terms.
        """
        Nx, Ny, Nz = self.node_shape
        cum = sp.csr_matrix(np.tril(np.ones((Nz, Nz))))
        return sp.csr_matrix(sp.kron(sp.identity(Nx * Ny), sp.kron(cum, sp.identity(3))))

    @cached_property
    def sampling(self):
        """The volume quadrature used for assembly: ``(p+1)`` Gauss points per direction."""
        pts, w, _ = tensor_rule_2d(self.xbreaks, self.ybreaks, self.n_quad)
        x3, wz = composite_gauss(self.zbreaks, self.n_quad)
        return Sampling(pts, w, x3, wz)

    def locate(self, points):
        """Brick index and local coordinates in ``[0, 1]^3`` of 3D points ``(n, 3)``."""
        points = np.asarray(points, dtype=float)
        out = []
        for axis, b in enumerate((self.xbreaks, self.ybreaks, self.zbreaks)):
            i = np.clip(np.searchsorted(b, points[:, axis], side='right') - 1, 0, len(b) - 2)
            h = b[i + 1] - b[i]
            s = (points[:, axis] - b[i]) / h
            if np.any((s < -1e-12) | (s > 1 + 1e-12)):
                raise ValueError("points outside the mesh")
            out.append((i, s, h))
        return out

    def basis(self, s, t, r, hx, hy, hz):
        """Values ``(n, nn)`` and physical gradients ``(n, nn, 3)`` of the scalar brick basis."""
        p = self.order
        Lx, dLx = lagrange(s, hx, p)
        Ly, dLy = lagrange(t, hy, p)
        Lz, dLz = lagrange(r, hz, p)
        n = len(np.atleast_1d(s))
        N = np.einsum('pa,pb,pc->pabc', Lx, Ly, Lz).reshape(n, -1)
        G = np.stack([np.einsum('pa,pb,pc->pabc', dLx, Ly, Lz).reshape(n, -1),
                      np.einsum('pa,pb,pc->pabc', Lx, dLy, Lz).reshape(n, -1),
                      np.einsum('pa,pb,pc->pabc', Lx, Ly, dLz).reshape(n, -1)], axis=-1)
        return N, G

    def basis_at(self, points):
        (ix, s, hx), (iy, t, hy), (iz, r, hz) = self.locate(points)
        N, G = self.basis(s, t, r, hx, hy, hz)
        return self.element_dofs(ix, iy, iz), N, G

    def volume_blocks(self):
        """
        Iterate over the local quadrature points of the volume rule. Yields
        ``(dofs, N, G, P_index, Z_index)`` for all bricks at once, where
        ``P_index``/``Z_index`` address :attr:`sampling`.
        """
        nx, ny, nz = self.shape
        q = self.n_quad
        gq, _ = gauss_legendre(q, 0.0, 1.0)
        EX, EY, EZ = (a.reshape(-1) for a in np.meshgrid(np.arange(nx), np.arange(ny),
                                                          np.arange(nz), indexing='ij'))
        dofs = self.element_dofs(EX, EY, EZ)
        hx = np.diff(self.xbreaks)[EX]
        hy = np.diff(self.ybreaks)[EY]
        hz = np.diff(self.zbreaks)[EZ]
        ones = np.ones(len(EX))
        for a in range(q):
            for b in range(q):
                for c in range(q):
                    N, G = self.basis(gq[a] * ones, gq[b] * ones, gq[c] * ones, hx, hy, hz)
                    P = ((EX * ny + EY) * q + a) * q + b
                    Z = EZ * q + c
                    yield dofs, N, G, P, Z


def strain_operator(eps, G):
    """``B`` with ``E^eps v = B v_loc`` for nodal gradients ``G (n, nn, 3)``; ``(n, 6, 3 nn)``."""
    n, nn, _ = G.shape
    B = np.zeros((n, 6, 3 * nn))
    ux, uy, uz = slice(0, None, 3), slice(1, None, 3), slice(2, None, 3)
    B[:, 0, ux] = G[..., 0]
    B[:, 1, uy] = G[..., 1]
    B[:, 2, uz] = G[..., 2] / eps ** 2
    B[:, 3, uy] = _INV_SQRT2 * G[..., 2] / eps
    B[:, 3, uz] = _INV_SQRT2 * G[..., 1] / eps
    B[:, 4, ux] = _INV_SQRT2 * G[..., 2] / eps
    B[:, 4, uz] = _INV_SQRT2 * G[..., 0] / eps
    B[:, 5, ux] = _INV_SQRT2 * G[..., 1]
    B[:, 5, uy] = _INV_SQRT2 * G[..., 0]
    return B


def _vector_basis(N):
    """Values of the 3 vector fields per node: ``(n, 3, 3 nn)``."""
    n, nn = N.shape
    V = np.zeros((n, 3, 3 * nn))
    for i in range(3):
        V[:, i, i::3] = N
    return V


def _scatter(dofs, local, n):
    return np.bincount(dofs.reshape(-1), weights=local.reshape(-1), minlength=n)


@dataclass
class PrimalSystem:
    """
    Stiffness and load in the column-difference basis of
    :attr:`BrickMesh3D.column_transform` (``u = T v``), assembled so that
    x3-derivatives only ever see the differences.
    """
    mesh: BrickMesh3D
    eps: float
    C: np.ndarray        # (P, Z, 6, 6) on mesh.sampling
    F: np.ndarray        # (P, Z, 6)
    Kt: sp.csr_matrix
    rhs_t: np.ndarray

    def reduced(self):
        """Difference-basis stiffness and load restricted to the free DOFs."""
        free = ~self.mesh.fixed
        return self.Kt[free][:, free], self.rhs_t[free]

    @cached_property
    def K(self):
        """Nodal stiffness ``T^-t Kt T^-1``."""
        Tinv = _column_difference(self.mesh)
        return (Tinv.T @ self.Kt @ Tinv).tocsr()

    @cached_property
    def rhs(self):
        """Nodal load vector."""
        return _column_difference(self.mesh).T @ self.rhs_t


def _column_difference(mesh):
    """Inverse of the column transform: bottom value and successive differences."""
    Nx, Ny, Nz = mesh.node_shape
    D = sp.identity(Nz, format='csr') - sp.eye(Nz, k=-1, format='csr')
    return sp.csr_matrix(sp.kron(sp.identity(Nx * Ny), sp.kron(D, sp.identity(3))))


def _local_differences(order):
    """``L`` with ``u_loc - u_loc(bottom of column) = L v_loc`` inside one brick."""
    q = order + 1
    n = 3 * q ** 3
    L = np.zeros((n, n))
    for a in range(q):
        for b in range(q):
            for c in range(1, q):
                for cc in range(1, c + 1):
                    for i in range(3):
                        L[((a * q + b) * q + c) * 3 + i, ((a * q + b) * q + cc) * 3 + i] = 1.0
    return L


def _split_strain(eps, G):
    """``B`` split into the in-plane-derivative part and the x3-derivative part."""
    Gin = G.copy()
    Gin[..., 2] = 0.0
    G3 = np.zeros_like(G)
    G3[..., 2] = G[..., 2]
    return strain_operator(eps, Gin), strain_operator(eps, G3)


def internal_force(mesh, eps, S):
    """``int S . E^eps phi_i`` for every global DOF ``i``; ``S`` is ``(P, Z, 6)`` on the mesh rule."""
    s = mesh.sampling
    W = s.volume_weights
    out = np.zeros(mesh.ndof)
    for dofs, _, G, P, Z in mesh.volume_blocks():
        B = strain_operator(eps, G)
        out += _scatter(dofs, np.einsum('ek,ekl->el', S[P, Z] * W[P, Z, None], B), mesh.ndof)
    return out


def load_work(mesh, loads):
    """``int b . phi_i + <f, phi_i>`` (body, face and lateral tractions) per global DOF."""
    s = mesh.sampling
    x1, x2, x3 = s.coords()
    out = np.zeros(mesh.ndof)
    b = loads.body_at(x1, x2, x3)
    if np.any(b):
        W = s.volume_weights
        for dofs, N, _, P, Z in mesh.volume_blocks():
            out += _scatter(dofs, np.einsum('ek,ekl->el', b[P, Z] * W[P, Z, None],
                                            _vector_basis(N)), mesh.ndof)

    def add(points3, weights, q):
        dofs, N, _ = mesh.basis_at(points3)
        return _scatter(dofs, np.einsum('pk,pkl->pl', q * weights[:, None], _vector_basis(N)),
                        mesh.ndof)

    for face, z in (('top', mesh.zbreaks[-1]), ('bottom', mesh.zbreaks[0])):
        f = loads.face_at(face, s.points[:, 0], s.points[:, 1])
        if np.any(f):
            pts = np.column_stack([s.points, np.full(len(s.points), z)])
            out += add(pts, s.weights, f)
    if loads.lateral is not None:
        z, wz = composite_gauss(mesh.zbreaks, mesh.n_quad)
        for edge in mesh.neumann:
            if edge in ('left', 'right'):
                y, wy = composite_gauss(mesh.ybreaks, mesh.n_quad)
                xv = mesh.xbreaks[0] if edge == 'left' else mesh.xbreaks[-1]
                Y, Zg = np.meshgrid(y, z, indexing='ij')
                pts = np.column_stack([np.full(Y.size, xv), Y.reshape(-1), Zg.reshape(-1)])
                w = (wy[:, None] * wz[None, :]).reshape(-1)
            else:
                x, wx = composite_gauss(mesh.xbreaks, mesh.n_quad)
                yv = mesh.ybreaks[0] if edge == 'bottom' else mesh.ybreaks[-1]
                X, Zg = np.meshgrid(x, z, indexing='ij')
                pts = np.column_stack([X.reshape(-1), np.full(X.size, yv), Zg.reshape(-1)])
                w = (wx[:, None] * wz[None, :]).reshape(-1)
            q = loads.lateral_at(pts[:, 0], pts[:, 1], pts[:, 2])
            out += add(pts, w, q)
    return out


def _coo(dofs_r, dofs_c, ke, n):
    nr, nc = ke.shape[1], ke.shape[2]
    rows = np.repeat(dofs_r, nc, axis=1).reshape(-1)
    cols = np.tile(dofs_c, (1, nr)).reshape(-1)
    return sp.coo_matrix((ke.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()


def assemble_primal(mesh, eps, material, loads):
    """
    Stiffness ``int C E^eps phi . E^eps phi`` and right-hand side
    ``int F . E^eps phi + b . phi + <f, phi>`` with ``F = H - C E g``.

    With ``B = B_in + B_3`` (in-plane and x3-derivative parts) and local
    differences ``L``, the difference-basis stiffness is
    ``T^t A T + T^t X + X^t T + Y`` where ``A`` collects ``B_in^t C B_in``,
    ``X`` collects ``B_in^t C B_3 L`` and ``Y`` collects ``L^t B_3^t C B_3 L``.
    """
    if not eps > 0:
        raise ValueError(f"thickness parameter must be positive, got {eps}")
    s = mesh.sampling
    x1, x2, x3 = s.coords()
    C = material.stiffness(x1, x2, x3)
    tc.check_coercive(C, what=getattr(material, 'name', 'material'))
    F = loads.F_at(C, x1, x2, x3)
    W = s.volume_weights
    L = _local_differences(mesh.order)
    A = X = Y = 0.0
    f_in = np.zeros(mesh.ndof)
    f_3 = np.zeros(mesh.ndof)
    for dofs, _, G, P, Z in mesh.volume_blocks():
        Bin, B3 = _split_strain(eps, G)
        B3L = B3 @ L
        Cw = C[P, Z] * W[P, Z, None, None]
        CB3L = np.matmul(Cw, B3L)
        A = A + np.matmul(np.swapaxes(Bin, 1, 2), np.matmul(Cw, Bin))
        X = X + np.matmul(np.swapaxes(Bin, 1, 2), CB3L)
        Y = Y + np.matmul(np.swapaxes(B3L, 1, 2), CB3L)
        Fw = F[P, Z] * W[P, Z, None]
        f_in += _scatter(dofs, np.einsum('ek,ekl->el', Fw, Bin), mesh.ndof)
        f_3 += _scatter(dofs, np.einsum('ek,ekl->el', Fw, B3L), mesh.ndof)
    n = mesh.ndof
    T = mesh.column_transform
    Xg = _coo(dofs, dofs, X, n)
    TtX = T.T @ Xg
    Kt = T.T @ _coo(dofs, dofs, A, n) @ T + TtX + TtX.T + _coo(dofs, dofs, Y, n)
    Kt = sp.csr_matrix(0.5 * (Kt + Kt.T))
    rhs_t = T.T @ (f_in + load_work(mesh, loads)) + f_3
    return PrimalSystem(mesh, float(eps), C, F, Kt, rhs_t)


@dataclass
class PrimalSolution3D:
    """
    Discrete minimizer ``u`` of the rescaled primal problem with its stress
    ``T = C E^eps u``, the rescaled stress ``sigma = T + C E g``, and the
    energies ``F^eps(u)`` and ``F^eps*(T)``.
    """
    system: PrimalSystem
    loads: object
    u: np.ndarray
    residual: float
    T: StressField
    sigma: StressField
    strain: StressField
    primal_energy: float
    dual_energy: float

    @property
    def eps(self):
        return self.system.eps

    @property
    def mesh(self):
        return self.system.mesh

    @property
    def duality_gap(self):
        """``|F^eps(u) + F^eps*(T)| / |F^eps*(T)|`` (zero when both vanish)."""
        gap = abs(self.primal_energy + self.dual_energy)
        return gap / abs(self.dual_energy) if self.dual_energy != 0 else gap


def evaluate_strain(mesh, eps, u, v=None):
    """
    ``E^eps u`` on the mesh volume rule, ``(P, Z, 6)``. When the
    column-difference coefficients ``v`` of ``u`` are given, x3-derivatives
    are taken from the differences directly, so rounding in the nodal
    values is not amplified by the ``1/eps`` scaling.
    """
    out = np.zeros(mesh.sampling.shape + (6,))
    q = mesh.order + 1
    for dofs, _, G, P, Z in mesh.volume_blocks():
        uloc = u[dofs].reshape(len(dofs), -1, 3)
        grad = np.einsum('enj,eni->eij', G, uloc)
        if v is not None:
            d = v[dofs].reshape(len(dofs), q, q, q, 3).copy()
            d[:, :, :, 0, :] = 0.0
            d = np.cumsum(d, axis=3).reshape(len(dofs), -1, 3)
            grad[..., 2] = np.einsum('en,eni->ei', G[..., 2], d)
        out[P, Z] = scaled_strain(eps, grad)
    return out


def displacement_at(mesh, u, points):
    """Interpolated displacement ``(n, 3)`` at 3D points."""
    dofs, N, _ = mesh.basis_at(points)
    return np.einsum('pkl,pl->pk', _vector_basis(N), u[dofs])


def solve_primal(system, loads, rtol=1e-11, method='auto'):
    """Solve the assembled system on the free DOFs and evaluate stresses and energies."""
    mesh, eps = system.mesh, system.eps
    free = ~mesh.fixed
    if not np.any(free):
        raise SolverError("no free degrees of freedom")
    Kff, fff = system.reduced()
    try:
        vf, res = solve_spd(Kff, fff, rtol=rtol, method=method, block=3)
    except RuntimeError as exc:
        if isinstance(exc, SolverError):
            raise SolverError(f"eps={eps}: {exc}", exc.residual) from exc
        raise SolverError(f"eps={eps}: primal system is singular: {exc}") from exc
    v = np.zeros(mesh.ndof)
    v[free] = vf
    u = mesh.column_transform @ v
    s = mesh.sampling
    Eu = evaluate_strain(mesh, eps, u, v)
    T = np.einsum('pzij,pzj->pzi', system.C, Eu)
    x1, x2, x3 = s.coords()
    Eg = loads.g.strain(x1, x2, x3) if loads.g else np.zeros_like(Eu)
    sigma = T + np.einsum('pzij,pzj->pzi', system.C, Eg)
    a_uu = float(s.integrate(np.einsum('pzi,pzi->pz', T, Eu)))
    work = float(vf @ fff)
    Cinv = tc.inverse(system.C)
    dual = 0.5 * float(s.integrate(np.einsum('pzi,pzij,pzj->pz', T, Cinv, T)))
    return PrimalSolution3D(system, loads, u, res, StressField(s, T), StressField(s, sigma),
                            StressField(s, Eu + Eg), 0.5 * a_uu - work, dual)


def rescaled_stress(sol):
    """``sigma^eps = C E^eps w = T + C E g`` on the mesh volume rule."""
    return sol.sigma


def admissibility_residual(sol, v):
    """
    ``int (T - F) . E^eps v - int b . v - <f, v>`` for a nodal vector ``v``
    vanishing on the Dirichlet faces; zero for the exact discrete minimizer.
    """
    mesh, eps = sol.mesh, sol.eps
    v = np.asarray(v, dtype=float)
    if np.any(v[mesh.fixed] != 0):
        raise ValueError("test vector must vanish on the Dirichlet faces")
    r = internal_force(mesh, eps, sol.T.values - sol.system.F) - load_work(mesh, sol.loads)
    return float(r @ v)


def solve(mesh, eps, material, loads, rtol=1e-11, method='auto'):
    return solve_primal(assemble_primal(mesh, eps, material, loads), loads, rtol, method)
