"""
Two-dimensional limit plate problem on a structured rectangular grid.

The limit dual problem is solved in its primal Kirchhoff-Love form: find a
membrane displacement ``eta_a`` (continuous Lagrange elements) and a
deflection ``eta_3`` (Bogner-Fox-Schmit C1 rectangles: value, both slopes
and the twist per node) minimizing

    1/2 int [E eta, k] . ABD [E eta, k] - work(eta)

with ``k = -grad grad eta_3`` and ``ABD = [[C0, C1], [C1, C2]]`` the moments
of the condensed stiffness. The limit stress is then
``T_ab = Cbar (E eta + x3 k) + f_ab`` and ``T_i3 = F_i3``.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import reduction
from . import tensor_core as tc
from .fields import Sampling, StressField, project_L  # noqa: F401  (re-exported)
from .quadrature import gauss_legendre, tensor_rule_2d, thickness_rule
from .solvers import SolverError, solve_spd
from .tensor_core import INPLANE, SQRT2, TRANSVERSE, TRANSVERSE_SCALE

EDGES = ('left', 'right', 'bottom', 'top')
_INV_SQRT2 = 1.0 / SQRT2


@dataclass(frozen=True)
class PlateMesh:
    """Tensor-product grid on ``(x0, x1) x (y0, y1)`` with Dirichlet edge tags."""
    xbreaks: np.ndarray
    ybreaks: np.ndarray
    dirichlet: frozenset = frozenset(EDGES)

    def __post_init__(self):
        object.__setattr__(self, 'xbreaks', np.asarray(self.xbreaks, dtype=float))
        object.__setattr__(self, 'ybreaks', np.asarray(self.ybreaks, dtype=float))
        object.__setattr__(self, 'dirichlet', frozenset(self.dirichlet))
        if not self.dirichlet:
            raise ValueError("the Dirichlet part of the boundary must be nonempty")
        unknown = self.dirichlet - set(EDGES)
        if unknown:
            raise ValueError(f"unknown edge names {sorted(unknown)}")
        for b in (self.xbreaks, self.ybreaks):
            if len(b) < 2 or np.any(np.diff(b) <= 0):
                raise ValueError("breaks must be strictly increasing")

    @classmethod
    def rectangle(cls, L1, L2, n1, n2, dirichlet=EDGES):
        return cls(np.linspace(0.0, L1, n1 + 1), np.linspace(0.0, L2, n2 + 1), dirichlet)

    @property
    def shape(self):
        return len(self.xbreaks) - 1, len(self.ybreaks) - 1

    @property
    def neumann(self):
        return tuple(e for e in EDGES if e not in self.dirichlet)

    def edge_coordinate(self, edge):
        return {'left': self.xbreaks[0], 'right': self.xbreaks[-1],
                'bottom': self.ybreaks[0], 'top': self.ybreaks[-1]}[edge]

    def locate(self, points):
        """Element index and local coordinates ``s, t`` in ``[0, 1]`` of each point."""
        points = np.asarray(points, dtype=float)
        nx, ny = self.shape
        ix = np.clip(np.searchsorted(self.xbreaks, points[:, 0], side='right') - 1, 0, nx - 1)
        iy = np.clip(np.searchsorted(self.ybreaks, points[:, 1], side='right') - 1, 0, ny - 1)
        hx = self.xbreaks[ix + 1] - self.xbreaks[ix]
        hy = self.ybreaks[iy + 1] - self.ybreaks[iy]
        s = (points[:, 0] - self.xbreaks[ix]) / hx
        t = (points[:, 1] - self.ybreaks[iy]) / hy
        tol = 1e-12
        if np.any((s < -tol) | (s > 1 + tol) | (t < -tol) | (t > 1 + tol)):
            raise ValueError("points outside the plate")
        return ix, iy, s, t, hx, hy


def hermite(s, h):
    """
    Cubic Hermite basis on an interval of length ``h`` at local ``s``:
    order (value at 0, slope at 0, value at 1, slope at 1). Returns values,
    first and second physical derivatives, each ``(..., 4)``.
    """
    s = np.asarray(s, dtype=float)
    h = np.asarray(h, dtype=float)
    s2, s3 = s * s, s * s * s
    N = np.stack([1 - 3 * s2 + 2 * s3, h * (s - 2 * s2 + s3), 3 * s2 - 2 * s3, h * (s3 - s2)], -1)
    d1 = np.stack([(6 * s2 - 6 * s) / h, 1 - 4 * s + 3 * s2, (6 * s - 6 * s2) / h, 3 * s2 - 2 * s], -1)
    d2 = np.stack([(12 * s - 6) / h ** 2, (6 * s - 4) / h, (6 - 12 * s) / h ** 2, (6 * s - 2) / h], -1)
    return N, d1, d2


def lagrange(s, h, order):
    """Equispaced Lagrange basis of ``order`` on ``[0, 1]``: values and physical derivatives."""
    s = np.asarray(s, dtype=float)
    nodes = np.linspace(0.0, 1.0, order + 1)
    N = np.ones(s.shape + (order + 1,))
    dN = np.zeros(s.shape + (order + 1,))
    for a in range(order + 1):
        others = [nodes[m] for m in range(order + 1) if m != a]
        denom = np.prod([nodes[a] - o for o in others])
        val = np.ones_like(s)
        for o in others:
            val = val * (s - o)
        N[..., a] = val / denom
        der = np.zeros_like(s)
        for skip in others:
            term = np.ones_like(s)
            for o in others:
                if o != skip:
                    term = term * (s - o)
            der = der + term
        dN[..., a] = der / denom
    return N, dN / np.asarray(h)[..., None]


# local bending DOFs: node (a, b) in {0,1}^2, derivative order (dx, dy)
_BFS_LOCAL = [(a, b, dx, dy) for a in (0, 1) for b in (0, 1) for dx, dy in
              ((0, 0), (1, 0), (0, 1), (1, 1))]
_BFS_KIND = {(0, 0): 0, (1, 0): 1, (0, 1): 2, (1, 1): 3}


class PlateSpace:
    """
    DOF bookkeeping for the membrane (Lagrange of ``membrane_order``) and
    bending (BFS) fields on a :class:`PlateMesh`. Global vector layout:
    membrane DOFs (2 per membrane node) then bending DOFs (4 per grid node).
    """

    def __init__(self, mesh, membrane_order=1):
        self.mesh = mesh
        self.order = int(membrane_order)
        if self.order not in (1, 2, 3):
            raise ValueError("membrane order must be 1, 2 or 3")
        nx, ny = mesh.shape
        p = self.order
        self.nmx, self.nmy = p * nx + 1, p * ny + 1
        self.n_membrane = 2 * self.nmx * self.nmy
        self.n_bending = 4 * (nx + 1) * (ny + 1)
        self.ndof = self.n_membrane + self.n_bending
        self.nloc_m = 2 * (p + 1) ** 2
        self.nloc = self.nloc_m + 16

    def element_dofs(self, ix, iy):
        """Global DOFs of elements ``(ix, iy)`` (arrays), shape ``(n, nloc)``."""
        p, ny = self.order, self.mesh.shape[1]
        ix, iy = np.asarray(ix), np.asarray(iy)
        mem = []
        for a in range(p + 1):
            for b in range(p + 1):
                node = (p * ix + a) * self.nmy + (p * iy + b)
                mem += [2 * node, 2 * node + 1]
        bend = []
        for a, b, dx, dy in _BFS_LOCAL:
            node = (ix + a) * (ny + 1) + (iy + b)
            bend.append(self.n_membrane + 4 * node + _BFS_KIND[(dx, dy)])
        return np.stack(mem + bend, axis=-1)

    @cached_property
    def fixed(self):
        """Boolean mask of DOFs constrained by the Dirichlet edges."""
        mesh, p = self.mesh, self.order
        nx, ny = mesh.shape
        mask = np.zeros(self.ndof, dtype=bool)

        def on_dirichlet(i, j, ni, nj):
            hit = np.zeros(np.broadcast(i, j).shape, dtype=bool)
            d = mesh.dirichlet
            if 'left' in d:
                hit |= i == 0
            if 'right' in d:
                hit |= i == ni - 1
            if 'bottom' in d:
                hit |= j == 0
            if 'top' in d:
                hit |= j == nj - 1
            return hit

        I, J = np.meshgrid(np.arange(self.nmx), np.arange(self.nmy), indexing='ij')
        nodes = (I * self.nmy + J)[on_dirichlet(I, J, self.nmx, self.nmy)]
        mask[2 * nodes] = True
        mask[2 * nodes + 1] = True
        I, J = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing='ij')
        nodes = (I * (ny + 1) + J)[on_dirichlet(I, J, nx + 1, ny + 1)]
        for k in range(4):
            mask[self.n_membrane + 4 * nodes + k] = True
        return mask

    def basis(self, ix, iy, s, t, hx, hy):
        """
        Basis data at points given in local coordinates. Returns
        ``(dofs, Nm, dNm, Nb, dNb, ddNb)``: membrane scalar basis ``(P, nm)``
        and gradients ``(P, nm, 2)``; bending basis ``(P, 16)``, gradients
        ``(P, 16, 2)`` and Hessians ``(P, 16, 2, 2)``.
        """
        p = self.order
        Lx, dLx = lagrange(s, hx, p)
        Ly, dLy = lagrange(t, hy, p)
        Nm = np.einsum('pa,pb->pab', Lx, Ly).reshape(len(s), -1)
        dNm = np.stack([np.einsum('pa,pb->pab', dLx, Ly).reshape(len(s), -1),
                        np.einsum('pa,pb->pab', Lx, dLy).reshape(len(s), -1)], axis=-1)
        Hx, dHx, ddHx = hermite(s, hx)
        Hy, dHy, ddHy = hermite(t, hy)
        Nb = np.empty((len(s), 16))
        dNb = np.empty((len(s), 16, 2))
        ddNb = np.empty((len(s), 16, 2, 2))
        for k, (a, b, dx, dy) in enumerate(_BFS_LOCAL):
            i, j = 2 * a + dx, 2 * b + dy
            Nb[:, k] = Hx[:, i] * Hy[:, j]
            dNb[:, k, 0] = dHx[:, i] * Hy[:, j]
            dNb[:, k, 1] = Hx[:, i] * dHy[:, j]
            ddNb[:, k, 0, 0] = ddHx[:, i] * Hy[:, j]
            ddNb[:, k, 1, 1] = Hx[:, i] * ddHy[:, j]
            ddNb[:, k, 0, 1] = ddNb[:, k, 1, 0] = dHx[:, i] * dHy[:, j]
        return self.element_dofs(ix, iy), Nm, dNm, Nb, dNb, ddNb

    def basis_at(self, points):
        return self.basis(*self.mesh.locate(points))

    def strain_operator(self, Nm, dNm, ddNb):
        """
        ``B`` mapping local DOFs to the generalized strain
        ``[E eta (Mandel 3), k = -grad grad eta_3 (Mandel 3)]``, ``(P, 6, nloc)``.
        """
        P, nm = Nm.shape
        B = np.zeros((P, 6, self.nloc))
        B[:, 0, 0:2 * nm:2] = dNm[:, :, 0]
        B[:, 1, 1:2 * nm:2] = dNm[:, :, 1]
        B[:, 2, 0:2 * nm:2] = _INV_SQRT2 * dNm[:, :, 1]
        B[:, 2, 1:2 * nm:2] = _INV_SQRT2 * dNm[:, :, 0]
        B[:, 3, 2 * nm:] = -ddNb[:, :, 0, 0]
        B[:, 4, 2 * nm:] = -ddNb[:, :, 1, 1]
        B[:, 5, 2 * nm:] = -SQRT2 * ddNb[:, :, 0, 1]
        return B

    def force_operator(self, Nm, Nb, dNb):
        """
        Work of a resultant force ``(n_1, n_2, n_3)`` and couple ``(m_1, m_2)``
        (``m_a = int x3 q_a``) on the KL field ``z_a = eta_a - x3 d_a eta_3``,
        ``z_3 = eta_3``: returns ``G`` with work ``= [n, m] . G v``, ``(P, 5, nloc)``.
        """
        P, nm = Nm.shape
        G = np.zeros((P, 5, self.nloc))
        G[:, 0, 0:2 * nm:2] = Nm
        G[:, 1, 1:2 * nm:2] = Nm
        G[:, 2, 2 * nm:] = Nb
        G[:, 3, 2 * nm:] = -dNb[:, :, 0]
        G[:, 4, 2 * nm:] = -dNb[:, :, 1]
        return G


class SplinePlateSpace(PlateSpace):
    """
    Kirchhoff-Love fields that lie inside the 3D Lagrange brick space of the
    same order: Lagrange membrane of ``order`` and, for ``order >= 2``, a
    deflection in tensor-product C1 quadratic B-splines (so that ``grad eta_3``
    is continuous and piecewise quadratic). Used as the discrete test space
    for resultant equilibrium of 3D solutions.
    """

    def __init__(self, mesh, order=2):
        super().__init__(mesh, order)
        nx, ny = mesh.shape
        self.has_bending = self.order >= 2
        self.nbx, self.nby = nx + 2, ny + 2
        self.n_bending = self.nbx * self.nby if self.has_bending else 0
        self.ndof = self.n_membrane + self.n_bending
        self.nloc = self.nloc_m + (9 if self.has_bending else 0)
        if self.has_bending:
            self._splines = [self._spline_family(b) for b in (mesh.xbreaks, mesh.ybreaks)]

    @staticmethod
    def _spline_family(breaks):
        from scipy.interpolate import BSpline
        t = np.concatenate([[breaks[0]] * 2, breaks, [breaks[-1]] * 2])
        nb = len(breaks) + 1
        spl = BSpline(t, np.eye(nb), 2, extrapolate=True)
        return spl, spl.derivative(1), spl.derivative(2)

    def element_dofs(self, ix, iy):
        p, ix, iy = self.order, np.asarray(ix), np.asarray(iy)
        mem = []
        for a in range(p + 1):
            for b in range(p + 1):
                node = (p * ix + a) * self.nmy + (p * iy + b)
                mem += [2 * node, 2 * node + 1]
        bend = [self.n_membrane + (ix + a) * self.nby + (iy + b)
                for a in range(3) for b in range(3)] if self.has_bending else []
        return np.stack(mem + bend, axis=-1)

    @cached_property
    def fixed(self):
        mask = np.zeros(self.ndof, dtype=bool)
        mask[:self.n_membrane] = PlateSpace(self.mesh, self.order).fixed[:self.n_membrane]
        if self.has_bending:
            I, J = np.meshgrid(np.arange(self.nbx), np.arange(self.nby), indexing='ij')
            hit = np.zeros(I.shape, dtype=bool)
            d = self.mesh.dirichlet
            if 'left' in d:
                hit |= I < 2
            if 'right' in d:
                hit |= I >= self.nbx - 2
            if 'bottom' in d:
                hit |= J < 2
            if 'top' in d:
                hit |= J >= self.nby - 2
            mask[self.n_membrane:] = hit.reshape(-1)
        return mask

    def basis(self, ix, iy, s, t, hx, hy):
        p = self.order
        Lx, dLx = lagrange(s, hx, p)
        Ly, dLy = lagrange(t, hy, p)
        n = len(s)
        Nm = np.einsum('pa,pb->pab', Lx, Ly).reshape(n, -1)
        dNm = np.stack([np.einsum('pa,pb->pab', dLx, Ly).reshape(n, -1),
                        np.einsum('pa,pb->pab', Lx, dLy).reshape(n, -1)], axis=-1)
        if not self.has_bending:
            return (self.element_dofs(ix, iy), Nm, dNm, np.zeros((n, 0)),
                    np.zeros((n, 0, 2)), np.zeros((n, 0, 2, 2)))
        x = self.mesh.xbreaks[ix] + s * hx
        y = self.mesh.ybreaks[iy] + t * hy
        rows = np.arange(n)[:, None]
        X = [f(x)[rows, ix[:, None] + np.arange(3)] for f in self._splines[0]]
        Y = [f(y)[rows, iy[:, None] + np.arange(3)] for f in self._splines[1]]
        Nb = np.einsum('pa,pb->pab', X[0], Y[0]).reshape(n, 9)
        dNb = np.stack([np.einsum('pa,pb->pab', X[1], Y[0]).reshape(n, 9),
                        np.einsum('pa,pb->pab', X[0], Y[1]).reshape(n, 9)], axis=-1)
        ddNb = np.empty((n, 9, 2, 2))
        ddNb[:, :, 0, 0] = np.einsum('pa,pb->pab', X[2], Y[0]).reshape(n, 9)
        ddNb[:, :, 1, 1] = np.einsum('pa,pb->pab', X[0], Y[2]).reshape(n, 9)
        ddNb[:, :, 0, 1] = ddNb[:, :, 1, 0] = np.einsum('pa,pb->pab', X[1], Y[1]).reshape(n, 9)
        return self.element_dofs(ix, iy), Nm, dNm, Nb, dNb, ddNb


def _scatter(dofs, local, n):
    """Assemble stacked local vectors ``(P, nloc)`` into a global vector."""
    return np.bincount(dofs.reshape(-1), weights=local.reshape(-1), minlength=n)


def limit_sampling(mesh, n_gauss=4, thickness=None, interfaces=()):
    """Product rule used to build the reduced model on ``mesh``."""
    pts, w, _ = tensor_rule_2d(mesh.xbreaks, mesh.ybreaks, n_gauss)
    x3, wz = thickness if thickness is not None else thickness_rule(8, interfaces)
    return Sampling(pts, w, np.asarray(x3), np.asarray(wz))


def build_limit_model(material, loads, sampling):
    """Stiffness and ``F = H - C Eg`` at every sample, reduced to plate tensors."""
    x1, x2, x3 = sampling.coords()
    C = material.stiffness(x1, x2, x3)
    F = loads.F_at(C, x1, x2, x3)
    return reduction.build_reduced_model(sampling, C, F)


def edge_sampling(mesh, edge, n_gauss, x3, wz):
    """Points, arc-length weights and thickness rule on one lateral edge."""
    if edge in ('left', 'right'):
        y, wy = zip(*(gauss_legendre(n_gauss, a, b) for a, b in zip(mesh.ybreaks[:-1], mesh.ybreaks[1:])))
        y, wy = np.concatenate(y), np.concatenate(wy)
        pts = np.stack([np.full_like(y, mesh.edge_coordinate(edge)), y], axis=1)
        return Sampling(pts, wy, x3, wz)
    x, wx = zip(*(gauss_legendre(n_gauss, a, b) for a, b in zip(mesh.xbreaks[:-1], mesh.xbreaks[1:])))
    x, wx = np.concatenate(x), np.concatenate(wx)
    pts = np.stack([x, np.full_like(x, mesh.edge_coordinate(edge))], axis=1)
    return Sampling(pts, wx, x3, wz)


def _force_resultants(q, sampling):
    """``[n_1, n_2, n_3, m_1, m_2]`` of a distributed force ``q (P, Z, 3)``."""
    n = sampling.thickness_moment(q, 0)
    m = sampling.thickness_moment(q[..., :2], 1)
    return np.concatenate([n, m], axis=-1)


def work_functionals(space, loads, model, n_gauss=4):
    """
    Assembled load vector of the body force, the face tractions and the
    lateral tractions tested with KL fields. Returns ``(W_N, W_M)``, the
    membrane and bending parts of the global vector.
    """
    s = model.sampling
    x1, x2, x3 = s.coords()
    total = np.zeros(space.ndof)

    def add(points, weights, resultants):
        dofs, Nm, _, Nb, dNb, _ = space.basis_at(points)
        G = space.force_operator(Nm, Nb, dNb)
        local = np.einsum('pk,pkl->pl', resultants * weights[:, None], G)
        return _scatter(dofs, local, space.ndof)

    b = loads.body_at(x1, x2, x3)
    if np.any(b):
        total += add(s.points, s.weights, _force_resultants(b, s))
    for face, x3f in (('top', 0.5), ('bottom', -0.5)):
        f = loads.face_at(face, s.points[:, 0], s.points[:, 1])
        if np.any(f):
            res = np.concatenate([f, x3f * f[:, :2]], axis=-1)
            total += add(s.points, s.weights, res)
    if loads.lateral is not None:
        for edge in space.mesh.neumann:
            es = edge_sampling(space.mesh, edge, n_gauss, s.x3, s.wz)
            e1, e2, e3 = es.coords()
            q = loads.lateral_at(e1, e2, e3)
            total += add(es.points, es.weights, _force_resultants(q, es))
    return total[:space.n_membrane], total[space.n_membrane:]


@dataclass
class LimitSystem:
    space: PlateSpace
    model: reduction.ReducedModel
    K: sp.csr_matrix
    rhs: np.ndarray
    work: np.ndarray

    @property
    def free(self):
        return ~self.space.fixed


def assemble_limit_system(space, model, loads, n_gauss=4):
    """
    Stiffness ``sum w B^T ABD B`` and right-hand side
    ``W + int (F^N - f^N).E eta + (F^M - f^M).k`` on the plate space. The
    model must be built on :func:`limit_sampling` of the same mesh.
    """
    mesh = space.mesh
    s = model.sampling
    _, _, elem = tensor_rule_2d(mesh.xbreaks, mesh.ybreaks, n_gauss)
    if len(elem) != len(s.weights):
        raise ValueError("model sampling does not match the mesh quadrature")
    dofs, Nm, dNm, Nb, dNb, ddNb = space.basis_at(s.points)
    B = space.strain_operator(Nm, dNm, ddNb)
    D = model.ABD
    ke = np.einsum('pik,pij,pjl->pkl', B, D * s.weights[:, None, None], B)
    rows = np.repeat(dofs, space.nloc, axis=1).reshape(-1)
    cols = np.tile(dofs, (1, space.nloc)).reshape(-1)
    K = sp.coo_matrix((ke.reshape(-1), (rows, cols)), shape=(space.ndof, space.ndof)).tocsr()
    K.sum_duplicates()

    FN, FM = StressField(s, model.F).resultants()
    G = np.concatenate([FN - model.fN, FM - model.fM], axis=-1)
    rhs = _scatter(dofs, np.einsum('pk,pkl->pl', G * s.weights[:, None], B), space.ndof)
    WN, WM = work_functionals(space, loads, model, n_gauss)
    work = np.concatenate([WN, WM])
    return LimitSystem(space, model, K, rhs + work, work)


@dataclass
class KLSolution:
    """
    Limit plate solution. ``dofs`` holds the lifted unknown ``u = w - g`` in
    the layout of :class:`PlateSpace`; ``psi`` is the transverse profile as
    matrix entries ``(K13, K23, K33)`` of ``C^-1 T`` on the model sampling.
    """
    space: PlateSpace
    model: reduction.ReducedModel
    loads: object
    dofs: np.ndarray
    residual: float
    N: np.ndarray = field(default=None)
    M: np.ndarray = field(default=None)

    def kinematics(self, points):
        """Membrane displacement ``(P, 2)``, deflection ``(P,)``, its gradient, ``E eta`` and ``k``."""
        dofs, Nm, dNm, Nb, dNb, ddNb = self.space.basis_at(points)
        loc = self.dofs[dofs]
        nm = Nm.shape[1]
        um = loc[:, :2 * nm].reshape(len(points), nm, 2)
        ub = loc[:, 2 * nm:]
        eta = np.einsum('pa,pac->pc', Nm, um)
        w = np.einsum('pa,pa->p', Nb, ub)
        gw = np.einsum('pak,pa->pk', dNb, ub)
        B = self.space.strain_operator(Nm, dNm, ddNb)
        gen = np.einsum('pkl,pl->pk', B, loc)
        return eta, w, gw, gen[:, :3], gen[:, 3:]

    def inplane_strain(self, sampling):
        """``(Eu)_ab = E eta + x3 k`` at every sample, Mandel ``(P, Z, 3)``."""
        _, _, _, Eeta, k = self.kinematics(sampling.points)
        return Eeta[:, None, :] + sampling.x3[None, :, None] * k[:, None, :]

    def displacement(self, sampling, include_g=True):
        """3D KL displacement ``u`` (plus ``g``) at the samples, ``(P, Z, 3)``."""
        eta, w, gw, _, _ = self.kinematics(sampling.points)
        x3 = sampling.x3[None, :]
        out = np.stack([eta[:, None, 0] - x3 * gw[:, None, 0],
                        eta[:, None, 1] - x3 * gw[:, None, 1],
                        np.broadcast_to(w[:, None], (len(w), len(sampling.x3)))], axis=-1)
        if include_g and self.loads.g:
            out = out + self.loads.g.displacement(*sampling.coords())
        return out


def solve_limit(space, model, loads, n_gauss=4, rtol=1e-11, method='auto'):
    """Assemble and solve the limit problem; returns a :class:`KLSolution`."""
    system = assemble_limit_system(space, model, loads, n_gauss)
    free = system.free
    Kff = system.K[free][:, free]
    if Kff.shape[0] == 0:
        raise SolverError("no free degrees of freedom")
    try:
        uf, res = solve_spd(Kff, system.rhs[free], rtol=rtol, method=method)
    except SolverError:
        raise
    except RuntimeError as exc:
        # singular factor: insufficient Dirichlet constraints
        raise SolverError(f"limit system is singular: {exc}") from exc
    dofs = np.zeros(space.ndof)
    dofs[free] = uf
    sol = KLSolution(space, model, loads, dofs, res)
    sol.N, sol.M = limit_resultants(sol)
    return sol


def limit_resultants(sol):
    """``T^N = C0 E eta + C1 k + f^N`` and ``T^M = C1 E eta + C2 k + f^M`` at the model points."""
    m = sol.model
    _, _, _, Eeta, k = sol.kinematics(m.sampling.points)
    N = np.einsum('pab,pb->pa', m.C0, Eeta) + np.einsum('pab,pb->pa', m.C1, k) + m.fN
    M = np.einsum('pab,pb->pa', m.C1, Eeta) + np.einsum('pab,pb->pa', m.C2, k) + m.fM
    return N, M


def condensed_stress(C, Eu, F):
    """
    Stress with in-plane strain ``Eu`` whose ``i3`` entries equal ``F_i3``:
    ``T_ab = Cbar Eu + f_ab``, ``T_i3 = F_i3``. ``C`` is ``(..., 6, 6)``.
    """
    Cbar = reduction.plane_reduce(C)
    Ft = reduction.transverse_components(F)
    cF = np.linalg.solve(reduction.shear_block(C), Ft[..., None])[..., 0]
    coupling = C[..., INPLANE[:, None], TRANSVERSE[None, :]] * TRANSVERSE_SCALE
    T = np.zeros(Eu.shape[:-1] + (6,))
    T[..., INPLANE] = np.einsum('...ab,...b->...a', Cbar, Eu) + np.einsum(
        '...ai,...i->...a', coupling, cF)
    T[..., TRANSVERSE] = F[..., TRANSVERSE]
    return T


def limit_T(sol, material, sampling):
    """The limit minimizer ``T`` at arbitrary samples."""
    x1, x2, x3 = sampling.coords()
    C = material.stiffness(x1, x2, x3)
    F = sol.loads.F_at(C, x1, x2, x3)
    return StressField(sampling, condensed_stress(C, sol.inplane_strain(sampling), F))


def limit_stress(sol, material, sampling=None):
    """``sigma = T + C Eg``, the limit of the rescaled 3D stresses."""
    sampling = sampling or sol.model.sampling
    T = limit_T(sol, material, sampling)
    if not sol.loads.g:
        return T
    x1, x2, x3 = sampling.coords()
    C = material.stiffness(x1, x2, x3)
    CEg = tc.apply(C, sol.loads.g.strain(x1, x2, x3))
    return StressField(sampling, T.values + CEg)


def limit_profile(sol, material, sampling=None):
    """
    ``K = C^-1 sigma``: in-plane block ``E w`` and transverse entries
    ``psi``; the limit of the rescaled strains.
    """
    sampling = sampling or sol.model.sampling
    x1, x2, x3 = sampling.coords()
    C = material.stiffness(x1, x2, x3)
    sigma = limit_stress(sol, material, sampling)
    return StressField(sampling, np.einsum('...ij,...j->...i', tc.inverse(C), sigma.values))


def transverse_profile(sol):
    """
    ``psi`` on the model sampling from the closed-form reconstruction with
    ``S^L = Pi(T)``: ``z = c^-1 (F_i3 - (C Zbar)_i3)`` and
    ``psi = (z_1/2, z_2/2, z_3)``.
    """
    return reduction.reconstruct_Z(sol.model, sol.N, sol.M).psi


def structure_check(sol, material):
    """
    Decompose ``C^-1 T`` of the limit solve into an in-plane part and
    ``psi``. Returns relative errors ``(inplane, psi)`` against ``E u``
    from the solved DOFs and against ``psi`` from the reconstruction.
    """
    s = sol.model.sampling
    T = limit_T(sol, material, s)
    K = np.einsum('...ij,...j->...i', sol.model.compliance, T.values)
    Eu = sol.inplane_strain(s)
    psi_rec = transverse_profile(sol)
    psi_T = K[..., TRANSVERSE] * np.array([_INV_SQRT2, _INV_SQRT2, 1.0])
    scale = max(np.max(np.abs(K)), 1e-300)
    e_plane = np.max(np.abs(K[..., INPLANE] - Eu)) / scale
    e_psi = np.max(np.abs(psi_T - psi_rec)) / scale
    return float(e_plane), float(e_psi)


def equilibrium_residual(space, model, loads, SN, SM, n_gauss=4):
    """
    Residual of the weak resultant equilibrium
    ``int (S^N - F^N).E phi + (S^M - F^M).k(phi) - W(phi)`` for every free
    test DOF of ``space``; ``SN``/``SM`` live on the model points.
    """
    s = model.sampling
    dofs, Nm, dNm, Nb, dNb, ddNb = space.basis_at(s.points)
    B = space.strain_operator(Nm, dNm, ddNb)
    FN, FM = StressField(s, model.F).resultants()
    G = np.concatenate([SN - FN, SM - FM], axis=-1)
    r = _scatter(dofs, np.einsum('pk,pkl->pl', G * s.weights[:, None], B), space.ndof)
    WN, WM = work_functionals(space, loads, model, n_gauss)
    return (r - np.concatenate([WN, WM]))[~space.fixed]
