import numpy as np
import pytest
from hypothesis import given, strategies as st

from plategamma import elasticity3d as e3
from plategamma import materials
from plategamma.fields import StressField
from plategamma import tensor_core as tc
from plategamma.loads import KLDisplacement, LoadSpec, Polynomial, VectorField, constant_vector
from plategamma.quadrature import gauss_legendre


def iso(E=1.0, nu=0.3):
    return materials.Homogeneous(tc.isotropic_from_young(E, nu))


def graded(seed=0):
    return materials.random_graded(np.random.default_rng(seed), shift=1.0, gradient=0.3)


BUBBLE = Polynomial.from_table([[1.0, 1, 1, 0], [-1.0, 2, 1, 0], [-1.0, 1, 2, 0], [1.0, 2, 2, 0]])


def mixed_loads():
    return LoadSpec(body=VectorField([Polynomial.constant(0.2), Polynomial.constant(-0.1),
                                      BUBBLE]),
                    top=constant_vector(0.05, 0.1, 0.3),
                    bottom=constant_vector(-0.02, 0.0, 0.1),
                    lateral=constant_vector(0.1, 0.2, 0.05),
                    H=lambda x1, x2, x3: np.stack(np.broadcast_arrays(
                        0.1 * x3, 0.0 * x1, 0.05 + 0 * x2, 0.2 * x1, 0.1 * x2, 0.0 * x3), -1),
                    g=KLDisplacement(Polynomial.from_table([[0.01, 1, 0, 0]]), Polynomial(),
                                     Polynomial.from_table([[0.02, 0, 1, 0]])))


# scaled strain

def test_scaled_strain_examples():
    G = np.zeros((3, 3))
    G[2, 2] = 1.0                      # v = (0, 0, x3)
    for eps in (1.0, 0.3, 0.05):
        expected = np.zeros(6)
        expected[2] = 1 / eps ** 2
        np.testing.assert_allclose(e3.scaled_strain(eps, G), expected)
    G = np.zeros((3, 3))
    G[0, 2] = 1.0                      # v = (x3, 0, 0)
    E = tc.from_mandel(e3.scaled_strain(0.1, G))
    assert E[0, 2] == pytest.approx(5.0)


@given(st.integers(0, 2 ** 32 - 1))
def test_scaled_strain_eps_one_is_strain(seed):
    G = np.random.default_rng(seed).standard_normal((4, 3, 3))
    np.testing.assert_allclose(e3.scaled_strain(1.0, G),
                               tc.to_mandel(0.5 * (G + np.swapaxes(G, 1, 2))), atol=1e-14)


@given(st.floats(0.01, 1.0), st.integers(0, 2 ** 32 - 1))
def test_scaled_strain_is_conjugated_strain(eps, seed):
    G = np.random.default_rng(seed).standard_normal((3, 3))
    Pinv = np.diag([1.0, 1.0, 1 / eps])
    expected = Pinv @ (0.5 * (G + G.T)) @ Pinv
    np.testing.assert_allclose(tc.from_mandel(e3.scaled_strain(eps, G)), expected,
                               rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("eps", [0.0, -0.1])
def test_scaled_strain_rejects_nonpositive(eps):
    with pytest.raises(ValueError):
        e3.scaled_strain(eps, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        e3.assemble_primal(e3.BrickMesh3D.box(1, 1, 1, 1, 1, 1), eps, iso(), LoadSpec())


def test_strain_operator_matches_scaled_strain(rng):
    mesh = e3.BrickMesh3D.box(1, 1, 1, 1, 1, order=2)
    u = rng.standard_normal(mesh.ndof)
    pts = rng.uniform([0, 0, -0.5], [1, 1, 0.5], size=(10, 3))
    dofs, N, G = mesh.basis_at(pts)
    grad = np.einsum('pnj,pni->pij', G, u[dofs].reshape(10, -1, 3))
    for eps in (1.0, 0.2):
        np.testing.assert_allclose(np.einsum('pkl,pl->pk', e3.strain_operator(eps, G), u[dofs]),
                                   e3.scaled_strain(eps, grad), atol=1e-12)


# mesh

def test_mesh_validation_and_counts():
    with pytest.raises(ValueError):
        e3.BrickMesh3D.box(1, 1, 2, 2, 2, order=3)
    with pytest.raises(ValueError):
        e3.BrickMesh3D.box(1, 1, 2, 2, 2, dirichlet=())
    mesh = e3.BrickMesh3D.box(1, 1, 2, 3, 2, order=2, dirichlet=('left',))
    assert mesh.node_shape == (5, 7, 5)
    assert mesh.ndof == 3 * 5 * 7 * 5
    assert mesh.fixed.sum() == 3 * 7 * 5
    T = mesh.column_transform
    v = np.random.default_rng(0).standard_normal(mesh.ndof)
    np.testing.assert_allclose(e3._column_difference(mesh) @ (T @ v), v, atol=1e-12)


# assembly

def test_zero_loads_zero_solution():
    sol = e3.solve(e3.BrickMesh3D.box(1, 1, 2, 2, 1, order=1), 1.0, iso(), LoadSpec())
    assert np.all(sol.u == 0)
    assert sol.primal_energy == 0 and sol.dual_energy == 0 and sol.duality_gap == 0


def test_stiffness_symmetric_positive():
    mesh = e3.BrickMesh3D.box(1, 1, 2, 1, 2, order=2, dirichlet=('left',))
    sysm = e3.assemble_primal(mesh, 0.3, graded(), LoadSpec())
    K = sysm.K.toarray()
    assert np.max(np.abs(K - K.T)) <= 1e-12 * np.max(np.abs(K))
    Kff, _ = sysm.reduced()
    assert np.linalg.eigvalsh(Kff.toarray())[0] > 0
    free = ~mesh.fixed
    assert np.linalg.eigvalsh(K[free][:, free])[0] > 0


@pytest.mark.parametrize("order", [1, 2])
@pytest.mark.parametrize("eps", [1.0, 0.1])
def test_constant_strain_patch(order, eps, rng):
    mesh = e3.BrickMesh3D.box(1, 1, 2, 2, 2, order=order)
    A = rng.standard_normal((3, 3))
    X = [mesh.node_coordinates(a) for a in range(3)]
    XX = np.stack(np.meshgrid(*X, indexing='ij'), -1).reshape(-1, 3)
    u = (XX @ A.T).reshape(-1)
    Eu = e3.evaluate_strain(mesh, eps, u)
    expected = e3.scaled_strain(eps, A)
    np.testing.assert_allclose(Eu, np.broadcast_to(expected, Eu.shape), atol=1e-11 / eps ** 2)
    # a constant stress is self-equilibrated: zero internal force at interior DOFs
    C = tc.random_spd(rng)
    S = np.broadcast_to(C @ expected, Eu.shape)
    r = e3.internal_force(mesh, eps, S)
    Nx, Ny, Nz = mesh.node_shape
    I, J, K = np.meshgrid(np.arange(Nx), np.arange(Ny), np.arange(Nz), indexing='ij')
    interior = ((I > 0) & (I < Nx - 1) & (J > 0) & (J < Ny - 1) & (K > 0) & (K < Nz - 1))
    r = r.reshape(-1, 3)[interior.reshape(-1)]
    assert np.max(np.abs(r)) <= 1e-12 * np.max(np.abs(S)) / eps


def _q1_reference(nx, ny, nz, C_voigt, body, dirichlet_left=True):
    """Standard trilinear elasticity on the unit box, engineering Voigt notation."""
    xs, ys, zs = np.linspace(0, 1, nx + 1), np.linspace(0, 1, ny + 1), np.linspace(-.5, .5, nz + 1)
    Nx, Ny, Nz = nx + 1, ny + 1, nz + 1
    nid = lambda i, j, k: (i * Ny + j) * Nz + k
    n = 3 * Nx * Ny * Nz
    K = np.zeros((n, n))
    f = np.zeros(n)
    g, w = gauss_legendre(2, 0.0, 1.0)
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                h = np.array([xs[i + 1] - xs[i], ys[j + 1] - ys[j], zs[k + 1] - zs[k]])
                nodes = [nid(i + a, j + b, k + c) for a in (0, 1) for b in (0, 1) for c in (0, 1)]
                dofs = np.array([[3 * m, 3 * m + 1, 3 * m + 2] for m in nodes]).reshape(-1)
                for qa in range(2):
                    for qb in range(2):
                        for qc in range(2):
                            s = np.array([g[qa], g[qb], g[qc]])
                            wt = w[qa] * w[qb] * w[qc] * np.prod(h)
                            N = np.zeros(8)
                            dN = np.zeros((8, 3))
                            for m, (a, b, c) in enumerate((a, b, c) for a in (0, 1)
                                                          for b in (0, 1) for c in (0, 1)):
                                l = [s[d] if e else 1 - s[d] for d, e in enumerate((a, b, c))]
                                dl = [(1 if e else -1) / h[d] for d, e in enumerate((a, b, c))]
                                N[m] = l[0] * l[1] * l[2]
                                dN[m] = [dl[0] * l[1] * l[2], l[0] * dl[1] * l[2],
                                         l[0] * l[1] * dl[2]]
                            B = np.zeros((6, 24))
                            for m in range(8):
                                dx, dy, dz = dN[m]
                                B[:, 3 * m:3 * m + 3] = [[dx, 0, 0], [0, dy, 0], [0, 0, dz],
                                                         [0, dz, dy], [dz, 0, dx], [dy, dx, 0]]
                            K[np.ix_(dofs, dofs)] += wt * B.T @ C_voigt @ B
                            for m in range(8):
                                f[dofs[3 * m:3 * m + 3]] += wt * N[m] * np.asarray(body)
    fixed = np.zeros(n, dtype=bool)
    for j in range(Ny):
        for k in range(Nz):
            fixed[3 * nid(0, j, k):3 * nid(0, j, k) + 3] = True
    u = np.zeros(n)
    free = ~fixed
    u[free] = np.linalg.solve(K[np.ix_(free, free)], f[free])
    return u


def test_eps_one_is_standard_elasticity():
    C = tc.orthotropic(2.0, 1.0, 1.5, 0.2, 0.25, 0.3, 0.6, 0.5, 0.4)
    C = tc.rotate(C, tc.rotation_about_x3(0.4))
    body = (0.3, -0.2, 1.0)
    u_ref = _q1_reference(2, 2, 2, tc.to_voigt(C), body)
    mesh = e3.BrickMesh3D.box(1, 1, 2, 2, 2, order=1, dirichlet=('left',))
    sol = e3.solve(mesh, 1.0, materials.Homogeneous(C), LoadSpec(body=constant_vector(*body)))
    np.testing.assert_allclose(sol.u, u_ref, rtol=1e-10, atol=1e-12 * np.max(np.abs(u_ref)))


@pytest.mark.parametrize("eps", [0.5, 0.1])
def test_energy_scaling_physical_mesh(eps):
    """The rescaled problem is the thin physical problem transported to the unit thickness."""
    mat = graded(4)
    f3 = 0.3
    loads = LoadSpec(body=VectorField([Polynomial.constant(0.2), Polynomial(), BUBBLE]),
                     top=constant_vector(0.1, 0.0, f3))
    # physical data: b_hat = P b, f_hat = eps P f, H_hat = H, stiffness at x3 = x3_hat / eps
    phys_loads = LoadSpec(body=VectorField([Polynomial.constant(0.2), Polynomial(),
                                            Polynomial.from_table([[eps * c, *p] for p, c in
                                                                   BUBBLE.terms.items()])]),
                          top=constant_vector(eps * 0.1, 0.0, eps ** 2 * f3))

    class Physical(materials.MaterialField):
        def stiffness(self, x1, x2, x3):
            return mat.stiffness(x1, x2, np.asarray(x3) / eps)

    rescaled = e3.solve(e3.BrickMesh3D.box(1, 1, 2, 2, 2, order=2, dirichlet=('left', 'bottom')),
                        eps, mat, loads)
    phys_mesh = e3.BrickMesh3D.box(1, 1, 2, 2, 2, order=2, dirichlet=('left', 'bottom'),
                                   z=(-eps / 2, eps / 2))
    physical = e3.solve(phys_mesh, 1.0, Physical(), phys_loads)
    assert physical.primal_energy == pytest.approx(eps * rescaled.primal_energy, rel=1e-9)
    # v_hat o p = P^-1 v
    u_r = rescaled.u.reshape(-1, 3)
    u_p = physical.u.reshape(-1, 3)
    np.testing.assert_allclose(u_p, u_r * [1.0, 1.0, 1.0 / eps], rtol=1e-8,
                               atol=1e-10 * np.max(np.abs(u_p)))


def test_energy_decreases_under_refinement():
    loads = LoadSpec(body=constant_vector(0.0, 0.0, 1.0))
    energies = [e3.solve(e3.BrickMesh3D.box(1, 1, n, n, n, order=1, dirichlet=('left',)), 1.0,
                         iso(), loads).primal_energy for n in (1, 2, 4)]
    assert energies[0] >= energies[1] >= energies[2]
    assert energies[2] < 0


# solve

@pytest.mark.parametrize("eps", [1.0, 0.2, 0.05])
def test_duality_and_admissibility(eps):
    mesh = e3.BrickMesh3D.box(1, 1, 3, 3, 2, order=2, dirichlet=('left', 'bottom'))
    loads = mixed_loads()
    sol = e3.solve(mesh, eps, graded(1), loads)
    assert sol.duality_gap <= 1e-11
    x1, x2, x3 = sol.T.sampling.coords()
    Eu = StressField(sol.T.sampling, sol.strain.values - loads.g.strain(x1, x2, x3))
    a_uu = sol.T.inner(Eu)
    assert sol.residual <= 1e-11
    rng = np.random.default_rng(5)
    scale = np.max(np.abs(e3.load_work(mesh, loads))) + np.max(np.abs(
        e3.internal_force(mesh, eps, sol.system.F)))
    for _ in range(10):
        v = rng.standard_normal(mesh.ndof)
        v[mesh.fixed] = 0.0
        assert abs(e3.admissibility_residual(sol, v)) <= 1e-9 * scale * np.linalg.norm(v, 1)
    assert a_uu > 0
    # Galerkin identity a(u, u) = L(u), i.e. F(u) = -a(u, u) / 2
    assert abs(sol.primal_energy + 0.5 * a_uu) <= 1e-12 * a_uu


def test_admissibility_rejects_nonzero_on_dirichlet():
    mesh = e3.BrickMesh3D.box(1, 1, 1, 1, 1, order=1, dirichlet=('left',))
    sol = e3.solve(mesh, 1.0, iso(), LoadSpec(body=constant_vector(0, 0, 1.0)))
    with pytest.raises(ValueError):
        e3.admissibility_residual(sol, np.ones(mesh.ndof))


def test_lifting_with_balanced_H():
    # H = C Eg makes F vanish: the lifted unknown is zero and sigma = C Eg
    C = tc.isotropic_from_young(1.0, 0.3)
    g = KLDisplacement(Polynomial.from_table([[0.1, 1, 0, 0]]), Polynomial(),
                       Polynomial.from_table([[0.05, 2, 0, 0]]))

    class CEg:
        def __call__(self, x1, x2, x3):
            return np.einsum('ij,...j->...i', C, g.strain(x1, x2, x3))

    loads = LoadSpec(H=CEg(), g=g)
    sol = e3.solve(e3.BrickMesh3D.box(1, 1, 2, 2, 2, order=2), 0.2, materials.Homogeneous(C), loads)
    assert np.max(np.abs(sol.u)) <= 1e-14
    x1, x2, x3 = sol.sigma.sampling.coords()
    np.testing.assert_allclose(sol.sigma.values, CEg()(x1, x2, x3), atol=1e-14)
    np.testing.assert_array_equal(e3.rescaled_stress(sol).values, sol.sigma.values)


def test_g_zero_sigma_is_T():
    sol = e3.solve(e3.BrickMesh3D.box(1, 1, 2, 2, 1, order=2), 0.3, graded(2),
                   LoadSpec(body=constant_vector(0, 0, 1.0)))
    np.testing.assert_array_equal(sol.sigma.values, sol.T.values)


def test_difference_strain_matches_nodal_strain():
    mesh = e3.BrickMesh3D.box(1, 1, 2, 2, 2, order=2)
    sol = e3.solve(mesh, 0.3, graded(0), LoadSpec(body=constant_vector(0, 0, 1.0)))
    nodal = e3.evaluate_strain(mesh, 0.3, sol.u)
    np.testing.assert_allclose(nodal, sol.strain.values, rtol=1e-8,
                               atol=1e-10 * np.max(np.abs(nodal)))


def test_transverse_stress_shrinks_with_eps():
    mesh = e3.BrickMesh3D.box(1, 1, 4, 4, 2, order=2)
    loads = LoadSpec(body=VectorField([Polynomial(), Polynomial(), BUBBLE]))
    norms = [e3.solve(mesh, eps, iso(), loads).sigma.l2_norm(tc.TRANSVERSE)
             for eps in (0.4, 0.2, 0.1)]
    assert norms[0] > norms[1] > norms[2]
