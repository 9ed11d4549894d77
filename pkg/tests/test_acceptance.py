"""
Acceptance suite. Each criterion runs at its stated tolerance and prints one
PASS/FAIL line (visible with or without ``-s``).
"""
import os
import time

import numpy as np
import pytest

from plategamma import config as cfgmod
from plategamma import harness, materials, plate2d, reduction
from plategamma import tensor_core as tc
from plategamma.fields import Sampling, StressField
from plategamma.quadrature import gauss_legendre, tensor_rule_2d

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, 'configs')


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail
    return emit


def sampling(n_inplane=2, nz=8):
    pts, w, _ = tensor_rule_2d([0.0, 1.0], [0.0, 1.0], n_inplane)
    x3, wz = gauss_legendre(nz, -0.5, 0.5)
    return Sampling(pts, w, x3, wz)


def sym_e3(b):
    B = np.zeros((3, 3))
    B[:, 2] += 0.5 * b
    B[2, :] += 0.5 * b
    return B


def min_over_b(C4, A):
    """Minimum of the quadratic ``b -> C(A + b (.) e3).(A + b (.) e3)`` from exact differences."""
    q = lambda b: np.einsum('ijkl,ij,kl->', C4, A + sym_e3(b), A + sym_e3(b))
    I = np.eye(3)
    g = np.array([(q(I[i]) - q(-I[i])) / 2 for i in range(3)])
    H = np.array([[(q(I[i] + I[j]) - q(I[i] - I[j]) - q(-I[i] + I[j]) + q(-I[i] - I[j])) / 4
                   for j in range(3)] for i in range(3)])
    return q(np.linalg.solve(H, -g))


def random_21_field(rng):
    """x3-dependent anisotropic stiffness from three random 21-constant tables."""
    base = tc.random_spd(rng, shift=1.0, spread=2.0)
    terms = [(tc.from_21_constants(tc.to_voigt(base)[np.triu_indices(6)]), (0, 0, 0))]
    for power in (1, 2):
        A = rng.standard_normal((6, 6))
        A = 0.5 * (A + A.T)
        terms.append((0.3 * A / np.linalg.norm(A, 2), (0, 0, power)))
    return materials.Graded(terms)


def test_1_reduction_oracle(report):
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    x3, wz = gauss_legendre(8, -0.5, 0.5)
    worst_bar = worst_hat = 0.0
    for _ in range(50):
        mat = random_21_field(rng)
        C = mat(0.5, 0.5, x3)                       # (Z, 6, 6)
        tc.check_coercive(C)
        Cbar = reduction.plane_reduce(C)
        for z in range(len(x3)):
            a = rng.standard_normal(3)
            A = np.zeros((3, 3))
            A[:2, :2] = tc.sym2_from_mandel(a)
            m = min_over_b(tc.mandel_to_tensor(C[z]), A)
            rel = abs(a @ Cbar[z] @ a - m) / (np.sum(A * A) * np.linalg.norm(C[z], 2))
            worst_bar = max(worst_bar, rel)
        Chat = reduction.hat_C(*reduction.moments(Cbar[None], x3, wz))[0]
        a = rng.standard_normal(3)
        L = np.linalg.cholesky(Cbar)
        Lt = np.swapaxes(L, -1, -2) * np.sqrt(wz)[:, None, None]
        M = Lt.reshape(-1, 3)
        r = -(Lt @ (x3[:, None] * a[None, :])[..., None]).reshape(-1)
        B, *_ = np.linalg.lstsq(M, r, rcond=None)
        m = 12 * np.sum((M @ B - r) ** 2)
        worst_hat = max(worst_hat, abs(a @ Chat @ a - m) / abs(m))
    elapsed = time.perf_counter() - start
    ok = worst_bar <= 1e-9 and worst_hat <= 1e-9 and elapsed < 10
    report(1, ok, f"reduction oracles: Cbar {worst_bar:.1e}, Chat {worst_hat:.1e} "
                  f"(<= 1e-9), {elapsed:.2f} s (< 10 s)")


def test_2_reconstruction_consistency(report):
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    s = sampling()
    mat = materials.random_graded(rng)
    C = mat(*s.coords())
    F = np.zeros(s.shape + (6,))
    F[..., tc.TRANSVERSE] = rng.standard_normal(s.shape + (3,))
    model = reduction.build_reduced_model(s, C, F)
    P = s.shape[0]
    SN, SM = rng.standard_normal((P, 3)), rng.standard_normal((P, 3))
    rec = reduction.reconstruct_Z(model, SN, SM)
    res = max(reduction.system_residuals(model, rec))
    fp = reduction.f_perp(model, SN, SM)
    eq = abs(reduction.F_perp(model, rec.S_L, rec.Lambda) - fp) / abs(fp)
    below = min(reduction.F_perp(model, rec.S_L, reduction.random_L_perp(
        model, rng, 10.0 ** rng.uniform(-3, 1))) - fp for _ in range(100))
    elapsed = time.perf_counter() - start
    ok = res <= 1e-10 and eq <= 1e-10 and below >= 0 and elapsed < 10
    report(2, ok, f"system residual {res:.1e} (<= 1e-10), equality at Lambda {eq:.1e} "
                  f"(<= 1e-10), min excess over 100 probes {below:.2e} (>= 0), {elapsed:.2f} s")


def test_3_special_cases(report):
    rng = np.random.default_rng(303)
    s = sampling()
    # even material
    C0, C2 = tc.random_spd(rng), tc.random_spd(rng, shift=0.1)
    even = materials.Graded([(C0, (0, 0, 0)), (0.3 * C2, (0, 0, 2)), (0.2 * C2, (1, 1, 0))])
    m_even = reduction.build_reduced_model(s, even(*s.coords()))
    c1 = float(np.max(np.abs(m_even.C1)))
    # homogeneous, F = 0
    C = tc.random_spd(rng)
    m_hom = reduction.build_reduced_model(s, np.broadcast_to(C, s.shape + (6, 6)))
    P = s.shape[0]
    SN, SM = rng.standard_normal((P, 3)), rng.standard_normal((P, 3))
    plane = reduction.lift_resultants(m_hom, SN, SM).values[..., tc.INPLANE]
    Cbi = np.linalg.inv(reduction.plane_reduce(C))
    expected = 0.5 * s.integrate(np.einsum('pzi,ij,pzj->pz', plane, Cbi, plane))
    hom = abs(reduction.F_star_L(m_hom, SN, SM) - expected) / abs(expected)
    # x3-mirror-symmetric (monoclinic) material with F_a3 = 0
    mono = []
    for _ in range(3):
        V = tc.to_voigt(tc.random_spd(rng))
        V[[0, 1, 2, 5], 3] = V[3, [0, 1, 2, 5]] = 0.0
        V[[0, 1, 2, 5], 4] = V[4, [0, 1, 2, 5]] = 0.0
        V += 3.0 * np.eye(6)
        mono.append(tc.from_voigt(V))
    mat = materials.Graded([(mono[0], (0, 0, 0)), (0.2 * mono[1], (0, 0, 1)),
                            (0.2 * mono[2], (1, 0, 0))])
    F = np.zeros(s.shape + (6,))
    F[..., 2] = rng.standard_normal(s.shape)
    m_tri = reduction.build_reduced_model(s, mat(*s.coords()), F)
    rec = reduction.reconstruct_Z(m_tri, SN, SM)
    lam = float(np.max(np.abs(rec.Lambda.values[..., [3, 4]])))
    ok = c1 <= 1e-12 and hom <= 1e-10 and lam <= 1e-12
    report(3, ok, f"even C1 {c1:.1e} (<= 1e-12), homogeneous F*_L {hom:.1e} (<= 1e-10), "
                  f"monoclinic Lambda_a3 {lam:.1e} (<= 1e-12)")


@pytest.fixture(scope="module")
def studies():
    out = {}
    start = time.perf_counter()
    for name in ('isotropic_clamped', 'graded_anisotropic'):
        cfg = cfgmod.load(os.path.join(CONFIGS, f'{name}.toml'))
        out[name] = harness.run_study(cfg, threads=2)
    out['elapsed'] = time.perf_counter() - start
    return out


def test_study_configs_match_criterion():
    cfg = cfgmod.load(os.path.join(CONFIGS, 'isotropic_clamped.toml'))
    assert cfg.raw['material'] == {'kind': 'isotropic', 'E': 1.0, 'nu': 0.3}
    assert set(cfg.dirichlet) == set(plate2d.EDGES)
    assert (cfg.mesh['n1'], cfg.mesh['n2'], cfg.mesh['n3']) == (16, 16, 4)
    assert cfg.eps == [0.4, 0.2, 0.1, 0.05]
    g = cfgmod.load(os.path.join(CONFIGS, 'graded_anisotropic.toml'))
    assert isinstance(g.material, materials.Graded) and not g.material.is_even
    assert g.eps == cfg.eps


def test_4_duality_identity(report, studies):
    gaps = [r['duality_gap'] for name in ('isotropic_clamped', 'graded_anisotropic')
            for r in studies[name][0].rows]
    report(4, max(gaps) <= 1e-11,
           f"max relative duality gap over {len(gaps)} solves {max(gaps):.1e} (<= 1e-11)")


def test_5_gamma_convergence(report, studies):
    details, ok = [], True
    for name in ('isotropic_clamped', 'graded_anisotropic'):
        rows = studies[name][0].rows
        errs = [r['stress_error'] for r in rows]
        ratios = [b / a for a, b in zip(errs, errs[1:])]
        good = all(0 < q <= 0.8 for q in ratios)
        text = f"{name}: ratios " + "/".join(f"{q:.3f}" for q in ratios)
        if name == 'isotropic_clamped':
            gap = rows[-1]['energy_gap']
            good = good and gap < 0.05
            text += f", energy gap {gap:.4f} (< 0.05)"
        ok = ok and good
        details.append(text)
    elapsed = studies['elapsed']
    ok = ok and elapsed < 300
    report(5, ok, "; ".join(details) + f"; {elapsed:.0f} s (< 300 s)")


def test_6_limit_constraint(report, studies):
    ok, details = True, []
    for name in ('isotropic_clamped', 'graded_anisotropic'):
        i3 = [r['i3_error'] for r in studies[name][0].rows]
        ok = ok and all(b < a for a, b in zip(i3, i3[1:]))
        details.append(f"{name}: " + "/".join(f"{v:.2e}" for v in i3))
    report(6, ok, "transverse errors decreasing; " + "; ".join(details))


def test_7_resultant_equilibrium(report, studies):
    eq = [r['equilibrium'] for name in ('isotropic_clamped', 'graded_anisotropic')
          for r in studies[name][0].rows]
    report(7, max(eq) <= 1e-8, f"max relative weak residual {max(eq):.1e} (<= 1e-8 x load scale)")


def test_8_structure(report, studies):
    worst = 0.0
    for name in ('isotropic_clamped', 'graded_anisotropic'):
        study = studies[name][1]
        worst = max(worst, *plate2d.structure_check(study.limit, study.config.material))
    report(8, worst <= 1e-10, f"C^-1 T = (Eu, psi) reconstruction error {worst:.1e} (<= 1e-10)")
