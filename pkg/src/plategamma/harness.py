"""
Convergence studies: the limit plate solve, the eps sweep of rescaled 3D
solves, the metrics comparing them, the invariant checks and the report
files.
"""
import csv
import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import elasticity3d as e3
from . import plate2d, reduction
from . import tensor_core as tc
from .fields import StressField, project_L
from .quadrature import thickness_rule

log = logging.getLogger(__name__)

REPORT_COLUMNS = (
    'eps', 'stress_error', 'N_error', 'M_error', 'i3_error', 'profile_error',
    'duality_gap', 'dual_energy', 'limit_energy', 'energy_gap', 'equilibrium',
    'solver_residual', 'rate', 'monotone',
)


def stress_error(a, b):
    """``||a - b||`` in ``L^2(Omega)``; both fields must share one sampling."""
    return (a - b).l2_norm()


def resultant_error(a, b):
    """``L^2(omega)`` distances of the N and M resultants of two fields."""
    if not a.sampling.matches(b.sampling):
        raise ValueError("fields are sampled on different quadrature sets")
    w = a.sampling.weights
    (aN, aM), (bN, bM) = a.resultants(), b.resultants()
    return (float(np.sqrt(w @ np.sum((aN - bN) ** 2, axis=1))),
            float(np.sqrt(w @ np.sum((aM - bM) ** 2, axis=1))))


def kl_profile_check(sol3d, limit_profile):
    """``||E^eps w^eps - K||`` with ``K`` the limit profile ``[(Ew)_ab, psi]``."""
    return stress_error(sol3d.strain, limit_profile)


@dataclass
class Study:
    """Everything derived once from a config: meshes, the limit solve, samplings."""
    config: object
    mesh3d: e3.BrickMesh3D
    plate_mesh: plate2d.PlateMesh
    space: plate2d.PlateSpace
    model: reduction.ReducedModel
    limit: plate2d.KLSolution
    limit_energy: float
    sigma_limit: StressField       # on the 3D volume rule
    profile_limit: StressField     # on the 3D volume rule
    test_space: plate2d.SplinePlateSpace
    test_model: reduction.ReducedModel
    load_scale: float


def limit_energy(sol, material):
    """``F*(T) = 1/2 int C^-1 T.T`` on the model sampling."""
    T = plate2d.limit_T(sol, material, sol.model.sampling)
    return reduction.dual_energy(sol.model, T)


def reduced_model(config):
    """Coercivity check and the reduced model on the limit mesh; no solves."""
    m, q = config.mesh, config.quadrature
    mat = config.material
    pm = plate2d.PlateMesh.rectangle(config.L1, config.L2, m['limit_n1'], m['limit_n2'],
                                     config.dirichlet)
    mat.check(pm.xbreaks, pm.ybreaks)
    samp = plate2d.limit_sampling(pm, q['inplane'],
                                  thickness_rule(q['thickness'], mat.interfaces))
    return pm, plate2d.build_limit_model(mat, config.loads, samp)


def prepare(config):
    """Coercivity check, limit solve and the limit fields on the 3D rule."""
    m = config.mesh
    mat, loads = config.material, config.loads
    mesh3d = e3.BrickMesh3D.box(config.L1, config.L2, m['n1'], m['n2'], m['n3'],
                                order=m['order'], dirichlet=config.dirichlet)
    mat.check(mesh3d.xbreaks, mesh3d.ybreaks)
    pm, model = reduced_model(config)
    space = plate2d.PlateSpace(pm, m['membrane_order'])
    q = config.quadrature
    sol = plate2d.solve_limit(space, model, loads, q['inplane'], config.solver['rtol'],
                              config.solver['method'])
    s3 = mesh3d.sampling
    sigma = plate2d.limit_stress(sol, mat, s3)
    profile = plate2d.limit_profile(sol, mat, s3)
    tmesh = plate2d.PlateMesh(mesh3d.xbreaks, mesh3d.ybreaks, config.dirichlet)
    tspace = plate2d.SplinePlateSpace(tmesh, mesh3d.order)
    tmodel = plate2d.build_limit_model(mat, loads, s3)
    zero = np.zeros((len(s3.weights), 3))
    scale = float(np.max(np.abs(plate2d.equilibrium_residual(
        tspace, tmodel, loads, zero, zero, mesh3d.n_quad)), initial=0.0))
    return Study(config, mesh3d, pm, space, model, sol, limit_energy(sol, mat), sigma, profile,
                 tspace, tmodel, scale if scale > 0 else 1.0)


def equilibrium_check(study, sol3d):
    """Relative resultant-equilibrium residual of a 3D solve against the KL test space."""
    SN, SM = sol3d.T.resultants()
    r = plate2d.equilibrium_residual(study.test_space, study.test_model, study.config.loads,
                                     SN, SM, study.mesh3d.n_quad)
    return float(np.max(np.abs(r), initial=0.0)) / study.load_scale


def solve_eps(study, eps):
    cfg = study.config
    try:
        sol = e3.solve(study.mesh3d, eps, cfg.material, cfg.loads, cfg.solver['rtol'],
                       cfg.solver['method'])
    except Exception as exc:
        raise RuntimeError(f"3D solve failed at eps={eps}: {exc}") from exc
    N_err, M_err = resultant_error(sol.sigma, study.sigma_limit)
    diff = sol.sigma - study.sigma_limit
    Fl = study.limit_energy
    return {
        'eps': eps,
        'stress_error': diff.l2_norm(),
        'N_error': N_err,
        'M_error': M_err,
        'i3_error': diff.l2_norm(tc.TRANSVERSE),
        'profile_error': kl_profile_check(sol, study.profile_limit),
        'duality_gap': sol.duality_gap,
        'dual_energy': sol.dual_energy,
        'limit_energy': Fl,
        'energy_gap': abs(sol.dual_energy - Fl) / abs(Fl) if Fl else abs(sol.dual_energy),
        'equilibrium': equilibrium_check(study, sol),
        'solver_residual': sol.residual,
    }


@dataclass
class ConvergenceReport:
    rows: list
    limit_energy: float
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c[1] for c in self.checks)


def _add_rates(rows):
    prev = None
    for row in rows:
        if prev is None or prev['stress_error'] <= 0 or row['stress_error'] <= 0:
            row['rate'] = float('nan')
            row['monotone'] = True
        else:
            row['rate'] = math.log(prev['stress_error'] / row['stress_error']) / math.log(
                prev['eps'] / row['eps'])
            row['monotone'] = row['stress_error'] < prev['stress_error']
        prev = row
    return rows


def run_study(config, threads=1, study=None):
    """Limit solve plus one 3D solve per eps; rows ordered by eps descending."""
    study = study or prepare(config)
    eps_list = sorted(config.eps, reverse=True)
    if threads > 1 and len(eps_list) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda e: solve_eps(study, e), eps_list))
    else:
        rows = [solve_eps(study, e) for e in eps_list]
    report = ConvergenceReport(_add_rates(rows), study.limit_energy)
    report.checks = study_checks(report, config)
    return report, study


def study_checks(report, config):
    """``(name, passed, detail)`` for every enabled property of the sweep."""
    t = config.checks
    rows = report.rows
    out = []
    if not rows:
        return out
    worst = max(r['duality_gap'] for r in rows)
    out.append(('duality identity', worst <= t['duality'], f"max gap {worst:.3e} <= {t['duality']:.0e}"))
    errs = [r['stress_error'] for r in rows]
    ratios = [b / a for a, b in zip(errs, errs[1:])]
    if t.get('require_monotone', True) and ratios:
        ok = all(r < 1 for r in ratios)
        out.append(('stress error decreasing', ok, "ratios " + ", ".join(f"{r:.3f}" for r in ratios)))
        if t.get('ratio') is not None:
            out.append(('stress error ratio', max(ratios) <= t['ratio'],
                        f"max ratio {max(ratios):.3f} <= {t['ratio']}"))
        i3 = [r['i3_error'] for r in rows]
        out.append(('transverse error decreasing', all(b < a for a, b in zip(i3, i3[1:])),
                    "i3 errors " + ", ".join(f"{v:.3e}" for v in i3)))
    if t.get('energy_gap') is not None:
        g = rows[-1]['energy_gap']
        out.append(('energy gap at smallest eps', g <= t['energy_gap'],
                    f"{g:.4f} <= {t['energy_gap']} at eps={rows[-1]['eps']}"))
    worst = max(r['equilibrium'] for r in rows)
    out.append(('resultant equilibrium', worst <= t['equilibrium'],
                f"max {worst:.3e} <= {t['equilibrium']:.0e}"))
    slack = t.get('lower_bound_slack')
    if slack is not None:
        Fl = report.limit_energy
        low = min(r['dual_energy'] for r in rows)
        out.append(('liminf lower bound', low >= Fl - slack * abs(Fl),
                    f"min dual energy {low:.6e} >= {Fl:.6e} - {slack} |F*|"))
    return out


def limit_checks(study):
    """Invariants of the limit solve and of the reduced model."""
    cfg, sol, model = study.config, study.limit, study.model
    t = cfg.checks
    out = []
    e_plane, e_psi = plate2d.structure_check(sol, cfg.material)
    out.append(('structure C^-1 T = (Eu, psi)', max(e_plane, e_psi) <= t['structure'],
                f"in-plane {e_plane:.2e}, psi {e_psi:.2e} <= {t['structure']:.0e}"))
    T = plate2d.limit_T(sol, cfg.material, model.sampling)
    SN, SM = project_L(T).resultants()
    FL = reduction.F_star_L(model, SN, SM)
    F = study.limit_energy
    rel = abs(FL - F) / max(abs(F), np.finfo(float).tiny)
    out.append(('energy identity F*(T) = F*_L(Pi T)', rel <= t['energy_identity'],
                f"relative difference {rel:.2e} <= {t['energy_identity']:.0e}"))
    rec = reduction.reconstruct_Z(model, SN, SM, rtol=np.inf)
    res = max(reduction.system_residuals(model, rec))
    scale = max(np.max(np.abs(T.values)), np.finfo(float).tiny)
    out.append(('reconstruction residuals', res <= t['reduction'] * scale,
                f"{res / scale:.2e} <= {t['reduction']:.0e}"))
    C0min = float(np.min(np.linalg.eigvalsh(model.Chat)))
    cmin = float(np.min(tc.coercivity_constant(model.C)))
    out.append(('Chat coercive', C0min >= cmin - 1e-9 * max(1.0, cmin),
                f"min eig {C0min:.4e} >= c_C {cmin:.4e}"))
    return out


def invariant_suite(config, threads=1):
    """The ``check`` command: limit invariants plus duality and equilibrium for every eps."""
    study = prepare(config)
    checks = limit_checks(study)
    eps_list = sorted(config.eps, reverse=True)

    def one(eps):
        sol = e3.solve(study.mesh3d, eps, config.material, config.loads,
                       config.solver['rtol'], config.solver['method'])
        return eps, sol.duality_gap, equilibrium_check(study, sol)

    if threads > 1 and len(eps_list) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, eps_list))
    else:
        results = [one(e) for e in eps_list]
    t = config.checks
    for eps, gap, eq in results:
        checks.append((f'duality identity eps={eps:g}', gap <= t['duality'],
                       f"{gap:.3e} <= {t['duality']:.0e}"))
        checks.append((f'resultant equilibrium eps={eps:g}', eq <= t['equilibrium'],
                       f"{eq:.3e} <= {t['equilibrium']:.0e}"))
    return checks


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return '1' if v else '0'
    return '%.17g' % v


def report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    w.writerow(REPORT_COLUMNS)
    for row in report.rows:
        w.writerow([_fmt(row[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def summary_text(report_or_checks, title="plate-gamma study"):
    checks = report_or_checks.checks if isinstance(report_or_checks, ConvergenceReport) \
        else report_or_checks
    lines = [title]
    if isinstance(report_or_checks, ConvergenceReport):
        lines.append(f"limit energy F*(T) = {report_or_checks.limit_energy:.17g}")
        for row in report_or_checks.rows:
            lines.append(f"eps={row['eps']:g} stress_error={row['stress_error']:.6e} "
                         f"energy_gap={row['energy_gap']:.6e} duality_gap={row['duality_gap']:.3e}")
    for name, ok, detail in checks:
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    lines.append("all checks passed" if all(c[1] for c in checks) else "some checks failed")
    return "\n".join(lines) + "\n"


REDUCED_BLOCKS = ('C0', 'C1', 'C2', 'Chat', 'Cnn', 'Cnm', 'Cmn', 'Cmm')
REDUCED_VECTORS = ('fN', 'fM', 'zn', 'zm')


def reduced_model_csv(model):
    """One row per in-plane sample: coordinates, plate tensors (Mandel, row-major) and load terms."""
    header = ['x1', 'x2']
    for name in REDUCED_BLOCKS:
        header += [f'{name}_{i}{j}' for i in range(3) for j in range(3)]
    for name in REDUCED_VECTORS:
        header += [f'{name}_{i}' for i in range(3)]
    header.append('c_density')
    c_line = model.sampling.thickness_moment(model.c_density[..., None], 0)[:, 0]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    w.writerow(header)
    for p in range(len(model.sampling.weights)):
        row = list(model.sampling.points[p])
        for name in REDUCED_BLOCKS:
            row += list(getattr(model, name)[p].reshape(-1))
        for name in REDUCED_VECTORS:
            row += list(getattr(model, name)[p])
        row.append(c_line[p])
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write(path, text):
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, 'w', newline='') as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_report(report, outdir, title="plate-gamma study"):
    """Write ``report.csv`` and ``summary.txt`` into ``outdir``; returns the paths."""
    paths = os.path.join(outdir, 'report.csv'), os.path.join(outdir, 'summary.txt')
    write(paths[0], report_csv(report))
    write(paths[1], summary_text(report, title))
    return paths

