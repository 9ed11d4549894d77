"""
Problem description files (TOML).

A study file looks like::

    version = 1
    seed = 0

    [geometry]
    L1 = 1.0
    L2 = 1.0
    dirichlet = ["left", "right", "bottom", "top"]

    [material]
    kind = "isotropic"
    E = 1.0
    nu = 0.3

    [loads]
    body = [0.0, 0.0, [[36.0, 1, 1, 0], [-36.0, 2, 1, 0], [-36.0, 1, 2, 0], [36.0, 2, 2, 0]]]

    [study]
    eps = [0.4, 0.2, 0.1, 0.05]

Load components are either numbers or polynomial tables of rows
``[coef, i, j, k]`` meaning ``coef x1^i x2^j x3^k``. ``H`` lists the six
tensor components in the order 11, 22, 33, 23, 13, 12; ``g`` gives the
Kirchhoff-Love data ``eta1``, ``eta2``, ``eta3`` (no x3 dependence).
Quantities are nondimensional: lengths in units of the plate size,
stiffnesses and stresses in one common stress unit.
"""
import copy
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import materials
from . import tensor_core as tc
from .loads import KLDisplacement, LoadSpec, Polynomial, VectorField
from .plate2d import EDGES
from .tensor_core import SQRT2

SUPPORTED_VERSIONS = (1,)


class ConfigError(ValueError):
    pass


DEFAULTS = {
    'version': 1,
    'seed': 0,
    'geometry': {'L1': 1.0, 'L2': 1.0, 'dirichlet': list(EDGES)},
    'material': {'kind': 'isotropic', 'E': 1.0, 'nu': 0.3},
    'loads': {},
    'study': {'eps': [0.4, 0.2, 0.1, 0.05]},
    'mesh': {'n1': 16, 'n2': 16, 'n3': 4, 'order': 2,
             'limit_n1': 32, 'limit_n2': 32, 'membrane_order': 2},
    'quadrature': {'thickness': 8, 'inplane': 4},
    'solver': {'rtol': 1e-11, 'method': 'auto'},
    'checks': {'duality': 1e-11, 'ratio': 0.8, 'energy_gap': 0.05,
               'equilibrium': 1e-8, 'structure': 1e-10, 'energy_identity': 1e-9,
               'reduction': 1e-10, 'lower_bound_slack': 0.02, 'require_monotone': True},
    'output': {'dir': 'out'},
}


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def polynomial(spec, what="load component"):
    """A number or a table of ``[coef, i, j, k]`` rows."""
    if isinstance(spec, (int, float)):
        return Polynomial.constant(float(spec))
    if isinstance(spec, list) and all(isinstance(r, list) and 1 <= len(r) <= 4 for r in spec):
        return Polynomial.from_table(spec)
    raise ConfigError(f"{what}: expected a number or rows [coef, i, j, k], got {spec!r}")


def vector_field(spec, n, what):
    if spec is None:
        return None
    if not isinstance(spec, list) or len(spec) != n:
        raise ConfigError(f"{what}: expected {n} components")
    return VectorField([polynomial(c, f"{what}[{i}]") for i, c in enumerate(spec)])


class _MandelField:
    """Symmetric tensor field given by its components 11, 22, 33, 23, 13, 12."""

    def __init__(self, components):
        self.field = components

    def __call__(self, x1, x2, x3):
        v = self.field(x1, x2, x3)
        return v * np.array([1.0, 1.0, 1.0, SQRT2, SQRT2, SQRT2])

    def __bool__(self):
        return bool(self.field)


def load_spec(spec):
    known = {'body', 'top', 'bottom', 'lateral', 'H', 'g'}
    unknown = set(spec) - known
    if unknown:
        raise ConfigError(f"unknown load entries {sorted(unknown)}")
    H = vector_field(spec.get('H'), 6, 'H')
    g = spec.get('g', {})
    if set(g) - {'eta1', 'eta2', 'eta3'}:
        raise ConfigError("g takes eta1, eta2, eta3")
    try:
        kl = KLDisplacement(*(polynomial(g.get(k, 0.0), f"g.{k}") for k in ('eta1', 'eta2', 'eta3')))
    except ValueError as exc:
        raise ConfigError(f"g: {exc}") from exc
    return LoadSpec(body=vector_field(spec.get('body'), 3, 'body'),
                    top=vector_field(spec.get('top'), 3, 'top'),
                    bottom=vector_field(spec.get('bottom'), 3, 'bottom'),
                    lateral=vector_field(spec.get('lateral'), 3, 'lateral'),
                    H=_MandelField(H) if H else None, g=kl)


def stiffness(spec, what="material"):
    """A single constant stiffness from an isotropic/orthotropic/anisotropic21 table."""
    kind = spec.get('kind')
    try:
        if kind == 'isotropic':
            if 'lambda' in spec:
                C = tc.isotropic(spec['lambda'], spec['mu'])
            else:
                C = tc.isotropic_from_young(spec['E'], spec['nu'])
        elif kind == 'orthotropic':
            C = tc.orthotropic(*(spec[k] for k in ('E1', 'E2', 'E3', 'nu12', 'nu13', 'nu23',
                                                  'G12', 'G13', 'G23')))
        elif kind == 'anisotropic21':
            C = tc.from_21_constants(spec['constants'])
        else:
            raise ConfigError(f"{what}: unknown stiffness kind {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"{what}: missing parameter {exc}") from exc
    angle = spec.get('angle', 0.0)
    if angle:
        C = tc.rotate(C, tc.rotation_about_x3(np.deg2rad(angle)))
    return C


def material(spec, rng):
    kind = spec.get('kind')
    name = spec.get('name', kind)
    if kind in ('isotropic', 'orthotropic', 'anisotropic21'):
        return materials.Homogeneous(stiffness(spec), name=name)
    if kind == 'laminate':
        layers = [stiffness(layer, f"layer {i}") for i, layer in enumerate(spec['layers'])]
        return materials.Layered(spec['breaks'], layers, name=name)
    if kind == 'graded':
        terms = []
        for i, term in enumerate(spec['terms']):
            M = stiffness(term, f"graded term {i}") if 'kind' in term else np.asarray(
                term['matrix'], dtype=float)
            terms.append((M, tuple(term['powers'])))
        return materials.Graded(terms, name=name)
    if kind == 'random_graded':
        return materials.random_graded(rng, shift=spec.get('shift', 1.0),
                                       gradient=spec.get('gradient', 0.3))
    raise ConfigError(f"unknown material kind {kind!r}")


@dataclass
class ProblemConfig:
    raw: dict
    seed: int
    L1: float
    L2: float
    dirichlet: tuple
    material: object
    loads: LoadSpec
    eps: list
    mesh: dict
    quadrature: dict
    solver: dict
    checks: dict
    output: dict = field(default_factory=dict)


def from_dict(data, seed=None):
    """Validate a parsed study description and build its material and loads."""
    d = _merge(DEFAULTS, data)
    if d['version'] not in SUPPORTED_VERSIONS:
        raise ConfigError(f"unsupported config version {d['version']!r}")
    if seed is not None:
        d['seed'] = int(seed)
    geo = d['geometry']
    dirichlet = tuple(geo['dirichlet'])
    if not dirichlet or set(dirichlet) - set(EDGES):
        raise ConfigError(f"dirichlet must be a nonempty subset of {EDGES}")
    if geo['L1'] <= 0 or geo['L2'] <= 0:
        raise ConfigError("plate side lengths must be positive")
    eps = [float(e) for e in d['study']['eps']]
    if any(not 0 < e <= 1 for e in eps):
        raise ConfigError("every eps must lie in (0, 1]")
    eps = sorted(eps, reverse=True)
    rng = np.random.default_rng(d['seed'])
    mat = material(d['material'], rng)
    return ProblemConfig(d, d['seed'], float(geo['L1']), float(geo['L2']), dirichlet, mat,
                         load_spec(d['loads']), eps, d['mesh'], d['quadrature'], d['solver'],
                         d['checks'], d['output'])


def load(path, seed=None):
    try:
        with open(path, 'rb') as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(data, seed)
