"""
Rescaled 3D solves at decreasing thickness
==========================================

One brick mesh of the unit-thickness domain serves every eps: the
thickness enters only through the scaled strain. The rescaled stress
approaches the limit plate stress as eps decreases.
"""
import numpy as np

from plategamma import elasticity3d as e3
from plategamma import materials, plate2d
from plategamma import tensor_core as tc
from plategamma.loads import LoadSpec, Polynomial, VectorField

mat = materials.Homogeneous(tc.isotropic_from_young(1.0, 0.3))
bubble = Polynomial.from_table([[36.0, 1, 1, 0], [-36.0, 2, 1, 0], [-36.0, 1, 2, 0],
                                [36.0, 2, 2, 0]])
loads = LoadSpec(body=VectorField([Polynomial(), Polynomial(), bubble]))

mesh = e3.BrickMesh3D.box(1.0, 1.0, 8, 8, 2, order=2)
pm = plate2d.PlateMesh.rectangle(1.0, 1.0, 16, 16)
model = plate2d.build_limit_model(mat, loads, plate2d.limit_sampling(pm))
limit = plate2d.solve_limit(plate2d.PlateSpace(pm, 2), model, loads)
sigma = plate2d.limit_stress(limit, mat, mesh.sampling)

for eps in (0.4, 0.2, 0.1):
    sol = e3.solve(mesh, eps, mat, loads)
    err = (sol.sigma - sigma).l2_norm()
    print(f"eps={eps:4.2f}  ||sigma_eps - sigma|| = {err:.4e}  "
          f"duality gap = {sol.duality_gap:.1e}  "
          f"transverse part = {sol.sigma.l2_norm(tc.TRANSVERSE):.4e}")
