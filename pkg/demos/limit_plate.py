"""
The limit Kirchhoff-Love plate
==============================

Clamped isotropic square plate under a uniform transverse load. The centre
deflection approaches the classical value 0.00126532 q a^4 / D as the C1
mesh is refined, and the limit stress has the structure C^-1 T = (Eu, psi).
"""
import numpy as np

from plategamma import materials, plate2d
from plategamma import tensor_core as tc
from plategamma.loads import LoadSpec, constant_vector

E, nu = 1.0, 0.3
D = E / (12 * (1 - nu ** 2))
mat = materials.Homogeneous(tc.isotropic_from_young(E, nu))
loads = LoadSpec(body=constant_vector(0.0, 0.0, 1.0))

for n in (4, 8, 16):
    mesh = plate2d.PlateMesh.rectangle(1.0, 1.0, n, n)
    space = plate2d.PlateSpace(mesh, membrane_order=2)
    model = plate2d.build_limit_model(mat, loads, plate2d.limit_sampling(mesh))
    sol = plate2d.solve_limit(space, model, loads)
    w = sol.kinematics(np.array([[0.5, 0.5]]))[1][0]
    print(f"n={n:3d}  w_c D / (q a^4) = {w * D:.8f}")

print("classical value                 0.00126532")

# the limit stress, its resultants and the transverse profile
sigma = plate2d.limit_stress(sol, mat)
N, M = sigma.resultants()
print("max |M_11| =", np.max(np.abs(M[:, 0])))
print("structure check (in-plane, psi):", plate2d.structure_check(sol, mat))
