"""
From a 3D stiffness field to plate tensors
==========================================

A two-layer cross-ply laminate is condensed to its membrane, coupling and
bending stiffnesses. The unsymmetric stacking gives a nonzero coupling
block, and the explicit reconstruction recovers the optimal out-of-plane
stress correction for given resultants.
"""
import numpy as np

from plategamma import materials, reduction
from plategamma import tensor_core as tc
from plategamma.fields import Sampling
from plategamma.quadrature import thickness_rule

layer = tc.orthotropic(10.0, 1.0, 1.0, 0.25, 0.25, 0.3, 0.5, 0.5, 0.4)
cross = tc.rotate(layer, tc.rotation_about_x3(np.pi / 2))
laminate = materials.Layered([-0.5, 0.0, 0.5], [layer, cross])

# one in-plane point suffices: the material does not depend on (x1, x2)
x3, wz = thickness_rule(6, laminate.interfaces)
s = Sampling(np.array([[0.5, 0.5]]), np.array([1.0]), x3, wz)
model = reduction.build_reduced_model(s, laminate(*s.coords()))

np.set_printoptions(precision=4, suppress=True)
print("membrane stiffness C0:\n", model.C0[0])
print("coupling C1 (zero for symmetric stackings):\n", model.C1[0])
print("bending stiffness after eliminating membrane strain, Chat:\n", model.Chat[0])

# explicit optimal correction for a pure bending moment
SN = np.zeros((1, 3))
SM = np.array([[1.0, 0.0, 0.0]])
rec = reduction.reconstruct_Z(model, SN, SM)
print("membrane strain induced by the moment:", rec.ZN[0])
print("f_perp  =", reduction.f_perp(model, SN, SM))
print("F*_L    =", reduction.F_star_L(model, SN, SM))
print("residuals of the defining system:", reduction.system_residuals(model, rec))
