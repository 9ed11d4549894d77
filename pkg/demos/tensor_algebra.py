"""
Stiffness tensors in Mandel form
================================

Symmetric matrices become 6-vectors whose dot product is the full tensor
contraction, and stiffness tensors become symmetric 6x6 matrices.
"""
import numpy as np

from plategamma import tensor_core as tc

# an isotropic material from Young's modulus and Poisson's ratio
C = tc.isotropic_from_young(1.0, 0.3)
print("isotropic stiffness (Mandel):\n", np.round(C, 4))

# the contraction A:B is a plain dot product of the Mandel vectors
A = np.array([[1.0, 0.2, 0.0], [0.2, -0.5, 0.1], [0.0, 0.1, 0.3]])
a = tc.to_mandel(A)
print("A:A =", np.sum(A * A), "=", a @ a)

# stress from strain, and back through the compliance
s = tc.apply(C, a)
print("recovered strain:\n", tc.from_mandel(tc.apply(tc.inverse(C), s)))

# a fibre-reinforced layer rotated by 30 degrees about the plate normal
ortho = tc.orthotropic(10.0, 1.0, 1.0, 0.25, 0.25, 0.3, 0.5, 0.5, 0.4)
rotated = tc.rotate(ortho, tc.rotation_about_x3(np.deg2rad(30)))
print("coercivity constant before/after rotation:",
      tc.coercivity_constant(ortho), tc.coercivity_constant(rotated))

# degenerate tensors are refused
try:
    tc.inverse(np.diag([1.0, 1, 1, 1, 1, 0]))
except tc.CoercivityError as exc:
    print("refused:", exc)
