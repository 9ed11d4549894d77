import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def isotropic_components(lam, mu):
    """``C_ijkl = lam d_ij d_kl + mu (d_ik d_jl + d_il d_jk)`` as a 3x3x3x3 array."""
    d = np.eye(3)
    return (lam * np.einsum('ij,kl->ijkl', d, d)
            + mu * (np.einsum('ik,jl->ijkl', d, d) + np.einsum('il,jk->ijkl', d, d)))


def random_sym(rng, n=3):
    A = rng.standard_normal((n, n))
    return 0.5 * (A + A.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
