import numpy as np
import pytest

import precondeig as pe


def dense_roots(b):
    """Dense (B^{1/2}, B^{-1/2}, B^{-1}) oracle via the Jacobi eigensolver."""
    w, v = pe.dense_sym_eig(b)
    assert w[0] > 0, "oracle needs an SPD matrix"
    return (v * np.sqrt(w)) @ v.T, (v / np.sqrt(w)) @ v.T, (v / w) @ v.T


def dense_problem(a, label="dense"):
    a = np.asarray(a, dtype=np.float64)
    return pe.EigenProblem(dim=a.shape[0], apply_a=lambda v: a @ v, matrix=a, label=label)


@pytest.fixture
def rng():
    return pe.Rng(1234)
