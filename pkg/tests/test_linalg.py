import numpy as np
import pytest

import precondeig as pe
from precondeig.errors import (
    BreakdownNonSpd,
    DimensionMismatch,
    InnerProductNotPositive,
    MaxIterations,
    NotSpd,
    NotSpdInLowPrecision,
)
from precondeig.linalg import SymFactor, lanczos_top_pairs, spawn_seed


def random_spd(seed, n, shift=None):
    g = pe.Rng(seed).normal(n * n).reshape(n, n)
    a = g @ g.T / n + (shift if shift is not None else 1.0) * np.eye(n)
    return (a + a.T) / 2.0


# ---------------------------------------------------------------------------
# deterministic RNG
# ---------------------------------------------------------------------------


def test_rng_same_seed_same_stream():
    assert np.array_equal(pe.Rng(0).normal(4), pe.Rng(0).normal(4))
    assert np.array_equal(pe.gaussian_vector(pe.Rng(0), 4), pe.gaussian_vector(pe.Rng(0), 4))


def test_rng_different_seeds_differ():
    assert not np.array_equal(pe.Rng(0).normal(4), pe.Rng(1).normal(4))


def test_rng_counter_mode_is_batch_independent():
    r = pe.Rng(42)
    a = np.concatenate([r.uniform(3), r.uniform(5)])
    assert np.array_equal(a, pe.Rng(42).uniform(8))


def test_gaussian_moments_seed5():
    # law-of-large-numbers bounds at n = 1e5
    n = 100_000
    x = pe.gaussian_vector(pe.Rng(5), n)
    assert abs(x.mean()) <= 4.0 / np.sqrt(n)
    assert abs(x.var() - 1.0) <= 0.05


def test_spawn_seed_deterministic_and_distinct():
    assert spawn_seed(7, 0) == spawn_seed(7, 0)
    assert spawn_seed(7, 0) != spawn_seed(7, 1)
    assert spawn_seed(7, 0) != spawn_seed(8, 0)


# ---------------------------------------------------------------------------
# Cholesky at two precisions
# ---------------------------------------------------------------------------


def test_cholesky_identity():
    f = pe.cholesky(np.eye(3), "binary64")
    assert np.array_equal(f.l, np.eye(3))


def test_cholesky_diag():
    f = pe.cholesky(np.diag([4.0, 9.0]))
    assert np.allclose(f.l, np.diag([2.0, 3.0]), atol=0)


def test_cholesky_binary32_factor_vs_binary64_oracle():
    a = random_spd(1, 8, shift=8.0)
    f32 = pe.cholesky(a, "binary32")
    assert f32.l.dtype == np.float32
    l64 = f32.l.astype(np.float64)
    kappa = np.linalg.cond(a)
    rel = np.linalg.norm(l64 @ l64.T - a) / np.linalg.norm(a)
    assert rel <= 10 * 8 * 2.0**-24 * kappa


@pytest.mark.parametrize("precision,unit", [("binary64", 2.0**-53), ("binary32", 2.0**-24)])
@pytest.mark.parametrize("n", [2, 5, 16, 40])
def test_cholesky_roundtrip_bound(precision, unit, n):
    a = random_spd(n, n, shift=2.0)
    f = pe.cholesky(a, precision)
    l64 = f.l.astype(np.float64)
    rel = np.linalg.norm(l64 @ l64.T - a) / np.linalg.norm(a)
    assert rel <= 100 * n * unit


def test_cholesky_not_spd_reports_pivot():
    m = np.diag([1.0, -1.0, 2.0])
    with pytest.raises(NotSpd) as err:
        pe.cholesky(m)
    assert err.value.pivot == 1
    with pytest.raises(NotSpdInLowPrecision):
        pe.cholesky(m, "binary32")


def test_chol_solve_identity_and_diag():
    f = pe.cholesky(np.eye(4))
    v = np.arange(4.0)
    assert np.array_equal(pe.chol_solve(f, v), v)
    f = pe.cholesky(np.diag([4.0, 9.0]))
    assert np.allclose(pe.chol_solve(f, np.array([4.0, 9.0])), [1.0, 1.0], atol=0)


def test_chol_solve_binary32_vs_binary64():
    a = random_spd(1, 8, shift=8.0)
    f32, f64 = pe.cholesky(a, "binary32"), pe.cholesky(a, "binary64")
    e1 = np.zeros(8)
    e1[0] = 1.0
    x32, x64 = pe.chol_solve(f32, e1), pe.chol_solve(f64, e1)
    assert x32.dtype == np.float64
    rel = np.linalg.norm(x32 - x64) / np.linalg.norm(x64)
    assert rel <= np.linalg.cond(a) * 1e-5


def test_chol_solve_dimension_mismatch():
    f = pe.cholesky(np.eye(3))
    with pytest.raises(DimensionMismatch):
        pe.chol_solve(f, np.ones(4))


# ---------------------------------------------------------------------------
# PCG
# ---------------------------------------------------------------------------


def test_pcg_identity_converges_immediately():
    v = np.array([1.0, -2.0, 3.0])
    x, it = pe.pcg(lambda u: u, lambda u: u, v, tol=1e-14)
    assert np.allclose(x, v, atol=0)
    assert it <= 1


def test_pcg_diag_exact_in_n_steps():
    d = np.diag([1.0, 2.0, 4.0])
    x, it = pe.pcg(lambda u: d @ u, None, np.ones(3), tol=1e-12)
    assert it <= 3
    assert np.allclose(x, [1.0, 0.5, 0.25], atol=1e-12)


def _textbook_cg(matvec, b, tol):
    # independent plain CG used as the iteration-count oracle
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = r @ r
    bn = np.linalg.norm(b)
    for k in range(1, 10 * len(b)):
        ap = matvec(p)
        alpha = rr / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        if np.linalg.norm(r) <= tol * bn:
            return x, k
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise AssertionError("oracle CG did not converge")


def test_pcg_fd_laplacian_matches_direct_solve_and_oracle_iterations():
    prob = pe.laplace_fd(1.0 / 16.0)
    a = prob.matrix
    rhs = pe.gaussian_vector(pe.Rng(2), prob.dim)
    x, it = pe.pcg(lambda u: a @ u, None, rhs, tol=1e-10)
    assert np.linalg.norm(rhs - a @ x) <= 1e-10 * np.linalg.norm(rhs)
    x_direct = prob.solver()(rhs)
    assert np.linalg.norm(x - x_direct) <= 1e-8 * np.linalg.norm(x_direct)
    _, it_oracle = _textbook_cg(lambda u: a @ u, rhs, 1e-10)
    assert it == it_oracle


def test_pcg_a_norm_error_monotone():
    a = random_spd(3, 12, shift=0.5)
    rhs = pe.gaussian_vector(pe.Rng(4), 12)
    exact = np.linalg.solve(a, rhs)
    errors = []

    def track(x):
        e = x - exact
        errors.append(float(e @ a @ e))

    pe.pcg(lambda u: a @ u, None, rhs, tol=1e-13, callback=track)
    assert len(errors) >= 5
    assert all(later <= earlier + 1e-12 for earlier, later in zip(errors, errors[1:]))


def test_pcg_negative_curvature_breaks_down():
    m = np.diag([1.0, -1.0])
    with pytest.raises(BreakdownNonSpd):
        pe.pcg(lambda u: m @ u, None, np.array([1.0, 1.0]), tol=1e-12)


def test_pcg_maxiter_carries_best_iterate():
    prob = pe.laplace_fd(1.0 / 8.0)
    rhs = np.ones(prob.dim)
    with pytest.raises(MaxIterations) as err:
        pe.pcg(lambda u: prob.matrix @ u, None, rhs, tol=1e-14, maxit=2)
    assert err.value.best is not None and err.value.best.shape == rhs.shape


# ---------------------------------------------------------------------------
# Lanczos
# ---------------------------------------------------------------------------


def test_lanczos_diag_euclidean():
    d = np.diag([1.0, 2.0, 4.0])
    lo, hi = pe.lanczos_extremal(lambda v: d @ v, dim=3, tol=1e-12)
    assert abs(lo - 1.0) <= 1e-10 and abs(hi - 4.0) <= 1e-10


def _dense_pencil_extremes(a, b):
    # independent dense oracle: C = L^{-1} A L^{-T} with B = L L^T
    f = pe.cholesky(b)
    import scipy.linalg as sla

    linv_a = sla.solve_triangular(f.l, a, lower=True)
    c = sla.solve_triangular(f.l, linv_a.T, lower=True).T
    w, _ = pe.dense_sym_eig((c + c.T) / 2.0)
    return w[0], w[-1]


@pytest.mark.parametrize("seed,n", [(5, 30), (6, 17), (7, 50)])
def test_lanczos_pencil_matches_dense_oracle(seed, n):
    a = random_spd(seed, n)
    b = random_spd(seed + 100, n)
    b_inv = np.linalg.inv(b)
    lo, hi = pe.lanczos_extremal(
        lambda v: b_inv @ (a @ v),
        inner=lambda u, v: float(u @ (a @ v)),
        dim=n,
        tol=1e-12,
    )
    lo_ref, hi_ref = _dense_pencil_extremes(a, b)
    assert abs(lo - lo_ref) <= 1e-8 * abs(lo_ref)
    assert abs(hi - hi_ref) <= 1e-8 * abs(hi_ref)


def test_lanczos_cached_inner_map_matches_callable():
    a = random_spd(8, 25)
    b = random_spd(9, 25)
    b_inv = np.linalg.inv(b)
    apply_t = lambda v: b_inv @ (a @ v)  # noqa: E731
    lo1, hi1 = pe.lanczos_extremal(
        apply_t, inner=lambda u, v: float(u @ (a @ v)), dim=25, tol=1e-12
    )
    lo2, hi2 = pe.lanczos_extremal(apply_t, dim=25, tol=1e-12, inner_map=lambda v: a @ v)
    assert abs(lo1 - lo2) <= 1e-9 * abs(lo1)
    assert abs(hi1 - hi2) <= 1e-9 * abs(hi1)


def test_lanczos_fd_identity_preconditioner_ratio_analytic():
    prob = pe.laplace_fd(1.0 / 8.0)
    lo, hi = pe.lanczos_extremal(lambda v: prob.matrix @ v, dim=prob.dim, tol=1e-12)
    h = 1.0 / 8.0
    lam1 = pe.fd_eigenvalue(h, 1, 1)
    lamn = pe.fd_eigenvalue(h, 7, 7)
    assert abs(hi / lo - lamn / lam1) <= 1e-6 * (lamn / lam1)


def test_lanczos_rejects_indefinite_inner():
    d = np.diag([1.0, 2.0])
    with pytest.raises(InnerProductNotPositive):
        pe.lanczos_extremal(
            lambda v: d @ v, inner=lambda u, v: -float(u @ v), dim=2, tol=1e-10
        )


def test_lanczos_top_pairs_inverse_operator():
    a = np.diag([1.0, 2.0, 4.0, 9.0])
    vals, vecs = lanczos_top_pairs(lambda v: np.linalg.solve(a, v), 4, k=2, tol=1e-13)
    assert np.allclose(vals, [1.0, 0.5], atol=1e-10)
    assert abs(abs(vecs[0, 0]) - 1.0) <= 1e-8


# ---------------------------------------------------------------------------
# dense symmetric eigendecomposition (Jacobi oracle)
# ---------------------------------------------------------------------------


def test_jacobi_diag_permutation():
    w, v = pe.dense_sym_eig(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(w, [1.0, 2.0, 3.0], atol=0)
    assert np.allclose(np.abs(v), np.eye(3)[:, [1, 2, 0]], atol=0)


def test_jacobi_2x2_closed_form():
    w, v = pe.dense_sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert np.allclose(w, [1.0, 3.0], atol=1e-15)
    s = 1.0 / np.sqrt(2.0)
    assert np.allclose(np.abs(v[:, 0]), [s, s], atol=1e-14)
    assert np.allclose(np.abs(v[:, 1]), [s, s], atol=1e-14)
    assert np.sign(v[0, 0]) != np.sign(v[1, 0])


def test_jacobi_random_20_reconstruction():
    g = pe.Rng(3).normal(400).reshape(20, 20)
    a = (g + g.T) / 2.0
    w, v = pe.dense_sym_eig(a)
    assert np.linalg.norm(a @ v - v * w) <= 1e-10 * np.linalg.norm(a)


def test_jacobi_orthonormality_n100():
    g = pe.Rng(13).normal(10000).reshape(100, 100)
    a = (g + g.T) / 2.0
    _, v = pe.dense_sym_eig(a)
    assert np.linalg.norm(v.T @ v - np.eye(100)) <= 1e-10


# ---------------------------------------------------------------------------
# SymFactor (R^T R with banded sparse path)
# ---------------------------------------------------------------------------


def test_symfactor_banded_matches_dense():
    _, mass = pe.fem_p1(1.0 / 8.0)
    fb = SymFactor(mass)
    fd = SymFactor(mass.toarray())
    v = pe.gaussian_vector(pe.Rng(6), mass.shape[0])
    for op in ("mult", "mult_t", "solve", "solve_t"):
        xb = getattr(fb, op)(v)
        xd = getattr(fd, op)(v)
        assert np.linalg.norm(xb - xd) <= 1e-11 * np.linalg.norm(xd)
    # R^T R reconstructs the matrix
    n = mass.shape[0]
    recon = np.column_stack([fb.mult_t(fb.mult(e)) for e in np.eye(n)])
    assert np.linalg.norm(recon - mass.toarray()) <= 1e-12 * np.linalg.norm(mass.toarray())
