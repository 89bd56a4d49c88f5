"""SPD preconditioners behind one interface: inverse application always,
forward application either exact or via a nested PCG solve.

The mixed-precision preconditioner follows the two-precision model: the
factorization and the triangular substitutions run in binary32 inside a
binary64 outer iteration.  Diagnostics that need exact operator algebra use
the *_exact variants, which apply the same stored factor in binary64
(binary32 values embed exactly in binary64, so both variants realize the
same SPD matrix).
"""

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import EmptySubdomain, NotSpd
from .linalg import chol_matvec, chol_solve, cholesky, make_solver, pcg

_U32 = 2.0**-24  # IEEE binary32 unit roundoff


class Preconditioner:
    """Interface: dim, apply_inv, apply_fwd, fwd_mode ('exact'|'iterative')."""

    dim = None
    label = "abstract"
    fwd_mode = "exact"
    fwd_tol = 0.0

    def apply_inv(self, v):
        raise NotImplementedError

    def apply_fwd(self, v):
        raise NotImplementedError

    # exact-arithmetic variants for diagnostics; same operator by default
    def apply_inv_exact(self, v):
        return self.apply_inv(v)

    def apply_fwd_exact(self, v):
        return self.apply_fwd(v)


class IdentityPreconditioner(Preconditioner):
    def __init__(self, n):
        self.dim = n
        self.label = "identity"

    def apply_inv(self, v):
        return np.asarray(v, dtype=np.float64).copy()

    apply_fwd = apply_inv


def make_identity(n):
    return IdentityPreconditioner(n)


class ExactPreconditioner(Preconditioner):
    """B = A: inverse iteration.  One binary64 factorization, cached."""

    def __init__(self, a):
        self.dim = a.shape[0]
        self.label = "exact"
        self._a = a
        self._solve = make_solver(a)

    def apply_inv(self, v):
        return self._solve(np.asarray(v, dtype=np.float64))

    def apply_fwd(self, v):
        return self._a @ np.asarray(v, dtype=np.float64)


def make_exact(a):
    return ExactPreconditioner(a)


def make_spd(b, label="dense-spd"):
    """Preconditioner from an arbitrary explicit SPD matrix B (tests, demos)."""
    p = ExactPreconditioner(b)
    p.label = label
    return p


class OperatorPreconditioner(Preconditioner):
    """Preconditioner from explicit apply callables (e.g. B = A for an
    operator-only problem, where the inverse is the problem's solver)."""

    def __init__(self, dim, apply_inv_fn, apply_fwd_fn, label="operator", fwd_mode="exact"):
        self.dim = dim
        self._inv = apply_inv_fn
        self._fwd = apply_fwd_fn
        self.label = label
        self.fwd_mode = fwd_mode

    def apply_inv(self, v):
        return self._inv(np.asarray(v, dtype=np.float64))

    def apply_fwd(self, v):
        return self._fwd(np.asarray(v, dtype=np.float64))


class MpCholPreconditioner(Preconditioner):
    """B^{-1} x = Lhat^{-T}(Lhat^{-1} x) with the factor computed in binary32."""

    def __init__(self, a):
        a = np.asarray(a, dtype=np.float64)
        self.dim = a.shape[0]
        self.label = "mp-chol"
        self.factor = cholesky(a, "binary32")
        self._l64 = self.factor.l.astype(np.float64)

    def apply_inv(self, v):
        return chol_solve(self.factor, v)

    def apply_fwd(self, v):
        return chol_matvec(self.factor, v)

    def apply_inv_exact(self, v):
        y = scipy.linalg.solve_triangular(self._l64, v, lower=True, check_finite=False)
        return scipy.linalg.solve_triangular(self._l64.T, y, lower=False, check_finite=False)

    def apply_fwd_exact(self, v):
        return self._l64 @ (self._l64.T @ np.asarray(v, dtype=np.float64))


def make_mp_cholesky(a):
    return MpCholPreconditioner(a)


def epsilon_l(n, lambda1, lambdan):
    """Low-precision quality parameter 4n(3n+1)(lambdan/lambda1) * 2^-24.

    Returns (value, applicable) where applicable means value < 1 so the
    distortion bound cos(phi) <= sqrt(2 * value) holds.
    """
    if lambda1 <= 0:
        raise NotSpd(-1, "lambda1 must be positive")
    value = 4.0 * n * (3.0 * n + 1.0) * (lambdan / lambda1) * _U32
    return value, value < 1.0


class DdmPreconditioner(Preconditioner):
    """Two-level overlapping additive Schwarz:

        B^{-1} v = I_H A_H^{-1} I_H^T v + sum_j I_j A_j^{-1} I_j^T v

    with A_j the principal submatrix of the fine matrix on subdomain j and
    A_H the coarse (Galerkin) matrix.  Forward application is iterative.
    """

    def __init__(self, hierarchy, a_fine, a_coarse, fwd_tol=1e-10):
        self.dim = a_fine.shape[0]
        self.label = f"ddm:H={hierarchy.coarse_h:g},overlap={hierarchy.overlap_ratio:g}"
        self.hierarchy = hierarchy
        self.fwd_mode = "iterative"
        self.fwd_tol = fwd_tol
        self._a_fine = a_fine.tocsr() if scipy.sparse.issparse(a_fine) else np.asarray(a_fine)
        self._i_h = hierarchy.prolongation.tocsr()
        if self._i_h.shape[0] != self.dim:
            raise NotSpd(-1, "prolongation does not match the fine matrix")
        # an empty coarse space (single-cell coarse grid) drops the first term
        self._coarse_solve = make_solver(a_coarse) if self._i_h.shape[1] > 0 else None
        self._locals = []
        csr = scipy.sparse.csr_matrix(self._a_fine)
        for j, idx in enumerate(hierarchy.subdomains):
            if len(idx) == 0:
                raise EmptySubdomain(f"subdomain {j} contains no fine nodes")
            sub = csr[np.ix_(idx, idx)].tocsc()
            self._locals.append((idx, make_solver(sub)))

    def apply_inv(self, v):
        v = np.asarray(v, dtype=np.float64)
        out = self.coarse_part(v)
        # summation in ascending subdomain order for bit-reproducibility
        for idx, solve in self._locals:
            out[idx] += solve(v[idx])
        return out

    def coarse_part(self, v):
        v = np.asarray(v, dtype=np.float64)
        if self._coarse_solve is None:
            return np.zeros_like(v)
        return self._i_h @ self._coarse_solve(self._i_h.T @ v)

    def local_part(self, v, j):
        idx, solve = self._locals[j]
        out = np.zeros(self.dim)
        out[idx] = solve(np.asarray(v, dtype=np.float64)[idx])
        return out

    def apply_fwd(self, v):
        return apply_fwd_iterative(self, v, apply_a=self._a_matvec, tol=self.fwd_tol)

    def _a_matvec(self, v):
        return self._a_fine @ v


def make_ddm(hierarchy, a_fine, a_coarse, fwd_tol=1e-10):
    return DdmPreconditioner(hierarchy, a_fine, a_coarse, fwd_tol=fwd_tol)


class ScaledPreconditioner(Preconditioner):
    """Wraps an inner preconditioner as B/eta, i.e. applies eta * B^{-1}."""

    def __init__(self, inner, eta, rho_b=None):
        if eta <= 0:
            raise ValueError("eta must be positive")
        self.inner = inner
        self.eta = float(eta)
        self.rho_b = rho_b
        self.dim = inner.dim
        self.label = f"scaled:{inner.label}"
        self.fwd_mode = inner.fwd_mode
        self.fwd_tol = inner.fwd_tol

    def apply_inv(self, v):
        return self.eta * self.inner.apply_inv(v)

    def apply_fwd(self, v):
        return self.inner.apply_fwd(v) / self.eta

    def apply_inv_exact(self, v):
        return self.eta * self.inner.apply_inv_exact(v)

    def apply_fwd_exact(self, v):
        return self.inner.apply_fwd_exact(v) / self.eta


def spectral_scale(p, nu_min, nu_max):
    """Scale p by eta = 2/(nu_max + nu_min) so ||I - eta B^{-1} A||_A equals
    (kappa - 1)/(kappa + 1) with kappa = nu_max/nu_min."""
    if not 0 < nu_min <= nu_max:
        raise ValueError("need 0 < nu_min <= nu_max")
    eta = 2.0 / (nu_max + nu_min)
    rho_b = max(abs(1.0 - eta * nu_min), abs(1.0 - eta * nu_max))
    return ScaledPreconditioner(p, eta, rho_b=rho_b)


class HattedPreconditioner(Preconditioner):
    """Preconditioner for the mass-reduced pencil: Bhat^{-1} v = R B^{-1} R^T v
    and Bhat v = R^{-T} B (R^{-1} v), where M = R^T R."""

    def __init__(self, inner, r_factor):
        self.inner = inner
        self.r = r_factor
        self.dim = inner.dim
        self.label = f"hatted:{inner.label}"
        self.fwd_mode = inner.fwd_mode
        self.fwd_tol = inner.fwd_tol

    def apply_inv(self, v):
        return self.r.mult(self.inner.apply_inv(self.r.mult_t(v)))

    def apply_fwd(self, v):
        return self.r.solve_t(self.inner.apply_fwd(self.r.solve(v)))

    def apply_inv_exact(self, v):
        return self.r.mult(self.inner.apply_inv_exact(self.r.mult_t(v)))

    def apply_fwd_exact(self, v):
        return self.r.solve_t(self.inner.apply_fwd_exact(self.r.solve(v)))


def apply_fwd_iterative(p, v, apply_a=None, tol=1e-10, maxit=500):
    """Forward application z = B v for a preconditioner exposing only B^{-1}.

    Runs PCG on the SPD system B^{-1} z = v.  The preconditioning step
    multiplies by A (A approximates B, hence A^{-1} approximates the system
    operator), so convergence is governed by the spectral equivalence of A
    and B rather than by the conditioning of either matrix alone.
    """
    v = np.asarray(v, dtype=np.float64)
    z, _ = pcg(p.apply_inv, apply_a, v, tol=tol, maxit=maxit, x0=v.copy())
    return z


def spd_probe(p, rng, trials=20, exact=False):
    """Largest symmetry defect and smallest positivity of apply_inv on random
    probe pairs; used by the test suite."""
    inv = p.apply_inv_exact if exact else p.apply_inv
    worst_sym = 0.0
    worst_pos = np.inf
    for _ in range(trials):
        u = rng.normal(p.dim)
        w = rng.normal(p.dim)
        iu = inv(u)
        iw = inv(w)
        scale = np.linalg.norm(u) * np.linalg.norm(iw) + np.linalg.norm(w) * np.linalg.norm(iu)
        worst_sym = max(worst_sym, abs(float(iu @ w) - float(u @ iw)) / scale)
        worst_pos = min(worst_pos, float(u @ iu) / float(u @ u))
    return worst_sym, worst_pos
