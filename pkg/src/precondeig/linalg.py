"""Dense/sparse SPD primitives: Cholesky at two precisions, PCG, Lanczos,
a Jacobi eigensolver used as reference oracle, and a deterministic RNG.

Everything here is deterministic given its inputs; the only stateful object
is :class:`Rng`, which is single-owner by convention.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import (
    BreakdownNonSpd,
    DimensionMismatch,
    InnerProductNotPositive,
    MaxIterations,
    NoConvergence,
    NotSpd,
    NotSpdInLowPrecision,
)

# ---------------------------------------------------------------------------
# deterministic RNG (SplitMix64 counter mode + Box-Muller)
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix64(z):
    """SplitMix64 finalizer on uint64 numpy arrays (wraps modulo 2^64)."""
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX2)
    z ^= z >> np.uint64(31)
    return z


def _mix64_int(z):
    z &= _MASK64
    z ^= z >> 30
    z = (z * _MIX1) & _MASK64
    z ^= z >> 27
    z = (z * _MIX2) & _MASK64
    z ^= z >> 31
    return z


class Rng:
    """Counter-based SplitMix64 stream with a 64-bit seed.

    The k-th raw draw is ``mix64(seed + k * gamma)``, so identical seeds give
    identical streams on every platform, independent of draw batching.
    """

    def __init__(self, seed):
        self.seed = int(seed) & _MASK64
        self.counter = 0

    def raw(self, count):
        idx = np.arange(self.counter + 1, self.counter + count + 1, dtype=np.uint64)
        self.counter += count
        with np.errstate(over="ignore"):
            return _mix64(np.uint64(self.seed) + idx * np.uint64(_GAMMA))

    def uniform(self, count):
        """count uniforms in [0, 1) with 53-bit mantissas."""
        return (self.raw(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, count):
        """count standard normals via Box-Muller on consecutive uniform pairs."""
        pairs = (count + 1) // 2
        # u1 shifted into (0, 1] so log(u1) is finite
        u1 = ((self.raw(pairs) >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = self.uniform(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(2.0 * np.pi * u2)
        out[1::2] = r * np.sin(2.0 * np.pi * u2)
        return out[:count]

    def spawn(self, stream):
        """Independent child stream; deterministic in (seed, stream)."""
        child = _mix64_int(self.seed ^ _mix64_int((int(stream) + 1) * _GAMMA))
        return Rng(child)


def spawn_seed(seed, stream):
    """Derived 64-bit seed for a worker identified by an integer stream id."""
    return _mix64_int((int(seed) & _MASK64) ^ _mix64_int((int(stream) + 1) * _GAMMA))


def hash_label(text):
    """Deterministic 64-bit hash of a short string (stable across runs)."""
    h = 0x9AE16A3B2F90404F
    for b in text.encode("utf-8"):
        h = _mix64_int((h ^ b) * _GAMMA)
    return h


def gaussian_vector(rng, n):
    """n independent standard normal deviates drawn from rng."""
    if n < 1:
        raise DimensionMismatch("need n >= 1")
    return rng.normal(n)


# ---------------------------------------------------------------------------
# dense symmetric helpers
# ---------------------------------------------------------------------------


def as_dense_sym(m):
    """Dense binary64 copy, symmetrized exactly so a[i,j] == a[j,i]."""
    a = np.array(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return (a + a.T) / 2.0


@dataclass
class CholFactor:
    """Lower-triangular Cholesky factor at a declared precision."""

    n: int
    l: np.ndarray  # noqa: E741 - matches the usual factor name
    precision: str  # "binary64" | "binary32"


def cholesky(m, precision="binary64"):
    """Cholesky factorization m = L L^T carried out entirely at `precision`.

    For binary32 the input is converted to binary32 first and every operation
    of the factorization (inner products, subtraction, sqrt, division) runs in
    binary32; the stored factor values are exactly representable in binary32.
    """
    a = as_dense_sym(m)
    n = a.shape[0]
    if precision == "binary32":
        a = a.astype(np.float32)
    elif precision != "binary64":
        raise ValueError(f"unknown precision {precision!r}")
    l = np.zeros_like(a)  # noqa: E741
    for j in range(n):
        c = a[j:, j] - l[j:, :j] @ l[j, :j]
        d = c[0]
        if not d > 0:
            if precision == "binary32":
                raise NotSpdInLowPrecision(j)
            raise NotSpd(j)
        ljj = np.sqrt(d)
        l[j, j] = ljj
        l[j + 1 :, j] = c[1:] / ljj
    return CholFactor(n=n, l=l, precision=precision)


def chol_solve(f, rhs):
    """Solve (L L^T) x = rhs by two triangular substitutions.

    binary32 factors run both substitutions in binary32 (rhs converted first);
    the result is reported in binary64 either way.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape[0] != f.n:
        raise DimensionMismatch(f"rhs has dim {rhs.shape[0]}, factor has {f.n}")
    b = rhs.astype(f.l.dtype)
    y = scipy.linalg.solve_triangular(f.l, b, lower=True, check_finite=False)
    x = scipy.linalg.solve_triangular(f.l.T, y, lower=False, check_finite=False)
    return x.astype(np.float64)


def chol_matvec(f, v):
    """Product L (L^T v) in the factor's own precision, reported in binary64."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != f.n:
        raise DimensionMismatch(f"v has dim {v.shape[0]}, factor has {f.n}")
    w = v.astype(f.l.dtype)
    return (f.l @ (f.l.T @ w)).astype(np.float64)


# ---------------------------------------------------------------------------
# preconditioned conjugate gradients
# ---------------------------------------------------------------------------


def pcg(apply_a, apply_m_inv, rhs, tol=1e-10, maxit=None, x0=None, callback=None):
    """PCG for A x = rhs; stops when the Euclidean residual drops below
    tol * ||rhs||.  Returns (x, iterations).

    apply_m_inv applies the inverse of the preconditioner (None = plain CG).
    Raises BreakdownNonSpd on negative curvature and MaxIterations (carrying
    the best iterate) when the budget runs out.  callback(x) is invoked after
    every update.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    n = rhs.shape[0]
    if maxit is None:
        maxit = max(20, 10 * n)
    b_norm = np.linalg.norm(rhs)
    if b_norm == 0.0:
        return np.zeros(n), 0
    if x0 is None:
        x = np.zeros(n)
        r = rhs.copy()
    else:
        x = np.array(x0, dtype=np.float64)
        r = rhs - apply_a(x)
    if np.linalg.norm(r) <= tol * b_norm:
        return x, 0
    z = apply_m_inv(r) if apply_m_inv is not None else r.copy()
    rz = float(r @ z)
    if rz <= 0.0:
        raise BreakdownNonSpd("preconditioner produced a non-positive inner product")
    p = z.copy()
    for k in range(1, maxit + 1):
        ap = apply_a(p)
        pap = float(p @ ap)
        if pap <= 0.0:
            raise BreakdownNonSpd(f"negative curvature at iteration {k}")
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        if callback is not None:
            callback(x.copy())
        if np.linalg.norm(r) <= tol * b_norm:
            r_true = rhs - apply_a(x)
            if np.linalg.norm(r_true) <= tol * b_norm:
                return x, k
            r = r_true  # recurrence residual drifted; continue with the true one
        z = apply_m_inv(r) if apply_m_inv is not None else r.copy()
        rz_new = float(r @ z)
        if rz_new <= 0.0:
            raise BreakdownNonSpd("preconditioner produced a non-positive inner product")
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise MaxIterations(
        f"pcg did not reach tol={tol:g} within {maxit} iterations", best=x, iterations=maxit
    )


# ---------------------------------------------------------------------------
# Lanczos with a caller-supplied inner product
# ---------------------------------------------------------------------------


def _euclidean(u, v):
    return float(u @ v)


def _lanczos_tridiag(apply_t, inner, dim, tol, maxit, start, watch, inner_map=None):
    """Shared Lanczos loop with full reorthogonalization.

    `watch` lists indices into the ascending Ritz values (negative allowed)
    that must pass the residual-plus-stabilization test before the loop
    stops.  When the inner product is u^T C v, passing C as `inner_map`
    caches C q_i alongside the basis so reorthogonalization costs dots, not
    operator applications.  Returns (alphas, betas, basis, converged).
    """
    q = np.asarray(start, dtype=np.float64).copy()
    if inner_map is not None:
        inner = None
        cq = inner_map(q)
        qq = float(q @ cq)
    else:
        qq = inner(q, q)
    if qq <= 0.0:
        raise InnerProductNotPositive("inner(q0, q0) <= 0")
    nrm = np.sqrt(qq)
    q = q / nrm
    basis = [q]
    mapped = [cq / nrm] if inner_map is not None else basis
    alphas, betas = [], []
    prev = None
    converged = False
    steps = min(maxit, dim)
    span = max(abs(i) for i in watch) + 1
    for k in range(steps):
        w = apply_t(basis[-1])
        alpha = float(mapped[-1] @ w) if inner_map is not None else inner(basis[-1], w)
        alphas.append(alpha)
        w = w - alpha * basis[-1]
        if k > 0:
            w = w - betas[-1] * basis[-2]
        for _ in range(2):  # full reorthogonalization, two passes
            for qi, ci in zip(basis, mapped):
                coeff = float(ci @ w) if inner_map is not None else inner(qi, w)
                w = w - coeff * qi
        if inner_map is not None:
            cw = inner_map(w)
            ww = float(w @ cw)
        else:
            ww = inner(w, w)
        if ww < 0.0:
            raise InnerProductNotPositive("inner(w, w) < 0 during Lanczos")
        beta = np.sqrt(ww)
        if len(alphas) >= 2:
            theta, svecs = scipy.linalg.eigh_tridiagonal(
                np.array(alphas), np.array(betas), check_finite=False
            )
        else:
            theta, svecs = np.array([alphas[0]]), np.array([[1.0]])
        scale = max(abs(theta[0]), abs(theta[-1]))
        if len(theta) >= span:
            res_ok = all(beta * abs(svecs[-1, i]) <= tol * scale for i in watch)
            vals = tuple(theta[i] for i in watch)
            stable = prev is not None and all(
                abs(v - p) <= tol * scale for v, p in zip(vals, prev)
            )
            prev = vals
            if (res_ok and stable) or k + 1 == dim:
                converged = True
                break
            if beta <= 1e-14 * scale:
                converged = True  # invariant subspace found
                break
        elif k + 1 == dim:
            converged = True
            break
        betas.append(beta)
        basis.append(w / beta)
        if inner_map is not None:
            mapped.append(cw / beta)
    return alphas, betas, basis, converged


def lanczos_extremal(
    apply_t, inner=None, dim=None, tol=1e-10, maxit=None, start=None, rng=None, inner_map=None
):
    """Extremal eigenvalues of an operator self-adjoint w.r.t. `inner`.

    Full reorthogonalization against the stored basis; convergence is judged
    by the Ritz residual bound beta*|s_k| plus value stabilization.  For an
    inner product u^T C v, pass C as inner_map to get the cached fast path.
    """
    if dim is None:
        raise DimensionMismatch("dim is required")
    inner = inner or _euclidean
    if maxit is None:
        maxit = min(dim, max(60, dim // 2 + 40))
    if start is None:
        start = (rng or Rng(2024)).normal(dim)
    alphas, betas, _, converged = _lanczos_tridiag(
        apply_t, inner, dim, tol, maxit, start, (0, -1), inner_map=inner_map
    )
    if len(alphas) >= 2:
        theta = scipy.linalg.eigh_tridiagonal(
            np.array(alphas), np.array(betas)[: len(alphas) - 1], check_finite=False
        )[0]
    else:
        theta = np.array([alphas[0]])
    if not converged:
        raise MaxIterations(
            f"lanczos did not converge to tol={tol:g} within {maxit} steps",
            best=(float(theta[0]), float(theta[-1])),
            iterations=maxit,
        )
    return float(theta[0]), float(theta[-1])


def lanczos_top_pairs(apply_t, dim, k=2, tol=1e-12, maxit=None, start=None, rng=None):
    """Largest-k Ritz pairs of a Euclidean-self-adjoint operator.

    Used by the reference eigensolver on A^{-1}, where the top of the spectrum
    is well separated.  Returns (values descending, vectors as columns).
    """
    if maxit is None:
        maxit = min(dim, max(80, dim // 2 + 60))
    if start is None:
        start = (rng or Rng(2024)).normal(dim)
    watch = tuple(-(i + 1) for i in range(min(k, dim)))
    alphas, betas, basis, converged = _lanczos_tridiag(
        apply_t, _euclidean, dim, tol, maxit, start, watch
    )
    if len(alphas) >= 2:
        theta, svecs = scipy.linalg.eigh_tridiagonal(
            np.array(alphas), np.array(betas)[: len(alphas) - 1], check_finite=False
        )
    else:
        theta, svecs = np.array([alphas[0]]), np.array([[1.0]])
    if not converged:
        raise MaxIterations(
            f"lanczos did not converge to tol={tol:g} within {maxit} steps",
            best=float(theta[-1]),
            iterations=maxit,
        )
    q = np.column_stack(basis[: len(alphas)])
    order = np.argsort(theta)[::-1][: min(k, len(theta))]
    vals = theta[order]
    vecs = q @ svecs[:, order]
    vecs /= np.linalg.norm(vecs, axis=0)
    return vals, vecs


# ---------------------------------------------------------------------------
# dense symmetric eigendecomposition (cyclic Jacobi), reference oracle
# ---------------------------------------------------------------------------


def dense_sym_eig(m, max_sweeps=60):
    """All eigenpairs of a dense symmetric matrix by cyclic Jacobi sweeps.

    Returns (w ascending, V with orthonormal columns).  Self-contained on
    purpose: it is the oracle the rest of the library is tested against.
    """
    a = as_dense_sym(m)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a[0].copy(), v
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= 1e-15 * norm:
            break
        thresh = off / n  # rotate only entries that still matter this sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-20 * norm or abs(apq) < 1e-3 * thresh:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                app, aqq = a[p, p], a[q, q]
                colp = a[:, p].copy()
                colq = a[:, q].copy()
                a[:, p] = c * colp - s * colq
                a[:, q] = s * colp + c * colq
                rowp = a[p, :].copy()
                rowq = a[q, :].copy()
                a[p, :] = c * rowp - s * rowq
                a[q, :] = s * rowp + c * rowq
                # t-formula diagonal entries are more accurate than the rotation
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vkp = v[:, p].copy()
                v[:, p] = c * vkp - s * v[:, q]
                v[:, q] = s * vkp + c * v[:, q]
    else:
        raise NoConvergence(f"jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


# ---------------------------------------------------------------------------
# exact solvers behind a uniform callable interface
# ---------------------------------------------------------------------------


def make_solver(a):
    """Exact binary64 solve v -> a^{-1} v for a dense or sparse SPD matrix."""
    if scipy.sparse.issparse(a):
        lu = scipy.sparse.linalg.splu(a.tocsc())
        return lambda v: lu.solve(np.asarray(v, dtype=np.float64))
    f = cholesky(a, "binary64")
    return lambda v: chol_solve(f, v)


class SymFactor:
    """R^T R factorization of an SPD matrix with products and solves for R.

    Dense inputs use the binary64 Cholesky above (R = L^T); banded sparse
    inputs (e.g. lexicographically ordered FEM mass matrices) use LAPACK's
    banded Cholesky, keeping memory at O(n * bandwidth).
    """

    def __init__(self, m):
        if scipy.sparse.issparse(m):
            coo = m.tocoo()
            bw = int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0
            n = m.shape[0]
            ab = np.zeros((bw + 1, n))
            csr = m.tocsr()
            for i in range(n):
                for idx in range(csr.indptr[i], csr.indptr[i + 1]):
                    j = csr.indices[idx]
                    if j >= i:
                        ab[bw + i - j, j] = csr.data[idx]
            try:
                rab = scipy.linalg.cholesky_banded(ab, lower=False, check_finite=False)
            except scipy.linalg.LinAlgError as exc:
                raise NotSpd(-1, f"banded cholesky failed: {exc}") from exc
            self.n, self.bw, self.rab = n, bw, rab
            rows, cols, vals = [], [], []
            for k in range(bw + 1):
                j = np.arange(k, n)
                rows.append(j - k)
                cols.append(j)
                vals.append(rab[bw - k, j])
            self._r = scipy.sparse.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
            )
            # R^T is lower banded: lab[i - j, j] = R[j, i]
            lab = np.zeros((bw + 1, n))
            for k in range(bw + 1):
                lab[k, : n - k] = rab[bw - k, k:]
            self._lab = lab
            self._dense = None
        else:
            f = cholesky(m, "binary64")
            self.n, self.bw = f.n, f.n - 1
            self._dense = f.l.T.copy()  # R upper
            self._r = None

    def mult(self, v):
        """R v"""
        if self._dense is not None:
            return self._dense @ v
        return self._r @ v

    def mult_t(self, v):
        """R^T v"""
        if self._dense is not None:
            return self._dense.T @ v
        return self._r.T @ v

    def solve(self, v):
        """R x = v"""
        if self._dense is not None:
            return scipy.linalg.solve_triangular(self._dense, v, lower=False, check_finite=False)
        return scipy.linalg.solve_banded((0, self.bw), self.rab, v, check_finite=False)

    def solve_t(self, v):
        """R^T x = v"""
        if self._dense is not None:
            return scipy.linalg.solve_triangular(self._dense.T, v, lower=True, check_finite=False)
        return scipy.linalg.solve_banded((self.bw, 0), self._lab, v, check_finite=False)
