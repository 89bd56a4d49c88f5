"""Sphere geometry and the u-space identities used by the solvers.

All solver-facing quantities are evaluated from A-matvecs and inverse
preconditioner applications only.  Square roots of the preconditioner are
never formed here; the dense-oracle tests form them independently.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AntipodalOrEqual, NotTangent, ZeroVector

def _clamp(c):
    # guards arccos against |cos| > 1 from roundoff
    return min(1.0, max(-1.0, c))


def rayleigh(u, apply_a):
    """Rayleigh quotient u^T A u / u^T u; scale invariant."""
    u = np.asarray(u, dtype=np.float64)
    uu = float(u @ u)
    if uu == 0.0:
        raise ZeroVector("rayleigh of the zero vector")
    return float(u @ apply_a(u)) / uu


def f_value(u, apply_a):
    """Objective value -u^T u / u^T A u (= -1/rayleigh); minimum is -1/lambda1."""
    return -1.0 / rayleigh(u, apply_a)


@dataclass
class IterateState:
    """Iterate u with ||u||_B = 1 and the derived quantities the solvers reuse.

    g2 is the squared Riemannian gradient norm of the sphere objective at the
    point x = B^{1/2} u, computed without ever forming B^{1/2}:

        ||grad f(x)||^2 = (2 u^T u / (u^T A u)^2)^2 * r^T B^{-1} r.
    """

    u: np.ndarray
    au: np.ndarray
    uu: float
    uau: float
    lam: float
    f: float
    r: np.ndarray
    b_inv_r: np.ndarray
    r_binv_r: float
    g2: float
    b_norm: float = 1.0
    extras: dict = field(default_factory=dict)


def make_state(u, apply_a, apply_b_inv, b_norm=1.0):
    """Build the cached state for an iterate with known B-norm."""
    u = np.asarray(u, dtype=np.float64)
    uu = float(u @ u)
    if uu == 0.0:
        raise ZeroVector("iterate is the zero vector")
    au = apply_a(u)
    uau = float(u @ au)
    lam = uau / uu
    r = au - lam * u
    b_inv_r = apply_b_inv(r)
    r_binv_r = max(0.0, float(r @ b_inv_r))
    coeff = 2.0 * uu / uau**2
    return IterateState(
        u=u,
        au=au,
        uu=uu,
        uau=uau,
        lam=lam,
        f=-uu / uau,
        r=r,
        b_inv_r=b_inv_r,
        r_binv_r=r_binv_r,
        g2=coeff**2 * r_binv_r,
    )


def grad_norm_sq(state):
    """Squared gradient norm from the cached u-space identity.

    Zero exactly when the residual is zero (B^{-1} is SPD).
    """
    return state.g2


def dist_b(u, v, apply_b_fwd):
    """B-metric angle arccos(|u^T B v| / (||u||_B ||v||_B)) in [0, pi/2].

    The sign of v is chosen so the cosine is nonnegative.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    bu = apply_b_fwd(u)
    bv = apply_b_fwd(v)
    nu = float(u @ bu)
    nv = float(v @ bv)
    if nu <= 0.0 or nv <= 0.0:
        raise ZeroVector("dist_b of a vector with non-positive B-norm")
    c = abs(float(u @ bv)) / np.sqrt(nu * nv)
    return float(np.arccos(_clamp(c)))


def sphere_dist(x, y):
    """Geodesic angle arccos(x^T y), computed stably via atan2."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    c = float(x @ y)
    s = float(np.linalg.norm(y - c * x))
    return float(np.arctan2(s, c))


def sphere_exp(x, tangent):
    """Exponential map cos(||t||) x + sin(||t||) t/||t||; t = 0 returns x."""
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(tangent, dtype=np.float64)
    nt = float(np.linalg.norm(t))
    if nt == 0.0:
        return x.copy()
    if abs(float(x @ t)) > 1e-10 * nt:
        raise NotTangent("tangent vector is not orthogonal to the base point")
    y = np.cos(nt) * x + np.sin(nt) * (t / nt)
    return y / np.linalg.norm(y)


def sphere_log(x, y):
    """Logarithmic map dist(x,y) * P_x y / ||P_x y||, inverse of sphere_exp.

    Equal points return the zero tangent; an undefined direction (projection
    numerically zero at nonzero distance) raises AntipodalOrEqual.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    p = y - float(x @ y) * x
    npx = float(np.linalg.norm(p))
    d = sphere_dist(x, y)
    if npx <= 1e-14:
        if d < 1e-7:
            return np.zeros_like(x)
        raise AntipodalOrEqual("log direction undefined (antipodal points)")
    return d * (p / npx)
