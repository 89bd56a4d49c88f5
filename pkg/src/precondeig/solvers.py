"""The three iterations: classical PINVIT, the steepest-descent variant run
entirely in u-space, and the step-size policies of the convergence theory.

The u-space recurrence is

    u_{t+1} = beta_{t+1} (u_t - eta*_t B^{-1} r_t),
    eta*_t  = 2 tan(eta_t g_t) u_t^T u_t / (g_t (u_t^T A u_t)^2),

with g_t the Riemannian gradient norm and beta chosen so ||u||_B = 1; the
B-norm is maintained through the exact identity ||u - s B^{-1}r||_B^2 =
||u||_B^2 + s^2 r^T B^{-1} r (u^T r = 0), with periodic recomputation to
control roundoff drift.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import a_x, mu_x
from .errors import (
    InvalidC,
    OutsideBasin,
    StepCapViolated,
    ZeroGradientAtNonEigenvector,
)
from .geometry import make_state
from .precond import apply_fwd_iterative

TRACE_COLUMNS = (
    "t",
    "lambda",
    "f",
    "resnorm",
    "distB",
    "eta",
    "eta_star",
    "beta",
    "xi",
    "contraction",
)

NAN = float("nan")


@dataclass
class StepPolicy:
    """Step-size policy: theory-local a(x)/gamma(x), the constant step
    c / (kappa^2 (1/l1 - 1/ln)), a fixed user value, or a custom callable."""

    kind: str
    c: float = None
    value: float = None
    fn: object = None

    @classmethod
    def theory(cls):
        return cls(kind="theory")

    @classmethod
    def constant(cls, c):
        if not 0.0 < c < 0.5:
            raise InvalidC(f"need 0 < c < 1/2, got {c}")
        return cls(kind="constant", c=c)

    @classmethod
    def fixed(cls, value):
        if not value > 0.0:
            raise InvalidC(f"fixed step must be positive, got {value}")
        return cls(kind="fixed", value=float(value))

    @classmethod
    def custom(cls, fn):
        return cls(kind="custom", fn=fn)


class Trace:
    """Per-iteration records plus out-of-band events (e.g. BasinExit)."""

    def __init__(self):
        self.rows = []
        self.events = []

    def append(self, **kw):
        # "lam" keyword maps to the "lambda" column (reserved word in Python)
        row = {k: kw.get("lam" if k == "lambda" else k, NAN) for k in TRACE_COLUMNS}
        self.rows.append(row)

    def event(self, t, name):
        self.events.append((t, name))

    def write_csv(self, fh):
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for row in self.rows:
            fields = [f"{int(row['t'])}"]
            fields += [f"{float(row[c]):.17g}" for c in TRACE_COLUMNS[1:]]
            fh.write(",".join(fields) + "\n")

    def column(self, name):
        return np.array([row[name] for row in self.rows], dtype=np.float64)


@dataclass
class SolveResult:
    u: np.ndarray
    lam: float
    iterations: int
    reason: str  # "ResidualTol" | "MaxIters" | "StagnatedStep"
    trace: Trace = field(default_factory=Trace)


def step_theory(state, ctx):
    """Locally optimal step a(x)/gamma(x); requires dist(x, x*) < phi.

    gamma carries the sharp smoothness factor 2 (see diagnostics.gamma_x),
    so the closed form has 2 nu_max in the denominator.
    """
    cos_dist = ctx.cos_dist_b(state.u, state.b_norm)
    margin = cos_dist - ctx.cos_phi
    if margin <= 0.0:
        raise OutsideBasin(
            f"dist_B = {math.acos(min(1.0, cos_dist)):.6f} >= phi = {ctx.phi:.6f}"
        )
    return (
        ctx.lam1
        * ctx.norm_u_binv**2
        * margin
        / (2.0 * ctx.nu_max * ctx.norm_u**2 * (1.0 / ctx.lam1 - 1.0 / ctx.lamn))
    )


def step_constant(ctx, c):
    """Constant step c / (kappa^2 (1/lambda1 - 1/lambdan)) for 0 < c < 1/2."""
    if not 0.0 < c < 0.5:
        raise InvalidC(f"need 0 < c < 1/2, got {c}")
    return c / (ctx.kappa**2 * (1.0 / ctx.lam1 - 1.0 / ctx.lamn))


def _b_norm_sq(precond, problem, u):
    """Measurement-grade u^T B u (exact variant; nested PCG for implicit B)."""
    if precond.fwd_mode == "exact":
        bu = precond.apply_fwd_exact(u)
    else:
        bu = apply_fwd_iterative(
            precond, u, apply_a=problem.apply_a, tol=precond.fwd_tol or 1e-10
        )
    return float(u @ bu)


def rsd_solve(
    problem,
    precond,
    u0,
    policy,
    tol=1e-8,
    maxit=1000,
    ctx=None,
    stagnation_window=30,
    renorm_every=None,
    callback=None,
):
    """Steepest-descent variant in u-space.

    Terminates on ||r|| / (lambda ||u||) <= tol, on the iteration budget, or
    on a stagnation guard: |dlambda| <= 1e-15 lambda while the residual sets
    no new best (by 10%), over `stagnation_window` consecutive steps (None
    disables).  policy "theory" and the trace fields distB/xi need a
    RateContext.  `callback(t, state)` is invoked for every visited iterate,
    the terminal one included.
    """
    u0 = np.asarray(u0, dtype=np.float64)
    if not np.any(u0):
        raise ZeroGradientAtNonEigenvector("u0 is zero")
    if policy.kind in ("theory",) and ctx is None:
        raise OutsideBasin("theory policy needs a RateContext")
    if renorm_every is None:
        renorm_every = 1 if precond.fwd_mode == "exact" else 25

    u = u0 / math.sqrt(_b_norm_sq(precond, problem, u0))
    trace = Trace()
    in_basin = True
    stagnant = 0
    prev_lam = None
    best_res = math.inf
    reason = "MaxIters"
    iterations = maxit
    state = None

    for t in range(maxit + 1):
        state = make_state(u, problem.apply_a, precond.apply_inv)
        if callback is not None:
            callback(t, state)
        res_rel = np.linalg.norm(state.r) / (state.lam * math.sqrt(state.uu))
        dist_b = NAN
        if ctx is not None:
            dist_b = math.acos(ctx.cos_dist_b(state.u, state.b_norm))
        if trace.rows and np.isfinite(dist_b) and np.isfinite(trace.rows[-1]["distB"]):
            prev = trace.rows[-1]["distB"]
            if prev > 0:
                trace.rows[-1]["contraction"] = (dist_b / prev) ** 2
        if res_rel <= tol:
            trace.append(t=t, lam=state.lam, f=state.f, resnorm=np.linalg.norm(state.r), distB=dist_b)
            reason, iterations = "ResidualTol", t
            break
        lam_flat = prev_lam is not None and abs(state.lam - prev_lam) <= 1e-15 * abs(state.lam)
        if res_rel < 0.9 * best_res:
            stagnant = 0
        elif lam_flat:
            stagnant += 1
        else:
            stagnant = 0
        prev_lam = state.lam
        best_res = min(best_res, res_rel)
        if stagnation_window is not None and stagnant >= stagnation_window:
            trace.append(t=t, lam=state.lam, f=state.f, resnorm=np.linalg.norm(state.r), distB=dist_b)
            reason, iterations = "StagnatedStep", t
            break
        if t == maxit:
            trace.append(t=t, lam=state.lam, f=state.f, resnorm=np.linalg.norm(state.r), distB=dist_b)
            reason, iterations = "MaxIters", t
            break

        g = math.sqrt(state.g2)
        if g == 0.0:
            raise ZeroGradientAtNonEigenvector(
                f"gradient vanished at t={t} with residual {res_rel:.3e}"
            )
        if ctx is not None:
            margin = ctx.cos_dist_b(state.u, state.b_norm) - ctx.cos_phi
            if margin <= 0.0 and in_basin:
                trace.event(t, "BasinExit")
                in_basin = False
            elif margin > 0.0:
                in_basin = True

        if policy.kind == "theory":
            if in_basin:
                eta = step_theory(state, ctx)
            else:
                # outside the basin the theory step is non-positive; fall back
                # to the capped constant step (no contraction claimed there)
                eta = min(step_constant(ctx, 0.25), math.pi / (4.0 * g))
        elif policy.kind == "constant":
            eta = step_constant(ctx, policy.c)
        elif policy.kind == "fixed":
            eta = policy.value
        else:
            eta = float(policy.fn(state, t))
        if eta * g >= math.pi / 2.0:
            raise StepCapViolated(
                f"eta = {eta:.3e} exceeds pi/(2 ||grad f||) = {math.pi / (2 * g):.3e} at t={t}"
            )

        eta_star = 2.0 * math.tan(eta * g) * state.uu / (g * state.uau**2)
        beta = math.cos(eta * g)
        xi = NAN
        if ctx is not None:
            a_val = a_x(state, ctx)
            xi = eta * mu_x(state, ctx) * a_val
        trace.append(
            t=t,
            lam=state.lam,
            f=state.f,
            resnorm=np.linalg.norm(state.r),
            distB=dist_b,
            eta=eta,
            eta_star=eta_star,
            beta=beta,
            xi=xi,
        )

        u_new = state.u - eta_star * state.b_inv_r
        bsq = 1.0 + eta_star**2 * state.r_binv_r  # exact: u^T r = 0
        u = u_new / math.sqrt(bsq)
        if renorm_every and (t + 1) % renorm_every == 0:
            u = u / math.sqrt(_b_norm_sq(precond, problem, u))

    return SolveResult(u=state.u, lam=state.lam, iterations=iterations, reason=reason, trace=trace)


def pinvit_classic_solve(problem, precond, u0, tol=1e-8, maxit=1000, ctx=None):
    """Classical preconditioned inverse iteration u <- u - B^{-1} r with
    Euclidean renormalization; same termination rule as rsd_solve.

    The preconditioner should be spectrally scaled so ||I - B^{-1}A||_A < 1;
    this is not enforced, only reflected in the convergence behavior.
    """
    u = np.asarray(u0, dtype=np.float64)
    if not np.any(u):
        raise ZeroGradientAtNonEigenvector("u0 is zero")
    u = u / np.linalg.norm(u)
    trace = Trace()
    can_dist = ctx is not None and precond.fwd_mode == "exact"
    reason = "MaxIters"
    iterations = maxit
    lam = None
    for t in range(maxit + 1):
        au = problem.apply_a(u)
        lam = float(u @ au)  # ||u|| = 1
        r = au - lam * u
        res_rel = np.linalg.norm(r) / lam
        dist_b = NAN
        if can_dist:
            bn = math.sqrt(float(u @ precond.apply_fwd_exact(u)))
            dist_b = math.acos(ctx.cos_dist_b(u, bn))
        if trace.rows and np.isfinite(dist_b) and np.isfinite(trace.rows[-1]["distB"]):
            prev = trace.rows[-1]["distB"]
            if prev > 0:
                trace.rows[-1]["contraction"] = (dist_b / prev) ** 2
        trace.append(t=t, lam=lam, f=-1.0 / lam, resnorm=np.linalg.norm(r), distB=dist_b)
        if res_rel <= tol:
            reason, iterations = "ResidualTol", t
            break
        if t == maxit:
            reason, iterations = "MaxIters", t
            break
        u = u - precond.apply_inv(r)
        u = u / np.linalg.norm(u)
    return SolveResult(u=u, lam=lam, iterations=iterations, reason=reason, trace=trace)
