"""Command-line front end: recipe-driven solves, distortion diagnostics,
success-probability experiments, the property-validation suite, and the
desk-scale experiment tables.

Recipes are flat key=value strings (dyadic widths written 2^-k) so a run is
fully reproducible from shell history.  All floating-point output uses 17
significant digits in CSV/JSON and 4 in the human-readable tables.
"""

import argparse
import json
import math
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import diagnostics, precond, problems, solvers
from .errors import MaxIterations, PrecondEigError, RecipeError
from .linalg import Rng, gaussian_vector, hash_label, spawn_seed
from .mmio import read_matrix

_DYADIC = re.compile(r"^2\^(-?\d+)$")


def parse_dyadic(text):
    m = _DYADIC.match(text.strip())
    if m:
        return 2.0 ** int(m.group(1))
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _parse_params(body):
    params = {}
    if body:
        for item in body.split(","):
            if "=" not in item:
                raise RecipeError(f"expected key=value, got {item!r}")
            key, value = item.split("=", 1)
            params[key.strip()] = value.strip()
    return params


def build_problem(recipe):
    """Instantiate a problem from its recipe string."""
    kind, _, body = recipe.partition(":")
    if kind == "laplace-fd":
        params = _parse_params(body)
        return problems.laplace_fd(parse_dyadic(params["h"]))
    if kind == "laplace-fem":
        params = _parse_params(body)
        return problems.laplace_fem(parse_dyadic(params["h"]))
    if kind in ("kernel-laplace", "kernel-poly"):
        params = _parse_params(body)
        spec = problems.KernelSpec(
            kind="laplacian" if kind == "kernel-laplace" else "poly-complex",
            n=int(params["n"]),
            d=int(params["d"]) if "d" in params else None,
            seed=int(params.get("seed", 0)),
            tau=float(params.get("tau", 0.0)),
        )
        return problems.kernel_matrix(spec)
    if kind == "mtx":
        parts = body.split(",") if body else []
        path = parts[0] if parts else ""
        params = _parse_params(",".join(parts[1:]))
        if not path or not os.path.exists(path):
            raise RecipeError(f"matrix file not found: {path!r}")
        a = read_matrix(path)
        if "mass" in params:
            if not os.path.exists(params["mass"]):
                raise RecipeError(f"mass matrix file not found: {params['mass']!r}")
            m = read_matrix(params["mass"])
            prob = problems.generalized_reduce(a, m)
            prob.label = recipe
            return prob
        return problems.EigenProblem(
            dim=a.shape[0], apply_a=lambda v: a @ v, matrix=a, label=recipe
        )
    raise RecipeError(f"unknown problem recipe {recipe!r}")


def build_precond(recipe, problem, fwd_tol=1e-10):
    """Instantiate a preconditioner for `problem` from its recipe string.

    For mass-reduced problems the DDM preconditioner is built on the original
    stiffness matrix and lifted; the other kinds act on the reduced operator.
    """
    kind, _, body = recipe.partition(":")
    if kind == "identity":
        return precond.make_identity(problem.dim)
    if kind == "exact":
        if problem.matrix is not None:
            return precond.make_exact(problem.matrix)
        return precond.OperatorPreconditioner(
            problem.dim, problem.solver(), problem.apply_a, label="exact"
        )
    if kind == "mp-chol":
        return precond.make_mp_cholesky(problem.dense())
    if kind == "ddm":
        params = _parse_params(body)
        big_h = parse_dyadic(params["H"])
        ratio = float(params.get("overlap", 0.5))
        stiffness = problem.meta.get("stiffness", problem.matrix)
        h = problem.meta.get("h")
        if stiffness is None or h is None:
            raise RecipeError("ddm preconditioner needs a mesh problem (laplace-fd/laplace-fem)")
        hier = problems.mesh_hierarchy(big_h, h, ratio)
        a_coarse = (hier.prolongation.T @ stiffness @ hier.prolongation).tocsc()
        ddm = precond.make_ddm(hier, stiffness, a_coarse, fwd_tol=fwd_tol)
        return problem.wrap_precond(ddm)
    if kind == "scaled":
        inner = build_precond(body, problem, fwd_tol=fwd_tol)
        nu_min, nu_max, _ = diagnostics.kappa_nu(problem, inner)
        return precond.spectral_scale(inner, nu_min, nu_max)
    raise RecipeError(f"unknown preconditioner recipe {recipe!r}")


def _parse_step(text):
    kind, _, arg = text.partition(":")
    if kind == "theory":
        return solvers.StepPolicy.theory()
    if kind in ("const", "constant"):
        return solvers.StepPolicy.constant(float(arg or 0.25))
    if kind == "fixed":
        return solvers.StepPolicy.fixed(float(arg))
    raise RecipeError(f"unknown step policy {text!r}")


def _fmt(x):
    if x is None:
        return "n/a"
    return f"{x:.17g}"


def _fmt4(x):
    if x is None:
        return "n/a"
    return f"{x:.4g}"


def _worker_count():
    env = os.environ.get("EIG_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _initial_vector(init, problem, precond_obj, seed):
    rng = Rng(seed)
    if init == "gaussian":
        return gaussian_vector(rng, problem.dim)
    if init == "smooth":
        return precond_obj.apply_inv(gaussian_vector(rng, problem.dim))
    if init == "eigvec":
        return problem.reference().u_star.copy()
    raise RecipeError(f"unknown init {init!r}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_solve(args):
    problem = build_problem(args.problem)
    p = build_precond(args.precond, problem)
    policy = _parse_step(args.step)
    ctx = None
    if policy.kind in ("theory", "constant") or args.method == "pinvit-classic" or args.init == "eigvec":
        ctx = diagnostics.build_rate_context(problem, p)
    u0 = _initial_vector(args.init, problem, p, args.seed)
    if args.method in ("rsd", "pinvit-variant"):
        result = solvers.rsd_solve(problem, p, u0, policy, tol=args.tol, maxit=args.maxit, ctx=ctx)
    elif args.method == "pinvit-classic":
        result = solvers.pinvit_classic_solve(problem, p, u0, tol=args.tol, maxit=args.maxit, ctx=ctx)
    else:
        raise RecipeError(f"unknown method {args.method!r}")
    out = {
        "problem": args.problem,
        "precond": args.precond,
        "method": args.method,
        "step": args.step,
        "seed": args.seed,
        "lambda": result.lam,
        "iterations": result.iterations,
        "reason": result.reason,
        "events": [list(e) for e in result.trace.events],
    }
    if ctx is not None:
        out["lambda_ref"] = ctx.lam1
        out["lambda_rel_err"] = abs(result.lam - ctx.lam1) / ctx.lam1
    if args.trace:
        with open(args.trace, "w") as fh:
            result.trace.write_csv(fh)
    text = json.dumps(out, indent=2)
    if args.result:
        with open(args.result, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0 if result.reason == "ResidualTol" else 2


def cmd_phi(args):
    problem = build_problem(args.problem)
    p = build_precond(args.precond, problem)
    quality = diagnostics.compute_quality(problem, p)
    payload = quality.to_json_dict()
    payload["problem"] = args.problem
    payload["precond"] = args.precond
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(json.dumps(payload, indent=2) + "\n")
    print(json.dumps(payload, indent=2))
    cols = ["cos2_phi", "one_minus_inv_kappa", "chi"]
    header = f"{'quantity':<22}" + "".join(f"{c:>22}" for c in cols)
    values = f"{'value':<22}" + "".join(f"{_fmt4(payload[c]):>22}" for c in cols)
    print(header)
    print(values)
    if quality.epsilon_l is not None:
        print(
            f"epsilon_l = {_fmt4(quality.epsilon_l)}  sqrt(2 eps) = "
            f"{_fmt4(math.sqrt(2.0 * quality.epsilon_l))}  measured cos_phi = "
            f"{_fmt4(quality.cos_phi)}  bound applicable: {quality.epsilon_l_applicable}"
        )
    return 0


def cmd_prob(args):
    problem = build_problem(args.problem)
    p = build_precond(args.precond, problem)
    ctx = diagnostics.build_rate_context(problem, p)
    report = diagnostics.success_probability(
        problem, p, sampler=args.sampler, trials=args.trials, seed=args.seed, ctx=ctx
    )
    lines = ["condition,successes,trials,fraction"]
    lines.append(
        f"dist_B(u0;u*) < phi,{report['successes_new']},{report['trials']},"
        f"{_fmt(report['p_new'])}"
    )
    lines.append(
        f"lambda(u0) < lambda2,{report['successes_classic']},{report['trials']},"
        f"{_fmt(report['p_classic'])}"
    )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


_VALIDATE_KINDS = ("identity", "random-spd", "mp-chol")


def cmd_validate(args):
    sizes = [int(s) for s in args.sizes.split(",")]
    all_violations = []
    checked = {}
    t0 = time.time()
    for seed in range(args.seeds):
        for n in sizes:
            a, b_rand = diagnostics.random_spd_pair(seed, n)
            for kind in _VALIDATE_KINDS:
                if kind == "identity":
                    b = np.eye(n)
                elif kind == "random-spd":
                    b = b_rand
                else:
                    factor = precond.make_mp_cholesky(a)
                    b = factor._l64 @ factor._l64.T
                label = f"seed={seed},n={n},B={kind}"
                report = diagnostics.validate_properties(
                    a, b, n_samples=args.samples, seed=spawn_seed(seed, n),
                    label=label, inject_bug=args.inject_bug,
                )
                for key, cnt in report.checked.items():
                    checked[key] = checked.get(key, 0) + cnt
                all_violations.extend(report.violations)
    payload = {
        "seeds": args.seeds,
        "sizes": sizes,
        "samples": args.samples,
        "checked": checked,
        "violations": [
            {"check": v["check"], "label": v["label"], "detail": v["detail"]}
            for v in all_violations[:50]
        ],
        "violation_count": len(all_violations),
        "runtime_s": time.time() - t0,
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    if all_violations:
        print(f"FAIL: {len(all_violations)} violations", file=sys.stderr)
        return 3
    print(f"OK: zero violations across {sum(checked.values())} checks")
    return 0


_TABLES = ("phi-ddm-fixedH", "phi-ddm-fixedh", "prob-ddm", "prob-kernel")


def _phi_cell(h, big_h):
    t0 = time.time()
    problem = build_problem(f"laplace-fem:h={_dyadic_str(h)}")
    p = build_precond(f"ddm:H={_dyadic_str(big_h)},overlap=0.5", problem)
    q = diagnostics.compute_quality(problem, p)
    return {
        "h": h,
        "H": big_h,
        "cos2_phi": q.cos_phi**2,
        "one_minus_inv_kappa": 1.0 - 1.0 / q.kappa_nu,
        "chi": q.chi,
        "runtime_s": time.time() - t0,
    }


def _prob_ddm_cell(h, big_h, trials, seed):
    t0 = time.time()
    problem = build_problem(f"laplace-fem:h={_dyadic_str(h)}")
    p = build_precond(f"ddm:H={_dyadic_str(big_h)},overlap=0.5", problem)
    ctx = diagnostics.build_rate_context(problem, p)
    rep = diagnostics.success_probability(problem, p, "smooth", trials, seed, ctx=ctx)
    rep.update({"h": h, "H": big_h, "runtime_s": time.time() - t0})
    return rep


def _prob_kernel_cell(n, trials, seed, kernel_seed):
    t0 = time.time()
    problem = build_problem(f"kernel-laplace:n={n},seed={kernel_seed}")
    p = build_precond("mp-chol", problem)
    ctx = diagnostics.build_rate_context(problem, p)
    rep = diagnostics.success_probability(problem, p, "gaussian", trials, seed, ctx=ctx)
    rep.update({"n": n, "runtime_s": time.time() - t0})
    return rep


def _dyadic_str(h):
    k = round(-math.log2(h))
    if abs(2.0**-k - h) < 1e-12:
        return f"2^-{k}"
    return repr(h)


def cmd_table(args):
    if args.name not in _TABLES:
        print(f"unknown table {args.name!r}; choose from {', '.join(_TABLES)}", file=sys.stderr)
        return 1
    cfg = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
    workers = _worker_count()
    rows = []
    if args.name == "phi-ddm-fixedH":
        big_h = cfg.get("H", 0.25)
        hs = cfg.get("h", [2.0**-4, 2.0**-5, 2.0**-6])
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda h: _phi_cell(h, big_h), hs))
        header = ["h", "H", "cos2_phi", "one_minus_inv_kappa", "chi", "runtime_s"]
    elif args.name == "phi-ddm-fixedh":
        h = cfg.get("h", 2.0**-6)
        hs_big = cfg.get("H", [2.0**-2, 2.0**-3])
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda H: _phi_cell(h, H), hs_big))
        header = ["h", "H", "cos2_phi", "one_minus_inv_kappa", "chi", "runtime_s"]
    elif args.name == "prob-ddm":
        hs = cfg.get("h", [2.0**-4])
        big_h = cfg.get("H", 0.25)
        trials = cfg.get("trials", args.trials)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(
                pool.map(
                    lambda h: _prob_ddm_cell(
                        h, big_h, trials, spawn_seed(args.seed, hash_label(f"prob-ddm:{h}"))
                    ),
                    hs,
                )
            )
        header = ["h", "H", "successes_new", "successes_classic", "trials", "p_new", "p_classic", "runtime_s"]
    else:  # prob-kernel
        ns = cfg.get("n", [128, 256])
        trials = cfg.get("trials", args.trials)
        kernel_seed = cfg.get("kernel_seed", 7)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(
                pool.map(
                    lambda n: _prob_kernel_cell(
                        n, trials, spawn_seed(args.seed, hash_label(f"prob-kernel:{n}")), kernel_seed
                    ),
                    ns,
                )
            )
        header = ["n", "successes_new", "successes_classic", "trials", "p_new", "p_classic", "runtime_s"]

    lines = [",".join(header)]
    for row in rows:
        fields = []
        for col in header:
            val = row.get(col)
            if col in ("successes_new", "successes_classic", "trials", "n"):
                fields.append(str(int(val)))
            else:
                fields.append(_fmt(val))
        lines.append(",".join(fields))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(
        prog="precondeig",
        description="Preconditioned eigensolver experiments and diagnostics",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="run one eigensolve")
    sp.add_argument("--problem", required=True)
    sp.add_argument("--precond", required=True)
    sp.add_argument("--method", default="rsd", choices=["rsd", "pinvit-variant", "pinvit-classic"])
    sp.add_argument("--step", default="theory", help="theory | const:c | fixed:value")
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--maxit", type=int, default=2000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--init", default="smooth", choices=["gaussian", "smooth", "eigvec"])
    sp.add_argument("--trace", help="write per-iteration CSV here")
    sp.add_argument("--result", help="write result JSON here")
    sp.set_defaults(fn=cmd_solve)

    sp = sub.add_parser("phi", help="distortion-angle and rate diagnostics")
    sp.add_argument("--problem", required=True)
    sp.add_argument("--precond", required=True)
    sp.add_argument("--out", help="write diagnostics JSON here")
    sp.set_defaults(fn=cmd_phi)

    sp = sub.add_parser("prob", help="empirical success probabilities")
    sp.add_argument("--problem", required=True)
    sp.add_argument("--precond", required=True)
    sp.add_argument("--sampler", default="gaussian", choices=["gaussian", "smooth"])
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="write CSV here")
    sp.set_defaults(fn=cmd_prob)

    sp = sub.add_parser("validate", help="numerically test every analysis inequality")
    sp.add_argument("--seeds", type=int, default=20)
    sp.add_argument("--sizes", default="6,12,20")
    sp.add_argument("--samples", type=int, default=500)
    sp.add_argument("--inject-bug", choices=["a_x_sign"], help="negative control hook")
    sp.add_argument("--out", help="write report JSON here")
    sp.set_defaults(fn=cmd_validate)

    sp = sub.add_parser("table", help="reproduce a desk-scale experiment table")
    sp.add_argument("--name", required=True)
    sp.add_argument("--config", help="JSON file overriding the default grid")
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="write CSV here")
    sp.set_defaults(fn=cmd_table)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except MaxIterations as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PrecondEigError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
