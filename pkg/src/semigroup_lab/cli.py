"""Command-line front end: ``semigroup-lab <command> [flags]``.

Exit status is 0 on success, 2 when a check ran and failed, and 1 on a
usage or input error.
"""

from __future__ import annotations

import argparse
import io
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import contour as ct
from . import generators as gen
from . import lab
from . import operators as ops
from . import resolvent as res
from . import semigroup as sg
from . import spectral as sp
from .reports import CheckReport, ConvergenceTable, dumps, fmt

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2
DEFAULT_SEED = 42

COMMANDS = ("expm", "resolvent", "converge", "check", "spectrum-map", "bromwich", "dunford", "lab", "suite")
EXPM_METHODS = ("oracle", "taylor", "dunford", "bromwich", "exp-formula", "euler", "perturbed-euler",
                "yosida", "chernoff", "trotter")
CHECKS = ("resolvent-identity", "neumann", "pseudo-resolvent", "hille-yosida", "growth-envelope",
          "dissipative", "lumer-phillips", "contraction-hy", "sectorial", "differentiable", "commuting",
          "chernoff-lemma", "taylor-remainder", "b-lambda", "bridge", "contour", "tk-equivalence")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    operator_spec: str | None = None
    params: dict = field(default_factory=dict)
    output_path: str | None = None
    format: str | None = None
    seed: int = DEFAULT_SEED


@dataclass
class Artifact:
    payload: dict
    csv: str | None = None
    ok: bool = True
    summary: str = ""
    written: bool = False


# -- parsing helpers --------------------------------------------------------

def _floats(text, name):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated numbers, got {text!r}") from None


def _ints(text, name):
    vals = _floats(text, name)
    if any(not v.is_integer() for v in vals):
        raise UsageError(f"--{name} expects integers, got {text!r}")
    return [int(v) for v in vals]


def _complexes(text, name):
    try:
        return [ops.parse_scalar(v) for v in str(text).split(";" if ";" in str(text) else ",") if v.strip()]
    except ops.OperatorError as exc:
        raise UsageError(f"--{name}: {exc}") from None


def _one(values, name):
    if len(values) != 1:
        raise UsageError(f"--{name} expects a single value")
    return values[0]


def _p(cfg, key, default=None, required=False):
    val = cfg.params.get(key)
    if val is None:
        if required:
            raise UsageError(f"{cfg.command} requires --{key.replace('_', '-')}")
        return default
    return val


def _op(cfg, required=True):
    if cfg.operator_spec is None:
        if required:
            raise UsageError(f"{cfg.command} requires --op")
        return None
    return ops.make_operator(cfg.operator_spec)


def _op2(cfg, required=True):
    spec = _p(cfg, "op2", required=required)
    return None if spec is None else ops.make_operator(spec)


def _t(cfg, default=None):
    raw = _p(cfg, "t", required=default is None)
    return default if raw is None else _one(_floats(raw, "t"), "t")


def _lam(cfg, default):
    raw = _p(cfg, "lambda")
    return default if raw is None else _one(_complexes(raw, "lambda"), "lambda")


def _shift_right(A, offset=1.0):
    return max(0.0, ops.spectrum(A).spectral_abscissa) + offset


# -- artifacts --------------------------------------------------------------

def _matrix_payload(m):
    m = np.asarray(m)
    return {"rows": m.shape[0], "cols": m.shape[1], "re": m.real.tolist(), "im": np.imag(m).tolist()}


def _matrix_csv(m):
    buf = io.StringIO()
    buf.write("row,col,re,im\n")
    for (i, j), z in np.ndenumerate(np.asarray(m, dtype=complex)):
        buf.write(f"{i},{j},{fmt(z.real)},{fmt(z.imag)}\n")
    return buf.getvalue()


def _matrix_artifact(cfg, m, extra=None, ok=True):
    payload = {"command": cfg.command, "operator": cfg.operator_spec, "matrix": _matrix_payload(m)}
    payload.update(extra or {})
    summary = f"{cfg.command}: {m.shape[0]}x{m.shape[1]} matrix, norm {np.linalg.norm(m, 2):.6e}"
    return Artifact(payload, _matrix_csv(m), ok, summary)


def _report_artifact(rep: CheckReport):
    return Artifact(rep.to_dict(), None, rep.ok, rep.summary())


def _table_artifact(table: ConvergenceTable):
    return Artifact(table.to_dict(), table.to_csv(), True, table.summary())


# -- commands ---------------------------------------------------------------

def cmd_expm(cfg):
    A = _op(cfg)
    t = _t(cfg)
    method = _p(cfg, "method", "oracle")
    n = _p(cfg, "n")
    n = None if n is None else _one(_ints(n, "n"), "n")

    def need_n():
        if n is None:
            raise UsageError(f"expm --method {method} requires --n")
        return n

    extra = {"method": method, "t": t}
    if method == "oracle":
        m = sg.expm_oracle(A, t)
    elif method == "taylor":
        m = sg.expm_taylor(A, t)
    elif method == "dunford":
        spec = _p(cfg, "contour")
        contour = ct.ContourSpec.parse(spec) if spec else ct.ContourSpec.circle(2 * ops.operator_norm(A) + 1)
        m = ct.dunford_exp(A, t, contour)
    elif method == "bromwich":
        return cmd_bromwich(cfg)
    elif method == "exp-formula":
        m = sg.exp_formula(A, t, need_n())
    elif method == "euler":
        m = sg.euler_product(A, t, need_n())
    elif method == "perturbed-euler":
        m = sg.perturbed_euler_product(A, t, need_n())
    elif method == "yosida":
        lam = _lam(cfg, None)
        if lam is None:
            raise UsageError("expm --method yosida requires --lambda")
        m = sg.expm_oracle(ops.from_matrix(sg.yosida_generator(A, lam)), t)
    elif method == "chernoff":
        m = sg.chernoff_product(sg.cayley_step(A), A, t, need_n())
    elif method == "trotter":
        m = sg.lie_trotter(A, _op2(cfg), t, need_n())
    else:
        raise UsageError(f"unknown expm method {method!r}; choose from {', '.join(EXPM_METHODS)}")
    if n is not None:
        extra["n"] = n
    return _matrix_artifact(cfg, m, extra)


def cmd_resolvent(cfg):
    A = _op(cfg)
    lam = _lam(cfg, None)
    if lam is None:
        raise UsageError("resolvent requires --lambda")
    method = _p(cfg, "method", "lu")
    if method == "lu":
        r = res.resolvent(A, lam)
        if not r.in_resolvent_set:
            payload = {"command": "resolvent", "operator": cfg.operator_spec, "lambda": lam,
                       "in_resolvent_set": False, "cond": r.cond}
            return Artifact(payload, None, False, f"resolvent: {lam} lies in the spectrum (cond {r.cond:.3e})")
        extra = {"lambda": lam, "in_resolvent_set": True, "cond": r.cond, "norm": r.norm_estimate}
        return _matrix_artifact(cfg, r.matrix, extra)
    if method == "neumann":
        r = res.neumann_resolvent(A, lam)
        return _matrix_artifact(cfg, r.matrix, {"lambda": lam, "terms": r.terms})
    raise UsageError("resolvent --method must be lu or neumann")


def cmd_converge(cfg):
    A = _op(cfg)
    method = _p(cfg, "method", required=True)
    ts = _floats(_p(cfg, "t", required=True), "t")
    ns = _floats(_p(cfg, "n", required=True), "n")
    if method != "yosida":
        ns = _ints(_p(cfg, "n"), "n")
    A2 = _op2(cfg, required=method == "trotter")
    return _table_artifact(sg.converge_table(method, A, ts, ns, A2=A2))


def _lambda_grid(cfg, A, count=12):
    raw = _p(cfg, "lambdas")
    if raw is not None:
        return _complexes(raw, "lambdas")
    return list(_shift_right(A, 0.0) + np.logspace(-1, 2, count))


def _check(cfg, name):
    A = _op(cfg)
    seed = cfg.seed
    if name == "resolvent-identity":
        base = _shift_right(A)
        return res.check_resolvent_identity(A, _lam(cfg, base), _one(_complexes(_p(cfg, "mu", str(base + 1) + "+1j"), "mu"), "mu"))
    if name == "neumann":
        lam = _lam(cfg, 1.5 * ops.operator_norm(A) + 1.0)
        approx = res.neumann_resolvent(A, lam)
        exact = res.resolvent_matrix(A, lam)
        rep = CheckReport("neumann-vs-lu")
        rep.add("||neumann - lu||", np.linalg.norm(approx.matrix - exact, 2), 1e-9 * max(1.0, np.linalg.norm(exact, 2)))
        rep.data["terms"] = approx.terms
        return rep
    if name == "pseudo-resolvent":
        lams = _lambda_grid(cfg, A, 4)
        return res.check_pseudo_resolvent(res.PseudoResolventFamily.from_operator(A, lams))
    if name == "hille-yosida":
        env = ops.estimate_growth_envelope(A, _t(cfg, 10.0))
        n_max = _one(_ints(_p(cfg, "n", "6"), "n"), "n")
        lams = _lambda_grid(cfg, A) if _p(cfg, "lambdas") else list(env.omega + np.logspace(-1, 2, 12))
        return res.check_hille_yosida_bounds(A, env, lams, n_max)
    if name == "growth-envelope":
        t_max = _t(cfg, 10.0)
        env = ops.estimate_growth_envelope(A, t_max)
        ts = np.linspace(0.0, t_max, 257)
        norms = [np.linalg.norm(sg.expm_oracle(A, t), 2) for t in ts]
        rep = CheckReport("growth-envelope")
        worst = max(n / env.bound(t) for t, n in zip(ts, norms))
        rep.add("max ||T(t)|| / (M exp(omega t)) on a refined grid", worst, 1 + 1e-6)
        rep.data.update(M=env.M, omega=env.omega, operator_norm=ops.operator_norm(A))
        return rep
    if name == "dissipative":
        d = gen.check_dissipative(A)
        rep = CheckReport("dissipative")
        rep.add("max Re<Ax,x>", d.inner_product_margin, gen.DISSIPATIVE_TOL)
        rep.add("criteria agree", float(not d.criteria_agree), 0.0)
        rep.add("range condition", float(not d.range_condition), 0.0)
        rep.data.update(norm_criterion_margin=d.norm_criterion_margin, norm_verdict=d.norm_verdict)
        rep.notes.extend(d.notes)
        return rep
    if name == "lumer-phillips":
        return gen.check_lumer_phillips(A)
    if name == "contraction-hy":
        n_max = _one(_ints(_p(cfg, "n", "6"), "n"), "n")
        return gen.check_contraction_hy(A, [l.real for l in map(complex, _lambda_grid(cfg, A))], n_max)
    if name == "sectorial":
        delta = _p(cfg, "delta")
        sr = gen.check_sectorial(A, delta=None if delta is None else float(delta))
        rep = CheckReport("sectorial", passed=sr.is_sectorial)
        rep.add("L variation over last four windows", sr.L_variation, 0.2)
        gs = sorted(sr.C_by_gamma)
        ratio = gs[1] / gs[0] if len(gs) > 1 else math.inf
        rep.add("C_line growth as gamma shrinks", sr.C_growth, 0.5 * ratio, ok=sr.C_growth < 0.5 * ratio)
        rep.data = sr.to_dict()
        rep.notes.extend(sr.notes)
        return rep
    if name == "differentiable":
        return gen.check_differentiable_identities(A, _t(cfg, 1.0), _one(_ints(_p(cfg, "n", "3"), "n"), "n"))
    if name == "commuting":
        return gen.check_commuting_bounded(A, _op2(cfg).to_dense(), seed=seed)
    if name == "chernoff-lemma":
        n = _one(_ints(_p(cfg, "n", "8"), "n"), "n")
        M = float(_p(cfg, "M", 1.0))
        N = float(_p(cfg, "N", 1.0))
        return sg.chernoff_lemma_check(A.to_dense(), n, M, N, probes=50, seed=seed)
    if name == "taylor-remainder":
        return sg.taylor_remainder_check(A, _t(cfg, 1.0), _one(_ints(_p(cfg, "n", "3"), "n"), "n"), seed=seed)
    if name == "b-lambda":
        return ct.b_lambda(A, _lam(cfg, 1.0 + 0.5j), _t(cfg, 1.0)).report
    if name == "bridge":
        B = _op2(cfg)
        q = _one(_ints(_p(cfg, "n", "32"), "n"), "n")
        lam = _lam(cfg, max(_shift_right(A), _shift_right(B)))
        return lab.bridge_identity_check(A, B, lam, _t(cfg, 1.0), q, seed=seed)
    if name == "contour":
        return ct.bromwich_oracle_check(A, _t(cfg, 1.0))
    if name == "tk-equivalence":
        fam = lab.parse_family(_p(cfg, "family", "perturb:p=1"), A, _op2(cfg, required=False), seed)
        return lab.check_tk_equivalence(fam, _lam(cfg, None), _t(cfg, 1.0), seed=seed)
    raise UsageError(f"unknown check {name!r}; choose from {', '.join(CHECKS)}")


def cmd_check(cfg):
    return _report_artifact(_check(cfg, cfg.params["name"]))


def cmd_spectrum_map(cfg):
    A = _op(cfg)
    kind = _p(cfg, "kind", "exp")
    if kind == "exp":
        m = sp.spectral_mapping_check(A, _t(cfg))
    elif kind == "derivative":
        m = sp.derivative_spectral_mapping_check(A, _t(cfg), _one(_ints(_p(cfg, "n", "1"), "n"), "n"))
    elif kind == "resolvent":
        m = sp.resolvent_spectrum_check(A, _lam(cfg, _shift_right(A) + 1j))
    else:
        raise UsageError("spectrum-map --kind must be exp, derivative or resolvent")
    payload = m.to_dict()
    info = ops.spectrum(A)
    payload.update(kind=kind, operator=cfg.operator_spec, eigenvalues=info.eigenvalues,
                   spectral_abscissa=info.spectral_abscissa, operator_norm=ops.operator_norm(A))
    summary = (f"spectrum-map ({kind}): {'PASS' if m.ok else 'FAIL'}, "
               f"bottleneck {m.max_pair_distance:.3e}, unmatched {m.unmatched}")
    return Artifact(payload, None, m.ok, summary)


def cmd_bromwich(cfg):
    A = _op(cfg)
    t = _t(cfg)
    a, Y, nodes = None, None, None
    spec = _p(cfg, "contour")
    if spec:
        c = ct.ContourSpec.parse(spec)
        if c.shape != "line":
            raise UsageError("bromwich needs a line contour")
        a, Y, nodes = c.params["a"], c.params.get("Y"), c.nodes
    if _p(cfg, "a") is not None:
        a = float(_p(cfg, "a"))
    if a is None:
        a = _shift_right(A)
    tol = float(_p(cfg, "tol", 1e-10))
    x = _p(cfg, "x")
    if x is not None:
        vec = np.array(_complexes(x, "x"))
        if vec.size != A.dim:
            raise UsageError(f"--x must have {A.dim} entries")
        out, info = ct.bromwich_time_integral(A, vec, t, a, Y, nodes, tol, full_output=True)
        out = out.reshape(-1, 1)
        kind = "time-integral"
    else:
        out, info = ct.bromwich_exp(A, t, a, Y, nodes, tol, full_output=True)
        kind = "exp"
    extra = {"method": "bromwich", "kind": kind, "t": t, "a": a, "Y": info.Y, "nodes": info.nodes,
             "tail_estimate": info.tail_estimate, "tail_bound": info.tail_bound, "validated": info.validated}
    art = _matrix_artifact(cfg, out, extra, ok=info.validated)
    art.summary += f", Y={info.Y:.4g}, tail estimate {info.tail_estimate:.3e}"
    return art


def cmd_dunford(cfg):
    A = _op(cfg)
    t = _t(cfg)
    spec = _p(cfg, "contour")
    contour = ct.ContourSpec.parse(spec) if spec else ct.ContourSpec.circle(2 * ops.operator_norm(A) + 1)
    if contour.shape != "circle":
        raise UsageError("dunford needs a circle contour")
    m = ct.dunford_exp(A, t, contour)
    return _matrix_artifact(cfg, m, {"method": "dunford", "t": t, "radius": contour.params["r"],
                                     "nodes": contour.nodes})


def cmd_lab(cfg):
    if cfg.params.get("experiment") != "trotter-kato":
        raise UsageError("lab supports the trotter-kato experiment")
    spec = _p(cfg, "family", "perturb:p=1")
    fam = lab.parse_family(spec, _op(cfg, required=False), _op2(cfg, required=False), cfg.seed)
    lam = _lam(cfg, None)
    t0 = _t(cfg, 1.0)
    rt, st, rep = lab.family_report(fam, lam, t0, seed=cfg.seed)
    payload = rep.to_dict()
    payload["family"] = spec
    payload["labels"] = fam.labels
    buf = io.StringIO()
    buf.write("n,resolvent_error,semigroup_error\n")
    for (n, e1), (_, e2) in zip(rt.rows, st.rows):
        buf.write(f"{fmt(n)},{fmt(e1)},{fmt(e2)}\n")
    return Artifact(payload, buf.getvalue(), rep.ok, "\n".join([rt.summary(), st.summary(), rep.summary()]))


# -- suite ------------------------------------------------------------------

# one invocation per operation; run twice by the determinism acceptance test
CLI_SUITE = [
    ("expm_oracle.json", ["expm", "--op", "jordan:lambda=-1,n=3", "--t", "2"]),
    ("expm_taylor.csv", ["expm", "--op", "zero:n=3", "--t", "5", "--method", "taylor"]),
    ("expm_yosida.json", ["expm", "--op", "diag:-1,-2", "--t", "1", "--method", "yosida", "--lambda", "64"]),
    ("expm_trotter.json", ["expm", "--op", "diag:-1,-2", "--op2", "rotation2", "--t", "1",
                           "--method", "trotter", "--n", "16"]),
    ("resolvent_lu.json", ["resolvent", "--op", "rotation2", "--lambda", "1+1j"]),
    ("resolvent_neumann.json", ["resolvent", "--op", "diag:-1,-2", "--lambda", "3", "--method", "neumann"]),
    ("converge_exp_formula.csv", ["converge", "--method", "exp-formula", "--op", "diag:-1", "--t", "1",
                                  "--n", "10,20,40,80"]),
    ("converge_euler.csv", ["converge", "--method", "euler", "--op", "rotation2", "--t", "1", "--n", "8,16,32,64"]),
    ("converge_perturbed_euler.csv", ["converge", "--method", "perturbed-euler", "--op", "diag:-1,-2",
                                      "--t", "1", "--n", "8,16,32,64"]),
    ("converge_yosida.csv", ["converge", "--method", "yosida", "--op", "diag:-1,-2", "--t", "0,0.5,1",
                             "--n", "8,16,32,64"]),
    ("converge_trotter.csv", ["converge", "--method", "trotter", "--op", "nilpotent_shift:n=2",
                              "--op2", "file:-", "--t", "1", "--n", "4,8,16,32"]),
    ("converge_chernoff.csv", ["converge", "--method", "chernoff", "--op", "random_dissipative:n=6,seed=1",
                               "--t", "1", "--n", "8,16,32,64"]),
    ("dunford.json", ["dunford", "--op", "laplacian1d:n=6,h=1", "--t", "1", "--contour", "circle:r=9,n=64"]),
    ("bromwich.json", ["bromwich", "--op", "diag:-1", "--t", "1", "--contour", "line:a=0.5,Y=200,n=2000"]),
    ("bromwich_integral.json", ["bromwich", "--op", "rotation2", "--t", "3.141592653589793", "--a", "0.5",
                                "--x", "1,0"]),
    ("spectrum_exp.json", ["spectrum-map", "--op", "jordan:lambda=-1,n=3", "--t", "2"]),
    ("spectrum_derivative.json", ["spectrum-map", "--op", "rotation2", "--t", "3.141592653589793",
                                  "--kind", "derivative", "--n", "2"]),
    ("spectrum_resolvent.json", ["spectrum-map", "--op", "jordan:lambda=0,n=2", "--kind", "resolvent",
                                 "--lambda", "1+1j"]),
    ("lab_perturb.csv", ["lab", "trotter-kato", "--family", "perturb:p=1,seed=2"]),
    ("lab_yosida.json", ["lab", "trotter-kato", "--family", "yosida"]),
    ("lab_refine.json", ["lab", "trotter-kato", "--family", "laplacian-refine:levels=5"]),
] + [
    (f"check_{name}.json", ["check", name] + args)
    for name, args in [
        ("resolvent-identity", ["--op", "random_dissipative:n=6,seed=1", "--lambda", "0.5+2j", "--mu=-0.3+1j"]),
        ("neumann", ["--op", "random_bounded:n=5,seed=3,cap=2", "--lambda", "2.5"]),
        ("pseudo-resolvent", ["--op", "laplacian1d:n=6,h=1"]),
        ("hille-yosida", ["--op", "jordan:lambda=-1,n=3"]),
        ("growth-envelope", ["--op", "advection1d:n=5,h=1"]),
        ("dissipative", ["--op", "laplacian1d:n=16,h=0.0588"]),
        ("lumer-phillips", ["--op", "laplacian1d:n=16,h=0.0588"]),
        ("contraction-hy", ["--op", "rotation2"]),
        ("sectorial", ["--op", "laplacian1d:n=16,h=0.0588"]),
        ("differentiable", ["--op", "rotation2", "--t", "1"]),
        ("commuting", ["--op", "diag:-1,-2", "--op2", "diag:3,4"]),
        ("chernoff-lemma", ["--op", "random_bounded:n=4,seed=5,cap=1", "--n", "8"]),
        ("taylor-remainder", ["--op", "random_dissipative:n=6,seed=1", "--t", "1", "--n", "3"]),
        ("b-lambda", ["--op", "rotation2", "--lambda", "1+0.5j", "--t", "1"]),
        ("bridge", ["--op", "random_dissipative:n=5,seed=9", "--op2", "random_dissipative:n=5,seed=10",
                    "--lambda", "1+0.5j", "--t", "0.8"]),
        ("contour", ["--op", "random_dissipative:n=6,seed=1", "--t", "1"]),
        ("tk-equivalence", ["--op", "diag:-1,-2", "--op2", "rotation2", "--family", "perturb:p=2"]),
    ]
]


def cmd_suite(cfg):
    out_dir = cfg.output_path
    if not out_dir:
        raise UsageError("suite requires --out DIR")
    os.makedirs(out_dir, exist_ok=True)
    # the Lie-Trotter partner (transposed shift) has no generator spec; it is
    # written next to the outputs and passed as a matrix file
    lower = os.path.join(out_dir, "lower_shift.csv")
    with open(lower, "w") as fh:
        fh.write("0,0\n1,0\n")
    rows = []
    worst = EXIT_OK
    for fname, argv in CLI_SUITE:
        argv = [f"file:{lower}" if a == "file:-" else a for a in argv]
        code = main(argv + ["--out", os.path.join(out_dir, fname), "--seed", str(cfg.seed), "--quiet"])
        rows.append({"file": fname, "argv": argv, "exit": code})
        if code == EXIT_USAGE:
            worst = EXIT_USAGE
        elif code == EXIT_FAILED and worst == EXIT_OK:
            worst = EXIT_FAILED
    # paths are made relative so the index itself is location independent
    for r in rows:
        r["argv"] = [a.replace(out_dir, "<out>") for a in r["argv"]]
    payload = {"command": "suite", "seed": cfg.seed, "runs": rows}
    summary = "\n".join(f"  exit {r['exit']}  {r['file']}" for r in rows)
    with open(os.path.join(out_dir, "index.json"), "w") as fh:
        fh.write(dumps(payload))
    return Artifact(payload, None, worst == EXIT_OK, f"suite: {len(rows)} runs\n{summary}", written=True)


HANDLERS = {
    "expm": cmd_expm,
    "resolvent": cmd_resolvent,
    "converge": cmd_converge,
    "check": cmd_check,
    "spectrum-map": cmd_spectrum_map,
    "bromwich": cmd_bromwich,
    "dunford": cmd_dunford,
    "lab": cmd_lab,
    "suite": cmd_suite,
}


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--op", help="operator spec, e.g. 'laplacian1d:n=16,h=0.0588' or file:path.csv")
    common.add_argument("--op2", help="second operator (splitting partner, perturbation, commuting F)")
    common.add_argument("--t", help="time, or comma-separated times for converge")
    common.add_argument("--n", help="step count(s), power or quadrature nodes")
    common.add_argument("--method", help="approximation method")
    common.add_argument("--contour", help="'circle:r=3,n=64' or 'line:a=0.5,Y=200,n=2000'")
    common.add_argument("--lambda", dest="lambda_", help="complex shift, e.g. 1+0.5j")
    common.add_argument("--mu", help="second complex shift")
    common.add_argument("--lambdas", help="list of shifts, separated by ';' or ','")
    common.add_argument("--a", help="abscissa of the Bromwich line")
    common.add_argument("--x", help="vector for the Bromwich time integral")
    common.add_argument("--tol", help="tolerance for automatic truncation")
    common.add_argument("--delta", help="sector half-angle excess for the sectorial check")
    common.add_argument("--kind", help="spectrum-map variant: exp, derivative, resolvent")
    common.add_argument("--family", help="lab family, e.g. 'perturb:p=1,seed=2', 'yosida'")
    common.add_argument("--M", help="power bound constant for the Chernoff lemma")
    common.add_argument("--N", help="power growth factor for the Chernoff lemma")
    common.add_argument("--out", help="artifact path (directory for suite)")
    common.add_argument("--format", choices=("csv", "json"), help="artifact format")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--quiet", action="store_true", help="suppress the stdout summary")

    parser = _Parser(prog="semigroup-lab", description="Numerical laboratory for operator semigroups.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "check":
            p.add_argument("name", choices=CHECKS)
        elif name == "lab":
            p.add_argument("experiment", choices=("trotter-kato",))
    return parser


def parse_config(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    if args.command is None:
        raise UsageError("no command given")
    params = {k: v for k, v in vars(args).items()
              if k not in ("command", "op", "out", "format", "seed", "quiet")}
    params["lambda"] = params.pop("lambda_")
    params["quiet"] = args.quiet
    return RunConfig(args.command, args.op, params, args.out, args.format, args.seed)


def _write(cfg: RunConfig, art: Artifact):
    fmt_ = cfg.format
    if fmt_ is None:
        ext = os.path.splitext(cfg.output_path or "")[1].lower()
        fmt_ = "csv" if ext == ".csv" or (not ext and art.csv is not None and cfg.command == "converge") else "json"
    if fmt_ == "csv" and art.csv is None:
        raise UsageError(f"{cfg.command} output has no CSV form; use --format json")
    text = art.csv if fmt_ == "csv" else dumps(art.payload)
    if cfg.output_path:
        with open(cfg.output_path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(cfg: RunConfig) -> int:
    art = HANDLERS[cfg.command](cfg)
    if not art.written:
        _write(cfg, art)
    if not cfg.params.get("quiet"):
        stream = sys.stdout if cfg.output_path else sys.stderr
        stream.write(art.summary.rstrip() + "\n")
    return EXIT_OK if art.ok else EXIT_FAILED


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        return run(cfg)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (ops.OperatorError, res.ShiftError, ValueError, KeyError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except ArithmeticError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_FAILED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
