"""Trotter-Kato experiments: resolvent versus semigroup convergence of generator sequences."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .operators import (OperatorHandle, diag, from_matrix, laplacian1d, make_operator,
                        nilpotent_shift, random_bounded, rotation2, spectrum)
from .quadrature import gauss_legendre
from .reports import CheckReport, ConvergenceTable
from .resolvent import ShiftError, resolvent
from .semigroup import expm_oracle, yosida_generator

T_GRID_SIZE = 33
QUAD_FLOOR = 1e-10


def worker_count() -> int:
    """Thread cap from ``SEMIGROUP_LAB_THREADS`` (0 or unset means automatic)."""
    raw = os.environ.get("SEMIGROUP_LAB_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"SEMIGROUP_LAB_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("SEMIGROUP_LAB_THREADS must be >= 0")
    return n if n > 0 else min(8, os.cpu_count() or 1)


def _ordered_map(fn, items):
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class ContinuumLimit:
    """Limit known only through its action on sampled probe functions.

    ``sample(dim)`` returns the grid points and probe columns for a member
    of size ``dim``; ``resolvent(lam, x)`` and ``semigroup(t, x)`` return the
    exact limit evaluated on the same grid. Errors are reported relative to
    the probe norm, so the grid weight of the discrete norm cancels.
    """

    sample: Callable[[int], np.ndarray]
    resolvent: Callable[[complex, np.ndarray], np.ndarray]
    semigroup: Callable[[float, np.ndarray], np.ndarray]
    label: str = "continuum"


@dataclass
class GeneratorSequence:
    """Generators ``A_n`` indexed by ``params`` together with their limit.

    ``params`` holds the index used as the abscissa of convergence tables
    (``n`` for perturbations, ``lam`` for Yosida, ``1/h`` for grids).
    """

    items: list[OperatorHandle]
    limit: OperatorHandle | ContinuumLimit
    labels: list[str] = field(default_factory=list)
    params: list[float] = field(default_factory=list)
    name: str = "sequence"

    def __post_init__(self):
        if not self.items:
            raise ValueError("empty generator sequence")
        if not self.labels:
            self.labels = [f"{self.name}[{k}]" for k in range(len(self.items))]
        if not self.params:
            self.params = list(range(1, len(self.items) + 1))
        if len(self.labels) != len(self.items) or len(self.params) != len(self.items):
            raise ValueError("labels/params must match items")
        if isinstance(self.limit, OperatorHandle):
            dims = {a.dim for a in self.items} | {self.limit.dim}
            if len(dims) != 1:
                raise ValueError(f"dimension mismatch in sequence: {sorted(dims)}")

    @property
    def refinement(self) -> bool:
        return isinstance(self.limit, ContinuumLimit)

    def abscissa(self) -> float:
        vals = [spectrum(a).spectral_abscissa for a in self.items]
        if not self.refinement:
            vals.append(spectrum(self.limit).spectral_abscissa)
        return float(max(vals))


def _probe_block(dim, probes, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((dim, probes)) + 1j * rng.standard_normal((dim, probes))


# -- families ---------------------------------------------------------------

def constant_family(A: OperatorHandle, ns=(1, 2, 4, 8)) -> GeneratorSequence:
    return GeneratorSequence([A] * len(ns), A, [f"A ({n})" for n in ns], list(ns), "constant")


def perturbation_family(A: OperatorHandle, B: OperatorHandle, p: float = 1.0,
                        ns=(8, 16, 32, 64, 128, 256)) -> GeneratorSequence:
    """``A_n = A + n^{-p} B``."""
    a, b = A.to_dense(), B.to_dense()
    if a.shape != b.shape:
        raise ValueError("A and B must have equal dimension")
    items = [from_matrix(a + b / float(n) ** p, f"A+B/{n}^{p:g}") for n in ns]
    return GeneratorSequence(items, A, [it.label for it in items], [float(n) for n in ns], f"perturb p={p:g}")


def yosida_family(A: OperatorHandle, ks=range(3, 9)) -> GeneratorSequence:
    """``A_k = yosida_generator(A, 2^k)``; the table abscissa is ``2^k``."""
    ks = list(ks)
    items = [from_matrix(yosida_generator(A, 2.0**k), f"A_(2^{k})") for k in ks]
    return GeneratorSequence(items, A, [it.label for it in items], [2.0**k for k in ks], "yosida")


def nilpotent_offset_family(A: OperatorHandle, ns=(8, 16, 32, 64, 128)) -> GeneratorSequence:
    """``A_n = A + N`` with a fixed unit-norm nilpotent ``N``: no convergence to ``A``."""
    offset = A.to_dense() + nilpotent_shift(A.dim).to_dense()
    items = [from_matrix(offset, "A+N") for _ in ns]
    return GeneratorSequence(items, A, [f"A+N ({n})" for n in ns], [float(n) for n in ns], "nilpotent-offset")


def _sine_modes(x, modes, coeffs):
    return np.sin(np.pi * np.outer(x, modes)) @ coeffs


def laplacian_refine_family(levels: int = 5, modes=(1, 2, 3), probes: int = 3,
                            seed: int = 42) -> GeneratorSequence:
    """Dirichlet Laplacians on grids ``h = 2^{-(k+2)}`` against the continuum heat operator.

    Probes are combinations of ``sin(m pi x)``; these are exact eigenvectors
    of both the grid and continuum operators, so the limit is in closed form.
    """
    if levels < 3:
        raise ValueError("need at least 3 levels to estimate an order")
    modes = np.asarray(modes, dtype=float)
    coeffs = np.random.default_rng(seed).standard_normal((modes.size, probes))
    mu = -(np.pi * modes) ** 2

    def grid(dim):
        return np.arange(1, dim + 1) / (dim + 1.0)

    def sample(dim):
        return _sine_modes(grid(dim), modes, coeffs).astype(complex)

    def limit_resolvent(lam, x):
        dim = x.shape[0]
        return _sine_modes(grid(dim), modes, coeffs / (lam - mu)[:, None])

    def limit_semigroup(t, x):
        dim = x.shape[0]
        return _sine_modes(grid(dim), modes, coeffs * np.exp(mu * t)[:, None])

    limit = ContinuumLimit(sample, limit_resolvent, limit_semigroup, "dirichlet heat on (0,1)")
    dims = [2 ** (k + 2) - 1 for k in range(levels)]
    items = [laplacian1d(d, 1.0 / (d + 1)) for d in dims]
    return GeneratorSequence(items, limit, [f"laplacian1d n={d}" for d in dims],
                             [float(d + 1) for d in dims], "laplacian-refine")


def parse_family(spec: str, A: OperatorHandle | None = None, B: OperatorHandle | None = None,
                 seed: int = 42) -> GeneratorSequence:
    """Build a family from ``"perturb:p=1,seed=2"``, ``"yosida"``, ``"laplacian-refine:levels=5"``,
    ``"constant"`` or ``"nilpotent"``."""
    name, _, rest = spec.strip().partition(":")
    opts = {}
    for part in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, val = part.partition("=")
        if not eq:
            raise ValueError(f"family option {part!r} must be key=value")
        opts[key.strip()] = val.strip()
    if A is None and name != "laplacian-refine":
        A = diag([-1.0, -2.0])

    def pop(key, cast, default):
        return cast(opts.pop(key)) if key in opts else default

    if name == "perturb":
        p = pop("p", float, 1.0)
        s = pop("seed", int, seed)
        if B is None:
            B = rotation2() if A.dim == 2 else random_bounded(A.dim, s, 1.0)
        fam = perturbation_family(A, B, p)
    elif name == "yosida":
        fam = yosida_family(A, range(pop("kmin", int, 3), pop("kmax", int, 8) + 1))
    elif name == "laplacian-refine":
        fam = laplacian_refine_family(pop("levels", int, 5), seed=pop("seed", int, seed))
    elif name == "constant":
        fam = constant_family(A)
    elif name == "nilpotent":
        fam = nilpotent_offset_family(A)
    else:
        raise ValueError(f"unknown family {name!r}")
    if opts:
        raise ValueError(f"unknown options for family {name!r}: {sorted(opts)}")
    return fam


# -- tables -----------------------------------------------------------------

def _default_lambda(seq: GeneratorSequence) -> float:
    return max(0.0, seq.abscissa()) + 1.0


def resolvent_convergence_table(seq: GeneratorSequence, lam: complex | None = None,
                                probes: int = 8, seed: int = 42) -> ConvergenceTable:
    """Rows ``(n, max_x |R(lam; A_n) x - R(lam; A) x| / |x|)``."""
    lam = complex(_default_lambda(seq) if lam is None else lam)
    if not lam.real > seq.abscissa():
        raise ShiftError(f"Re lambda = {lam.real} must exceed the growth bound of every member")

    def row(idx):
        A_n = seq.items[idx]
        if seq.refinement:
            x = seq.limit.sample(A_n.dim)
            ref = seq.limit.resolvent(lam, x)
        else:
            x = _probe_block(A_n.dim, probes, seed)
            r_lim = resolvent(seq.limit, lam)
            if not r_lim.in_resolvent_set:
                raise ShiftError(f"{lam} lies in the spectrum of the limit")
            ref = r_lim.action(x)
        r_n = resolvent(A_n, lam)
        if not r_n.in_resolvent_set:
            raise ShiftError(f"{lam} lies in the spectrum of {seq.labels[idx]}")
        err = np.linalg.norm(r_n.action(x) - ref, axis=0) / np.linalg.norm(x, axis=0)
        return seq.params[idx], float(err.max())

    rows = _ordered_map(row, range(len(seq.items)))
    return ConvergenceTable(rows, f"{seq.name}: R(lam; A_n) x -> R(lam; A) x, lam={lam:g}")


def semigroup_convergence_table(seq: GeneratorSequence, t0: float = 1.0, t_grid_size: int = T_GRID_SIZE,
                                probes: int = 8, seed: int = 42) -> ConvergenceTable:
    """Rows ``(n, max over t in [0, t0] and probes of |T_n(t) x - T(t) x| / |x|)``."""
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    ts = np.linspace(0.0, t0, t_grid_size)

    def row(idx):
        A_n = seq.items[idx]
        if seq.refinement:
            x = seq.limit.sample(A_n.dim)
        else:
            x = _probe_block(A_n.dim, probes, seed)
        nx = np.linalg.norm(x, axis=0)
        worst = 0.0
        for t in ts:
            ref = seq.limit.semigroup(t, x) if seq.refinement else expm_oracle(seq.limit, t) @ x
            err = np.linalg.norm(expm_oracle(A_n, t) @ x - ref, axis=0) / nx
            worst = max(worst, float(err.max()))
        return seq.params[idx], worst

    rows = _ordered_map(row, range(len(seq.items)))
    return ConvergenceTable(rows, f"{seq.name}: sup_[0,{t0:g}] |T_n(t) x - T(t) x|")


def check_tk_equivalence(seq: GeneratorSequence, lam: complex | None = None, t0: float = 1.0,
                         probes: int = 8, seed: int = 42) -> CheckReport:
    """Both convergence tables must agree: errors within a factor 100 and orders within 0.3.

    A sequence where neither table decreases passes vacuously and carries
    a ``no-convergence`` note.
    """
    rt = resolvent_convergence_table(seq, lam, probes, seed)
    st = semigroup_convergence_table(seq, t0, T_GRID_SIZE, probes, seed)
    rep = CheckReport("trotter-kato")
    rep.data = {"resolvent": rt.to_dict(), "semigroup": st.to_dict()}
    if rt.exact and st.exact:
        rep.add("max error (both exact)", max(rt.errors.max(), st.errors.max()), 1e-13)
        rep.notes.append("constant sequence: both tables vanish")
        return rep
    re, se = rt.errors, st.errors
    with np.errstate(divide="ignore"):
        ratio = np.maximum(re, se) / np.maximum(np.minimum(re, se), 1e-300)
    rep.add("max error ratio", float(ratio.max()), 100.0)
    ro, so = rt.empirical_order, st.empirical_order
    stagnant = all(o is not None and abs(o) < 0.2 for o in (ro, so))
    if stagnant:
        rep.notes.append("no-convergence: neither table decreases")
        rep.data["no_convergence"] = True
        return rep
    if ro is None or so is None:
        rep.add("order difference", float("inf"), 0.3)
        rep.notes.append("empirical order undefined for one table")
    else:
        rep.add("order difference", abs(ro - so), 0.3)
    rep.data["no_convergence"] = False
    return rep


# -- bridge identity --------------------------------------------------------

def _bridge_sides(A, B, lam, t, q, x):
    ra, rb = resolvent(A, lam), resolvent(B, lam)
    if not (ra.in_resolvent_set and rb.in_resolvent_set):
        raise ShiftError(f"{lam} must lie in both resolvent sets")
    left = rb.action((expm_oracle(A, t) - expm_oracle(B, t)) @ ra.action(x))
    diff = ra.matrix - rb.matrix
    s, w = gauss_legendre(0.0, t, q)
    right = sum(wi * (expm_oracle(B, t - si) @ (diff @ (expm_oracle(A, si) @ x))) for si, wi in zip(s, w))
    return left, right


def bridge_residual(A: OperatorHandle, B: OperatorHandle, lam: complex, t: float, quad_points: int,
                    probes: int = 5, seed: int = 42) -> float:
    """``max_x |left - right| / |x|`` for the resolvent-difference identity."""
    if A.dim != B.dim:
        raise ValueError("A and B must have equal dimension")
    x = _probe_block(A.dim, probes, seed)
    left, right = _bridge_sides(A, B, complex(lam), float(t), quad_points, x)
    return float((np.linalg.norm(left - right, axis=0) / np.linalg.norm(x, axis=0)).max())


def doubling_profile(residual_fn: Callable[[int], float], q0: int = 1, doublings: int = 6):
    """Residuals at ``q0, 2 q0, ...`` and whether each doubling above the floor gains 4x."""
    qs = [q0 * 2**k for k in range(doublings + 1)]
    res = [residual_fn(q) for q in qs]
    ok = all(r1 <= max(r0 / 4.0, QUAD_FLOOR) for r0, r1 in zip(res, res[1:]))
    return qs, res, ok


def bridge_identity_check(A: OperatorHandle, B: OperatorHandle, lam: complex, t: float,
                          quad_points: int = 32, probes: int = 5, seed: int = 42) -> CheckReport:
    """``R(lam;B)[T(t) - S(t)]R(lam;A) x = int_0^t S(t-s)[R(lam;A) - R(lam;B)]T(s) x ds``.

    ``T`` and ``S`` are generated by ``A`` and ``B``. Raises
    ``ArithmeticError`` if the tolerance is missed and doubling the
    quadrature does not help.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    res = bridge_residual(A, B, lam, t, quad_points, probes, seed)
    rep = CheckReport("bridge-identity")
    rep.add("left - right", res, 1e-8)
    rep.data = {"lambda": complex(lam), "t": float(t), "quad_points": quad_points}
    if not rep.ok:
        res2 = bridge_residual(A, B, lam, t, 2 * quad_points, probes, seed)
        if not res2 < res:
            raise ArithmeticError("bridge quadrature does not converge under doubling")
        rep.notes.append(f"residual at {2 * quad_points} nodes: {res2:.3e}")
    return rep


def family_report(seq: GeneratorSequence, lam=None, t0: float = 1.0, probes: int = 8, seed: int = 42):
    """Both tables plus the equivalence verdict, for the CLI."""
    rep = check_tk_equivalence(seq, lam, t0, probes, seed)
    return (resolvent_convergence_table(seq, lam, probes, seed),
            semigroup_convergence_table(seq, t0, T_GRID_SIZE, probes, seed), rep)


__all__ = [
    "ContinuumLimit", "GeneratorSequence", "constant_family", "perturbation_family", "yosida_family",
    "nilpotent_offset_family", "laplacian_refine_family", "parse_family", "resolvent_convergence_table",
    "semigroup_convergence_table", "check_tk_equivalence", "bridge_residual", "bridge_identity_check",
    "doubling_profile", "family_report", "worker_count", "make_operator",
]
