"""Finite-dimensional operators, norms, spectra and growth envelopes.

Every operator is complex-valued. Dense operators carry their matrix;
matrix-free operators carry an ``apply`` and, where cheap, a shifted
solver ``(lam, b) -> (lam I - A)^{-1} b``.
"""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse.linalg


DENSIFY_WARN_DIM = 512
DENSIFY_MAX_DIM = 2048


class OperatorError(ValueError):
    """Raised for malformed operator input."""


@dataclass(frozen=True, eq=False)
class OperatorHandle:
    dim: int
    kind: str
    apply: Callable[[np.ndarray], np.ndarray]
    solve_shifted: Callable[[complex, np.ndarray], np.ndarray] | None = None
    dense_data: np.ndarray | None = None
    apply_adjoint: Callable[[np.ndarray], np.ndarray] | None = None
    label: str = ""
    is_real: bool = False

    def __post_init__(self):
        if self.dim <= 0:
            raise OperatorError("dimension must be positive")
        if self.kind not in ("dense", "matrix_free"):
            raise OperatorError(f"unknown operator kind {self.kind!r}")
        if (self.kind == "dense") != (self.dense_data is not None):
            raise OperatorError("dense_data must be present iff kind == 'dense'")

    def __repr__(self):
        return f"OperatorHandle({self.label or self.kind}, dim={self.dim})"

    def to_dense(self) -> np.ndarray:
        """Return the matrix, densifying a matrix-free operator column by column."""
        if self.dense_data is not None:
            return self.dense_data
        if self.dim > DENSIFY_MAX_DIM:
            raise OperatorError(f"refusing to densify dim {self.dim} > {DENSIFY_MAX_DIM}")
        if self.dim > DENSIFY_WARN_DIM:
            warnings.warn(f"densifying matrix-free operator of dim {self.dim}", stacklevel=2)
        return np.asarray(self.apply(np.eye(self.dim, dtype=complex)), dtype=complex)


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    spectral_radius: float
    spectral_abscissa: float


@dataclass(frozen=True)
class GrowthEnvelope:
    """A certified pair ``(M, omega)`` with ``||T(t)|| <= M exp(omega t)`` on ``sample_grid``."""

    M: float
    omega: float
    sample_grid: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def bound(self, t):
        return self.M * np.exp(self.omega * np.asarray(t, dtype=float))

    def certifies(self, t, norms, slack=1e-9) -> bool:
        return bool(np.all(np.asarray(norms) <= self.bound(t) * (1 + slack)))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def from_matrix(matrix, label: str = "matrix") -> OperatorHandle:
    """Wrap a square matrix as a dense operator."""
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise OperatorError(f"operator matrix must be square, got shape {m.shape}")
    if m.shape[0] == 0:
        raise OperatorError("dimension must be positive")
    if not np.all(np.isfinite(m)):
        raise OperatorError("operator matrix contains NaN or infinite entries")
    data = _frozen(m)
    is_real = bool(np.all(data.imag == 0))

    def apply(x):
        return data @ np.asarray(x, dtype=complex)

    def apply_adjoint(x):
        return data.conj().T @ np.asarray(x, dtype=complex)

    return OperatorHandle(
        dim=data.shape[0], kind="dense", apply=apply, dense_data=data,
        apply_adjoint=apply_adjoint, label=label, is_real=is_real,
    )


def _check_n(n):
    if int(n) != n or n <= 0:
        raise OperatorError(f"dimension must be a positive integer, got {n}")
    return int(n)


def zero(n: int) -> OperatorHandle:
    n = _check_n(n)
    return from_matrix(np.zeros((n, n)), f"zero({n})")


def identity(n: int) -> OperatorHandle:
    n = _check_n(n)
    return from_matrix(np.eye(n), f"identity({n})")


def diag(values) -> OperatorHandle:
    values = np.atleast_1d(np.asarray(values, dtype=complex))
    if values.size == 0:
        raise OperatorError("diag needs at least one value")
    label = "diag(" + ",".join(f"{v.real:g}" if v.imag == 0 else f"{v:g}" for v in values) + ")"
    return from_matrix(np.diag(values), label)


def nilpotent_shift(n: int) -> OperatorHandle:
    n = _check_n(n)
    return from_matrix(np.eye(n, k=1), f"nilpotent_shift({n})")


def jordan(lam: complex, n: int) -> OperatorHandle:
    n = _check_n(n)
    return from_matrix(lam * np.eye(n) + np.eye(n, k=1), f"jordan({lam:g},{n})")


def rotation2() -> OperatorHandle:
    return from_matrix(np.array([[0.0, 1.0], [-1.0, 0.0]]), "rotation2")


def laplacian1d(n: int, h: float) -> OperatorHandle:
    """Dirichlet second difference ``(1/h^2) tridiag(1, -2, 1)``, matrix-free.

    The shifted solve is a banded (tridiagonal) factorization.
    """
    n = _check_n(n)
    if not h > 0:
        raise OperatorError("grid spacing h must be positive")
    c = 1.0 / (h * h)

    def apply(x):
        x = np.asarray(x, dtype=complex)
        y = -2.0 * x
        y[1:] += x[:-1]
        y[:-1] += x[1:]
        return c * y

    def solve_shifted(lam, b):
        ab = np.empty((3, n), dtype=complex)
        ab[0, :] = -c
        ab[1, :] = lam + 2.0 * c
        ab[2, :] = -c
        return scipy.linalg.solve_banded((1, 1), ab, np.asarray(b, dtype=complex))

    return OperatorHandle(
        dim=n, kind="matrix_free", apply=apply, solve_shifted=solve_shifted,
        apply_adjoint=apply, label=f"laplacian1d({n},{h:g})", is_real=True,
    )


def laplacian1d_eigenvalues(n: int, h: float) -> np.ndarray:
    """Closed-form Dirichlet eigenvalues ``-(4/h^2) sin^2(k pi / (2(n+1)))``."""
    k = np.arange(1, n + 1)
    return -(4.0 / h**2) * np.sin(k * np.pi / (2 * (n + 1))) ** 2


def advection1d(n: int, h: float) -> OperatorHandle:
    """First-order upwind ``-d/dx`` with zero inflow; dissipative and non-normal."""
    n = _check_n(n)
    if not h > 0:
        raise OperatorError("grid spacing h must be positive")
    m = (-np.eye(n) + np.eye(n, k=-1)) / h
    return from_matrix(m, f"advection1d({n},{h:g})")


def random_dissipative(n: int, seed: int = 0) -> OperatorHandle:
    """Real skew part minus a positive definite part, so ``Re<Ax,x> < 0``."""
    n = _check_n(n)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n)) / math.sqrt(n)
    b = rng.standard_normal((n, n)) / math.sqrt(n)
    m = (g - g.T) - b @ b.T / 2 - 0.05 * np.eye(n)
    return from_matrix(m, f"random_dissipative({n},{seed})")


def random_bounded(n: int, seed: int = 0, norm_cap: float = 1.0) -> OperatorHandle:
    """Gaussian matrix rescaled to spectral norm ``norm_cap``."""
    n = _check_n(n)
    if not norm_cap > 0:
        raise OperatorError("norm_cap must be positive")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    g *= norm_cap / np.linalg.norm(g, 2)
    return from_matrix(g, f"random_bounded({n},{seed},{norm_cap:g})")


GENERATORS = {
    "zero": (zero, ["n"]),
    "identity": (identity, ["n"]),
    "nilpotent_shift": (nilpotent_shift, ["n"]),
    "jordan": (jordan, ["lambda", "n"]),
    "rotation2": (rotation2, []),
    "laplacian1d": (laplacian1d, ["n", "h"]),
    "advection1d": (advection1d, ["n", "h"]),
    "random_dissipative": (random_dissipative, ["n", "seed"]),
    "random_bounded": (random_bounded, ["n", "seed", "cap"]),
}
_INT_PARAMS = {"n", "seed"}


def parse_scalar(text: str) -> complex:
    t = text.strip().replace(" ", "")
    if not t:
        raise OperatorError("empty number")
    try:
        return complex(float(t))
    except ValueError:
        pass
    try:
        return complex(t.replace("i", "j"))
    except ValueError:
        raise OperatorError(f"cannot parse number {text!r}") from None


def _real(z: complex) -> float | complex:
    return z.real if z.imag == 0 else z


def parse_generator_spec(spec: str) -> OperatorHandle:
    """Build an operator from a string like ``"laplacian1d:n=64,h=0.015625"``.

    ``diag`` takes a bare comma-separated value list (``"diag:1,-3"``);
    other generators accept ``key=value`` pairs or positional values in
    the order of their parameter list.
    """
    name, _, rest = spec.strip().partition(":")
    name = name.strip()
    if name == "diag":
        values = [parse_scalar(v) for v in rest.split(",") if v.strip()]
        return diag(values)
    if name not in GENERATORS:
        raise OperatorError(f"unknown operator generator {name!r}")
    fn, params = GENERATORS[name]
    kwargs = {}
    for pos, item in enumerate(p for p in rest.split(",") if p.strip()):
        if "=" in item:
            key, _, val = item.partition("=")
            key = key.strip()
        else:
            if pos >= len(params):
                raise OperatorError(f"too many arguments for {name}")
            key, val = params[pos], item
        if key not in params:
            raise OperatorError(f"{name} has no parameter {key!r}")
        z = parse_scalar(val)
        if key in _INT_PARAMS:
            if z.imag != 0 or not float(z.real).is_integer():
                raise OperatorError(f"{key} must be an integer")
            kwargs[key] = int(z.real)
        else:
            kwargs[key] = _real(z)
    missing = [p for p in params if p not in kwargs]
    if missing:
        raise OperatorError(f"{name} missing parameters {missing}")
    return fn(*[kwargs[p] for p in params])


def load_matrix_file(path: str) -> np.ndarray:
    """Read a CSV of real entries or a JSON ``{"rows","cols","re","im"}`` file."""
    if path.lower().endswith(".json"):
        with open(path) as fh:
            doc = json.load(fh)
        rows, cols = int(doc["rows"]), int(doc["cols"])
        re = np.asarray(doc["re"], dtype=float)
        im = np.asarray(doc.get("im", np.zeros(rows * cols)), dtype=float)
        if re.size != rows * cols or im.size != rows * cols:
            raise OperatorError("JSON matrix entry count does not match rows*cols")
        return (re + 1j * im).reshape(rows, cols)
    with open(path, newline="") as fh:
        data = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if len({len(r) for r in data}) > 1:
        raise OperatorError("ragged CSV matrix")
    return np.asarray(data, dtype=float)


def make_operator(source) -> OperatorHandle:
    """Build an operator from a generator spec, a matrix file, or an array."""
    if isinstance(source, OperatorHandle):
        return source
    if isinstance(source, str):
        if source.startswith("file:"):
            path = source[5:]
            return from_matrix(load_matrix_file(path), os.path.basename(path))
        if os.path.splitext(source)[1].lower() in (".csv", ".json") and os.path.exists(source):
            return from_matrix(load_matrix_file(source), os.path.basename(source))
        return parse_generator_spec(source)
    return from_matrix(source)


def _power_norm(A: OperatorHandle, rtol=1e-8, maxiter=10_000, seed=0):
    """Largest eigenvalue of ``A*A`` by Lanczos (a Krylov-accelerated power iteration)."""
    if A.dim <= 2:
        return float(np.linalg.norm(A.to_dense(), 2)), 0
    counter = [0]

    def gram(x):
        counter[0] += 1
        return A.apply_adjoint(A.apply(np.asarray(x, dtype=complex)))

    op = scipy.sparse.linalg.LinearOperator((A.dim, A.dim), matvec=gram, dtype=complex)
    v0 = np.random.default_rng(seed).standard_normal(A.dim).astype(complex)
    try:
        w = scipy.sparse.linalg.eigsh(op, k=1, which="LA", tol=rtol, maxiter=maxiter,
                                      v0=v0, return_eigenvectors=False)
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise ArithmeticError(f"norm iteration did not converge in {maxiter} iterations") from exc
    return math.sqrt(max(float(w[0].real), 0.0)), counter[0]


@dataclass(frozen=True)
class NormResult:
    value: float
    estimate: bool
    iterations: int = 0


def operator_norm(A: OperatorHandle, full_output: bool = False):
    """Spectral norm. Matrix-free operators get a power-iteration estimate on ``A*A``.

    With ``full_output`` a :class:`NormResult` is returned, flagging
    whether the value is an estimate.
    """
    if A.dense_data is not None or A.apply_adjoint is None:
        res = NormResult(float(np.linalg.norm(A.to_dense(), 2)), False)
    else:
        value, its = _power_norm(A)
        res = NormResult(value, True, its)
    return res if full_output else res.value


def spectrum(A: OperatorHandle) -> SpectrumReport:
    """All eigenvalues with multiplicity, from a dense eigensolve."""
    m = A.to_dense()
    try:
        if np.array_equal(m, m.conj().T):
            ev = scipy.linalg.eigvalsh(m).astype(complex)
        else:
            ev = scipy.linalg.eigvals(m)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ArithmeticError(f"eigensolver failure: {exc}") from exc
    if not np.all(np.isfinite(ev)):
        raise ArithmeticError("eigensolver returned non-finite eigenvalues")
    ev = np.asarray(ev, dtype=complex)
    return SpectrumReport(ev, float(np.max(np.abs(ev))), float(np.max(ev.real)))


def estimate_growth_envelope(A: OperatorHandle, t_max: float, grid_size: int = 64) -> GrowthEnvelope:
    """Anchor ``omega`` at the spectral abscissa (+1e-6) and fit ``M`` on a t-grid."""
    from .semigroup import expm_oracle

    if not t_max > 0:
        raise ValueError("t_max must be positive")
    if grid_size < 8:
        raise ValueError("grid_size must be at least 8")
    omega = max(0.0, spectrum(A).spectral_abscissa + 1e-6)
    ts = np.linspace(0.0, t_max, grid_size)
    norms = np.array([np.linalg.norm(expm_oracle(A, t), 2) for t in ts])
    M = max(1.0, float(np.max(norms * np.exp(-omega * ts))))
    return GrowthEnvelope(M, omega, np.column_stack([ts, norms]))


# the operators used for cross-validation suites; all have norm below ~4
BUILTIN_SPECS = [
    "diag:-1,-2,0.5",
    "jordan:lambda=-1,n=3",
    "rotation2",
    "laplacian1d:n=6,h=1",
    "random_dissipative:n=6,seed=1",
    "advection1d:n=5,h=1",
]

DISSIPATIVE_SPECS = [
    "identity:n=3",  # negated below
    "zero:n=3",
    "rotation2",
    "laplacian1d:n=16,h=0.0588235294117647",
    "random_dissipative:n=8,seed=2",
    "advection1d:n=5,h=1",
]


def builtin_operators() -> list[OperatorHandle]:
    return [make_operator(s) for s in BUILTIN_SPECS]


def dissipative_operators() -> list[OperatorHandle]:
    ops = [make_operator(s) for s in DISSIPATIVE_SPECS]
    ops[0] = from_matrix(-np.eye(3), "-identity(3)")
    return ops
