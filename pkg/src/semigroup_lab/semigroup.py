"""Time-domain approximations of ``T(t) = exp(tA)``.

``expm_oracle`` is the ground truth every limit formula is measured
against. The approximations (Taylor, Yosida, exponential formula, Euler,
Lie-Trotter, Chernoff) are built from their defining formulas only.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .operators import OperatorHandle, from_matrix, spectrum
from .quadrature import gauss_legendre
from .reports import CheckReport, ConvergenceTable
from .resolvent import ShiftError, resolvent, resolvent_matrix

EIGVEC_COND_LIMIT = 1e8

_decompositions: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def _eig_route(A: OperatorHandle):
    """Cached ``(w, V, V^{-1})`` for operators with a well-conditioned eigenbasis, else ``None``."""
    try:
        return _decompositions[A]
    except KeyError:
        pass
    a = A.to_dense()
    if np.array_equal(a, a.conj().T):
        w, v = scipy.linalg.eigh(a)
        route = (w.astype(complex), v, v.conj().T)
    else:
        w, v = scipy.linalg.eig(a)
        if np.linalg.cond(v) < EIGVEC_COND_LIMIT:
            route = (w, v, np.linalg.inv(v))
        else:
            route = None
    _decompositions[A] = route
    return route


def _expm_scaling_squaring(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    norm = np.linalg.norm(m, 1)
    s = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    b = m / 2.0**s
    total = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for k in range(1, 60):
        term = term @ b / k
        total += term
        if np.linalg.norm(term, 1) < 1e-16:
            break
    for _ in range(s):
        total = total @ total
    return total


def expm_oracle(A: OperatorHandle, t: float) -> np.ndarray:
    """``exp(tA)`` by eigendecomposition when the eigenbasis is well
    conditioned (``cond(V) < 1e8``), otherwise scaling and squaring on a
    Taylor core with ``||tA / 2^s|| <= 0.5``.

    Defective matrices (Jordan blocks) always take the second route.
    """
    t = float(t)
    if t == 0.0:
        return np.eye(A.dim, dtype=complex)
    route = _eig_route(A)
    if route is not None:
        w, v, vinv = route
        out = (v * np.exp(t * w)) @ vinv
    else:
        out = _expm_scaling_squaring(t * A.to_dense())
    if A.is_real:
        out = out.real.astype(complex)
    return out


def expm_taylor(A: OperatorHandle, t: float, tol: float = 1e-15, max_terms: int = 500) -> np.ndarray:
    """Partial sums of ``sum_k (tA)^k / k!`` until a term drops below ``tol``."""
    m = float(t) * A.to_dense()
    if np.linalg.norm(m, 2) > 20:
        raise ValueError("||tA|| > 20: Taylor summation would cancel catastrophically")
    total = np.eye(A.dim, dtype=complex)
    term = np.eye(A.dim, dtype=complex)
    for k in range(1, max_terms):
        term = term @ m / k
        total += term
        if np.linalg.norm(term, 2) < tol:
            return total
    raise ArithmeticError("Taylor series did not reach tolerance")


def yosida_generator(A: OperatorHandle, lam: complex) -> np.ndarray:
    """Yosida approximation ``A_lam = lam A R(lam; A) = lam^2 R(lam; A) - lam I``."""
    lam = complex(lam)
    if not lam.real > spectrum(A).spectral_abscissa:
        raise ShiftError(f"Re lambda = {lam.real} must exceed the spectral abscissa")
    r = resolvent_matrix(A, lam)
    # lam * A R is the better-conditioned form of lam^2 R - lam I
    return lam * A.apply(r)


def _probes(dim, count=10, seed=1234):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((dim, count)) + 1j * rng.standard_normal((dim, count))
    return x / np.linalg.norm(x, axis=0)


def yosida_semigroup_error(A: OperatorHandle, t_grid, lambda_sequence) -> ConvergenceTable:
    """Operator-norm distance between ``exp(t A_lam)`` and ``exp(tA)``, maximized over ``t_grid``."""
    rows = []
    ts = np.atleast_1d(np.asarray(t_grid, dtype=float))
    omega = max(0.0, spectrum(A).spectral_abscissa)
    for lam in lambda_sequence:
        if not (np.isreal(lam) and lam > 2 * omega):
            raise ValueError(f"lambda {lam} must be real and exceed 2 omega = {2 * omega}")
        a_lam = from_matrix(yosida_generator(A, lam), "yosida")
        err = max(np.linalg.norm(expm_oracle(a_lam, t) - expm_oracle(A, t), 2) for t in ts)
        rows.append((float(np.real(lam)), err))
    return ConvergenceTable(rows, "yosida: exp(t A_lam) -> exp(tA)")


def exp_formula(A: OperatorHandle, t: float, n: int) -> np.ndarray:
    """Backward-Euler product ``[(n/t) R(n/t; A)]^n`` by ``n`` successive shifted solves."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if t == 0:
        return np.eye(A.dim, dtype=complex)
    s = n / float(t)
    r = resolvent(A, s)
    if not r.in_resolvent_set:
        raise ShiftError(f"n/t = {s} is not in the resolvent set")
    p = np.eye(A.dim, dtype=complex)
    for _ in range(n):
        p = r.action(s * p)
    return p


def euler_product(A: OperatorHandle, t: float, n: int) -> np.ndarray:
    """Forward-Euler product ``(I + (t/n) A)^n``."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    a = A.to_dense()
    if abs(t) * np.linalg.norm(a, 2) > 50:
        raise ValueError("||tA|| > 50: refusing to form the Euler product")
    return np.linalg.matrix_power(np.eye(A.dim) + (t / n) * a, n)


def perturbed_euler_product(A: OperatorHandle, t: float, n: int) -> np.ndarray:
    """``(I + (t/n)(A + A_n(t)))^n`` with the Neumann-tail perturbation ``A_n(t) = (t/n) A^2``."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    a = A.to_dense()
    if abs(t) * np.linalg.norm(a, 2) > 50:
        raise ValueError("||tA|| > 50: refusing to form the product")
    h = t / n
    return np.linalg.matrix_power(np.eye(A.dim) + h * (a + h * (a @ a)), n)


def _check_same_dim(A1, A2):
    if A1.dim != A2.dim:
        raise ValueError(f"dimension mismatch: {A1.dim} vs {A2.dim}")


def trotter_step(A1: OperatorHandle, A2: OperatorHandle) -> Callable[[float], np.ndarray]:
    def step(h):
        return expm_oracle(A1, h) @ expm_oracle(A2, h)
    return step


def lie_trotter(A1: OperatorHandle, A2: OperatorHandle, t: float, n: int) -> np.ndarray:
    """``[exp((t/n) A1) exp((t/n) A2)]^n``."""
    _check_same_dim(A1, A2)
    if n < 1:
        raise ValueError("n must be a positive integer")
    return np.linalg.matrix_power(trotter_step(A1, A2)(t / n), n)


def chernoff_product(F: Callable[[float], np.ndarray], A: OperatorHandle, t: float, n: int,
                     full_output: bool = False):
    """``F(t/n)^n`` for a family with ``F(0) = I`` and ``(F(h) - I)/h -> A``.

    Consistency is checked at ``h = 1e-3`` and ``1e-4`` before use; with
    ``full_output`` the defects are returned alongside the product.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    eye = np.eye(A.dim)
    if np.linalg.norm(F(0.0) - eye, 2) > 1e-12:
        raise ValueError("F(0) differs from the identity")
    a = A.to_dense()
    defects = {h: float(np.linalg.norm((F(h) - eye) / h - a, 2)) for h in (1e-3, 1e-4)}
    d3, d4 = defects[1e-3], defects[1e-4]
    if d4 > 1e-9 * max(1.0, np.linalg.norm(a, 2)) and not d4 < d3:
        raise ValueError(f"consistency defect is not decreasing: {d3:.3g} -> {d4:.3g}")
    prod = np.linalg.matrix_power(np.asarray(F(t / n), dtype=complex), n)
    return (prod, defects) if full_output else prod


def backward_euler_step(A: OperatorHandle) -> Callable[[float], np.ndarray]:
    """``F(h) = (I - hA)^{-1}``."""
    a = A.to_dense()

    def F(h):
        return np.linalg.solve(np.eye(A.dim) - h * a, np.eye(A.dim, dtype=complex))
    return F


def cayley_step(A: OperatorHandle) -> Callable[[float], np.ndarray]:
    """``F(h) = (I - hA/2)^{-1} (I + hA/2)``, a second-order consistent family."""
    a = A.to_dense()

    def F(h):
        eye = np.eye(A.dim)
        return np.linalg.solve(eye - 0.5 * h * a, (eye + 0.5 * h * a).astype(complex))
    return F


def chernoff_lemma_bound(M: float, N: float, n: int, defect: float) -> float:
    """``M N^(n-1) exp((N-1) n) sqrt(n^2 (N-1)^2 + n N) ||Tx - x||``."""
    if M < 1 or N < 1:
        raise ValueError("M and N must be at least 1")
    if n < 0 or int(n) != n:
        raise ValueError("n must be a nonnegative integer")
    if defect < 0:
        raise ValueError("defect must be nonnegative")
    return M * N ** (n - 1) * math.exp((N - 1) * n) * math.sqrt(n * n * (N - 1) ** 2 + n * N) * defect


def chernoff_lemma_check(T, n: int, M: float = 1.0, N: float = 1.0, probes: int = 50,
                         seed: int = 0) -> CheckReport:
    """Compare ``||exp(n(T - I)) x - T^n x||`` with the lemma's bound on unit probes."""
    T = np.asarray(T, dtype=complex)
    dim = T.shape[0]
    rep = CheckReport("chernoff-lemma")
    power = np.eye(dim, dtype=complex)
    worst_power = 0.0
    for k in range(1, max(n, 1) + 1):
        power = power @ T
        worst_power = max(worst_power, np.linalg.norm(power, 2) / (M * N**k))
    rep.add("power bound ||T^k|| / (M N^k)", worst_power, 1 + 1e-10)
    lhs_op = expm_oracle(from_matrix(T - np.eye(dim)), n) - np.linalg.matrix_power(T, n)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(probes):
        x = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        x /= np.linalg.norm(x)
        lhs = np.linalg.norm(lhs_op @ x)
        rhs = chernoff_lemma_bound(M, N, n, float(np.linalg.norm(T @ x - x)))
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs < 1e-14 else math.inf)
        worst = max(worst, ratio)
    rep.add("worst lhs/bound", worst, 1 + 1e-10)
    return rep


def taylor_remainder_check(A: OperatorHandle, t: float, n: int, quad_points: int = 32,
                           probes: int = 5, seed: int = 0) -> CheckReport:
    """Taylor formula with integral remainder, evaluated on random probes.

    The remainder integral uses Gauss-Legendre with ``quad_points`` nodes and
    the oracle semigroup; the doubled rule is run alongside to detect an
    under-resolved quadrature.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    a = A.to_dense()
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((A.dim, probes)) + 1j * rng.standard_normal((A.dim, probes))
    x /= np.linalg.norm(x, axis=0)
    lhs = expm_oracle(A, t) @ x
    head = np.zeros_like(x)
    term = x.copy()
    for i in range(n):
        head += term
        term = (t / (i + 1)) * (a @ term)
    an_x = np.linalg.matrix_power(a, n) @ x

    def residual(q):
        us, ws = gauss_legendre(0.0, t, q)
        integral = sum(w * (t - u) ** (n - 1) * (expm_oracle(A, u) @ an_x) for u, w in zip(us, ws))
        rhs = head + integral / math.factorial(n - 1)
        return float(np.max(np.linalg.norm(lhs - rhs, axis=0)))

    r1, r2 = residual(quad_points), residual(2 * quad_points)
    rep = CheckReport("taylor-remainder")
    rep.add("residual", r1, 1e-8)
    rep.data["residual_doubled"] = r2
    if r1 > 1e-8 and not r2 < r1:
        rep.notes.append("quadrature under-resolved: residual did not decrease when nodes doubled")
    return rep


METHODS = ("euler", "exp-formula", "yosida", "trotter", "chernoff", "perturbed-euler")


def converge_table(method: str, A: OperatorHandle, t_grid, n_sequence, A2: OperatorHandle | None = None,
                   F: Callable[[float], np.ndarray] | None = None) -> ConvergenceTable:
    """``error(n) = max_t ||method(t, n) - exp(tA)||`` over ``t_grid``.

    For ``trotter`` the target is ``exp(t(A + A2))``; for ``yosida`` the
    sequence entries are the shifts ``lam``. ``chernoff`` defaults to the
    Cayley family when ``F`` is omitted.
    """
    ns = list(n_sequence)
    if len(ns) < 3 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_sequence must be strictly increasing with at least 3 entries")
    ts = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if method == "yosida":
        table = yosida_semigroup_error(A, ts, ns)
        return table
    if method == "trotter":
        if A2 is None:
            raise ValueError("trotter needs a second operator")
        _check_same_dim(A, A2)
        target = from_matrix(A.to_dense() + A2.to_dense(), "A1+A2")
        approx = lambda t, n: lie_trotter(A, A2, t, n)  # noqa: E731
    else:
        target = A
        if method == "euler":
            approx = lambda t, n: euler_product(A, t, n)  # noqa: E731
        elif method == "exp-formula":
            approx = lambda t, n: exp_formula(A, t, n)  # noqa: E731
        elif method == "perturbed-euler":
            approx = lambda t, n: perturbed_euler_product(A, t, n)  # noqa: E731
        elif method == "chernoff":
            fam = F or cayley_step(A)
            approx = lambda t, n: chernoff_product(fam, A, t, n)  # noqa: E731
        else:
            raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    oracle = {t: expm_oracle(target, t) for t in ts}
    rows = [(n, max(np.linalg.norm(approx(t, n) - oracle[t], 2) for t in ts)) for n in ns]
    return ConvergenceTable(rows, f"{method} on {A.label}")


@dataclass
class SemigroupEvaluator:
    """``t -> T(t)`` realized by one of the approximation methods."""

    A: OperatorHandle
    method: str = "oracle"
    params: dict = field(default_factory=dict)

    def __call__(self, t: float) -> np.ndarray:
        p = self.params
        m = self.method
        if m == "oracle":
            return expm_oracle(self.A, t)
        if m == "taylor":
            return expm_taylor(self.A, t, p.get("tol", 1e-15))
        if m == "yosida":
            return expm_oracle(from_matrix(yosida_generator(self.A, p["lambda"])), t)
        if m == "exp_formula":
            return exp_formula(self.A, t, p["n"])
        if m == "euler":
            return euler_product(self.A, t, p["n"])
        if m == "chernoff":
            return chernoff_product(p["F"], self.A, t, p["n"])
        if m == "trotter":
            return lie_trotter(self.A, p["A2"], t, p["n"])
        if m == "dunford_contour":
            from .contour import dunford_exp
            return dunford_exp(self.A, t, p["contour"])
        if m == "bromwich_contour":
            from .contour import bromwich_exp
            return bromwich_exp(self.A, t, p["a"], p.get("Y"), p.get("nodes"))
        raise ValueError(f"unknown method {m!r}")
