"""Contour-integral representations of the semigroup.

* circle (Riesz-Dunford): trapezoid rule, geometric convergence;
* vertical line (Bromwich): Gauss-Legendre panels on ``[a - iY, a + iY]``;
* ``B_lam(t) = int_0^t exp(lam (t - s)) T(s) ds`` by Gauss-Legendre in time.

On the vertical line the integrand decays only like ``1/|z|``. The first
``HEAD_TERMS`` Laurent terms of the resolvent about a point ``c`` left of
the line are integrated in closed form, and only the remainder
``(A - c)^m R(z) / (z - c)^m`` is handed to the quadrature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .operators import OperatorHandle, operator_norm, spectrum
from .quadrature import composite_gauss_legendre, gauss_legendre
from .reports import CheckReport
from .resolvent import ShiftError
from .semigroup import expm_oracle

HEAD_TERMS = 4
PANEL_ORDER = 8


@dataclass(frozen=True)
class ContourSpec:
    shape: str
    params: dict = field(default_factory=dict)
    nodes: int = 64

    def __post_init__(self):
        if self.shape not in ("circle", "line", "sector"):
            raise ValueError(f"unknown contour shape {self.shape!r}")
        if self.nodes < 8 or self.nodes % 2:
            raise ValueError("contours need an even node count >= 8")
        if self.shape == "circle" and not self.params.get("r", 0) > 0:
            raise ValueError("circle radius must be positive")

    @property
    def rule(self) -> str:
        return "trapezoid" if self.shape == "circle" else "gauss-legendre"

    @classmethod
    def circle(cls, r: float, n: int = 64, center: complex = 0.0) -> ContourSpec:
        return cls("circle", {"r": float(r), "center": complex(center)}, int(n))

    @classmethod
    def line(cls, a: float, Y: float | None = None, n: int = 2000) -> ContourSpec:
        return cls("line", {"a": float(a), "Y": Y}, int(n))

    @classmethod
    def parse(cls, text: str) -> ContourSpec:
        """``"circle:r=3,n=64"`` or ``"line:a=0.5,Y=200,n=2000"``."""
        shape, _, rest = text.partition(":")
        kv = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, sep, val = item.partition("=")
            if not sep:
                raise ValueError(f"malformed contour parameter {item!r}")
            kv[key.strip()] = float(val)
        n = int(kv.pop("n", 64 if shape == "circle" else 2000))
        if shape == "circle":
            return cls.circle(kv["r"], n, kv.get("center", 0.0))
        if shape == "line":
            return cls.line(kv["a"], kv.get("Y"), n)
        raise ValueError(f"unknown contour shape {shape!r}")


def _batched_resolvents(A: OperatorHandle, zs: np.ndarray, rhs: np.ndarray | None = None) -> np.ndarray:
    """Stack of ``R(z; A) @ rhs`` (identity when ``rhs`` is None) for every node ``z``."""
    n = A.dim
    if rhs is None:
        rhs = np.eye(n, dtype=complex)
    if A.dense_data is None and A.solve_shifted is not None:
        out = np.stack([A.solve_shifted(z, rhs) for z in zs])
    else:
        a = A.to_dense()
        mats = zs[:, None, None] * np.eye(n)[None] - a[None]
        b = np.broadcast_to(rhs, (len(zs),) + rhs.shape)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                out = np.linalg.solve(mats, b)
        except np.linalg.LinAlgError as exc:
            raise ShiftError("a contour node hit the spectrum") from exc
    if not np.all(np.isfinite(out)):
        raise ShiftError("a contour node hit the spectrum")
    return out


def dunford_exp(A: OperatorHandle, t: float, contour: ContourSpec) -> np.ndarray:
    """``(1/2 pi i) \\oint exp(lam t) R(lam; A) dlam`` over a circle enclosing the spectrum.

    The radius must exceed ``1.05 rho(A - c)``. The trapezoid error decays
    like ``(rho / r)^N``, so radii near the spectral radius need many nodes;
    ``r >= 2 ||A|| + 1`` reaches rounding level by ``N = 64`` on the built-ins.
    """
    if contour.shape != "circle":
        raise ValueError("dunford_exp needs a circle contour")
    r = contour.params["r"]
    c = complex(contour.params.get("center", 0.0))
    rho = float(np.max(np.abs(spectrum(A).eigenvalues - c)))
    if r < 1.05 * rho * (1 - 1e-12):
        raise ValueError(f"radius {r} must enclose the spectrum with margin: 1.05 rho(A - c) = {1.05 * rho:.6g}")
    N = contour.nodes
    theta = 2 * np.pi * np.arange(N) / N
    lam = c + r * np.exp(1j * theta)
    rs = _batched_resolvents(A, lam)
    # dlam = i (lam - c) dtheta; the 1/(2 pi i) and the 2 pi / N step leave (lam - c)/N
    w = np.exp(lam * t) * (lam - c) / N
    return np.tensordot(w, rs, axes=(0, 0))


def _line_setup(A: OperatorHandle, t: float, a: float):
    if not t > 0:
        raise ValueError("the Bromwich representation needs t > 0")
    sp = spectrum(A)
    if not a > sp.spectral_abscissa:
        raise ValueError(f"a = {a} must exceed the spectral abscissa {sp.spectral_abscissa:.6g}")
    c = a - 1.0
    if abs(c) < 0.25:
        c = a - 1.5
    width = min(math.pi / (4 * t), 0.5 * (a - sp.spectral_abscissa), 0.5 * (a - c))
    return c, width


def _panels(Y: float, width: float, nodes: int | None):
    count = max(1, math.ceil(Y / width))
    if nodes is not None:
        count = max(count, math.ceil(nodes / (2 * PANEL_ORDER)))
    return np.linspace(0.0, Y, count + 1)


def _line_remainder(A, t, a, c, edges, rhs):
    """``(1/2 pi) int exp(zt) (A - c)^m R(z) rhs / (z - c)^m deta`` over ``+-[edges]``."""
    eta, w = composite_gauss_legendre(edges, PANEL_ORDER)
    eta = np.concatenate([-eta[::-1], eta])
    w = np.concatenate([w[::-1], w])
    z = a + 1j * eta
    rs = _batched_resolvents(A, z, rhs)
    weights = w * np.exp(z * t) / (z - c) ** HEAD_TERMS / (2 * np.pi)
    return np.tensordot(weights, rs, axes=(0, 0))


def _tail_bound(t, a, norm_a, norm_b, Y):
    if Y <= norm_a:
        return math.inf
    m = HEAD_TERMS
    return math.exp(a * t) * norm_b**m / (math.pi * (m - 1) * Y ** (m - 1) * (Y - norm_a))


def _auto_Y(t, a, norm_a, norm_b, tol):
    Y = 2.0 * (norm_a + abs(a) + 1.0)
    while _tail_bound(t, a, norm_a, norm_b, Y) > tol:
        Y *= 1.5
    return Y


@dataclass
class BromwichInfo:
    Y: float
    nodes: int
    tail_estimate: float
    tail_bound: float
    validated: bool


def _bromwich(A, t, a, Y, nodes, tol, rhs, head_fn):
    c, width = _line_setup(A, t, a)
    n = A.dim
    a_mat = A.to_dense()
    b_mat = a_mat - c * np.eye(n)
    norm_a = float(np.linalg.norm(a_mat, 2))
    norm_b = float(np.linalg.norm(b_mat, 2))
    head = head_fn(b_mat, c)
    scale = max(1.0, float(np.linalg.norm(head)))
    if Y is None:
        Y = _auto_Y(t, a, norm_a, norm_b, tol * scale)
    Y = float(Y)
    b_pow = np.linalg.matrix_power(b_mat, HEAD_TERMS)
    rem_rhs = b_pow @ rhs
    edges = _panels(Y, width, nodes)
    part_y = _line_remainder(A, t, a, c, edges, rem_rhs)
    extra = _line_remainder(A, t, a, c, _panels(Y, width, nodes) + Y, rem_rhs)
    result = head + part_y
    tail_est = float(np.linalg.norm(extra))
    bound = _tail_bound(t, a, norm_a, norm_b, Y)
    info = BromwichInfo(Y, 2 * PANEL_ORDER * (len(edges) - 1), tail_est, bound,
                        tail_est <= 10 * max(tol * scale, bound))
    return result, info


def bromwich_exp(A: OperatorHandle, t: float, a: float, Y: float | None = None,
                 nodes: int | None = None, tol: float = 1e-10, full_output: bool = False):
    """``T(t)`` from the inverse Laplace integral along ``Re z = a``.

    ``Y`` defaults to the smallest truncation whose analytic tail bound is
    below ``tol``; the ``[Y, 2Y]`` band is integrated as an independent tail
    estimate. ``nodes`` is a lower bound on the node count; panels are
    never wider than a quarter period of ``exp(i eta t)``.
    """
    t = float(t)

    def head(b, c):
        total = np.zeros_like(b)
        term = np.eye(A.dim, dtype=complex)
        for k in range(HEAD_TERMS):
            total += term
            term = term @ b * (t / (k + 1))
        return math.exp(c * t) * total

    result, info = _bromwich(A, t, float(a), Y, nodes, tol, np.eye(A.dim, dtype=complex), head)
    return (result, info) if full_output else result


def _head_time_integral_coeffs(t, a, c):
    """Line integrals ``(1/2 pi i) int exp(zt) / (z (z - c)^(k+1)) dz`` for ``k < HEAD_TERMS``."""
    coeffs = []
    for k in range(HEAD_TERMS):
        # residue at z = c of exp(zt) / (z (z - c)^(k+1))
        val = math.exp(c * t) * sum(
            t ** (k - j) / math.factorial(k - j) * (-1) ** j / c ** (j + 1) for j in range(k + 1)
        )
        if a > 0:
            val += 1.0 / (-c) ** (k + 1)
        coeffs.append(val)
    return coeffs


def bromwich_time_integral(A: OperatorHandle, x, t: float, a: float, Y: float | None = None,
                           nodes: int | None = None, tol: float = 1e-10,
                           full_output: bool = False):
    """``int_0^t T(s) x ds`` from ``(1/2 pi i) int exp(zt) R(z; A) x dz / z`` along ``Re z = a``.

    For ``a < 0`` the pole at the origin lies right of the line and its
    residue ``R(0; A) x`` is added back.
    """
    if a == 0:
        raise ValueError("the line must avoid the pole at z = 0")
    t = float(t)
    x = np.asarray(x, dtype=complex).reshape(A.dim, -1)
    coeffs = _head_time_integral_coeffs(t, a, _line_setup(A, t, a)[0])

    def head(b, c):
        total = np.zeros_like(x)
        term = x.copy()
        for k in range(HEAD_TERMS):
            total += coeffs[k] * term
            term = b @ term
        return total

    c, width = _line_setup(A, t, a)
    # the remainder carries an extra 1/z; fold it into the right-hand side per node
    n = A.dim
    a_mat = A.to_dense()
    b_mat = a_mat - c * np.eye(n)
    norm_a = float(np.linalg.norm(a_mat, 2))
    norm_b = float(np.linalg.norm(b_mat, 2))
    h = head(b_mat, c)
    scale = max(1.0, float(np.linalg.norm(h)))
    if Y is None:
        Y = _auto_Y(t, a, norm_a, norm_b, tol * scale / max(1.0, abs(a)))
    rem_rhs = np.linalg.matrix_power(b_mat, HEAD_TERMS) @ x

    def band(edges):
        eta, w = composite_gauss_legendre(edges, PANEL_ORDER)
        eta = np.concatenate([-eta[::-1], eta])
        w = np.concatenate([w[::-1], w])
        z = a + 1j * eta
        rs = _batched_resolvents(A, z, rem_rhs)
        weights = w * np.exp(z * t) / ((z - c) ** HEAD_TERMS * z) / (2 * np.pi)
        return np.tensordot(weights, rs, axes=(0, 0))

    edges = _panels(float(Y), width, nodes)
    result = h + band(edges)
    extra = band(edges + float(Y))
    if a < 0:
        result = result + np.linalg.solve(-a_mat, x)
    result = result.reshape(-1) if result.shape[1] == 1 else result
    if full_output:
        tail = float(np.linalg.norm(extra))
        bound = _tail_bound(t, a, norm_a, norm_b, float(Y)) / abs(a)
        return result, BromwichInfo(float(Y), 2 * PANEL_ORDER * (len(edges) - 1), tail, bound,
                                    tail <= 10 * max(tol * scale, bound))
    return result


def time_integral_oracle(A: OperatorHandle, x, t: float, quad_points: int = 64) -> np.ndarray:
    """``int_0^t T(s) x ds`` by Gauss-Legendre in time on the oracle semigroup."""
    s, w = gauss_legendre(0.0, t, quad_points)
    x = np.asarray(x, dtype=complex)
    return sum(wi * (expm_oracle(A, si) @ x) for si, wi in zip(s, w))


@dataclass
class BLambdaOperator:
    lambda_: complex
    t: float
    matrix: np.ndarray
    report: CheckReport

    def action(self, b):
        return self.matrix @ np.asarray(b, dtype=complex)

    __call__ = action


def b_lambda_matrix(A: OperatorHandle, lam: complex, t: float, quad_points: int) -> np.ndarray:
    s, w = gauss_legendre(0.0, t, quad_points)
    return sum(wi * np.exp(lam * (t - si)) * expm_oracle(A, si) for si, wi in zip(s, w))


def b_lambda_residuals(A: OperatorHandle, lam: complex, t: float, quad_points: int):
    """Residuals of ``(lam - A) B = exp(lam t) - T(t)`` and of ``B T(t) = T(t) B``, scaled."""
    lam = complex(lam)
    b = b_lambda_matrix(A, lam, t, quad_points)
    T = expm_oracle(A, t)
    eye = np.eye(A.dim)
    rhs = np.exp(lam * t) * eye - T
    lhs = lam * b - A.apply(b)
    scale = max(1.0, abs(np.exp(lam * t)), np.linalg.norm(T, 2))
    ident = float(np.linalg.norm(lhs - rhs, 2) / scale)
    comm = float(np.linalg.norm(b @ T - T @ b, 2) / max(1.0, np.linalg.norm(b, 2) * np.linalg.norm(T, 2)))
    return b, ident, comm


def b_lambda(A: OperatorHandle, lam: complex, t: float, quad_points: int = 32) -> BLambdaOperator:
    """``B_lam(t)`` with its defining identity and commutation verified.

    Raises ``ArithmeticError`` when the identity is not met and doubling
    the quadrature does not improve it.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    b, ident, comm = b_lambda_residuals(A, lam, t, quad_points)
    rep = CheckReport("b-lambda")
    rep.add("(lam - A) B - (exp(lam t) - T(t))", ident, 1e-8)
    rep.add("B T - T B", comm, 1e-8)
    if not rep.ok:
        _, ident2, comm2 = b_lambda_residuals(A, lam, t, 2 * quad_points)
        if not (ident2 < ident or comm2 < comm):
            raise ArithmeticError("B_lambda quadrature does not converge under doubling")
        rep.notes.append(f"doubled quadrature residuals: {ident2:.3e}, {comm2:.3e}")
    return BLambdaOperator(complex(lam), float(t), b, rep)


def bromwich_oracle_check(A: OperatorHandle, t: float, a: float | None = None, tol: float = 1e-6) -> CheckReport:
    """Bromwich and Dunford against the oracle at one time."""
    if a is None:
        a = max(0.0, spectrum(A).spectral_abscissa) + 1.0
    T = expm_oracle(A, t)
    br, info = bromwich_exp(A, t, a, full_output=True)
    r = 2.0 * operator_norm(A) + 1.0
    du = dunford_exp(A, t, ContourSpec.circle(r, 64))
    rep = CheckReport("contour-vs-oracle")
    rep.add("bromwich", np.linalg.norm(br - T, 2), max(tol, info.tail_estimate))
    rep.add("dunford", np.linalg.norm(du - T, 2), tol)
    return rep
