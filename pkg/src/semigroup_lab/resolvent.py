"""Resolvents ``R(lam; A) = (lam I - A)^{-1}`` and the identities they satisfy."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.linalg import lapack
from scipy.sparse.linalg import LinearOperator, onenormest

from .operators import OperatorHandle, operator_norm
from .reports import CheckReport

COND_LIMIT = 1e12
MAX_POWER = 12


class ShiftError(ValueError):
    """A shift lies (numerically) in the spectrum."""


@dataclass
class ResolventSample:
    lambda_: complex
    action: Callable[[np.ndarray], np.ndarray]
    in_resolvent_set: bool
    dim: int
    cond: float = math.nan

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.action(np.eye(self.dim, dtype=complex)))

    @cached_property
    def norm_estimate(self) -> float:
        if not self.in_resolvent_set:
            return math.inf
        return float(np.linalg.norm(self.matrix, 2))

    def __call__(self, b):
        return self.action(b)


def _lu(m: np.ndarray):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    anorm = np.linalg.norm(m, 1)
    if not np.all(np.isfinite(lu)) or anorm == 0:
        return lu, piv, math.inf
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    cond = math.inf if rcond == 0 or info != 0 else 1.0 / rcond
    return lu, piv, cond


def _self_adjoint_cond(A: OperatorHandle, lam: complex) -> float:
    """1-norm condition estimate of ``lam I - A`` from shifted solves.

    The adjoint solve is ``solve_shifted(conj(lam), .)``, valid because
    ``A`` is self-adjoint.
    """
    n, solve = A.dim, A.solve_shifted
    mu = lam.conjugate()
    fwd = LinearOperator((n, n), dtype=complex, matvec=lambda x: lam * x - A.apply(x),
                         rmatvec=lambda x: mu * x - A.apply(x))
    inv = LinearOperator((n, n), dtype=complex, matvec=lambda x: solve(lam, x),
                         rmatvec=lambda x: solve(mu, x))
    cond = float(onenormest(fwd) * onenormest(inv))
    return cond if math.isfinite(cond) else math.inf


def _probe_residual_ok(A: OperatorHandle, action, lam: complex) -> bool:
    probe = np.ones(A.dim, dtype=complex)
    y = action(probe)
    if not np.all(np.isfinite(y)):
        return False
    res = np.linalg.norm(lam * y - A.apply(y) - probe)
    return bool(res <= 1e-10 * np.linalg.norm(probe) * max(1.0, np.linalg.norm(y)))


def resolvent(A: OperatorHandle, lam: complex) -> ResolventSample:
    """Factor ``lam I - A`` once and expose ``b -> R(lam; A) b``.

    Membership of ``lam`` in the resolvent set is decided by the 1-norm
    condition estimate (``< 1e12``); a singular shift is reported, not
    raised.
    """
    lam = complex(lam)
    if A.dense_data is None and A.solve_shifted is not None:
        solve = A.solve_shifted

        def action(b):
            return solve(lam, np.asarray(b, dtype=complex))

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                if A.apply_adjoint is A.apply:
                    cond = _self_adjoint_cond(A, lam)
                    ok = cond < COND_LIMIT
                else:
                    cond, ok = math.nan, _probe_residual_ok(A, action, lam)
            except (np.linalg.LinAlgError, ValueError, ZeroDivisionError):
                cond, ok = math.inf, False
        return ResolventSample(lam, action, bool(ok), A.dim, cond)

    m = lam * np.eye(A.dim) - A.to_dense()
    lu, piv, cond = _lu(m)
    inside = cond < COND_LIMIT

    def action(b):
        return scipy.linalg.lu_solve((lu, piv), np.asarray(b, dtype=complex), check_finite=False)

    return ResolventSample(lam, action, inside, A.dim, cond)


def resolvent_matrix(A: OperatorHandle, lam: complex) -> np.ndarray:
    """Dense ``R(lam; A)``; raises :class:`ShiftError` outside the resolvent set."""
    r = resolvent(A, lam)
    if not r.in_resolvent_set:
        raise ShiftError(f"shift {lam} is not in the resolvent set (cond {r.cond:.3g})")
    return r.matrix


def check_resolvent_identity(A: OperatorHandle, lam: complex, mu: complex) -> CheckReport:
    r_l = resolvent_matrix(A, lam)
    r_m = resolvent_matrix(A, mu)
    scale = max(1.0, np.linalg.norm(r_l, 2) * np.linalg.norm(r_m, 2))
    rep = CheckReport("resolvent-identity")
    rep.add("identity", np.linalg.norm(r_l - r_m - (mu - lam) * (r_l @ r_m), 2), 1e-9 * scale)
    rep.add("commutation", np.linalg.norm(r_l @ r_m - r_m @ r_l, 2), 1e-9 * scale)
    return rep


def neumann_resolvent(A: OperatorHandle, lam: complex, tol: float = 1e-12,
                      max_terms: int = 10_000) -> ResolventSample:
    """Sum ``sum_k A^k / lam^(k+1)`` until the geometric tail bound drops below ``tol``.

    Requires ``|lam| >= 1.01 ||A||`` unless ``A`` is nilpotent, in which
    case the series terminates.
    """
    lam = complex(lam)
    a = A.to_dense()
    n = A.dim
    norm_a = operator_norm(A)
    nilpotent = not np.any(np.linalg.matrix_power(a, n))
    if not nilpotent and not abs(lam) >= 1.01 * norm_a:
        raise ValueError(f"|lambda| = {abs(lam):.6g} must exceed 1.01 ||A|| = {1.01 * norm_a:.6g}")
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    q = norm_a / abs(lam)
    total = np.zeros((n, n), dtype=complex)
    # term_k = A^k / lam^(k+1), carried scaled so large k cannot overflow
    term = np.eye(n, dtype=complex) / lam
    terms = 0
    for k in range(max_terms + 1):
        # Frobenius dominates the spectral norm, so the tail bound stays conservative
        term_norm = np.linalg.norm(term)
        if term_norm == 0.0:
            break
        total += term
        terms += 1
        if q < 1 and term_norm * q / (1 - q) < tol:
            break
        term = (a @ term) / lam
    else:
        raise ArithmeticError(f"Neumann series needed more than {max_terms} terms")
    total.setflags(write=False)
    sample = ResolventSample(lam, lambda b: total @ np.asarray(b, dtype=complex), True, n)
    sample.__dict__["matrix"] = total
    sample.__dict__["terms"] = terms
    return sample


@dataclass
class PseudoResolventFamily:
    samples: dict[complex, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_operator(cls, A: OperatorHandle, lambdas) -> PseudoResolventFamily:
        return cls({complex(l): resolvent_matrix(A, l) for l in lambdas})


def _rank(m: np.ndarray, rtol=1e-10) -> int:
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def check_pseudo_resolvent(family: PseudoResolventFamily) -> CheckReport:
    """Pseudo-resolvent axioms: identity, commutation, constant rank, and
    reconstruction ``A = lam I - R_lam^{-1}`` when every member is injective."""
    items = sorted(family.samples.items(), key=lambda kv: (kv[0].real, kv[0].imag))
    if len(items) < 2:
        raise ValueError("a pseudo-resolvent check needs at least two samples")
    rep = CheckReport("pseudo-resolvent")
    worst_id = worst_comm = 0.0
    ok_id = ok_comm = True
    for i, (lam, r_l) in enumerate(items):
        for mu, r_m in items[i + 1:]:
            scale = np.linalg.norm(r_l, 2) * np.linalg.norm(r_m, 2)
            res = np.linalg.norm(r_l - r_m - (mu - lam) * (r_l @ r_m), 2)
            com = np.linalg.norm(r_l @ r_m - r_m @ r_l, 2)
            ok_id &= res <= 1e-9 * scale
            ok_comm &= com <= 1e-9 * scale
            worst_id = max(worst_id, res / scale if scale else res)
            worst_comm = max(worst_comm, com / scale if scale else com)
    rep.add("identity (relative)", worst_id, 1e-9, ok_id)
    rep.add("commutation (relative)", worst_comm, 1e-9, ok_comm)
    ranks = [_rank(r) for _, r in items]
    rep.data["ranks"] = ranks
    rep.add("rank spread", max(ranks) - min(ranks), 0)
    dim = items[0][1].shape[0]
    injective = all(r == dim for r in ranks)
    rep.data["injective"] = injective
    if injective:
        (l1, r1), (l2, r2) = items[0], items[1]
        a1 = l1 * np.eye(dim) - np.linalg.inv(r1)
        a2 = l2 * np.eye(dim) - np.linalg.inv(r2)
        rep.data["reconstruction"] = a1
        norm_a = np.linalg.norm(a1, 2)
        rep.add("reconstruction", np.linalg.norm(a1 - a2, 2), 1e-8 * max(1.0, norm_a))
    else:
        rep.notes.append("family not injective: no generator reconstruction")
    return rep


def check_hille_yosida_bounds(A: OperatorHandle, env, lambda_grid, n_max: int,
                              name: str = "hille-yosida") -> CheckReport:
    """Compare ``||R(lam)^n||`` with ``M / (Re lam - omega)^n`` for ``n <= n_max``."""
    if n_max > MAX_POWER:
        raise ValueError(f"n_max is limited to {MAX_POWER}")
    lambdas = [complex(l) for l in np.atleast_1d(lambda_grid)]
    bad = [l for l in lambdas if not l.real > env.omega]
    if bad:
        raise ValueError(f"shifts {bad} do not satisfy Re lambda > omega = {env.omega}")
    worst = 0.0
    where = None
    for lam in lambdas:
        r = resolvent_matrix(A, lam)
        p = np.eye(A.dim, dtype=complex)
        for n in range(1, n_max + 1):
            p = p @ r
            ratio = np.linalg.norm(p, 2) * (lam.real - env.omega) ** n / env.M
            if ratio > worst:
                worst, where = ratio, (lam, n)
    rep = CheckReport(name)
    rep.add("worst ratio", worst, 1 + 1e-8)
    rep.data["worst_at"] = {"lambda": where[0], "n": where[1]} if where else None
    rep.data["M"] = env.M
    rep.data["omega"] = env.omega
    return rep
