"""Structural certification of a candidate generator.

The duality set of the Euclidean norm is ``J(x) = {x}``, so dissipativity
reads ``Re <Ax, x> <= 0``; it is cross-checked against the norm criterion
``||(alpha - A) x|| >= alpha ||x||``.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field

import numpy as np

from .operators import GrowthEnvelope, OperatorHandle, operator_norm
from .reports import CheckReport
from .resolvent import COND_LIMIT, check_hille_yosida_bounds, resolvent
from .semigroup import expm_oracle

DISSIPATIVE_TOL = 1e-10


@dataclass
class DissipativityReport:
    inner_product_margin: float
    norm_criterion_margin: float
    is_dissipative: bool
    range_condition: bool
    norm_verdict: bool
    criteria_agree: bool
    notes: list[str] = field(default_factory=list)


def unit_probes(dim: int, count: int = 100, seed: int = 0) -> np.ndarray:
    """Columns: ``count`` seeded complex unit vectors followed by the canonical basis."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((dim, count)) + 1j * rng.standard_normal((dim, count))
    x /= np.linalg.norm(x, axis=0)
    return np.hstack([x, np.eye(dim, dtype=complex)])


def check_dissipative(A: OperatorHandle, probes: int = 100, alpha_grid=None) -> DissipativityReport:
    if probes < 100:
        raise ValueError("use at least 100 probes")
    norm_a = operator_norm(A)
    if alpha_grid is None:
        alpha_grid = np.logspace(-3, 10, 40) * max(1.0, norm_a)
    alphas = np.asarray(alpha_grid, dtype=float)
    if np.any(alphas <= 0):
        raise ValueError("alpha grid must be positive")
    x = unit_probes(A.dim, probes)
    ax = A.apply(x)
    re_ip = np.real(np.sum(np.conj(x) * ax, axis=0))
    ax2 = np.sum(np.abs(ax) ** 2, axis=0)
    inner = float(np.max(re_ip))

    # ||(alpha - A)x|| - alpha = (||Ax||^2 - 2 alpha Re<Ax,x>) / (||(alpha - A)x|| + alpha), no cancellation
    al = alphas[:, None]
    shifted = np.linalg.norm(al[:, :, None] * x.T[None] - ax.T[None], axis=2)
    margins = (ax2[None] - 2 * al * re_ip[None]) / (shifted + al)
    norm_margin = float(np.min(margins))

    is_diss = inner <= DISSIPATIVE_TOL
    norm_verdict = norm_margin >= -DISSIPATIVE_TOL * max(1.0, norm_a)
    notes = []
    agree = is_diss == norm_verdict
    if not agree:
        notes.append("inner-product and norm criteria disagree on this alpha grid")

    rng_ok = True
    for a0 in (1.0, norm_a + 1.0):
        r = resolvent(A, a0)
        rng_ok &= r.in_resolvent_set
    return DissipativityReport(inner, norm_margin, is_diss, bool(rng_ok), norm_verdict, agree, notes)


def check_lumer_phillips(A: OperatorHandle, t_grid=None) -> CheckReport:
    """Both directions of the contraction characterization, on a time grid.

    m-dissipative implies ``||exp(tA)|| <= 1``; an observed
    ``||exp(tA)|| > 1`` implies a failed dissipativity check.
    """
    ts = np.linspace(0.0, 5.0, 51) if t_grid is None else np.asarray(t_grid, dtype=float)
    d = check_dissipative(A)
    norms = np.array([np.linalg.norm(expm_oracle(A, t), 2) for t in ts])
    max_norm = float(np.max(norms))
    m_diss = d.is_dissipative and d.range_condition
    grows = max_norm > 1 + 1e-6
    rep = CheckReport("lumer-phillips")
    rep.add("m-dissipative => max ||exp(tA)||", max_norm, 1 + 1e-9, ok=(not m_diss) or max_norm <= 1 + 1e-9)
    rep.add("||exp(tA)|| > 1 => Re<Ax,x> margin", d.inner_product_margin, DISSIPATIVE_TOL,
            ok=(not grows) or not d.is_dissipative)
    rep.data.update(
        m_dissipative=m_diss,
        dissipative=d.is_dissipative,
        range_condition=d.range_condition,
        inner_product_margin=d.inner_product_margin,
        norm_criterion_margin=d.norm_criterion_margin,
        max_semigroup_norm=max_norm,
        argmax_t=float(ts[int(np.argmax(norms))]),
    )
    if not d.criteria_agree:
        rep.notes.extend(d.notes)
    return rep


def check_contraction_hy(A: OperatorHandle, lambda_grid, n_max: int) -> CheckReport:
    """``||R(lam)^n|| <= 1 / lam^n`` for real positive ``lam``."""
    lams = np.atleast_1d(np.asarray(lambda_grid))
    if np.any(np.iscomplex(lams)) or np.any(np.real(lams) <= 0):
        raise ValueError("the contraction bound needs real positive shifts")
    return check_hille_yosida_bounds(A, GrowthEnvelope(1.0, 0.0), np.real(lams), n_max,
                                     name="contraction-hille-yosida")


@dataclass
class SectorReport:
    delta: float
    K: float
    C_line: float
    L: float
    is_sectorial: bool
    C_by_gamma: dict = field(default_factory=dict)
    L_windows: dict = field(default_factory=dict)
    L_variation: float = math.nan
    C_growth: float = math.nan
    eta_grid: np.ndarray | None = None
    gamma_grid: np.ndarray | None = None
    t_grid: np.ndarray | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta, "K": self.K, "C_line": self.C_line, "L": self.L,
            "is_sectorial": self.is_sectorial, "L_variation": self.L_variation,
            "C_growth": self.C_growth,
            "C_by_gamma": {f"{g:.6g}": v for g, v in self.C_by_gamma.items()},
            "L_windows": {str(k): v for k, v in self.L_windows.items()},
            "notes": self.notes,
        }


ANGLE_STEP = 0.01
_profiles: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def _fan_radii(A: OperatorHandle):
    scale = max(1.0, operator_norm(A))
    return np.logspace(-3, math.log10(scale) + 3, 60)


def _min_max_singular(mats: np.ndarray):
    s = np.linalg.svd(mats, compute_uv=False)
    return s[..., -1], s[..., 0]


def _angle_profile(A: OperatorHandle):
    """Per lattice angle ``theta`` (both signs, all radii): max ``|lam| ||R(lam)||`` and max condition."""
    try:
        return _profiles[A]
    except KeyError:
        pass
    a = A.to_dense()
    radii = _fan_radii(A)
    thetas = np.arange(0.0, math.pi - ANGLE_STEP / 2, ANGLE_STEP)
    k_max = np.zeros(thetas.size)
    c_max = np.zeros(thetas.size)
    eye = np.eye(A.dim)
    for sign in (1, -1):
        lam = radii[None, :] * np.exp(sign * 1j * thetas)[:, None]
        smin, smax = _min_max_singular(lam[..., None, None] * eye - a)
        with np.errstate(divide="ignore"):
            k = np.where(smin > 0, np.abs(lam) / smin, np.inf)
            cond = np.where(smin > 0, smax / smin, np.inf)
        k_max = np.maximum(k_max, k.max(axis=1))
        c_max = np.maximum(c_max, cond.max(axis=1))
    _profiles[A] = (thetas, k_max, c_max)
    return _profiles[A]


def sector_resolvent_constant(A: OperatorHandle, half_angle: float) -> tuple[float, float]:
    """``(max |lam| ||R(lam)||, max condition)`` over the fan ``|arg lam| <= half_angle``.

    The fan uses a fixed angle lattice, so fans of nested sectors are nested.
    """
    thetas, k_max, c_max = _angle_profile(A)
    inside = thetas <= half_angle + 1e-12
    return float(k_max[inside].max()), float(c_max[inside].max())


def _bisect_delta(A: OperatorHandle) -> float:
    """Largest ``delta`` in ``(0, pi/2)`` (resolution 0.01) whose fan stays well conditioned."""
    def clear(delta):
        return sector_resolvent_constant(A, math.pi / 2 + delta)[1] < COND_LIMIT

    lo, hi = ANGLE_STEP, math.pi / 2 - ANGLE_STEP
    if clear(hi):
        return hi
    if not clear(lo):
        return 0.0
    while hi - lo > ANGLE_STEP:
        mid = 0.5 * (lo + hi)
        if clear(mid):
            lo = mid
        else:
            hi = mid
    return lo


def check_sectorial(A: OperatorHandle, eta_grid=None, gamma_grid=None, t_grid=None,
                    delta: float | None = None) -> SectorReport:
    """Estimate the constants of the analytic-semigroup criteria on grids.

    ``C_line = max |eta| ||R(gamma + i eta)||``, ``K = max |lam| ||R(lam)||``
    on the sector ``|arg lam| <= pi/2 + delta`` and ``L = max t ||A exp(tA)||``.
    ``delta`` is bisected unless given. The operator is flagged sectorial
    when all three are finite, ``C_line`` grows by less than half the
    ratio of the two smallest ``gamma``, and the running sup of
    ``t ||A exp(tA)||`` over ``t <= 10^k`` varies by at most 20% across
    the last four windows.
    """
    a = A.to_dense()
    if np.linalg.matrix_rank(a) < A.dim:
        raise ValueError("the sectorial criteria assume 0 in the resolvent set")
    scale = max(1.0, operator_norm(A))
    etas = np.asarray(eta_grid if eta_grid is not None else
                      np.concatenate([-np.logspace(-2, 2, 41), np.logspace(-2, 2, 41)]) * scale, dtype=float)
    gammas = np.asarray(gamma_grid if gamma_grid is not None else np.logspace(-4, 0, 5), dtype=float)
    ts = np.asarray(t_grid if t_grid is not None else np.logspace(-2, 4, 61) / scale, dtype=float)
    if np.any(etas == 0) or np.any(gammas <= 0) or np.any(ts <= 0):
        raise ValueError("grids must be positive (eta nonzero)")
    notes = []

    c_by_gamma = {}
    eye = np.eye(A.dim)
    for g in sorted(gammas):
        smin, _ = _min_max_singular((g + 1j * etas)[:, None, None] * eye - a)
        with np.errstate(divide="ignore"):
            c_by_gamma[float(g)] = float(np.max(np.where(smin > 0, np.abs(etas) / smin, np.inf)))
    c_line = max(c_by_gamma.values())
    gs = sorted(c_by_gamma)
    c_growth = c_by_gamma[gs[0]] / c_by_gamma[gs[1]] if len(gs) > 1 and c_by_gamma[gs[1]] > 0 else 1.0
    gamma_ratio = gs[1] / gs[0] if len(gs) > 1 else 1.0

    if delta is None:
        delta = _bisect_delta(A)
        if delta == 0.0:
            notes.append("no sector beyond the right half-plane avoids the spectrum")
    K, _ = sector_resolvent_constant(A, math.pi / 2 + delta)

    l_vals = np.array([t * np.linalg.norm(a @ expm_oracle(A, t), 2) for t in ts])
    L = float(np.max(l_vals))
    # running sup over windows t <= 10^k; a finite L shows up as a flat tail
    edges = np.unique(np.ceil(np.log10(ts) - 1e-9).astype(int))
    l_windows = {int(e): float(np.max(l_vals[ts <= 10.0**e * (1 + 1e-9)])) for e in edges}
    tail = np.array(list(l_windows.values())[-4:])
    l_var = float(1 - tail.min() / tail.max()) if tail.max() > 0 else 0.0
    span = math.log10(ts.max() / ts.min())
    if span < 4 - 1e-9:
        notes.append(f"t grid spans only {span:.2f} decades")

    c_diverges = c_growth >= 0.5 * gamma_ratio and gamma_ratio > 1
    if c_diverges:
        notes.append("C_line grows as gamma -> 0: spectrum on (or near) the imaginary axis")
    finite = all(math.isfinite(v) for v in (K, c_line, L))
    sectorial = finite and not c_diverges and l_var <= 0.2 and delta > 0
    return SectorReport(float(delta), float(K), float(c_line), L, bool(sectorial), c_by_gamma,
                        l_windows, l_var, float(c_growth), etas, gammas, ts, notes)


def check_differentiable_identities(A: OperatorHandle, t: float, n_max: int = 3) -> CheckReport:
    """``A^n T(t) = [A T(t/n)]^n`` for ``n <= n_max`` and finite-difference
    derivatives ``T'(t) = A T(t)``, ``T''(t) = A^2 T(t)``."""
    if not t > 0:
        raise ValueError("t must be positive")
    if n_max > 6 or n_max < 1:
        raise ValueError("n_max must lie in 1..6")
    a = A.to_dense()
    T = expm_oracle(A, t)
    rep = CheckReport("differentiable-identities")
    for n in range(1, n_max + 1):
        lhs = np.linalg.matrix_power(a, n) @ T
        rhs = np.linalg.matrix_power(a @ expm_oracle(A, t / n), n)
        rep.add(f"A^{n} T(t) vs [A T(t/{n})]^{n}", np.linalg.norm(lhs - rhs, 2),
                1e-9 * np.linalg.norm(lhs, 2))

    h1 = 1e-5 * max(1.0, t)
    h2 = 1e-3 * max(1.0, t) / max(1.0, np.linalg.norm(a, 2))
    if t - max(h1, h2) <= 0:
        raise ArithmeticError("finite-difference step does not fit inside (0, t)")
    tp1, tm1 = expm_oracle(A, t + h1), expm_oracle(A, t - h1)
    d1 = (tp1 - tm1) / (2 * h1)
    exact1 = a @ T
    rep.add("T'(t) - A T(t) (relative)", np.linalg.norm(d1 - exact1, 2) / max(np.linalg.norm(exact1, 2), 1e-300),
            1e-6, ok=np.linalg.norm(d1 - exact1, 2) <= 1e-6 * max(np.linalg.norm(exact1, 2), np.linalg.norm(T, 2)))
    tp2, tm2 = expm_oracle(A, t + h2), expm_oracle(A, t - h2)
    d2 = (tp2 - 2 * T + tm2) / (h2 * h2)
    exact2 = a @ a @ T
    err2 = np.linalg.norm(d2 - exact2, 2)
    scale2 = max(np.linalg.norm(exact2, 2), np.linalg.norm(T, 2) * np.linalg.norm(a, 2) ** 2)
    rep.add("T''(t) - A^2 T(t) (relative)", err2 / max(scale2, 1e-300), 1e-5, ok=err2 <= 1e-5 * scale2)
    return rep


def check_commuting_bounded(A: OperatorHandle, F, t_grid=None, seed: int = 0) -> CheckReport:
    """``F`` commutes with every ``T(t)`` exactly when it commutes with ``A``.

    Both directions are tested on the grid; a seeded random ``F'`` serves
    as the non-commuting control.
    """
    F = np.asarray(F, dtype=complex)
    a = A.to_dense()
    if F.shape != a.shape:
        raise ValueError("F must have the operator's shape")
    ts = np.linspace(0.0, 2.0, 9) if t_grid is None else np.asarray(t_grid, dtype=float)
    Ts = [expm_oracle(A, t) for t in ts]

    def commutators(G):
        gen = float(np.linalg.norm(G @ a - a @ G, 2))
        semi = max(float(np.linalg.norm(G @ T - T @ G, 2)) for T in Ts)
        return gen, semi

    gen, semi = commutators(F)
    scale = max(1.0, np.linalg.norm(F, 2) * max(np.linalg.norm(a, 2), max(np.linalg.norm(T, 2) for T in Ts)))
    gen_small = gen <= 1e-9 * scale
    semi_small = semi <= 1e-9 * scale
    rep = CheckReport("commuting-bounded")
    rep.add("||FA - AF||", gen, 1e-9 * scale, ok=True)
    rep.add("max_t ||F T(t) - T(t) F||", semi, 1e-9 * scale, ok=True)
    rep.add("equivalence", float(gen_small != semi_small), 0.0)
    rep.data.update(commutes_with_generator=gen_small, commutes_with_semigroup=semi_small)

    scalar = np.linalg.norm(a - a[0, 0] * np.eye(A.dim), 2) <= 1e-14 * max(1.0, np.linalg.norm(a, 2))
    if scalar:
        rep.notes.append("A is a multiple of the identity: every F commutes, no control available")
    else:
        rng = np.random.default_rng(seed)
        G = rng.standard_normal(a.shape)
        gen_c, semi_c = commutators(G)
        rep.add("control: max_t ||F' T(t) - T(t) F'||", semi_c, 1e-3, ok=semi_c >= 1e-3)
    return rep
