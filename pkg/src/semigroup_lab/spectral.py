"""Spectral mapping checks: ``exp(t sigma(A)) = sigma(T(t))`` and relatives."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import OperatorHandle, spectrum
from .resolvent import ShiftError, resolvent
from .semigroup import expm_oracle


@dataclass
class MultisetMatch:
    left: np.ndarray
    right: np.ndarray
    pairing: list[int]
    distances: np.ndarray
    tolerances: np.ndarray
    max_pair_distance: float
    unmatched: int
    subset: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        if not self.subset and self.unmatched:
            return False
        return bool(np.all(self.distances <= self.tolerances))

    def __bool__(self):
        return self.ok

    def to_dict(self) -> dict:
        return {
            "pass": self.ok,
            "max_pair_distance": self.max_pair_distance,
            "unmatched": self.unmatched,
            "pairs": [
                {"left": self.left[i], "right": self.right[j], "distance": d, "tolerance": tol}
                for i, (j, d, tol) in enumerate(zip(self.pairing, self.distances, self.tolerances))
            ],
            "notes": list(self.notes),
        }


def match_multisets(left, right, rtol: float, scale=None, subset: bool = False) -> MultisetMatch:
    """Greedy nearest-neighbour pairing after sorting ``left`` by (Re, Im).

    Each left element takes the closest unused right element (ties go to
    the lower index). Tolerances are ``rtol * scale`` per pair, with scale
    defaulting to ``max(1, |left_i|)``.
    """
    left = np.asarray(left, dtype=complex)
    right = np.asarray(right, dtype=complex)
    order = np.lexsort((left.imag, left.real))
    left = left[order]
    if scale is None:
        scale = np.maximum(1.0, np.abs(left))
    else:
        scale = np.broadcast_to(np.asarray(scale, dtype=float), left.shape)[order]
    used = np.zeros(right.size, dtype=bool)
    pairing, dists = [], []
    for z in left:
        d = np.where(used, np.inf, np.abs(right - z))
        if not np.any(np.isfinite(d)):
            break
        j = int(np.argmin(d))
        used[j] = True
        pairing.append(j)
        dists.append(d[j])
    dists = np.asarray(dists, dtype=float)
    tol = rtol * np.asarray(scale[: len(dists)], dtype=float)
    unmatched = int(left.size - len(pairing)) + int(right.size - used.sum())
    return MultisetMatch(left, right, pairing, dists, tol,
                         float(dists.max()) if dists.size else 0.0, unmatched, subset)


def spectral_mapping_check(A: OperatorHandle, t: float, rtol: float = 1e-7) -> MultisetMatch:
    """Match ``{exp(t lam_i)}`` against the eigenvalues of ``exp(tA)``."""
    ev = spectrum(A).eigenvalues
    left = np.exp(t * ev)
    right = np.linalg.eigvals(expm_oracle(A, t))
    return match_multisets(left, right, rtol)


def derivative_spectral_mapping_check(A: OperatorHandle, t: float, n: int, rtol: float = 1e-7) -> MultisetMatch:
    """``{lam^n exp(lam t)}`` as a sub-multiset of ``sigma(A^n T(t))``."""
    if not t > 0:
        raise ValueError("t must be positive")
    if not 1 <= n <= 4:
        raise ValueError("n must lie in 1..4")
    ev = spectrum(A).eigenvalues
    left = ev**n * np.exp(ev * t)
    deriv = np.linalg.matrix_power(A.to_dense(), n) @ expm_oracle(A, t)
    right = np.linalg.eigvals(deriv)
    m = match_multisets(left, right, rtol, subset=True)
    if m.unmatched:
        m.notes.append(f"{m.unmatched} eigenvalues of the derivative are unmatched")
    return m


def resolvent_spectrum_check(A: OperatorHandle, lam: complex, rtol: float = 1e-8) -> MultisetMatch:
    """Match ``{1/(lam - zeta_i)}`` against ``sigma(R(lam; A))``.

    In finite dimension ``0`` is never in the spectrum of the resolvent,
    so the ``{0}`` term of the unbounded case is left out.
    """
    r = resolvent(A, lam)
    if not r.in_resolvent_set:
        raise ShiftError(f"shift {lam} lies in the spectrum")
    ev = spectrum(A).eigenvalues
    left = 1.0 / (lam - ev)
    right = np.linalg.eigvals(r.matrix)
    m = match_multisets(left, right, rtol)
    m.notes.append("0 excluded: the resolvent of a matrix is invertible")
    return m


def recover_spectrum_from_resolvent(A: OperatorHandle, lam: complex) -> np.ndarray:
    """``zeta = lam - 1/mu`` for each eigenvalue ``mu`` of ``R(lam; A)``."""
    r = resolvent(A, lam)
    if not r.in_resolvent_set:
        raise ShiftError(f"shift {lam} lies in the spectrum")
    return lam - 1.0 / np.linalg.eigvals(r.matrix)
