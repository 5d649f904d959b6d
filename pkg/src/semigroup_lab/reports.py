"""Report containers shared by every check and convergence experiment."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np


def fmt(value) -> str:
    """Format a real number for CSV/JSON output: 12 significant digits."""
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.11e}"


def _jsonable(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isfinite(value):
            return float(fmt(value))
        return fmt(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [_jsonable(value.real), _jsonable(value.imag)]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    return value


def dumps(payload) -> str:
    """Deterministic JSON text (sorted keys, rounded floats)."""
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


@dataclass
class Residual:
    label: str
    value: float
    tolerance: float
    # None means "value <= tolerance"; set explicitly for reversed tests
    ok: bool | None = None

    def __post_init__(self):
        self.value = float(self.value)
        self.tolerance = float(self.tolerance)
        if self.ok is None:
            self.ok = bool(self.value <= self.tolerance)
        else:
            self.ok = bool(self.ok)


@dataclass
class CheckReport:
    """Named residuals with pass/fail against declared tolerances."""

    name: str
    residuals: list[Residual] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    data: dict = field(default_factory=dict)
    passed: bool | None = None

    def add(self, label, value, tolerance, ok=None) -> Residual:
        r = Residual(label, value, tolerance, ok)
        self.residuals.append(r)
        return r

    @property
    def ok(self) -> bool:
        if self.passed is not None:
            return self.passed
        return all(r.ok for r in self.residuals)

    def __bool__(self):
        return self.ok

    def residual(self, label) -> Residual:
        for r in self.residuals:
            if r.label == label:
                return r
        raise KeyError(label)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "pass": self.ok,
            "residuals": [
                {"label": r.label, "value": r.value, "tolerance": r.tolerance, "pass": r.ok}
                for r in self.residuals
            ],
        }
        if self.notes:
            out["notes"] = list(self.notes)
        if self.data:
            out["data"] = self.data
        return out

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def summary(self) -> str:
        lines = [f"{self.name}: {'PASS' if self.ok else 'FAIL'}"]
        for r in self.residuals:
            lines.append(f"  {'ok  ' if r.ok else 'FAIL'} {r.label} = {fmt(r.value)} (tol {fmt(r.tolerance)})")
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


def empirical_order(ns, errors) -> float | None:
    """Least-squares slope of -log(error) against log(n).

    Rows with zero error are dropped; fewer than three usable rows gives
    ``None``.
    """
    ns = np.asarray(ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = errors > 0
    if keep.sum() < 3:
        return None
    slope = np.polyfit(np.log(ns[keep]), np.log(errors[keep]), 1)[0]
    return float(-slope)


def running_orders(ns, errors) -> list[float | None]:
    out: list[float | None] = [None]
    for i in range(1, len(ns)):
        e0, e1 = errors[i - 1], errors[i]
        if e0 > 0 and e1 > 0:
            out.append(float(-math.log(e1 / e0) / math.log(ns[i] / ns[i - 1])))
        else:
            out.append(None)
    return out


@dataclass
class ConvergenceTable:
    """Rows ``(n, error)`` for one limit formula, sorted by ``n``."""

    rows: list[tuple[float, float]]
    target: str = ""

    def __post_init__(self):
        self.rows = sorted((float(n), float(e)) for n, e in self.rows)

    @property
    def ns(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    @property
    def errors(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    @property
    def empirical_order(self) -> float | None:
        return empirical_order(self.ns, self.errors)

    @property
    def exact(self) -> bool:
        """All errors vanish to rounding (no order can be measured)."""
        return bool(np.all(self.errors <= 1e-13))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,error,order_running\n")
        for (n, e), p in zip(self.rows, running_orders(self.ns, self.errors)):
            n_txt = str(int(n)) if float(n).is_integer() else fmt(n)
            buf.write(f"{n_txt},{fmt(e)},{fmt(p)}\n")
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "rows": [{"n": n, "error": e} for n, e in self.rows],
            "empirical_order": self.empirical_order,
            "exact": self.exact,
        }

    def summary(self) -> str:
        order = self.empirical_order
        order_txt = "exact" if self.exact else ("undefined" if order is None else f"{order:.4f}")
        lines = [f"{self.target}: empirical order {order_txt}"]
        lines += [f"  n={n:g}  error={e:.4e}" for n, e in self.rows]
        return "\n".join(lines)
