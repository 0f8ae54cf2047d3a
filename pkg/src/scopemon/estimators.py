"""Calibration sets and Scope Compliance Uncertainty Estimators (SCUEs).

A SCUE maps an aggregate SDD to an expected inaccuracy in [0, 1]. It is fit
on calibration batches whose share of in-scope rows sweeps 0..1, then
clamped: below the smallest calibration SDD it returns 0, above the largest
it returns 1, and in between it follows the running maximum of the fitted
curve so the output never decreases as the SDD grows.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .distances import DistanceKind, EsParams, sdd
from .errors import (
    DegeneratePoints,
    InsufficientLabelled,
    NonConvergence,
    ScopeError,
    UnsupportedKind,
)
from .features import FeatureMatrix


@dataclass(frozen=True)
class CalibrationSet:
    batches: tuple
    nominal_ratio: tuple
    observed_accuracy: tuple
    n: int
    m: int


def correct_count(i: int, n: int, m: int) -> int:
    """``ceil(i * n / m)`` in exact integer arithmetic."""
    return -(-i * n // m)


def build_set(x_cal: FeatureMatrix, n: int = 50, m: int = 20, seed: int = 0,
              replace: bool = True) -> CalibrationSet:
    """Build m + 1 batches of n rows whose correct share sweeps 0, 1/m, ..., 1.

    Batch i holds ``ceil(i n / m)`` correct rows and the rest incorrect, so
    every batch has exactly n rows. Rows are drawn at random (with
    replacement unless ``replace=False``) and each batch is shuffled.
    """
    if x_cal.correct is None:
        raise ScopeError("calibration data needs a correctness label per row")
    if n < 1 or m < 1:
        raise ScopeError(f"n and m must be positive, got n={n}, m={m}")
    good = np.flatnonzero(x_cal.correct == 1)
    bad = np.flatnonzero(x_cal.correct == 0)
    if replace:
        if len(good) == 0 or len(bad) == 0:
            raise InsufficientLabelled(
                f"need rows of both labels, got {len(good)} correct and {len(bad)} incorrect"
            )
    elif len(good) < n or len(bad) < n:
        raise InsufficientLabelled(
            f"sampling without replacement needs >= {n} rows per label, "
            f"got {len(good)} correct and {len(bad)} incorrect"
        )
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    batches, ratios, accuracy = [], [], []
    for i in range(m + 1):
        n_good = correct_count(i, n, m)
        idx = np.concatenate((
            rng.choice(good, n_good, replace=replace),
            rng.choice(bad, n - n_good, replace=replace),
        ))
        batch = x_cal.take(rng.permutation(idx))
        batches.append(batch)
        ratios.append(i / m)
        accuracy.append(batch.accuracy())
    return CalibrationSet(tuple(batches), tuple(ratios), tuple(accuracy), n, m)


class CalibrationPoint(NamedTuple):
    sdd: float
    inaccuracy: float


def measure_calibration(cal: CalibrationSet, reference, kind: DistanceKind,
                        es_params: EsParams = EsParams()) -> list:
    return [
        CalibrationPoint(sdd(reference, batch, kind, es_params).aggregate, 1.0 - acc)
        for batch, acc in zip(cal.batches, cal.observed_accuracy)
    ]


def write_points_csv(path, points):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["batch", "sdd", "inaccuracy"])
        for i, p in enumerate(points):
            writer.writerow([i, repr(float(p[0])), repr(float(p[1]))])


class FitForm(str, Enum):
    POLY2 = "poly2"
    LOG3 = "log3"
    SIGMOID3 = "sigmoid3"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ScopeError(
                f"unknown fit form {name!r}; expected one of {', '.join(f.value for f in cls)}"
            ) from None


def default_form(kind: DistanceKind) -> FitForm:
    return FitForm.LOG3 if kind is DistanceKind.ES else FitForm.POLY2


def curve(form: FitForm, coeffs, x):
    x = np.asarray(x, dtype=float)
    p, q, r = coeffs
    if form is FitForm.POLY2:
        return p + x * (q + x * r)
    if form is FitForm.LOG3:
        return p * np.log(x + q) + r
    if form is FitForm.SIGMOID3:
        return p / (1.0 + np.exp(-q * (x - r)))
    raise UnsupportedKind(f"unknown fit form {form}")


@dataclass(frozen=True)
class Scue:
    kind: DistanceKind
    form: FitForm
    coeffs: tuple
    sdd_min: float
    sdd_max: float
    fit_rmse: float
    fit_r2: float

    def __post_init__(self):
        if not self.sdd_min < self.sdd_max:
            raise DegeneratePoints(f"sdd_min {self.sdd_min} must be below sdd_max {self.sdd_max}")
        if len(self.coeffs) != 3:
            raise ScopeError(f"{self.form.value} takes 3 coefficients, got {len(self.coeffs)}")

    def fitted(self, x):
        """The raw fitted curve, without envelope or clamp."""
        return curve(self.form, self.coeffs, x)

    def _peaks(self):
        # interior local maxima; only a concave quadratic has one
        if self.form is FitForm.POLY2 and self.coeffs[2] < 0:
            vertex = -self.coeffs[1] / (2 * self.coeffs[2])
            if self.sdd_min < vertex < self.sdd_max:
                return (vertex,)
        return ()

    def __call__(self, x):
        return evaluate_scue(self, x)


def evaluate_scue(scue: Scue, x):
    """Bounded, non-decreasing uncertainty for one SDD value or an array of them."""
    arr = np.asarray(x, dtype=float)
    lo, hi = scue.sdd_min, scue.sdd_max
    inside = np.clip(arr, lo, hi)
    value = np.maximum(scue.fitted(inside), scue.fitted(lo))
    for peak in scue._peaks():
        value = np.where(inside >= peak, np.maximum(value, scue.fitted(peak)), value)
    value = np.clip(value, 0.0, 1.0)
    value = np.where(arr > hi, 1.0, np.where(arr < lo, 0.0, value))
    return float(value) if value.ndim == 0 else value


def _points(points):
    pts = np.asarray([(float(p[0]), float(p[1])) for p in points], dtype=float).reshape(-1, 2)
    if len(pts) < 5:
        raise DegeneratePoints(f"need at least 5 calibration points, got {len(pts)}")
    if not np.isfinite(pts).all():
        raise DegeneratePoints("calibration points contain non-finite values")
    x, u = pts[:, 0], pts[:, 1]
    if np.ptp(x) == 0:
        raise DegeneratePoints("all calibration SDD values are equal")
    return x, u


def _fit_poly2(x, u):
    design = np.stack((np.ones_like(x), x, x * x), axis=1)
    coeffs, *_ = np.linalg.lstsq(design, u, rcond=None)
    return tuple(float(c) for c in coeffs)


def _multistart(residual, starts, lower, upper, ftol):
    best, diagnostics = None, []
    for start in starts:
        try:
            res = optimize.least_squares(
                residual, start, bounds=(lower, upper), method="trf",
                ftol=ftol, xtol=1e-15, gtol=1e-15, max_nfev=5000,
            )
        except (ValueError, FloatingPointError) as exc:
            diagnostics.append({"start": list(map(float, start)), "error": str(exc)})
            continue
        diagnostics.append({"start": list(map(float, start)), "status": int(res.status),
                            "nfev": int(res.nfev), "cost": float(res.cost)})
        if res.status > 0 and np.isfinite(res.cost) and (best is None or res.cost < best.cost):
            best = res
    if best is None:
        raise NonConvergence("no start converged", diagnostics)
    return tuple(float(v) for v in best.x)


def _fit_log3(x, u, n_starts=12, ftol=1e-10):
    span = float(np.ptp(x))
    eps = 1e-9 * max(1.0, span)
    b_low = -float(x.min()) + eps
    starts = []
    for offset in span * np.logspace(-4, 2, n_starts):
        b0 = b_low + offset
        design = np.stack((np.log(x + b0), np.ones_like(x)), axis=1)
        (a0, c0), *_ = np.linalg.lstsq(design, u, rcond=None)
        starts.append(np.array([a0, b0, c0]))
    with np.errstate(invalid="ignore", divide="ignore"):
        return _multistart(
            lambda p: p[0] * np.log(x + p[1]) + p[2] - u,
            starts, [-np.inf, b_low, -np.inf], [np.inf, np.inf, np.inf], ftol,
        )


def _fit_sigmoid3(x, u, ftol=1e-10):
    span = float(np.ptp(x))
    top = float(np.clip(u.max(), 0.05, 1.5))
    starts = [
        np.array([level, k / span, centre])
        for level in (top, 1.0)
        for k in (1.0, 5.0, 25.0)
        for centre in np.quantile(x, (0.25, 0.5, 0.75))
    ]
    with np.errstate(over="ignore"):
        return _multistart(
            lambda p: p[0] / (1.0 + np.exp(-p[1] * (x - p[2]))) - u,
            starts, [1e-12, 1e-12, -np.inf], [1.5, np.inf, np.inf], ftol,
        )


def fit_scue(points, kind: DistanceKind, form: FitForm | None = None) -> Scue:
    """Least-squares fit of inaccuracy against SDD, recorded as a :class:`Scue`."""
    kind = DistanceKind.parse(kind) if not isinstance(kind, DistanceKind) else kind
    form = default_form(kind) if form is None else FitForm.parse(form)
    x, u = _points(points)
    if form is FitForm.POLY2:
        coeffs = _fit_poly2(x, u)
    elif form is FitForm.LOG3:
        coeffs = _fit_log3(x, u)
    else:
        coeffs = _fit_sigmoid3(x, u)
    resid = curve(form, coeffs, x) - u
    ss_res = float(resid @ resid)
    ss_tot = float(((u - u.mean()) ** 2).sum())
    rmse = math.sqrt(ss_res / len(u))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return Scue(kind, form, coeffs, float(x.min()), float(x.max()), rmse, r2)


def calibrate(x_cal: FeatureMatrix, reference, kinds, n=50, m=20, seed=0, forms=None,
              es_params: EsParams = EsParams()):
    """Build one calibration set and fit a SCUE per kind.

    Returns ``(calibration_set, {kind: points}, {kind: scue})``.
    """
    forms = forms or {}
    cal = build_set(x_cal, n, m, seed)
    points, scues = {}, {}
    for kind in kinds:
        points[kind] = measure_calibration(cal, reference, kind, es_params)
        scues[kind] = fit_scue(points[kind], kind, forms.get(kind))
    return cal, points, scues
