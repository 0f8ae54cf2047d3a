"""Univariate two-sample distances between empirical distributions.

Five ECDF statistics (KS, CVM, AD, WS, DTS) share one kernel that works on
the label pattern of the pooled, sorted sample. The same kernel evaluates a
single split (the observed statistic) or a whole batch of permuted splits,
which is what the resampling layer feeds it.

The sixth kind, the Epps-Singleton test, compares empirical characteristic
functions instead and carries an asymptotic chi-squared p-value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from .errors import (
    DegenerateSample,
    DimensionMismatch,
    EmptySample,
    InsufficientSamples,
    NonFiniteValue,
    ScopeError,
    UnsupportedKind,
)


class DistanceKind(str, Enum):
    KS = "KS"
    CVM = "CVM"
    AD = "AD"
    WS = "WS"
    DTS = "DTS"
    ES = "ES"

    @classmethod
    def parse(cls, name: str) -> "DistanceKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper()
        aliases = {
            "KOLMOGOROVSMIRNOV": "KS",
            "CRAMERVONMISES": "CVM",
            "ANDERSONDARLING": "AD",
            "WASSERSTEIN": "WS",
            "EPPSSINGLETON": "ES",
        }
        key = aliases.get(key.replace("_", "").replace("-", ""), key)
        try:
            return cls(key)
        except ValueError:
            raise UnsupportedKind(
                f"unknown distance kind {name!r}; expected one of "
                f"{', '.join(k.value for k in cls)}"
            ) from None


ECDF_KINDS = (
    DistanceKind.KS,
    DistanceKind.CVM,
    DistanceKind.AD,
    DistanceKind.WS,
    DistanceKind.DTS,
)
ALL_KINDS = ECDF_KINDS + (DistanceKind.ES,)


@dataclass(frozen=True)
class SortedSample:
    """Ascending, finite, non-empty sample. Build it with :func:`make_sorted`."""

    values: np.ndarray

    def __len__(self):
        return self.values.shape[0]

    def ecdf(self, x):
        """Right-continuous ECDF, ``#{v <= x} / len``."""
        return np.searchsorted(self.values, x, side="right") / len(self)


def make_sorted(sample) -> SortedSample:
    if isinstance(sample, SortedSample):
        return sample
    values = np.asarray(sample, dtype=float).ravel()
    if values.size == 0:
        raise EmptySample("sample must contain at least one value")
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NonFiniteValue(int(bad[0]), float(values[bad[0]]))
    values = np.sort(values, kind="stable")
    values.setflags(write=False)
    return SortedSample(values)


class PooledSample:
    """Sorted pooled sample of sizes (n, m) plus its tie structure.

    Splits of the pool are boolean label rows over the sorted positions
    (True marks membership in the first sample). ECDFs only change at the
    last position of each tie group, so every statistic is evaluated there.
    """

    def __init__(self, values: np.ndarray, n: int, m: int):
        self.z = values
        self.n = n
        self.m = m
        size = values.shape[0]
        last_of_group = np.ones(size, dtype=bool)
        last_of_group[:-1] = values[1:] != values[:-1]
        self.ends = np.flatnonzero(last_of_group)
        self.mult = np.diff(np.concatenate(([-1], self.ends)))
        self.unique = values[self.ends]
        self.widths = np.diff(self.unique)
        self.pooled_cdf = (self.ends + 1) / size

    @classmethod
    def from_samples(cls, a: SortedSample, b: SortedSample):
        joined = np.concatenate((a.values, b.values))
        order = np.argsort(joined, kind="stable")
        pool = cls(joined[order], len(a), len(b))
        return pool, order < len(a)

    @property
    def size(self):
        return self.n + self.m

    def statistics(self, labels: np.ndarray, kind: DistanceKind) -> np.ndarray:
        """Statistic for each label row; ``labels`` has shape (B, N) or (N,)."""
        labels = np.atleast_2d(labels)
        n, m, size = self.n, self.m, self.size
        in_a = np.cumsum(labels, axis=1, dtype=np.int64)[:, self.ends]
        fa = in_a / n
        fb = ((self.ends + 1) - in_a) / m
        diff = fa - fb
        if kind is DistanceKind.KS:
            return np.abs(diff).max(axis=1)
        if kind is DistanceKind.CVM:
            return (n * m / size**2) * (diff**2 @ self.mult)
        if kind is DistanceKind.WS:
            return np.abs(diff[:, :-1]) @ self.widths
        if len(self.unique) < 2:
            raise DegenerateSample(f"{kind.value} needs at least two distinct pooled values")
        h = self.pooled_cdf[:-1]
        weight = 1.0 / (h * (1.0 - h))
        if kind is DistanceKind.AD:
            # the top group has H = 1, where the weight is singular
            return (n * m / size**2) * (diff[:, :-1] ** 2 @ (weight * self.mult[:-1]))
        if kind is DistanceKind.DTS:
            return diff[:, :-1] ** 2 @ (weight * self.widths)
        raise UnsupportedKind(f"{kind.value} is not an ECDF distance")


def _ecdf_distance(a, b, kind: DistanceKind) -> float:
    pool, labels = PooledSample.from_samples(make_sorted(a), make_sorted(b))
    return float(pool.statistics(labels, kind)[0])


def ks_distance(a, b) -> float:
    """Largest absolute gap between the two ECDFs, in [0, 1]."""
    return _ecdf_distance(a, b, DistanceKind.KS)


def cvm_distance(a, b) -> float:
    """Two-sample Cramer-von Mises statistic.

    ``T = n m / (n + m)^2 * sum_j (F_a(z_j) - F_b(z_j))^2`` over every pooled
    order statistic ``z_j``.
    """
    return _ecdf_distance(a, b, DistanceKind.CVM)


def ad_distance(a, b) -> float:
    """Two-sample Anderson-Darling statistic (rank form).

    ``n m / N^2 * sum_j (F_a - F_b)^2 / (H (1 - H))`` at pooled order statistics,
    skipping points where the pooled ECDF ``H`` equals one. Without ties this
    equals ``1/(nm) sum_{j<N} (N M_j - n j)^2 / (j (N - j))``.
    """
    return _ecdf_distance(a, b, DistanceKind.AD)


def wasserstein_distance(a, b) -> float:
    """1-Wasserstein distance, the exact integral of ``|F_a - F_b|``."""
    return _ecdf_distance(a, b, DistanceKind.WS)


def dts_distance(a, b) -> float:
    """Integral over x of ``(F_a - F_b)^2 / (H (1 - H))``.

    Combines the Anderson-Darling weight with Wasserstein-style integration
    over the gaps between pooled values.
    """
    return _ecdf_distance(a, b, DistanceKind.DTS)


@dataclass(frozen=True)
class EsParams:
    t: tuple = (0.4, 0.8)

    def __post_init__(self):
        t = tuple(float(v) for v in self.t)
        if not t:
            raise ScopeError("EsParams.t needs at least one evaluation point")
        if not all(math.isfinite(v) and v > 0 for v in t):
            raise ScopeError(f"EsParams.t must be finite and positive, got {t}")
        object.__setattr__(self, "t", t)

    @property
    def nominal_dof(self):
        return 2 * len(self.t)


class EsResult(NamedTuple):
    w2: float
    p_value: float
    dof: int


def _ecf_components(x: np.ndarray, ts: np.ndarray) -> np.ndarray:
    tx = np.outer(x, ts)
    return np.hstack((np.cos(tx), np.sin(tx)))


def es_statistic(a, b, params: EsParams = EsParams()) -> EsResult:
    """Epps-Singleton statistic W2 and its asymptotic chi-squared p-value.

    Evaluation points are divided by the semi-interquartile range of the
    pooled sample. The covariance of the stacked real/imaginary ECF parts is
    estimated from both samples; degrees of freedom are its rank. No
    small-sample correction is applied.
    """
    a, b = make_sorted(a), make_sorted(b)
    n, m = len(a), len(b)
    need = 2 * len(params.t) + 1
    if n < need or m < need:
        raise InsufficientSamples(f"ES needs >= {need} values per sample, got {n} and {m}")
    pooled = np.concatenate((a.values, b.values))
    q25, q75 = np.percentile(pooled, [25, 75])
    semi_iqr = (q75 - q25) / 2
    if not semi_iqr > 0:
        raise DegenerateSample("pooled semi-interquartile range is zero")
    ts = np.asarray(params.t) / semi_iqr
    ga = _ecf_components(a.values, ts)
    gb = _ecf_components(b.values, ts)
    size = n + m
    cov = (size / n) * np.cov(ga.T, bias=True) + (size / m) * np.cov(gb.T, bias=True)
    cov = np.atleast_2d(cov)
    dof = int(np.linalg.matrix_rank(cov))
    if dof == 0:
        raise DegenerateSample("ECF covariance has rank zero")
    g_diff = ga.mean(axis=0) - gb.mean(axis=0)
    w2 = float(size * g_diff @ np.linalg.pinv(cov) @ g_diff)
    w2 = max(w2, 0.0)
    return EsResult(w2, float(stats.chi2.sf(w2, dof)), dof)


_ECDF_FUNCS = {
    DistanceKind.KS: ks_distance,
    DistanceKind.CVM: cvm_distance,
    DistanceKind.AD: ad_distance,
    DistanceKind.WS: wasserstein_distance,
    DistanceKind.DTS: dts_distance,
}


def distance(a, b, kind: DistanceKind, es_params: EsParams = EsParams()) -> float:
    """Univariate distance of any kind; for ES this is W2."""
    kind = DistanceKind.parse(kind) if not isinstance(kind, DistanceKind) else kind
    if kind is DistanceKind.ES:
        return es_statistic(a, b, es_params).w2
    return _ECDF_FUNCS[kind](a, b)


@dataclass(frozen=True)
class SddResult:
    kind: DistanceKind
    per_feature: tuple
    aggregate: float
    p_value: float | None = None
    dof: int | None = field(default=None, compare=False)


def _matrix(x) -> np.ndarray:
    data = np.asarray(getattr(x, "data", x), dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D feature matrix, got shape {data.shape}")
    return data


def mean_exact(values: Sequence[float]) -> float:
    """Correctly rounded mean, independent of summation order."""
    return math.fsum(values) / len(values)


def sdd(reference, window, kind: DistanceKind, es_params: EsParams = EsParams()) -> SddResult:
    """Per-feature distances between two feature matrices and their mean.

    For ES the result also carries ``p_value``: the chi-squared upper tail of
    the aggregate W2 at the per-feature degrees of freedom. ECDF kinds leave
    it unset (see :mod:`scopemon.resampling`).
    """
    kind = DistanceKind.parse(kind) if not isinstance(kind, DistanceKind) else kind
    ref, win = _matrix(reference), _matrix(window)
    if ref.shape[1] != win.shape[1]:
        raise DimensionMismatch(
            f"reference has {ref.shape[1]} features, window has {win.shape[1]}"
        )
    if ref.shape[1] < 1 or ref.shape[0] < 1 or win.shape[0] < 1:
        raise EmptySample("sdd needs at least one row and one feature on both sides")
    per_feature = []
    dofs = []
    for col in range(ref.shape[1]):
        try:
            if kind is DistanceKind.ES:
                res = es_statistic(ref[:, col], win[:, col], es_params)
                per_feature.append(res.w2)
                dofs.append(res.dof)
            else:
                per_feature.append(_ECDF_FUNCS[kind](ref[:, col], win[:, col]))
        except ScopeError as exc:
            exc.feature_index = col
            exc.args = (f"feature {col}: {exc}",)
            raise
    aggregate = mean_exact(per_feature)
    if kind is DistanceKind.ES:
        dof = max(dofs)
        return SddResult(kind, tuple(per_feature), aggregate,
                         float(stats.chi2.sf(aggregate, dof)), dof)
    return SddResult(kind, tuple(per_feature), aggregate)
