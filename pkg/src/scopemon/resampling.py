"""Permutation p-values, KS/AD critical values and bootstrapped power analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .distances import (
    DistanceKind,
    EsParams,
    PooledSample,
    make_sorted,
    sdd,
)
from .errors import InvalidAlpha, ScopeError, SizeExceedsData, UnsupportedKind

POWER_KINDS = (DistanceKind.KS, DistanceKind.AD, DistanceKind.ES)

# permuted statistics within this relative distance of the observed one count as ties
_TIE_RTOL = 1e-12
_CHUNK = 1024


def _rng(seed):
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def _check_alpha(alpha):
    if not (isinstance(alpha, (int, float)) and 0 < alpha < 1):
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha!r}")


def _permuted_stats(pool: PooledSample, base: np.ndarray, kind, draws, rng) -> np.ndarray:
    out = np.empty(draws)
    done = 0
    while done < draws:
        rows = min(_CHUNK, draws - done)
        labels = rng.permuted(np.broadcast_to(base, (rows, base.size)), axis=1)
        out[done:done + rows] = pool.statistics(labels, kind)
        done += rows
    return out


def bootstrap_p_value(a, b, kind: DistanceKind, n_boot: int = 999, seed: int = 0) -> float:
    """Permutation p-value of an ECDF distance.

    The pooled sample is re-split at random into groups of the original
    sizes ``n_boot`` times; ``p = (1 + #{T* >= T}) / (n_boot + 1)``.
    """
    kind = DistanceKind.parse(kind) if not isinstance(kind, DistanceKind) else kind
    if kind is DistanceKind.ES:
        raise UnsupportedKind("ES has an analytic chi-squared p-value; use es_statistic")
    if n_boot < 100:
        raise ScopeError(f"n_boot must be >= 100, got {n_boot}")
    pool, labels = PooledSample.from_samples(make_sorted(a), make_sorted(b))
    observed = pool.statistics(labels, kind)[0]
    perm = _permuted_stats(pool, labels, kind, n_boot, _rng(seed))
    hits = np.count_nonzero(perm >= observed - _TIE_RTOL * max(1.0, abs(observed)))
    return (1 + int(hits)) / (n_boot + 1)


@dataclass(frozen=True)
class CriticalValue:
    kind: DistanceKind
    alpha: float
    n: int
    m2: int
    value: float


def ks_critical_value(n: int, m2: int, alpha: float) -> CriticalValue:
    """Asymptotic two-sample KS critical value ``c(alpha) sqrt((n + m2) / (n m2))``."""
    _check_alpha(alpha)
    if n < 1 or m2 < 1:
        raise ScopeError(f"sample sizes must be positive, got {n}, {m2}")
    c_alpha = math.sqrt(-math.log(alpha / 2) / 2)
    return CriticalValue(DistanceKind.KS, alpha, n, m2, c_alpha * math.sqrt((n + m2) / (n * m2)))


@lru_cache(maxsize=256)
def _ad_null(n: int, m2: int, draws: int, seed: int) -> np.ndarray:
    # only ranks matter for continuous data, so any distinct values will do
    pool = PooledSample(np.arange(n + m2, dtype=float), n, m2)
    base = np.zeros(n + m2, dtype=bool)
    base[:n] = True
    null = np.sort(_permuted_stats(pool, base, DistanceKind.AD, draws, _rng(seed)))
    null.setflags(write=False)
    return null


def ad_critical_value(alpha: float, n: int, m2: int, seed: int = 0, draws: int = 10_000) -> CriticalValue:
    """(1 - alpha) quantile of the null two-sample AD statistic by Monte Carlo.

    The null sample is cached per (n, m2, draws, seed), so every alpha reuses
    the same draws and the value is monotone in alpha for a fixed seed.
    """
    _check_alpha(alpha)
    if n < 1 or m2 < 1:
        raise ScopeError(f"sample sizes must be positive, got {n}, {m2}")
    if draws < 10_000:
        raise ScopeError(f"AD critical values need >= 10000 draws, got {draws}")
    null = _ad_null(int(n), int(m2), int(draws), int(seed))
    return CriticalValue(DistanceKind.AD, alpha, n, m2, float(np.quantile(null, 1 - alpha)))


def bonferroni_level(alpha: float, trials: int) -> float:
    """Per-trial significance level ``alpha / trials``."""
    _check_alpha(alpha)
    if trials < 1:
        raise ScopeError(f"trials must be >= 1, got {trials}")
    return alpha / trials


@dataclass(frozen=True)
class PowerCurve:
    kind: DistanceKind
    sizes: tuple
    power: tuple
    alpha: float
    trials: int
    level: float
    n_star: int | None

    def rows(self):
        return list(zip(self.sizes, self.power))


def power_analysis(
    in_scope,
    out_scope,
    reference,
    sizes,
    kind: DistanceKind = DistanceKind.KS,
    alpha: float = 0.1,
    trials: int = 20,
    seed: int = 0,
    replace: bool = True,
    es_params: EsParams = EsParams(),
) -> PowerCurve:
    """Fraction of bootstrap trials in which a size-``s`` batch separates the sets.

    A trial passes when an in-scope batch is accepted and an out-of-scope
    batch is rejected against ``reference``, each at the Bonferroni level
    ``alpha / trials``. KS and AD compare the aggregate SDD with the
    univariate critical value; ES compares the aggregate p-value with the level.
    ``n_star`` is the first size whose power is exactly 1.
    """
    kind = DistanceKind.parse(kind) if not isinstance(kind, DistanceKind) else kind
    if kind not in POWER_KINDS:
        raise UnsupportedKind(f"power analysis supports KS, AD and ES, not {kind.value}")
    sizes = [int(s) for s in sizes]
    if not sizes or any(s < 1 for s in sizes) or sizes != sorted(set(sizes)):
        raise ScopeError(f"sizes must be strictly ascending positive integers, got {sizes}")
    level = bonferroni_level(alpha, trials)
    ins = np.asarray(getattr(in_scope, "data", in_scope), dtype=float)
    outs = np.asarray(getattr(out_scope, "data", out_scope), dtype=float)
    ref = np.asarray(getattr(reference, "data", reference), dtype=float)
    if not replace and sizes[-1] > min(len(ins), len(outs)):
        raise SizeExceedsData(
            f"size {sizes[-1]} exceeds available rows ({len(ins)} in scope, {len(outs)} out of scope)"
        )

    streams = np.random.SeedSequence(int(seed)).spawn(len(sizes))
    power = []
    for s, stream in zip(sizes, streams):
        rng = np.random.default_rng(stream)
        crit = None
        if kind is DistanceKind.KS:
            crit = ks_critical_value(len(ref), s, level).value
        elif kind is DistanceKind.AD:
            crit = ad_critical_value(level, len(ref), s, seed=int(seed)).value
        passed = 0
        for _ in range(trials):
            batch_in = ins[rng.choice(len(ins), s, replace=replace)]
            batch_out = outs[rng.choice(len(outs), s, replace=replace)]
            res_in = sdd(ref, batch_in, kind, es_params)
            res_out = sdd(ref, batch_out, kind, es_params)
            if crit is None:
                ok = res_in.p_value > level and res_out.p_value < level
            else:
                ok = res_in.aggregate < crit and res_out.aggregate > crit
            passed += ok
        power.append(passed / trials)
    n_star = next((s for s, p in zip(sizes, power) if p == 1.0), None)
    return PowerCurve(kind, tuple(sizes), tuple(power), alpha, trials, level, n_star)
