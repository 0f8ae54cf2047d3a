"""Runtime scope-compliance monitor over a sliding window of feature vectors."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .distances import DistanceKind, EsParams, mean_exact, sdd
from .errors import DimensionMismatch, ScopeError


class AggregateRule(str, Enum):
    MAX = "max"
    MEAN = "mean"
    PER_KIND = "per_kind"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower().replace("-", "_"))
        except ValueError:
            raise ScopeError(
                f"unknown aggregate rule {name!r}; expected one of {', '.join(r.value for r in cls)}"
            ) from None


class Decision(str, Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"


@dataclass(frozen=True)
class MonitorConfig:
    window: int
    stride: int | None = None
    kinds: tuple = (DistanceKind.KS,)
    threshold: float = 0.5
    aggregate_rule: AggregateRule = AggregateRule.PER_KIND

    def __post_init__(self):
        stride = self.window if self.stride is None else self.stride
        object.__setattr__(self, "stride", int(stride))
        object.__setattr__(self, "kinds", tuple(DistanceKind.parse(k) for k in self.kinds))
        object.__setattr__(self, "aggregate_rule", AggregateRule.parse(self.aggregate_rule))
        if self.window < 1:
            raise ScopeError(f"window must be >= 1, got {self.window}")
        if not 1 <= self.stride <= self.window:
            raise ScopeError(f"stride must lie in [1, window={self.window}], got {self.stride}")
        if not self.kinds:
            raise ScopeError("at least one distance kind is required")
        if not 0.0 <= self.threshold <= 1.0:
            raise ScopeError(f"threshold must lie in [0, 1], got {self.threshold}")


class KindReading(NamedTuple):
    sdd: float
    uncertainty: float


@dataclass(frozen=True)
class UncertaintyReport:
    window_id: int
    per_kind: dict
    decision: Decision
    samples_spanned: tuple
    uncertainty: float
    kind_decisions: dict = field(default_factory=dict)


def aggregate_uncertainty(per_kind: dict, rule: AggregateRule) -> float:
    values = [reading.uncertainty for reading in per_kind.values()]
    if rule is AggregateRule.MEAN:
        return mean_exact(values)
    # PER_KIND rejects when any kind exceeds the threshold, i.e. when the max does
    return max(values)


def decide(report: UncertaintyReport, config: MonitorConfig) -> Decision:
    unknown = set(report.per_kind) - set(config.kinds)
    if unknown:
        raise ScopeError(f"report carries kinds not in the config: {sorted(k.value for k in unknown)}")
    level = aggregate_uncertainty(report.per_kind, config.aggregate_rule)
    return Decision.REJECT if level > config.threshold else Decision.ACCEPT


class Monitor:
    """Single-stream monitor; call :meth:`push` once per operational sample.

    ``reference`` is the training-time feature matrix in the same space as
    the pushed samples (after any ``transform``). ``scues`` maps each
    configured kind to its fitted estimator.
    """

    def __init__(self, reference, scues: dict, config: MonitorConfig,
                 es_params: EsParams = EsParams(), transform=None):
        self.reference = np.asarray(getattr(reference, "data", reference), dtype=float)
        missing = [k.value for k in config.kinds if k not in scues]
        if missing:
            raise ScopeError(f"no fitted estimator for kinds {missing}")
        self.scues = scues
        self.config = config
        self.es_params = es_params
        self.transform = transform
        self._buffer = deque(maxlen=config.window)
        self._seen = 0
        self._since = 0
        self._next_id = 0

    @property
    def dim(self):
        return self.reference.shape[1]

    def push(self, sample) -> UncertaintyReport | None:
        vec = np.asarray(sample, dtype=float).ravel()
        if self.transform is not None:
            vec = np.asarray(self.transform(vec[None, :]), dtype=float).ravel()
        if vec.shape[0] != self.dim:
            raise DimensionMismatch(f"sample has {vec.shape[0]} features, reference has {self.dim}")
        self._buffer.append(vec)
        self._seen += 1
        self._since += 1
        full = len(self._buffer) == self.config.window
        if full and (self._next_id == 0 or self._since >= self.config.stride):
            self._since = 0
            return self._report()
        return None

    def run(self, stream) -> list:
        out = []
        for sample in stream:
            report = self.push(sample)
            if report is not None:
                out.append(report)
        return out

    def _report(self) -> UncertaintyReport:
        window = np.stack(self._buffer)
        per_kind, kind_decisions = {}, {}
        for kind in self.config.kinds:
            value = sdd(self.reference, window, kind, self.es_params).aggregate
            u = float(self.scues[kind](value))
            per_kind[kind] = KindReading(value, u)
            kind_decisions[kind] = Decision.REJECT if u > self.config.threshold else Decision.ACCEPT
        level = aggregate_uncertainty(per_kind, self.config.aggregate_rule)
        report = UncertaintyReport(
            window_id=self._next_id,
            per_kind=per_kind,
            decision=Decision.REJECT if level > self.config.threshold else Decision.ACCEPT,
            samples_spanned=(self._seen - self.config.window, self._seen - 1),
            uncertainty=level,
            kind_decisions=kind_decisions,
        )
        self._next_id += 1
        return report


def window_truth(correct, reports) -> list:
    """True inaccuracy of each report's member samples."""
    correct = np.asarray(correct, dtype=float)
    return [1.0 - float(correct[r.samples_spanned[0]:r.samples_spanned[1] + 1].mean())
            for r in reports]


@dataclass(frozen=True)
class ConfusionSummary:
    rejected: int
    false_rejects: int
    missed: int
    total: int


def _decision(report: UncertaintyReport, kind):
    return report.decision if kind is None else report.kind_decisions[kind]


def score_confusion(pairs, threshold: float = 0.5, kind: DistanceKind | None = None) -> ConfusionSummary:
    """Rej / FR / Missed counts.

    FR counts rejected windows whose true inaccuracy is strictly below
    ``threshold``; Missed counts accepted windows strictly above it.
    """
    rejected = false_rejects = missed = total = 0
    for report, inaccuracy in pairs:
        total += 1
        if _decision(report, kind) is Decision.REJECT:
            rejected += 1
            false_rejects += inaccuracy < threshold
        else:
            missed += inaccuracy > threshold
    return ConfusionSummary(rejected, int(false_rejects), int(missed), total)


class SweepRow(NamedTuple):
    threshold: float
    cutoff: float | None
    mean_accuracy: float | None
    rejected_count: int


def threshold_sweep(pairs, thresholds, kind: DistanceKind | None = None) -> list:
    """Empirical accuracy cut-off per uncertainty threshold.

    A window is accepted at threshold t when its uncertainty is at most t.
    ``cutoff`` is the lowest true accuracy among accepted windows (None when
    every window is rejected).
    """
    pairs = list(pairs)
    levels = np.array([r.uncertainty if kind is None else r.per_kind[kind].uncertainty
                       for r, _ in pairs], dtype=float)
    accuracy = np.array([1.0 - inacc for _, inacc in pairs], dtype=float)
    rows = []
    for t in thresholds:
        t = float(t)
        if not 0.0 <= t <= 1.0:
            raise ScopeError(f"thresholds must lie in [0, 1], got {t}")
        accepted = levels <= t
        if accepted.any():
            rows.append(SweepRow(t, float(accuracy[accepted].min()),
                                 float(accuracy[accepted].mean()), int((~accepted).sum())))
        else:
            rows.append(SweepRow(t, None, None, len(pairs)))
    return rows


REPORT_FIELDS = ("window_id", "kind", "sdd", "uncertainty", "decision", "first_index",
                 "last_index", "window_uncertainty", "window_decision")


def report_records(report: UncertaintyReport) -> list:
    """One JSON-ready record per kind; ``decision`` is that kind's own verdict."""
    return [
        {
            "window_id": report.window_id,
            "kind": kind.value,
            "sdd": reading.sdd,
            "uncertainty": reading.uncertainty,
            "decision": report.kind_decisions[kind].value,
            "first_index": report.samples_spanned[0],
            "last_index": report.samples_spanned[1],
            "window_uncertainty": report.uncertainty,
            "window_decision": report.decision.value,
        }
        for kind, reading in report.per_kind.items()
    ]


def dump_jsonl(reports, fh):
    for report in reports:
        for record in report_records(report):
            fh.write(json.dumps(record) + "\n")


def load_jsonl(lines) -> list:
    grouped = {}
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            wid = int(rec["window_id"])
            kind = DistanceKind.parse(rec["kind"])
            entry = grouped.setdefault(wid, {
                "per_kind": {}, "kind_decisions": {},
                "span": (int(rec["first_index"]), int(rec["last_index"])),
                "uncertainty": float(rec["window_uncertainty"]),
                "decision": Decision(rec["window_decision"]),
            })
            entry["per_kind"][kind] = KindReading(float(rec["sdd"]), float(rec["uncertainty"]))
            entry["kind_decisions"][kind] = Decision(rec["decision"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ScopeError(f"report line {line_no}: {exc}") from None
    return [
        UncertaintyReport(wid, e["per_kind"], e["decision"], e["span"], e["uncertainty"],
                          e["kind_decisions"])
        for wid, e in sorted(grouped.items())
    ]
