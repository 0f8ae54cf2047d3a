"""Feature matrices, CSV ingestion and PCA reduction."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateData, DimensionMismatch, NonFiniteValue, ParseError, ScopeError


@dataclass(frozen=True)
class FeatureMatrix:
    """n x d finite feature values with optional per-row correctness labels.

    ``correct[i] == 1`` means the model's prediction on row i was right
    (the row is in scope).
    """

    data: np.ndarray
    correct: np.ndarray | None = None

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2:
            raise DimensionMismatch(f"feature matrix must be 2-D, got shape {data.shape}")
        bad = np.argwhere(~np.isfinite(data))
        if bad.size:
            r, c = bad[0]
            raise NonFiniteValue((int(r), int(c)), float(data[r, c]))
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.correct is not None:
            correct = np.array(self.correct, dtype=np.int8).ravel()
            if correct.shape[0] != data.shape[0]:
                raise DimensionMismatch(
                    f"{correct.shape[0]} correctness labels for {data.shape[0]} rows"
                )
            if not np.isin(correct, (0, 1)).all():
                raise ScopeError("correctness labels must be 0 or 1")
            correct.setflags(write=False)
            object.__setattr__(self, "correct", correct)

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    def take(self, index) -> "FeatureMatrix":
        index = np.asarray(index)
        correct = None if self.correct is None else self.correct[index]
        return FeatureMatrix(self.data[index], correct)

    def accuracy(self) -> float:
        if self.correct is None:
            raise ScopeError("feature matrix carries no correctness labels")
        return float(self.correct.mean())


def read_csv(path) -> FeatureMatrix:
    """Read a feature CSV: header ``f0..f{d-1}`` plus an optional ``correct`` column."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(path, 1, "empty file, expected a header row") from None
        feature_cols = [h for h in header if h != "correct"]
        expected = [f"f{i}" for i in range(len(feature_cols))]
        if not feature_cols or sorted(feature_cols, key=_feature_index) != expected:
            raise ParseError(path, 1, f"feature columns must be f0..f{{d-1}}, got {header}")
        feat_pos = [header.index(name) for name in expected]
        corr_pos = header.index("correct") if "correct" in header else None
        rows, labels = [], []
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise ParseError(path, line_no, f"expected {len(header)} cells, got {len(record)}")
            try:
                values = [_parse_cell(record[p]) for p in feat_pos]
            except ValueError as exc:
                raise ParseError(path, line_no, str(exc)) from None
            rows.append(values)
            if corr_pos is not None:
                cell = record[corr_pos].strip()
                if cell not in ("0", "1"):
                    raise ParseError(path, line_no, f"correct must be 0 or 1, got {cell!r}")
                labels.append(int(cell))
    data = np.array(rows, dtype=float).reshape(len(rows), len(expected))
    return FeatureMatrix(data, np.array(labels) if corr_pos is not None else None)


def _feature_index(name):
    try:
        return int(name[1:]) if name.startswith("f") else math.inf
    except ValueError:
        return math.inf


def _parse_cell(cell):
    cell = cell.strip()
    if not cell:
        raise ValueError("missing cell")
    value = float(cell)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {cell!r}")
    return value


def write_csv(path, fm: FeatureMatrix):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = [f"f{i}" for i in range(fm.cols)]
        if fm.correct is not None:
            header.append("correct")
        writer.writerow(header)
        for i, row in enumerate(fm.data):
            out = [repr(float(v)) for v in row]
            if fm.correct is not None:
                out.append(str(int(fm.correct[i])))
            writer.writerow(out)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_ratio: np.ndarray
    target: float
    scale: np.ndarray | None = field(default=None)

    @property
    def dim(self):
        return self.mean.shape[0]

    @property
    def k(self):
        return self.components.shape[0]


def _orient(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude coordinate is positive."""
    out = vectors.copy()
    for i, v in enumerate(out):
        j = int(np.argmax(np.abs(v)))
        if v[j] < 0:
            out[i] = -v
    return out


def fit_pca(x, target: float = 0.85, standardize: bool = False, rtol: float = 1e-10) -> PcaModel:
    """Covariance PCA keeping the fewest leading components reaching ``target``.

    ``rtol`` absorbs round-off when comparing the cumulative explained
    variance ratio with ``target`` (relevant for ``target == 1``).
    """
    if not 0 < target <= 1:
        raise ScopeError(f"target variance must lie in (0, 1], got {target}")
    data = getattr(x, "data", None)
    data = np.asarray(x if data is None else data, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] < 1:
        raise DegenerateData(f"PCA needs at least 2 rows and 1 column, got shape {data.shape}")
    mean = data.mean(axis=0)
    centred = data - mean
    scale = None
    if standardize:
        scale = centred.std(axis=0, ddof=1)
        if np.any(scale == 0):
            raise DegenerateData("cannot standardise a constant feature")
        centred = centred / scale
    cov = centred.T @ centred / (data.shape[0] - 1)
    eigval, eigvec = np.linalg.eigh(cov)
    eigval = np.clip(eigval, 0.0, None)
    total = eigval.sum()
    if not total > 0:
        raise DegenerateData("data has zero total variance")
    vecs = _orient(eigvec.T)
    # descending eigenvalue, ties broken by the first differing coordinate
    keys = [tuple(-v for v in vecs[i]) for i in range(len(eigval))]
    order = sorted(range(len(eigval)), key=lambda i: (-eigval[i], keys[i]))
    eigval, vecs = eigval[order], vecs[order]
    ratio = eigval / total
    cumulative = np.cumsum(ratio)
    k = int(np.searchsorted(cumulative, target - rtol, side="left")) + 1
    k = min(k, len(ratio))
    components = np.ascontiguousarray(vecs[:k])
    for arr in (mean, components, ratio):
        arr.setflags(write=False)
    if scale is not None:
        scale.setflags(write=False)
    return PcaModel(mean, components, ratio[:k].copy(), float(target), scale)


def pca_transform(model: PcaModel, x) -> FeatureMatrix:
    fm = x if isinstance(x, FeatureMatrix) else FeatureMatrix(x)
    if fm.cols != model.dim:
        raise DimensionMismatch(f"PCA model expects {model.dim} features, got {fm.cols}")
    centred = fm.data - model.mean
    if model.scale is not None:
        centred = centred / model.scale
    return FeatureMatrix(centred @ model.components.T, fm.correct)


def pca_inverse(model: PcaModel, z) -> np.ndarray:
    z = np.asarray(getattr(z, "data", z), dtype=float)
    back = z @ model.components
    if model.scale is not None:
        back = back * model.scale
    return back + model.mean
