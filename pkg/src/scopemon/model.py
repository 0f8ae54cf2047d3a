"""ScopeModel: the persisted bundle of PCA, reference features, SCUEs and window size.

JSON schema (``format_version`` 1)::

    {
      "format_version": 1,
      "window": 50,
      "created_with_seed": 0,
      "es_params": {"t": [0.4, 0.8]},
      "pca": {"mean": [...], "components": [[...], ...],
              "explained_ratio": [...], "target": 0.85, "scale": null | [...]},
      "reference": {"digest": "sha256:...", "rows": N, "cols": k,
                    "data": [[...], ...]}            # embedded
                 | {"digest": "sha256:...", "rows": N, "cols": k,
                    "path": "ref.csv"},              # by path (post-PCA CSV)
      "scues": {"KS": {"form": "poly2", "coeffs": [...], "sdd_min": ..,
                       "sdd_max": .., "fit_rmse": .., "fit_r2": ..}, ...}
    }

Floats are written with ``repr`` precision, so a load/save round trip is
bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distances import DistanceKind, EsParams
from .errors import ScopeError, VersionMismatch
from .estimators import FitForm, Scue
from .features import FeatureMatrix, PcaModel, read_csv

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ScopeModel:
    pca: PcaModel
    reference: FeatureMatrix
    scues: dict
    window: int
    created_with_seed: int = 0
    es_params: EsParams = EsParams()
    reference_path: str | None = None

    def __post_init__(self):
        if self.window < 1:
            raise ScopeError(f"window must be >= 1, got {self.window}")
        for kind, scue in self.scues.items():
            if scue.kind is not kind:
                raise ScopeError(f"estimator stored under {kind.value} was fit for {scue.kind.value}")


def digest(data: np.ndarray) -> str:
    arr = np.ascontiguousarray(np.asarray(data, dtype="<f8"))
    h = hashlib.sha256()
    h.update(f"{arr.shape[0]}x{arr.shape[1]}:".encode())
    h.update(arr.tobytes())
    return "sha256:" + h.hexdigest()


def _floats(arr):
    return np.asarray(arr, dtype=float).tolist()


def to_dict(model: ScopeModel) -> dict:
    ref = model.reference.data
    reference = {"digest": digest(ref), "rows": int(ref.shape[0]), "cols": int(ref.shape[1])}
    if model.reference_path is None:
        reference["data"] = _floats(ref)
    else:
        reference["path"] = model.reference_path
    return {
        "format_version": FORMAT_VERSION,
        "window": int(model.window),
        "created_with_seed": int(model.created_with_seed),
        "es_params": {"t": list(model.es_params.t)},
        "pca": {
            "mean": _floats(model.pca.mean),
            "components": _floats(model.pca.components),
            "explained_ratio": _floats(model.pca.explained_ratio),
            "target": float(model.pca.target),
            "scale": None if model.pca.scale is None else _floats(model.pca.scale),
        },
        "reference": reference,
        "scues": {
            kind.value: {
                "form": s.form.value,
                "coeffs": [float(c) for c in s.coeffs],
                "sdd_min": s.sdd_min,
                "sdd_max": s.sdd_max,
                "fit_rmse": s.fit_rmse,
                "fit_r2": s.fit_r2,
            }
            for kind, s in model.scues.items()
        },
    }


def from_dict(obj: dict, base_dir=None) -> ScopeModel:
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(
            f"scope model format_version {version!r} is not supported; this build reads "
            f"version {FORMAT_VERSION}. Re-run `scopemon calibrate` to regenerate the model."
        )
    try:
        p = obj["pca"]
        pca = PcaModel(
            np.asarray(p["mean"], dtype=float),
            np.asarray(p["components"], dtype=float).reshape(-1, len(p["mean"])),
            np.asarray(p["explained_ratio"], dtype=float),
            float(p["target"]),
            None if p.get("scale") is None else np.asarray(p["scale"], dtype=float),
        )
        ref_obj = obj["reference"]
        ref_path = ref_obj.get("path")
        if "data" in ref_obj:
            reference = FeatureMatrix(np.asarray(ref_obj["data"], dtype=float)
                                      .reshape(ref_obj["rows"], ref_obj["cols"]))
        elif ref_path is not None:
            full = Path(ref_path)
            if not full.is_absolute() and base_dir is not None:
                full = Path(base_dir) / full
            reference = FeatureMatrix(read_csv(full).data)
        else:
            raise ScopeError("reference needs either embedded 'data' or a 'path'")
        if digest(reference.data) != ref_obj["digest"]:
            raise ScopeError("reference features do not match the digest stored in the model")
        scues = {}
        for name, s in obj["scues"].items():
            kind = DistanceKind.parse(name)
            if kind in scues:
                raise ScopeError(f"duplicate estimator for {kind.value}")
            scues[kind] = Scue(kind, FitForm.parse(s["form"]), tuple(float(c) for c in s["coeffs"]),
                               float(s["sdd_min"]), float(s["sdd_max"]),
                               float(s["fit_rmse"]), float(s["fit_r2"]))
        return ScopeModel(pca, reference, scues, int(obj["window"]),
                          int(obj.get("created_with_seed", 0)),
                          EsParams(tuple(obj.get("es_params", {}).get("t", (0.4, 0.8)))),
                          ref_path)
    except KeyError as exc:
        raise ScopeError(f"scope model is missing field {exc}") from None


def dumps(model: ScopeModel) -> str:
    return json.dumps(to_dict(model), indent=1, allow_nan=False) + "\n"


def atomic_write(path, text: str):
    """Write ``text`` to a temp file beside ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save(model: ScopeModel, path):
    atomic_write(path, dumps(model))


def load(path) -> ScopeModel:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScopeError(f"{path}: invalid JSON: {exc}") from None
    return from_dict(obj, base_dir=path.parent)
