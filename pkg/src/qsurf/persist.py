"""Versioned JSON documents for trained classifiers.

Floats are written with Python's shortest round-trip ``repr``, so loading a
document and saving it again reproduces the same bytes and the same doubles.
Non-finite numbers (a step norm that was never measured, say) become ``null``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import symvec as sv
from .dataset import NormParams
from .errors import DataError
from .models import Hyperparams, ModelKind, QuadraticClassifier, SolveReport, TrainedModel

FORMAT_VERSION = 1


@dataclass
class StoredModel:
    """What a model file holds: enough to predict and to audit the fit."""

    kind: ModelKind
    classifier: QuadraticClassifier
    hyperparams: Hyperparams
    solve: SolveReport | None = None


def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def model_to_dict(model: TrainedModel | StoredModel) -> dict:
    cl = model.classifier
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": ModelKind(model.kind).value,
        "n": cl.n,
        "w_half": cl.w_half.data,
        "b": cl.b,
        "c": cl.c,
        "norm_params": cl.norm.to_dict() if cl.norm is not None else None,
        "hyperparams": model.hyperparams.to_dict() if model.hyperparams is not None else None,
        "solve_report": model.solve.to_dict() if model.solve is not None else None,
    }
    return _clean(doc)


def dumps(model: TrainedModel | StoredModel) -> str:
    return json.dumps(model_to_dict(model), indent=2, allow_nan=False) + "\n"


def _num(v, what):
    if v is None:
        return float("nan")
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise DataError(f"model file: {what} must be a number, got {v!r}")
    return float(v)


def model_from_dict(doc: dict) -> StoredModel:
    if not isinstance(doc, dict):
        raise DataError("model file: top level must be an object")
    ver = doc.get("format_version")
    if ver != FORMAT_VERSION:
        raise DataError(f"model file: unsupported format_version {ver!r} (expected {FORMAT_VERSION})")
    missing = [k for k in ("kind", "n", "w_half", "b", "c") if k not in doc]
    if missing:
        raise DataError(f"model file: missing field(s) {', '.join(missing)}")
    try:
        kind = ModelKind(doc["kind"])
    except ValueError:
        raise DataError(f"model file: unknown kind {doc['kind']!r}") from None
    n = doc["n"]
    if not isinstance(n, int) or n < 1:
        raise DataError(f"model file: n must be a positive integer, got {n!r}")
    w = np.array([_num(v, "w_half entry") for v in doc["w_half"]])
    b = np.array([_num(v, "b entry") for v in doc["b"]])
    if w.size != sv.half_dim(n) or b.size != n:
        raise DataError(f"model file: w_half/b sizes {w.size}/{b.size} do not match n={n}")
    norm = NormParams.from_dict(doc["norm_params"]) if doc.get("norm_params") else None
    if norm is not None and (norm.lo.size != n or norm.hi.size != n):
        raise DataError("model file: norm_params do not match n")
    cl = QuadraticClassifier(sv.SymHalfVec(n, w), b, _num(doc["c"], "c"), norm)
    hp = Hyperparams.from_dict(doc["hyperparams"]) if doc.get("hyperparams") else Hyperparams()
    rep = doc.get("solve_report")
    if rep is not None:
        rep = dict(rep)
        for k in ("residual", "wall_time", "ridge", "step_norm"):
            rep[k] = _num(rep.get(k), k)
        rep = SolveReport.from_dict(rep)
    return StoredModel(kind, cl, hp, rep)


def loads(text: str) -> StoredModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"model file is not valid JSON: {exc}") from None
    return model_from_dict(doc)


def save_model(model: TrainedModel | StoredModel, path) -> None:
    Path(path).write_text(dumps(model))


def load_model(path) -> StoredModel:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from None
    return loads(text)
