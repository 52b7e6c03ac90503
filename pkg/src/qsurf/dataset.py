"""Datasets: CSV ingestion, normalization, Universum synthesis, folds, generators."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass
class LabeledDataset:
    points: np.ndarray
    labels: np.ndarray
    feature_names: list | None = None
    # free-form provenance, e.g. the true hyperplane of a generated set
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.labels = np.asarray(self.labels, dtype=float).reshape(-1)
        if self.points.shape[0] != self.labels.size:
            raise DataError(
                f"{self.points.shape[0]} points but {self.labels.size} labels"
            )
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise DataError("labels must be +1 or -1")
        if not np.all(np.isfinite(self.points)):
            raise DataError("points contain non-finite values")
        if self.feature_names is None:
            self.feature_names = [f"x{j + 1}" for j in range(self.n_features)]

    @property
    def m(self) -> int:
        return self.labels.size

    @property
    def n_features(self) -> int:
        return self.points.shape[1]

    @property
    def is_single_class(self) -> bool:
        return np.unique(self.labels).size < 2

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=int)
        return LabeledDataset(self.points[idx], self.labels[idx], list(self.feature_names),
                              dict(self.meta))

    def with_points(self, points) -> "LabeledDataset":
        return LabeledDataset(points, self.labels.copy(), list(self.feature_names), dict(self.meta))

    def class_counts(self) -> tuple[int, int]:
        return int(np.sum(self.labels > 0)), int(np.sum(self.labels < 0))


@dataclass
class UniversumSet:
    points: np.ndarray
    # row j averages dataset rows sources[j, 0] (class +1) and sources[j, 1] (class -1)
    sources: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points.reshape(1, -1) if self.points.size else self.points.reshape(0, 0)
        if not np.all(np.isfinite(self.points)):
            raise DataError("universum points contain non-finite values")

    @property
    def r(self) -> int:
        return self.points.shape[0]


@dataclass
class ExpandedUniversum:
    points: np.ndarray
    labels: np.ndarray

    @property
    def r(self) -> int:
        return self.labels.size // 2

    @classmethod
    def empty(cls, n: int) -> "ExpandedUniversum":
        return cls(np.zeros((0, n)), np.zeros(0))


@dataclass(frozen=True)
class NormParams:
    lo: np.ndarray
    hi: np.ndarray

    def to_dict(self) -> dict:
        return {"min": [float(v) for v in self.lo], "max": [float(v) for v in self.hi]}

    @classmethod
    def from_dict(cls, d: dict) -> "NormParams":
        return cls(np.asarray(d["min"], dtype=float), np.asarray(d["max"], dtype=float))


CLAMP = (-0.5, 1.5)


# --------------------------------------------------------------------- CSV

def _resolve_column(header, label_column):
    if isinstance(label_column, int) or (isinstance(label_column, str) and label_column.isdigit()
                                         and label_column not in header):
        idx = int(label_column)
        if not 0 <= idx < len(header):
            raise DataError(f"label column index {idx} out of range (0..{len(header) - 1})")
        return idx
    if label_column not in header:
        raise DataError(f"label column {label_column!r} not found in header {header}")
    return header.index(label_column)


def read_csv_text(text: str, label_column, positive_label) -> LabeledDataset:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError("empty dataset: no header")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DataError("empty dataset")
    li = _resolve_column(header, label_column)
    feat_cols = [j for j in range(len(header)) if j != li]
    pts = np.empty((len(body), len(feat_cols)))
    labels = np.empty(len(body))
    pos = str(positive_label).strip()
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(f"row {i + 1}: expected {len(header)} cells, got {len(row)}")
        for k, j in enumerate(feat_cols):
            cell = row[j].strip()
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"row {i + 1}, column {header[j]!r}: non-numeric cell {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"row {i + 1}, column {header[j]!r}: non-finite value {cell!r}")
            pts[i, k] = v
        labels[i] = 1.0 if row[li].strip() == pos else -1.0
    ds = LabeledDataset(pts, labels, [header[j] for j in feat_cols])
    if ds.is_single_class:
        warnings.warn("dataset contains a single class", stacklevel=2)
    return ds


def load_csv(path, label_column, positive_label) -> LabeledDataset:
    """Read a labeled CSV; rows whose label equals ``positive_label`` become +1."""
    with open(path, encoding="utf-8", newline="") as fh:
        return read_csv_text(fh.read(), label_column, positive_label)


def _fmt(v: float) -> str:
    return repr(float(v))


def dataset_to_csv(ds: LabeledDataset, label_name: str = "y") -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(list(ds.feature_names) + [label_name])
    for x, y in zip(ds.points, ds.labels):
        w.writerow([_fmt(v) for v in x] + [str(int(y))])
    return out.getvalue()


def points_to_csv(points, feature_names) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(list(feature_names))
    for x in np.atleast_2d(points):
        w.writerow([_fmt(v) for v in x])
    return out.getvalue()


def read_points_csv(path) -> np.ndarray:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 1:
        raise DataError("empty points file")
    try:
        return np.array([[float(c) for c in r] for r in rows[1:]], dtype=float).reshape(len(rows) - 1, -1)
    except ValueError as exc:
        raise DataError(f"non-numeric cell in points file: {exc}") from None


# ------------------------------------------------------------ normalization

def fit_normalizer(train: LabeledDataset | np.ndarray) -> NormParams:
    pts = train.points if isinstance(train, LabeledDataset) else np.atleast_2d(train)
    if pts.shape[0] == 0:
        raise DataError("cannot fit a normalizer on an empty set")
    return NormParams(pts.min(axis=0).copy(), pts.max(axis=0).copy())


def apply_normalizer(p: NormParams, points) -> np.ndarray:
    """Affine map to [0, 1] per feature; constant features go to 0.

    Results are clamped to ``[-0.5, 1.5]`` so unseen extreme values do not
    blow up in the quadratic lift; training points are never affected.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    span = p.hi - p.lo
    safe = np.where(span > 0, span, 1.0)
    Z = np.where(span > 0, (X - p.lo) / safe, 0.0)
    return np.clip(Z, *CLAMP)


# ---------------------------------------------------------------- universum

def _ceil_count(fraction: float, m: int) -> int:
    # guard against 0.1 * 70 == 7.000000000000001
    return min(m, max(1, math.ceil(fraction * m - 1e-9)))


def generate_universum(data: LabeledDataset, fraction: float, rng_seed) -> UniversumSet:
    """Average randomly matched cross-class pairs.

    ``ceil(fraction * m_c)`` points are drawn without replacement from each
    class; the shorter draw is matched against a random subset of the longer
    one, so ``r`` equals the smaller of the two counts.
    """
    if not 0 < fraction <= 1:
        raise DataError(f"fraction must lie in (0, 1], got {fraction}")
    pos = np.flatnonzero(data.labels > 0)
    neg = np.flatnonzero(data.labels < 0)
    if pos.size == 0 or neg.size == 0:
        raise DataError("universum generation needs both classes")
    rng = np.random.default_rng(rng_seed)
    sel_pos = rng.choice(pos, size=_ceil_count(fraction, pos.size), replace=False)
    sel_neg = rng.choice(neg, size=_ceil_count(fraction, neg.size), replace=False)
    r = min(sel_pos.size, sel_neg.size)
    sel_pos = rng.permutation(sel_pos)[:r]
    sel_neg = rng.permutation(sel_neg)[:r]
    pts = 0.5 * (data.points[sel_pos] + data.points[sel_neg])
    return UniversumSet(pts, np.column_stack([sel_pos, sel_neg]))


def expand_universum(u: UniversumSet, n: int | None = None) -> ExpandedUniversum:
    """Duplicate each point with labels +1 (rows 0..r-1) and -1 (rows r..2r-1)."""
    if u.r == 0:
        n = n if n is not None else (u.points.shape[1] if u.points.ndim == 2 else 0)
        return ExpandedUniversum.empty(n)
    pts = np.vstack([u.points, u.points])
    labels = np.concatenate([np.ones(u.r), -np.ones(u.r)])
    return ExpandedUniversum(pts, labels)


# -------------------------------------------------------------------- folds

def kfold_split(data: LabeledDataset, k: int, rng_seed) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold split as a list of ``(train_idx, test_idx)``.

    Each class is shuffled and dealt round-robin over the folds, continuing
    where the previous class stopped so fold sizes differ by at most one.
    If a class has fewer than ``k`` members the split is unstratified and a
    warning is issued.
    """
    m = data.m
    if k < 2:
        raise DataError("k must be at least 2")
    if m < k:
        raise DataError(f"cannot split {m} points into {k} folds")
    rng = np.random.default_rng(rng_seed)
    groups = [np.flatnonzero(data.labels > 0), np.flatnonzero(data.labels < 0)]
    if any(0 < g.size < k for g in groups):
        warnings.warn(
            f"a class has fewer than k={k} members; falling back to unstratified folds",
            stacklevel=2,
        )
        groups = [np.arange(m)]
    folds = [[] for _ in range(k)]
    offset = 0
    for g in groups:
        g = rng.permutation(g)
        for i, idx in enumerate(g):
            folds[(offset + i) % k].append(int(idx))
        offset = (offset + g.size) % k
    out = []
    for f in folds:
        test = np.sort(np.asarray(f, dtype=int))
        train = np.setdiff1d(np.arange(m), test)
        out.append((train, test))
    return out


# --------------------------------------------------------------- generators

ELLIPSE_Q = np.array([[1.0, 0.35], [0.35, 0.6]])


def _quad_form(X, Qm):
    return np.einsum("ij,jk,ik->i", X, Qm, X)


def synth_quadratic(m_per_class: int, n: int = 2, noise: float = 0.0, separable: bool = True,
                    rng_seed=0, gap: float = 0.15, radius: float = 1.0,
                    box: float = 2.0, outer: float | None = 1.0) -> LabeledDataset:
    """Ellipse-versus-outside data in ``[-box, box]^n``.

    Class -1 lies inside ``{x : x'Qx <= radius^2 (1 - gap)}`` and class +1
    in the shell ``radius^2 (1 + gap) <= x'Qx <= radius^2 (1 + outer)`` when
    ``separable`` (``outer=None`` drops the outer wall).
    Otherwise points are labeled by the sign of ``x'Qx - radius^2`` plus
    Gaussian noise of std ``noise``, which flips labels near the surface.
    """
    if m_per_class < 1:
        raise DataError("m_per_class must be positive")
    rng = np.random.default_rng(rng_seed)
    Qm = np.eye(n)
    Qm[:2, :2] = ELLIPSE_Q[: min(n, 2), : min(n, 2)]
    rho2 = radius ** 2
    pos, neg = [], []
    while len(pos) < m_per_class or len(neg) < m_per_class:
        X = rng.uniform(-box, box, size=(4 * m_per_class, n))
        t = _quad_form(X, Qm) - rho2
        if separable:
            is_neg = t <= -gap * rho2
            is_pos = t >= gap * rho2
            if outer is not None:
                is_pos &= t <= outer * rho2
        else:
            score = t + noise * rng.normal(size=t.size)
            is_neg = score <= 0
            is_pos = ~is_neg
        neg.extend(X[is_neg])
        pos.extend(X[is_pos])
    pts = np.vstack([np.array(pos[:m_per_class]), np.array(neg[:m_per_class])])
    labels = np.concatenate([np.ones(m_per_class), -np.ones(m_per_class)])
    return LabeledDataset(pts, labels, meta={"generator": "quadratic", "Q": Qm.tolist(),
                                             "radius": radius, "noise": noise,
                                             "separable": separable, "outer": outer})


def quadratic_label(x, radius: float = 1.0) -> int:
    """Noise-free label rule of :func:`synth_quadratic` (inside -> -1)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1]
    Qm = np.eye(n)
    Qm[:2, :2] = ELLIPSE_Q[: min(n, 2), : min(n, 2)]
    return int(np.where(_quad_form(x, Qm)[0] - radius ** 2 > 0, 1, -1))


def synth_normal(m_per_class: int, n: int = 2, mean_sep: float = 2.0, rng_seed=0) -> LabeledDataset:
    """Two unit-covariance Gaussian blobs whose means are ``mean_sep`` apart."""
    rng = np.random.default_rng(rng_seed)
    direction = np.ones(n) / np.sqrt(n)
    mu = 0.5 * mean_sep * direction
    pos = rng.normal(size=(m_per_class, n)) + mu
    neg = rng.normal(size=(m_per_class, n)) - mu
    labels = np.concatenate([np.ones(m_per_class), -np.ones(m_per_class)])
    return LabeledDataset(np.vstack([pos, neg]), labels,
                          meta={"generator": "normal", "mean_sep": mean_sep})


def synth_linear(m_per_class: int, n: int = 2, margin: float = 0.2, rng_seed=0) -> LabeledDataset:
    """Uniform points in ``[-1, 1]^n`` kept only if ``|w'x + b| >= margin``.

    The generating ``(w, b)`` (with ``|w| = 1``) is recorded in ``meta``.
    """
    rng = np.random.default_rng(rng_seed)
    w = rng.normal(size=n)
    w /= np.linalg.norm(w)
    b = float(rng.uniform(-0.2, 0.2))
    pos, neg = [], []
    while len(pos) < m_per_class or len(neg) < m_per_class:
        X = rng.uniform(-1, 1, size=(4 * m_per_class, n))
        t = X @ w + b
        pos.extend(X[t >= margin])
        neg.extend(X[t <= -margin])
    pts = np.vstack([np.array(pos[:m_per_class]), np.array(neg[:m_per_class])])
    labels = np.concatenate([np.ones(m_per_class), -np.ones(m_per_class)])
    return LabeledDataset(pts, labels, meta={"generator": "linear", "w": w.tolist(), "b": b,
                                             "margin": margin})
