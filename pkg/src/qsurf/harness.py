"""Experiment harness: k-fold CV, log2 grid search, sweeps and CSV tables.

Every function here is a pure function of the dataset, the master seed and
the grid.  Seeds for folds and Universum draws are spawned from one
``numpy.random.SeedSequence`` so that grid cells share the same folds.
"""

from __future__ import annotations

import csv
import io
import itertools
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import (
    LabeledDataset, apply_normalizer, expand_universum, fit_normalizer,
    generate_universum, kfold_split,
)
from .errors import QsurfError
from .models import Hyperparams, ModelKind, train_model

UNIVERSUM_FRACTION = 0.1


def accuracy(predictions, labels) -> float:
    """Percentage of matching entries."""
    p = np.asarray(predictions).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if p.size != y.size:
        raise ValueError(f"{p.size} predictions but {y.size} labels")
    if p.size == 0:
        raise ValueError("accuracy of an empty set is undefined")
    return 100.0 * float(np.mean(p == y))


def timed(fn, *args, **kwargs):
    """Run ``fn`` and return ``(result, wall seconds)`` from a monotonic clock."""
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


# ------------------------------------------------------------------ CV

@dataclass
class FoldResult:
    index: int
    accuracy: float
    n_train: int
    n_test: int
    wall_time: float
    status: str = "ok"
    error: str | None = None
    train_idx: np.ndarray | None = None
    test_idx: np.ndarray | None = None
    # global dataset indices behind each Universum point, shape (r, 2)
    universum_sources: np.ndarray | None = None
    # global indices the normalizer was fitted on
    norm_source: np.ndarray | None = None

    @property
    def failed(self) -> bool:
        return self.status != "ok"


@dataclass
class CVResult:
    mean_accuracy: float
    std_accuracy: float
    fold_accuracies: list
    wall_time: float
    chosen: Hyperparams
    kind: ModelKind
    folds: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.fold_accuracies)

    @property
    def failed_folds(self) -> list:
        return [f.index for f in self.folds if f.failed]


def _seeds(seed, n: int) -> list:
    return np.random.SeedSequence(seed).spawn(n)


def _fit_fold(kind, data, train_idx, test_idx, h, uni_seed, fraction, solver_opts):
    train = data.subset(train_idx)
    norm = fit_normalizer(train)
    train_n = train.with_points(apply_normalizer(norm, train.points))
    uni, sources = None, np.zeros((0, 2), dtype=int)
    if kind.uses_universum:
        u = generate_universum(train_n, fraction, uni_seed)
        uni = expand_universum(u, data.n_features)
        sources = train_idx[u.sources] if u.r else sources
    model = train_model(kind, train_n, uni, h, **solver_opts)
    model.classifier.norm = norm
    return model, sources


def cross_validate(kind, data: LabeledDataset, h: Hyperparams, k: int = 5, seed=0, *,
                   fraction: float = UNIVERSUM_FRACTION, universum_seed=None,
                   solver_opts: dict | None = None) -> CVResult:
    """Stratified k-fold CV of one model at fixed hyperparameters.

    Normalization and the Universum are derived from each training portion
    only.  A fold whose training raises a solver or data error scores 0 and
    is flagged; the remaining folds still run.  ``universum_seed`` reseeds
    only the Universum draws, keeping the folds fixed.
    """
    kind = ModelKind(kind)
    solver_opts = solver_opts or {}
    split_seed, uni_root = _seeds(seed, 2)
    if universum_seed is not None:
        uni_root = np.random.SeedSequence(universum_seed)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        splits = kfold_split(data, k, split_seed)
    notes = [str(w.message) for w in caught]
    fold_seeds = uni_root.spawn(k)
    folds = []
    t_all = 0.0
    for i, ((tr_idx, te_idx), fs) in enumerate(zip(splits, fold_seeds)):
        try:
            (model, sources), dt = timed(_fit_fold, kind, data, tr_idx, te_idx, h, fs,
                                         fraction, solver_opts)
        except QsurfError as exc:
            folds.append(FoldResult(i, 0.0, tr_idx.size, te_idx.size, 0.0,
                                    status="failed", error=str(exc), train_idx=tr_idx,
                                    test_idx=te_idx, norm_source=tr_idx))
            continue
        t_all += dt
        pred = model.classifier.predict(data.points[te_idx])
        acc = accuracy(pred, data.labels[te_idx])
        folds.append(FoldResult(i, acc, tr_idx.size, te_idx.size, dt, train_idx=tr_idx,
                                test_idx=te_idx, universum_sources=sources, norm_source=tr_idx))
        if not model.solve.converged:
            notes.append(f"fold {i}: solver stopped with status {model.solve.status}")
    accs = [f.accuracy for f in folds]
    for f in folds:
        if f.failed:
            notes.append(f"fold {f.index} failed: {f.error}")
    return CVResult(float(np.mean(accs)), float(np.std(accs)), accs, t_all, h, kind,
                    folds, notes)


# ------------------------------------------------------------ grid search

@dataclass
class GridSpec:
    """log2 exponents per hyperparameter; a ``None`` entry stands for 0."""

    mu: list = field(default_factory=lambda: list(range(-4, 21)))
    lam: list = field(default_factory=lambda: list(range(-8, 21)))
    c_u: list = field(default_factory=lambda: list(range(-4, 11)))
    eps: list = field(default_factory=lambda: list(range(-8, 1)))

    def __post_init__(self):
        for name in ("mu", "lam", "c_u", "eps"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"grid for {name} is empty")
        if any(e is None for e in self.mu):
            raise ValueError("mu must be positive; a zero entry is not allowed")

    @staticmethod
    def _val(e) -> float:
        return 0.0 if e is None else float(2.0 ** e)

    def points(self, kind) -> list[Hyperparams]:
        """Hyperparameter settings relevant to ``kind``.

        Kinds without an L1 term use ``lam = 0``; kinds without Universum
        points use ``c_u = 0`` and the default ``eps``.
        """
        kind = ModelKind(kind)
        lams = [self._val(e) for e in self.lam] if kind.uses_l1 else [0.0]
        if kind.uses_universum:
            cus = [self._val(e) for e in self.c_u]
            epss = [self._val(e) for e in self.eps]
        else:
            cus, epss = [0.0], [Hyperparams().eps]
        out = {Hyperparams(self._val(m), l, c, e)
               for m, l, c, e in itertools.product(self.mu, lams, cus, epss)}
        return sorted(out, key=_param_key)


def _param_key(h: Hyperparams):
    return (h.mu, h.lam, h.c_u, h.eps)


def _rank_key(res: CVResult):
    return (-res.mean_accuracy, res.std_accuracy) + _param_key(res.chosen)


@dataclass
class GridResult:
    best: CVResult
    table: list


def pool_size(requested: int | None = None) -> int:
    """Worker count, capped by the ``QSURF_THREADS`` environment variable."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("QSURF_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ValueError(f"QSURF_THREADS must be an integer, got {cap!r}") from None
    return max(1, n)


def _cv_cell(args):
    kind, data, h, k, seed, kw = args
    return cross_validate(kind, data, h, k, seed, **kw)


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
        return list(ex.map(fn, jobs))


def grid_search(kind, data: LabeledDataset, grid: GridSpec, k: int = 5, seed=0, *,
                workers: int | None = 1, **cv_kwargs) -> GridResult:
    """Cross-validate every grid point and pick the best.

    Best means highest mean accuracy, then smaller std, then smaller mu,
    lambda, C_u and eps in that order.  All cells share the same folds.
    """
    jobs = [(kind, data, h, k, seed, cv_kwargs) for h in grid.points(kind)]
    table = _map(_cv_cell, jobs, pool_size(workers))
    table.sort(key=lambda r: _param_key(r.chosen))
    return GridResult(min(table, key=_rank_key), table)


# ----------------------------------------------------------------- sweeps

@dataclass
class ColormapResult:
    cu_values: list
    eps_values: list
    matrix: np.ndarray
    mu: float
    lam: float

    @property
    def best(self) -> float:
        return float(np.max(self.matrix))

    @property
    def best_point(self) -> tuple[float, float]:
        i, j = np.unravel_index(int(np.argmax(self.matrix)), self.matrix.shape)
        return self.cu_values[i], self.eps_values[j]


def colormap_sweep(kind, data: LabeledDataset, mu: float, lam: float, cu_values, eps_values,
                   k: int = 5, seed=0, *, workers: int | None = 1, **cv_kwargs) -> ColormapResult:
    """CV mean accuracy over a (C_u, eps) grid at fixed (mu, lambda)."""
    cu_values = [float(v) for v in cu_values]
    eps_values = [float(v) for v in eps_values]
    if not cu_values or not eps_values:
        raise ValueError("colormap grids must be nonempty")
    cells = [Hyperparams(mu, lam, c, e) for c in cu_values for e in eps_values]
    for h in cells:
        bad = h.violations()
        if bad:
            raise ValueError("; ".join(bad))
    jobs = [(kind, data, h, k, seed, cv_kwargs) for h in cells]
    res = _map(_cv_cell, jobs, pool_size(workers))
    mat = np.array([r.mean_accuracy for r in res]).reshape(len(cu_values), len(eps_values))
    return ColormapResult(cu_values, eps_values, mat, float(mu), float(lam))


@dataclass
class RatePoint:
    rate: float
    mean: float
    std: float
    runs: list


def universum_rate_curve(kind, data: LabeledDataset, h: Hyperparams, rates, repeats: int = 10,
                         k: int = 5, seed=0, *, workers: int | None = 1,
                         **cv_kwargs) -> list[RatePoint]:
    """Mean CV accuracy per Universum fraction over reseeded Universum draws.

    The folds stay fixed by ``seed``; each repeat draws a fresh Universum.
    """
    rates = [float(r) for r in rates]
    if not rates or any(not 0 < r <= 1 for r in rates):
        raise ValueError("rates must lie in (0, 1]")
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    rep_seeds = [int(s.generate_state(1)[0]) for s in _seeds(seed, repeats + 1)[1:]]
    jobs = [(kind, data, h, k, seed, dict(cv_kwargs, fraction=r, universum_seed=s))
            for r in rates for s in rep_seeds]
    res = _map(_cv_cell, jobs, pool_size(workers))
    out = []
    for i, r in enumerate(rates):
        runs = [x.mean_accuracy for x in res[i * repeats:(i + 1) * repeats]]
        out.append(RatePoint(r, float(np.mean(runs)), float(np.std(runs)), runs))
    return out


# ----------------------------------------------------------------- tables

@dataclass
class Table:
    """A small typed CSV table.

    Column types: ``"acc"`` fixed 6-decimal, ``"float"`` shortest repr,
    ``"int"`` and ``"str"``.  Accuracy cells are rounded to 6 decimals when
    stored, so writing and re-reading a table gives back equal values.
    """

    columns: list
    types: list
    rows: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.columns) != len(self.types):
            raise ValueError("columns and types differ in length")
        self.rows = [self._coerce(r) for r in self.rows]

    def _coerce(self, row) -> tuple:
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, table has {len(self.columns)} columns")
        out = []
        for v, t in zip(row, self.types):
            if t == "acc":
                out.append(round(float(v), 6))
            elif t == "float":
                out.append(float(v))
            elif t == "int":
                out.append(int(v))
            else:
                out.append(str(v))
        return tuple(out)

    def add(self, *row) -> None:
        self.rows.append(self._coerce(row))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            cells = []
            for v, t in zip(row, self.types):
                if t == "acc":
                    cells.append(f"{v:.6f}")
                elif t == "float":
                    cells.append(repr(v))
                else:
                    cells.append(str(v))
            w.writerow(cells)
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str, types: list) -> "Table":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty table")
        return cls(rows[0], list(types), rows[1:])

    def __eq__(self, other) -> bool:
        return (isinstance(other, Table) and self.columns == other.columns
                and self.types == other.types and self.rows == other.rows)


CV_TYPES = ["str", "str", "acc", "int", "int", "str"]
GRID_TYPES = ["str", "float", "float", "float", "float", "acc", "acc", "int"]
COLORMAP_TYPES = ["float", "float", "acc"]
URATE_TYPES = ["float", "acc", "acc", "int"]
TIMING_TYPES = ["str", "str", "float"]


def cv_table(res: CVResult) -> Table:
    """Per-fold accuracies followed by ``mean`` and ``std_pop`` summary rows."""
    t = Table(["kind", "fold", "accuracy", "n_train", "n_test", "status"], CV_TYPES)
    for f in res.folds:
        t.add(res.kind.value, str(f.index), f.accuracy, f.n_train, f.n_test, f.status)
    t.add(res.kind.value, "mean", res.mean_accuracy, 0, 0, "")
    t.add(res.kind.value, "std_pop", res.std_accuracy, 0, 0, "")
    return t


def grid_table(res: GridResult) -> Table:
    t = Table(["kind", "mu", "lambda", "c_u", "eps", "mean_accuracy", "std_pop_accuracy",
               "failed_folds"], GRID_TYPES)
    for r in res.table:
        h = r.chosen
        t.add(r.kind.value, h.mu, h.lam, h.c_u, h.eps, r.mean_accuracy, r.std_accuracy,
              len(r.failed_folds))
    return t


def colormap_table(res: ColormapResult) -> Table:
    t = Table(["c_u", "eps", "mean_accuracy"], COLORMAP_TYPES)
    for i, c in enumerate(res.cu_values):
        for j, e in enumerate(res.eps_values):
            t.add(c, e, res.matrix[i, j])
    return t


def urate_table(curve: list[RatePoint]) -> Table:
    t = Table(["rate", "mean_accuracy", "std_pop_accuracy", "repeats"], URATE_TYPES)
    for p in curve:
        t.add(p.rate, p.mean, p.std, len(p.runs))
    return t


def timings_table(entries) -> Table:
    """``entries`` are ``(label, what, seconds)``; ``what`` says which clock was read."""
    t = Table(["label", "clock", "seconds"], TIMING_TYPES)
    for e in entries:
        t.add(*e)
    return t


def cv_timings(res: CVResult, label: str = "") -> list:
    pre = f"{label}fold" if label else "fold"
    return [(f"{pre}{f.index}", "wall", f.wall_time) for f in res.folds] + \
           [(f"{label}total" if label else "total", "wall", res.wall_time)]
