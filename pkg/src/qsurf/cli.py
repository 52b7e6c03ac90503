"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import harness
from . import persist
from .errors import DataError, SolverError
from .models import Hyperparams, ModelKind, assemble, train_model

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


@dataclass
class RunConfig:
    command: str
    kind: ModelKind | None = None
    hyperparams: Hyperparams | None = None
    k: int | None = None
    fraction: float | None = None
    repeats: int | None = None
    extra: dict = field(default_factory=dict)


def validate_config(cfg: RunConfig) -> list[str]:
    """All problems with ``cfg`` at once; an empty list means it is valid."""
    out = []
    if cfg.hyperparams is not None:
        out.extend(cfg.hyperparams.violations())
    if cfg.k is not None and cfg.k < 2:
        out.append(f"--k must be at least 2, got {cfg.k}")
    if cfg.fraction is not None and not 0 < cfg.fraction <= 1:
        out.append(f"--fraction must lie in (0, 1], got {cfg.fraction}")
    if cfg.repeats is not None and cfg.repeats < 1:
        out.append(f"--repeats must be at least 1, got {cfg.repeats}")
    return out


# ----------------------------------------------------------------- parsing

def _exponents(text: str) -> list:
    """``"-4:20"`` (inclusive range), ``"-4:20:2"`` or ``"0,3,zero"``; ``zero`` means 0."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) == 2:
                parts.append(1)
            lo, hi, step = parts
            if step <= 0 or hi < lo:
                raise ValueError
            return list(range(lo, hi + 1, step))
        return [None if t.strip() == "zero" else int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad exponent list {text!r}") from None


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _add_data(p, required=True):
    p.add_argument("--data", required=required, help="CSV file with a header row")
    p.add_argument("--label", default="y", help="label column name or index (default: y)")
    p.add_argument("--positive", default="1", help="label value mapped to +1 (default: 1)")


def _add_model(p):
    p.add_argument("--model", required=True, choices=[k.value for k in ModelKind])


def _add_hyper(p):
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--cu", type=float, default=0.0)
    p.add_argument("--eps", type=float, default=None,
                   help="Universum tube width (default 0.01; 0 for ls-l1-u-sqssvm)")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qsurf", description="Kernel-free quadratic surface SVM toolkit")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="write a synthetic labeled dataset")
    g.add_argument("generator", choices=["quadratic", "normal", "linear"])
    g.add_argument("--m", type=int, default=100, help="points per class")
    g.add_argument("--n", type=int, default=2, help="number of features")
    g.add_argument("--noise", type=float, default=0.0,
                   help="quadratic: label noise; >0 gives a non-separable set")
    g.add_argument("--sep", type=float, default=2.0, help="normal: distance between means")
    g.add_argument("--margin", type=float, default=0.2, help="linear: half-gap")
    g.add_argument("--out")
    _add_common(g)

    u = sub.add_parser("universum", help="average random cross-class pairs")
    _add_data(u)
    u.add_argument("--fraction", type=float, default=0.1)
    u.add_argument("--out")
    _add_common(u)

    t = sub.add_parser("train", help="fit a model and write it as JSON")
    _add_model(t)
    _add_data(t)
    _add_hyper(t)
    t.add_argument("--fraction", type=float, default=0.1)
    t.add_argument("--universum", help="CSV of Universum points (raw coordinates)")
    t.add_argument("--out", required=True)
    t.add_argument("--dump-qp", help="write the assembled QP to this path")
    _add_common(t)

    p = sub.add_parser("predict", help="label points with a saved model")
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--data", required=True)
    p.add_argument("--label", default=None, help="column to drop before predicting")
    p.add_argument("--out")
    _add_common(p)

    a = sub.add_parser("accuracy", help="score a predictions file against labels")
    a.add_argument("--pred", required=True, help="CSV written by predict")
    _add_data(a)
    _add_common(a)

    for name, helptext in (("cv", "k-fold cross-validation"), ("grid", "grid search")):
        c = sub.add_parser(name, help=helptext)
        _add_model(c)
        _add_data(c)
        c.add_argument("--k", type=int, default=5)
        c.add_argument("--fraction", type=float, default=0.1)
        c.add_argument("--out-dir", required=True)
        _add_common(c)
        if name == "cv":
            _add_hyper(c)
        else:
            c.add_argument("--mu-grid", type=_exponents, default=_exponents("-4:20"),
                           help="log2 exponents, e.g. -4:20 or 0,4,8")
            c.add_argument("--lambda-grid", type=_exponents, default=_exponents("-8:20"))
            c.add_argument("--cu-grid", type=_exponents, default=_exponents("-4:10"))
            c.add_argument("--eps-grid", type=_exponents, default=_exponents("-8:0"))
            c.add_argument("--workers", type=int, default=None)

    s = sub.add_parser("sweep-colormap", help="CV accuracy over a (C_u, eps) grid")
    _add_model(s)
    _add_data(s)
    s.add_argument("--mu", type=float, required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=0.0)
    s.add_argument("--cu-grid", type=_exponents, default=_exponents("-4:10"))
    s.add_argument("--eps-grid", type=_exponents, default=_exponents("-8:0"))
    s.add_argument("--k", type=int, default=5)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--workers", type=int, default=None)
    _add_common(s)

    r = sub.add_parser("sweep-urate", help="CV accuracy against the Universum fraction")
    _add_model(r)
    _add_data(r)
    _add_hyper(r)
    r.add_argument("--rates", type=_floats, default=_floats("0.05,0.1,0.15,0.2,0.25,0.3"))
    r.add_argument("--repeats", type=int, default=10)
    r.add_argument("--k", type=int, default=5)
    r.add_argument("--out-dir", required=True)
    r.add_argument("--workers", type=int, default=None)
    _add_common(r)
    return ap


# ---------------------------------------------------------------- commands

def _hyper(args) -> Hyperparams:
    kind = ModelKind(args.model)
    eps = args.eps if args.eps is not None else (0.0 if kind.is_least_squares else 0.01)
    return Hyperparams(args.mu, args.lam, args.cu, eps)


def _emit(text: str, out, stdout) -> None:
    if out:
        Path(out).write_text(text)
    else:
        stdout.write(text)


def _load(args) -> ds.LabeledDataset:
    try:
        return ds.load_csv(args.data, args.label, args.positive)
    except OSError as exc:
        raise DataError(f"cannot read {args.data}: {exc}") from None


def _out_dir(path) -> Path:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_gen_data(args, stdout):
    if args.m < 1 or args.n < 1:
        raise UsageError("--m and --n must be positive")
    if args.generator == "quadratic":
        data = ds.synth_quadratic(args.m, args.n, noise=args.noise,
                                  separable=args.noise == 0, rng_seed=args.seed)
    elif args.generator == "normal":
        data = ds.synth_normal(args.m, args.n, args.sep, rng_seed=args.seed)
    else:
        data = ds.synth_linear(args.m, args.n, args.margin, rng_seed=args.seed)
    _emit(ds.dataset_to_csv(data), args.out, stdout)


def cmd_universum(args, stdout):
    data = _load(args)
    u = ds.generate_universum(data, args.fraction, args.seed)
    _emit(ds.points_to_csv(u.points, data.feature_names), args.out, stdout)


def _read_features(path, drop=None) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if len(rows) < 2:
        raise DataError(f"{path}: no data rows")
    header = [h.strip() for h in rows[0]]
    keep = list(range(len(header)))
    if drop is not None:
        keep.remove(ds._resolve_column(header, drop))
    out = np.empty((len(rows) - 1, len(keep)))
    for i, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise DataError(f"{path} row {i + 1}: expected {len(header)} cells, got {len(row)}")
        for k, j in enumerate(keep):
            try:
                out[i, k] = float(row[j])
            except ValueError:
                raise DataError(f"{path} row {i + 1}, column {header[j]!r}: "
                                f"non-numeric cell {row[j]!r}") from None
    return out


def cmd_train(args, stdout):
    kind = ModelKind(args.model)
    h = _hyper(args)
    data = _load(args)
    if data.is_single_class:
        raise DataError("training needs both classes")
    norm = ds.fit_normalizer(data)
    train = data.with_points(ds.apply_normalizer(norm, data.points))
    uni = None
    if kind.uses_universum:
        if args.universum:
            pts = _read_features(args.universum)
            if pts.shape[1] != data.n_features:
                raise DataError(f"Universum points have {pts.shape[1]} features, "
                                f"data has {data.n_features}")
            pts = ds.apply_normalizer(norm, pts)
            uni = ds.expand_universum(ds.UniversumSet(pts), data.n_features)
        else:
            uni = ds.expand_universum(ds.generate_universum(train, args.fraction, args.seed),
                                      data.n_features)
    if args.dump_qp:
        if kind.is_least_squares:
            raise UsageError("--dump-qp applies to QP-based models only")
        assemble(kind, train, uni, h).dump(args.dump_qp)
    model = train_model(kind, train, uni, h)
    model.classifier.norm = norm
    persist.save_model(model, args.out)
    if args.verbose:
        r = model.solve
        print(f"{kind.value}: status={r.status} iterations={r.iterations} "
              f"residual={r.residual:.3e} time={r.wall_time:.3f}s", file=sys.stderr)
    if not model.solve.converged:
        print(f"warning: solver stopped with status {model.solve.status}", file=sys.stderr)


def cmd_predict(args, stdout):
    stored = persist.load_model(args.model)
    X = _read_features(args.data, args.label)
    if X.shape[1] != stored.classifier.n:
        raise DataError(f"data has {X.shape[1]} features, model expects {stored.classifier.n}")
    f = stored.classifier.decision_function(X)
    pred = np.where(f >= 0, 1, -1)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["prediction", "decision"])
    for p, v in zip(pred, f):
        w.writerow([int(p), repr(float(v))])
    _emit(buf.getvalue(), args.out, stdout)


def cmd_accuracy(args, stdout):
    data = _load(args)
    try:
        rows = list(csv.DictReader(io.StringIO(Path(args.pred).read_text())))
    except OSError as exc:
        raise DataError(f"cannot read {args.pred}: {exc}") from None
    if not rows or "prediction" not in rows[0]:
        raise DataError(f"{args.pred}: expected a 'prediction' column")
    try:
        pred = np.array([float(r["prediction"]) for r in rows])
    except ValueError as exc:
        raise DataError(f"{args.pred}: {exc}") from None
    if pred.size != data.m:
        raise DataError(f"{pred.size} predictions for {data.m} labeled rows")
    stdout.write(f"{harness.accuracy(pred, data.labels):.6f}\n")


def cmd_cv(args, stdout):
    res = harness.cross_validate(args.model, _load(args), _hyper(args), args.k, args.seed,
                                 fraction=args.fraction)
    out = _out_dir(args.out_dir)
    harness.cv_table(res).write(out / "cv_table.csv")
    harness.timings_table(harness.cv_timings(res)).write(out / "timings.csv")
    for note in res.warnings:
        print(f"warning: {note}", file=sys.stderr)
    stdout.write(f"{res.mean_accuracy:.6f} {res.std_accuracy:.6f}\n")


def cmd_grid(args, stdout):
    grid = harness.GridSpec(args.mu_grid, args.lambda_grid, args.cu_grid, args.eps_grid)
    res = harness.grid_search(args.model, _load(args), grid, args.k, args.seed,
                              workers=args.workers, fraction=args.fraction)
    out = _out_dir(args.out_dir)
    harness.grid_table(res).write(out / "grid_table.csv")
    harness.cv_table(res.best).write(out / "cv_table.csv")
    harness.timings_table(harness.cv_timings(res.best, "best_")).write(out / "timings.csv")
    h = res.best.chosen
    stdout.write(f"{res.best.mean_accuracy:.6f} {res.best.std_accuracy:.6f} "
                 f"mu={h.mu!r} lambda={h.lam!r} cu={h.c_u!r} eps={h.eps!r}\n")


def cmd_sweep_colormap(args, stdout):
    val = harness.GridSpec._val
    res = harness.colormap_sweep(args.model, _load(args), args.mu, args.lam,
                                 [val(e) for e in args.cu_grid], [val(e) for e in args.eps_grid],
                                 args.k, args.seed, workers=args.workers)
    harness.colormap_table(res).write(_out_dir(args.out_dir) / "colormap.csv")
    c, e = res.best_point
    stdout.write(f"{res.best:.6f} cu={c!r} eps={e!r}\n")


def cmd_sweep_urate(args, stdout):
    curve = harness.universum_rate_curve(args.model, _load(args), _hyper(args), args.rates,
                                         args.repeats, args.k, args.seed, workers=args.workers)
    harness.urate_table(curve).write(_out_dir(args.out_dir) / "urate_curve.csv")
    for p in curve:
        stdout.write(f"{p.rate!r} {p.mean:.6f} {p.std:.6f}\n")


COMMANDS = {
    "gen-data": cmd_gen_data, "universum": cmd_universum, "train": cmd_train,
    "predict": cmd_predict, "accuracy": cmd_accuracy, "cv": cmd_cv, "grid": cmd_grid,
    "sweep-colormap": cmd_sweep_colormap, "sweep-urate": cmd_sweep_urate,
}


def _config(args) -> RunConfig:
    kind = ModelKind(args.model) if getattr(args, "model", None) in {k.value for k in ModelKind} \
        else None
    h = _hyper(args) if kind is not None and hasattr(args, "mu") and hasattr(args, "cu") else None
    if args.command == "sweep-colormap":
        # only mu and lambda are fixed here; the swept pair is checked by the harness
        h = Hyperparams(args.mu, args.lam, 1.0, 0.0)
    return RunConfig(args.command, kind, h, getattr(args, "k", None),
                     getattr(args, "fraction", None), getattr(args, "repeats", None))


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        problems = validate_config(_config(args))
        if args.command == "sweep-urate" and any(not 0 < r <= 1 for r in args.rates):
            problems.append("--rates must lie in (0, 1]")
        if problems:
            raise UsageError("\n".join(f"error: {p}" for p in problems))
        COMMANDS[args.command](args, stdout)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
