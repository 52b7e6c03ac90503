"""Quadratic-surface SVM models built on the dense QP solver.

The decision surface is ``f(x) = 1/2 x'Wx + x'b + c``.  Through the lift
``r(x) = [hvec(x x')/2; x]`` it is linear in ``z = [hvec(W); b]``:
``f(x) = z'r(x) + c``, and ``sum_i ||W x_i + b||^2 = z'Gz / 2``.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import symvec as sv
from .dataset import ExpandedUniversum, LabeledDataset, NormParams, apply_normalizer
from .errors import SolverError
from .qp import INFEASIBLE, QPProblem, QPSolution, solve_qp

HARD_MARGIN = 2.0 ** 20


class ModelKind(str, enum.Enum):
    SQSSVM = "sqssvm"
    L1_SQSSVM = "l1-sqssvm"
    U_SQSSVM = "u-sqssvm"
    L1_U_SQSSVM = "l1-u-sqssvm"
    LS_L1_U_SQSSVM = "ls-l1-u-sqssvm"

    @property
    def uses_universum(self) -> bool:
        return self in (ModelKind.U_SQSSVM, ModelKind.L1_U_SQSSVM, ModelKind.LS_L1_U_SQSSVM)

    @property
    def uses_l1(self) -> bool:
        return self in (ModelKind.L1_SQSSVM, ModelKind.L1_U_SQSSVM, ModelKind.LS_L1_U_SQSSVM)

    @property
    def is_least_squares(self) -> bool:
        return self is ModelKind.LS_L1_U_SQSSVM


@dataclass(frozen=True)
class Hyperparams:
    mu: float = 1.0
    lam: float = 0.0
    c_u: float = 0.0
    eps: float = 0.01

    def violations(self) -> list[str]:
        out = []
        if not self.mu > 0:
            out.append(f"--mu must be > 0 (got {self.mu})")
        if not self.lam >= 0:
            out.append(f"--lambda must be >= 0 (got {self.lam})")
        if not self.c_u >= 0:
            out.append(f"--cu must be >= 0 (got {self.c_u})")
        if not self.eps >= 0:
            out.append(f"--eps must be >= 0 (got {self.eps})")
        return out

    @classmethod
    def hard_margin(cls, lam: float = 0.0, eps: float = 0.01) -> "Hyperparams":
        """Large-penalty stand-in for the hard-margin model."""
        return cls(mu=HARD_MARGIN, lam=lam, c_u=HARD_MARGIN, eps=eps)

    def to_dict(self) -> dict:
        return {"mu": self.mu, "lambda": self.lam, "c_u": self.c_u, "eps": self.eps}

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        return cls(mu=d["mu"], lam=d["lambda"], c_u=d["c_u"], eps=d["eps"])


class TrainingSet:
    """Labeled points with their lifted features and the cached ``G`` matrix."""

    def __init__(self, points, labels):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.labels = np.asarray(labels, dtype=float).reshape(-1)
        if self.points.shape[0] != self.labels.size:
            raise ValueError("points and labels disagree in length")

    @classmethod
    def of(cls, data) -> "TrainingSet":
        if isinstance(data, TrainingSet):
            return data
        if isinstance(data, LabeledDataset):
            return cls(data.points, data.labels)
        if isinstance(data, ExpandedUniversum):
            return cls(data.points, data.labels)
        points, labels = data
        return cls(points, labels)

    @property
    def m(self) -> int:
        return self.labels.size

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @cached_property
    def R(self) -> np.ndarray:
        """Row ``i`` is the lifted feature ``r_i``."""
        if self.m == 0:
            return np.zeros((0, sv.lifted_dim(self.n)))
        return sv.embed_points(self.points)

    @cached_property
    def G(self) -> np.ndarray:
        return sv.build_G(self.points)


def _universum_set(universum, n: int) -> TrainingSet:
    if universum is None:
        return TrainingSet(np.zeros((0, n)), np.zeros(0))
    u = TrainingSet.of(universum)
    if u.m and u.n != n:
        raise ValueError(f"universum has dimension {u.n}, training data {n}")
    if u.m == 0:
        return TrainingSet(np.zeros((0, n)), np.zeros(0))
    return u


@dataclass
class QuadraticClassifier:
    w_half: sv.SymHalfVec
    b: np.ndarray
    c: float
    norm: NormParams | None = None

    @property
    def n(self) -> int:
        return self.w_half.n

    @property
    def W(self) -> np.ndarray:
        return self.w_half.to_matrix()

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.w_half.data, self.b])

    @classmethod
    def from_z(cls, z, c: float, n: int, norm: NormParams | None = None) -> "QuadraticClassifier":
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.size != sv.lifted_dim(n):
            raise ValueError(f"z has {z.size} entries, expected {sv.lifted_dim(n)} for n={n}")
        h = sv.half_dim(n)
        return cls(sv.SymHalfVec(n, z[:h]), z[h:].copy(), float(c), norm)

    def raw_decision(self, X) -> np.ndarray:
        """``f`` on points already in the model's (normalized) coordinates."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n:
            raise ValueError(f"points have dimension {X.shape[1]}, model expects {self.n}")
        W = self.W
        return 0.5 * np.einsum("ij,jk,ik->i", X, W, X) + X @ self.b + self.c

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n:
            raise ValueError(f"points have dimension {X.shape[1]}, model expects {self.n}")
        if self.norm is not None:
            X = apply_normalizer(self.norm, X)
        return self.raw_decision(X)

    def predict(self, X) -> np.ndarray:
        # ties go to +1
        return np.where(self.decision_function(X) >= 0, 1.0, -1.0)


def decision_value(cl: QuadraticClassifier, x) -> float:
    return float(cl.decision_function(np.asarray(x, dtype=float).reshape(1, -1))[0])


def predict(cl: QuadraticClassifier, x) -> int:
    return 1 if decision_value(cl, x) >= 0 else -1


@dataclass
class SolveReport:
    solver: str
    status: str
    converged: bool
    iterations: int
    residual: float
    wall_time: float
    ridge: float = 0.0
    step_norm: float = float("nan")
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "solver": self.solver, "status": self.status, "converged": self.converged,
            "iterations": self.iterations, "residual": self.residual,
            "wall_time": self.wall_time, "ridge": self.ridge, "step_norm": self.step_norm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolveReport":
        return cls(**{k: d[k] for k in ("solver", "status", "converged", "iterations",
                                         "residual", "wall_time", "ridge", "step_norm")})


@dataclass
class TrainedModel:
    classifier: QuadraticClassifier
    xi: np.ndarray
    psi: np.ndarray
    solve: SolveReport
    kind: ModelKind
    hyperparams: Hyperparams | None = None
    objective: float = float("nan")
    # split variables of the L1 models and anything else a solver wants to expose
    extras: dict = field(default_factory=dict)


# ------------------------------------------------------------------ assembly

def _layout(n: int, m: int, r2: int, l1: bool) -> dict:
    h, dz = sv.half_dim(n), sv.lifted_dim(n)
    blocks = {}
    if l1:
        blocks["p"] = slice(0, h)
        blocks["q"] = slice(h, 2 * h)
        blocks["b"] = slice(2 * h, 2 * h + n)
        k = 2 * h + n
    else:
        blocks["z"] = slice(0, dz)
        k = dz
    blocks["c"] = slice(k, k + 1)
    blocks["xi"] = slice(k + 1, k + 1 + m)
    blocks["psi"] = slice(k + 1 + m, k + 1 + m + r2)
    return blocks


def _z_map(n: int, l1: bool) -> np.ndarray:
    """Matrix ``T`` with ``z = T @ (surface variables)``.

    Without L1 the surface variables are ``z`` itself; with L1 they are
    ``(p, q, b)`` and ``hvec(W) = p - q``.
    """
    h, dz = sv.half_dim(n), sv.lifted_dim(n)
    if not l1:
        return np.eye(dz)
    T = np.zeros((dz, 2 * h + n))
    T[:h, :h] = np.eye(h)
    T[:h, h:2 * h] = -np.eye(h)
    T[h:, 2 * h:] = np.eye(n)
    return T


def _assemble(train, universum, h: Hyperparams, l1: bool) -> QPProblem:
    tr = TrainingSet.of(train)
    if tr.m < 1:
        raise ValueError("need at least one training point")
    n, m = tr.n, tr.m
    un = _universum_set(universum, n)
    r2 = un.m
    blocks = _layout(n, m, r2, l1)
    T = _z_map(n, l1)
    ns = T.shape[1]
    d = ns + 1 + m + r2

    Qm = np.zeros((d, d))
    Qm[:ns, :ns] = T.T @ tr.G @ T
    q = np.zeros(d)
    if l1:
        q[blocks["p"]] = h.lam
        q[blocks["q"]] = h.lam
    q[blocks["xi"]] = h.mu
    q[blocks["psi"]] = h.c_u

    A = np.zeros((m + r2, d))
    A[:m, :ns] = (tr.labels[:, None] * tr.R) @ T
    A[:m, ns] = tr.labels
    A[:m, blocks["xi"]] = np.eye(m)
    bvec = np.ones(m + r2)
    if r2:
        A[m:, :ns] = (un.labels[:, None] * un.R) @ T
        A[m:, ns] = un.labels
        A[m:, blocks["psi"]] = np.eye(r2)
        bvec[m:] = -h.eps

    mask = np.zeros(d, dtype=bool)
    mask[blocks["xi"]] = True
    mask[blocks["psi"]] = True
    if l1:
        mask[blocks["p"]] = True
        mask[blocks["q"]] = True
    blocks["n"] = n
    blocks["l1"] = l1
    return QPProblem(Qm, q, A, bvec, mask, blocks)


def assemble_sqssvm(train, h: Hyperparams) -> QPProblem:
    """Soft-margin model: ``min z'Gz/2 + mu sum xi`` s.t. ``y_i (z'r_i + c) >= 1 - xi_i``."""
    return _assemble(train, None, h, l1=False)


def assemble_u_sqssvm(train, universum: ExpandedUniversum | None, h: Hyperparams) -> QPProblem:
    """Add ``C_u sum psi`` and ``y_j (z'r_j + c) >= -eps - psi_j`` for the 2r Universum rows."""
    return _assemble(train, universum, h, l1=False)


def assemble_l1_variant(base, train, universum=None, h: Hyperparams | None = None) -> QPProblem:
    """L1-penalized version of ``base`` (``"sqssvm"`` or ``"u-sqssvm"``).

    ``||hvec(W)||_1`` is handled by writing ``hvec(W) = p - q`` with
    ``p, q >= 0`` and charging ``lam * sum(p + q)``.  Each entry of the
    lower triangle appears once, which equals the upper-triangle sum.
    """
    base = ModelKind(base)
    if base not in (ModelKind.SQSSVM, ModelKind.U_SQSSVM):
        raise ValueError(f"no L1 variant for base model {base.value}")
    if h is None:
        raise ValueError("hyperparameters are required")
    if h.lam < 0:
        raise ValueError("lambda must be nonnegative")
    return _assemble(train, universum if base is ModelKind.U_SQSSVM else None, h, l1=True)


def assemble(kind: ModelKind, train, universum, h: Hyperparams) -> QPProblem:
    kind = ModelKind(kind)
    if kind is ModelKind.SQSSVM:
        return assemble_sqssvm(train, h)
    if kind is ModelKind.U_SQSSVM:
        return assemble_u_sqssvm(train, universum, h)
    if kind is ModelKind.L1_SQSSVM:
        return assemble_l1_variant(ModelKind.SQSSVM, train, None, h)
    if kind is ModelKind.L1_U_SQSSVM:
        return assemble_l1_variant(ModelKind.U_SQSSVM, train, universum, h)
    raise ValueError(f"{kind.value} is not a QP model")


def surface_from_solution(x, blocks) -> tuple[np.ndarray, float]:
    """Read ``(z, c)`` out of a QP primal vector."""
    x = np.asarray(x, dtype=float)
    if "z" in blocks:
        z = x[blocks["z"]].copy()
    else:
        z = np.concatenate([x[blocks["p"]] - x[blocks["q"]], x[blocks["b"]]])
    return z, float(x[blocks["c"]][0])


def extract_classifier(sol: QPSolution, n: int, blocks: dict | None = None,
                       kind: ModelKind | None = None) -> TrainedModel:
    """Unpack ``z = [hvec(W); b]``, ``c``, ``xi`` and ``psi``; split variables are dropped."""
    blocks = blocks if blocks is not None else sol.blocks
    if sol.status == INFEASIBLE:
        raise SolverError("QP solver reported infeasibility")
    if blocks.get("n", n) != n:
        raise ValueError(f"solution was assembled for n={blocks['n']}, not n={n}")
    last = max(s.stop for s in blocks.values() if isinstance(s, slice))
    if sol.x.size != last:
        raise ValueError("solution vector does not match the block layout")
    z, c = surface_from_solution(sol.x, blocks)
    cl = QuadraticClassifier.from_z(z, c, n)
    extras = {}
    if "p" in blocks:
        extras["p"] = sol.x[blocks["p"]].copy()
        extras["q"] = sol.x[blocks["q"]].copy()
    if kind is None:
        l1 = bool(blocks.get("l1"))
        has_u = blocks["psi"].stop > blocks["psi"].start
        kind = {(False, False): ModelKind.SQSSVM, (True, False): ModelKind.L1_SQSSVM,
                (False, True): ModelKind.U_SQSSVM, (True, True): ModelKind.L1_U_SQSSVM}[(l1, has_u)]
    report = SolveReport(solver="ipm", status=sol.status, converged=sol.converged,
                         iterations=sol.iterations, residual=sol.kkt_residual, wall_time=0.0,
                         ridge=sol.ridge, trace=sol.trace)
    return TrainedModel(
        classifier=cl, xi=sol.x[blocks["xi"]].copy(), psi=sol.x[blocks["psi"]].copy(),
        solve=report, kind=kind, objective=sol.objective, extras=extras,
    )


def _purify_split(prob: QPProblem, sol: QPSolution) -> None:
    """Replace ``(p, q)`` by ``(max(p - q, 0), max(q - p, 0))`` in place.

    ``W`` is unchanged and the L1 charge can only drop, so the point stays
    feasible and no worse; it removes the interior-point residue in both.
    """
    bp, bq = prob.blocks["p"], prob.blocks["q"]
    w = sol.x[bp] - sol.x[bq]
    x = sol.x.copy()
    x[bp] = np.maximum(w, 0.0)
    x[bq] = np.maximum(-w, 0.0)
    sol.x = x
    sol.objective = prob.objective(x)


def _tighten_slacks(prob: QPProblem, sol: QPSolution) -> None:
    """Set every slack to the smallest value its constraint allows.

    With ``(z, c)`` fixed, ``xi_i = max(0, 1 - y_i f(x_i))`` and
    ``psi_j = max(0, -eps - y_j f(u_j))`` are optimal, so this only strips
    interior-point residue; afterwards the QP objective equals the
    loss-form objective.
    """
    x = sol.x.copy()
    for name in ("xi", "psi"):
        blk = prob.blocks[name]
        x[blk] = 0.0
    rows = prob.A_ineq @ x - prob.b_ineq
    m = prob.blocks["xi"].stop - prob.blocks["xi"].start
    x[prob.blocks["xi"]] = np.maximum(0.0, -rows[:m])
    x[prob.blocks["psi"]] = np.maximum(0.0, -rows[m:])
    sol.x = x
    sol.objective = prob.objective(x)


def _center_offset(prob: QPProblem, sol: QPSolution) -> None:
    """Move ``c`` to the middle of its optimal interval for the solved surface.

    With the surface fixed the objective is a convex piecewise-linear
    function of ``c`` that is often flat on an interval.  Which point of
    the interval an interior-point method returns depends on its path, so
    two equivalent formulations can disagree on borderline points.  The
    midpoint removes that dependence.  Slacks are left for
    :func:`_tighten_slacks`.
    """
    bc = prob.blocks["c"].start
    x = sol.x.copy()
    x[prob.blocks["xi"]] = 0.0
    x[prob.blocks["psi"]] = 0.0
    x[bc] = 0.0
    y = prob.A_ineq[:, bc]
    g = prob.A_ineq @ x - prob.b_ineq
    w = np.concatenate([prob.q[prob.blocks["xi"]], prob.q[prob.blocks["psi"]]])
    live = w > 0
    # flat towards -inf (or +inf) when no weighted row of label +1 (or -1) exists
    if not np.any(live & (y > 0)) or not np.any(live & (y < 0)):
        return
    g, y, w = g[live], y[live], w[live]
    brk = -g * y
    phi = np.maximum(0.0, -g[None, :] - y[None, :] * brk[:, None]) @ w
    best = float(np.min(phi))
    on = brk[phi <= best + 1e-12 * (1.0 + abs(best))]
    x = sol.x.copy()
    x[bc] = 0.5 * (float(np.min(on)) + float(np.max(on)))
    sol.x = x


def train_model(kind, train, universum, h: Hyperparams, *, tol: float = 1e-8,
                max_iter: int = 200, irls_config=None, init_scale: float = 1.0) -> TrainedModel:
    """Fit one model on (already normalized) data.

    QP kinds go through :func:`solve_qp`; the least-squares kind through
    :func:`qsurf.irls.irls_solve`.
    """
    kind = ModelKind(kind)
    if kind.is_least_squares:
        from .irls import IRLSConfig, irls_solve
        return irls_solve(train, universum, h, irls_config or IRLSConfig())
    tr = TrainingSet.of(train)
    prob = assemble(kind, tr, universum if kind.uses_universum else None, h)
    t0 = time.perf_counter()
    sol = solve_qp(prob, tol=tol, max_iter=max_iter, init_scale=init_scale)
    if prob.blocks.get("l1"):
        _purify_split(prob, sol)
    _center_offset(prob, sol)
    _tighten_slacks(prob, sol)
    elapsed = time.perf_counter() - t0
    model = extract_classifier(sol, tr.n, prob.blocks, kind)
    model.solve.wall_time = elapsed
    model.hyperparams = h
    return model


# -------------------------------------------------------------------- losses

def hinge_loss(eps: float, t):
    """``max(0, -eps - t)``; the margin hinge ``max(0, 1 - t)`` is ``hinge_loss(-1, t)``."""
    return np.maximum(0.0, -eps - np.asarray(t, dtype=float))


def eps_insensitive_loss(eps: float, t):
    t = np.asarray(t, dtype=float)
    return hinge_loss(eps, t) + hinge_loss(eps, -t)


def soft_objective(model: TrainedModel, train, universum, h: Hyperparams) -> float:
    """Loss-form objective of a QP model evaluated at its surface.

    ``sum ||W x_i + b||^2 + lam sum_{i<=j} |W_ij| + mu sum max(0, 1 - y_i f(x_i))
    + C_u sum_j rho(f(u_j))`` where ``j`` runs over the ``r`` distinct
    Universum points (each contributes through both of its +-1 copies).
    The L1 and Universum terms are included only for kinds that use them.
    """
    tr = TrainingSet.of(train)
    cl = model.classifier
    W, b = cl.W, cl.b
    total = float(np.sum((tr.points @ W + b) ** 2))
    if model.kind.uses_l1:
        total += h.lam * float(np.sum(np.abs(cl.w_half.data)))
    f_train = cl.raw_decision(tr.points)
    total += h.mu * float(np.sum(hinge_loss(-1.0, tr.labels * f_train)))
    if model.kind.uses_universum and universum is not None:
        un = TrainingSet.of(universum)
        if un.m:
            distinct = un.points[un.labels > 0]
            total += h.c_u * float(np.sum(eps_insensitive_loss(h.eps, cl.raw_decision(distinct))))
    return total


def c_bounds(model: TrainedModel, train, universum, h: Hyperparams) -> tuple[float, float]:
    """Interval ``[c_lower, c_upper]`` that must contain the optimal offset.

    ``c_lower = max(alpha_lo, beta_lo)`` and ``c_upper = min(alpha_hi, beta_hi)``
    with ``alpha_lo = max_{y_i=+1} (1 - xi_i - z'r_i)``,
    ``alpha_hi = min_{y_i=-1} (xi_i - 1 - z'r_i)``,
    ``beta_lo = max_{j<=r} (-eps - psi_j - z'r_j)`` and
    ``beta_hi = min_{j>r} (eps + psi_j - z'r_j)``.
    Missing sides give -inf / +inf.
    """
    tr = TrainingSet.of(train)
    z = model.classifier.z
    zr = tr.R @ z
    pos, neg = tr.labels > 0, tr.labels < 0
    xi = np.asarray(model.xi, dtype=float)
    a_lo = float(np.max(1 - xi[pos] - zr[pos])) if pos.any() else -np.inf
    a_hi = float(np.min(xi[neg] - 1 - zr[neg])) if neg.any() else np.inf
    b_lo, b_hi = -np.inf, np.inf
    if universum is not None and np.size(model.psi):
        un = TrainingSet.of(universum)
        if un.m:
            zu = un.R @ z
            psi = np.asarray(model.psi, dtype=float)
            up, uneg = un.labels > 0, un.labels < 0
            if up.any():
                b_lo = float(np.max(-h.eps - psi[up] - zu[up]))
            if uneg.any():
                b_hi = float(np.min(h.eps + psi[uneg] - zu[uneg]))
    return max(a_lo, b_lo), min(a_hi, b_hi)


def constraint_violation(model: TrainedModel, train, universum, h: Hyperparams) -> float:
    """Largest violation of the margin and Universum constraints given the slacks."""
    tr = TrainingSet.of(train)
    cl = model.classifier
    worst = 0.0
    f = cl.raw_decision(tr.points)
    worst = max(worst, float(np.max(1 - model.xi - tr.labels * f, initial=0.0)))
    if universum is not None and np.size(model.psi):
        un = TrainingSet.of(universum)
        if un.m:
            fu = cl.raw_decision(un.points)
            worst = max(worst, float(np.max(-h.eps - model.psi - un.labels * fu, initial=0.0)))
    return worst
