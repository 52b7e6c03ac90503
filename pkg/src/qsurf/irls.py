"""Least-squares Universum model solved by iteratively reweighted linear systems.

The model minimizes::

    1/2 z'Gz + lam ||Vz||_1 + mu ||e - D1 (A'z + c e)||^2
                            + C_u ||eps e + D2 (U'z + c e)||^2

where ``A`` holds the lifted training points as columns, ``U`` the lifted
(duplicated) Universum points, ``D1``/``D2`` their labels and ``V`` picks
``hvec(W)`` out of ``z``.  Each sweep replaces ``lam ||Vz||_1`` by the
quadratic ``lam/2 (Vz)' D (Vz)`` with ``D = diag(1 / (|Vz_prev| + delta))``
and solves the resulting linear system ``Sigma [z; c] = beta``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import symvec as sv
from .errors import SolverError
from .models import (
    Hyperparams, ModelKind, QuadraticClassifier, SolveReport, TrainedModel, TrainingSet,
    _universum_set,
)


@dataclass(frozen=True)
class IRLSConfig:
    tol: float = 1e-6
    max_iter: int = 500
    delta: float = 1e-8
    # relative to the mean diagonal of the (Jacobi-scaled) system
    ridge: float = 1e-10
    # after the step rule fires, keep sweeping (within max_iter) until the
    # smoothed gradient is below grad_tol * (1 + ||beta||); None disables
    grad_tol: float | None = 1e-5

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class LSSystem:
    Sigma: np.ndarray
    beta: np.ndarray
    A: np.ndarray
    U: np.ndarray
    y1: np.ndarray
    y2: np.ndarray

    def residual(self, w) -> float:
        return float(np.linalg.norm(self.Sigma @ w - self.beta))


class _LSParts:
    """Iteration-invariant pieces of ``Sigma`` and ``beta``."""

    def __init__(self, train, universum, h: Hyperparams):
        tr = TrainingSet.of(train)
        un = _universum_set(universum, tr.n)
        self.n, self.m, self.r2 = tr.n, tr.m, un.m
        self.nh = sv.half_dim(tr.n)
        self.tr, self.un = tr, un
        self.A = tr.R.T
        self.U = un.R.T
        self.y1, self.y2 = tr.labels, un.labels
        mu, cu, eps = h.mu, h.c_u, h.eps
        d = sv.lifted_dim(tr.n)
        base = np.zeros((d + 1, d + 1))
        base[:d, :d] = tr.G + 2 * mu * self.A @ self.A.T + 2 * cu * self.U @ self.U.T
        col = 2 * mu * self.A.sum(axis=1) + 2 * cu * self.U.sum(axis=1)
        base[:d, d] = col
        base[d, :d] = col
        base[d, d] = 2 * mu * self.m + 2 * cu * self.r2  # 2 mu m + 4 C_u r
        self.base = base
        beta = np.empty(d + 1)
        beta[:d] = 2 * mu * self.A @ self.y1 - 2 * cu * eps * self.U @ self.y2
        beta[d] = 2 * mu * self.y1.sum() - 2 * cu * eps * self.y2.sum()
        self.beta = beta
        self.lam = h.lam
        self.mu, self.cu, self.eps = h.mu, h.c_u, h.eps

    def sigma(self, Dvec) -> np.ndarray:
        S = self.base.copy()
        idx = np.arange(self.nh)
        S[idx, idx] += self.lam * np.asarray(Dvec, dtype=float)
        return S


def assemble_ls_system(train, universum, h: Hyperparams, D) -> LSSystem:
    """Build ``Sigma`` and ``beta`` for the weights ``D`` (the diagonal, length n(n+1)/2)."""
    parts = _LSParts(train, universum, h)
    D = np.asarray(D, dtype=float).reshape(-1)
    if D.size != parts.nh:
        raise ValueError(f"D must have {parts.nh} entries, got {D.size}")
    return LSSystem(parts.sigma(D), parts.beta.copy(), parts.A, parts.U, parts.y1, parts.y2)


def _solve_spd(S: np.ndarray, rhs: np.ndarray, ridge: float) -> tuple[np.ndarray, float]:
    """Solve ``S w = rhs`` after symmetric Jacobi scaling; ridge only if Cholesky fails."""
    dg = np.sqrt(np.maximum(np.diag(S), np.finfo(float).tiny))
    Ss = S / np.outer(dg, dg)
    rs = rhs / dg
    used = 0.0
    try:
        fac = sla.cho_factor(Ss, lower=True, check_finite=False)
    except (np.linalg.LinAlgError, sla.LinAlgError):
        used = ridge
        try:
            fac = sla.cho_factor(Ss + used * np.eye(Ss.shape[0]), lower=True, check_finite=False)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            raise SolverError("least-squares system is singular even after regularization; "
                              "data may be degenerate") from None
    y = sla.cho_solve(fac, rs, check_finite=False)
    # one step of refinement against the unscaled system
    y = y + sla.cho_solve(fac, rs - Ss @ y, check_finite=False)
    return y / dg, used


def _weights(z, nh: int, delta: float) -> np.ndarray:
    return 1.0 / (np.abs(z[:nh]) + delta)


def smoothed_objective(z, c, parts: _LSParts, delta: float) -> float:
    """Objective with ``|v|`` replaced by ``|v| - delta log(1 + |v|/delta)``.

    Each reweighted solve minimizes a quadratic majorizer of this function,
    so its value cannot increase from one iterate to the next.
    """
    v = np.abs(z[:parts.nh])
    l1 = np.sum(v - delta * np.log1p(v / delta))
    return _ls_value(z, c, parts) + parts.lam * float(l1)


def _ls_value(z, c, parts: _LSParts) -> float:
    """Everything except the L1 term."""
    tr, un = parts.tr, parts.un
    val = 0.5 * z @ tr.G @ z
    xi = 1 - parts.y1 * (tr.R @ z + c)
    val += parts.mu * float(xi @ xi)
    if un.m:
        psi = parts.eps + parts.y2 * (un.R @ z + c)
        val += parts.cu * float(psi @ psi)
    return float(val)


def ls_objective(z, c, train, universum, h: Hyperparams) -> float:
    """Direct evaluation of the least-squares objective at ``(z, c)``."""
    tr = TrainingSet.of(train)
    un = _universum_set(universum, tr.n)
    z = np.asarray(z, dtype=float)
    nh = sv.half_dim(tr.n)
    val = 0.5 * z @ tr.G @ z + h.lam * float(np.sum(np.abs(z[:nh])))
    res1 = 1 - tr.labels * (tr.R @ z + c)
    val += h.mu * float(res1 @ res1)
    if un.m:
        res2 = h.eps + un.labels * (un.R @ z + c)
        val += h.c_u * float(res2 @ res2)
    return float(val)


def irls_solve(train, universum, h: Hyperparams, cfg: IRLSConfig | None = None,
               z0=None) -> TrainedModel:
    """Fit the least-squares model by reweighted linear solves.

    Without ``z0`` the iteration starts from one solve with ``D = I``.
    The step rule ``||w_{k+1} - w_k|| <= cfg.tol`` (``w = [z; c]``) marks
    convergence.  Components sitting near zero can keep their weights
    moving after that, so sweeps continue until the smoothed gradient also
    meets ``cfg.grad_tol`` or the budget runs out.  On hitting ``cfg.max_iter`` the last iterate is returned with
    ``converged=False``.  Slacks are reconstructed from the equality
    constraints, so they may be negative.
    """
    cfg = cfg or IRLSConfig()
    t0 = time.perf_counter()
    parts = _LSParts(train, universum, h)
    nh = parts.nh
    ridge_used = 0.0
    if z0 is None:
        w, ridge_used = _solve_spd(parts.sigma(np.ones(nh)), parts.beta, cfg.ridge)
    else:
        z0 = np.asarray(z0, dtype=float).reshape(-1)
        if z0.size != sv.lifted_dim(parts.n):
            raise ValueError(f"z0 must have {sv.lifted_dim(parts.n)} entries")
        w = np.concatenate([z0, [0.0]])

    trace = [{"iter": 0, "step": float("nan"),
              "smoothed": smoothed_objective(w[:-1], w[-1], parts, cfg.delta),
              "objective": _ls_value(w[:-1], w[-1], parts) + h.lam * float(np.abs(w[:nh]).sum())}]
    converged = False
    step = float("inf")
    fired_at = None
    bnorm = float(np.linalg.norm(parts.beta))
    D = _weights(w, nh, cfg.delta)
    k = 0
    for k in range(1, cfg.max_iter + 1):
        D = _weights(w, nh, cfg.delta)
        w_new, r = _solve_spd(parts.sigma(D), parts.beta, cfg.ridge)
        ridge_used = max(ridge_used, r)
        step = float(np.linalg.norm(w_new - w))
        w = w_new
        trace.append({"iter": k, "step": step,
                      "smoothed": smoothed_objective(w[:-1], w[-1], parts, cfg.delta),
                      "objective": _ls_value(w[:-1], w[-1], parts)
                      + h.lam * float(np.abs(w[:nh]).sum())})
        if step <= cfg.tol:
            if fired_at is None:
                fired_at = k
            converged = True
            if cfg.grad_tol is None:
                break
            g = np.linalg.norm(parts.sigma(_weights(w, nh, cfg.delta)) @ w - parts.beta)
            if g <= cfg.grad_tol * (1 + bnorm):
                break

    z, c = w[:-1], float(w[-1])
    # fixed-point residual uses the weights of the last solve
    fixed = float(np.linalg.norm(parts.sigma(D) @ w - parts.beta))
    grad = float(np.linalg.norm(parts.sigma(_weights(w, nh, cfg.delta)) @ w - parts.beta))
    grad_ok = cfg.grad_tol is None or grad <= cfg.grad_tol * (1 + bnorm)
    elapsed = time.perf_counter() - t0

    xi = 1 - parts.y1 * (parts.tr.R @ z + c)
    psi = (-h.eps - parts.y2 * (parts.un.R @ z + c)) if parts.r2 else np.zeros(0)
    report = SolveReport(
        solver="irls", status="optimal" if converged else "max_iter", converged=converged,
        iterations=k, residual=grad, wall_time=elapsed, ridge=ridge_used, step_norm=step,
        trace=trace,
    )
    return TrainedModel(
        classifier=QuadraticClassifier.from_z(z, c, parts.n),
        xi=xi, psi=psi, solve=report, kind=ModelKind.LS_L1_U_SQSSVM, hyperparams=h,
        objective=ls_objective(z, c, parts.tr, parts.un, h),
        extras={"fixed_point_residual": fixed, "beta_norm": bnorm,
                "gradient_residual": grad, "weights": D, "step_rule_iter": fired_at,
                "gradient_target_met": bool(converged and grad_ok)},
    )


# ------------------------------------------------------- nonzero certificate

@dataclass
class NonzeroCertificate:
    threshold: float
    c_tilde: float
    xi_tilde: np.ndarray
    psi_tilde: np.ndarray
    c_hat: float
    xi_hat: np.ndarray
    psi_hat: np.ndarray
    numerator: float
    denominator: float
    valid: bool


def _tilde(tr: TrainingSet, un: TrainingSet, h: Hyperparams):
    m, r2 = tr.m, un.m
    c_t = (h.mu * tr.labels.sum() - h.c_u * h.eps * un.labels.sum()) / (h.mu * m + h.c_u * r2)
    xi_t = 1 - tr.labels * c_t
    psi_t = -h.eps - un.labels * c_t
    return float(c_t), xi_t, psi_t


def zero_solution_value(train, universum, h: Hyperparams) -> float:
    """Objective of the best classifier with ``z = 0``.

    If the optimal value is strictly below this, the optimal ``z`` is nonzero.
    """
    tr = TrainingSet.of(train)
    un = _universum_set(universum, tr.n)
    _, xi_t, psi_t = _tilde(tr, un, h)
    return h.mu * float(xi_t @ xi_t) + h.c_u * float(psi_t @ psi_t)


def nonzero_z_certificate(train, universum, h: Hyperparams, z_hat) -> NonzeroCertificate:
    """Penalty level above which the least-squares solution has ``z != 0``.

    Requires ``C_u == mu``.  The candidate ``z_hat`` certifies the bound
    when ``||xi~||^2 + ||psi~||^2 - ||xi^||^2 - ||psi^||^2 > 0``; then any
    ``mu`` above ``(z^'G z^/2 + lam ||V z^||_1) / denominator`` works.
    """
    if not np.isclose(h.c_u, h.mu, rtol=1e-12, atol=0.0):
        raise ValueError("the certificate assumes C_u == mu")
    tr = TrainingSet.of(train)
    un = _universum_set(universum, tr.n)
    z_hat = np.asarray(z_hat, dtype=float).reshape(-1)
    if z_hat.size != sv.lifted_dim(tr.n):
        raise ValueError(f"candidate must have {sv.lifted_dim(tr.n)} entries, got {z_hat.size}")
    c_t, xi_t, psi_t = _tilde(tr, un, h)
    fa = tr.R @ z_hat
    fu = un.R @ z_hat
    m, r2 = tr.m, un.m
    c_h = (tr.labels.sum() - fa.sum() - h.eps * un.labels.sum() - fu.sum()) / (m + r2)
    xi_h = 1 - tr.labels * fa - tr.labels * c_h
    psi_h = -h.eps - un.labels * fu - un.labels * c_h
    nh = sv.half_dim(tr.n)
    num = 0.5 * z_hat @ tr.G @ z_hat + h.lam * float(np.abs(z_hat[:nh]).sum())
    den = float(xi_t @ xi_t + psi_t @ psi_t - xi_h @ xi_h - psi_h @ psi_h)
    # rounding noise around a zero denominator must not certify anything
    floor = 1e-12 * (1 + float(xi_t @ xi_t + psi_t @ psi_t))
    valid = den > floor
    thr = num / den if valid else float("inf")
    return NonzeroCertificate(thr, c_t, xi_t, psi_t, float(c_h), xi_h, psi_h,
                              float(num), den, bool(valid))


def solve_auxiliary_z(train, universum, h: Hyperparams, ridge: float = 1e-10):
    """Unregularized least-squares fit used to propose a certificate candidate.

    Minimizes ``||e - D1 (A'z + c e)||^2 + ||eps e + D2 (U'z + c e)||^2`` via
    the normal equations with a small ridge.  Returns ``(z_hat, c_hat)``.
    """
    tr = TrainingSet.of(train)
    un = _universum_set(universum, tr.n)
    M = np.vstack([
        np.hstack([tr.labels[:, None] * tr.R, tr.labels[:, None]]),
        np.hstack([un.labels[:, None] * un.R, un.labels[:, None]]),
    ])
    t = np.concatenate([np.ones(tr.m), -h.eps * np.ones(un.m)])
    N = M.T @ M
    try:
        fac = sla.cho_factor(N + ridge * np.eye(N.shape[0]), lower=True)
    except (np.linalg.LinAlgError, sla.LinAlgError):
        raise SolverError("normal equations of the auxiliary problem are singular") from None
    rhs = M.T @ t
    w = sla.cho_solve(fac, rhs)
    w = w + sla.cho_solve(fac, rhs - N @ w)
    return w[:-1], float(w[-1])


def auxiliary_objective(z, c, train, universum, h: Hyperparams) -> float:
    tr = TrainingSet.of(train)
    un = _universum_set(universum, tr.n)
    r1 = 1 - tr.labels * (tr.R @ z + c)
    r2 = h.eps + un.labels * (un.R @ z + c)
    return float(r1 @ r1 + r2 @ r2)
