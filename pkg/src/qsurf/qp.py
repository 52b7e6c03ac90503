"""Dense convex quadratic programming.

Problems have the form::

    minimize    1/2 x^T Q x + q^T x
    subject to  A x >= b
                x[i] >= 0   for every i with nonneg_mask[i]

:func:`solve_qp` is a primal-dual interior-point method with Mehrotra's
predictor-corrector; :func:`brute_force_oracle` enumerates active sets and is
meant for tiny instances in tests.

Residuals are measured relative to the problem data: stationarity and
complementarity are divided by ``max(1, |Q|_max, |q|_max)`` (the natural
scale of the multipliers) and primal infeasibility by ``max(1, |b|_max)``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import SolverError

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible-detected"

STEP_TO_BOUNDARY = 0.99


@dataclass
class QPProblem:
    Q: np.ndarray
    q: np.ndarray
    A_ineq: np.ndarray
    b_ineq: np.ndarray
    nonneg_mask: np.ndarray
    # named variable blocks, filled in by the model assemblers
    blocks: dict = field(default_factory=dict)

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        d = self.q.size
        if self.Q.shape != (d, d):
            raise ValueError(f"Q has shape {self.Q.shape}, expected {(d, d)}")
        self.A_ineq = np.asarray(self.A_ineq, dtype=float).reshape(-1, d)
        self.b_ineq = np.asarray(self.b_ineq, dtype=float).reshape(-1)
        if self.A_ineq.shape[0] != self.b_ineq.size:
            raise ValueError("A_ineq and b_ineq disagree on the number of constraints")
        self.nonneg_mask = np.asarray(self.nonneg_mask, dtype=bool).reshape(-1)
        if self.nonneg_mask.size != d:
            raise ValueError("nonneg_mask must have one entry per variable")
        scale = max(1.0, float(np.max(np.abs(self.Q)))) if d else 1.0
        if d and np.max(np.abs(self.Q - self.Q.T)) > 1e-10 * scale:
            raise ValueError("Q is not symmetric")
        self.Q = 0.5 * (self.Q + self.Q.T)

    @property
    def n_vars(self) -> int:
        return self.q.size

    @property
    def n_ineq(self) -> int:
        return self.b_ineq.size

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q @ x + self.q @ x)

    def objective_scale(self) -> float:
        vals = [1.0]
        if self.Q.size:
            vals.append(float(np.max(np.abs(self.Q))))
        if self.q.size:
            vals.append(float(np.max(np.abs(self.q))))
        return max(vals)

    def rhs_scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.b_ineq)))) if self.b_ineq.size else 1.0

    def dump(self, path) -> None:
        """Write Q, q, A, b as plain-text blocks (debugging aid)."""
        with open(path, "w") as fh:
            for name, arr in (("Q", self.Q), ("q", self.q[None, :]),
                              ("A", self.A_ineq), ("b", self.b_ineq[None, :]),
                              ("nonneg", self.nonneg_mask[None, :].astype(int))):
                fh.write(f"# {name} {arr.shape[0]} {arr.shape[1] if arr.ndim > 1 else 1}\n")
                np.savetxt(fh, arr, fmt="%.17g")


@dataclass
class QPSolution:
    x: np.ndarray
    dual_ineq: np.ndarray
    dual_bound: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    status: str
    dual_objective: float = float("nan")
    trace: list = field(default_factory=list)
    ridge: float = 0.0
    blocks: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == OPTIMAL


def _residual_parts(p: QPProblem, x, lam, nu):
    """Scaled (stationarity, primal/dual feasibility, complementarity)."""
    so, sf = p.objective_scale(), p.rhs_scale()
    B = p.nonneg_mask
    grad = p.Q @ x + p.q - p.A_ineq.T @ lam
    grad[B] -= nu
    stat = float(np.max(np.abs(grad))) / so if grad.size else 0.0
    slack = p.A_ineq @ x - p.b_ineq
    viol = [0.0]
    if slack.size:
        viol.append(float(np.max(-slack)) / sf)
    if B.any():
        viol.append(float(np.max(-x[B])) / sf)
    if lam.size:
        viol.append(float(np.max(-lam)) / so)
    if nu.size:
        viol.append(float(np.max(-nu)) / so)
    feas = max(viol)
    comp = [0.0]
    if lam.size:
        comp.append(float(np.max(np.abs(lam * slack))) / so)
    if nu.size:
        comp.append(float(np.max(np.abs(nu * x[B]))) / so)
    return stat, feas, max(comp)


def kkt_residual(p: QPProblem, s: QPSolution) -> float:
    """Largest scaled violation of the KKT conditions at ``s``."""
    return max(_residual_parts(p, np.asarray(s.x, float), np.asarray(s.dual_ineq, float),
                               np.asarray(s.dual_bound, float)))


def _dual_objective(p: QPProblem, x, lam) -> float:
    return float(-0.5 * x @ p.Q @ x + p.b_ineq @ lam)


def _factor(K: np.ndarray, ridge: float):
    """Cholesky of ``K`` with an escalating diagonal ridge on failure."""
    scale = max(1.0, float(np.max(np.abs(np.diag(K))))) if K.size else 1.0
    eye = np.eye(K.shape[0])
    r = ridge
    for _ in range(12):
        try:
            return sla.cho_factor(K + r * eye if r else K, lower=True, check_finite=False), r
        except (np.linalg.LinAlgError, sla.LinAlgError):
            r = max(1e-12 * scale, r * 100.0)
    raise SolverError("KKT system is numerically singular even after regularization")


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def solve_qp(p: QPProblem, tol: float = 1e-8, max_iter: int = 200,
             init_scale: float = 1.0, polish: bool = True) -> QPSolution:
    """Solve a convex QP with a Mehrotra predictor-corrector interior-point method.

    Parameters
    ----------
    p : QPProblem
        Problem data; ``Q`` must be positive semidefinite.
    tol : float
        Target for the scaled KKT residual (see :func:`kkt_residual`).
    max_iter : int
        Iteration cap.  On exhaustion the last iterate is returned with
        status ``"max_iter"``.
    init_scale : float
        Starting value for every slack, multiplier and bounded variable.
    polish : bool
        After convergence, re-solve the equality-constrained problem on the
        detected active set and keep it if it lowers the residual.

    Returns
    -------
    QPSolution
    """
    d, m = p.n_vars, p.n_ineq
    B = p.nonneg_mask
    nb = int(B.sum())
    so = p.objective_scale()
    Q, q = p.Q / so, p.q / so
    A, b = p.A_ineq, p.b_ineq

    x = np.zeros(d)
    x[B] = init_scale
    s = np.full(m, float(init_scale))
    lam = np.full(m, float(init_scale))
    nu = np.full(nb, float(init_scale))
    n_comp = m + nb
    ridge = 0.0
    trace = []
    status = MAX_ITER

    def scaled_resid(x, lam, nu):
        # lam, nu live in the internally scaled units already
        return _residual_parts(p, x, lam * so, nu * so)

    def merit_of(x, s, lam, nu):
        rd = Q @ x + q - A.T @ lam
        rd[B] -= nu
        rp = A @ x - b - s
        parts = [0.0]
        if rd.size:
            parts.append(float(np.max(np.abs(rd))))
        if rp.size:
            parts.append(float(np.max(np.abs(rp))) / p.rhs_scale())
        if m:
            parts.append(float(np.max(s * lam)))
        if nb:
            parts.append(float(np.max(x[B] * nu)))
        return max(parts)

    it = 0
    for it in range(max_iter + 1):
        stat, feas, comp = scaled_resid(x, lam, nu)
        merit = merit_of(x, s, lam, nu)
        if not trace or trace[-1]["iter"] != it:
            trace.append({"iter": it, "stationarity": stat, "feasibility": feas,
                          "complementarity": comp, "merit": merit, "recovery": False})
        if max(stat, feas, comp) <= tol:
            status = OPTIMAL
            break
        if it == max_iter:
            break
        dual_mag = max(float(np.max(lam, initial=0.0)), float(np.max(nu, initial=0.0)))
        if dual_mag > 1e14:
            status = INFEASIBLE
            break

        rd = Q @ x + q - A.T @ lam
        rd[B] -= nu
        rp = A @ x - b - s
        mu = (s @ lam + x[B] @ nu) / n_comp if n_comp else 0.0

        K = Q + (A.T * (lam / s)) @ A
        K[np.flatnonzero(B), np.flatnonzero(B)] += nu / x[B]
        factor, ridge_used = _factor(K, ridge)
        ridge = max(ridge, ridge_used)

        def direction(rc1, rc2):
            rhs = -rd + A.T @ ((rc1 - lam * rp) / s)
            rhs[B] += rc2 / x[B]
            dx = sla.cho_solve(factor, rhs, check_finite=False)
            for _ in range(3):
                ds = A @ dx + rp
                dlam = (rc1 - lam * ds) / s
                dnu = (rc2 - nu * dx[B]) / x[B]
                # iterative refinement against the unreduced stationarity rows
                res = -rd - (Q @ dx - A.T @ dlam)
                res[B] += dnu
                if np.max(np.abs(res), initial=0.0) <= 1e-15 * (1 + np.max(np.abs(rd), initial=0.0)):
                    break
                dx = dx + sla.cho_solve(factor, res, check_finite=False)
            ds = A @ dx + rp
            dlam = (rc1 - lam * ds) / s
            dnu = (rc2 - nu * dx[B]) / x[B]
            return dx, ds, dlam, dnu

        def step_len(dx, ds, dlam, dnu):
            a = min(_max_step(s, ds), _max_step(lam, dlam),
                    _max_step(x[B], dx[B]), _max_step(nu, dnu))
            return a

        # predictor
        dx_a, ds_a, dl_a, dn_a = direction(-s * lam, -x[B] * nu)
        a_aff = step_len(dx_a, ds_a, dl_a, dn_a)
        if n_comp:
            mu_aff = ((s + a_aff * ds_a) @ (lam + a_aff * dl_a)
                      + (x[B] + a_aff * dx_a[B]) @ (nu + a_aff * dn_a)) / n_comp
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        else:
            sigma = 0.0
        # corrector
        rc1 = -s * lam - ds_a * dl_a + sigma * mu
        rc2 = -x[B] * nu - dx_a[B] * dn_a + sigma * mu
        dx, ds, dlam, dnu = direction(rc1, rc2)
        alpha = min(1.0, STEP_TO_BOUNDARY * step_len(dx, ds, dlam, dnu))

        def take(alpha):
            xn = x + alpha * dx
            return xn, s + alpha * ds, lam + alpha * dlam, nu + alpha * dnu

        xn, sn, ln, nn = take(alpha)
        new_merit = merit_of(xn, sn, ln, nn)
        recovery = False
        if new_merit > merit:
            # Recovery: a more strongly centered direction, backtracked until the
            # merit drops; if it never does, the shortest trial step is kept.
            recovery = True
            dx, ds, dlam, dnu = direction(-s * lam + 0.5 * mu, -x[B] * nu + 0.5 * mu)
            alpha = min(1.0, STEP_TO_BOUNDARY * step_len(dx, ds, dlam, dnu))
            for _ in range(20):
                xn, sn, ln, nn = take(alpha)
                new_merit = merit_of(xn, sn, ln, nn)
                if new_merit <= merit:
                    break
                alpha *= 0.5
            log.debug("qp iter %d: merit increase, recovery step alpha=%.3g", it, alpha)
        x, s, lam, nu = xn, sn, ln, nn
        trace.append({"iter": it + 1, "stationarity": float("nan"), "feasibility": float("nan"),
                      "complementarity": float("nan"), "merit": new_merit,
                      "recovery": recovery, "alpha": alpha, "sigma": sigma})
        # fill in the exact residuals for the new point on the next pass
        trace[-1].update(zip(("stationarity", "feasibility", "complementarity"),
                             scaled_resid(x, lam, nu)))

    lam_out, nu_out = lam * so, nu * so
    sol = QPSolution(
        x=x, dual_ineq=lam_out, dual_bound=nu_out, objective=p.objective(x),
        kkt_residual=0.0, iterations=it, status=status, trace=trace, ridge=ridge,
    )
    sol.kkt_residual = kkt_residual(p, sol)
    if polish and status == OPTIMAL:
        sol = _polish(p, sol)
    sol.dual_objective = _dual_objective(p, sol.x, sol.dual_ineq)
    sol.blocks = p.blocks
    return sol


def _polish(p: QPProblem, sol: QPSolution, max_flips: int = 3,
            exact_tol: float = 1e-12) -> QPSolution:
    """Refine an interior-point answer by solving the active-set KKT system.

    Constraints whose multiplier and slack are of similar size are ambiguous;
    besides the plain guess, every flip of up to ``max_flips`` of the most
    ambiguous ones is tried and the candidate with the lowest residual wins.
    The search stops early once a candidate reaches ``exact_tol``.
    """
    B = np.flatnonzero(p.nonneg_mask)
    C = np.vstack([p.A_ineq, np.eye(p.n_vars)[B]]) if B.size else p.A_ineq
    dvec = np.concatenate([p.b_ineq, np.zeros(B.size)])
    mult = np.concatenate([sol.dual_ineq, sol.dual_bound])
    slack = C @ sol.x - dvec
    ratio = np.log10(np.maximum(mult, 1e-300)) - np.log10(
        np.maximum(slack * p.objective_scale() / p.rhs_scale(), 1e-300))
    active = ratio > 0
    ambiguous = np.flatnonzero(np.abs(ratio) < 2)
    ambiguous = ambiguous[np.argsort(np.abs(ratio[ambiguous]))][:max_flips]
    best = sol
    for flips in itertools.chain.from_iterable(
            itertools.combinations(ambiguous, k) for k in range(len(ambiguous) + 1)):
        act = active.copy()
        act[list(flips)] = ~act[list(flips)]
        cand = _solve_equality_qp(p.Q, p.q, C[act], dvec[act])
        if cand is None:
            continue
        x, lam_act = cand
        mult_new = np.zeros(C.shape[0])
        mult_new[act] = lam_act
        trial = QPSolution(
            x=x, dual_ineq=mult_new[:p.n_ineq], dual_bound=mult_new[p.n_ineq:],
            objective=p.objective(x), kkt_residual=0.0, iterations=sol.iterations,
            status=sol.status, trace=sol.trace, ridge=sol.ridge,
        )
        trial.kkt_residual = kkt_residual(p, trial)
        if trial.kkt_residual <= best.kkt_residual:
            best = trial
        if best.kkt_residual <= exact_tol:
            break
    return best


def _solve_equality_qp(Q, q, C, dvec, check_tol: float = 1e-9):
    """Solve ``min 1/2 x'Qx + q'x s.t. C x = d``; ``None`` if inconsistent."""
    d, k = Q.shape[0], C.shape[0]
    K = np.zeros((d + k, d + k))
    K[:d, :d] = Q
    K[:d, d:] = -C.T
    K[d:, :d] = C
    rhs = np.concatenate([-q, dvec])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    scale = 1.0 + float(np.max(np.abs(rhs), initial=0.0))
    if not np.all(np.isfinite(sol)) or np.max(np.abs(K @ sol - rhs), initial=0.0) > check_tol * scale:
        return None
    return sol[:d], sol[d:]


def brute_force_oracle(p: QPProblem, feas_tol: float = 1e-9) -> QPSolution:
    """Exact solution of a tiny QP by enumerating candidate active sets.

    Every subset of at most ``n_vars`` constraints (general rows and
    nonnegativity bounds together) is treated as active; the resulting
    equality-constrained QP is solved through its KKT system and kept if it
    is primal feasible with nonnegative multipliers.  The best such point is
    returned.  Cost grows combinatorially, so keep instances small.
    """
    d = p.n_vars
    Bidx = np.flatnonzero(p.nonneg_mask)
    C = np.vstack([p.A_ineq, np.eye(d)[Bidx]]) if Bidx.size else p.A_ineq.reshape(-1, d)
    dvec = np.concatenate([p.b_ineq, np.zeros(Bidx.size)])
    total = C.shape[0]
    so, sf = p.objective_scale(), p.rhs_scale()
    best, best_obj, tried = None, np.inf, 0
    for k in range(min(d, total) + 1):
        for S in itertools.combinations(range(total), k):
            tried += 1
            S = list(S)
            cand = _solve_equality_qp(p.Q, p.q, C[S], dvec[S])
            if cand is None:
                continue
            x, lam_S = cand
            if lam_S.size and lam_S.min() < -feas_tol * so:
                continue
            if total and np.min(C @ x - dvec) < -feas_tol * sf:
                continue
            obj = p.objective(x)
            if obj < best_obj - 1e-14 * (1 + abs(obj)):
                mult = np.zeros(total)
                mult[S] = np.maximum(lam_S, 0.0)
                best, best_obj = (x, mult), obj
    if best is None:
        raise SolverError("brute-force oracle found no KKT point (infeasible or unbounded)")
    x, mult = best
    sol = QPSolution(
        x=x, dual_ineq=mult[:p.n_ineq], dual_bound=mult[p.n_ineq:], objective=best_obj,
        kkt_residual=0.0, iterations=tried, status=OPTIMAL,
    )
    sol.kkt_residual = kkt_residual(p, sol)
    sol.dual_objective = _dual_objective(p, x, sol.dual_ineq)
    return sol
