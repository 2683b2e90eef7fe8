"""Douglas-Rachford splitting operator for conic quadratic programs.

Problems have the form

    minimize    0.5 x' P x + q' x
    subject to  A x + s = b,   s in K,

with P positive semidefinite and K a product of cone blocks.  The iterate
v stacks (x-part, s-part) in R^{n+m}.  One operator application is

    z = prox(v)             -- one quasi-definite KKT solve,
    w = project(2 z - v)    -- identity on the x-part, cone blocks on s,
    v+ = v + (w - z),

a firmly nonexpansive map whose fixed points encode primal-dual optima.
The prox step solves

    [[P + (1/gamma) I, A'], [A, -gamma I]] (x, lam) = ((1/gamma) v_x - q, b - v_s)

and returns z = (x, v_s - gamma lam).  The step size gamma is the single
operator parameter; adapting it refactors the KKT matrix and bumps the
operator epoch.
"""

from __future__ import annotations

import math

import numpy as np

from . import driver as _driver
from .cones import ConeBlock, cone_support, in_recession_of_negation, project_cone
from .linalg import LdlFactor, ldl_factor, ldl_solve
from .operators import FixedPointOperator

PRIMAL_INFEASIBLE = "primal_infeasible"
DUAL_INFEASIBLE = "dual_infeasible"

GAMMA_MIN = 1e-6
GAMMA_MAX = 1e6

# Static regularization added to the KKT diagonal before factoring; the
# solve is then refined against the unregularized matrix.
_KKT_REG = 1e-7


class Certificate:
    """Infeasibility witness, normalized to unit infinity-norm."""

    def __init__(self, kind: str, witness: np.ndarray):
        if kind not in (PRIMAL_INFEASIBLE, DUAL_INFEASIBLE):
            raise ValueError(f"unknown certificate kind {kind!r}")
        self.kind = kind
        self.witness = witness

    def __repr__(self) -> str:
        return f"Certificate({self.kind!r})"


class ConicProblem:
    """Dense problem data P, q, A, b plus an ordered list of cone blocks."""

    def __init__(self, P, q, A, b, cones):
        q = np.asarray(q, dtype=float)
        n = q.size
        P = np.zeros((n, n)) if P is None else np.asarray(P, dtype=float)
        if P.shape != (n, n):
            raise ValueError("P must be n-by-n")
        if np.abs(P - P.T).max(initial=0.0) > 1e-12 * (1.0 + np.abs(P).max(initial=0.0)):
            raise ValueError("P must be symmetric")
        b = np.asarray(b, dtype=float)
        m = b.size
        A = np.zeros((m, n)) if A is None else np.asarray(A, dtype=float)
        if A.shape != (m, n):
            raise ValueError("A must be m-by-n")
        cones = list(cones)
        if sum(block.dim for block in cones) != m:
            raise ValueError("cone dimensions must sum to m")
        for arr in (P, q, A, b):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValueError("problem data must be finite")
        self.n = n
        self.m = m
        self.P = 0.5 * (P + P.T)
        self.q = q
        self.A = A
        self.b = b
        self.cones = cones

    def cone_slices(self) -> list[slice]:
        out, start = [], 0
        for block in self.cones:
            out.append(slice(start, start + block.dim))
            start += block.dim
        return out

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.P @ x + self.q @ x)


class DrsOperator(FixedPointOperator):
    """The parametric Douglas-Rachford operator for one ConicProblem."""

    def __init__(self, problem: ConicProblem, gamma: float = 1.0):
        super().__init__(problem.n + problem.m)
        self.problem = problem
        self._slices = problem.cone_slices()
        self.gamma = float(np.clip(gamma, GAMMA_MIN, GAMMA_MAX))
        self._kkt_exact: np.ndarray | None = None
        self._factor: LdlFactor | None = None
        self._refactor()
        self._cache_v: np.ndarray | None = None
        self._cache_z: np.ndarray | None = None
        self._cache_w: np.ndarray | None = None

    # -- parameter handling --------------------------------------------

    @property
    def params(self) -> np.ndarray:
        return np.array([self.gamma])

    def set_params(self, rho) -> None:
        rho = np.asarray(rho, dtype=float)
        if rho.shape != (1,):
            raise ValueError("expected a single step-size parameter")
        gamma = float(np.clip(rho[0], GAMMA_MIN, GAMMA_MAX))
        if gamma == self.gamma:
            return
        self.gamma = gamma
        self._refactor()
        self._cache_v = None
        self.epoch += 1

    def _refactor(self) -> None:
        prob, gamma = self.problem, self.gamma
        n, m = prob.n, prob.m
        kkt = np.zeros((n + m, n + m))
        kkt[:n, :n] = prob.P + (1.0 / gamma) * np.eye(n)
        kkt[:n, n:] = prob.A.T
        kkt[n:, :n] = prob.A
        kkt[n:, n:] = -gamma * np.eye(m)
        self._kkt_exact = kkt
        reg = np.concatenate([np.full(n, _KKT_REG), np.full(m, -_KKT_REG)])
        self._factor = ldl_factor(kkt + np.diag(reg), n)

    # -- linear algebra ---------------------------------------------------

    def solve_kkt(self, rhs: np.ndarray, refine_steps: int = 2) -> np.ndarray:
        """Solve the (unregularized) KKT system via the regularized factors.

        Iterative refinement against the exact matrix removes the bias the
        static regularization would otherwise leave in the solution.
        """
        sol = ldl_solve(self._factor, rhs)
        scale = float(np.abs(rhs).max(initial=0.0)) or 1.0
        for _ in range(refine_steps):
            resid = rhs - self._kkt_exact @ sol
            if np.abs(resid).max(initial=0.0) <= 1e-12 * scale:
                break
            sol = sol + ldl_solve(self._factor, resid)
        return sol

    def prox_quadratic(self, v: np.ndarray) -> np.ndarray:
        """prox of the quadratic-plus-equality part, one KKT solve.

        The returned z = (x, v_s - gamma lam) satisfies A z_x + z_s = b up
        to the refined KKT residual.
        """
        prob, gamma = self.problem, self.gamma
        n = prob.n
        rhs = np.concatenate([v[:n] / gamma - prob.q, prob.b - v[n:]])
        sol = self.solve_kkt(rhs)
        z = np.empty_like(v)
        z[:n] = sol[:n]
        z[n:] = v[n:] - gamma * sol[n:]
        return z

    def project_slack(self, u: np.ndarray) -> np.ndarray:
        """Project the s-part of u onto K blockwise; x-part passes through."""
        n = self.problem.n
        w = u.copy()
        for block, sl in zip(self.problem.cones, self._slices):
            w[n + sl.start : n + sl.stop] = project_cone(block, u[n + sl.start : n + sl.stop])
        return w

    # -- the operator -------------------------------------------------------

    def _apply(self, v: np.ndarray) -> np.ndarray:
        z = self.prox_quadratic(v)
        w = self.project_slack(2.0 * z - v)
        self._cache_v = v.copy()
        self._cache_z = z
        self._cache_w = w
        return v + (w - z)

    def _ensure_cache(self, v: np.ndarray) -> None:
        if self._cache_v is None or not np.array_equal(self._cache_v, v):
            z = self.prox_quadratic(v)
            self._cache_v = v.copy()
            self._cache_z = z
            self._cache_w = self.project_slack(2.0 * z - v)

    def extract(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Primal-dual point (x, s, y) read off the splitting at v."""
        self._ensure_cache(v)
        n = self.problem.n
        x = self._cache_z[:n].copy()
        s = self._cache_w[n:].copy()
        y = (v[n:] - self._cache_z[n:]) / self.gamma
        return x, s, y

    def residuals(self, v: np.ndarray):
        """(r_prim, r_dual, x, s, y) at the iterate v, using cached prox output."""
        x, s, y = self.extract(v)
        r_prim, r_dual = residual_norms(self.problem, x, s, y)
        return r_prim, r_dual, x, s, y

    # -- parameter adaptation -------------------------------------------------

    def adapt_gamma(self, r_prim: float, r_dual: float, tol: float = 1e-6) -> bool:
        """Rebalance gamma from the scaled primal/dual residual ratio.

        The proposed factor sqrt(r_prim_scaled / r_dual_scaled) is clipped
        to [0.1, 10] and only applied when it leaves the deadband [0.2, 5];
        an already-converged state (both residuals <= tol) is left alone.
        Returns True when gamma changed (epoch bumped, KKT refactored).
        """
        if not (np.isfinite(r_prim) and np.isfinite(r_dual)):
            return False
        if r_prim <= tol and r_dual <= tol:
            return False
        prob = self.problem
        if self._cache_v is None or prob.m == 0:
            return False
        x, s, y = self.extract(self._cache_v)
        prim_scale = max(
            _inf_norm(prob.A @ x), _inf_norm(s), _inf_norm(prob.b), 1.0
        )
        dual_scale = max(
            _inf_norm(prob.P @ x), _inf_norm(prob.q), _inf_norm(prob.A.T @ y), 1.0
        )
        ratio = (r_prim / prim_scale) / max(r_dual / dual_scale, 1e-300)
        factor = float(np.clip(math.sqrt(ratio), 0.1, 10.0))
        if 0.2 <= factor <= 5.0:
            return False
        old_epoch = self.epoch
        self.set_params([self.gamma / factor])
        return self.epoch != old_epoch

    # -- infeasibility detection ------------------------------------------------

    def infeasibility_check(self, dv: np.ndarray, eps_inf: float = 1e-6) -> Certificate | None:
        """Inspect a pure-step difference dv = v_{k+1} - v_k for certificates.

        The x-part change through the prox map witnesses unboundedness
        (dual infeasibility); the scaled s-part change witnesses primal
        infeasibility.  Witnesses are normalized to unit infinity-norm
        before the separating-hyperplane conditions are tested.
        """
        prob, gamma = self.problem, self.gamma
        n = prob.n
        dv = np.asarray(dv, dtype=float)

        drhs = np.concatenate([dv[:n] / gamma, -dv[n:]])
        dx = self.solve_kkt(drhs)[:n]
        dx_norm = _inf_norm(dx)
        if dx_norm > 1e-10:
            d = dx / dx_norm
            if (
                _inf_norm(prob.P @ d) <= eps_inf
                and prob.q @ d < -eps_inf
                and self._direction_in_neg_recession(prob.A @ d, eps_inf)
            ):
                return Certificate(DUAL_INFEASIBLE, d)

        if prob.m > 0:
            dy = dv[n:] / gamma
            dy_norm = _inf_norm(dy)
            if dy_norm > 1e-10:
                w = dy / dy_norm
                if _inf_norm(prob.A.T @ w) <= eps_inf:
                    support = 0.0
                    for block, sl in zip(prob.cones, self._slices):
                        support += cone_support(block, -w[sl], eps_inf)
                        if not np.isfinite(support):
                            break
                    if np.isfinite(support) and prob.b @ w + support < -eps_inf:
                        return Certificate(PRIMAL_INFEASIBLE, w)
        return None

    def _direction_in_neg_recession(self, d: np.ndarray, tol: float) -> bool:
        return all(
            in_recession_of_negation(block, d[sl], tol)
            for block, sl in zip(self.problem.cones, self._slices)
        )


def _inf_norm(arr: np.ndarray) -> float:
    return float(np.abs(arr).max(initial=0.0))


def residual_norms(problem: ConicProblem, x, s, y) -> tuple[float, float]:
    """Infinity norms of the primal and dual KKT residuals at (x, s, y)."""
    r_prim = _inf_norm(problem.A @ x + s - problem.b) if problem.m else 0.0
    r_dual = _inf_norm(problem.P @ x + problem.q + problem.A.T @ y)
    return r_prim, r_dual


class ConicSolution:
    """Solve outcome: status, primal-dual point, and the full run record."""

    def __init__(self, status, x, s, y, objective, r_prim, r_dual, record, certificate):
        self.status = status
        self.x = x
        self.s = s
        self.y = y
        self.objective = objective
        self.r_prim = r_prim
        self.r_dual = r_dual
        self.record = record
        self.certificate = certificate


MODES = ("vanilla", "unsafe", "safeguarded")


def solve(
    problem: ConicProblem,
    mode: str = "safeguarded",
    *,
    eps: float = 1e-6,
    gamma: float = 1.0,
    adapt: bool = True,
    tau: float = 2.0,
    eta_max: float = 1e4,
    m_max: int = 15,
    variant: str = "type2",
    check_interval: int = 25,
    max_iter: int = 10000,
    adapt_interval: int = 40,
    eps_infeas: float = 1e-6,
    time_cap: float | None = None,
    v0: np.ndarray | None = None,
) -> ConicSolution:
    """Solve a conic QP with one of the three driver configurations.

    ``mode`` selects vanilla (plain splitting iterations), unsafe
    (acceleration without the residual safeguard), or safeguarded
    acceleration.  Termination tests the absolute infinity-norm primal and
    dual residuals against ``eps`` every ``check_interval`` iterations.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    op = DrsOperator(problem, gamma=gamma)
    cfg = _driver.DriverConfig(
        eps=eps,
        tau=tau,
        eta_max=eta_max,
        m_max=m_max,
        variant=variant,
        safeguard_mode=(
            _driver.SAFEGUARD_OFF if mode == "unsafe" else _driver.SAFEGUARD_RELAXED
        ),
        check_interval=check_interval,
        max_iter=max_iter,
        adapt_interval=adapt_interval,
    )

    def converged(state, operator):
        r_prim, r_dual, *_ = operator.residuals(state.v)
        return r_prim <= eps and r_dual <= eps

    hooks = _driver.Hooks(
        converged=converged,
        operator_update=(
            (lambda operator, state: operator.adapt_gamma(
                *operator.residuals(state.v)[:2], tol=eps
            ))
            if adapt
            else None
        ),
        infeasibility=lambda operator, dv: operator.infeasibility_check(dv, eps_infeas),
        metrics=lambda operator, state: operator.residuals(state.v)[:2],
    )

    if v0 is None:
        v0 = np.zeros(op.dim)
    if mode == "vanilla":
        record = _driver.run_vanilla(op, v0, cfg, hooks, time_cap)
    elif mode == "unsafe":
        record = _driver.run_unsafe(op, v0, cfg, hooks, time_cap)
    else:
        record = _driver.run(op, v0, cfg, hooks, time_cap)

    r_prim, r_dual, x, s, y = op.residuals(record.final_state.v)
    return ConicSolution(
        status=record.status,
        x=x,
        s=s,
        y=y,
        objective=problem.objective(x),
        r_prim=r_prim,
        r_dual=r_dual,
        record=record,
        certificate=record.certificate,
    )
