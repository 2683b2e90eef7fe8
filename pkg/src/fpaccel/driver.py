"""Safeguarded acceleration loop.

One ``Driver`` instance runs one solve.  Each iteration, in order:

1. restart the memory if the operator epoch moved under us;
2. push the (delta v, delta r) pair formed against the previous iterate,
   when one exists inside the current memory lifetime;
3. with more than two history slots (j > 2): solve for the extrapolation
   coefficients, guard their norm, build the candidate, evaluate the
   operator there, and run the configured safeguard; on success adopt the
   candidate together with its already-computed operator value;
4. otherwise fall back to a plain operator step -- applying any pending
   operator-parameter update first (which restarts the memory);
5. run the scheduled infeasibility hook when the step was a pure operator
   step in a fresh history (j == 2);
6. restart the memory once it exceeds its capacity.

Every restart clears the previous-iterate anchor as well, so each restart
is followed by two plain iterations before extrapolation resumes; the
infeasibility hook therefore always sees a difference of consecutive pure
operator steps.

Parameter updates and infeasibility checks are latched on fixed iteration
cadences (``adapt_interval`` and ``check_interval``) and consumed at the
next legal point in the loop.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .accel import AccelMemory, SingularSystem, eta_guard
from .linalg import ColumnRankDeficient, SingularTriangular
from .operators import FixedPointOperator, NonFiniteOutput

CONVERGED = "converged"
MAX_ITER = "max_iter"
DIVERGED = "diverged"
TIME_LIMIT = "time_limit"

SAFEGUARD_RELAXED = "relaxed"
SAFEGUARD_STRICT = "strict"
SAFEGUARD_OFF = "off"


def safeguard_relaxed(r_acc_norm: float, r_prev_norm: float, tau: float) -> bool:
    """Accept when the candidate residual is within tau times the previous one."""
    return r_acc_norm <= tau * r_prev_norm


def safeguard_strict(r_acc_norm: float, r_curr_norm: float, tau: float) -> bool:
    """Accept when the candidate residual contracts the current one by tau < 1."""
    return r_acc_norm <= tau * r_curr_norm


@dataclass
class FixedPointState:
    """Current iterate with its operator value and residual."""

    v: np.ndarray
    f: np.ndarray
    r: np.ndarray
    k: int = 0
    r_prev_norm: float = math.inf
    acc_success: bool = False


@dataclass
class DriverConfig:
    eps: float = 1e-6
    tau: float = 2.0
    eta_max: float = 1e4
    m_max: int = 15
    variant: str = "type2"
    safeguard_mode: str = SAFEGUARD_RELAXED
    check_interval: int = 25
    max_iter: int = 10000
    adapt_interval: int = 40

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if not 0.0 < self.tau <= 2.0:
            raise ValueError("tau must lie in (0, 2]")
        if self.safeguard_mode == SAFEGUARD_STRICT and not self.tau < 1.0:
            raise ValueError("strict safeguarding needs tau in (0, 1)")
        if self.eta_max <= 0:
            raise ValueError("eta_max must be positive")
        if self.m_max < 2:
            raise ValueError("m_max must be at least 2")
        if self.check_interval < 1 or self.adapt_interval < 1:
            raise ValueError("intervals must be at least 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.variant not in ("type1", "type2"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.safeguard_mode not in (SAFEGUARD_RELAXED, SAFEGUARD_STRICT, SAFEGUARD_OFF):
            raise ValueError(f"unknown safeguard mode {self.safeguard_mode!r}")


@dataclass
class Hooks:
    """Optional solve-specific behavior plugged into the loop.

    converged(state, op) -> bool replaces the default step-norm test.
    operator_update(op, state) runs the scheduled parameter update.
    infeasibility(op, dv) -> certificate-or-None inspects a pure-step
    difference; a returned object must expose ``kind`` (used as status).
    metrics(op, state) -> (r_prim, r_dual) fills the trace columns.
    """

    converged: object = None
    operator_update: object = None
    infeasibility: object = None
    metrics: object = None


@dataclass
class TraceEntry:
    k: int
    r_norm: float
    accepted: bool
    j: int
    epoch: int
    elapsed: float
    accel_seconds: float
    cum_evals: int
    step_norm: float
    r_prim: float = math.nan
    r_dual: float = math.nan
    infeas_checked: bool = False


@dataclass
class RunRecord:
    """Per-iteration trace plus summary counters for one solve."""

    entries: list = field(default_factory=list)
    iterations: int = 0
    status: str = MAX_ITER
    operator_evaluations: int = 0
    rejected_candidates: int = 0
    strict_checks: int = 0
    convergence_checks: int = 0
    total_seconds: float = 0.0
    accel_seconds: float = 0.0
    certificate: object = None
    final_state: FixedPointState | None = None

    @property
    def accel_fraction(self) -> float:
        return self.accel_seconds / self.total_seconds if self.total_seconds > 0 else 0.0


class Driver:
    """One safeguarded-acceleration solve over a fixed-point operator."""

    def __init__(
        self,
        op: FixedPointOperator,
        v0: np.ndarray,
        cfg: DriverConfig | None = None,
        hooks: Hooks | None = None,
        accelerate: bool = True,
        time_cap: float | None = None,
    ):
        self.op = op
        self.cfg = cfg if cfg is not None else DriverConfig()
        self.hooks = hooks if hooks is not None else Hooks()
        self.accelerate = accelerate
        self.time_cap = time_cap

        v0 = np.asarray(v0, dtype=float)
        if v0.shape != (op.dim,):
            raise ValueError(f"v0 has shape {v0.shape}, expected ({op.dim},)")
        self._start = time.perf_counter()
        f0 = op.apply(v0)
        self.state = FixedPointState(v=v0.copy(), f=f0, r=v0 - f0)
        self.mem = (
            AccelMemory(op.dim, self.cfg.m_max, self.cfg.variant, epoch=op.epoch)
            if accelerate
            else None
        )
        self._anchor_v: np.ndarray | None = None
        self._anchor_r: np.ndarray | None = None
        self._pending_update = False
        self._pending_infeas = False
        # Loop evaluations only: the setup evaluation above is excluded so
        # that evaluations == iterations + rejections (+ strict checks).
        self._evals0 = op.eval_count
        self._rejected = 0
        self._strict_checks = 0
        self._checks = 0
        self._accel_seconds = 0.0
        self._last_step_norm = float(np.linalg.norm(self.state.r))
        self.entries: list[TraceEntry] = []
        self.certificate = None

    # -- internals ---------------------------------------------------------

    def _restart_memory(self) -> None:
        self.mem.restart(self.op.epoch)
        self._anchor_v = None
        self._anchor_r = None

    def _converged(self) -> bool:
        self._checks += 1
        if self.hooks.converged is not None:
            return bool(self.hooks.converged(self.state, self.op))
        return self._last_step_norm <= self.cfg.eps

    # -- one iteration -----------------------------------------------------

    def step(self) -> TraceEntry:
        cfg, op, st = self.cfg, self.op, self.state
        accel_t = 0.0
        accepted = False
        restarted = False
        op_changed = False
        r_curr_norm = float(np.linalg.norm(st.r))
        new = None

        if self.accelerate:
            if self.mem.epoch != op.epoch:
                self._restart_memory()
                restarted = True
            if self._anchor_v is not None:
                t0 = time.perf_counter()
                try:
                    self.mem.push_pair(st.v - self._anchor_v, st.r - self._anchor_r)
                    accel_t += time.perf_counter() - t0
                except ColumnRankDeficient:
                    accel_t += time.perf_counter() - t0
                    self._restart_memory()
                    restarted = True
        j_decision = self.mem.j if self.accelerate else 1

        if self.accelerate and self.mem.j > 2:
            t0 = time.perf_counter()
            coeffs = None
            try:
                coeffs = self.mem.compute_eta(st.r)
            except (SingularTriangular, SingularSystem):
                pass
            v_acc = None
            if coeffs is not None and eta_guard(coeffs, cfg.eta_max):
                v_acc = self.mem.candidate(st.f, coeffs)
            accel_t += time.perf_counter() - t0

            if v_acc is not None:
                f_acc = op.apply(v_acc)
                r_acc = v_acc - f_acc
                r_acc_norm = float(np.linalg.norm(r_acc))
                if cfg.safeguard_mode == SAFEGUARD_OFF:
                    ok = True
                elif cfg.safeguard_mode == SAFEGUARD_STRICT:
                    # The strict test prices in a fresh evaluation at the
                    # current point, which is what makes it expensive.
                    f_now = op.apply(st.v)
                    self._strict_checks += 1
                    ok = safeguard_strict(
                        r_acc_norm, float(np.linalg.norm(st.v - f_now)), cfg.tau
                    )
                else:
                    ok = safeguard_relaxed(r_acc_norm, st.r_prev_norm, cfg.tau)
                if ok:
                    accepted = True
                    new = (v_acc, f_acc, r_acc)
                else:
                    self._rejected += 1

        if new is None:
            # Fallback branch: either no candidate was accepted or the
            # history is too short.  Scheduled operator changes land here.
            if self._pending_update and self.hooks.operator_update is not None:
                self._pending_update = False
                self.hooks.operator_update(op, st)
                op_changed = True
                if self.accelerate:
                    self._restart_memory()
                    restarted = True
            v_next = st.f.copy()
            f_next = op.apply(v_next)
            new = (v_next, f_next, v_next - f_next)

        old_v, old_r = st.v, st.r
        st.v, st.f, st.r = new
        st.k += 1
        st.r_prev_norm = r_curr_norm
        st.acc_success = accepted
        self._last_step_norm = float(np.linalg.norm(st.v - old_v))

        if self.accelerate:
            if restarted:
                self._anchor_v = None
                self._anchor_r = None
            else:
                self._anchor_v = old_v
                self._anchor_r = old_r

        infeas_checked = False
        if self._pending_infeas and self.hooks.infeasibility is not None:
            at_checkpoint = (self.mem.j == 2) if self.accelerate else not op_changed
            if at_checkpoint:
                self._pending_infeas = False
                infeas_checked = True
                cert = self.hooks.infeasibility(op, st.v - old_v)
                if cert is not None:
                    self.certificate = cert

        # Latch the scheduled work for upcoming iterations.
        if self.hooks.operator_update is not None and st.k % cfg.adapt_interval == 0:
            self._pending_update = True
        if self.hooks.infeasibility is not None and st.k % cfg.check_interval == 0:
            self._pending_infeas = True

        if self.accelerate and self.mem.j > cfg.m_max:
            self._restart_memory()

        r_prim = r_dual = math.nan
        if self.hooks.metrics is not None:
            r_prim, r_dual = self.hooks.metrics(op, st)
        entry = TraceEntry(
            k=st.k,
            r_norm=float(np.linalg.norm(st.r)),
            accepted=accepted,
            j=j_decision,
            epoch=op.epoch,
            elapsed=time.perf_counter() - self._start,
            accel_seconds=accel_t,
            cum_evals=op.eval_count - self._evals0,
            step_norm=self._last_step_norm,
            r_prim=r_prim,
            r_dual=r_dual,
            infeas_checked=infeas_checked,
        )
        self._accel_seconds += accel_t
        self.entries.append(entry)
        return entry

    # -- full solve --------------------------------------------------------

    def run(self) -> RunRecord:
        cfg = self.cfg
        status = None
        if self._converged():
            status = CONVERGED
        while status is None:
            if self.state.k >= cfg.max_iter:
                status = MAX_ITER
                break
            try:
                self.step()
            except NonFiniteOutput:
                status = DIVERGED
                break
            if self.certificate is not None:
                status = self.certificate.kind
                break
            if self.state.k % cfg.check_interval == 0 and self._converged():
                status = CONVERGED
                break
            if self.time_cap is not None and time.perf_counter() - self._start > self.time_cap:
                status = TIME_LIMIT
                break
        return RunRecord(
            entries=self.entries,
            iterations=self.state.k,
            status=status,
            operator_evaluations=self.op.eval_count - self._evals0,
            rejected_candidates=self._rejected,
            strict_checks=self._strict_checks,
            convergence_checks=self._checks,
            total_seconds=time.perf_counter() - self._start,
            accel_seconds=self._accel_seconds,
            certificate=self.certificate,
            final_state=self.state,
        )


def run(op, v0, cfg=None, hooks=None, time_cap=None) -> RunRecord:
    """Safeguarded accelerated solve (the full loop described above)."""
    return Driver(op, v0, cfg, hooks, accelerate=True, time_cap=time_cap).run()


def run_vanilla(op, v0, cfg=None, hooks=None, time_cap=None) -> RunRecord:
    """Plain operator iteration with the same termination machinery.

    No history is kept, so scheduled infeasibility checks fire on the next
    iteration where no parameter update happened (every step is pure).
    """
    return Driver(op, v0, cfg, hooks, accelerate=False, time_cap=time_cap).run()


def run_unsafe(op, v0, cfg=None, hooks=None, time_cap=None) -> RunRecord:
    """Acceleration with the coefficient-norm guard but no residual safeguard."""
    cfg = cfg if cfg is not None else DriverConfig()
    cfg = replace(cfg, safeguard_mode=SAFEGUARD_OFF)
    return Driver(op, v0, cfg, hooks, accelerate=True, time_cap=time_cap).run()
