"""Benchmark harness: run problems through the three driver configurations
and aggregate iteration counts, timings, and the shifted geometric mean.

Per-run trace CSVs and a one-row-per-(problem, config) summary CSV are
written when an output directory is given.  Aggregate statistics over the
subset of problems solved by every configuration are returned (and printed
by the CLI); unsolved runs enter the shifted geometric mean at the wall
time cap.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import conic

CONFIGS = ("vanilla", "unsafe", "safeguarded")

TRACE_COLUMNS = (
    "iter",
    "r_fixed_point",
    "r_prim",
    "r_dual",
    "accepted",
    "j",
    "epoch",
    "cum_operator_evals",
)

SUMMARY_COLUMNS = (
    "problem",
    "config",
    "status",
    "iterations",
    "solve_seconds",
    "accel_seconds",
    "operator_evals",
    "rejected_candidates",
)


class EmptyInput(Exception):
    """Empty list where at least one value is required."""


def shifted_gmean(times, sh: float = 10.0) -> float:
    """Shifted geometric mean: (prod(t + sh))^(1/n) - sh.

    Computed through logs so long lists of large times cannot overflow.
    """
    arr = np.asarray(list(times), dtype=float)
    if arr.size == 0:
        raise EmptyInput("shifted_gmean needs at least one value")
    if sh <= 0:
        raise ValueError("shift must be positive")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("times must be finite and nonnegative")
    return float(np.exp(np.mean(np.log(arr + sh))) - sh)


@dataclass
class RunResult:
    """Outcome of one (problem, config) solve."""

    problem: str
    config: str
    status: str
    iterations: int
    solve_seconds: float
    accel_seconds: float
    operator_evals: int
    rejected_candidates: int
    objective: float
    record: object = None  # full RunRecord; kept for in-process consumers


@dataclass
class ConfigStats:
    solved: int
    mean_iterations: float
    median_iterations: float
    mean_seconds: float
    median_seconds: float
    shifted_gmean_seconds: float


@dataclass
class BenchSummary:
    rows: list[RunResult] = field(default_factory=list)
    aggregates: dict[str, ConfigStats] = field(default_factory=dict)
    common_subset: list[str] = field(default_factory=list)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _solve_task(task):
    """Worker body: solve one (problem, config) pair.  Top level for pickling."""
    name, problem, config, kwargs = task
    try:
        sol = conic.solve(problem, mode=config, **kwargs)
        rec = sol.record
        return RunResult(
            problem=name,
            config=config,
            status=sol.status,
            iterations=rec.iterations,
            solve_seconds=rec.total_seconds,
            accel_seconds=rec.accel_seconds,
            operator_evals=rec.operator_evaluations,
            rejected_candidates=rec.rejected_candidates,
            objective=sol.objective,
            record=rec,
        )
    except Exception as exc:  # a failing run must not sink the batch
        return RunResult(
            problem=name,
            config=config,
            status=f"error: {type(exc).__name__}",
            iterations=0,
            solve_seconds=0.0,
            accel_seconds=0.0,
            operator_evals=0,
            rejected_candidates=0,
            objective=math.nan,
        )


def _write_trace(path, record) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for e in record.entries:
            writer.writerow(
                [
                    e.k,
                    _fmt(e.r_norm),
                    _fmt(e.r_prim),
                    _fmt(e.r_dual),
                    _fmt(e.accepted),
                    e.j,
                    e.epoch,
                    e.cum_evals,
                ]
            )


def run_benchmark(
    problems,
    configs=CONFIGS,
    *,
    eps: float = 1e-6,
    tau: float = 2.0,
    eta_max: float = 1e4,
    m_max: int = 15,
    variant: str = "type2",
    check_interval: int = 25,
    max_iter: int = 10000,
    time_cap: float = 300.0,
    gamma: float = 1.0,
    adapt: bool = True,
    adapt_interval: int = 40,
    sh: float = 10.0,
    out_dir=None,
    workers: int = 1,
) -> BenchSummary:
    """Execute every (problem, config) pair and aggregate the results.

    ``problems`` is a list of (name, ConicProblem) pairs.  Mean and median
    statistics use only the problems solved by every configuration; the
    shifted geometric mean covers all problems with unsolved ones entered
    at ``time_cap`` seconds.
    """
    problems = list(problems)
    configs = list(configs)
    if not problems or not configs:
        raise EmptyInput("need at least one problem and one configuration")
    for config in configs:
        if config not in CONFIGS:
            raise ValueError(f"unknown configuration {config!r}")

    kwargs = dict(
        eps=eps,
        tau=tau,
        eta_max=eta_max,
        m_max=m_max,
        variant=variant,
        check_interval=check_interval,
        max_iter=max_iter,
        time_cap=time_cap,
        gamma=gamma,
        adapt=adapt,
        adapt_interval=adapt_interval,
    )
    tasks = [
        (name, problem, config, kwargs)
        for name, problem in problems
        for config in configs
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_task, tasks))
    else:
        results = [_solve_task(t) for t in tasks]

    by_key = {(r.problem, r.config): r for r in results}
    rows = [by_key[(name, config)] for name, _ in problems for config in configs]

    solved = {
        config: {r.problem for r in rows if r.config == config and r.status == "converged"}
        for config in configs
    }
    common = [name for name, _ in problems if all(name in solved[c] for c in configs)]

    aggregates = {}
    for config in configs:
        sub = [r for r in rows if r.config == config and r.problem in common]
        iters = [r.iterations for r in sub]
        secs = [r.solve_seconds for r in sub]
        all_times = [
            r.solve_seconds if r.status == "converged" else time_cap
            for r in rows
            if r.config == config
        ]
        aggregates[config] = ConfigStats(
            solved=len(solved[config]),
            mean_iterations=float(np.mean(iters)) if iters else math.nan,
            median_iterations=float(np.median(iters)) if iters else math.nan,
            mean_seconds=float(np.mean(secs)) if secs else math.nan,
            median_seconds=float(np.median(secs)) if secs else math.nan,
            shifted_gmean_seconds=shifted_gmean(all_times, sh),
        )

    if out_dir is not None:
        trace_dir = os.path.join(out_dir, "traces")
        os.makedirs(trace_dir, exist_ok=True)
        for r in rows:
            if r.record is not None:
                _write_trace(os.path.join(trace_dir, f"{r.problem}__{r.config}.csv"), r.record)
        with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SUMMARY_COLUMNS)
            for r in rows:
                writer.writerow(
                    [
                        r.problem,
                        r.config,
                        r.status,
                        r.iterations,
                        _fmt(r.solve_seconds),
                        _fmt(r.accel_seconds),
                        r.operator_evals,
                        r.rejected_candidates,
                    ]
                )

    return BenchSummary(rows=rows, aggregates=aggregates, common_subset=common)


def format_aggregates(summary: BenchSummary) -> str:
    """Human-readable aggregate table (17 significant digits)."""
    lines = [f"common subset: {len(summary.common_subset)} problems"]
    for config, stats in summary.aggregates.items():
        lines.append(
            f"{config}: solved={stats.solved}"
            f" mean_iters={_fmt(stats.mean_iterations)}"
            f" median_iters={_fmt(stats.median_iterations)}"
            f" mean_seconds={_fmt(stats.mean_seconds)}"
            f" median_seconds={_fmt(stats.median_seconds)}"
            f" shifted_gmean_seconds={_fmt(stats.shifted_gmean_seconds)}"
        )
    return "\n".join(lines)
