"""Benchmark harness: timed solves and convergence fractions per scenario/mode.

For each (problem, mode) pair the harness runs at least one untimed warm-up
solve, then ``reps`` timed solves from the canonical initial condition, then
``samples`` solves from jittered initial conditions (uniform position
jitter, half-width fixed in the scenario config) to estimate the converged
fraction. The timed region covers exactly the solve call; repetitions run
sequentially to avoid timer interference. Times are reported in
milliseconds, mean and population standard deviation over the repetitions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import GameDefinitionError
from .scenarios import load_scenario
from .solver import solve

BENCH_PROBLEMS = {
    "lq2p2d": "lq2p2d",
    "nonlinear3p12d": "hallway3",
}

VARIANTS = {"md": "MD", "ad": "AD"}

CSV_HEADER = "problem,variant,repetitions,mean_ms,std_ms,samples,converged_fraction"


@dataclass
class BenchmarkRecord:
    """One benchmark row: a problem solved repeatedly in one derivative mode."""

    problem: str
    variant: str
    repetitions: int
    mean_ms: float
    std_ms: float
    samples: int
    converged_fraction: float
    # Mean of the solver's own wall-time hook; lets tests bound harness overhead.
    library_mean_ms: float = 0.0

    def __post_init__(self):
        if self.repetitions < 1:
            raise GameDefinitionError("repetitions must be >= 1")
        if not 0.0 <= self.converged_fraction <= 1.0:
            raise GameDefinitionError("converged fraction must be in [0, 1]")

    def csv_row(self) -> str:
        return ",".join([
            self.problem,
            self.variant,
            str(self.repetitions),
            repr(self.mean_ms),
            repr(self.std_ms),
            str(self.samples),
            repr(self.converged_fraction),
        ])


def run_benchmark(problems=None, modes=("md", "ad"), reps=5, samples=10,
                  seed=0, warmup=1):
    """Run the harness; returns one :class:`BenchmarkRecord` per (problem, mode).

    Args:
        problems: iterable of problem names out of ``BENCH_PROBLEMS``
            (default: all, in declaration order).
        modes: derivative modes, subset of ``("md", "ad")``.
        reps: timed repetitions from the canonical initial condition.
        samples: jittered initial conditions for the converged fraction.
        seed: RNG seed of the jitter sampling.
        warmup: untimed warm-up solves before timing (min 1).
    """
    problems = list(BENCH_PROBLEMS) if problems is None else list(problems)
    for name in problems:
        if name not in BENCH_PROBLEMS:
            raise GameDefinitionError(
                f"unknown benchmark problem '{name}', expected subset of "
                f"{list(BENCH_PROBLEMS)}"
            )
    modes = [str(m).lower() for m in modes]
    for mode in modes:
        if mode not in VARIANTS:
            raise GameDefinitionError(
                f"unknown benchmark mode '{mode}', expected subset of "
                f"{list(VARIANTS)}"
            )
    if reps < 1 or samples < 0:
        raise GameDefinitionError("reps must be >= 1 and samples >= 0")

    records = []
    for name in problems:
        scenario = load_scenario(BENCH_PROBLEMS[name])
        for mode in modes:
            config = replace(scenario.solver, mode=mode)
            x0 = scenario.initial_state

            for _ in range(max(1, warmup)):
                solve(scenario.problem, x0=x0, config=config)

            times = np.empty(reps)
            library_times = np.empty(reps)
            for k in range(reps):
                start = time.perf_counter()
                result = solve(scenario.problem, x0=x0, config=config)
                times[k] = (time.perf_counter() - start) * 1e3
                library_times[k] = result.wall_time_ms

            rng = np.random.default_rng(seed)
            converged = 0
            for _ in range(samples):
                xj = scenario.jittered_initial_state(rng)
                converged += bool(solve(scenario.problem, x0=xj, config=config).converged)
            fraction = converged / samples if samples else float(result.converged)

            records.append(BenchmarkRecord(
                problem=name,
                variant=VARIANTS[mode],
                repetitions=reps,
                mean_ms=float(np.mean(times)),
                std_ms=float(np.std(times)),
                samples=samples,
                converged_fraction=fraction,
                library_mean_ms=float(np.mean(library_times)),
            ))
    return records


def records_to_csv(records) -> str:
    return "\n".join([CSV_HEADER] + [r.csv_row() for r in records]) + "\n"


def write_csv(records, path):
    Path(path).write_text(records_to_csv(records))
