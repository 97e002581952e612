"""Monte Carlo comparison of the solver variants.

Instances follow a fixed sampling scheme: ``sigma`` has linearly spaced
values, each repeated twice, with condition number ``1 + 10**p`` and squared
norm ``10**q``; ``u`` is uniform with squared norm ``10**r1``.  Every
(n, trial) pair draws one instance and one random start from a seed derived
from ``(base_seed, n, trial)``; all method variants run on that same pair.
"""

from __future__ import annotations

import csv
import itertools
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from ._rng import derive_seed, make_rng
from .canonical import CanonicalInstance
from .solver import Init, Method, SolverOptions, StepRule, Termination, random_init, solve

DEFAULT_B = 100.0

ALL_VARIANTS = tuple(itertools.product(Method, StepRule, (Init.WARM, Init.RANDOM)))

CSV_COLUMNS = (
    "n", "trial", "method", "step_rule", "init", "seed", "iterations", "wall_time",
    "final_objective", "final_grad_sq_norm", "termination", "u_norm_sq", "sigma_cond",
    "sigma_frob_sq",
)


def even_grid(lo: float, hi: float, count: int) -> list:
    """``count`` log-uniform values in ``[lo, hi]`` rounded to even integers >= 4."""
    vals = np.logspace(math.log10(lo), math.log10(hi), count)
    return [max(4, 2 * int(round(v / 2.0))) for v in vals]


def default_n_grid() -> list:
    return even_grid(10, 2000, 20)


@dataclass(frozen=True)
class BenchConfig:
    n_grid: tuple = field(default_factory=lambda: tuple(default_n_grid()))
    trials_per_n: int = 50
    b: float = DEFAULT_B
    variants: tuple = ALL_VARIANTS
    base_seed: int = 0
    time_limit: Optional[float] = None
    tol: float = 1e-6
    max_iter: int = 50_000

    def __post_init__(self):
        for n in self.n_grid:
            if n < 4 or n % 2:
                raise ValueError(f"grid sizes must be even and >= 4, got {n}")
        if self.trials_per_n < 1:
            raise ValueError("trials_per_n must be at least 1")
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "variants", tuple(self.variants))


def figure2_config(base_seed: int = 0, n_values: int = 12, trials: int = 50) -> BenchConfig:
    """S-M Newton, unit step, warm start only: the sensitivity study."""
    return BenchConfig(
        n_grid=tuple(even_grid(10, 2000, n_values)),
        trials_per_n=trials,
        variants=((Method.NEWTON_SM, StepRule.UNIT, Init.WARM),),
        base_seed=base_seed,
    )


@dataclass
class TrialRecord:
    n: int
    trial: int
    method: str
    step_rule: str
    init: str
    seed: int
    iterations: int
    wall_time: float
    final_objective: float
    final_grad_sq_norm: float
    termination: str
    u_norm_sq: float
    sigma_cond: float
    sigma_frob_sq: float


def sample_instance(n: int, b: float = DEFAULT_B, seed: int = 0, *, p=None, q=None, r1=None) -> CanonicalInstance:
    """Draw one instance; ``p``, ``q``, ``r1`` override the random exponents."""
    if n < 4 or n % 2:
        raise ValueError(f"n must be even and >= 4, got {n}")
    rng = make_rng(seed)
    p_draw = rng.uniform(0.0, 3.0)
    q_draw = rng.uniform(1.0, 3.0)
    r_draw = rng.uniform(1.0, 3.0)
    s1 = rng.uniform(0.0, 1.0, size=n)
    p = p_draw if p is None else p
    q = q_draw if q is None else q
    r1 = r_draw if r1 is None else r1
    half = n // 2
    t = 1.0 + np.arange(half) / (half - 1) * 10.0**p
    tt = np.concatenate([t, t])
    sigma = tt * math.sqrt(10.0**q / float(tt @ tt))
    u = s1 * math.sqrt(10.0**r1 / float(s1 @ s1))
    return CanonicalInstance(sigma, u, b)


def trial_seed(base_seed: int, n: int, trial: int) -> int:
    return derive_seed(base_seed, n, trial)


def _run_cell(args):
    config, n, trial = args
    seed = trial_seed(config.base_seed, n, trial)
    inst = sample_instance(n, config.b, seed)
    x0 = random_init(n, config.b, derive_seed(seed, 1))
    u_norm_sq = float(inst.u @ inst.u)
    cond = float(inst.sigma.max() / inst.sigma.min())
    frob = float(inst.sigma @ inst.sigma)
    out = []
    for method, step, init in config.variants:
        opts = SolverOptions(
            method=method,
            step_rule=step,
            init=Init.GIVEN if init is Init.RANDOM else init,
            x0=x0 if init is Init.RANDOM else None,
            tol=config.tol,
            max_iter=config.max_iter,
            time_limit=config.time_limit,
        )
        rep = solve(inst, opts)
        out.append(
            TrialRecord(
                n=n, trial=trial, method=method.name, step_rule=step.name, init=init.name,
                seed=seed, iterations=rep.iterations, wall_time=rep.wall_time,
                final_objective=rep.objective, final_grad_sq_norm=rep.grad_sq_norm,
                termination=rep.termination.name, u_norm_sq=u_norm_sq, sigma_cond=cond,
                sigma_frob_sq=frob,
            )
        )
    return out


def run_grid(config: BenchConfig, workers: int = 1) -> list:
    """Every (n, trial, variant) solve, ordered by ``(n, trial, variant)``.

    With ``workers > 1`` cells run in a process pool; seeds do not depend on
    scheduling, so records are identical apart from ``wall_time``.
    """
    cells = [(config, n, trial) for n in config.n_grid for trial in range(config.trials_per_n)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_run_cell, cells))
    else:
        chunks = [_run_cell(c) for c in cells]
    records = [r for chunk in chunks for r in chunk]
    order = {(m.name, s.name, i.name): k for k, (m, s, i) in enumerate(config.variants)}
    grid_pos = {n: k for k, n in enumerate(config.n_grid)}
    records.sort(key=lambda r: (grid_pos[r.n], r.trial, order[(r.method, r.step_rule, r.init)]))
    return records


_CAPPED = (Termination.MAX_ITER.name, Termination.TIME_LIMIT.name)


def summarize(records: Sequence[TrialRecord]) -> list:
    """Aggregates per ``(n, method, step_rule, init)`` cell, in first-seen order."""
    if not records:
        raise ValueError("no records to summarize")
    cells = {}
    for r in records:
        cells.setdefault((r.n, r.method, r.step_rule, r.init), []).append(r)
    rows = []
    for (n, method, step, init), rs in cells.items():
        times = [r.wall_time for r in rs]
        iters = [r.iterations for r in rs]
        per_iter = [r.wall_time / r.iterations for r in rs if r.iterations > 0]
        rows.append(
            {
                "n": n, "method": method, "step_rule": step, "init": init, "trials": len(rs),
                "mean_wall_time": statistics.fmean(times),
                "median_wall_time": statistics.median(times),
                "mean_iterations": statistics.fmean(iters),
                "median_iterations": statistics.median(iters),
                "median_time_per_iteration": statistics.median(per_iter) if per_iter else math.nan,
                "cap_fraction": sum(r.termination in _CAPPED for r in rs) / len(rs),
            }
        )
    return rows


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def emit_csv(records: Sequence[TrialRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            d = asdict(r)
            w.writerow([_fmt(d[c]) for c in CSV_COLUMNS])


def read_csv(path) -> list:
    types = {f.name: f.type for f in fields(TrialRecord)}
    conv = {"int": int, "float": float, "str": str}
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            out.append(TrialRecord(**{k: conv[types[k]](v) for k, v in row.items()}))
    return out


def emit_figure1(records: Sequence[TrialRecord], path) -> None:
    """Per-cell means and medians of time and iterations."""
    rows = summarize(records)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})


def emit_figure2(records: Sequence[TrialRecord], path) -> None:
    """One row per S-M Newton / unit / warm trial with its covariates."""
    cols = ("n", "trial", "wall_time", "iterations", "u_norm_sq", "sigma_cond", "sigma_frob_sq")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in records:
            if (r.method, r.step_rule, r.init) == ("NEWTON_SM", "UNIT", "WARM"):
                d = asdict(r)
                w.writerow([_fmt(d[c]) for c in cols])


def default_workers() -> int:
    return max(1, (os.cpu_count() or 1) - 1)
