"""Descent solvers for the canonical problem.

Three direction rules (gradient, dense Newton, Sherman-Morrison Newton) times
two step rules (unit, exact quartic line search), started from the norm-shell
warm start, a seeded random point, or a given point.  The iteration loop runs
in the kernel backend chosen by :mod:`msprox._backend`.

Safeguards, recorded per iteration in the trace ``event`` column:

* ``EVENT_FALLBACK``: the Hessian is not positive definite, so the iteration
  takes a gradient step with exact line search instead.
* ``EVENT_GUARD``: a unit step increased the objective and was retried with
  the exact step.
* ``EVENT_REFLECT`` / ``EVENT_ESCAPE``: the tolerance was met at a saddle
  (a stationary point with a negative multiplier).  The iterate moves to
  ``|x|``, or along the coordinate of the smallest ``sigma``, and iteration
  resumes; see :func:`msprox._pykernels.run`.  Without this, gradient descent
  in particular can stop at a saddle.

A step that still fails to decrease the objective is rejected and the run
ends as ``STALLED``.  When the change is within the objective's rounding
error the squared gradient norm decides instead, so Newton iterations keep
converging after objective values stop being comparable.  A run that makes
no progress by either measure (decrease below ``1e-16 * max(1, f)`` and no
drop in the gradient) for 20 consecutive iterations also ends as ``STALLED``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _backend, _pykernels
from ._rng import make_rng
from .canonical import CanonicalInstance, DEFAULT_TOL, warm_start

kernels = _backend.kernels

DEFAULT_MAX_ITER = 50_000
EVENT_NEWTON = _pykernels.EVENT_NEWTON
EVENT_FALLBACK = _pykernels.EVENT_FALLBACK
EVENT_GUARD = _pykernels.EVENT_GUARD
EVENT_REFLECT = _pykernels.EVENT_REFLECT
EVENT_ESCAPE = _pykernels.EVENT_ESCAPE


class Method(enum.Enum):
    GRADIENT_DESCENT = _pykernels.GRADIENT_DESCENT
    NEWTON_DENSE = _pykernels.NEWTON_DENSE
    NEWTON_SM = _pykernels.NEWTON_SM


class StepRule(enum.Enum):
    UNIT = _pykernels.UNIT
    OPTIMAL = _pykernels.OPTIMAL


class Init(enum.Enum):
    WARM = "warm"
    RANDOM = "random"
    GIVEN = "given"


class Termination(enum.Enum):
    TOLERANCE = _pykernels.TOLERANCE
    MAX_ITER = _pykernels.MAX_ITER
    STALLED = _pykernels.STALLED
    TIME_LIMIT = _pykernels.TIME_LIMIT


class FallbackRequired(ArithmeticError):
    """The Newton system is not positive definite at the current point."""


@dataclass(frozen=True)
class SolverOptions:
    method: Method = Method.NEWTON_SM
    step_rule: StepRule = StepRule.UNIT
    init: Init = Init.WARM
    x0: Optional[np.ndarray] = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    seed: int = 0
    trace: bool = False
    time_limit: Optional[float] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.init is Init.GIVEN and self.x0 is None:
            raise ValueError("init=GIVEN requires x0")
        if self.time_limit is not None and not self.time_limit > 0:
            raise ValueError("time_limit must be positive")


@dataclass
class SolveReport:
    x_star: np.ndarray
    objective: float
    grad_sq_norm: float
    iterations: int
    termination: Termination
    wall_time: float
    trace: Optional[dict] = None
    fallback_steps: int = 0
    guard_steps: int = 0
    escape_steps: int = 0
    backend: str = field(default=_backend.BACKEND)

    @property
    def converged(self) -> bool:
        return self.termination is Termination.TOLERANCE

    def to_dict(self) -> dict:
        out = {
            "x_star": self.x_star.tolist(),
            "objective": self.objective,
            "grad_sq_norm": self.grad_sq_norm,
            "iterations": self.iterations,
            "termination": self.termination.name,
            "wall_time": self.wall_time,
            "fallback_steps": self.fallback_steps,
            "guard_steps": self.guard_steps,
            "escape_steps": self.escape_steps,
            "backend": self.backend,
            "trace": None,
        }
        if self.trace is not None:
            out["trace"] = {k: np.asarray(v).tolist() for k, v in self.trace.items()}
        return out


def random_init(n: int, b: float, seed: int) -> np.ndarray:
    """Uniform direction in the positive orthant with a log-uniform norm.

    ``x = s * sqrt(10**r * (b / 100) / |s|^2)`` with ``s ~ U(0, 1)^n`` and
    ``r ~ U(1, 3)``; at ``b = 100`` the squared norm lies in ``[10, 1000]``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = make_rng(seed)
    r = rng.uniform(1.0, 3.0)
    s = rng.uniform(0.0, 1.0, size=n)
    ss = float(s @ s)
    if ss == 0.0:
        s = np.ones(n)
        ss = float(n)
    return s * math.sqrt(10.0**r * (b / 100.0) / ss)


def initial_point(inst: CanonicalInstance, opts: SolverOptions) -> np.ndarray:
    if opts.init is Init.WARM:
        return warm_start(inst)
    if opts.init is Init.RANDOM:
        return random_init(inst.n, inst.b if inst.b > 0 else 100.0, opts.seed)
    x0 = np.asarray(opts.x0, dtype=float)
    if x0.shape != (inst.n,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({inst.n},)")
    return x0


def _point(x, inst):
    x = np.ascontiguousarray(x, dtype=float)
    if x.shape != (inst.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({inst.n},)")
    return x


def sm_newton_direction(x, inst: CanonicalInstance) -> np.ndarray:
    """``-H^{-1} grad`` in O(N) through the diagonal-plus-rank-one structure.

    Raises :class:`FallbackRequired` when the Hessian is not positive definite.
    """
    x = _point(x, inst)
    g = _pykernels.gradient(inst.sigma, inst.u, inst.b, x)
    d = kernels.sm_direction(inst.sigma, inst.b, x, g)
    if d is None:
        raise FallbackRequired("Hessian is not positive definite")
    return d


def newton_direction_dense(x, inst: CanonicalInstance) -> np.ndarray:
    """``-H^{-1} grad`` by dense Cholesky; O(N^3)."""
    x = _point(x, inst)
    g = _pykernels.gradient(inst.sigma, inst.u, inst.b, x)
    d = kernels.dense_direction(inst.sigma, inst.b, x, g)
    if d is None:
        raise FallbackRequired("Hessian is not positive definite")
    return d


def quartic_coefficients(x, direction, inst: CanonicalInstance):
    """``(a4, a3, a2, a1, a0)`` with ``f(x + a d) = sum_k a_k a^k``."""
    x = _point(x, inst)
    d = _point(direction, inst)
    return kernels.quartic_coefficients(inst.sigma, inst.u, inst.b, x, d)


def optimal_step(x, direction, inst: CanonicalInstance) -> float:
    """Exact minimizer of the objective along ``x + alpha * direction``."""
    d = _point(direction, inst)
    scale = float(np.max(np.abs(d))) if d.size else 0.0
    if not scale > 0.0:
        raise ValueError("direction must be nonzero")
    # unit-scale direction so the quartic coefficients cannot underflow
    a4, a3, a2, a1, _ = quartic_coefficients(x, d / scale, inst)
    return float(kernels.line_min(a4, a3, a2, a1)) / scale


def cubic_real_roots(c3: float, c2: float, c1: float, c0: float) -> list:
    """Real roots of a cubic, ascending.  See :func:`msprox._pykernels.cubic_real_roots`."""
    return list(kernels.cubic_real_roots(float(c3), float(c2), float(c1), float(c0)))


def solve(inst: CanonicalInstance, opts: Optional[SolverOptions] = None) -> SolveReport:
    """Minimize ``inst`` until ``grad^T grad <= opts.tol`` or a cap is hit.

    ``wall_time`` is measured inside the kernel around the iteration loop
    only, excluding setup and result packaging.
    """
    opts = opts or SolverOptions()
    if inst.n == 0:
        return SolveReport(
            x_star=np.zeros(0),
            objective=inst.b**2,
            grad_sq_norm=0.0,
            iterations=0,
            termination=Termination.TOLERANCE,
            wall_time=0.0,
            trace=_trace_dict(np.zeros((0, 4))) if opts.trace else None,
        )
    x0 = np.ascontiguousarray(initial_point(inst, opts), dtype=float)
    x, f, gg, k, code, tr, fallbacks, guards, escapes, wall = kernels.run(
        inst.sigma,
        inst.u,
        inst.b,
        x0,
        opts.method.value,
        opts.step_rule.value,
        float(opts.tol),
        int(opts.max_iter),
        bool(opts.trace),
        float(opts.time_limit or 0.0),
    )
    return SolveReport(
        x_star=x,
        objective=float(f),
        grad_sq_norm=float(gg),
        iterations=int(k),
        termination=Termination(code),
        wall_time=wall,
        trace=_trace_dict(tr) if tr is not None else None,
        fallback_steps=int(fallbacks),
        guard_steps=int(guards),
        escape_steps=int(escapes),
    )


def _trace_dict(tr) -> dict:
    return {
        "objective": tr[:, 0].copy(),
        "grad_sq_norm": tr[:, 1].copy(),
        "alpha": tr[:, 2].copy(),
        "event": tr[:, 3].astype(int),
    }
