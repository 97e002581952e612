"""Consensus ADMM for sums of multispectral phase-retrieval terms.

Solves ``min_y sum_t ((A_t y)^H (A_t y) - b_t)^2`` with the scaled form

    x_t    <- prox_t(z - lam_t)
    z      <- mean_t(x_t + lam_t)
    lam_t  <- lam_t + x_t - z

where ``prox_t(v) = argmin_y f_t(y) + (rho / 2) ||y - v||^2``.  Each term's
spectral factor is computed once; a prox call only recomputes the canonical
center, runs the canonical solver and lifts the result back.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ._rng import make_rng
from .canonical import certify
from .recast import DEFAULT_RANK_REL_TOL, SpectralFactor, canonicalize_center, lift_solution, spectral_factor
from .solver import SolveReport, SolverOptions, solve


class ProxSolveError(RuntimeError):
    """An inner prox solve ended without a certified minimizer."""

    def __init__(self, term_index: int, report: SolveReport):
        super().__init__(
            f"prox of term {term_index} not certified "
            f"(termination={report.termination.name}, grad_sq={report.grad_sq_norm:.3e})"
        )
        self.term_index = term_index
        self.report = report


@dataclass(frozen=True, eq=False)
class Term:
    a_real: np.ndarray
    a_imag: np.ndarray
    b: float

    @property
    def a(self) -> np.ndarray:
        return self.a_real + 1j * self.a_imag


@dataclass(frozen=True, eq=False)
class MultispectralProblem:
    terms: tuple
    m: int

    def __post_init__(self):
        if len(self.terms) < 1:
            raise ValueError("at least one term is required")
        terms = []
        for i, t in enumerate(self.terms):
            ar = np.atleast_2d(np.array(t.a_real, dtype=float))
            ai = np.atleast_2d(np.array(t.a_imag, dtype=float))
            if ar.shape != ai.shape or ar.shape[1] != self.m:
                raise ValueError(f"term {i}: A has shape {ar.shape}/{ai.shape}, expected (*, {self.m})")
            if not float(t.b) >= 0.0:
                raise ValueError(f"term {i}: b must be nonnegative")
            terms.append(Term(ar, ai, float(t.b)))
        object.__setattr__(self, "terms", tuple(terms))

    @classmethod
    def from_complex(cls, mats, bs) -> "MultispectralProblem":
        mats = [np.atleast_2d(np.asarray(a, dtype=complex)) for a in mats]
        if not mats or len(mats) != len(bs):
            raise ValueError("need one b per term and at least one term")
        return cls(tuple(Term(a.real, a.imag, b) for a, b in zip(mats, bs)), mats[0].shape[1])

    @property
    def t(self) -> int:
        return len(self.terms)

    def objective(self, y) -> float:
        y = np.asarray(y, dtype=complex)
        total = 0.0
        for term in self.terms:
            ay = term.a @ y
            total += (float(np.vdot(ay, ay).real) - term.b) ** 2
        return total

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "terms": [{"a_real": t.a_real.tolist(), "a_imag": t.a_imag.tolist(), "b": t.b} for t in self.terms],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MultispectralProblem":
        for key in ("m", "terms"):
            if key not in data:
                raise KeyError(f"multispectral problem is missing field: {key}")
        m = int(data["m"])
        terms = []
        for i, t in enumerate(data["terms"]):
            missing = [k for k in ("a_real", "a_imag", "b") if k not in t]
            if missing:
                raise KeyError(f"terms[{i}] is missing field(s): {', '.join(missing)}")
            terms.append(
                Term(
                    np.asarray(t["a_real"], dtype=float).reshape(-1, m),
                    np.asarray(t["a_imag"], dtype=float).reshape(-1, m),
                    t["b"],
                )
            )
        return cls(tuple(terms), m)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "MultispectralProblem":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class AdmmOptions:
    rho: float = 1.0
    max_outer: int = 1000
    eps_abs: float = 1e-6
    eps_rel: float = 1e-4
    inner: SolverOptions = field(default_factory=SolverOptions)
    seed: int = 0
    workers: int = 1
    rank_rel_tol: float = DEFAULT_RANK_REL_TOL

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if not (self.eps_abs > 0 and self.eps_rel > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class AdmmState:
    z: np.ndarray
    x: np.ndarray  # (T, M) local copies
    lam: np.ndarray  # (T, M) scaled duals
    primal_residual: float = math.inf
    dual_residual: float = math.inf
    outer_iteration: int = 0


@dataclass
class AdmmResult:
    state: AdmmState
    history: list  # dicts: iteration, primal_residual, dual_residual, objective, lambda_sum
    converged: bool
    inner_solves: int

    def to_dict(self) -> dict:
        s = self.state
        return {
            "z_real": s.z.real.tolist(),
            "z_imag": s.z.imag.tolist(),
            "primal_residual": s.primal_residual,
            "dual_residual": s.dual_residual,
            "outer_iteration": s.outer_iteration,
            "converged": self.converged,
            "objective": self.history[-1]["objective"] if self.history else None,
            "inner_solves": self.inner_solves,
        }


@dataclass(frozen=True)
class Precomputed:
    factors: tuple  # SpectralFactor per term
    bs: tuple
    rho: float

    @property
    def nbytes(self) -> int:
        return sum(f.nbytes for f in self.factors)


def precompute(problem: MultispectralProblem, rho: float, rank_rel_tol: float = DEFAULT_RANK_REL_TOL) -> Precomputed:
    """Spectral factor of every term; reused by every prox call."""
    factors = tuple(spectral_factor(t.a, rank_rel_tol) for t in problem.terms)
    return Precomputed(factors, tuple(t.b for t in problem.terms), float(rho))


def prox_term(term_index: int, v, pre: Precomputed, inner: Optional[SolverOptions] = None):
    """``argmin_y f_t(y) + (rho / 2) ||y - v||^2`` for term ``term_index``.

    Returns ``(y, report)``; raises :class:`ProxSolveError` unless the inner
    minimizer is certified.  ``report`` is ``None`` when the term has no
    retained spectrum (then ``y = v``).
    """
    factor: SpectralFactor = pre.factors[term_index]
    v = np.asarray(v, dtype=complex)
    if factor.n_eff == 0:
        return v.copy(), None
    inst, rmap = canonicalize_center(factor, v, pre.bs[term_index], pre.rho)
    report = solve(inst, inner)
    if not certify(report.x_star, inst).is_certified:
        raise ProxSolveError(term_index, report)
    return lift_solution(report.x_star, rmap), report


def random_problem(t: int, m: int, k: int, seed: int, b: Optional[float] = None) -> MultispectralProblem:
    """Seeded problem with ``T = t`` terms of ``k x m`` complex Gaussian matrices.

    With ``b=None`` every ``b_t = (A_t y)^H (A_t y)`` for one hidden ``y``, so
    the optimal objective is zero; otherwise all ``b_t = b``.
    """
    rng = make_rng(seed)
    y_true = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    scale = 1.0 / math.sqrt(2 * m)
    mats = [(rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))) * scale for _ in range(t)]
    if b is None:
        bs = [float(np.vdot(a @ y_true, a @ y_true).real) for a in mats]
    else:
        bs = [float(b)] * t
    return MultispectralProblem.from_complex(mats, bs)


def initial_consensus(problem: MultispectralProblem, seed: int) -> np.ndarray:
    """Seeded complex start with ``E|A_t z|^2`` matched to the mean ``b_t``.

    For isotropic ``z``, ``E|A z|^2 = |A|_F^2 |z|^2 / M``; the squared norm is
    set to ``mean(b_t) / mean_t(|A_t|_F^2 / M)``.  Zero when that is undefined.
    """
    m = problem.m
    rng = make_rng(seed)
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    spectral = np.mean([(t.a_real**2 + t.a_imag**2).sum() / m for t in problem.terms])
    mean_b = float(np.mean([t.b for t in problem.terms]))
    if not (spectral > 0 and mean_b > 0):
        return np.zeros(m, dtype=complex)
    return z * math.sqrt(mean_b / spectral / float(np.vdot(z, z).real))


def admm_solve(problem: MultispectralProblem, opts: Optional[AdmmOptions] = None, z0=None) -> AdmmResult:
    """Run consensus ADMM to the residual tolerances or ``max_outer``.

    Non-convergence is reported in the result, not raised.
    """
    opts = opts or AdmmOptions()
    pre = precompute(problem, opts.rho, opts.rank_rel_tol)
    T, M = problem.t, problem.m
    z = initial_consensus(problem, opts.seed) if z0 is None else np.asarray(z0, dtype=complex).copy()
    x = np.tile(z, (T, 1))
    lam = np.zeros((T, M), dtype=complex)
    state = AdmmState(z=z, x=x, lam=lam)
    history = []
    inner_solves = 0
    sqrt_n = math.sqrt(T * M)
    pool = ThreadPoolExecutor(opts.workers) if opts.workers > 1 else None
    converged = False
    try:
        for it in range(1, opts.max_outer + 1):
            centers = z[None, :] - lam
            if pool is None:
                results = [prox_term(t, centers[t], pre, opts.inner) for t in range(T)]
            else:
                results = list(pool.map(lambda t: prox_term(t, centers[t], pre, opts.inner), range(T)))
            for t, (y, rep) in enumerate(results):
                x[t] = y
                inner_solves += rep is not None
            z_prev = z
            z = (x + lam).mean(axis=0)
            lam = lam + x - z[None, :]
            r_pri = math.sqrt(float(np.sum(np.abs(x - z[None, :]) ** 2)))
            r_dual = opts.rho * float(np.linalg.norm(z - z_prev)) * math.sqrt(T)
            eps_pri = opts.eps_abs * sqrt_n + opts.eps_rel * max(
                float(np.linalg.norm(x)), math.sqrt(T) * float(np.linalg.norm(z))
            )
            eps_dual = opts.eps_abs * sqrt_n + opts.eps_rel * opts.rho * float(np.linalg.norm(lam))
            history.append(
                {
                    "iteration": it,
                    "primal_residual": r_pri,
                    "dual_residual": r_dual,
                    "objective": problem.objective(z),
                    "lambda_sum": float(np.abs(lam.sum(axis=0)).max()),
                }
            )
            state = AdmmState(z=z, x=x.copy(), lam=lam.copy(), primal_residual=r_pri,
                              dual_residual=r_dual, outer_iteration=it)
            if r_pri <= eps_pri and r_dual <= eps_dual:
                converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return AdmmResult(state, history, converged, inner_solves)


HISTORY_COLUMNS = ("iteration", "primal_residual", "dual_residual", "objective")


def write_history_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_COLUMNS)
        for row in history:
            w.writerow([row["iteration"]] + [format(row[c], ".17g") for c in HISTORY_COLUMNS[1:]])
