"""The canonical real problem and its closed-form quantities.

Every prox instance is reduced to

    minimize_x  (x^T x - b)^2 + (x - u)^T diag(sigma) (x - u)

with ``sigma > 0`` and ``u >= 0``.  This module evaluates that objective, its
gradient and Hessian, bounds on the minimizer, the norm-shell warm start and
the KKT-based certificate of global optimality.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _pykernels

DEFAULT_TOL = 1e-6
#: Default bound on ``max|grad|``.  A solver stopping at ``grad^T grad <= tol``
#: has ``max|grad| <= sqrt(tol)``, so this matches the solver default.
DEFAULT_STATIONARITY_TOL = math.sqrt(DEFAULT_TOL)
DEFAULT_MULTIPLIER_SLACK = 1e-9


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CanonicalInstance:
    """Diagonal weights ``sigma``, nonnegative center ``u`` and target ``b``."""

    sigma: np.ndarray
    u: np.ndarray
    b: float

    def __post_init__(self):
        sigma = _readonly(self.sigma).reshape(-1)
        u = _readonly(self.u).reshape(-1)
        b = float(self.b)
        if sigma.shape != u.shape:
            raise ValueError(f"sigma has length {sigma.size} but u has length {u.size}")
        if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0.0):
            raise ValueError("sigma must be finite and strictly positive")
        if not np.all(np.isfinite(u)) or np.any(u < 0.0):
            raise ValueError("u must be finite and nonnegative")
        if not math.isfinite(b) or b < 0.0:
            raise ValueError("b must be finite and nonnegative")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return int(self.sigma.size)

    def to_dict(self) -> dict:
        return {"sigma": self.sigma.tolist(), "u": self.u.tolist(), "b": self.b}

    @classmethod
    def from_dict(cls, data: dict) -> "CanonicalInstance":
        missing = [k for k in ("sigma", "u", "b") if k not in data]
        if missing:
            raise KeyError(f"canonical instance is missing field(s): {', '.join(missing)}")
        return cls(np.asarray(data["sigma"], dtype=float), np.asarray(data["u"], dtype=float), data["b"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "CanonicalInstance":
        return cls.from_dict(json.loads(Path(path).read_text()))


class BoundsCase(enum.Enum):
    U_DOMINATES = "u_dominates"  # u^T u > b
    B_DOMINATES = "b_dominates"  # b > u^T u
    EQUAL = "equal"


@dataclass(frozen=True)
class SolutionBounds:
    """Bounds on a nonnegative minimizer ``x*``.

    ``norm_lo <= x*^T x* <= norm_hi`` and ``elem_lo <= x* <= elem_hi``
    element-wise; ``elem_hi`` may hold ``inf``.
    """

    norm_lo: float
    norm_hi: float
    elem_lo: np.ndarray
    elem_hi: np.ndarray
    case_tag: BoundsCase

    def violation(self, x) -> float:
        """Largest amount by which ``x`` breaks any bound (<= 0 when all hold)."""
        x = np.asarray(x, dtype=float)
        nrm = float(x @ x)
        worst = max(self.norm_lo - nrm, nrm - self.norm_hi)
        if x.size:
            worst = max(worst, float(np.max(self.elem_lo - x)), float(np.max(x - self.elem_hi)))
        return worst


@dataclass(frozen=True)
class OptimalityCertificate:
    """Stationarity residual plus the multipliers of the lifted convex problem.

    With ``z = x**2`` the pair ``(x, z)`` satisfies the KKT system of the
    relaxed problem exactly when ``x`` is stationary and every multiplier
    ``mu_i = 2 (x^T x - b) + sigma_i`` is nonnegative; then ``x`` is a global
    minimizer (and the unique one when ``u > 0``).
    """

    stationarity_residual: float
    grad_sq_norm: float
    multipliers: np.ndarray
    min_multiplier: float
    lifted_z: np.ndarray
    is_certified: bool

    def to_dict(self) -> dict:
        return {
            "stationarity_residual": self.stationarity_residual,
            "grad_sq_norm": self.grad_sq_norm,
            "min_multiplier": self.min_multiplier,
            "is_certified": self.is_certified,
        }


def _check_point(x, inst: CanonicalInstance) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({inst.n},)")
    return x


def objective(x, inst: CanonicalInstance) -> float:
    x = _check_point(x, inst)
    return _pykernels.objective(inst.sigma, inst.u, inst.b, x)


def gradient(x, inst: CanonicalInstance) -> np.ndarray:
    x = _check_point(x, inst)
    return _pykernels.gradient(inst.sigma, inst.u, inst.b, x)


def hessian_dense(x, inst: CanonicalInstance) -> np.ndarray:
    """``8 x x^T + 4 (x^T x - b) I + 2 diag(sigma)`` as a dense matrix."""
    x = _check_point(x, inst)
    h = 8.0 * np.outer(x, x)
    h[np.diag_indices_from(h)] += 4.0 * (x @ x - inst.b) + 2.0 * inst.sigma
    return h


def solution_bounds(inst: CanonicalInstance) -> SolutionBounds:
    u, sigma, b = inst.u, inst.sigma, inst.b
    uu = float(u @ u)
    if b > uu:
        smin = float(sigma.min())
        with np.errstate(divide="ignore", invalid="ignore"):
            hi = np.where(sigma == smin, np.inf, sigma * u / (sigma - smin))
        return SolutionBounds(
            norm_lo=max(uu, b - smin / 2.0),
            norm_hi=b,
            elem_lo=u.copy(),
            elem_hi=hi,
            case_tag=BoundsCase.B_DOMINATES,
        )
    if uu > b:
        lo, hi, case = b, uu, BoundsCase.U_DOMINATES
    else:
        lo, hi, case = b, b, BoundsCase.EQUAL
    return SolutionBounds(lo, hi, np.zeros_like(u), u.copy(), case)


def warm_start(inst: CanonicalInstance) -> np.ndarray:
    """Center ``u`` rescaled onto the shell ``x^T x = b``.

    For ``u = 0`` the direction is undefined and ``sqrt(b / n) * 1`` is used.
    """
    uu = float(inst.u @ inst.u)
    if uu > 0.0:
        return inst.u * math.sqrt(inst.b / uu)
    if inst.n == 0:
        return np.zeros(0)
    return np.full(inst.n, math.sqrt(inst.b / inst.n))


def certify(
    x,
    inst: CanonicalInstance,
    stationarity_tol: float = DEFAULT_STATIONARITY_TOL,
    multiplier_slack: float = DEFAULT_MULTIPLIER_SLACK,
) -> OptimalityCertificate:
    """Check stationarity (max-norm of the gradient) and multiplier signs."""
    x = _check_point(x, inst)
    g = _pykernels.gradient(inst.sigma, inst.u, inst.b, x)
    residual = float(np.max(np.abs(g))) if g.size else 0.0
    mu = 2.0 * (x @ x - inst.b) + inst.sigma
    min_mu = float(mu.min()) if mu.size else math.inf
    return OptimalityCertificate(
        stationarity_residual=residual,
        grad_sq_norm=float(g @ g),
        multipliers=mu,
        min_multiplier=min_mu,
        lifted_z=x * x,
        is_certified=bool(residual <= stationarity_tol and min_mu >= -multiplier_slack),
    )
