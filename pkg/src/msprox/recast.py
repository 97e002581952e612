"""Reduction of the complex prox problem to the canonical real form.

The complex problem is

    minimize_y  ((A y)^H (A y) - b)^2 + (rho / 2) ||y - w||^2,   A in C^{K x M}.

Stacking ``v = [Re y; Im y]`` turns ``(A y)^H (A y)`` into ``v^T B^T B v``
with ``B = [[A_R, -A_I], [A_I, A_R]]``.  Each right singular vector ``z`` of
``A`` with singular value ``s`` gives two orthonormal eigenvectors of ``B^T B``,
``[Re z; Im z]`` and ``[-Im z; Re z]``, both with eigenvalue ``s^2``.  Only
those with ``s^2 > rank_rel_tol * max(s^2)`` are kept, so the canonical
dimension is at most ``2 min(K, M)`` and neither ``B^T B`` nor any other
``2M x 2M`` matrix is ever formed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .canonical import CanonicalInstance

DEFAULT_RANK_REL_TOL = 1e-12
_SIGN_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class ComplexProxInstance:
    a_real: np.ndarray
    a_imag: np.ndarray
    w_real: np.ndarray
    w_imag: np.ndarray
    b: float
    rho: float = 1.0

    def __post_init__(self):
        ar = np.atleast_2d(np.array(self.a_real, dtype=float))
        ai = np.atleast_2d(np.array(self.a_imag, dtype=float))
        wr = np.array(self.w_real, dtype=float).reshape(-1)
        wi = np.array(self.w_imag, dtype=float).reshape(-1)
        if ar.ndim != 2 or ar.shape != ai.shape:
            raise ValueError(f"a_real {ar.shape} and a_imag {ai.shape} must be matrices of equal shape")
        if wr.shape != wi.shape or wr.size != ar.shape[1]:
            raise ValueError(f"w has length {wr.size}/{wi.size} but A has {ar.shape[1]} columns")
        b, rho = float(self.b), float(self.rho)
        if not math.isfinite(b) or b < 0.0:
            raise ValueError("b must be finite and nonnegative")
        if not math.isfinite(rho) or rho <= 0.0:
            raise ValueError("rho must be finite and positive")
        for name, arr in (("a_real", ar), ("a_imag", ai), ("w_real", wr), ("w_imag", wi)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_complex(cls, a, w, b, rho=1.0) -> "ComplexProxInstance":
        a = np.atleast_2d(np.asarray(a, dtype=complex))
        w = np.asarray(w, dtype=complex).reshape(-1)
        return cls(a.real, a.imag, w.real, w.imag, b, rho)

    @property
    def k(self) -> int:
        return self.a_real.shape[0]

    @property
    def m(self) -> int:
        return self.a_real.shape[1]

    @property
    def a(self) -> np.ndarray:
        return self.a_real + 1j * self.a_imag

    @property
    def w(self) -> np.ndarray:
        return self.w_real + 1j * self.w_imag

    def to_dict(self) -> dict:
        return {
            "a_real": self.a_real.tolist(),
            "a_imag": self.a_imag.tolist(),
            "w_real": self.w_real.tolist(),
            "w_imag": self.w_imag.tolist(),
            "b": self.b,
            "rho": self.rho,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ComplexProxInstance":
        required = ("a_real", "a_imag", "w_real", "w_imag", "b")
        missing = [k for k in required if k not in data]
        if missing:
            raise KeyError(f"complex instance is missing field(s): {', '.join(missing)}")
        m = len(data["w_real"])
        ar = np.asarray(data["a_real"], dtype=float).reshape(-1, m)
        ai = np.asarray(data["a_imag"], dtype=float).reshape(-1, m)
        return cls(ar, ai, data["w_real"], data["w_imag"], data["b"], data.get("rho", 1.0))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "ComplexProxInstance":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class SpectralFactor:
    """Retained eigenpairs of ``B^T B``: independent of the prox center."""

    basis: np.ndarray  # (2M, n_eff), orthonormal columns
    eigenvalues: np.ndarray  # (n_eff,), each value appears in adjacent pairs

    @property
    def n_eff(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def m(self) -> int:
        return self.basis.shape[0] // 2

    @property
    def nbytes(self) -> int:
        return self.basis.nbytes + self.eigenvalues.nbytes


@dataclass(frozen=True, eq=False)
class RecastMap:
    """Everything needed to send a canonical point back to ``C^M``.

    ``null_payload`` is the component of ``[w_R; w_I]`` orthogonal to
    ``basis``; the optimum equals it on that subspace.
    """

    basis: np.ndarray
    eigenvalues: np.ndarray
    signs: np.ndarray
    null_payload: np.ndarray

    @property
    def n_eff(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def m(self) -> int:
        return self.basis.shape[0] // 2


def build_real_stack(inst: ComplexProxInstance) -> np.ndarray:
    """``B = [[A_R, -A_I], [A_I, A_R]]`` so that ``|A y|^2 = |B [y_R; y_I]|^2``."""
    return np.block([[inst.a_real, -inst.a_imag], [inst.a_imag, inst.a_real]])


def _fix_sign(col: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(col) > _SIGN_EPS)
    if nz.size and col[nz[0]] < 0:
        return -col
    return col


def spectral_factor(a, rank_rel_tol: float = DEFAULT_RANK_REL_TOL) -> SpectralFactor:
    """Thin eigen-factor of the real representation of ``A^H A``.

    Each basis column is sign-normalized so its first entry above ``1e-12`` in
    magnitude is positive, which makes the output reproducible.
    """
    if not 0.0 < rank_rel_tol < 1.0:
        raise ValueError("rank_rel_tol must lie in (0, 1)")
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    m = a.shape[1]
    if a.size == 0:
        return SpectralFactor(np.zeros((2 * m, 0)), np.zeros(0))
    _, s, vh = np.linalg.svd(a, full_matrices=False)
    lam = s * s
    top = lam.max() if lam.size else 0.0
    keep = np.flatnonzero(lam > rank_rel_tol * top) if top > 0 else np.zeros(0, dtype=int)
    basis = np.empty((2 * m, 2 * keep.size))
    for j, idx in enumerate(keep):
        z = vh[idx].conj()
        lead = np.flatnonzero(np.abs(z) > _SIGN_EPS)
        if lead.size:
            ph = z[lead[0]]
            z = z * (abs(ph) / ph)
        basis[:, 2 * j] = _fix_sign(np.concatenate([z.real, z.imag]))
        basis[:, 2 * j + 1] = _fix_sign(np.concatenate([-z.imag, z.real]))
    return SpectralFactor(basis, np.repeat(lam[keep], 2))


def canonicalize_center(
    factor: SpectralFactor, w, b: float, rho: float
) -> tuple[CanonicalInstance, RecastMap]:
    """Canonical instance for prox center ``w`` given a precomputed factor.

    Cost is O(M * n_eff); only ``u``, the signs and the null payload change
    with ``w``.
    """
    w = np.asarray(w, dtype=complex).reshape(-1)
    if w.size != factor.m:
        raise ValueError(f"w has length {w.size}, expected {factor.m}")
    wv = np.concatenate([w.real, w.imag])
    wt = factor.basis.T @ wv
    scaled = np.sqrt(factor.eigenvalues) * wt
    signs = np.where(scaled < 0.0, -1.0, 1.0)
    null = wv - factor.basis @ wt
    inst = CanonicalInstance(0.5 * rho / factor.eigenvalues, np.abs(scaled), b)
    return inst, RecastMap(factor.basis, factor.eigenvalues, signs, null)


def canonicalize(
    inst: ComplexProxInstance, rank_rel_tol: float = DEFAULT_RANK_REL_TOL
) -> tuple[CanonicalInstance, RecastMap]:
    factor = spectral_factor(inst.a, rank_rel_tol)
    return canonicalize_center(factor, inst.w, inst.b, inst.rho)


def lift_solution(x, rmap: RecastMap) -> np.ndarray:
    """Map a canonical point back to ``y in C^M``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != rmap.n_eff:
        raise ValueError(f"x has length {x.size}, expected {rmap.n_eff}")
    yt = rmap.signs * x / np.sqrt(rmap.eigenvalues)
    v = rmap.basis @ yt + rmap.null_payload
    m = rmap.m
    return v[:m] + 1j * v[m:]


def complex_objective(y, inst: ComplexProxInstance) -> float:
    y = np.asarray(y, dtype=complex).reshape(-1)
    if y.size != inst.m:
        raise ValueError(f"y has length {y.size}, expected {inst.m}")
    ay = inst.a @ y
    q = float(np.vdot(ay, ay).real)
    r = y - inst.w
    return (q - inst.b) ** 2 + 0.5 * inst.rho * float(np.vdot(r, r).real)
