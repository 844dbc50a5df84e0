"""Peeters-Devreese-Soldatov moment estimator of the ground-state energy.

PDS(K) needs the moments m_0 .. m_{2K-1} of H in a trial state. The
coefficients of the monic polynomial P(E) = E^K + a_1 E^(K-1) + ... + a_K
solve the Hankel system M a = -b with M_ij = m_{2K-i-j} and b_i = m_{2K-i};
the lowest real root of P bounds the ground-state energy from above.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .downfold import EffectiveHamiltonian
from .errors import DegenerateMomentsError, RootFailureError

__all__ = ["MomentVector", "compute_moments", "pds_energy", "reference_vector"]

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class MomentVector:
    """Moments of ``H - shift`` in the trial state; ``m[0] == 1``."""

    K: int
    m: np.ndarray
    shift: float = 0.0
    reference: str = "hf"


def reference_vector(heff: EffectiveHamiltonian, kind: str = "hf") -> np.ndarray:
    """Trial states over the CAS basis.

    ``"hf"`` is the reference determinant, ``"det:<i>"`` any CAS basis
    vector, ``"uniform"`` the normalized equal superposition.
    """
    d = heff.dim
    if kind == "hf":
        kind = "det:0"
    if kind.startswith("det:"):
        i = int(kind[4:])
        if not 0 <= i < d:
            raise ValueError(f"CAS basis index {i} out of range (dimension {d})")
        phi = np.zeros(d)
        phi[i] = 1.0
        return phi
    if kind == "uniform":
        return np.full(d, 1.0 / np.sqrt(d))
    raise ValueError(f"unknown reference vector {kind!r}")


def compute_moments(heff, phi: np.ndarray, K: int, shift: float | None = None, label: str = "hf") -> MomentVector:
    """Moments m_k = <phi|(H - c)^k|phi> for k < 2K.

    ``heff`` may be an :class:`EffectiveHamiltonian` or a plain matrix. The
    shift ``c`` defaults to <phi|H|phi>, which keeps the Hankel system
    well conditioned; :func:`pds_energy` adds it back to the roots.
    """
    if K < 1:
        raise ValueError("PDS order K must be at least 1")
    H = heff.matrix if isinstance(heff, EffectiveHamiltonian) else np.asarray(heff, dtype=float)
    phi = np.asarray(phi, dtype=float)
    norm = np.linalg.norm(phi)
    if norm == 0:
        raise ValueError("trial vector is zero")
    phi = phi / norm
    if shift is None:
        shift = float(phi @ H @ phi)
    m = np.empty(2 * K)
    w = phi
    m[0] = 1.0
    for k in range(1, 2 * K):
        w = H @ w - shift * w
        m[k] = phi @ w
    return MomentVector(K=K, m=m, shift=float(shift), reference=label)


def pds_energy(mom: MomentVector) -> tuple[float, list[float]]:
    """Lowest real root of the PDS(K) polynomial, and all real roots (ascending)."""
    K, m = mom.K, mom.m
    i = np.arange(1, K + 1)
    M = m[2 * K - i[:, None] - i[None, :]]
    b = m[2 * K - i]
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise DegenerateMomentsError(f"moment matrix condition number {cond:.3e} exceeds {_COND_LIMIT:.0e}")
    a = np.linalg.solve(M, -b)
    # np.roots diagonalizes the companion matrix
    roots = np.roots(np.concatenate([[1.0], a]))
    real = [float(r.real) for r in roots if abs(r.imag) < 1e-8 * max(1.0, abs(r.real))]
    if not real:
        raise RootFailureError(f"PDS({K}) polynomial has no real roots")
    real = sorted(x + mom.shift for x in real)
    return real[0], real
