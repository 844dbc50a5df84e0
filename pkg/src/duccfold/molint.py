"""STO-3G integrals over s-type Gaussians for linear hydrogen chains.

Only what hydrogen needs: one contracted 1s function per center. Integrals
follow the closed-form Gaussian product expressions; the only special
function is the Boys function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Geometry",
    "ContractedGaussian",
    "IntegralTables",
    "STO3G_H_EXPONENTS",
    "STO3G_H_COEFFICIENTS",
    "build_chain",
    "sto3g_basis",
    "boys",
    "boys_ladder",
    "compute_integrals",
]

STO3G_H_EXPONENTS = (3.42525091, 0.62391373, 0.16885540)
STO3G_H_COEFFICIENTS = (0.15432897, 0.53532814, 0.44463454)

_BOYS_SWITCH = 35.0


@dataclass(frozen=True)
class Geometry:
    centers: np.ndarray  # (n, 3) Bohr
    charges: np.ndarray  # (n,)

    @property
    def natoms(self) -> int:
        return len(self.charges)


@dataclass(frozen=True)
class ContractedGaussian:
    center: np.ndarray
    exponents: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        if len(self.exponents) != len(self.coefficients):
            raise ValueError("exponent and coefficient lists differ in length")
        if np.any(np.asarray(self.exponents) <= 0):
            raise ValueError("Gaussian exponents must be positive")


@dataclass(frozen=True)
class IntegralTables:
    S: np.ndarray
    Tkin: np.ndarray
    Vnuc: np.ndarray
    ERI: np.ndarray  # chemists' notation (pq|rs)
    E_nn: float

    @property
    def hcore(self) -> np.ndarray:
        return self.Tkin + self.Vnuc

    @property
    def nbasis(self) -> int:
        return self.S.shape[0]


def build_chain(n_atoms: int, spacing: float) -> Geometry:
    """Equally spaced hydrogen atoms along z, first atom at the origin."""
    if n_atoms < 2:
        raise ValueError(f"a chain needs at least two atoms, got {n_atoms}")
    if not spacing > 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    centers = np.zeros((n_atoms, 3))
    centers[:, 2] = spacing * np.arange(n_atoms)
    return Geometry(centers=centers, charges=np.ones(n_atoms))


def sto3g_basis(geom: Geometry) -> list[ContractedGaussian]:
    return [
        ContractedGaussian(
            center=np.array(c, dtype=float),
            exponents=np.array(STO3G_H_EXPONENTS),
            coefficients=np.array(STO3G_H_COEFFICIENTS),
        )
        for c in geom.centers
    ]


def boys(m: int, x):
    """Boys function F_m(x) = int_0^1 t^(2m) exp(-x t^2) dt.

    Accepts a scalar or an array for ``x``. Below x = 35 the power series
    is summed directly; above that the asymptotic form is exact to double
    precision. Use :func:`boys_ladder` for a run of orders.
    """
    if m < 0:
        raise ValueError("Boys order must be non-negative")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("Boys argument must be non-negative")
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    out = np.empty_like(xa)

    big = xa >= _BOYS_SWITCH
    if np.any(big):
        xb = xa[big]
        dfact = math.prod(range(2 * m - 1, 0, -2)) if m > 0 else 1
        out[big] = dfact / 2 ** (m + 1) * np.sqrt(np.pi / xb ** (2 * m + 1))

    small = ~big
    if np.any(small):
        xs = xa[small]
        # F_m(x) = exp(-x) sum_k (2x)^k / ((2m+1)(2m+3)...(2m+2k+1))
        term = np.full_like(xs, 1.0 / (2 * m + 1))
        total = term.copy()
        k = 0
        while True:
            k += 1
            term = term * 2.0 * xs / (2 * m + 2 * k + 1)
            total += term
            if np.all(term <= 1e-17 * total):
                break
        out[small] = np.exp(-xs) * total
    return float(out[0]) if scalar else out


def boys_ladder(m_max: int, x: float) -> np.ndarray:
    """F_0..F_{m_max} at a single point.

    Downward recursion from the series value below the switch point; above
    it the downward map amplifies errors by ~2x/(2m+1) per step, so the
    ladder is climbed upward from F_0 instead.
    """
    vals = np.empty(m_max + 1)
    ex = math.exp(-x)
    if x < _BOYS_SWITCH:
        vals[m_max] = boys(m_max, x)
        for m in range(m_max - 1, -1, -1):
            vals[m] = (2.0 * x * vals[m + 1] + ex) / (2 * m + 1)
    else:
        vals[0] = boys(0, x)
        for m in range(m_max):
            vals[m + 1] = ((2 * m + 1) * vals[m] - ex) / (2.0 * x)
    return vals


def _normalized_primitives(bf: ContractedGaussian) -> np.ndarray:
    a = np.asarray(bf.exponents, dtype=float)
    d = np.asarray(bf.coefficients, dtype=float) * (2.0 * a / np.pi) ** 0.75
    # renormalize the contraction so that <phi|phi> = 1
    p = a[:, None] + a[None, :]
    self_overlap = np.sum(d[:, None] * d[None, :] * (np.pi / p) ** 1.5)
    return d / math.sqrt(self_overlap)


def compute_integrals(geom: Geometry, basis: list[ContractedGaussian]) -> IntegralTables:
    """Overlap, kinetic, nuclear attraction, ERI and nuclear repulsion."""
    centers = np.asarray(geom.centers, dtype=float)
    charges = np.asarray(geom.charges, dtype=float)
    nat = len(charges)
    for i in range(nat):
        for j in range(i):
            if np.linalg.norm(centers[i] - centers[j]) < 1e-8:
                raise ValueError(f"centers {j} and {i} coincide")

    n = len(basis)
    # flatten primitives: (n, k) arrays of exponents, weights, and (n, 3) centers
    alpha = np.array([np.asarray(bf.exponents, dtype=float) for bf in basis])
    coef = np.array([_normalized_primitives(bf) for bf in basis])
    pos = np.array([np.asarray(bf.center, dtype=float) for bf in basis])

    # pair quantities, indexed [i, j, a, b]
    ai = alpha[:, None, :, None]
    bj = alpha[None, :, None, :]
    p = ai + bj
    mu = ai * bj / p
    rab2 = np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=-1)[:, :, None, None]
    kab = np.exp(-mu * rab2)
    dd = coef[:, None, :, None] * coef[None, :, None, :]
    # Gaussian product centers, [i, j, a, b, 3]
    P = (ai[..., None] * pos[:, None, None, None, :] + bj[..., None] * pos[None, :, None, None, :]) / p[..., None]

    s_prim = (np.pi / p) ** 1.5 * kab
    S = np.sum(dd * s_prim, axis=(2, 3))
    T = np.sum(dd * mu * (3.0 - 2.0 * mu * rab2) * s_prim, axis=(2, 3))

    V = np.zeros((n, n))
    for c, z in zip(centers, charges):
        pc2 = np.sum((P - c) ** 2, axis=-1)
        V -= z * np.sum(dd * 2.0 * np.pi / p * kab * boys(0, p * pc2), axis=(2, 3))

    # ERI over primitive quartets; n <= 8 keeps this at 8^4 * 3^4 elements
    pf = (dd * kab).reshape(n, n, -1)
    pp = p.reshape(n, n, -1)
    PP = P.reshape(n, n, -1, 3)
    p1 = pp[:, :, None, None, :, None]
    p2 = pp[None, None, :, :, None, :]
    rpq2 = np.sum(
        (PP[:, :, None, None, :, None, :] - PP[None, None, :, :, None, :, :]) ** 2, axis=-1
    )
    pref = 2.0 * np.pi ** 2.5 / (p1 * p2 * np.sqrt(p1 + p2))
    arg = p1 * p2 / (p1 + p2) * rpq2
    quart = pf[:, :, None, None, :, None] * pf[None, None, :, :, None, :] * pref * boys(0, arg)
    eri = np.sum(quart, axis=(4, 5))

    e_nn = 0.0
    for i in range(nat):
        for j in range(i):
            e_nn += charges[i] * charges[j] / np.linalg.norm(centers[i] - centers[j])

    # exact symmetrization removes last-bit asymmetry from the summation order
    S = 0.5 * (S + S.T)
    T = 0.5 * (T + T.T)
    V = 0.5 * (V + V.T)
    eri = _symmetrize_eri(eri)
    return IntegralTables(S=S, Tkin=T, Vnuc=V, ERI=eri, E_nn=float(e_nn))


def _symmetrize_eri(eri: np.ndarray) -> np.ndarray:
    perms = [
        (0, 1, 2, 3), (1, 0, 2, 3), (0, 1, 3, 2), (1, 0, 3, 2),
        (2, 3, 0, 1), (3, 2, 0, 1), (2, 3, 1, 0), (3, 2, 1, 0),
    ]
    return sum(eri.transpose(pm) for pm in perms) / 8.0
