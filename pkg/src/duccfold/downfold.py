"""Hermitian downfolding of the sector Hamiltonian into an active space.

sigma = T_ext - T_ext^T is built from the external part of a CC cluster
operator. The full similarity transform exp(-sigma) H exp(sigma), or its
truncated commutator series, is projected onto the CAS determinants and
diagonalized.

For large sectors, :func:`downfold` computes only the CAS block. It uses
the action of exp(sigma) on the CAS columns, so no full-sector dense
exponential is ever formed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .ccsolver import ActiveSpace, ClusterOperator, partition_amplitudes
from .fockspace import (
    SectorBasis,
    SectorMatrix,
    _check_antisymmetric,
    exp_antisymmetric,
    expm_antisymmetric_apply,
    lower_cluster,
)

__all__ = [
    "EffectiveHamiltonian",
    "EffectiveEigensolution",
    "build_sigma_ext",
    "transform_exact",
    "transform_bch",
    "cas_indices",
    "project_cas",
    "downfold",
    "ground_state",
    "lowest_eigenvalue",
]


@dataclass(frozen=True)
class EffectiveHamiltonian:
    act: ActiveSpace
    sector: SectorBasis
    cas_index: np.ndarray  # positions of the CAS determinants in the sector
    matrix: np.ndarray

    @property
    def cas_dets(self) -> np.ndarray:
        return self.sector.dets[self.cas_index]

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class EffectiveEigensolution:
    energy: float
    vector: np.ndarray


def build_sigma_ext(T_ext: ClusterOperator, basis: SectorBasis, act: ActiveSpace | None = None) -> SectorMatrix:
    """sigma_ext = T_ext - T_ext^T as a sparse antisymmetric matrix.

    With ``act`` given, amplitudes carrying only active labels are rejected.
    """
    if act is not None:
        t_int, _ = partition_amplitudes(T_ext, act)
        if t_int.amplitudes:
            sig = next(iter(t_int.amplitudes))
            raise ValueError(f"internal excitation {sig} passed as external")
    T = lower_cluster(T_ext, basis).data
    return SectorMatrix(basis, (T - T.T).tocsr())


def transform_exact(H: SectorMatrix, sigma: SectorMatrix) -> SectorMatrix:
    """exp(-sigma) H exp(sigma) over the whole sector (dense)."""
    U = exp_antisymmetric(sigma).data
    Hd = H.dense()
    Hbar = U.T @ Hd @ U
    return H.with_data(0.5 * (Hbar + Hbar.T))


def transform_bch(H: SectorMatrix, sigma: SectorMatrix, max_r: int) -> SectorMatrix:
    """H + sum_{i=1}^{max_r} C_i / i!, with C_1 = [H, sigma], C_i = [C_{i-1}, sigma]."""
    if max_r < 0:
        raise ValueError("max_r must be non-negative")
    _check_antisymmetric(sigma.data)
    S = sigma.data
    C = H.dense()
    total = C.copy()
    for i in range(1, max_r + 1):
        # dense @ sparse is taken as (sparse^T @ dense^T)^T
        CS = np.asarray((S.T @ C.T).T) if sp.issparse(S) else C @ S
        SC = np.asarray(S @ C)
        C = CS - SC
        total += C / math.factorial(i)
    return H.with_data(0.5 * (total + total.T))


def cas_indices(basis: SectorBasis, act: ActiveSpace) -> np.ndarray:
    """Sector positions of determinants with inactive occupied orbitals filled
    and inactive virtual orbitals empty (sector order preserved)."""
    n = basis.M // 2
    if act.active_spatial[-1] > n:
        raise ValueError(f"active orbital {act.active_spatial[-1]} exceeds the {n} available")
    ref = basis.reference
    occ_mask = 0
    vir_mask = 0
    active = act.spin_orbitals
    for lbl in range(1, basis.M + 1):
        if lbl in active:
            continue
        if (ref >> (lbl - 1)) & 1:
            occ_mask |= 1 << (lbl - 1)
        else:
            vir_mask |= 1 << (lbl - 1)
    d = basis.dets
    keep = ((d & occ_mask) == occ_mask) & ((d & vir_mask) == 0)
    idx = np.flatnonzero(keep)
    if len(idx) == 0:
        raise ValueError("active space contains no determinants of this sector")
    return idx


def project_cas(Hbar: SectorMatrix, act: ActiveSpace) -> EffectiveHamiltonian:
    idx = cas_indices(Hbar.basis, act)
    mat = Hbar.dense()[np.ix_(idx, idx)]
    return EffectiveHamiltonian(act, Hbar.basis, idx, 0.5 * (mat + mat.T))


def downfold(
    H: SectorMatrix,
    sigma: SectorMatrix,
    act: ActiveSpace,
    max_r: int | None = None,
    tol: float = 1e-14,
) -> EffectiveHamiltonian:
    """CAS block of the transformed Hamiltonian without forming it.

    With ``max_r=None`` the transform is exact: W = exp(sigma) P and the
    block is W^T H W. Otherwise the truncated commutator series is used,
    rewritten through V_j = sigma^j P as

        P C_i P / i! = sum_{j + l = i} V_j^T H V_l / (j! l!)

    which follows from ((-sigma)^j)^T = sigma^j.
    """
    idx = cas_indices(H.basis, act)
    S = sigma.data
    _check_antisymmetric(S)
    Hd = H.data
    n = H.dim
    P = np.zeros((n, len(idx)))
    P[idx, np.arange(len(idx))] = 1.0
    if max_r is None:
        W = expm_antisymmetric_apply(S, P, tol=tol)
        mat = W.T @ (Hd @ W)
    else:
        if max_r < 0:
            raise ValueError("max_r must be non-negative")
        V = [P]
        for _ in range(max_r):
            V.append(np.asarray(S @ V[-1]))
        HV = [np.asarray(Hd @ v) for v in V]
        mat = np.zeros((len(idx), len(idx)))
        for j in range(max_r + 1):
            for l in range(max_r + 1 - j):
                mat += V[j].T @ HV[l] / (math.factorial(j) * math.factorial(l))
    return EffectiveHamiltonian(act, H.basis, idx, 0.5 * (mat + mat.T))


def ground_state(heff: EffectiveHamiltonian) -> EffectiveEigensolution:
    w, v = scipy.linalg.eigh(heff.matrix, subset_by_index=[0, 0])
    vec = v[:, 0]
    # deterministic sign: largest component positive
    if vec[np.argmax(np.abs(vec))] < 0:
        vec = -vec
    return EffectiveEigensolution(float(w[0]), vec)


def lowest_eigenvalue(H: SectorMatrix, dense_limit: int = 1500) -> float:
    """Lowest eigenvalue of a symmetric sector matrix.

    Dense diagonalization up to ``dense_limit``; Lanczos (ARPACK) with a
    fixed start vector beyond it, converged to machine precision.
    """
    A = H.dense()
    n = A.shape[0]
    if n <= dense_limit:
        return float(scipy.linalg.eigh(A, eigvals_only=True, subset_by_index=[0, 0])[0])
    from scipy.sparse.linalg import eigsh

    v0 = np.full(n, 1.0 / math.sqrt(n))
    v0[0] += 1.0
    w = eigsh(A, k=1, which="SA", tol=0.0, v0=v0, ncv=40, maxiter=10 * n)[0]
    return float(w[0])
