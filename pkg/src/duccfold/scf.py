"""Restricted Hartree-Fock and the spin-orbital MO Hamiltonian."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .molint import IntegralTables

__all__ = [
    "MolecularOrbitals",
    "SpinOrbitalHamiltonian",
    "run_rhf",
    "to_spin_orbitals",
    "hf_energy_from_spin_orbitals",
]


@dataclass(frozen=True)
class MolecularOrbitals:
    C: np.ndarray
    eps: np.ndarray
    E_HF: float
    n_occ: int
    iterations: int = 0

    @property
    def nmo(self) -> int:
        return self.C.shape[1]


@dataclass(frozen=True)
class SpinOrbitalHamiltonian:
    """Spin-orbital integrals with index p = 2k + s (alpha s=0, beta s=1).

    ``v[p, q, r, s]`` is the antisymmetrized <pq||rs>.
    """

    h: np.ndarray
    v: np.ndarray
    E_nn: float
    eps: np.ndarray  # spin-orbital energies, same ordering

    @property
    def M(self) -> int:
        return self.h.shape[0]


def _fix_signs(C: np.ndarray) -> np.ndarray:
    C = C.copy()
    for j in range(C.shape[1]):
        col = C[:, j]
        # first coefficient within 1e-8 of the largest magnitude decides the sign
        big = np.flatnonzero(np.abs(col) >= np.max(np.abs(col)) - 1e-8)[0]
        if col[big] < 0:
            C[:, j] = -col
    return C


def _fock(hcore: np.ndarray, eri: np.ndarray, D: np.ndarray) -> np.ndarray:
    J = np.einsum("pqrs,rs->pq", eri, D)
    K = np.einsum("prqs,rs->pq", eri, D)
    return hcore + J - 0.5 * K


def run_rhf(
    ints: IntegralTables,
    n_electrons: int,
    max_iter: int = 200,
    e_tol: float = 1e-10,
    d_tol: float = 1e-8,
    diis: bool = True,
    diis_depth: int = 8,
) -> MolecularOrbitals:
    """Closed-shell SCF from the core-Hamiltonian guess.

    The density here is the total density D = 2 C_occ C_occ^T.
    """
    if n_electrons <= 0 or n_electrons % 2:
        raise ValueError(f"RHF needs a positive even electron count, got {n_electrons}")
    S, hcore, eri = ints.S, ints.hcore, ints.ERI
    n = S.shape[0]
    nocc = n_electrons // 2
    if nocc > n:
        raise ValueError("more doubly occupied orbitals than basis functions")
    s_eig, s_vec = np.linalg.eigh(S)
    if s_eig[0] <= 1e-10:
        raise ValueError(f"overlap matrix is singular (smallest eigenvalue {s_eig[0]:.3e})")
    X = s_vec @ np.diag(s_eig ** -0.5) @ s_vec.T

    def diagonalize(F):
        eps, Cp = np.linalg.eigh(X.T @ F @ X)
        return eps, X @ Cp

    eps, C = diagonalize(hcore)
    D = 2.0 * C[:, :nocc] @ C[:, :nocc].T
    E_old = 0.0
    focks: list[np.ndarray] = []
    errs: list[np.ndarray] = []
    E = np.nan
    for it in range(1, max_iter + 1):
        F = _fock(hcore, eri, D)
        E = 0.5 * np.sum(D * (hcore + F)) + ints.E_nn
        if diis:
            err = X.T @ (F @ D @ S - S @ D @ F) @ X
            focks.append(F)
            errs.append(err)
            if len(focks) > diis_depth:
                focks.pop(0)
                errs.pop(0)
            if len(focks) > 1:
                F = _diis_extrapolate(focks, errs)
        eps, C = diagonalize(F)
        D_new = 2.0 * C[:, :nocc] @ C[:, :nocc].T
        dD = np.max(np.abs(D_new - D))
        dE = abs(E - E_old)
        D, E_old = D_new, E
        if dE < e_tol and dD < d_tol:
            break
    else:
        raise ConvergenceError(f"RHF not converged in {max_iter} iterations", last_value=E, iterations=max_iter)

    # final consistent pass: canonical orbitals of the converged Fock matrix
    F = _fock(hcore, eri, D)
    eps, C = diagonalize(F)
    C = _fix_signs(C)
    D = 2.0 * C[:, :nocc] @ C[:, :nocc].T
    E = 0.5 * np.sum(D * (hcore + _fock(hcore, eri, D))) + ints.E_nn
    return MolecularOrbitals(C=C, eps=eps, E_HF=float(E), n_occ=nocc, iterations=it)


def _diis_extrapolate(focks, errs) -> np.ndarray:
    m = len(focks)
    B = -np.ones((m + 1, m + 1))
    B[m, m] = 0.0
    for i in range(m):
        for j in range(i + 1):
            B[i, j] = B[j, i] = np.sum(errs[i] * errs[j])
    rhs = np.zeros(m + 1)
    rhs[m] = -1.0
    # near convergence B is numerically singular; least squares stays well defined
    c = np.linalg.lstsq(B, rhs, rcond=None)[0][:m]
    return sum(ci * Fi for ci, Fi in zip(c, focks))


def to_spin_orbitals(ints: IntegralTables, mos: MolecularOrbitals) -> SpinOrbitalHamiltonian:
    C = mos.C
    h_mo = C.T @ ints.hcore @ C
    eri_mo = np.einsum("pi,qj,rk,sl,pqrs->ijkl", C, C, C, C, ints.ERI, optimize=True)
    n = h_mo.shape[0]
    M = 2 * n
    spin = np.arange(M) % 2
    spat = np.arange(M) // 2
    same = (spin[:, None] == spin[None, :]).astype(float)
    h = h_mo[np.ix_(spat, spat)] * same
    # <pq|rs> = (pr|qs) delta(s_p, s_r) delta(s_q, s_s)
    chem = eri_mo[np.ix_(spat, spat, spat, spat)]  # (pq|rs) over spin-orbital labels
    phys = chem.transpose(0, 2, 1, 3) * same[:, None, :, None] * same[None, :, None, :]
    v = phys - phys.transpose(0, 1, 3, 2)
    return SpinOrbitalHamiltonian(h=h, v=v, E_nn=ints.E_nn, eps=np.repeat(mos.eps, 2))


def hf_energy_from_spin_orbitals(hmo: SpinOrbitalHamiltonian, n_electrons: int) -> float:
    o = slice(0, n_electrons)
    return float(hmo.E_nn + np.trace(hmo.h[o, o]) + 0.5 * np.einsum("ijij->", hmo.v[o, o, o, o]))
