"""Quick invariant checks on H2 and H4, run by ``duccfold selftest``."""
from __future__ import annotations

import numpy as np

from .ccsolver import ActiveSpace, partition_amplitudes, solve_cc
from .downfold import build_sigma_ext, lowest_eigenvalue, project_cas, transform_exact, ground_state
from .experiment import ChainSystem
from .fockspace import (
    ANNIHILATE,
    SectorMatrix,
    exp_antisymmetric,
    full_fock_basis,
    lower_terms,
)
from .pds import compute_moments, pds_energy, reference_vector


def _anticommutation(M: int = 4) -> float:
    fock = full_fock_basis(M)
    a = [lower_terms([(1.0, [(ANNIHILATE, p)])], fock).toarray() for p in range(1, M + 1)]
    eye = np.eye(len(fock))
    worst = 0.0
    for p in range(M):
        for q in range(M):
            worst = max(worst, np.max(np.abs(a[p] @ a[q].T + a[q].T @ a[p] - (p == q) * eye)))
            worst = max(worst, np.max(np.abs(a[p] @ a[q] + a[q] @ a[p])))
    return worst


def run_selftest(verbose: bool = True) -> bool:
    checks: list[tuple[str, bool, str]] = []

    dev = _anticommutation(4)
    checks.append(("anticommutation relations on M=4 Fock space", dev == 0.0, f"max dev {dev:.1e}"))

    for n, R in ((2, 1.4), (4, 1.8)):
        s = ChainSystem(n, R)
        e_fci = lowest_eigenvalue(s.hamiltonian)
        res = solve_cc(s.hamiltonian, s.basis, n, eps=s.spin_hamiltonian.eps, conv=1e-11)
        err = abs(res.energy - e_fci)
        checks.append((f"H{n} full-rank CC equals FCI", err < 1e-9, f"|dE| = {err:.1e}"))

    s = ChainSystem(4, 2.5)
    res = solve_cc(s.hamiltonian, s.basis, 2, eps=s.spin_hamiltonian.eps)
    act = ActiveSpace((2, 3))
    _, t_ext = partition_amplitudes(res.T, act)
    sigma = build_sigma_ext(t_ext, s.basis, act)
    U = exp_antisymmetric(sigma).data
    orth = np.max(np.abs(U @ U.T - np.eye(len(U))))
    checks.append(("exp(sigma) orthogonal", orth < 1e-10, f"{orth:.1e}"))
    Hbar = transform_exact(s.hamiltonian, sigma)
    dev = np.max(np.abs(np.linalg.eigvalsh(Hbar.data) - np.linalg.eigvalsh(s.hamiltonian.data)))
    checks.append(("exact transform isospectral", dev < 1e-9, f"{dev:.1e}"))
    e_ducc = ground_state(project_cas(Hbar, act)).energy
    e_fci = lowest_eigenvalue(s.hamiltonian)
    checks.append(("DUCC energy above FCI", e_ducc >= e_fci - 1e-12, f"{e_ducc - e_fci:.2e}"))

    heff = project_cas(Hbar, act)
    phi = reference_vector(heff)
    e0, _ = pds_energy(compute_moments(heff, phi, 2))
    shifted = SectorMatrix(heff.sector, heff.matrix + 0.75 * np.eye(heff.dim))
    e1, _ = pds_energy(compute_moments(shifted.data, phi, 2))
    shift_dev = abs(e1 - e0 - 0.75)
    checks.append(("PDS shift covariance", shift_dev < 1e-9, f"{shift_dev:.1e}"))

    ok = all(c[1] for c in checks)
    if verbose:
        for name, passed, detail in checks:
            print(f"{'PASS' if passed else 'FAIL'}  {name}  ({detail})")
    return ok
