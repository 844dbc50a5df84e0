import numpy as np
import pytest

from duccfold.experiment import ChainSystem
from duccfold.molint import IntegralTables
from duccfold.scf import MolecularOrbitals, to_spin_orbitals


@pytest.fixture(scope="session")
def h2():
    return ChainSystem(2, 1.4)


@pytest.fixture(scope="session")
def h4():
    return ChainSystem(4, 1.8)


@pytest.fixture(scope="session")
def h6_20():
    return ChainSystem(6, 2.0)


@pytest.fixture(scope="session")
def h6_30():
    return ChainSystem(6, 3.0)


def random_spin_hamiltonian(n: int, seed: int):
    """Spin-orbital Hamiltonian from random spatial integrals with the
    symmetries of real orbitals (identity MO coefficients)."""
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(n, n))
    h = h + h.T
    eri = rng.normal(size=(n, n, n, n))
    perms = [(0, 1, 2, 3), (1, 0, 2, 3), (0, 1, 3, 2), (1, 0, 3, 2),
             (2, 3, 0, 1), (3, 2, 0, 1), (2, 3, 1, 0), (3, 2, 1, 0)]
    eri = sum(eri.transpose(p) for p in perms) / 8
    ints = IntegralTables(S=np.eye(n), Tkin=h, Vnuc=np.zeros((n, n)), ERI=eri, E_nn=0.3)
    mos = MolecularOrbitals(C=np.eye(n), eps=np.arange(n, dtype=float), E_HF=0.0, n_occ=n // 2)
    return to_spin_orbitals(ints, mos)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
