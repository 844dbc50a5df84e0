"""Exact-matrix coupled-cluster downfolding for small hydrogen chains."""
from .ccsolver import ActiveSpace, ClusterOperator, ExcitationSignature, partition_amplitudes, solve_cc
from .downfold import build_sigma_ext, downfold, ground_state, project_cas, transform_bch, transform_exact
from .experiment import ChainSystem
from .fockspace import SectorMatrix, enumerate_sector, lower_cluster, lower_hamiltonian
from .molint import build_chain, compute_integrals, sto3g_basis
from .pds import compute_moments, pds_energy
from .scf import run_rhf, to_spin_orbitals

__version__ = "0.1.0"
