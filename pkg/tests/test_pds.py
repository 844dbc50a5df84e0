import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from duccfold.ccsolver import ActiveSpace
from duccfold.downfold import ground_state
from duccfold.errors import DegenerateMomentsError, RootFailureError
from duccfold.pds import MomentVector, compute_moments, pds_energy, reference_vector

ACT6 = ActiveSpace((2, 3, 4, 5))


def _ritz(H, phi, K):
    """Ritz values of H in span{phi, H phi, ..., H^(K-1) phi}."""
    V = [phi / np.linalg.norm(phi)]
    for _ in range(K - 1):
        V.append(H @ V[-1])
    Q, _ = np.linalg.qr(np.array(V).T)
    return np.linalg.eigvalsh(Q.T @ H @ Q)


def _random_sym(n, seed):
    A = np.random.default_rng(seed).normal(size=(n, n))
    return A + A.T


@pytest.fixture(scope="module")
def heff6(h6_20):
    return h6_20.effective_hamiltonian(h6_20.cc(4), ACT6)


@pytest.fixture(scope="module")
def heff6_30(h6_30):
    return h6_30.effective_hamiltonian(h6_30.cc(4), ACT6)


def test_two_by_two_eigenvector():
    H = np.array([[1.0, 0.4], [0.4, -0.5]])
    w, v = np.linalg.eigh(H)
    # any non-eigenvector trial state with K = 2 spans the whole space
    e, roots = pds_energy(compute_moments(H, np.array([1.0, 0.3]), 2))
    assert e == pytest.approx(w[0], abs=1e-12)
    np.testing.assert_allclose(roots, w, atol=1e-12)
    # K = 1 with the exact eigenvector returns that eigenvalue
    e1, _ = pds_energy(compute_moments(H, v[:, 0], 1))
    assert e1 == pytest.approx(w[0], abs=1e-14)


def test_first_moment_and_variance(h6_20):
    bare = h6_20.bare_cas(ACT6)
    phi = reference_vector(bare)
    mom = compute_moments(bare, phi, 2, shift=0.0)
    assert mom.m[0] == 1.0
    assert mom.m[1] == pytest.approx(h6_20.orbitals.E_HF, abs=1e-10)
    assert mom.m[2] - mom.m[1] ** 2 >= 0
    # K = 1 is the expectation value
    assert pds_energy(compute_moments(bare, phi, 1))[0] == pytest.approx(h6_20.orbitals.E_HF, abs=1e-10)


def test_eigenvector_moments_are_powers(heff6):
    sol = ground_state(heff6)
    mom = compute_moments(heff6, sol.vector, 3, shift=0.0)
    np.testing.assert_allclose(mom.m, sol.energy ** np.arange(6), rtol=1e-11)
    # the Hankel system is singular for an exact eigenvector beyond K = 1
    with pytest.raises(DegenerateMomentsError):
        pds_energy(compute_moments(heff6, sol.vector, 2))


@pytest.mark.parametrize("K", [1, 2, 3, 4])
@pytest.mark.parametrize("seed", [0, 1])
def test_roots_are_krylov_ritz_values(K, seed):
    H = _random_sym(12, seed)
    phi = np.random.default_rng(seed + 100).normal(size=12)
    e, roots = pds_energy(compute_moments(H, phi, K))
    np.testing.assert_allclose(roots, _ritz(H, phi, K), atol=1e-9)
    assert e >= np.linalg.eigvalsh(H)[0] - 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), c=st.floats(-5.0, 5.0), K=st.integers(1, 4))
def test_shift_covariance(seed, c, K):
    H = _random_sym(10, seed)
    phi = np.random.default_rng(seed).normal(size=10)
    _, r0 = pds_energy(compute_moments(H, phi, K))
    _, r1 = pds_energy(compute_moments(H + c * np.eye(10), phi, K))
    np.testing.assert_allclose(np.array(r1) - np.array(r0), c, atol=1e-9)


@pytest.mark.parametrize("kind", ["hf", "uniform", "det:5", "det:17"])
def test_upper_bound_and_order_improvement(heff6, kind):
    phi = reference_vector(heff6, kind)
    e_min = ground_state(heff6).energy
    energies = [pds_energy(compute_moments(heff6, phi, K, label=kind))[0] for K in (1, 2, 3, 4)]
    assert all(e >= e_min - 1e-12 for e in energies)
    assert energies == sorted(energies, reverse=True)


@pytest.mark.parametrize("K, e20, e30", [(3, -3.214888, -2.953067), (4, -3.217234, -2.956712)])
def test_h6_table_values(heff6, heff6_30, K, e20, e30):
    for heff, ref in ((heff6, e20), (heff6_30, e30)):
        e, _ = pds_energy(compute_moments(heff, reference_vector(heff), K))
        assert e == pytest.approx(ref, abs=2e-6)


def test_reference_vectors(heff6):
    assert reference_vector(heff6)[0] == 1.0
    assert np.linalg.norm(reference_vector(heff6, "uniform")) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        reference_vector(heff6, "det:36")
    with pytest.raises(ValueError):
        reference_vector(heff6, "random")


def test_errors():
    H = np.diag([1.0, 2.0])
    with pytest.raises(ValueError):
        compute_moments(H, np.zeros(2), 2)
    with pytest.raises(ValueError):
        compute_moments(H, np.ones(2), 0)
    with pytest.raises(DegenerateMomentsError):
        pds_energy(compute_moments(H, np.array([1.0, 0.0]), 2))
    # negative second moment (impossible for a real state) gives E^2 + 1 = 0
    with pytest.raises(RootFailureError):
        pds_energy(MomentVector(K=2, m=np.array([1.0, 0.0, -1.0, 0.0])))
