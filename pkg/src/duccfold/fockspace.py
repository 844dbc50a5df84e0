"""Occupation-number strings and exact matrix representations of operators.

A determinant is an integer whose bit ``i - 1`` is the occupation of spin
orbital ``i`` (1-based, as in the operator algebra). Spin orbital ``2k + 1``
is the alpha partner of spatial orbital ``k + 1`` and ``2k + 2`` its beta
partner.

Creation and annihilation on spin orbital ``i`` pick up the sign
(-1)**(number of occupied spin orbitals below ``i``). Operator strings are
written left to right and act right to left, exactly as in a product of
operators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .scf import SpinOrbitalHamiltonian

__all__ = [
    "CREATE",
    "ANNIHILATE",
    "DeterminantBasis",
    "SectorBasis",
    "SectorMatrix",
    "enumerate_sector",
    "full_fock_basis",
    "apply_string",
    "apply_string_many",
    "excitation_string",
    "lower_terms",
    "lower_hamiltonian",
    "lower_cluster",
    "excitation_structure",
    "exp_nilpotent",
    "exp_nilpotent_apply",
    "exp_antisymmetric",
    "exp_antisymmetric_eig",
    "expm_antisymmetric_apply",
    "det_to_string",
    "excitation_level",
]

CREATE = "+"
ANNIHILATE = "-"

_KIND = {"+": True, "create": True, "-": False, "annihilate": False}

OpString = Sequence[tuple[str, int]]


def _parse_ops(ops: OpString) -> list[tuple[bool, int]]:
    parsed = []
    for kind, idx in ops:
        try:
            create = _KIND[kind]
        except KeyError:
            raise ValueError(f"unknown operator kind {kind!r}") from None
        if idx < 1:
            raise ValueError(f"spin-orbital indices are 1-based, got {idx}")
        parsed.append((create, idx - 1))
    return parsed


def det_to_string(det: int, M: int) -> str:
    """Occupation string written n_M ... n_1."""
    return format(int(det), f"0{M}b")


class DeterminantBasis:
    """Ordered list of determinants with a vectorized reverse lookup."""

    def __init__(self, M: int, dets: np.ndarray):
        self.M = int(M)
        self.dets = np.asarray(dets, dtype=np.int64)
        self.dets.flags.writeable = False
        order = np.argsort(self.dets, kind="stable")
        self._sorted = self.dets[order]
        self._order = order
        if len(self._sorted) > 1 and np.any(self._sorted[1:] == self._sorted[:-1]):
            raise ValueError("duplicate determinants in basis")

    def __len__(self) -> int:
        return len(self.dets)

    @property
    def dim(self) -> int:
        return len(self.dets)

    def find(self, targets) -> np.ndarray:
        """Positions of ``targets`` in the basis, -1 where absent."""
        t = np.asarray(targets, dtype=np.int64)
        pos = np.searchsorted(self._sorted, t)
        pos_c = np.minimum(pos, len(self._sorted) - 1)
        hit = self._sorted[pos_c] == t
        return np.where(hit, self._order[pos_c], -1)

    def index(self, det: int) -> int:
        i = int(self.find([det])[0])
        if i < 0:
            raise KeyError(f"determinant {det_to_string(det, self.M)} not in basis")
        return i


class SectorBasis(DeterminantBasis):
    """All determinants with fixed alpha and beta electron counts.

    Ordered alpha-major: by alpha string, then beta string, each string
    compared as the integer of its spatial occupations. The aufbau
    determinant is therefore first.
    """

    def __init__(self, M: int, n_alpha: int, n_beta: int):
        if M % 2:
            raise ValueError("M must be even (alpha/beta pairs)")
        n = M // 2
        if not (0 <= n_alpha <= n and 0 <= n_beta <= n):
            raise ValueError(f"electron counts ({n_alpha}, {n_beta}) out of range for {n} orbitals")
        self.n_alpha = n_alpha
        self.n_beta = n_beta
        a_str = _strings(n, n_alpha)
        b_str = _strings(n, n_beta)
        a_bits = _spread(a_str, 0)
        b_bits = _spread(b_str, 1)
        dets = (a_bits[:, None] | b_bits[None, :]).ravel()
        super().__init__(M, dets)

    @property
    def n_electrons(self) -> int:
        return self.n_alpha + self.n_beta

    @property
    def reference(self) -> int:
        return int(self.dets[0])


def _strings(n: int, k: int) -> np.ndarray:
    vals = [sum(1 << i for i in c) for c in combinations(range(n), k)]
    return np.array(sorted(vals), dtype=np.int64)


def _spread(strings: np.ndarray, spin: int) -> np.ndarray:
    out = np.zeros_like(strings)
    for k in range(63 // 2):
        out |= ((strings >> k) & 1) << (2 * k + spin)
    return out


def enumerate_sector(M: int, n_alpha: int, n_beta: int) -> SectorBasis:
    return SectorBasis(M, n_alpha, n_beta)


def full_fock_basis(M: int) -> DeterminantBasis:
    """Every occupation string on M spin orbitals, ordered by integer value."""
    if M > 20:
        raise ValueError("full Fock space is only materialized for small M")
    return DeterminantBasis(M, np.arange(2 ** M, dtype=np.int64))


def apply_string(det: int, ops: OpString) -> tuple[int, int] | None:
    """Apply an operator string to one determinant.

    Returns ``(new_det, phase)`` or ``None`` when the string annihilates
    the determinant (Pauli exclusion).
    """
    cur = int(det)
    phase = 1
    for create, bit in reversed(_parse_ops(ops)):
        occupied = (cur >> bit) & 1
        if occupied == create:
            return None
        if bin(cur & ((1 << bit) - 1)).count("1") & 1:
            phase = -phase
        cur ^= 1 << bit
    return cur, phase


def apply_string_many(dets: np.ndarray, ops: OpString):
    """Vectorized :func:`apply_string`.

    Returns ``(new_dets, phases, ok)`` where ``ok`` marks determinants the
    string does not annihilate.
    """
    return _apply_parsed(np.asarray(dets, dtype=np.int64), _parse_ops(ops))


def _apply_parsed(dets: np.ndarray, parsed: list[tuple[bool, int]]):
    cur = dets.copy()
    ok = np.ones(len(dets), dtype=bool)
    parity = np.zeros(len(dets), dtype=np.int64)
    for create, bit in reversed(parsed):
        occ = (cur >> bit) & 1
        ok &= occ == (0 if create else 1)
        parity += np.bitwise_count(cur & ((1 << bit) - 1))
        cur ^= 1 << bit
    phases = 1 - 2 * (parity & 1)
    return cur, phases, ok


def excitation_string(holes: Sequence[int], particles: Sequence[int]) -> list[tuple[str, int]]:
    """a+_{p1} ... a+_{pk} a_{hk} ... a_{h1} for sorted 1-based labels."""
    return [(CREATE, p) for p in particles] + [(ANNIHILATE, h) for h in reversed(list(holes))]


def excitation_level(det: int, ref: int) -> int:
    return bin(int(det) ^ int(ref)).count("1") // 2


@dataclass(frozen=True)
class SectorMatrix:
    """Matrix over a determinant basis.

    ``data`` is a dense ndarray, or a scipy sparse matrix for excitation
    operators whose dense form would be mostly zeros.
    """

    basis: DeterminantBasis
    data: Union[np.ndarray, sp.spmatrix]

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.data)

    def dense(self) -> np.ndarray:
        return self.data.toarray() if self.is_sparse else np.asarray(self.data)

    def with_data(self, data) -> "SectorMatrix":
        return SectorMatrix(self.basis, data)


def lower_terms(
    terms: Iterable[tuple[float, OpString]],
    basis: DeterminantBasis,
    target: DeterminantBasis | None = None,
) -> sp.csr_matrix:
    """Matrix of sum_k c_k * (operator string k) from ``basis`` into ``target``.

    ``target`` defaults to ``basis``; a string that maps a determinant
    outside ``target`` raises, since the operator then does not close on it.
    """
    target = basis if target is None else target
    rows, cols, vals = [], [], []
    col_idx = np.arange(len(basis))
    for coef, ops in terms:
        if coef == 0.0:
            continue
        new, ph, ok = _apply_parsed(basis.dets, _parse_ops(ops))
        if not np.any(ok):
            continue
        r = target.find(new[ok])
        if np.any(r < 0):
            raise ValueError(f"operator string {list(ops)} leaves the target basis")
        rows.append(r)
        cols.append(col_idx[ok])
        vals.append(coef * ph[ok])
    shape = (len(target), len(basis))
    if not rows:
        return sp.csr_matrix(shape)
    return sp.csr_matrix(
        (np.concatenate(vals).astype(float), (np.concatenate(rows), np.concatenate(cols))), shape=shape
    )


def hamiltonian_terms(hmo: SpinOrbitalHamiltonian, cutoff: float = 0.0):
    """Second-quantized H as operator strings (1-based labels).

    sum_pq h_pq a+_p a_q + sum_{p<q, r<s} <pq||rs> a+_p a+_q a_s a_r
    """
    M = hmo.M
    for p in range(M):
        for q in range(M):
            if abs(hmo.h[p, q]) > cutoff:
                yield hmo.h[p, q], ((CREATE, p + 1), (ANNIHILATE, q + 1))
    pairs = [(p, q) for p in range(M) for q in range(p + 1, M)]
    for p, q in pairs:
        for r, s in pairs:
            val = hmo.v[p, q, r, s]
            if abs(val) > cutoff:
                yield val, ((CREATE, p + 1), (CREATE, q + 1), (ANNIHILATE, s + 1), (ANNIHILATE, r + 1))


def lower_hamiltonian(hmo: SpinOrbitalHamiltonian, basis: DeterminantBasis) -> SectorMatrix:
    if hmo.M != basis.M:
        raise ValueError(f"Hamiltonian has {hmo.M} spin orbitals, basis has {basis.M}")
    mat = lower_terms(hamiltonian_terms(hmo), basis).toarray()
    mat[np.diag_indices_from(mat)] += hmo.E_nn
    # exact symmetry; the two triangles differ only by summation order
    return SectorMatrix(basis, 0.5 * (mat + mat.T))


def _check_signature(holes, particles, ref: int, M: int):
    for h in holes:
        if not 1 <= h <= M or not (ref >> (h - 1)) & 1:
            raise ValueError(f"hole {h} is not occupied in the reference")
    for p in particles:
        if not 1 <= p <= M or (ref >> (p - 1)) & 1:
            raise ValueError(f"particle {p} is occupied in the reference")


def excitation_structure(signatures: Sequence, basis: SectorBasis):
    """Sparsity pattern of sum_mu t_mu tau_mu over the basis.

    ``signatures`` are objects with ``holes`` and ``particles`` (1-based).
    Returns ``(rows, cols, phases, which)``: entry k of the operator matrix
    sits at (rows[k], cols[k]) and equals phases[k] * t[which[k]].
    """
    ref = basis.reference
    rows, cols, phases, which = [], [], [], []
    col_idx = np.arange(len(basis))
    for k, sig in enumerate(signatures):
        _check_signature(sig.holes, sig.particles, ref, basis.M)
        new, ph, ok = _apply_parsed(basis.dets, _parse_ops(excitation_string(sig.holes, sig.particles)))
        if not np.any(ok):
            continue
        r = basis.find(new[ok])
        if np.any(r < 0):
            raise ValueError(f"excitation {sig} does not conserve the sector")
        rows.append(r)
        cols.append(col_idx[ok])
        phases.append(ph[ok])
        which.append(np.full(int(ok.sum()), k, dtype=np.int64))
    if not rows:
        e = np.zeros(0, dtype=np.int64)
        return e, e, e, e
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(phases), np.concatenate(which)


def lower_cluster(T, basis: SectorBasis) -> SectorMatrix:
    """Matrix of a cluster operator (anything with an ``amplitudes`` mapping
    from signatures to values). Stored sparse."""
    sigs = list(T.amplitudes)
    amps = np.array([T.amplitudes[s] for s in sigs], dtype=float)
    rows, cols, ph, which = excitation_structure(sigs, basis)
    n = len(basis)
    data = sp.csr_matrix((ph * amps[which] if len(which) else np.zeros(0), (rows, cols)), shape=(n, n))
    return SectorMatrix(basis, data)


def _is_zero(x) -> bool:
    if sp.issparse(x):
        return x.count_nonzero() == 0
    return not np.any(x)


def exp_nilpotent(T: SectorMatrix) -> SectorMatrix:
    """Exact exp(T) for nilpotent T: the series stops at the first zero power."""
    n = T.dim
    A = T.data
    eye = sp.identity(n, format="csr") if sp.issparse(A) else np.eye(n)
    result = eye.copy()
    term = eye
    for k in range(1, T.basis.M + 2):
        term = (term @ A) / k
        if _is_zero(term):
            return T.with_data(result)
        result = result + term
    raise ValueError("power series did not terminate: operator is not nilpotent")


def exp_nilpotent_apply(A, v: np.ndarray, max_terms: int = 64, sign: float = 1.0) -> np.ndarray:
    """exp(sign * A) @ v for nilpotent A, summed until the term vanishes."""
    result = np.array(v, dtype=float, copy=True)
    term = result
    for k in range(1, max_terms + 1):
        term = sign * (A @ term) / k
        if not np.any(term):
            return result
        result = result + term
    raise ValueError("power series did not terminate: operator is not nilpotent")


def _check_antisymmetric(A, atol: float = 1e-12):
    if sp.issparse(A):
        dev = abs(A + A.T).max() if A.nnz else 0.0
    else:
        dev = np.max(np.abs(A + A.T)) if A.size else 0.0
    if dev > atol:
        raise ValueError(f"matrix is not antisymmetric (max |A + A^T| = {dev:.3e})")


def _norm1(A) -> float:
    if sp.issparse(A):
        return float(abs(A).sum(axis=0).max()) if A.nnz else 0.0
    return float(np.max(np.sum(np.abs(A), axis=0))) if A.size else 0.0


def exp_antisymmetric(A: SectorMatrix, tol: float = 1e-14) -> SectorMatrix:
    """Orthogonal exp(A) of an antisymmetric matrix by scaling and squaring.

    A is scaled by 2**-s so that its 1-norm is at most 1/2, the Taylor series
    is summed until the next term drops below ``tol``, and the result is
    squared s times.
    """
    _check_antisymmetric(A.data)
    X = A.dense()
    norm = _norm1(X)
    s = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0 else 0
    Xs = X / 2.0 ** s
    n = X.shape[0]
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 60):
        term = term @ Xs / k
        result += term
        if np.max(np.abs(term)) < tol:
            break
    for _ in range(s):
        result = result @ result
    return A.with_data(result)


def exp_antisymmetric_eig(A: SectorMatrix) -> SectorMatrix:
    """Same as :func:`exp_antisymmetric` via the eigenvectors of iA."""
    _check_antisymmetric(A.data)
    w, V = np.linalg.eigh(1j * A.dense())
    U = (V * np.exp(-1j * w)) @ V.conj().T
    return A.with_data(U.real)


def expm_antisymmetric_apply(A, V: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """exp(A) @ V without forming exp(A).

    Splits exp(A) into s steps of exp(A / s) with ||A / s||_1 <= 1 and sums
    each step's Taylor series until the term is below ``tol`` relative to
    the block. ``A`` may be sparse.
    """
    norm = _norm1(A)
    s = max(1, int(math.ceil(norm)))
    B = np.array(V, dtype=float, copy=True)
    for _ in range(s):
        term = B
        out = B.copy()
        scale = max(np.max(np.abs(B)), 1e-300)
        for k in range(1, 80):
            term = (A @ term) / (s * k)
            out += term
            if np.max(np.abs(term)) < tol * scale:
                break
        B = out
    return B
