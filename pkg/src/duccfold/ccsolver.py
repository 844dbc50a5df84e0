"""Single-reference coupled cluster at arbitrary excitation rank.

The similarity-transformed Hamiltonian is never expanded in commutators:
exp(T) and exp(-T) act exactly on vectors through their terminating power
series, so CCSD, CCSDT and CCSDTQ share one code path and differ only in
the excitation manifold.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError
from .fockspace import SectorBasis, SectorMatrix, excitation_structure, exp_nilpotent_apply

__all__ = [
    "ExcitationSignature",
    "ClusterOperator",
    "ActiveSpace",
    "CCResult",
    "enumerate_manifold",
    "solve_cc",
    "cc_residuals",
    "partition_amplitudes",
    "dump_amplitudes",
    "load_amplitudes",
]

log = logging.getLogger(__name__)

RANK_LABELS = {2: "SD", 3: "SDT", 4: "SDTQ"}


@dataclass(frozen=True, order=True)
class ExcitationSignature:
    """Excitation of sorted 1-based spin-orbital ``holes`` into ``particles``."""

    holes: tuple[int, ...]
    particles: tuple[int, ...]

    def __post_init__(self):
        if len(self.holes) != len(self.particles):
            raise ValueError("holes and particles must have equal length")
        if len(set(self.holes)) != len(self.holes) or len(set(self.particles)) != len(self.particles):
            raise ValueError("repeated spin-orbital label in excitation")
        object.__setattr__(self, "holes", tuple(sorted(self.holes)))
        object.__setattr__(self, "particles", tuple(sorted(self.particles)))

    @property
    def rank(self) -> int:
        return len(self.holes)

    @property
    def labels(self) -> tuple[int, ...]:
        return self.holes + self.particles


@dataclass
class ClusterOperator:
    amplitudes: dict[ExcitationSignature, float] = field(default_factory=dict)
    max_rank: int = 0

    def __len__(self) -> int:
        return len(self.amplitudes)

    def __post_init__(self):
        for sig in self.amplitudes:
            if sig.rank > self.max_rank:
                raise ValueError(f"signature {sig} exceeds max_rank {self.max_rank}")


@dataclass(frozen=True)
class ActiveSpace:
    """Active spatial orbitals, 1-based."""

    active_spatial: tuple[int, ...]

    def __post_init__(self):
        orbs = tuple(sorted(set(int(k) for k in self.active_spatial)))
        if not orbs:
            raise ValueError("active space must not be empty")
        if orbs[0] < 1:
            raise ValueError("active orbitals are 1-based")
        object.__setattr__(self, "active_spatial", orbs)

    @property
    def spin_orbitals(self) -> frozenset[int]:
        return frozenset(lbl for k in self.active_spatial for lbl in (2 * k - 1, 2 * k))

    def occupied(self, n_occ: int) -> tuple[int, ...]:
        return tuple(k for k in self.active_spatial if k <= n_occ)

    def virtual(self, n_occ: int) -> tuple[int, ...]:
        return tuple(k for k in self.active_spatial if k > n_occ)

    def label(self) -> str:
        return "{" + ",".join(str(k) for k in self.active_spatial) + "}"


def _spin(label: int) -> int:
    return (label - 1) % 2


def enumerate_manifold(basis: SectorBasis, max_rank: int) -> list[ExcitationSignature]:
    """Spin-conserving excitations of the reference up to ``max_rank``.

    Ordered by rank, then holes, then particles.
    """
    ref = basis.reference
    occ = [i + 1 for i in range(basis.M) if (ref >> i) & 1]
    vir = [i + 1 for i in range(basis.M) if not (ref >> i) & 1]
    if max_rank > min(len(occ), len(vir)):
        raise ValueError(f"max_rank {max_rank} exceeds what {len(occ)} electrons in {basis.M} spin orbitals allow")
    out = []
    for k in range(1, max_rank + 1):
        for holes in combinations(occ, k):
            n_beta_h = sum(_spin(h) for h in holes)
            for parts in combinations(vir, k):
                if sum(_spin(p) for p in parts) == n_beta_h:
                    out.append(ExcitationSignature(holes, parts))
    return out


@dataclass
class CCResult:
    T: ClusterOperator
    energy: float
    converged: bool
    iterations: int
    max_residual: float


class _ClusterMatrix:
    """Fixed sparsity pattern of T over the sector; values refreshed per step."""

    def __init__(self, sigs: Sequence[ExcitationSignature], basis: SectorBasis):
        rows, cols, ph, which = excitation_structure(sigs, basis)
        n = len(basis)
        tag = np.arange(len(rows), dtype=float)
        mat = sp.csr_matrix((tag, (rows, cols)), shape=(n, n))
        if mat.nnz != len(rows):
            raise RuntimeError("excitation pattern has coinciding entries")
        perm = mat.data.astype(np.int64)
        self.matrix = mat
        self.phase = ph[perm].astype(float)
        self.which = which[perm]
        # position and sign of tau_mu |ref> for each signature
        on_ref = cols == 0
        self.target = np.empty(len(sigs), dtype=np.int64)
        self.ref_phase = np.empty(len(sigs))
        self.target[which[on_ref]] = rows[on_ref]
        self.ref_phase[which[on_ref]] = ph[on_ref]

    def set(self, t: np.ndarray) -> sp.csr_matrix:
        self.matrix.data = self.phase * t[self.which]
        return self.matrix


def _transformed_ref(H: np.ndarray, Tm, n: int) -> np.ndarray:
    ref = np.zeros(n)
    ref[0] = 1.0
    psi = exp_nilpotent_apply(Tm, ref)
    return exp_nilpotent_apply(Tm, H @ psi, sign=-1.0)


def cc_residuals(H: SectorMatrix, basis: SectorBasis, T: ClusterOperator) -> tuple[np.ndarray, float]:
    """Residuals <mu| exp(-T) H exp(T) |ref> for every amplitude in T, and the energy.

    Builds everything from scratch; used to check converged solutions.
    """
    sigs = list(T.amplitudes)
    cm = _ClusterMatrix(sigs, basis)
    t = np.array([T.amplitudes[s] for s in sigs])
    x = _transformed_ref(H.data, cm.set(t), len(basis))
    return cm.ref_phase * x[cm.target], float(x[0])


def solve_cc(
    H: SectorMatrix,
    basis: SectorBasis,
    max_rank: int,
    conv: float = 1e-9,
    max_iter: int = 500,
    eps: np.ndarray | None = None,
    diis_depth: int = 8,
    denominator_floor: float = 0.05,
    raise_on_failure: bool = True,
) -> CCResult:
    """Solve the CC amplitude equations on the exact sector Hamiltonian.

    Parameters
    ----------
    H : SectorMatrix
        Dense Hamiltonian over ``basis`` (nuclear repulsion included).
    max_rank : int
        2 for CCSD, 3 for CCSDT, 4 for CCSDTQ.
    eps : array, optional
        Spin-orbital energies (1-based label ``i`` at ``eps[i - 1]``) for
        the Moller-Plesset denominators. Without them, diagonal differences
        of H stand in.

    Returns
    -------
    CCResult
        Amplitudes and the total energy <ref| exp(-T) H exp(T) |ref>.
    """
    sigs = enumerate_manifold(basis, max_rank)
    n = len(basis)
    Hd = H.dense()
    if not sigs:
        return CCResult(ClusterOperator({}, max_rank), float(Hd[0, 0]), True, 0, 0.0)
    cm = _ClusterMatrix(sigs, basis)

    if eps is not None:
        eps = np.asarray(eps, dtype=float)
        delta = np.array([eps[np.array(s.particles) - 1].sum() - eps[np.array(s.holes) - 1].sum() for s in sigs])
    else:
        delta = np.diag(Hd)[cm.target] - Hd[0, 0]
    delta = np.where(delta < denominator_floor, denominator_floor, delta)

    ranks = np.array([s.rank for s in sigs])
    t = np.where(ranks == 2, -cm.ref_phase * Hd[cm.target, 0] / delta, 0.0)

    vecs: list[np.ndarray] = []
    errs: list[np.ndarray] = []
    rmax = np.inf
    energy = float(Hd[0, 0])
    for it in range(1, max_iter + 1):
        x = _transformed_ref(Hd, cm.set(t), n)
        energy = float(x[0])
        r = cm.ref_phase * x[cm.target]
        rmax = float(np.max(np.abs(r)))
        if not np.isfinite(rmax) or rmax > 1e3:
            raise ConvergenceError(f"CC rank {max_rank} diverged at iteration {it}", last_value=rmax, iterations=it)
        log.debug("CC rank %d iter %3d  E = %.12f  max|r| = %.3e", max_rank, it, energy, rmax)
        if rmax < conv:
            break
        t_new = t - r / delta
        vecs.append(t_new)
        errs.append(t_new - t)
        if len(vecs) > diis_depth:
            vecs.pop(0)
            errs.pop(0)
        t = _diis(vecs, errs) if len(vecs) > 2 else t_new
    else:
        if raise_on_failure:
            raise ConvergenceError(
                f"CC rank {max_rank} not converged in {max_iter} iterations (max|r| = {rmax:.2e})",
                last_value=rmax,
                iterations=max_iter,
            )
        return CCResult(ClusterOperator(dict(zip(sigs, t.tolist())), max_rank), energy, False, max_iter, rmax)

    T = ClusterOperator(dict(zip(sigs, t.tolist())), max_rank)
    return CCResult(T, energy, True, it, rmax)


def _diis(vecs, errs) -> np.ndarray:
    m = len(vecs)
    E = np.array(errs)
    B = np.empty((m + 1, m + 1))
    B[:m, :m] = E @ E.T
    B[m, :] = -1.0
    B[:, m] = -1.0
    B[m, m] = 0.0
    rhs = np.zeros(m + 1)
    rhs[m] = -1.0
    c = np.linalg.lstsq(B, rhs, rcond=None)[0][:m]
    return c @ np.array(vecs)


def partition_amplitudes(T: ClusterOperator, act: ActiveSpace) -> tuple[ClusterOperator, ClusterOperator]:
    """Split T into all-active (internal) and external amplitudes."""
    if act is None or not act.active_spatial:
        raise ValueError("active space must not be empty")
    active = act.spin_orbitals
    t_int, t_ext = {}, {}
    for sig, val in T.amplitudes.items():
        if all(lbl in active for lbl in sig.labels):
            t_int[sig] = val
        else:
            t_ext[sig] = val
    return ClusterOperator(t_int, T.max_rank), ClusterOperator(t_ext, T.max_rank)


def dump_amplitudes(T: ClusterOperator, path) -> None:
    """One line per amplitude: ``rank  h1..hk  p1..pk  value``."""
    lines = []
    for sig in sorted(T.amplitudes):
        val = T.amplitudes[sig]
        fields = [str(sig.rank), *map(str, sig.holes), *map(str, sig.particles), f"{val:.17g}"]
        lines.append("  ".join(fields))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_amplitudes(path, max_rank: int | None = None) -> ClusterOperator:
    amps = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        try:
            k = int(parts[0])
            if len(parts) != 2 * k + 2:
                raise ValueError
            holes = tuple(int(x) for x in parts[1 : k + 1])
            parts_ = tuple(int(x) for x in parts[k + 1 : 2 * k + 1])
            val = float(parts[-1])
        except (ValueError, IndexError):
            raise ValueError(f"{path}:{lineno}: malformed amplitude line") from None
        amps[ExcitationSignature(holes, parts_)] = val
    rank = max_rank if max_rank is not None else max((s.rank for s in amps), default=0)
    return ClusterOperator(amps, rank)

