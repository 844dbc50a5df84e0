"""Binary and text formats for sector matrices and effective Hamiltonians.

Matrix file layout (little endian):

    int64 M, int64 n_alpha, int64 n_beta, int64 dim
    float64[dim * dim] row-major payload

An effective Hamiltonian is written as such a matrix file plus a text
sidecar with the active orbitals, the sector positions of the CAS
determinants and their occupation strings (n_M ... n_1).
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .ccsolver import ActiveSpace
from .downfold import EffectiveHamiltonian
from .fockspace import SectorBasis, SectorMatrix, det_to_string

__all__ = [
    "HEADER_BYTES",
    "write_matrix",
    "read_matrix",
    "save_sector_matrix",
    "load_sector_matrix",
    "export_heff",
    "load_heff",
]

HEADER_BYTES = 32
_HEADER = np.dtype("<i8")
_PAYLOAD = np.dtype("<f8")


def write_matrix(path, matrix: np.ndarray, M: int, n_alpha: int, n_beta: int) -> None:
    A = np.ascontiguousarray(matrix, dtype=_PAYLOAD)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    with open(path, "wb") as fh:
        fh.write(np.array([M, n_alpha, n_beta, A.shape[0]], dtype=_HEADER).tobytes())
        fh.write(A.tobytes(order="C"))


def read_matrix(path) -> tuple[np.ndarray, tuple[int, int, int]]:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_BYTES:
        raise ValueError(f"{path}: truncated header")
    M, na, nb, dim = (int(x) for x in np.frombuffer(raw[:HEADER_BYTES], dtype=_HEADER))
    expected = HEADER_BYTES + dim * dim * _PAYLOAD.itemsize
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for dimension {dim}, found {len(raw)}")
    data = np.frombuffer(raw[HEADER_BYTES:], dtype=_PAYLOAD).reshape(dim, dim).copy()
    return data, (M, na, nb)


def save_sector_matrix(path, mat: SectorMatrix) -> None:
    b = mat.basis
    if not isinstance(b, SectorBasis):
        raise ValueError("only sector matrices carry the (M, n_alpha, n_beta) header")
    write_matrix(path, mat.dense(), b.M, b.n_alpha, b.n_beta)


def load_sector_matrix(path) -> SectorMatrix:
    data, (M, na, nb) = read_matrix(path)
    basis = SectorBasis(M, na, nb)
    if len(basis) != data.shape[0]:
        raise ValueError(f"{path}: dimension {data.shape[0]} does not match sector ({M}, {na}, {nb})")
    return SectorMatrix(basis, data)


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".txt")


def export_heff(heff: EffectiveHamiltonian, path) -> tuple[Path, Path]:
    """Write ``path`` (binary) and ``path.txt`` (CAS determinant list)."""
    path = Path(path)
    s = heff.sector
    write_matrix(path, heff.matrix, s.M, s.n_alpha, s.n_beta)
    lines = [
        "# active " + " ".join(str(k) for k in heff.act.active_spatial),
        f"# dim {heff.dim}",
    ]
    for pos, det in zip(heff.cas_index, heff.cas_dets):
        lines.append(f"{int(pos)} {det_to_string(int(det), s.M)}")
    side = _sidecar(path)
    side.write_text("\n".join(lines) + "\n")
    return path, side


def load_heff(path) -> EffectiveHamiltonian:
    path = Path(path)
    data, (M, na, nb) = read_matrix(path)
    act = None
    idx = []
    for line in _sidecar(path).read_text().splitlines():
        if line.startswith("# active"):
            act = ActiveSpace(tuple(int(x) for x in line.split()[2:]))
        elif line and not line.startswith("#"):
            idx.append(int(line.split()[0]))
    if act is None or len(idx) != data.shape[0]:
        raise ValueError(f"{_sidecar(path)}: inconsistent sidecar")
    return EffectiveHamiltonian(act, SectorBasis(M, na, nb), np.array(idx, dtype=np.int64), data)
