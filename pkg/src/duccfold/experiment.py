"""Experiment configuration, the per-geometry pipeline, and table presets.

A config file is flat ``key = value`` text::

    # H6 chain, CC and exact downfolding
    system = 6
    spacings = 1.5, 2.0, 3.0
    cc_ranks = 2, 3, 4
    active_spaces = {2,3,4,5}
    transforms = exact, bch:2
    solvers = diag, pds:3

Lists are comma separated; active spaces are brace literals of 1-based
spatial orbitals.
"""
from __future__ import annotations

import csv
import hashlib
import io
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .ccsolver import RANK_LABELS, ActiveSpace, CCResult, dump_amplitudes, load_amplitudes, partition_amplitudes, solve_cc
from .downfold import EffectiveHamiltonian, build_sigma_ext, downfold, ground_state, lowest_eigenvalue, project_cas
from .errors import ConvergenceError, DegenerateMomentsError, RootFailureError
from .fockspace import SectorMatrix, enumerate_sector, lower_hamiltonian
from .io import export_heff
from .molint import build_chain, compute_integrals, sto3g_basis
from .pds import compute_moments, pds_energy, reference_vector
from .scf import run_rhf, to_spin_orbitals

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ResultRow",
    "ChainSystem",
    "parse_config",
    "parse_config_text",
    "run_experiment",
    "PRESETS",
    "preset_configs",
    "write_results",
    "format_csv",
    "format_table",
]

log = logging.getLogger(__name__)

METHOD_FAMILIES = ("hf", "fci", "cc", "active-fci", "ducc", "casscf")
OUT_OF_SCOPE = "n/a - out of scope"


class ConfigError(ValueError):
    def __init__(self, message: str, lineno: int | None = None, source: str = "<config>"):
        where = f"{source}:{lineno}: " if lineno is not None else f"{source}: "
        super().__init__(where + message)
        self.lineno = lineno


@dataclass(frozen=True)
class ExperimentConfig:
    system: int
    spacings: tuple[float, ...]
    basis: str = "sto-3g"
    cc_ranks: tuple[int, ...] = ()
    active_spaces: tuple[ActiveSpace, ...] = ()
    transforms: tuple[str, ...] = ("exact",)
    solvers: tuple[str, ...] = ("diag",)
    methods: tuple[str, ...] = ("fci", "cc", "ducc")
    pds_reference: str = "hf"
    export_heff: bool = False
    out: str = "results"
    cache: str | None = None
    cc_conv: float = 1e-9
    cc_max_iter: int = 500
    scf_e_tol: float = 1e-10
    scf_d_tol: float = 1e-8
    workers: int = 1
    name: str = "run"

    @property
    def system_label(self) -> str:
        return f"H{self.system}"


@dataclass
class ResultRow:
    system: str
    R: float
    method: str
    energy: float | None
    converged: bool | None
    seconds: float = 0.0
    note: str = ""

    def energy_text(self) -> str:
        if self.energy is None:
            return self.note or "failed"
        return f"{self.energy:.6f}"


# --------------------------------------------------------------------------- parsing

_KEYS = {
    "system", "spacings", "basis", "cc_ranks", "active_spaces", "transforms", "solvers", "methods",
    "pds_reference", "export_heff", "out", "cache", "cc_conv", "cc_max_iter", "scf_e_tol",
    "scf_d_tol", "workers", "name",
}
_BRACES = re.compile(r"\{([^{}]*)\}")


def _split_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def parse_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config file not found", source=str(path))
    return parse_config_text(p.read_text(), source=str(path))


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", lineno, source)
        key, value = (s.strip() for s in stripped.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r} (first set on line {raw[key][1]})", lineno, source)
        raw[key] = (value, lineno)

    if "system" not in raw:
        raise ConfigError("missing required key 'system'", source=source)
    if "spacings" not in raw:
        raise ConfigError("missing required key 'spacings'", source=source)

    kw = {}

    def field_(key, conv):
        value, lineno = raw[key]
        try:
            kw[key] = conv(value)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno, source) from None

    field_("system", int)
    n = kw["system"]
    if n < 2 or n % 2:
        raise ConfigError(f"'system' must be an even atom count >= 2, got {n}", raw["system"][1], source)
    field_("spacings", lambda v: tuple(float(x) for x in _split_list(v)))
    if not kw["spacings"] or any(r <= 0 for r in kw["spacings"]):
        raise ConfigError("'spacings' must be positive Bohr values", raw["spacings"][1], source)

    for key, conv in [
        ("basis", lambda v: v.strip().lower()),
        ("cc_ranks", lambda v: tuple(int(x) for x in _split_list(v))),
        ("transforms", lambda v: tuple(_split_list(v))),
        ("solvers", lambda v: tuple(_split_list(v))),
        ("methods", lambda v: tuple(x.lower() for x in _split_list(v))),
        ("pds_reference", str.strip),
        ("export_heff", _parse_bool),
        ("out", str.strip),
        ("cache", str.strip),
        ("cc_conv", float),
        ("cc_max_iter", int),
        ("scf_e_tol", float),
        ("scf_d_tol", float),
        ("workers", int),
        ("name", str.strip),
    ]:
        if key in raw:
            field_(key, conv)

    if "active_spaces" in raw:
        value, lineno = raw["active_spaces"]
        groups = _BRACES.findall(value)
        if not groups or _BRACES.sub("", value).replace(",", "").strip():
            raise ConfigError("'active_spaces' must be brace literals like {2,3,4,5}", lineno, source)
        spaces = []
        for g in groups:
            try:
                orbs = tuple(int(x) for x in _split_list(g))
            except ValueError:
                raise ConfigError(f"'active_spaces': bad orbital list {{{g}}}", lineno, source) from None
            bad = [k for k in orbs if not 1 <= k <= n]
            if bad or not orbs:
                raise ConfigError(
                    f"'active_spaces': orbital {bad[0] if bad else '(none)'} outside 1..{n} for H{n}", lineno, source
                )
            spaces.append(ActiveSpace(orbs))
        kw["active_spaces"] = tuple(spaces)

    _validate(kw, raw, source)
    return ExperimentConfig(**kw)


def _validate(kw: dict, raw: dict, source: str) -> None:
    def err(key, msg):
        raise ConfigError(f"{key!r}: {msg}", raw[key][1] if key in raw else None, source)

    if kw.get("basis", "sto-3g") not in ("sto-3g", "sto3g"):
        err("basis", "only sto-3g is supported")
    n_el = kw["system"]
    for k in kw.get("cc_ranks", ()):
        if k not in (2, 3, 4):
            err("cc_ranks", f"rank {k} not in {{2,3,4}}")
        if k > min(n_el, 2 * n_el - n_el):
            err("cc_ranks", f"rank {k} too high for {n_el} electrons")
    for t in kw.get("transforms", ()):
        if t != "exact" and not re.fullmatch(r"bch:\d+", t):
            err("transforms", f"unknown transform {t!r} (exact or bch:<max_r>)")
    for s in kw.get("solvers", ()):
        if s not in ("diag", "pds:3", "pds:4") and not re.fullmatch(r"pds:\d+", s):
            err("solvers", f"unknown solver {s!r} (diag, pds:3, pds:4)")
    for m in kw.get("methods", ()):
        if m not in METHOD_FAMILIES:
            err("methods", f"unknown method family {m!r}")
    ref = kw.get("pds_reference", "hf")
    if ref not in ("hf", "uniform") and not re.fullmatch(r"det:\d+", ref):
        err("pds_reference", f"unknown reference {ref!r} (hf, uniform, det:<i>)")
    if kw.get("workers", 1) < 1:
        err("workers", "must be at least 1")
    methods = kw.get("methods", ExperimentConfig.methods)
    if ("ducc" in methods or "active-fci" in methods) and not kw.get("active_spaces"):
        raise ConfigError("'active_spaces' is required for ducc/active-fci rows", source=source)
    if "ducc" in methods and not kw.get("cc_ranks"):
        raise ConfigError("'cc_ranks' is required for ducc rows", source=source)


# --------------------------------------------------------------------------- pipeline


class ChainSystem:
    """All quantities for one hydrogen chain geometry, computed on demand."""

    def __init__(self, n_atoms: int, spacing: float, scf_e_tol: float = 1e-10, scf_d_tol: float = 1e-8):
        self.n_atoms = n_atoms
        self.spacing = spacing
        self._scf_tol = (scf_e_tol, scf_d_tol)
        self._cc: dict[tuple[int, float], CCResult] = {}

    @cached_property
    def integrals(self):
        geom = build_chain(self.n_atoms, self.spacing)
        return compute_integrals(geom, sto3g_basis(geom))

    @cached_property
    def orbitals(self):
        e_tol, d_tol = self._scf_tol
        return run_rhf(self.integrals, self.n_atoms, e_tol=e_tol, d_tol=d_tol)

    @cached_property
    def spin_hamiltonian(self):
        return to_spin_orbitals(self.integrals, self.orbitals)

    @cached_property
    def basis(self):
        n = self.n_atoms
        return enumerate_sector(2 * n, n // 2, n // 2)

    @cached_property
    def hamiltonian(self) -> SectorMatrix:
        return lower_hamiltonian(self.spin_hamiltonian, self.basis)

    @cached_property
    def fci_energy(self) -> float:
        return lowest_eigenvalue(self.hamiltonian)

    def cc(self, rank: int, conv: float = 1e-9, max_iter: int = 500, cache_dir: Path | None = None) -> CCResult:
        if (rank, conv) in self._cc:
            return self._cc[rank, conv]
        path = None
        if cache_dir is not None:
            key = f"H{self.n_atoms}|{self.spacing!r}|sto-3g|{rank}|{conv!r}"
            digest = hashlib.sha256(key.encode()).hexdigest()[:16]
            path = Path(cache_dir) / f"amps_H{self.n_atoms}_R{self.spacing:g}_r{rank}_{digest}.txt"
        if path is not None and path.exists():
            from .ccsolver import cc_residuals

            T = load_amplitudes(path, rank)
            r, energy = cc_residuals(self.hamiltonian, self.basis, T)
            rmax = float(np.max(np.abs(r))) if len(r) else 0.0
            res = CCResult(T, energy, rmax < conv, 0, rmax)
        else:
            res = solve_cc(
                self.hamiltonian, self.basis, rank, conv=conv, max_iter=max_iter, eps=self.spin_hamiltonian.eps
            )
            if path is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
                dump_amplitudes(res.T, path)
        self._cc[rank, conv] = res
        return res

    def bare_cas(self, act: ActiveSpace) -> EffectiveHamiltonian:
        return project_cas(self.hamiltonian, act)

    def effective_hamiltonian(self, cc: CCResult, act: ActiveSpace, transform: str = "exact") -> EffectiveHamiltonian:
        _, t_ext = partition_amplitudes(cc.T, act)
        sigma = build_sigma_ext(t_ext, self.basis)
        max_r = None if transform == "exact" else int(transform.split(":")[1])
        return downfold(self.hamiltonian, sigma, act, max_r=max_r)


def _ducc_label(rank: int, transform: str, solver: str) -> str:
    cc = RANK_LABELS[rank]
    if transform == "exact":
        base = f"DUCC-{cc}"
    else:
        base = f"Max_R={transform.split(':')[1]}/{cc}"
    if solver != "diag":
        base = f"PDS({solver.split(':')[1]})/{base}"
    return base


def _run_geometry(cfg: ExperimentConfig, R: float, out_dir: Path, cache_dir: Path | None) -> list[ResultRow]:
    rows: list[ResultRow] = []
    label = cfg.system_label
    sysm = ChainSystem(cfg.system, R, cfg.scf_e_tol, cfg.scf_d_tol)

    def record(method, fn):
        t0 = time.perf_counter()
        try:
            energy, converged = fn()
            note = ""
        except (ConvergenceError, DegenerateMomentsError, RootFailureError) as exc:
            log.warning("%s R=%.2f %s failed: %s", label, R, method, exc)
            energy, converged, note = None, False, type(exc).__name__
        rows.append(ResultRow(label, R, method, energy, converged, time.perf_counter() - t0, note))
        return energy

    methods = cfg.methods
    if "hf" in methods:
        record("HF", lambda: (sysm.orbitals.E_HF, True))
    if "casscf" in methods:
        rows.append(ResultRow(label, R, "CASSCF(4,4)", None, None, 0.0, OUT_OF_SCOPE))
    if "active-fci" in methods:
        for act in cfg.active_spaces:
            record(f"Active-space FCI {act.label()}", lambda act=act: (ground_state(sysm.bare_cas(act)).energy, True))
    if "fci" in methods:
        record("FCI", lambda: (sysm.fci_energy, True))

    cc_results: dict[int, CCResult | None] = {}
    for k in cfg.cc_ranks:
        def run_cc(k=k):
            res = sysm.cc(k, cfg.cc_conv, cfg.cc_max_iter, cache_dir)
            cc_results[k] = res
            return res.energy, res.converged

        if "cc" in methods:
            record(RANK_LABELS[k], run_cc)
        elif "ducc" in methods:
            try:
                run_cc()
            except ConvergenceError:
                cc_results[k] = None

    if "ducc" in methods:
        for k in cfg.cc_ranks:
            res = cc_results.get(k)
            for act in cfg.active_spaces:
                for tr in cfg.transforms:
                    heff = None if res is None else sysm.effective_hamiltonian(res, act, tr)
                    if heff is not None and cfg.export_heff:
                        tag = f"{label}_R{R:g}_{RANK_LABELS[k]}_{tr.replace(':', '')}_" + "-".join(
                            map(str, act.active_spatial)
                        )
                        export_heff(heff, out_dir / f"{tag}.heff")
                    for solver in cfg.solvers:
                        method = f"{_ducc_label(k, tr, solver)} {act.label()}"
                        if res is None:
                            rows.append(ResultRow(label, R, method, None, False, 0.0, "ConvergenceError"))
                            continue
                        record(method, lambda heff=heff, solver=solver, res=res: _solve(heff, solver, cfg, res))
    return rows


def _solve(heff: EffectiveHamiltonian, solver: str, cfg: ExperimentConfig, res: CCResult):
    if solver == "diag":
        return ground_state(heff).energy, res.converged
    K = int(solver.split(":")[1])
    phi = reference_vector(heff, cfg.pds_reference)
    energy, _ = pds_energy(compute_moments(heff, phi, K, label=cfg.pds_reference))
    return energy, res.converged


def run_experiment(cfg: ExperimentConfig, out_dir=None, cache_dir=None, workers: int | None = None) -> list[ResultRow]:
    """Every requested row for every spacing, in spacing order.

    ``cache_dir=None`` disables the amplitude cache.
    """
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cache = Path(cache_dir) if cache_dir is not None else None
    nworkers = workers or cfg.workers
    if nworkers > 1 and len(cfg.spacings) > 1:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            futures = [pool.submit(_run_geometry, cfg, R, out, cache) for R in cfg.spacings]
            # results are collected in submission order
            per_geom = [f.result() for f in futures]
    else:
        per_geom = [_run_geometry(cfg, R, out, cache) for R in cfg.spacings]
    return [row for rows in per_geom for row in rows]


# --------------------------------------------------------------------------- output


def format_csv(rows: list[ResultRow], timings: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["system", "R", "method", "energy", "converged", "seconds"])
    for r in rows:
        conv = "n/a" if r.converged is None else str(bool(r.converged)).lower()
        w.writerow([r.system, f"{r.R:.2f}", r.method, r.energy_text(), conv, f"{r.seconds:.3f}" if timings else "-"])
    return buf.getvalue()


def format_table(rows: list[ResultRow], timings: bool = False) -> str:
    header = ["system", "R", "method", "energy", "converged", "seconds"]
    body = [
        [
            r.system,
            f"{r.R:.2f}",
            r.method,
            r.energy_text(),
            "n/a" if r.converged is None else ("yes" if r.converged else "NO"),
            f"{r.seconds:.2f}" if timings else "-",
        ]
        for r in rows
    ]
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(c.rjust(w) if i in (1, 3) else c.ljust(w) for i, (c, w) in enumerate(zip(row, widths))))
    return "\n".join(lines) + "\n"


def write_results(rows: list[ResultRow], out_dir, timings: bool = False) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    txt_path = out / "results.txt"
    csv_path.write_text(format_csv(rows, timings))
    txt_path.write_text(format_table(rows, timings))
    return csv_path, txt_path


# --------------------------------------------------------------------------- presets

_ALL_R = "1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0"

PRESETS: dict[str, list[str]] = {
    "table1": [
        f"""name = table1
system = 6
spacings = {_ALL_R}
cc_ranks = 2, 3, 4
active_spaces = {{2,3,4,5}}
methods = fci, cc, ducc
"""
    ],
    "table2": [
        f"""name = table2
system = 8
spacings = {_ALL_R}
cc_ranks = 2, 3, 4
active_spaces = {{3,4,5,6}}
methods = fci, cc, ducc
"""
    ],
    "table3": [
        """name = table3
system = 8
spacings = 2.0
cc_ranks = 4
active_spaces = {3,4,5,6}, {2,3,6,7}, {1,2,7,8}
methods = fci, ducc
"""
    ],
    "table4": [
        """name = table4
system = 8
spacings = 2.0, 2.5, 3.0
cc_ranks = 4
active_spaces = {2,3,4,5,6,7}
methods = fci, cc, ducc
"""
    ],
    "table5": [
        """name = table5
system = 6
spacings = 2.0, 3.0
cc_ranks = 4
active_spaces = {2,3,4,5}
solvers = diag, pds:3, pds:4
methods = hf, casscf, active-fci, fci, ducc
""",
        # the stated {4,5,6,7} and the HOMO-1..LUMO+1 space {3,4,5,6} side by side
        """name = table5
system = 8
spacings = 2.0, 3.0
cc_ranks = 4
active_spaces = {3,4,5,6}, {4,5,6,7}
solvers = diag, pds:3, pds:4
methods = hf, casscf, active-fci, fci, ducc
""",
    ],
    "table6": [
        f"""name = table6
system = {n}
spacings = 2.0, 3.0
cc_ranks = 4
active_spaces = {act}
transforms = bch:0, bch:1, bch:2, bch:3, bch:4, bch:5, bch:10, exact
methods = fci, ducc
"""
        for n, act in ((6, "{2,3,4,5}"), (8, "{3,4,5,6}"))
    ],
}


def preset_configs(name: str) -> list[ExperimentConfig]:
    try:
        texts = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return [parse_config_text(t, source=f"preset:{name}") for t in texts]


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
