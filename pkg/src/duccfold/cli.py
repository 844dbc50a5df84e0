"""Command line interface: ``duccfold run|preset|export|selftest``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .ccsolver import ActiveSpace
from .experiment import (
    ChainSystem,
    ConfigError,
    PRESETS,
    parse_config,
    preset_configs,
    run_experiment,
    with_overrides,
    write_results,
)
from .io import export_heff


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workers", type=int, default=None, help="concurrent geometries")
    p.add_argument("--tol", type=float, default=None, help="CC residual tolerance (Hartree)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--no-cache", action="store_true", help="do not read or write cached amplitudes")
    p.add_argument("--export-heff", action="store_true", help="write .heff files for every DUCC job")
    p.add_argument("--pds-reference", default=None, help="hf, uniform or det:<i>")
    p.add_argument("--timings", action="store_true", help="record wall times (output no longer reproducible)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="duccfold", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a config file")
    p.add_argument("config")
    _common(p)

    p = sub.add_parser("preset", help="regenerate one of the benchmark tables")
    p.add_argument("name", choices=sorted(PRESETS))
    _common(p)

    p = sub.add_parser("export", help="write one effective Hamiltonian")
    p.add_argument("--atoms", type=int, required=True)
    p.add_argument("--spacing", type=float, required=True)
    p.add_argument("--rank", type=int, default=4, choices=(2, 3, 4))
    p.add_argument("--active", required=True, help="comma-separated 1-based spatial orbitals")
    p.add_argument("--transform", default="exact", help="exact or bch:<max_r>")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--output", "-o", required=True, help="path of the .heff file")

    sub.add_parser("selftest", help="invariant checks on H2/H4")
    return ap


def _run_configs(configs, args, default_out: str) -> int:
    rows = []
    out = Path(args.out or default_out)
    for cfg in configs:
        cache = None if args.no_cache else Path(cfg.cache) if cfg.cache else out / "cache"
        cfg = with_overrides(
            cfg,
            cc_conv=args.tol,
            workers=args.workers,
            export_heff=True if args.export_heff else None,
            pds_reference=args.pds_reference,
        )
        rows.extend(run_experiment(cfg, out_dir=out, cache_dir=cache))
    csv_path, txt_path = write_results(rows, out, timings=args.timings)
    sys.stdout.write(txt_path.read_text())
    print(f"wrote {csv_path} and {txt_path}")
    failed = [r for r in rows if r.converged is False]
    return 0 if not failed else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = parse_config(args.config)
            return _run_configs([cfg], args, cfg.out)
        if args.command == "preset":
            return _run_configs(preset_configs(args.name), args, f"results/{args.name}")
        if args.command == "export":
            act = ActiveSpace(tuple(int(x) for x in args.active.split(",")))
            system = ChainSystem(args.atoms, args.spacing)
            res = system.cc(args.rank, conv=args.tol)
            heff = system.effective_hamiltonian(res, act, args.transform)
            path, side = export_heff(heff, args.output)
            print(f"wrote {path} ({heff.dim}x{heff.dim}) and {side}")
            return 0 if res.converged else 1
        if args.command == "selftest":
            from .selftest import run_selftest

            return 0 if run_selftest() else 1
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
