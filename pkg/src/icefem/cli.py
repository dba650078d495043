"""Command-line entry point: ``icefem run|korn|report``."""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from pathlib import Path

from . import diagnostics as dg
from .io import write_csv
from .scenarios import build_mesh, load_config, load_record, override, run_scenario

log = logging.getLogger("icefem")


def _on_off(text: str) -> bool:
    low = text.lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _thread_limit():
    """Cap BLAS/OpenMP pools at ``ICEFEM_THREADS`` workers (no cap if unset)."""
    raw = os.environ.get("ICEFEM_THREADS")
    if not raw:
        return contextlib.nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise SystemExit(f"ICEFEM_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise SystemExit("ICEFEM_THREADS must be >= 1")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _config(args):
    cfg = load_config(args.config)
    return override(cfg, stabilize=args.stabilize, mesh_km=args.mesh_km, solver=args.solver)


def cmd_run(args) -> int:
    cfg = _config(args)
    out = Path(args.out) if args.out else Path(args.config).parent / (Path(args.config).stem + "_run")
    summary = run_scenario(cfg, out, progress_every=args.progress)
    sys.stdout.write(summary.to_text())
    if summary.diverged:
        log.error("run diverged: %s", summary.message)
        return 2
    return 0


def cmd_korn(args) -> int:
    cfg = _config(args)
    rows = []
    for level in range(args.levels):
        c = override(cfg, mesh_km=cfg.mesh_km / 2 ** level)
        mesh = build_mesh(c)
        ku = dg.estimate_korn_constant(mesh, stabilized=False).value
        ks = dg.estimate_korn_constant(mesh, stabilized=True).value
        rows.append((c.mesh_km * 1e3, ku, ks))
        print(f"h={c.mesh_km:g} km edges={mesh.n_edges} c_k_unstab={ku:.6g} c_k_stab={ks:.6g}")
    if args.out:
        write_csv(rows, args.out, ("h", "c_k_unstab", "c_k_stab"))
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    if not (run_dir / "config.txt").exists():
        log.error("%s is not a run directory (no config.txt)", run_dir)
        return 1
    cfg = load_config(run_dir / "config.txt")
    if not (run_dir / "record.npz").exists():
        log.error("%s has no record.npz; rerun with 'record = on'", run_dir)
        return 1
    rec = load_record(run_dir)
    mesh = build_mesh(cfg)
    c_k = args.c_k if args.c_k else dg.estimate_korn_constant(mesh, stabilized=cfg.stabilize).value
    c_p = args.c_p if args.c_p else dg.estimate_poincare_constant(mesh)
    try:
        rep = dg.theorem_bound_report(mesh, rec, c_k, c_p)
    except ValueError as exc:
        log.error("%s", exc)
        return 1
    write_csv(((name, value) for name, value in rep.rows()), run_dir / "bound_report.csv", ("term", "value"))
    for name, value in rep.rows():
        print(f"{name} = {value:.17g}")
    for note in rep.notes:
        print(f"# note: {note}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="icefem", description="Crouzeix-Raviart sea-ice dynamics experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def overrides(sp):
        sp.add_argument("config", help="flat key = value config file")
        sp.add_argument("--stabilize", type=_on_off, default=None, metavar="on|off")
        sp.add_argument("--mesh-km", type=float, default=None)
        sp.add_argument("--solver", choices=("vp", "evp", "mevp"), default=None)

    run = sub.add_parser("run", help="run a scenario")
    overrides(run)
    run.add_argument("--out", help="run directory (default: <config>_run)")
    run.add_argument("--progress", type=int, default=0, help="log every N steps")
    run.set_defaults(func=cmd_run)

    korn = sub.add_parser("korn", help="Korn constants on the scenario mesh and its refinements")
    overrides(korn)
    korn.add_argument("--levels", type=int, default=3)
    korn.add_argument("--out", help="CSV table (h, c_k_unstab, c_k_stab)")
    korn.set_defaults(func=cmd_korn)

    rep = sub.add_parser("report", help="energy-estimate terms of a recorded run")
    rep.add_argument("run_dir")
    rep.add_argument("--c-k", type=float, default=None)
    rep.add_argument("--c-p", type=float, default=None)
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    with _thread_limit():
        return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
