"""Command-line entry point.

    adiabaticity run <config> [--out DIR]
    adiabaticity sweep <config> [--members M] [--workers W] [--out DIR]
    adiabaticity preset <name> [--out DIR]
    adiabaticity selfcheck

Exit codes: 0 success, 1 configuration, 2 numerical, 3 file system.
Without ``--out`` results go to ``$ADIABATICITY_OUTPUT_ROOT/<name>``
(``./runs/<name>`` when the variable is unset).
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from . import __version__, selfcheck
from .config import (
    FORMAT_VERSION,
    RunConfig,
    default_output_root,
    load_config,
    parse_config,
    run_config,
    with_sweep_point,
)
from .errors import AdiabaticityError, ConfigError, NumericalError
from .output import (
    environment_info,
    summary_row,
    write_metadata,
    write_summary_csv,
    write_trajectory_csv,
)

PRESETS = ("fig1c", "fig1d", "trimer1", "trimer2", "trimer3", "trimer4", "fig4sweep")


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("adiabaticity.presets").joinpath(f"{name}.ini").read_text()


def load_preset(name: str) -> RunConfig:
    return parse_config(preset_text(name), source=f"preset:{name}")


def _out_dir(cfg: RunConfig, out) -> Path:
    if out is not None:
        return Path(out)
    if cfg.output_dir is not None:
        return Path(cfg.output_dir)
    return default_output_root() / cfg.name


def _run_metadata(cfg: RunConfig, record) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "config": cfg.echo(),
        "config_source": cfg.source,
        "seed": record.metadata.get("seed", cfg.seed),
        **environment_info(),
        "run": record.metadata,
        "columns_units": {
            "t": "dimensionless" if cfg.model_type == "three_level" else "atomic units of time",
            "X": "bohr",
        },
    }


def execute_run(cfg: RunConfig, out_dir: Path, seed=None):
    record = run_config(cfg, seed)
    write_trajectory_csv(record, out_dir / "trajectory.csv")
    write_metadata(_run_metadata(cfg, record), out_dir / "metadata.json")
    return record


def _member_job(args):
    cfg, sigma_E, alpha, seed, out_dir = args
    point = with_sweep_point(cfg, sigma_E, alpha)
    try:
        record = execute_run(point, out_dir, seed)
    except NumericalError as exc:
        return None, {"sigma_E": sigma_E, "alpha": alpha, "seed": seed, "error": type(exc).__name__, "message": str(exc)}
    return summary_row(sigma_E, alpha, seed, record), None


def execute_sweep(cfg: RunConfig, out_dir: Path, members=None, workers: int = 1):
    """Run every (sigma_E, alpha, seed) member and write ``summary.csv``.

    Member ``i`` uses seed ``root + i``. Failing members are skipped and
    listed in the sweep metadata.
    """
    if cfg.model_type != "aggregate" or cfg.sweep is None:
        raise ConfigError("sweep needs an aggregate config with a [sweep] section")
    members = cfg.ensemble if members is None else members
    if members < 1:
        raise ConfigError("--members must be >= 1")
    jobs = []
    for sigma_E, alpha in cfg.sweep.points():
        for i in range(members):
            seed = cfg.seed + i
            sub = out_dir / "members" / f"sigma{sigma_E:g}_alpha{alpha:g}_seed{seed}"
            jobs.append((cfg, sigma_E, alpha, seed, sub))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_member_job, jobs))
    else:
        results = [_member_job(j) for j in jobs]
    rows = [r for r, _ in results if r is not None]
    failures = [f for _, f in results if f is not None]
    write_summary_csv(rows, out_dir / "summary.csv")
    write_metadata(
        {
            "format_version": FORMAT_VERSION,
            "config": cfg.echo(),
            "config_source": cfg.source,
            "members_per_point": members,
            "seeds": [cfg.seed + i for i in range(members)],
            "n_members": len(jobs),
            "n_failed": len(failures),
            "failures": failures,
            **environment_info(),
        },
        out_dir / "metadata.json",
    )
    return rows, failures


def _report_run(record, out_dir):
    m = record.metadata
    print(
        f"wrote {out_dir}/trajectory.csv: {len(record.times)} rows, "
        f"T1={record.T1_series[-1]:.6g} T2={record.T2_series[-1]:.6g}, "
        f"max norm drift {m['max_norm_drift']:.2e}, gauge swap flags {m['gauge_swap_flags']}"
    )


def _report_sweep(rows, failures, out_dir):
    print(f"wrote {out_dir}/summary.csv: {len(rows)} members, {len(failures)} failed")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adiabaticity", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="propagate one trajectory")
    p.add_argument("config")
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="ensemble over disorder and Morse width")
    p.add_argument("config")
    p.add_argument("--members", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")

    p = sub.add_parser("preset", help="run a shipped scenario")
    p.add_argument("name", choices=PRESETS)
    p.add_argument("--out")
    p.add_argument("--members", type=int, help="sweep presets only")
    p.add_argument("--workers", type=int, default=1, help="sweep presets only")

    sub.add_parser("selfcheck", help="run the built-in oracle checks")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selfcheck":
            return 0 if selfcheck.run_all() else 2
        cfg = load_preset(args.name) if args.command == "preset" else load_config(args.config)
        out_dir = _out_dir(cfg, args.out)
        if args.command == "sweep" or (args.command == "preset" and cfg.sweep is not None):
            rows, failures = execute_sweep(cfg, out_dir, args.members, args.workers)
            _report_sweep(rows, failures, out_dir)
            return 0
        if cfg.sweep is not None:
            print("note: [sweep] section ignored by `run`; use `sweep`", file=sys.stderr)
        _report_run(execute_run(cfg, out_dir), out_dir)
        return 0
    except AdiabaticityError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
