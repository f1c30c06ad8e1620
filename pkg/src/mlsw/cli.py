"""Command-line entry point: ``mlsw <subcommand> --config FILE [--out DIR]``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .changevar import u_to_v
from .diagnostics import record
from .eigen import check_hyperbolicity, eigendecompose_Bx, rest_wave_speeds
from .errors import ConfigError, HyperbolicityLoss, MLSWError, NumericalFailure
from .harness import run_illprepared_decomposition, run_wellprepared_sweep
from .io import (KINDS, RunConfig, parse_config, write_report_csv, write_snapshot,
                 write_timeseries)
from .solvers import (acoustic_initialization, acoustic_norm_sq, acoustic_propagate,
                      build_initial_data, rigid_lid_initialization, run_free_surface,
                      run_rigid_lid)
from .spectral import spectral_ops


def _outputs(cfg: RunConfig, out: Path, name: str, records, params, grid, final, summary):
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in cfg.formats and records is not None:
        write_timeseries(records, out / f"{name}.csv")
    if "snapshot" in cfg.formats and final is not None:
        t, U = final
        write_snapshot(out / f"{name}_final.mlsv", params, grid, U, t)
    if "summary" in cfg.formats:
        (out / f"{name}_summary.txt").write_text(summary + "\n")


def _series_summary(title, records) -> str:
    first, last = records[0], records[-1]
    drift = (last.energy - first.energy) / first.energy if first.energy else 0.0
    return (f"{title}: t_end={last.time:g} energy={last.energy:.12g} "
            f"relative drift={drift:.3e} min depth={min(r.min_depth for r in records):.6g}")


def cmd_simulate(cfg: RunConfig, out: Path) -> str:
    params, grid = cfg.params(), cfg.grid()
    U0 = build_initial_data(params, grid, cfg.recipe)
    samples = run_free_surface(params, grid, U0, cfg.solver)
    records = [record(params, grid, U, t) for t, U in samples]
    for rec in records:
        if "ComplexPairDetected" in rec.flags:
            raise HyperbolicityLoss(f"hyperbolicity lost at t={rec.time:g}")
    summary = _series_summary("free-surface run", records)
    _outputs(cfg, out, "simulate", records, params, grid, samples[-1], summary)
    return summary


def cmd_rigidlid(cfg: RunConfig, out: Path) -> str:
    params, grid = cfg.params(), cfg.grid()
    U0 = build_initial_data(params, grid, cfg.recipe)
    rl = rigid_lid_initialization(params, grid, U0)
    samples = run_rigid_lid(params, grid, rl, cfg.solver)
    records = [record(params, grid, U, t, eigen=False) for t, U in samples]
    summary = (_series_summary("rigid-lid run", records)
               + f" max constraint residual={max(r.rl_residual for r in records):.3e}")
    _outputs(cfg, out, "rigidlid", records, params, grid, samples[-1], summary)
    return summary


def cmd_acoustic(cfg: RunConfig, out: Path) -> str:
    params, grid = cfg.params(), cfg.grid()
    ops = spectral_ops(grid)
    U0 = build_initial_data(params, grid, cfg.recipe)
    ac0 = acoustic_initialization(params, grid, U0)
    nsamp = int(round(cfg.solver.end_time / cfg.solver.stride))
    rows = ["time,zeta1_l2,w_l2,weighted_norm"]
    for i in range(nsamp + 1):
        t = i * cfg.solver.stride
        ac = acoustic_propagate(params, grid, ac0, t)
        rows.append(",".join(repr(float(x)) for x in
                             (t, ops.l2(ac.zeta1), ops.l2(ac.w),
                              np.sqrt(acoustic_norm_sq(params, grid, ac)))))
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in cfg.formats:
        (out / "acoustic.csv").write_text("\n".join(rows) + "\n")
    summary = f"acoustic propagation: {nsamp} samples, weighted norm {rows[-1].split(',')[-1]}"
    if "summary" in cfg.formats:
        (out / "acoustic_summary.txt").write_text(summary + "\n")
    return summary


def cmd_eigen(cfg: RunConfig, out: Path) -> str:
    params, grid = cfg.params(), cfg.grid()
    rest = np.zeros(params.nvar)
    tri = rest_wave_speeds(params, rest)
    at_rest = eigendecompose_Bx(params, rest)
    dense = np.sort(np.concatenate([at_rest.mu_minus, at_rest.mu_plus]))
    U0 = build_initial_data(params, grid, cfg.recipe).to_array()
    V = u_to_v(params, U0)
    dec = eigendecompose_Bx(params, np.moveaxis(V.reshape(V.shape[0], -1), 0, -1))
    lines = ["rest speeds (tridiagonal): " + ", ".join(repr(float(x)) for x in tri),
             "rest speeds (dense):       " + ", ".join(repr(float(x)) for x in dense),
             f"max difference: {np.max(np.abs(tri - dense)):.3e}",
             f"initial data: min gap {dec.min_gap:.6g}, "
             f"fastest speed {float(np.max(np.abs(dec.mu_plus))):.6g}"]
    summary = "\n".join(lines)
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in cfg.formats:
        (out / "eigen.csv").write_text(
            "index,tridiagonal,dense\n" + "".join(
                f"{i},{float(a)!r},{float(b)!r}\n" for i, (a, b) in enumerate(zip(tri, dense))))
    if "summary" in cfg.formats:
        (out / "eigen_summary.txt").write_text(summary + "\n")
    return summary


def cmd_hyperbolicity(cfg: RunConfig, out: Path) -> str:
    params, grid = cfg.params(), cfg.grid()
    # build without rejecting, so the check itself reports the failure
    U0 = build_initial_data(params, grid, cfg.recipe, validate=False)
    rep = check_hyperbolicity(params, U0, cfg.h0, cfg.nu)
    summary = (f"hyperbolicity {'pass' if rep.ok else 'FAIL'}: min depths "
               f"{', '.join(f'{x:.6g}' for x in rep.min_depth)}; max shear {rep.max_shear:.6g}; "
               f"min gap {rep.min_gap:.6g}; real {rep.is_real}"
               + (f"; {rep.message}" if rep.message else ""))
    out.mkdir(parents=True, exist_ok=True)
    if "summary" in cfg.formats:
        (out / "hyperbolicity_summary.txt").write_text(summary + "\n")
    if not rep.ok:
        raise HyperbolicityLoss(summary)
    return summary


def cmd_converge(cfg: RunConfig, out: Path) -> str:
    exp = cfg.experiment()
    report = (run_wellprepared_sweep(exp) if cfg.kind == "converge-wp"
              else run_illprepared_decomposition(exp))
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in cfg.formats:
        write_report_csv(report, out / f"{cfg.kind}.csv")
    summary = report.summary()
    if "summary" in cfg.formats:
        (out / f"{cfg.kind}_summary.txt").write_text(summary + "\n")
    return summary


COMMANDS = {
    "simulate": cmd_simulate,
    "rigidlid": cmd_rigidlid,
    "acoustic": cmd_acoustic,
    "eigen": cmd_eigen,
    "hyperbolicity": cmd_hyperbolicity,
    "converge-wp": cmd_converge,
    "converge-ip": cmd_converge,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mlsw", description=__doc__)
    parser.add_argument("command", choices=KINDS)
    parser.add_argument("--config", required=True, help="flat key = value config file")
    parser.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    args = parser.parse_args(argv)
    try:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        cfg = parse_config(text, kind=args.command)
        out = Path(args.out or cfg.out_dir)
        print(COMMANDS[args.command](cfg, out))
        return 0
    except MLSWError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NumericalFailure.exit_code


if __name__ == "__main__":
    sys.exit(main())
