"""Command-line front end.

::

    quditmeas simulate --config run.cfg --out results/
    quditmeas ensemble --config run.cfg --out results/ --threads 4
    quditmeas signal   --config run.cfg --out results/ [--dt 0.1]

Exit status is 0 on success, 2 for configuration errors and 3 when the
integration diverges.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .analysis import (bhattacharyya_numeric, bhattacharyya_signal, coordinate_index, ensemble_mean,
                       ensemble_mean_error, postselect_final, readout_gaussians, trajectory_density)
from .config import ExperimentConfig, load_config
from .dispersive import Scheme
from .errors import ConfigError, StepperDivergenceError, UnsupportedMethodError
from .state import gell_mann_basis
from .trajectories import simulate, simulate_ensemble

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE = 0, 2, 3


def fmt(x):
    """Shortest round-trip decimal for a float."""
    return repr(float(x))


def coord_columns(N):
    """Column names for the Bloch coordinates, in Gell-Mann index order."""
    names = []
    for lab in gell_mann_basis(N).labels:
        if lab[0] == "sym":
            names.append(f"q_s{lab[1]}{lab[2]}")
        elif lab[0] == "asym":
            names.append(f"q_a{lab[1]}{lab[2]}")
        else:
            names.append(f"q_d{lab[1]}")
    return names


def readout_columns(scheme):
    return ["I", "Q"] if scheme is Scheme.PHASE_PRESERVING else ["r"]


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(v if isinstance(v, str) else fmt(v) for v in row)


def write_json(path, data):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _defect_summary(defects):
    return {
        "trace": float(np.max(defects["trace"])),
        "hermiticity": float(np.max(defects["hermiticity"])),
        "min_eigenvalue": float(np.nanmin(defects["min_eigenvalue"])),
    }


def manifest(cfg: ExperimentConfig, command, extra=None):
    data = {
        "command": command,
        "version": __version__,
        "config": cfg.to_dict(),
        "config_digest": cfg.measurement.digest(),
        "seed": cfg.seed,
        "method": cfg.method.value,
    }
    data.update(extra or {})
    return data


def _coordinate(cfg):
    N = cfg.measurement.N
    label = cfg.density_coord
    if label is None:
        return N * N - 2
    try:
        return coordinate_index(N, int(label) if label.lstrip("-").isdigit() else label)
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"unknown coordinate {label!r}", key="density_coord") from None


def run_simulate(cfg: ExperimentConfig, out, trajectory=0):
    """One trajectory: ``trajectory.csv`` and ``manifest.json`` in ``out``."""
    m = cfg.measurement
    rec = simulate(cfg.initial, m, cfg.duration, cfg.seed, cfg.method, trajectory=trajectory,
                   record_every=cfg.record_every, positivity_abort=cfg.positivity_abort)
    os.makedirs(out, exist_ok=True)
    header = ["t"] + coord_columns(m.N) + readout_columns(m.scheme)
    rows = (np.concatenate([[t], q, r]) for t, q, r in zip(rec.times, rec.states, rec.readouts))
    write_csv(os.path.join(out, "trajectory.csv"), header, rows)
    write_json(os.path.join(out, "manifest.json"), manifest(cfg, "simulate", {
        "trajectory": trajectory,
        "n_steps": int(round(rec.times[-1] / m.dt)),
        "defects": _defect_summary(rec.defects),
    }))
    return rec


def run_ensemble(cfg: ExperimentConfig, out, threads=1):
    """Mean, trajectory density and post-selected means of an ensemble."""
    if cfg.n_traj < 2:
        raise ConfigError("ensemble needs n_traj > 1; use 'simulate' for a single trajectory", key="n_traj")
    m = cfg.measurement
    coord = _coordinate(cfg)
    e = simulate_ensemble(cfg.initial, m, cfg.duration, cfg.n_traj, cfg.seed, cfg.method, threads=threads,
                          record_every=cfg.record_every, store_readouts=False,
                          positivity_abort=cfg.positivity_abort)
    os.makedirs(out, exist_ok=True)
    cols = coord_columns(m.N)
    mean, err = ensemble_mean(e), ensemble_mean_error(e)
    write_csv(os.path.join(out, "mean.csv"), ["t"] + cols + ["se_" + c for c in cols],
              (np.concatenate([[t], a, b]) for t, a, b in zip(e.times, mean, err)))
    dens = trajectory_density(e, coord)
    tc = 0.5 * (dens.time_edges[1:] + dens.time_edges[:-1])
    zc = 0.5 * (dens.coord_edges[1:] + dens.coord_edges[:-1])
    write_csv(os.path.join(out, "density.csv"), ["t", cols[coord], "density"],
              ((t, z, dens.values[i, k]) for i, t in enumerate(tc) for k, z in enumerate(zc)))
    upper, lower = postselect_final(e, coord)
    fractions = {}
    for name, part in (("upper", upper), ("lower", lower)):
        fractions[name] = len(part) / len(e)
        rows = [] if len(part) == 0 else (np.concatenate([[t], a]) for t, a in zip(e.times, ensemble_mean(part)))
        write_csv(os.path.join(out, f"postselect_{name}.csv"), ["t"] + cols, rows)
    write_json(os.path.join(out, "manifest.json"), manifest(cfg, "ensemble", {
        "n_steps": int(round(e.times[-1] / m.dt)),
        "defects": _defect_summary(e.defects),
        "density": {"coordinate": cols[coord], "time_bins": len(tc), "coord_bins": len(zc),
                    "normalization": dens.normalization},
        "postselection": {"coordinate": cols[coord], "threshold": 0.0, "fractions": fractions},
    }))
    return e


def run_signal(cfg: ExperimentConfig, out, dt_signal=None):
    """Pairwise readout signals, closed form against quadrature."""
    m = cfg.measurement
    dt_signal = cfg.signal_dt if dt_signal is None else dt_signal
    if dt_signal is None:
        dt_signal = m.tau
    if not dt_signal > 0:
        raise ConfigError("signal window must be positive", key="signal_dt_us")
    means, var = readout_gaussians(m, dt_signal)
    rows = []
    for i in range(m.N):
        for j in range(i + 1, m.N):
            s = bhattacharyya_signal(m, i, j, dt_signal)
            sn = bhattacharyya_numeric(means[i], means[j], var)
            rel = abs(sn - s) / s if s > 0 else abs(sn - s)
            rows.append((str(i), str(j), s, sn, rel))
    os.makedirs(out, exist_ok=True)
    write_csv(os.path.join(out, "signal.csv"), ["i", "j", "S_closed", "S_numeric", "rel_defect"], rows)
    write_json(os.path.join(out, "manifest.json"), manifest(cfg, "signal", {"signal_dt_us": dt_signal}))
    return rows


def build_parser():
    p = argparse.ArgumentParser(prog="quditmeas", description="Continuous dispersive qudit measurement.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "one trajectory to CSV"),
                        ("ensemble", "ensemble mean, density and post-selection CSVs"),
                        ("signal", "pairwise signal table")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, metavar="PATH")
        s.add_argument("--out", required=True, metavar="DIR")
        s.add_argument("--seed", type=int, help="override the configured seed")
        s.add_argument("--threads", type=int, default=1, help="worker threads (speed only)")
        if name == "simulate":
            s.add_argument("--trajectory", type=int, default=0, help="trajectory index to run")
        if name == "signal":
            s.add_argument("--dt", type=float, help="averaging window (us)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, require_initial=args.command != "signal")
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be non-negative", key="seed")
            cfg = cfg.replace(seed=args.seed)
        if args.command == "simulate":
            run_simulate(cfg, args.out, trajectory=args.trajectory)
        elif args.command == "ensemble":
            run_ensemble(cfg, args.out, threads=args.threads)
        else:
            run_signal(cfg, args.out, args.dt)
    except (ConfigError, UnsupportedMethodError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepperDivergenceError as exc:
        print(f"integration diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
