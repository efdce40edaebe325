"""Experiment runner.

    hybrid-radar <kind> [--config FILE] [--out DIR] [--seed N]

Writes ``run.meta`` (key=value) and CSV tables into the output directory.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import math
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import scipy

from . import __version__, default_model
from ._kernels import BACKEND
from .config import KINDS, ConfigError, load_config
from .design_common import DesignConfig, DesignReport, initial_waveform
from .design_mm import mm_design
from .design_sync import baseline_sinr, hybrid_rx_design, sync_design
from .design_ws import ws_design
from .detection import DetectionConfig, Detector, detection_curve
from .sdp import SolverConfig, SolverError
from .signal_model import DesignPoint, Scenario, db, sinr_profile

__all__ = ["main", "run_experiment", "emit_convergence_trace", "write_csv", "read_csv"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def emit_convergence_trace(report: DesignReport, path):
    """Columns ``outer_iter, objective_linear, objective_db``."""
    rows = [(i + 1, float(v), float(db(v))) for i, v in enumerate(report.trace)]
    write_csv(path, ["outer_iter", "objective_linear", "objective_db"], rows)


class _Run:
    """Resolved configuration plus helpers shared by the experiments."""

    def __init__(self, cfg, seed):
        self.cfg = cfg
        self.seed = seed
        sc, al = cfg.scenario, cfg.algorithm
        self.model = default_model(sc["rolloff"], sc["P"], sc["I"], sc["L"], sc["N"], sc["comm_energy"])
        self.design_cfg = DesignConfig(
            eps=al["eps"], Q=al["Q"], max_outer=al["max_outer"], max_inner=al["max_inner"],
            seed=seed, convergence=al["convergence"],
            solver=SolverConfig(rel_tol=al["rel_tol"], method=al["solver"], seed=seed))
        self.flags = []
        self.points = []

    def scenario(self, gamma_r_db=None, gamma_c_db=None, K=None) -> Scenario:
        sc = self.cfg.scenario
        K = sc["K"] if K is None else K
        w = sc["weights"] if K == sc["K"] else None
        return Scenario.from_db(
            sc["gamma_r_db"] if gamma_r_db is None else gamma_r_db,
            sc["gamma_c_db"] if gamma_c_db is None else gamma_c_db,
            N=sc["N"], K=K, weights=w, P_r=sc["P_r"], sigma2=sc["sigma2"])

    def record(self, label, report: DesignReport) -> int:
        self.flags.append((label, report.converged, report.iterations))
        self.points.append((label, report.point))
        return len(self.points) - 1


def _design(mode, sc, model, cfg, rx_mode="MM"):
    if mode == "MM":
        return mm_design(sc, model, cfg=cfg)
    if mode == "WS":
        return ws_design(sc, model, cfg=cfg)
    if mode == "SYNC":
        return sync_design(sc, model, cfg=cfg)
    if mode == "HYBRID_RX":
        return hybrid_rx_design(sc, model, initial_waveform(sc.N, sc.P_r, cfg.seed), cfg, rx_mode)
    raise ValueError(mode)


def _design_job(args):
    return _design(*args)


def _map(run, jobs):
    workers = run.cfg.algorithm["workers"]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_design_job, jobs))
    return [_design_job(j) for j in jobs]


def _hybrid_k0(run, sc):
    """TxRx and Rx designs for a K = 0 scenario."""
    cfg = run.design_cfg
    return [
        ("SYNC", sc, run.model, cfg),
        ("HYBRID_RX", sc, run.model, cfg, run.cfg.algorithm["rx_mode"]),
    ]


def exp_design(run, out):
    sc = run.scenario()
    al = run.cfg.algorithm
    rep = _design(al["mode"], sc, run.model, run.design_cfg, al["rx_mode"])
    pid = run.record(f"design:{al['mode']}", rep)
    write_csv(os.path.join(out, "sinr_profile.csv"), ["k", "sinr_linear", "sinr_db", "design_id"],
              [(int(k), float(v), float(db(v)), pid) for k, v in zip(sc.ks, rep.profile)])
    emit_convergence_trace(rep, os.path.join(out, "convergence.csv"))
    return {"objective": rep.objective, "mode": rep.mode}


def exp_contour(run, out):
    ex = run.cfg.experiment
    n = int(math.floor((ex["grid_max_db"] - ex["grid_min_db"]) / ex["grid_step_db"] + 1e-9)) + 1
    grid = [ex["grid_min_db"] + i * ex["grid_step_db"] for i in range(n)]
    pairs = list(itertools.product(grid, grid))
    jobs = []
    for gr, gc in pairs:
        sc = run.scenario(gr, gc, K=0)
        jobs += _hybrid_k0(run, sc)
    reps = _map(run, jobs)
    rows = []
    for i, (gr, gc) in enumerate(pairs):
        sc = run.scenario(gr, gc, K=0)
        txrx, rx = reps[2 * i], reps[2 * i + 1]
        rows.append((gr, gc, "hybrid-TxRx", float(db(txrx.profile[0])), run.record(f"contour:TxRx:{gr}:{gc}", txrx)))
        rows.append((gr, gc, "hybrid-Rx", float(db(rx.profile[0])), run.record(f"contour:Rx:{gr}:{gc}", rx)))
        rows.append((gr, gc, "active-only", float(db(baseline_sinr("active-only", sc, run.model))), ""))
        rows.append((gr, gc, "passive-only", float(db(baseline_sinr("passive-only", sc, run.model))), ""))
    write_csv(os.path.join(out, "contour.csv"),
              ["gamma_r_db", "gamma_c_db", "config", "sinr_db", "design_id"], rows)
    return {"grid_points": len(pairs)}


def exp_k_sweep(run, out):
    """Mean SINR over ``k in [-K, K]`` for each design bound ``K``."""
    Ks = run.cfg.experiment["K_values"]
    cfg = run.design_cfg
    keys, jobs = [], []
    for K in Ks:
        sc = run.scenario(K=K)
        for mode in ("MM", "WS"):
            keys += [(K, mode, "hybrid-TxRx"), (K, mode, "hybrid-Rx")]
            jobs += [(mode, sc, run.model, cfg), ("HYBRID_RX", sc, run.model, cfg, mode)]
    reps = _map(run, jobs)
    rows = []
    for (K, mode, conf), rep in zip(keys, reps):
        pid = run.record(f"k-sweep:{conf}:{mode}:{K}", rep)
        rows.append((K, mode, conf, float(db(np.mean(rep.profile))), pid))
    write_csv(os.path.join(out, "k_sweep.csv"), ["K", "mode", "config", "sinr_db", "design_id"], rows)
    return {"K_values": ",".join(map(str, Ks))}


def exp_robustness(run, out):
    ex = run.cfg.experiment
    design_K = ex["design_K"] or (0, 3)
    ks = np.arange(ex["k_min"], ex["k_max"] + 1)
    keys, jobs = [], []
    for K in design_K:
        for mode in ("MM", "WS"):
            keys.append((K, mode))
            jobs.append((mode, run.scenario(K=K), run.model, run.design_cfg))
    reps = _map(run, jobs)
    rows = []
    for (K, mode), rep in zip(keys, reps):
        pid = run.record(f"robustness:{mode}:{K}", rep)
        prof = sinr_profile(rep.scenario, rep.point, run.model, ks)
        rows += [(K, mode, int(k), float(db(v)), pid) for k, v in zip(ks, prof)]
    write_csv(os.path.join(out, "robustness.csv"), ["design_K", "mode", "k", "sinr_db", "design_id"], rows)
    return {"k_range": f"{ks[0]}..{ks[-1]}"}


def exp_detect(run, out):
    ex = run.cfg.experiment
    design_K = ex["design_K"] or (0, 4)
    dets = {}
    jobs, keys = [], []
    for K in design_K:
        for mode in ("WS", "MM"):
            keys.append(f"hybrid-{mode}-K{K}")
            jobs.append((mode, run.scenario(K=K), run.model, run.design_cfg))
    reps = _map(run, jobs)
    for key, rep in zip(keys, reps):
        run.record(f"detect:{key}", rep)
        dets[key] = Detector.hybrid(rep.point)
    sc = run.scenario()
    dets["active-only"] = Detector.active_only(initial_waveform(sc.N, sc.P_r, run.seed))
    dets["passive-only"] = Detector.passive_only(run.model, sc.N)
    dcfg = DetectionConfig(P_f=ex["P_f"], trials_h0=ex["trials_h0"], trials_h1=ex["trials_h1"],
                           snr_grid_db=ex["snr_grid_db"], seed=run.seed, sigma2=sc.sigma2,
                           workers=run.cfg.algorithm["workers"])
    curves = detection_curve(dets, run.model, dcfg)
    rows = []
    for name, c in curves.items():
        rows += [(name, float(s), float(p), float(h), c.zeta, c.trials_h1)
                 for s, p, h in zip(c.snr_db, c.pm, c.half_width)]
    write_csv(os.path.join(out, "detection.csv"),
              ["config", "snr_db", "pm", "half_width_95", "zeta", "trials_h1"], rows)
    return {"P_f": ex["P_f"], "trials_h0": ex["trials_h0"]}


def exp_convergence(run, out):
    sc = run.scenario()
    info = {}
    reps = _map(run, [(mode, sc, run.model, run.design_cfg) for mode in ("MM", "WS")])
    for mode, rep in zip(("MM", "WS"), reps):
        run.record(f"convergence:{mode}", rep)
        emit_convergence_trace(rep, os.path.join(out, f"convergence_{mode}.csv"))
        info[f"iterations_{mode}"] = rep.iterations
    return info


EXPERIMENTS = {
    "design": exp_design,
    "contour": exp_contour,
    "k-sweep": exp_k_sweep,
    "robustness": exp_robustness,
    "detect": exp_detect,
    "convergence": exp_convergence,
}


def _write_points(run, out):
    rows = []
    for pid, (label, dp) in enumerate(run.points):
        for n in range(dp.N):
            rows.append((pid, label, n, dp.s_r[n].real, dp.s_r[n].imag, dp.w_r[n].real,
                         dp.w_r[n].imag, dp.w_c[n].real, dp.w_c[n].imag))
    write_csv(os.path.join(out, "design_points.csv"),
              ["design_id", "label", "n", "s_r_re", "s_r_im", "w_r_re", "w_r_im", "w_c_re", "w_c_im"],
              rows)


def read_design_points(path) -> dict:
    """``design_id -> DesignPoint`` from a ``design_points.csv`` file."""
    groups = {}
    for r in read_csv(path):
        groups.setdefault(int(r["design_id"]), []).append(r)
    out = {}
    for pid, rs in groups.items():
        rs.sort(key=lambda r: int(r["n"]))
        vec = {name: np.array([float(r[f"{name}_re"]) + 1j * float(r[f"{name}_im"]) for r in rs])
               for name in ("s_r", "w_r", "w_c")}
        out[pid] = DesignPoint(vec["s_r"], vec["w_r"], vec["w_c"], {"label": rs[0]["label"]})
    return out


def _write_meta(path, run, kind, status, extra):
    lines = [
        f"kind={kind}",
        f"status={status}",
        f"seed={run.seed}",
        f"config_source={run.cfg.source}",
        f"package_version={__version__}",
        f"kernel_backend={BACKEND}",
        f"python={platform.python_version()}",
        f"numpy={np.__version__}",
        f"scipy={scipy.__version__}",
        f"comm_energy_scale={fmt(run.model.energy_scale)}",
        "filter_trace_budget=1",
        "pulse_taps=causal [0,I*P) centred at I*P/2; H unnormalized, s_c scaled by comm_energy_scale",
    ]
    for k, v in run.cfg.flat().items():
        if isinstance(v, tuple):
            v = ",".join(fmt(x) for x in v)
        lines.append(f"{k}={'' if v is None else fmt(v)}")
    for k, v in extra.items():
        lines.append(f"result.{k}={fmt(v)}")
    n_conv = sum(1 for _, c, _ in run.flags if c)
    lines.append(f"designs={len(run.flags)}")
    lines.append(f"designs_converged={n_conv}")
    for label, conv, iters in run.flags:
        lines.append(f"converged.{label}={int(conv)};iterations={iters}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def run_experiment(kind, config_path=None, out=None, seed=None, stderr=None) -> int:
    """Run one experiment; returns the process exit code."""
    stderr = stderr or sys.stderr
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=stderr)
        return EXIT_CONFIG
    if kind not in KINDS:
        print(f"error: unknown experiment kind {kind!r}", file=stderr)
        return EXIT_CONFIG
    ck = cfg.experiment["kind"]
    if ck is not None and ck != kind:
        print(f"error: {cfg.source}: [experiment] kind = {ck} conflicts with subcommand {kind}", file=stderr)
        return EXIT_CONFIG
    cfg.experiment["kind"] = kind
    seed = seed if seed is not None else cfg.algorithm["seed"]
    cfg.algorithm["seed"] = seed
    out = out or cfg.experiment["out"] or f"results-{kind}"
    cfg.experiment["out"] = out
    os.makedirs(out, exist_ok=True)
    run = _Run(cfg, seed)
    try:
        extra = EXPERIMENTS[kind](run, out)
        for label, dp in run.points:
            if not all(np.all(np.isfinite(v)) for v in (dp.s_r, dp.w_r, dp.w_c)):
                raise FloatingPointError(f"non-finite design point in {label}")
    except (SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: numerical failure: {type(exc).__name__}: {exc}", file=stderr)
        _write_meta(os.path.join(out, "run.meta"), run, kind, "numerical_failure", {})
        return EXIT_NUMERIC
    _write_points(run, out)
    _write_meta(os.path.join(out, "run.meta"), run, kind, "ok", extra)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="hybrid-radar", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="kind", required=True, metavar="kind")
    for k in KINDS:
        s = sub.add_parser(k, help=f"run the {k} experiment")
        s.add_argument("--config", help="INI configuration file")
        s.add_argument("--out", help="output directory")
        s.add_argument("--seed", type=int, help="master seed (overrides the config)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run_experiment(args.kind, args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
