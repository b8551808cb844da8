"""Command-line front end: run experiments from flat config files.

Subcommands wrap one library operation each and emit a run manifest
(config echo, version, per-trial stream ids), a summary JSON, and
optional per-trial CSVs into the output directory.  Exit codes: 0 on
success, 2 for invalid configuration (the message names the field), 3
when an internal consistency check fails.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, analysis, dynamics, integrate, jumps
from .analysis import (
    STREAM_JUMPS,
    STREAM_THETA0,
    STREAM_X0,
    InternalConsistencyError,
    averaging_experiment,
    averaging_monotone,
    check_equilibria_drc,
    check_equilibria_krw,
    detect_synchronization,
    trial_stream,
    twisted_escape_experiment,
)
from .config import ConfigError, ExperimentConfig
from .jumps import RngSeed
from .selftest import run_selftest


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _json_fallback(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _write_json(path: Path, payload: dict) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2, default=_json_fallback)
    path.write_text(text + "\n", encoding="utf-8")


def _load_config(args, force_model: str | None = None) -> ExperimentConfig:
    if args.config is not None:
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig()
    updates = {}
    if force_model is not None:
        updates["model"] = force_model
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "output", None) is not None:
        updates["output_dir"] = args.output
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
    cfg.validate()
    return cfg


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(cfg: ExperimentConfig, streams: dict) -> dict:
    return {
        "version": __version__,
        "config_text": cfg.to_text(),
        "seed": cfg.seed,
        "streams": streams,
        "timestamp": _now(),
    }


def _run_one_trial(task):
    """One simulate+integrate trial; returns (summary, path or None)."""
    cfg, g, trial, sampler, params, int_cfg, keep_path = task
    seed = RngSeed(cfg.seed)
    base = trial_stream(trial, 0)
    theta_rng = seed.with_stream(base + STREAM_THETA0).generator()
    theta0 = sampler.sample(theta_rng)
    if cfg.model == "krw":
        x_rng = seed.with_stream(base + STREAM_X0).generator()
        x0 = x_rng.choice(g.n, size=cfg.n_walkers, p=g.stationary_measure())
        traj = jumps.simulate_walkers(
            g, cfg.n_walkers, cfg.epsilon, x0, cfg.horizon,
            seed.with_stream(base + STREAM_JUMPS),
        )
        path = integrate.integrate_krw(g, traj, theta0, params, int_cfg)
    elif cfg.model == "drc":
        traj = jumps.simulate_edges(
            g, cfg.epsilon, cfg.kappa, None, cfg.horizon,
            seed.with_stream(base + STREAM_JUMPS),
        )
        path = integrate.integrate_drc(g, traj, theta0, params, int_cfg)
    else:
        path = integrate.integrate_averaged(
            g.averaged_coupling(), theta0, params, int_cfg, cfg.horizon
        )
    detected = detect_synchronization(path, cfg.sync_tol, cfg.sync_dwell)
    summary = {
        "trial": trial,
        "theta0": [float(v) for v in theta0],
        "synchronized_at": detected,
        "final_dist_sync": float(path.dist_sync[-1]),
        "final_spread": float(path.spread[-1]),
        "max_phase_sum_drift": float(np.abs(path.phase_sum - path.phase_sum[0]).max()),
    }
    return summary, (path if keep_path else None)


def cmd_run(args, force_model: str | None = None) -> int:
    cfg = _load_config(args, force_model)
    g = cfg.build_graph()
    out = _out_dir(cfg)
    n_osc = g.n if cfg.model == "drc" else cfg.n_walkers
    try:
        params = dynamics.ModelParams(
            coupling=cfg.coupling, omega=np.asarray(cfg.omega), n=n_osc
        )
    except ValueError as exc:
        raise ConfigError(f"omega/coupling: {exc}") from exc
    sampler = cfg.theta0_sampler(n_osc)
    int_cfg = cfg.integrator(cfg.epsilon)

    tasks = [
        (cfg, g, trial, sampler, params, int_cfg, cfg.output_per_trial_csv)
        for trial in range(cfg.trials)
    ]
    results = analysis._map_trials(_run_one_trial, tasks, args.jobs)

    trials = []
    streams = {}
    for trial, (summary, path) in enumerate(results):  # output writing serialized
        base = trial_stream(trial, 0)
        streams[str(trial)] = {
            "jumps": base + STREAM_JUMPS,
            "theta0": base + STREAM_THETA0,
            "x0": base + STREAM_X0,
        }
        if cfg.output_per_trial_csv:
            csv_path = out / f"trial_{trial:04d}.csv"
            integrate.path_to_csv(path, str(csv_path))
            summary["csv"] = csv_path.name
        trials.append(summary)

    synced = [t for t in trials if t["synchronized_at"] is not None]
    summary = {
        "command": "run",
        "model": cfg.model,
        "config": {k: _json_value(v) for k, v in cfg.to_flat().items()},
        "version": __version__,
        "trials": trials,
        "aggregates": {
            "n_trials": cfg.trials,
            "sync_fraction": (len(synced) / cfg.trials) if cfg.trials else None,
        },
        "timestamp": _now(),
    }
    _write_json(out / "summary.json", summary)
    _write_json(out / "manifest.json", _manifest(cfg, streams))
    print(f"{cfg.model}: {len(synced)}/{cfg.trials} trials synchronized; wrote {out}/summary.json")
    return 0


def _json_value(v):
    if isinstance(v, tuple):
        return list(v)
    return v


def cmd_sweep_epsilon(args) -> int:
    cfg = _load_config(args, force_model="krw")
    g = cfg.build_graph()
    out = _out_dir(cfg)
    epsilons = cfg.epsilons or (1.0, 0.3, 0.1, 0.03, 0.01)
    sampler = cfg.theta0_sampler(cfg.n_walkers)
    rows = averaging_experiment(
        g, cfg.n_walkers, epsilons, cfg.trials, cfg.horizon, sampler,
        RngSeed(cfg.seed), coupling=cfg.coupling, jobs=args.jobs,
    )
    monotone = averaging_monotone(rows)
    streams = {
        f"row_{r}_trial_{t}": trial_stream(t, 0, row=r, trials_per_row=cfg.trials)
        for r in range(len(epsilons)) for t in range(cfg.trials)
    }
    table_lines = ["epsilon,trials,mean_sup_deviation,std_error"]
    for row in rows:
        table_lines.append(
            f"{row.epsilon!r},{row.trials},{row.mean_deviation!r},{row.std_error!r}"
        )
    (out / "averaging_table.csv").write_text("\n".join(table_lines) + "\n", encoding="utf-8")
    summary = {
        "command": "sweep-epsilon",
        "config": {k: _json_value(v) for k, v in cfg.to_flat().items()},
        "version": __version__,
        "rows": [dataclasses.asdict(r) for r in rows],
        "monotone_within_one_std_error": monotone,
        "timestamp": _now(),
    }
    _write_json(out / "summary.json", summary)
    _write_json(out / "manifest.json", _manifest(cfg, streams))
    for row in rows:
        print(f"epsilon={row.epsilon:<8g} mean sup-deviation={row.mean_deviation:.6f} "
              f"(se {row.std_error:.6f})")
    print(f"monotone within one standard error: {monotone}")
    return 0


def cmd_check_equilibria(args) -> int:
    cfg = _load_config(args)
    g = cfg.build_graph()
    out = _out_dir(cfg)
    seed = RngSeed(cfg.seed)
    report: dict = {
        "command": "check-equilibria",
        "config": {k: _json_value(v) for k, v in cfg.to_flat().items()},
        "version": __version__,
        "timestamp": _now(),
    }
    if cfg.model == "drc":
        sweep = check_equilibria_drc(g, seed)
        label = "edge-model candidates (single-edge vs exhaustive)"
    else:
        sweep = check_equilibria_krw(g, cfg.n_walkers, seed)
        label = "walker-model candidates (brute force over configurations)"
    report["n_candidates"] = int(sweep.candidates.shape[0])
    report["all_candidates_fixed"] = sweep.all_candidates_fixed
    report["probes_rejected"] = f"{sweep.probes_rejected}/{sweep.probes_total}"
    report["candidate_set_matches_verified_set"] = sweep.agreement
    _write_json(out / "summary.json", report)
    _write_json(out / "manifest.json", _manifest(cfg, {"probes": cfg.seed}))
    print(f"{label}: {report['n_candidates']} candidates, "
          f"all fixed: {sweep.all_candidates_fixed}, "
          f"probes rejected: {report['probes_rejected']}, "
          f"sets agree: {sweep.agreement}")
    return 0 if sweep.agreement else 3


def cmd_twisted_escape(args) -> int:
    cfg = _load_config(args, force_model="drc")
    out = _out_dir(cfg)
    n = cfg.graph_n if cfg.graph_n is not None else 10
    k = cfg.graph_k if cfg.graph_k is not None else 1
    result = twisted_escape_experiment(
        n=n, k=k, epsilon=cfg.epsilon, kappa=cfg.kappa, trials=cfg.trials,
        horizon=cfg.horizon, radius=cfg.escape_radius, seed=RngSeed(cfg.seed),
        coupling=cfg.coupling, jobs=args.jobs,
    )
    streams = {str(t): trial_stream(t, 0) + STREAM_JUMPS for t in range(cfg.trials)}
    summary = {
        "command": "twisted-escape",
        "config": {k2: _json_value(v) for k2, v in cfg.to_flat().items()},
        "version": __version__,
        "ring": {"n": n, "k": k},
        "static_residual_norm": result.static_residual_norm,
        "fixed_point_under_edge_model": result.fixed_point_report.is_fixed_point,
        "witness_edge_residual": result.fixed_point_report.violating_residual,
        "escape_fraction": result.escape_fraction,
        "escape_times": result.escape_times,
        "probe_note": result.probe_note,
        "timestamp": _now(),
    }
    _write_json(out / "summary.json", summary)
    _write_json(out / "manifest.json", _manifest(cfg, streams))
    print(f"twisted state on ring({n},{k}): static residual "
          f"{result.static_residual_norm:.2e}, edge-model fixed point: "
          f"{result.fixed_point_report.is_fixed_point}, escape fraction "
          f"{result.escape_fraction:.2f} (radius {cfg.escape_radius})")
    print(result.probe_note)
    return 0


def cmd_selftest(args) -> int:
    ok = run_selftest()
    print("selftest:", "all invariants PASS" if ok else "FAILURES above")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kuradyn",
        description="Kuramoto oscillators on Markov-switching graphs",
    )
    parser.add_argument("--version", action="version", version=f"kuradyn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_jobs=True):
        p.add_argument("--config", type=str, default=None, help="flat key-path config file")
        p.add_argument("--output", type=str, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if with_jobs:
            p.add_argument("--jobs", type=int, default=1, help="worker processes for trials")

    p_run = sub.add_parser("run", help="run the model named in the config")
    add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    for model in ("krw", "drc", "averaged"):
        p_model = sub.add_parser(f"run-{model}", help=f"run the {model} model")
        add_common(p_model)
        p_model.set_defaults(func=lambda a, m=model: cmd_run(a, force_model=m))

    p_sweep = sub.add_parser("sweep-epsilon", help="averaging-principle deviation table")
    add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep_epsilon)

    p_eq = sub.add_parser("check-equilibria", help="verify the candidate equilibrium set")
    add_common(p_eq)
    p_eq.set_defaults(func=cmd_check_equilibria)

    p_tw = sub.add_parser("twisted-escape", help="twisted-state escape statistics")
    add_common(p_tw)
    p_tw.set_defaults(func=cmd_twisted_escape)

    p_self = sub.add_parser("selftest", help="run the invariant suite")
    add_common(p_self, with_jobs=False)
    p_self.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    except InternalConsistencyError as exc:
        print(f"internal consistency failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
