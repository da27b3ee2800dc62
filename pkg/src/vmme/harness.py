"""Command-line front end.

Commands: ``generate-trace``, ``predict-rates``, ``simulate``,
``capacity-sweep``, ``advise <users>`` and ``show-config``.  Exit status is
0 on success, 2 on validation errors and 3 on I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analytics, config as cfgmod, qnet, signaling
from .config import ConfigError, ExperimentConfig
from .mobility import init_user, user_crossings
from .signaling import InputFormatError, SignalingTrace, build_trace, empirical_rates
from .stochastic import ParameterError, RandomStream
from .traffic import generate_timelines

log = logging.getLogger("vmme")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 2, 3


# -- pipeline pieces (importable) ----------------------------------------------------

def scenario(cfg: ExperimentConfig):
    """Session timelines and crossing times for every UE of the scenario."""
    timelines = generate_timelines(cfg.num_users, cfg.sim_duration_s, cfg.mix, cfg.link,
                                   cfg.seed, cfg.traffic)
    crossings = []
    for ue in range(cfg.num_users):
        kin = init_user(cfg.grid, cfg.speed, RandomStream(cfg.seed, 2, ue))
        crossings.append(user_crossings(kin, cfg.grid, cfg.sim_duration_s)[0])
    return timelines, crossings


def make_trace(cfg: ExperimentConfig, timer: float | None = None, scen=None) -> SignalingTrace:
    timelines, crossings = scen or scenario(cfg)
    t = cfg.timer_s if timer is None else timer
    return build_trace(timelines, crossings, t, cfg.timing, horizon=cfg.sim_duration_s)


def model_inputs(cfg: ExperimentConfig) -> analytics.RateModelInputs:
    return analytics.derive_inputs(cfg.mix, cfg.traffic, cfg.grid, cfg.speed, cfg.link,
                                   timer=cfg.timer_s, n_sessions=cfg.mc_sessions,
                                   stream=RandomStream(cfg.seed, 3))


def rate_table(cfg: ExperimentConfig, empirical: bool = False):
    """Analytic rows (and matched empirical rows) over the timer sweep."""
    inp = model_inputs(cfg)
    analytic = analytics.predict(inp, cfg.timer_sweep_s)
    if not empirical:
        return analytic, None
    scen = scenario(cfg)
    rows = []
    for t in cfg.timer_sweep_s:
        sr, srr, hr = empirical_rates(make_trace(cfg, t, scen), cfg.num_users, cfg.sim_duration_s)
        rows.append((t, sr, srr, hr))
    return analytic, np.asarray(rows)


def rmse(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean((a - b) ** 2, axis=0))


def sweep_traces(cfg: ExperimentConfig, base: SignalingTrace):
    """Replayed trace per target user count, from the desk-scale base trace."""
    def at(users):
        return qnet.replay(base, cfg.num_users, cfg.sim_duration_s, users, cfg.sweep.window_s,
                           RandomStream(cfg.seed, 4, int(users)))
    return at


# -- CSV helpers -------------------------------------------------------------------

def _write_rates(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T_I_s", "lambda_sr", "lambda_srr", "lambda_hr"])
        for t, sr, srr, hr in rows:
            w.writerow([f"{t:g}", f"{sr:.9e}", f"{srr:.9e}", f"{hr:.9e}"])


# -- commands ------------------------------------------------------------------------

def cmd_generate_trace(cfg: ExperimentConfig, out: Path) -> Path:
    trace = make_trace(cfg)
    path = out / "trace.csv"
    signaling.write_trace_csv(path, trace)
    counts = trace.procedure_counts()
    sr, srr, hr = empirical_rates(trace, cfg.num_users, cfg.sim_duration_s)
    print(f"wrote {path}: {len(trace)} messages")
    print("procedures: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    print(f"per-user rates (1/s): SR={sr:.6e} SRR={srr:.6e} HR={hr:.6e} total={sr + srr + hr:.6e}")
    return path


def cmd_predict_rates(cfg: ExperimentConfig, out: Path, empirical: bool = False) -> Path:
    analytic, emp = rate_table(cfg, empirical)
    path = out / "rates.csv"
    _write_rates(path, analytic)
    print(f"wrote {path}")
    if emp is not None:
        epath = out / "rates_empirical.csv"
        _write_rates(epath, emp)
        err = rmse(analytic[:, 1:], emp[:, 1:])
        print(f"wrote {epath}")
        print(f"RMSE (1/s): SR={err[0]:.3e} SRR={err[1]:.3e} HR={err[2]:.3e}")
    return path


def cmd_simulate(cfg: ExperimentConfig, trace_path: Path, out: Path) -> Path:
    trace = signaling.read_trace_csv(trace_path)
    res = qnet.run(trace, cfg.qnet, RandomStream(cfg.seed, 5))
    path = out / "delays.csv"
    qnet.write_delays_csv(path, res.stats)
    qnet.write_utilization_csv(out / "utilization.csv", res.utilization)
    o = res.stats.overall
    print(f"wrote {path}: {o.count} messages, mean sojourn {o.mean:.6e} s, max {o.max:.6e} s")
    for name, u in res.utilization.items():
        print(f"  utilization {name}: {u:.4f}")
    return path


def cmd_capacity_sweep(cfg: ExperimentConfig, out: Path) -> Path:
    base = make_trace(cfg)
    points, capacity = qnet.capacity_sweep(sweep_traces(cfg, base), cfg.qnet, cfg.sweep.user_counts,
                                           cfg.sweep.instances, cfg.sweep.budget_s,
                                           RandomStream(cfg.seed, 6))
    path = out / "sweep.csv"
    qnet.write_sweep_csv(path, points)
    print(f"wrote {path}")
    budget_ms = cfg.sweep.budget_s * 1e3
    for m, cap in capacity.items():
        shown = "none" if cap is None else f"{cap:.0f}"
        print(f"m={m}: capacity within {budget_ms:g} ms = {shown} users")
    try:
        slope, icpt = qnet.fit_advisor(capacity)
        print(f"fitted advisor over measured points: m(u) = ceil({slope:.3e} * u + {icpt:.3e})")
    except ParameterError:
        print("fitted advisor: not enough feasible points")
    u = 1173900
    print(f"advisor({u}) = {qnet.scaling_advisor(u)}")
    return path


def cmd_advise(users: float) -> int:
    m = qnet.scaling_advisor(users)
    note = "" if users <= qnet.ADVISOR_VALID_USERS else " (beyond the 1.2e6-user range of the fit)"
    print(f"{m}{note}")
    return m


# -- argument parsing ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment config (defaults if omitted)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", type=Path, help="output directory (overrides config)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="vmme", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate-trace", parents=[common], help="write the signaling trace CSV")
    pr = sub.add_parser("predict-rates", parents=[common], help="analytic rates over the timer sweep")
    pr.add_argument("--empirical", action="store_true", help="also simulate and report RMSE")
    sm = sub.add_parser("simulate", parents=[common], help="run the queue network on a trace")
    sm.add_argument("--trace", type=Path, help="trace CSV (default <out>/trace.csv)")
    cs = sub.add_parser("capacity-sweep", parents=[common], help="delay versus users and instances")
    cs.add_argument("--budget-ms", type=float, help="mean-delay budget in ms")
    ad = sub.add_parser("advise", parents=[common], help="instances needed for a user count")
    ad.add_argument("users", type=float)
    sub.add_parser("show-config", parents=[common], help="print the effective config as YAML")
    return p


def _effective_config(args) -> ExperimentConfig:
    cfg = cfgmod.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("seed: must be an unsigned 64-bit integer")
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "budget_ms", None) is not None:
        budget = args.budget_ms * 1e-3 if math.isfinite(args.budget_ms) else math.inf
        try:
            cfg = replace(cfg, sweep=replace(cfg.sweep, budget_s=budget))
        except ParameterError as exc:
            raise ConfigError(f"sweep.budget_s: {exc}") from None
    if args.out is not None:
        cfg = replace(cfg, output_dir=str(args.out))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "advise":
            if not args.users >= 0:
                raise ParameterError("users must be nonnegative")
            cmd_advise(args.users)
            return EXIT_OK
        cfg = _effective_config(args)
        if args.command == "show-config":
            sys.stdout.write(cfgmod.dump(cfg))
            return EXIT_OK
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "generate-trace":
            cmd_generate_trace(cfg, out)
        elif args.command == "predict-rates":
            cmd_predict_rates(cfg, out, args.empirical)
        elif args.command == "simulate":
            cmd_simulate(cfg, args.trace or out / "trace.csv", out)
        elif args.command == "capacity-sweep":
            cmd_capacity_sweep(cfg, out)
    except (ConfigError, ParameterError, InputFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
