"""Command-line front end.

Every failure prints a single line starting with "error:" on stderr and
exits with 2 (bad input), 3 (simulation diverged) or 4 (infeasible QP).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import sim
from .dynamics import RobotState, compute_dynamics
from .friction import condition_number
from .model import FIXTURES, ModelParseError, ModelValidationError, load_fixture, load_model, validate
from .qp import QPInfeasibleError

EXIT_INPUT = 2
EXIT_DIVERGED = 3
EXIT_INFEASIBLE = 4

SWEEP_COLUMNS = ["sigma", "controller", "rms_err", "max_err"]
CONDITION_COLUMNS = ["config_index", "cond_Ms", "cond_Ms_bar", "ratio"]


class InputError(Exception):
    pass


def _load_config(path) -> sim.ScenarioConfig:
    try:
        return sim.ScenarioConfig.from_json(path)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None


def _resolve(cfg: sim.ScenarioConfig):
    try:
        return cfg.resolve_model()
    except (ModelParseError, ModelValidationError) as exc:
        raise InputError(str(exc)) from None


def _model_arg(text: str):
    path = Path(text)
    if path.exists():
        return load_model(path)
    if text in FIXTURES:
        return load_fixture(text)
    raise InputError(f"model not found: {text}")


def _outdir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def _error_metric(mode: str) -> str:
    return "err_H_lin" if mode == "floating_base" else "err_s"


def plot_script(csv_name: str, columns: list[str]) -> str:
    """gnuplot script drawing the error norms found in the CSV."""
    idx = {c: i + 1 for i, c in enumerate(columns)}
    series = [(c, label) for c, label in (("err_s", "joint position error norm [rad]"),
                                          ("err_com", "CoM position error norm [m]"),
                                          ("err_H_lin", "linear momentum error norm [kg m/s]"))
              if c in idx]
    lines = ["set datafile separator ','",
             "set key autotitle columnhead",
             "set xlabel 't [s]'",
             "set grid",
             "set terminal pngcairo size 900,%d" % (300 * len(series)),
             "set output 'plot.png'",
             "set multiplot layout %d,1" % len(series)]
    for col, label in series:
        lines.append(f"set ylabel '{label}'")
        lines.append(f"plot '{csv_name}' using 1:{idx[col]} with lines title '{col}'")
    lines.append("unset multiplot")
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    model = _resolve(cfg)
    out = _outdir(args.output or cfg.output or ".")
    log = sim.run_scenario(cfg, model)
    log.to_csv(out / "run.csv")
    summary = {"model": model.name, "controller": cfg.controller, "mode": cfg.mode,
               "noise": {"sigma_v": cfg.noise.sigma_v, "tau_f": cfg.noise.tau_f,
                         "seed": cfg.noise.seed}}
    summary["metrics"] = sim.summarize(log) if len(log) else {}
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    (out / "plot.gp").write_text(plot_script("run.csv", log.columns))
    print(f"wrote {out / 'run.csv'}, {out / 'summary.json'}, {out / 'plot.gp'}")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_config(args.config)
    model = _resolve(cfg)
    logs = sim.run_many([cfg.with_(controller="baseline"), cfg.with_(controller="ef")],
                        workers=args.jobs)
    for log in logs:
        if len(log) == 0:
            raise InputError("duration must be positive to compare runs")
    report = sim.compare_runs(logs[1], logs[0])
    report = {"model": model.name, "ef": report["a"], "baseline": report["b"],
              "ratio_ef_over_baseline": report["ratio"]}
    text = json.dumps(report, indent=1, sort_keys=True)
    if args.output:
        out = _outdir(args.output)
        (out / "compare.json").write_text(text + "\n")
        for name, log in zip(("baseline", "ef"), logs):
            log.to_csv(out / f"run_{name}.csv")
    print(text)
    return 0


def cmd_sweep_noise(args) -> int:
    cfg = _load_config(args.config)
    _resolve(cfg)
    sigmas = [float(s) for s in args.sigma.split(",")] if args.sigma else [0.0, 0.05, 0.1, 0.2]
    if any(s < 0 for s in sigmas):
        raise InputError("sigma values must be >= 0")
    metric = _error_metric(cfg.mode)
    configs, keys = [], []
    for sigma in sigmas:
        noise = {"sigma_v": sigma, "tau_f": cfg.noise.tau_f, "seed": cfg.noise.seed}
        for controller in ("baseline", "ef"):
            configs.append(cfg.with_(controller=controller, noise=noise))
            keys.append((sigma, controller))
    logs = sim.run_many(configs, workers=args.jobs)
    out = _outdir(args.output or cfg.output or ".")
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for (sigma, controller), log in zip(keys, logs):
            err = log[metric]
            rms = float(np.sqrt(np.mean(err ** 2))) if len(err) else float("nan")
            mx = float(np.max(np.abs(err))) if len(err) else float("nan")
            writer.writerow([repr(sigma), controller, "%.17g" % rms, "%.17g" % mx])
            print(f"sigma={sigma:g} {controller:8s} rms={rms:.6g} max={mx:.6g}")
    print(f"wrote {out / 'sweep.csv'}")
    return 0


def condition_samples(model, samples: int, seed: int = 0):
    """cond(M_s) and cond(Mbar_s) at joint configurations drawn uniformly
    from [-pi, pi]^n."""
    rng = np.random.Generator(np.random.Philox(seed))
    rows = []
    for k in range(samples):
        s = rng.uniform(-np.pi, np.pi, model.n)
        dq = compute_dynamics(model, RobotState.home(model, s))
        a, b = condition_number(dq.Ms), condition_number(dq.Ms_bar)
        rows.append((k, a, b, a / b))
    return rows


def cmd_condition_report(args) -> int:
    model = _model_arg(args.model)
    if args.samples < 1:
        raise InputError("samples must be >= 1")
    rows = condition_samples(model, args.samples, args.seed)
    out = Path(args.output) if args.output else Path("condition.csv")
    if out.parent != Path("."):
        _outdir(out.parent)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CONDITION_COLUMNS)
        for k, a, b, r in rows:
            writer.writerow([k, "%.17g" % a, "%.17g" % b, "%.17g" % r])
    ratios = np.array([r[3] for r in rows])
    print(f"reduction factor cond(Ms)/cond(Ms_bar): min {ratios.min():.6g} "
          f"median {np.median(ratios):.6g} max {ratios.max():.6g}")
    print(f"wrote {out}")
    return 0


def cmd_validate_model(args) -> int:
    path = Path(args.model)
    if not path.exists():
        raise InputError(f"model not found: {path}")
    model = load_model(path)
    report = validate(model)
    if report:
        raise ModelValidationError(report)
    print(f"ok: {model.name}, n = {model.n}, contacts = {model.nc}, "
          f"mass = {model.total_mass:.6g} kg")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="frictorq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run baseline and EF on the same scenario")
    p.add_argument("config")
    p.add_argument("-o", "--output")
    p.add_argument("-j", "--jobs", type=int)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep-noise", help="baseline vs EF over velocity noise levels")
    p.add_argument("config")
    p.add_argument("--sigma", help="comma-separated noise levels in rad/s")
    p.add_argument("-o", "--output")
    p.add_argument("-j", "--jobs", type=int)
    p.set_defaults(func=cmd_sweep_noise)

    p = sub.add_parser("condition-report", help="cond(M_s) vs cond(Mbar_s) at random postures")
    p.add_argument("model", help="model JSON path or fixture name")
    p.add_argument("-n", "--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="CSV path (default condition.csv)")
    p.set_defaults(func=cmd_condition_report)

    p = sub.add_parser("validate-model", help="check a model file")
    p.add_argument("model")
    p.set_defaults(func=cmd_validate_model)
    return parser


def _fail(code: int, message: str) -> int:
    print("error: " + " ".join(str(message).split()), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except sim.DivergenceError as exc:
        return _fail(EXIT_DIVERGED, exc)
    except QPInfeasibleError as exc:
        return _fail(EXIT_INFEASIBLE, exc)
    except (InputError, ModelParseError, ModelValidationError, sim.ConfigError,
            FileNotFoundError) as exc:
        return _fail(EXIT_INPUT, exc)


if __name__ == "__main__":
    sys.exit(main())
