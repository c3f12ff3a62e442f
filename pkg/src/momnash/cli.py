"""Command-line interface.

    momnash solve-eq --game benchmark15
    momnash run --algo mom --fixed-m 20 --out runs/momf
    momnash compare --preset fig3 --out runs/fig3
    momnash verify tail --noise sym-pareto --alpha 1.8 --delta 1.5 --m 200 --gamma 0.05
    momnash verify chung --r 2 --p 1 --tau 1 --d 1 --horizon 1e6
    momnash verify rate --from runs/fig1/trials/mom.csv --delta 2 --beta 1

Experiment settings come from (lowest to highest precedence) built-in
defaults, ``--preset``, ``--config FILE`` (``key = value`` lines, ``#``
comments) and explicit flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import AnalysisError, ChungInstance, chung_oracle, fit_envelope, fit_loglog_slope, tail_bound_test
from .game import GameError, analyze, solve_equilibrium
from .harness import (
    AGGREGATE_HEADER,
    AXES,
    ERROR_KINDS,
    TRIAL_HEADER,
    ExperimentError,
    ExperimentSpec,
    make_game,
    mean_by_iteration,
    read_csv,
    read_trials_csv,
    run_trials,
    write_outputs,
)
from .noise import CORRUPTION_MODES, CorruptionModel, NoiseError, NoiseModel, RngStream
from .plot import write_svg
from .seekers import ALGORITHMS, BUDGET_MODES, SeekerConfig, SeekerError, Schedules

GAME_IDS = ("benchmark15", "benchmark", "diag")
NOISE_ALIASES = {
    "sym-pareto": "symmetrized_pareto",
    "symmetrized-pareto": "symmetrized_pareto",
    "shifted-pareto": "shifted_pareto",
    "gaussian": "gaussian",
    "none": "none",
}


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _int(text) -> int:
    val = float(text)
    if val != int(val):
        raise ConfigError(f"not an integer: {text!r}")
    return int(val)


def _optional_int(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return _int(text)


def _noise_kind(text: str) -> str:
    key = str(text).strip().lower().replace("_", "-")
    if key not in NOISE_ALIASES:
        raise ConfigError(f"unknown noise {text!r}; valid: {', '.join(NOISE_ALIASES)}")
    return NOISE_ALIASES[key]


def _choice(options):
    def parse(text):
        if text not in options:
            raise ConfigError(f"{text!r} is not one of {', '.join(options)}")
        return text
    return parse


# key -> parser; every experiment setting settable from file or flag
CONFIG_KEYS = {
    "game": _choice(GAME_IDS),
    "n": _int,
    "a": float,
    "r": float,
    "noise": _noise_kind,
    "alpha": float,
    "sigma": float,
    "delta": lambda t: None if str(t).lower() in ("", "none", "auto") else float(t),
    "budget": _int,
    "budget_mode": _choice(BUDGET_MODES),
    "trials": _int,
    "seed": _int,
    "axis": _choice(AXES),
    "error_kind": _choice(ERROR_KINDS),
    "x0": lambda t: None if str(t).lower() in ("", "none", "lower") else float(t),
    "algos": str,
    "algo": str,
    "step_a": float,
    "step_b": float,
    "sample_beta": float,
    "sample_c": _int,
    "conf_exponent": float,
    "eta0": float,
    "rho": float,
    "clip_tau0": float,
    "clip_p": float,
    "fixed_m": _optional_int,
    "fixed_step": float,
    "corruption": _choice(CORRUPTION_MODES),
    "corrupt_blocks": _int,
    "corrupt_p": float,
    "corrupt_magnitude": float,
    "corrupt_random_sign": _bool,
    "corrupt_baselines": _bool,
    "workers": _int,
}

DEFAULTS = {
    "game": "benchmark15",
    "n": 15,
    "a": 2.0,
    "r": -2.0,
    "noise": "symmetrized_pareto",
    "alpha": 1.8,
    "sigma": 1.0,
    "delta": None,
    "budget": 100_000,
    "budget_mode": "per_player",
    "trials": 20,
    "seed": 0,
    "axis": "samples",
    "error_kind": "relative",
    "x0": None,
    "algos": "gc_sun,clipped_sgda,clipped_seg,mom,mom:m20",
    "algo": "mom",
    "corruption": "none",
    "corrupt_blocks": 0,
    "corrupt_p": 0.0,
    "corrupt_magnitude": 1e9,
    "corrupt_random_sign": False,
    "corrupt_baselines": False,
    "workers": 1,
}

_BASELINES = "gc_sun,clipped_sgda,clipped_seg"
PRESETS = {
    "fig1": {"noise": "symmetrized_pareto", "alpha": 1.8, "algos": f"{_BASELINES},mom,mom:m20"},
    "fig2": {"noise": "symmetrized_pareto", "alpha": 1.2, "algos": f"{_BASELINES},mom,mom:m20"},
    "fig3": {"noise": "shifted_pareto", "alpha": 1.8, "sample_beta": 2.1, "eta0": 1.0, "rho": 0.1,
             "algos": f"{_BASELINES},mom,mom_bc,mom:m20,mom_bc:m20"},
    "fig4": {"noise": "shifted_pareto", "alpha": 1.8, "sample_beta": 3.0, "eta0": 1.0, "rho": 0.1,
             "algos": f"{_BASELINES},mom,mom_bc,mom:m20,mom_bc:m20"},
}

SCHEDULE_KEYS = ("step_a", "step_b", "sample_beta", "sample_c", "conf_exponent", "eta0", "rho",
                 "clip_tau0", "clip_p", "fixed_m", "fixed_step")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](value)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    return out


def load_config(path) -> dict:
    return parse_config_text(Path(path).read_text(), str(path))


def resolve_settings(args) -> dict:
    settings = dict(DEFAULTS)
    if getattr(args, "preset", None):
        settings.update(PRESETS[args.preset])
    if getattr(args, "config", None):
        settings.update(load_config(args.config))
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    _validate(settings)
    return settings


def _validate(s: dict) -> None:
    if s["trials"] < 1:
        raise ConfigError("trials must be at least 1")
    if s["budget"] < 1:
        raise ConfigError("budget must be positive")
    if s["seed"] < 0:
        raise ConfigError("seed must be non-negative")
    if s["n"] < 1:
        raise ConfigError("n must be positive")
    if s["workers"] < 1:
        raise ConfigError("workers must be positive")
    if s["noise"] in ("symmetrized_pareto", "shifted_pareto") and s["alpha"] <= 1:
        raise ConfigError("alpha must exceed 1")
    if s["noise"] == "gaussian" and s["sigma"] <= 0:
        raise ConfigError("sigma must be positive")


def build_noise(s: dict) -> NoiseModel:
    kind = s["noise"]
    if kind == "none":
        return NoiseModel.none()
    if kind == "gaussian":
        return NoiseModel.gaussian(s["sigma"], 2.0 if s["delta"] is None else s["delta"])
    if kind == "symmetrized_pareto":
        return NoiseModel.symmetrized_pareto(s["alpha"], s["delta"])
    return NoiseModel.shifted_pareto(s["alpha"], s["delta"])


def build_schedules(s: dict, **override) -> Schedules:
    kw = {k: s[k] for k in SCHEDULE_KEYS if k in s}
    kw.update(override)
    return Schedules(**kw)


def parse_seeker(token: str, s: dict) -> SeekerConfig:
    """``algo`` or ``algo:mN`` (fixed ``N`` samples per iteration)."""
    token = token.strip()
    algo, _, mod = token.partition(":")
    if algo not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algo!r}; valid: {', '.join(ALGORITHMS)}")
    override = {}
    name = algo
    if mod:
        if not (mod.startswith("m") and mod[1:].isdigit()):
            raise ConfigError(f"bad seeker modifier {mod!r}; expected mN")
        override["fixed_m"] = int(mod[1:])
        name = f"{algo}_m{mod[1:]}"
    elif s.get("fixed_m") is not None and algo in ("mom", "mom_bc"):
        name = f"{algo}_m{s['fixed_m']}"
    return SeekerConfig(algo, build_schedules(s, **override), name=name)


def build_spec(s: dict, tokens) -> ExperimentSpec:
    corruption = CorruptionModel(
        s["corruption"], c_blocks=s["corrupt_blocks"], p=s["corrupt_p"],
        magnitude=s["corrupt_magnitude"], random_sign=s["corrupt_random_sign"],
    )
    game_args = {}
    if s["game"] == "benchmark":
        game_args = {"n": s["n"]}
    elif s["game"] == "diag":
        game_args = {"n": s["n"], "a": s["a"], "r": s["r"]}
    return ExperimentSpec(
        noise=build_noise(s),
        seekers=[parse_seeker(t, s) for t in tokens],
        budget=s["budget"],
        trials=s["trials"],
        base_seed=s["seed"],
        game_id=s["game"],
        game_args=game_args,
        axis=s["axis"],
        error_kind=s["error_kind"],
        budget_mode=s["budget_mode"],
        x0=s["x0"],
        corruption=corruption,
        corrupt_baselines=s["corrupt_baselines"],
    )


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="benchmark figure parameterization")
    p.add_argument("--out", required=True, help="output directory")
    group = p.add_argument_group("settings", "each also settable as a config-file key")
    for key, parser in CONFIG_KEYS.items():
        if key in ("algo", "algos"):
            continue
        flag = "--" + key.replace("_", "-")
        shown = DEFAULTS.get(key, getattr(Schedules, key, None))
        group.add_argument(flag, dest=key, type=_argtype(parser), default=None, metavar=key.upper(),
                           help=f"default {shown}")


def _argtype(parser):
    def conv(text):
        try:
            return parser(text)
        except (ValueError, ConfigError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    conv.__name__ = getattr(parser, "__name__", "value")
    return conv


def cmd_solve_eq(args) -> int:
    game = make_game(args.game, n=args.n, a=args.a, r=args.r)
    x = solve_equilibrium(game)
    info = analyze(game)
    print("x* = [" + ", ".join(f"{v:.6f}" for v in x) + "]")
    print(f"mu = {info.mu:.6f}")
    print(f"L = {info.lipschitz:.6f}")
    print(f"G = {info.grad_bound:.6f}")
    print(f"D = {info.diameter_sq:.6f}")
    return 0


def _experiment(args, tokens, plots: bool) -> int:
    s = resolve_settings(args)
    spec = build_spec(s, tokens(s))
    trajs = run_trials(spec, workers=s["workers"])
    out = Path(args.out)
    curves = write_outputs(spec, trajs, out, extra_meta={"preset": getattr(args, "preset", None) or "none"})
    if plots:
        ylabel = f"{spec.error_kind} error"
        write_svg({n: (c["samples"].grid, c["samples"].mean_error) for n, c in curves.items()},
                  out / "error_vs_samples.svg", "Error vs. consumed samples", "samples", ylabel)
        write_svg({n: (c["iterations"].grid, c["iterations"].mean_error) for n, c in curves.items()},
                  out / "error_vs_iterations.svg", "Error vs. iterations", "iterations", ylabel)
    for name, c in curves.items():
        print(f"{name}: iterations={int(c['iterations'].grid[-1])} "
              f"final_mean_{spec.error_kind}_error={c['samples'].final:.6g}")
    return 0


def cmd_run(args) -> int:
    return _experiment(args, lambda s: [args.algo or s["algo"]], plots=False)


def cmd_compare(args) -> int:
    return _experiment(args, lambda s: [t for t in (args.algos or s["algos"]).split(",") if t.strip()],
                       plots=True)


def _emit(rows, header, out) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    if out:
        Path(out).write_text(buf.getvalue())
    sys.stdout.write(buf.getvalue())


def cmd_verify_tail(args) -> int:
    game = make_game(args.game)
    x = solve_equilibrium(game)
    kind = _noise_kind(args.noise)
    if kind == "none":
        noise = NoiseModel.none()
    elif kind == "gaussian":
        noise = NoiseModel.gaussian(args.sigma, args.delta or 2.0)
    elif kind == "symmetrized_pareto":
        noise = NoiseModel.symmetrized_pareto(args.alpha, args.delta)
    else:
        noise = NoiseModel.shifted_pareto(args.alpha, args.delta)
    res = tail_bound_test(game, x, noise, args.m, args.gamma, args.trials, RngStream(args.seed, 0))
    header = ["check", "noise", "alpha", "delta", "nu", "m", "gamma", "trials",
              "threshold", "violation_rate", "bound", "pass"]
    row = ["tail", kind, args.alpha, noise.delta, f"{noise.nu:.10g}", args.m, args.gamma, args.trials,
           f"{res.threshold:.10g}", f"{res.violation_rate:.10g}", f"{res.bound:.10g}", int(res.passed)]
    _emit([row], header, args.out)
    return 0 if res.passed else 1


def cmd_verify_chung(args) -> int:
    inst = ChungInstance(args.r, args.p, args.d, args.tau, args.k0, args.y0)
    cert = chung_oracle(inst, int(float(args.horizon)))
    header = ["check", "r", "p", "d", "tau", "k0", "horizon", "A", "K", "tightest_A", "pass"]
    row = ["chung", args.r, args.p, args.d, args.tau, args.k0, int(float(args.horizon)),
           f"{cert.A:.10g}", cert.K, f"{cert.tightest_A:.10g}", int(cert.holds)]
    _emit([row], header, args.out)
    return 0 if cert.holds else 1


def _load_curve(path):
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if header == TRIAL_HEADER:
        return mean_by_iteration(read_trials_csv(path), "sq_error")
    if header == AGGREGATE_HEADER:
        for curve in read_csv(path):
            if curve.axis == "iterations":
                return curve.grid, curve.mean_error
        raise ConfigError(f"{path}: no iterations-axis curve")
    raise ConfigError(f"{path}: not a per-trial or aggregate CSV")


def cmd_verify_rate(args) -> int:
    k, values = _load_curve(args.source)
    env = fit_envelope(k, values, delta=args.delta, beta=args.beta, rho=args.rho, zeta=args.zeta,
                       window=args.window)
    slope = fit_loglog_slope(k, values, window=0.9)
    passed = env.satisfied
    if args.slope_range:
        lo, hi = (float(v) for v in args.slope_range.split(","))
        passed = passed and lo <= slope <= hi
    header = ["check", "source", "delta", "beta", "rho", "zeta", "fitted_A", "k_start",
              "ratio_slope", "loglog_slope", "pass"]
    row = ["rate", args.source, args.delta, args.beta, "" if args.rho is None else args.rho, args.zeta,
           f"{env.fitted_A:.10g}", env.k_start, f"{env.ratio_slope:.6g}", f"{slope:.6g}", int(passed)]
    _emit([row], header, args.out)
    return 0 if passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="momnash", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-eq", help="equilibrium and game constants")
    p.add_argument("--game", default="benchmark15")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--a", type=float, default=2.0)
    p.add_argument("--r", type=float, default=-2.0)
    p.set_defaults(func=cmd_solve_eq)

    p = sub.add_parser("run", help="one seeker over Monte-Carlo trials")
    p.add_argument("--algo", default=None, help=f"one of {', '.join(ALGORITHMS)} (optionally algo:mN)")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="several seekers on a shared game, noise and budget")
    p.add_argument("--algos", default=None, help="comma-separated seekers, e.g. gc_sun,mom,mom:m20")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_compare)

    v = sub.add_parser("verify", help="theory verifiers").add_subparsers(dest="check", required=True)

    p = v.add_parser("tail", help="empirical MoM tail bound")
    p.add_argument("--game", default="benchmark15")
    p.add_argument("--noise", default="sym-pareto")
    p.add_argument("--alpha", type=float, default=1.8)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--trials", type=_argtype(_int), default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify_tail)

    p = v.add_parser("chung", help="certify a Chung-type recursion")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--d", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--k0", type=int, default=2)
    p.add_argument("--y0", type=float, default=1.0)
    p.add_argument("--horizon", default="1e6")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify_chung)

    p = v.add_parser("rate", help="fit a rate envelope to a run CSV")
    p.add_argument("--from", dest="source", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--zeta", type=float, default=0.0)
    p.add_argument("--window", type=float, default=0.5)
    p.add_argument("--slope-range", default=None, help="also require lo,hi on the log-log slope")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify_rate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ExperimentError, GameError, NoiseError, SeekerError, AnalysisError) as exc:
        print(f"momnash: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
