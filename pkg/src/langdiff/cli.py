"""Experiment runner: reproducible commands over the library.

Every run writes its resolved configuration and a manifest next to its data
outputs, so reruns are diffable.  Data outputs are byte-identical across
reruns with the same seed regardless of worker count; the manifest's
wall_time_seconds field is the one timing value excluded from that
guarantee.

Exit codes: 0 success, 2 configuration problems (parse errors, unknown
keys), 3 domain errors raised by the library, 4 verification failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, io_utils
from .core import (
    DomainError,
    ModelType,
    Parameterization,
    PredictionKind,
    RngStream,
    zero_noise_level,
)
from .fokker_planck import FPOperator, GridDensity, StabilityError, explicit_dt_bound, kl_trace
from .forward import forward_spec, integrate_forward_ensemble, uniform_level_grid
from .langevin import LangevinSpec, run_langevin_ensemble
from .oracle import GaussianMixture, oracle_field
from .reverse import generate, karras_sigma_grid, reverse_spec
from .train import (
    LossSpec,
    MLPModel,
    OptimizerConfig,
    TrainingError,
    NATIVE_OUTPUT,
    as_field,
    default_level_range,
    save_checkpoint,
    load_checkpoint,
    score_field_error,
    train,
)
from .verify import SUITES, run_suites


class ConfigError(ValueError):
    """A configuration file or flag set could not be used."""


def _out_root() -> Path:
    return Path(os.environ.get("LANGDIFF_OUT_ROOT", "runs"))


def _load_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config {path} is not valid JSON at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}"
        ) from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return obj


def _reject_unknown(config: dict, allowed: set[str], where: str) -> None:
    unknown = set(config) - allowed
    if unknown:
        raise ConfigError(
            f"unknown {where} keys: {sorted(unknown)}; allowed: {sorted(allowed)}"
        )


def _resolve_config(args, defaults: dict, allowed: set[str], optional: set[str] = frozenset()) -> dict:
    config = dict(defaults)
    if getattr(args, "config", None):
        file_config = _load_config_file(args.config)
        _reject_unknown(file_config, allowed, "config")
        config.update(file_config)
    for key in allowed:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            config[key] = flag
    missing = [k for k, v in config.items() if v is None and k not in optional]
    if missing:
        raise ConfigError(f"missing required settings: {sorted(missing)}")
    return config


def _mixture_from_setting(value) -> GaussianMixture:
    if isinstance(value, str):
        value = _load_config_file(value)
    if not isinstance(value, dict):
        raise ConfigError("mixture must be a JSON object or a path to one")
    try:
        return GaussianMixture.from_config(value)
    except ValueError as exc:
        raise ConfigError(f"bad mixture: {exc}") from exc


class RunWriter:
    """Collects output files for one run and writes the manifest last."""

    def __init__(self, command: str, out_dir: Path, config: dict):
        self.command = command
        self.out_dir = out_dir
        self.config = config
        self.outputs: list[str] = []
        self.started = time.monotonic()
        out_dir.mkdir(parents=True, exist_ok=True)
        io_utils.dump_json(config, out_dir / "config.json")
        self.outputs.append("config.json")

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out_dir / name

    def emit_gnuplot(self, csv_name: str, title: str, ycols: list[tuple[int, str]]) -> None:
        plots = ", ".join(
            f"'{csv_name}' using 1:{col} with lines title '{label}'"
            for col, label in ycols
        )
        text = (
            "set datafile separator ','\n"
            f"set title '{title}'\n"
            "set key outside\n"
            f"plot {plots}\n"
        )
        self.path(csv_name + ".gnuplot").write_text(text)

    def finish(self, seed) -> None:
        canonical = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        manifest = {
            "command": self.command,
            "artifact_version": __version__,
            "seed": seed,
            "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
            "outputs": sorted(self.outputs),
            "wall_time_seconds": time.monotonic() - self.started,
        }
        io_utils.dump_json(manifest, self.out_dir / "manifest.json")


# ---------------------------------------------------------------------------
# convert


def cmd_convert(args) -> int:
    if args.json:
        obj = _load_config_file(args.json)
        if "prediction" in obj:
            pred = io_utils.prediction_from_json(obj["prediction"])
            if not args.to_kind:
                raise ConfigError("converting a prediction needs --to-kind")
            from .convert import convert_prediction

            result = convert_prediction(pred, PredictionKind.from_label(args.to_kind))
            print(io_utils.dump_json({"prediction": io_utils.prediction_to_json(result)}))
            return 0
        if "point" in obj:
            point = io_utils.point_from_json(obj["point"])
        else:
            raise ConfigError("--json file must hold a 'point' or 'prediction' object")
    else:
        if args.state is None or args.src is None:
            raise ConfigError("need --from and --state (or --json)")
        levels = [v for v in (args.alpha, args.sigma, args.s, args.level) if v is not None]
        if len(levels) != 1:
            raise ConfigError("give exactly one of --alpha, --sigma, --s, --level")
        state = np.array([float(v) for v in args.state.split(",")])
        from .core import ParamPoint

        point = ParamPoint(Parameterization.from_label(args.src), state, levels[0])
    if not args.to:
        raise ConfigError("need --to for point conversion")
    from .convert import convert_point

    result = convert_point(point, Parameterization.from_label(args.to))
    print(io_utils.dump_json({"point": io_utils.point_to_json(result)}))
    return 0


# ---------------------------------------------------------------------------
# sample-forward

_FORWARD_KEYS = {
    "param", "x0", "chains", "steps", "max-level", "seed", "workers", "out-dir",
    "emit-gnuplot",
}


def cmd_sample_forward(args) -> int:
    defaults = {
        "param": "vp", "x0": [1.0], "chains": 64, "steps": 200, "max-level": None,
        "seed": 0, "workers": 1, "out-dir": None, "emit-gnuplot": False,
    }
    config = _resolve_config(args, defaults, _FORWARD_KEYS, optional={"max-level", "out-dir"})
    param = Parameterization.from_label(config["param"])
    if config["max-level"] is None:
        config["max-level"] = {"vp": 1e-4, "ve": 4.0, "rf": 0.99}[param.label]
    out_dir = Path(config["out-dir"]) if config["out-dir"] else _out_root() / "sample-forward"
    config["out-dir"] = str(out_dir)
    writer = RunWriter("sample-forward", out_dir, config)
    spec = forward_spec(param)
    grid = uniform_level_grid(param, float(config["max-level"]), int(config["steps"]))
    x0 = np.asarray(config["x0"], dtype=np.float64)
    ens = integrate_forward_ensemble(
        spec, x0, grid, RngStream(int(config["seed"])), int(config["chains"]),
        workers=int(config["workers"]), record_indices=range(grid.size),
    )
    d = x0.size
    header = ["chain_id", "level"] + [f"state_{i}" for i in range(d)]
    rows = []
    for chain in range(int(config["chains"])):
        for k in range(grid.size):
            rows.append([chain, float(grid[k]), *ens[k][chain]])
    io_utils.write_csv(writer.path("forward.csv"), header, rows)
    if config["emit-gnuplot"]:
        writer.emit_gnuplot("forward.csv", "forward trajectories", [(3, "state_0")])
    writer.finish(config["seed"])
    return 0


# ---------------------------------------------------------------------------
# sample-reverse

_REVERSE_KEYS = {
    "model-type", "field", "steps", "chains", "seed", "out", "mixture", "workers",
    "horizon", "heun", "sigma-spacing", "karras-rho", "emit-gnuplot",
}


def cmd_sample_reverse(args) -> int:
    defaults = {
        "model-type": "vp-sde", "field": "oracle", "steps": 400, "chains": 10_000,
        "seed": 0, "out": None, "mixture": None, "workers": 1, "horizon": None,
        "heun": False, "sigma-spacing": "uniform", "karras-rho": 7.0,
        "emit-gnuplot": False,
    }
    config = _resolve_config(
        args, defaults, _REVERSE_KEYS, optional={"out", "mixture", "horizon"}
    )
    model_type = ModelType.from_label(config["model-type"])
    field_setting = config["field"]
    if field_setting == "oracle":
        if config["mixture"] is None:
            raise ConfigError("--field oracle needs --mixture (JSON file or object)")
        data = _mixture_from_setting(config["mixture"])
        if isinstance(config["mixture"], str):
            config["mixture"] = data.to_config()
        field = oracle_field(data, model_type.param, model_type.native_kind)
        dim = data.dim
        data_std = math.sqrt(max(np.max(np.linalg.eigvalsh(data.cov())), 1e-12))
    elif isinstance(field_setting, str) and field_setting.startswith("checkpoint:"):
        model = load_checkpoint(field_setting.split(":", 1)[1])
        field = as_field(model, model_type.param)
        dim = model.dim
        data_std = 1.0
    else:
        raise ConfigError("--field must be 'oracle' or 'checkpoint:<path>'")
    out = Path(config["out"]) if config["out"] else _out_root() / "sample-reverse" / "samples.csv"
    config["out"] = str(out)
    writer = RunWriter("sample-reverse", out.parent, config)
    horizon = float(config["horizon"]) if config["horizon"] is not None else None
    spec = reverse_spec(
        model_type, field, dim, data_std=data_std, horizon=horizon,
        heun=bool(config["heun"]),
    )
    grid = None
    if config["sigma-spacing"] == "karras":
        if model_type is not ModelType.VE_KARRAS:
            raise ConfigError("karras spacing applies to the ve row only")
        grid = karras_sigma_grid(
            spec.horizon, int(config["steps"]), rho=float(config["karras-rho"])
        )
    elif config["sigma-spacing"] != "uniform":
        raise ConfigError("sigma-spacing must be uniform or karras")
    final, _ = generate(
        spec, int(config["chains"]), int(config["steps"]),
        RngStream(int(config["seed"])), workers=int(config["workers"]), grid=grid,
    )
    header = ["chain_id"] + [f"state_{i}" for i in range(dim)]
    rows = [[i, *final[i]] for i in range(final.shape[0])]
    io_utils.write_csv(writer.path(out.name), header, rows)
    if config["emit-gnuplot"]:
        writer.emit_gnuplot(out.name, "reverse samples", [(2, "state_0")])
    writer.finish(config["seed"])
    return 0


# ---------------------------------------------------------------------------
# langevin

_LANGEVIN_KEYS = {
    "target", "param", "level", "g", "dtau", "steps", "chains", "init-mean",
    "init-std", "seed", "record-every", "workers", "out-dir", "emit-gnuplot",
}


def cmd_langevin(args) -> int:
    defaults = {
        "target": "standard-normal", "param": "vp", "level": None, "g": 1.0,
        "dtau": 1e-3, "steps": 5000, "chains": 5000, "init-mean": 0.0,
        "init-std": 2.0, "seed": 0, "record-every": 100, "workers": 1,
        "out-dir": None, "emit-gnuplot": False,
    }
    config = _resolve_config(args, defaults, _LANGEVIN_KEYS, optional={"level", "out-dir"})
    param = Parameterization.from_label(config["param"])
    level = config["level"] if config["level"] is not None else zero_noise_level(param)
    config["level"] = level
    if config["target"] == "standard-normal":
        dim = 1
        score_fn = lambda x, lvl: -x  # noqa: E731
    else:
        data = _mixture_from_setting(config["target"])
        config["target"] = data.to_config()
        dim = data.dim
        from .oracle import score_field as mk_score_field

        score_fn = mk_score_field(data, param)
    out_dir = Path(config["out-dir"]) if config["out-dir"] else _out_root() / "langevin"
    config["out-dir"] = str(out_dir)
    writer = RunWriter("langevin", out_dir, config)
    g_value = float(config["g"])
    spec = LangevinSpec(
        score_field=score_fn, g=lambda tau: g_value, param=param, level=float(level)
    )
    mean = float(config["init-mean"])
    std = float(config["init-std"])

    def init(n, rng):
        return mean + std * rng.normal((n, dim))

    final, trace = run_langevin_ensemble(
        spec, int(config["chains"]), dim, init, float(config["dtau"]),
        int(config["steps"]), RngStream(int(config["seed"])),
        record_every=int(config["record-every"]), workers=int(config["workers"]),
    )
    header = ["step", "tau"] + [f"mean_{i}" for i in range(dim)] + [
        f"var_{i}" for i in range(dim)
    ]
    if dim == 1:
        header.append("mass_positive")
    rows = []
    for step, snapshot in trace:
        row = [step, step * float(config["dtau"])]
        row.extend(snapshot.mean(axis=0))
        row.extend(snapshot.var(axis=0, ddof=1))
        if dim == 1:
            row.append(float(np.mean(snapshot[:, 0] > 0)))
        rows.append(row)
    io_utils.write_csv(writer.path("moments.csv"), header, rows)
    if config["emit-gnuplot"]:
        writer.emit_gnuplot("moments.csv", "langevin moment trace", [(3, "mean_0"), (4, "var_0")])
    writer.finish(config["seed"])
    return 0


# ---------------------------------------------------------------------------
# train

_TRAIN_KEYS = {
    "data", "model-type", "prediction-kind", "hidden", "steps", "batch-size",
    "optimizer", "lr", "momentum", "weight-mode", "seed", "level-range",
    "eval-levels", "eval-samples", "out-dir", "emit-gnuplot",
}


def cmd_train(args) -> int:
    defaults = {
        "data": None, "model-type": "vp", "prediction-kind": None,
        "hidden": [64, 64, 64], "steps": 2000, "batch-size": 128,
        "optimizer": "adam", "lr": 1e-3, "momentum": 0.9, "weight-mode": "paper",
        "seed": 0, "level-range": None, "eval-levels": None, "eval-samples": 4000,
        "out-dir": None, "emit-gnuplot": False,
    }
    config = _resolve_config(
        args, defaults, _TRAIN_KEYS,
        optional={"prediction-kind", "level-range", "eval-levels", "out-dir"},
    )
    data = _mixture_from_setting(config["data"])
    config["data"] = data.to_config()
    family = Parameterization.from_label(config["model-type"])
    kind = (
        PredictionKind.from_label(config["prediction-kind"])
        if config["prediction-kind"]
        else NATIVE_OUTPUT[family]
    )
    config["prediction-kind"] = kind.label
    data_std = math.sqrt(max(np.max(np.linalg.eigvalsh(data.cov())), 1e-12))
    level_range = (
        tuple(config["level-range"])
        if config["level-range"]
        else default_level_range(family, data_std)
    )
    config["level-range"] = list(level_range)
    lo, hi = level_range
    if not config["eval-levels"]:
        config["eval-levels"] = [lo + frac * (hi - lo) for frac in (0.25, 0.5, 0.75)]
    out_dir = Path(config["out-dir"]) if config["out-dir"] else _out_root() / "train"
    config["out-dir"] = str(out_dir)
    writer = RunWriter("train", out_dir, config)
    rng = RngStream(int(config["seed"]), stream_id=999)
    model = MLPModel.create(
        data.dim, [int(w) for w in config["hidden"]], kind, family, level_range, rng
    )
    spec = LossSpec(family, config["weight-mode"])
    schedule = OptimizerConfig(
        kind=config["optimizer"], lr=float(config["lr"]), steps=int(config["steps"]),
        batch_size=int(config["batch-size"]), momentum=float(config["momentum"]),
        seed=int(config["seed"]),
    )
    result = train(model, data, family, spec, schedule)
    save_checkpoint(result.model, writer.path("checkpoint.json"), loss_spec=spec)
    io_utils.write_csv(
        writer.path("loss_trace.csv"), ["step", "loss"],
        [[s, l] for s, l in result.loss_trace],
    )
    errors = score_field_error(
        result.model, data, config["eval-levels"], int(config["eval-samples"]), rng.spawn(1000)
    )
    io_utils.write_csv(
        writer.path("oracle_error.csv"), ["level", "relative_l2_error"], errors
    )
    if config["emit-gnuplot"]:
        writer.emit_gnuplot("loss_trace.csv", "training loss", [(2, "loss")])
    writer.finish(config["seed"])
    return 0


# ---------------------------------------------------------------------------
# fp-solve

_FP_KEYS = {
    "drift", "diffusion", "domain", "cells", "dt", "horizon", "scheme",
    "record-every", "p0", "q0", "out-dir", "emit-gnuplot",
}


def _gaussian_density(mean: float, var: float):
    def fn(x):
        return np.exp(-((x - mean) ** 2) / (2.0 * var))

    return fn


def cmd_fp_solve(args) -> int:
    defaults = {
        "drift": {"kind": "linear", "rate": -1.0}, "diffusion": math.sqrt(2.0),
        "domain": [-10.0, 10.0], "cells": 500, "dt": None, "horizon": 0.6,
        "scheme": "explicit", "record-every": 5,
        "p0": {"mean": 1.0, "var": 0.25}, "q0": {"mean": -0.5, "var": 1.0},
        "out-dir": None, "emit-gnuplot": False,
    }
    config = _resolve_config(args, defaults, _FP_KEYS, optional={"dt", "out-dir"})
    drift_cfg = config["drift"]
    if not isinstance(drift_cfg, dict) or drift_cfg.get("kind") not in ("linear", "zero"):
        raise ConfigError("drift must be {'kind': 'linear'|'zero', ...}")
    if drift_cfg["kind"] == "linear":
        rate = float(drift_cfg.get("rate", -1.0))
        drift = lambda x, t: rate * x  # noqa: E731
    else:
        drift = lambda x, t: np.zeros_like(x)  # noqa: E731
    g_value = float(config["diffusion"])
    op = FPOperator(drift=drift, diffusion=lambda t: g_value, scheme=config["scheme"])
    lo, hi = (float(v) for v in config["domain"])
    cells = int(config["cells"])
    p0 = GridDensity.from_function(
        _gaussian_density(float(config["p0"]["mean"]), float(config["p0"]["var"])),
        lo, hi, cells,
    )
    q0 = GridDensity.from_function(
        _gaussian_density(float(config["q0"]["mean"]), float(config["q0"]["var"])),
        lo, hi, cells,
    )
    dt = config["dt"]
    if dt is None:
        dt = 0.8 * explicit_dt_bound(op, p0, 0.0) if op.scheme == "explicit" else 1e-3
        config["dt"] = dt
    out_dir = Path(config["out-dir"]) if config["out-dir"] else _out_root() / "fp-solve"
    config["out-dir"] = str(out_dir)
    writer = RunWriter("fp-solve", out_dir, config)
    trace = kl_trace(
        op, p0, q0, float(config["horizon"]), float(dt),
        record_every=int(config["record-every"]),
    )
    rows = [
        [t, kl, dkl, l]
        for t, kl, dkl, l in zip(trace.times, trace.kl, trace.dkl_dt, trace.mismatch)
    ]
    io_utils.write_csv(
        writer.path("kl_trace.csv"), ["t", "kl", "dkl_dt", "score_mismatch"], rows
    )
    if config["emit-gnuplot"]:
        writer.emit_gnuplot("kl_trace.csv", "KL decay", [(2, "kl")])
    writer.finish(None)
    return 0


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    names = args.suite or None
    results = run_suites(names)
    width = max(len(f"[{s}] {r.name}") for s, r in results)
    failed = []
    for suite, result in results:
        mark = "PASS" if result.passed else "FAIL"
        label = f"[{suite}] {result.name}"
        print(f"{mark}  {label:<{width}}  {result.detail}")
        if not result.passed:
            failed.append(label)
    print(f"{len(results) - len(failed)}/{len(results)} properties passed")
    if failed:
        print("failed properties:", file=sys.stderr)
        for label in failed:
            print(f"  {label}", file=sys.stderr)
        return 4
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="langdiff",
        description="Noising/denoising process experiments with analytic oracles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert a point or prediction between forms")
    p.add_argument("--from", dest="src", choices=["vp", "ve", "rf"])
    p.add_argument("--to", choices=["vp", "ve", "rf"])
    p.add_argument("--state", help="comma-separated components")
    p.add_argument("--alpha", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--level", type=float)
    p.add_argument("--json", help="file holding a point or prediction object")
    p.add_argument("--to-kind", choices=["score", "noise", "velocity"])
    p.set_defaults(func=cmd_convert)

    def add_common(p, with_config=True):
        if with_config:
            p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--emit-gnuplot", dest="emit_gnuplot", action="store_const", const=True)

    p = sub.add_parser("sample-forward", help="simulate forward noising trajectories")
    add_common(p)
    p.add_argument("--param", choices=["vp", "ve", "rf"])
    p.add_argument("--chains", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--max-level", dest="max_level", type=float)
    p.set_defaults(func=cmd_sample_forward)

    p = sub.add_parser("sample-reverse", help="generate samples by reverse integration")
    add_common(p)
    p.add_argument("--model-type", dest="model_type", choices=["vp-sde", "vp-ode", "ve", "rf"])
    p.add_argument("--field", help="'oracle' or 'checkpoint:<path>'")
    p.add_argument("--steps", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--out")
    p.add_argument("--mixture", help="mixture JSON file (for the oracle field)")
    p.add_argument("--horizon", type=float)
    p.add_argument("--heun", action="store_const", const=True)
    p.add_argument("--sigma-spacing", dest="sigma_spacing", choices=["uniform", "karras"])
    p.add_argument("--karras-rho", dest="karras_rho", type=float)
    p.set_defaults(func=cmd_sample_reverse)

    p = sub.add_parser("langevin", help="run stationarity experiments")
    add_common(p)
    p.add_argument("--target", help="'standard-normal' or mixture JSON file")
    p.add_argument("--param", choices=["vp", "ve", "rf"])
    p.add_argument("--level", type=float)
    p.add_argument("--g", type=float)
    p.add_argument("--dtau", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--init-mean", dest="init_mean", type=float)
    p.add_argument("--init-std", dest="init_std", type=float)
    p.add_argument("--record-every", dest="record_every", type=int)
    p.set_defaults(func=cmd_langevin)

    p = sub.add_parser("train", help="train a prediction network")
    add_common(p)
    p.add_argument("--data", help="mixture JSON file")
    p.add_argument("--model-type", dest="model_type", choices=["vp", "ve", "rf"])
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--optimizer", choices=["sgd", "adam"])
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-mode", dest="weight_mode", choices=["paper", "uniform"])
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("fp-solve", help="evolve densities and trace KL decay")
    add_common(p)
    p.add_argument("--cells", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--scheme", choices=["explicit", "implicit"])
    p.add_argument("--record-every", dest="record_every", type=int)
    p.set_defaults(func=cmd_fp_solve)

    p = sub.add_parser("verify", help="run the property suites")
    p.add_argument(
        "--suite", action="append", choices=sorted(SUITES),
        help="suite to run (repeatable; default all)",
    )
    p.set_defaults(func=cmd_verify)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, StabilityError, TrainingError) as exc:
        print(f"domain error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
