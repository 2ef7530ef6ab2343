"""Command-line pipeline around the library: data, training, analyses.

One command per workflow: ``generate``, ``train``, ``eval``, ``certify``,
``region``, ``adapt``, ``threshold``, ``timebound``, and a ``pipeline``
meta-command chaining generate, train, and eval.  Every command accepts
``--config FILE`` (a JSON object of option values; explicit flags win) and
is fully determined by its resolved options: seeds are always explicit,
never taken from the clock, so rerunning a command reproduces its outputs
byte for byte.  Outputs embed the resolved configuration and tool version:
JSON reports carry a ``provenance`` object, CSV files carry trailing
comment lines.

Exit codes: 0 success (or certification satisfied), 1 certification
violated, 2 usage or input error, 3 certification undetermined,
4 numerical failure.  Failures print a one-line JSON error object on
stderr.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .analysis import (
    _derived_seed,
    adaptation_loop,
    default_train_config,
    region_analysis,
    save_region_csv,
    save_sweep_csv,
    select_threshold_min_fn,
    threshold_sweep,
    timebound_analysis,
    train_ensemble,
    train_network,
)
from .errors import ConfigError, ContractError, ParseError, SimulationError
from .nets import ARCHITECTURES, Ensemble, Network, load_model, save_model
from .sampling import adaptive_preset, generate_dataset, load_csv, save_csv
from .sprt import SPRTConfig, certification_stream, sprt_certify
from .stats import evaluate
from .systems import get_model
from .train import TrainConfig

__all__ = ["main"]

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_USAGE = 2
EXIT_UNDETERMINED = 3
EXIT_NUMERIC = 4

_ENSEMBLE_ARCHS = ("ens1", "ens2")

try:  # optional: caps BLAS pools when available; algorithms are 1-thread
    from threadpoolctl import threadpool_limits as _threadpool_limits
except ImportError:  # pragma: no cover - not installed in minimal envs
    _threadpool_limits = None


def _emit_error(exc: Exception) -> None:
    payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors as JSON on stderr."""

    def error(self, message: str) -> None:  # noqa: D102 - argparse contract
        payload = {
            "error": {
                "type": "UsageError",
                "message": message,
                "usage": self.format_usage().strip(),
            }
        }
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _provenance(command: str, cfg: dict) -> dict:
    shown = {k: v for k, v in cfg.items() if v is not None}
    return {
        "tool": "reachlearn",
        "version": __version__,
        "command": command,
        "config": shown,
    }


def _append_csv_provenance(path: str, command: str, cfg: dict) -> None:
    prov = _provenance(command, cfg)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(f"# tool=reachlearn {__version__}\n")
        fh.write(f"# run_config={json.dumps(prov, sort_keys=True)}\n")


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _save_model_with_provenance(
    obj, path: str, command: str, cfg: dict, member_files: Optional[list] = None
) -> None:
    save_model(obj, path)
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    payload["provenance"] = _provenance(command, cfg)
    if member_files is not None:
        payload["member_files"] = member_files
    _write_json(path, payload)


def _write_train_log_csv(path: str, losses: Sequence[float], command: str, cfg: dict) -> None:
    lines = ["epoch,loss"]
    lines += [f"{i},{loss!r}" for i, loss in enumerate(losses)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    _append_csv_provenance(path, command, cfg)


def _require(cfg: dict, *names: str) -> None:
    missing = [n for n in names if cfg.get(n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ConfigError(f"missing required option(s): {flags}")


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """Layer resolved options: defaults, then config file, then flags."""
    merged = dict(defaults)
    given = {
        k: v
        for k, v in vars(args).items()
        if k not in ("func", "command", "config")
    }
    path = getattr(args, "config", None)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"config file is not valid JSON: {exc}", str(path))
        if not isinstance(file_cfg, dict):
            raise ParseError("config file must hold a JSON object", str(path))
        unknown = sorted(set(file_cfg) - set(defaults))
        if unknown:
            raise ConfigError(
                f"unknown config key(s) {unknown}; valid keys: {sorted(defaults)}"
            )
        merged.update(file_cfg)
    merged.update(given)
    return merged


def _int_pair(value, sep: str, name: str) -> Tuple[int, int]:
    if isinstance(value, str):
        parts = value.split(sep)
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        raise ConfigError(f"{name} must be two integers separated by {sep!r}")
    if len(parts) != 2:
        raise ConfigError(f"{name} needs exactly two values, got {value!r}")
    try:
        return int(parts[0]), int(parts[1])
    except (TypeError, ValueError):
        raise ConfigError(f"{name} values must be integers, got {value!r}")


def _float_list(value, name: str) -> list:
    if isinstance(value, str):
        parts = [p for p in value.split(",") if p.strip()]
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        raise ConfigError(f"{name} must be a comma-separated list of numbers")
    if not parts:
        raise ConfigError(f"{name} must not be empty")
    try:
        return [float(p) for p in parts]
    except (TypeError, ValueError):
        raise ConfigError(f"{name} values must be numbers, got {value!r}")


@contextlib.contextmanager
def _thread_cap(threads):
    if threads is None:
        yield
        return
    threads = int(threads)
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    if _threadpool_limits is None:
        yield
        return
    with _threadpool_limits(limits=threads):
        yield


def _load_dataset(path: str):
    if not os.path.exists(path):
        raise ConfigError(f"dataset file not found: {path}")
    return load_csv(path)


def _load_classifier(path: str):
    if not os.path.exists(path):
        raise ConfigError(f"model file not found: {path}")
    return load_model(path)


def _load_network(path: str) -> Network:
    clf = _load_classifier(path)
    if not isinstance(clf, Network):
        raise ConfigError(
            "this command needs a single network; got an ensemble"
        )
    return clf


_TRAIN_FIELD_NAMES = (
    "algorithm",
    "max_epochs",
    "loss",
    "learning_rate",
    "batch_size",
    "lm_mu_init",
    "lm_mu_factor",
    "patience",
)


def _train_config_from(cfg: dict, arch: str) -> TrainConfig:
    """Architecture default, overridden by any explicitly set field."""
    base_arch = "dnn-s" if arch in _ENSEMBLE_ARCHS else arch
    base = default_train_config(base_arch, seed=cfg["seed"])
    overrides = {
        name: cfg[name] for name in _TRAIN_FIELD_NAMES if cfg.get(name) is not None
    }
    return replace(base, **overrides) if overrides else base


def _adaptive_config(model_name: str, strategy: str):
    return adaptive_preset(model_name) if strategy == "adaptive" else None


# ---------------------------------------------------------------------------
# command handlers


def _cmd_generate(cfg: dict) -> int:
    _require(cfg, "model", "out")
    model = get_model(cfg["model"])
    ds = generate_dataset(
        model,
        cfg["count"],
        strategy=cfg["strategy"],
        time_bound=cfg["T"],
        step=cfg["h"],
        seed=cfg["seed"],
        adaptive=_adaptive_config(model.name, cfg["strategy"]),
    )
    save_csv(ds, cfg["out"])
    _append_csv_provenance(cfg["out"], "generate", cfg)
    _print_json(
        {
            "out": cfg["out"],
            "count": len(ds),
            "positive_fraction": ds.positive_fraction,
            "discarded": ds.discarded,
            "time_bound": ds.time_bound,
            "step": ds.step,
        }
    )
    return EXIT_OK


def _cmd_train(cfg: dict) -> int:
    _require(cfg, "data", "arch", "out")
    arch = cfg["arch"]
    if arch not in ARCHITECTURES and arch not in _ENSEMBLE_ARCHS:
        valid = sorted(ARCHITECTURES) + list(_ENSEMBLE_ARCHS)
        raise ConfigError(f"unknown architecture {arch!r}; choose from {valid}")
    ds = _load_dataset(cfg["data"])
    model = get_model(ds.model)
    out = cfg["out"]
    stem, ext = os.path.splitext(out)
    ext = ext or ".json"

    if arch in _ENSEMBLE_ARCHS:
        if cfg["threshold"] is not None:
            raise ConfigError("threshold applies to single networks only")
        overrides = {
            n: cfg[n] for n in _TRAIN_FIELD_NAMES if cfg.get(n) is not None
        }
        configs = None
        if overrides:
            raise ConfigError(
                "per-field training overrides apply to single networks;"
                " ensemble members use their architecture defaults"
            )
        ens, logs = train_ensemble(arch, model, ds, seed=cfg["seed"], configs=configs)
        member_files = [f"{stem}.member{i}{ext}" for i in range(len(ens.members))]
        for member, mpath, log in zip(ens.members, member_files, logs):
            _save_model_with_provenance(member, mpath, "train", cfg)
            _write_train_log_csv(
                os.path.splitext(mpath)[0] + ".log.csv", log.losses, "train", cfg
            )
        _save_model_with_provenance(ens, out, "train", cfg, member_files=member_files)
        _print_json(
            {
                "out": out,
                "member_files": member_files,
                "final_losses": [log.final_loss for log in logs],
                "stop_reasons": [log.stop_reason for log in logs],
            }
        )
        return EXIT_OK

    threshold = 0.5 if cfg["threshold"] is None else cfg["threshold"]
    train_cfg = _train_config_from(cfg, arch)
    net, log = train_network(
        arch, model, ds, seed=cfg["seed"], config=train_cfg, threshold=threshold
    )
    _save_model_with_provenance(net, out, "train", cfg)
    _write_train_log_csv(stem + ".log.csv", log.losses, "train", cfg)
    _print_json(
        {
            "out": out,
            "log": stem + ".log.csv",
            "epochs": log.epochs,
            "initial_loss": log.initial_loss,
            "final_loss": log.final_loss,
            "stop_reason": log.stop_reason,
        }
    )
    return EXIT_OK


def _cmd_eval(cfg: dict) -> int:
    _require(cfg, "net", "data")
    clf = _load_classifier(cfg["net"])
    ds = _load_dataset(cfg["data"])
    report = evaluate(clf, ds, alpha=cfg["alpha"])
    payload = {"provenance": _provenance("eval", cfg), **report.as_dict()}
    if cfg["out"] is not None:
        _write_json(cfg["out"], payload)
    _print_json(report.as_dict())
    return EXIT_OK


def _cmd_certify(cfg: dict) -> int:
    _require(cfg, "net", "model", "metric", "theta")
    clf = _load_classifier(cfg["net"])
    model = get_model(cfg["model"])
    sprt_cfg = SPRTConfig(
        metric=cfg["metric"],
        theta=cfg["theta"],
        delta=cfg["delta"],
        alpha=cfg["alpha"],
        beta=cfg["beta"],
        max_samples=cfg["max_samples"],
    )
    stream = certification_stream(
        clf,
        model,
        cfg["metric"],
        seed=cfg["seed"],
        time_bound=cfg["T"],
        step=cfg["h"],
    )
    verdict = sprt_certify(stream, sprt_cfg)
    payload = {
        "provenance": _provenance("certify", cfg),
        "decision": verdict.decision,
        "samples_used": verdict.samples_used,
        "log_ratio": verdict.log_ratio,
    }
    if cfg["out"] is not None:
        _write_json(cfg["out"], payload)
    _print_json(
        {
            "decision": verdict.decision,
            "samples_used": verdict.samples_used,
            "log_ratio": verdict.log_ratio,
        }
    )
    return {
        "satisfied": EXIT_OK,
        "violated": EXIT_VIOLATED,
        "undetermined": EXIT_UNDETERMINED,
    }[verdict.decision]


def _cmd_region(cfg: dict) -> int:
    _require(cfg, "net", "model", "out")
    clf = _load_classifier(cfg["net"])
    model = get_model(cfg["model"])
    axes = _int_pair(cfg["axes"], ",", "axes")
    rows, cols = _int_pair(cfg["grid"], "x", "grid")
    report = region_analysis(
        clf,
        model,
        axes=axes,
        grid=(rows, cols),
        per_cell=cfg["per_cell"],
        time_bound=cfg["T"],
        step=cfg["h"],
        seed=cfg["seed"],
        alpha=cfg["alpha"],
    )
    save_region_csv(report, cfg["out"])
    _append_csv_provenance(cfg["out"], "region", cfg)
    accs = [c.acc for c in report.cells]
    fns = [c.fn_rate for c in report.cells]
    _print_json(
        {
            "out": cfg["out"],
            "cells": len(report.cells),
            "acc_min": min(accs),
            "acc_max": max(accs),
            "fn_max": max(fns),
        }
    )
    return EXIT_OK


def _cmd_adapt(cfg: dict) -> int:
    _require(cfg, "net", "model", "out")
    net = _load_network(cfg["net"])
    model = get_model(cfg["model"])
    if cfg["test_data"] is not None:
        fixed_test = _load_dataset(cfg["test_data"])
    else:
        fixed_test = generate_dataset(
            model,
            cfg["test_size"],
            strategy="uniform",
            time_bound=cfg["T"],
            step=cfg["h"],
            seed=cfg["test_seed"],
        )
    final, report = adaptation_loop(
        net,
        model,
        fixed_test,
        iterations=cfg["iterations"],
        per_iter_samples=cfg["per_iter"],
        learning_rate=cfg["rate"],
        freeze_biases=not cfg["train_biases"],
        seed=cfg["seed"],
        time_bound=cfg["T"],
        step=cfg["h"],
        alpha=cfg["alpha"],
    )
    _save_model_with_provenance(final, cfg["out"], "adapt", cfg)
    if cfg["report"] is not None:
        _write_json(
            cfg["report"],
            {"provenance": _provenance("adapt", cfg), **report.as_dict()},
        )
    _print_json(
        {
            "out": cfg["out"],
            "initial_fn": report.initial.fn_rate,
            "final_fn": report.final.fn_rate,
            "final_acc": report.final.acc,
            "fn_collected": int(report.accumulated_fn.shape[0]),
            "reclassified_fraction": report.reclassified_fraction,
        }
    )
    return EXIT_OK


def _cmd_threshold(cfg: dict) -> int:
    _require(cfg, "net", "data")
    net = _load_network(cfg["net"])
    ds = _load_dataset(cfg["data"])
    thetas = None if cfg["thetas"] is None else _float_list(cfg["thetas"], "thetas")
    sweep = threshold_sweep(net, ds, thresholds=thetas, alpha=cfg["alpha"])
    if cfg["out"] is not None:
        save_sweep_csv(sweep, cfg["out"])
        _append_csv_provenance(cfg["out"], "threshold", cfg)
    summary = {
        "points": len(sweep),
        "fn_min": min(m.fn_rate for m in sweep.metrics),
        "fn_max": max(m.fn_rate for m in sweep.metrics),
    }
    if cfg["max_acc_loss"] is not None:
        baseline = cfg["baseline_acc"]
        if baseline is None:
            baseline = evaluate(net, ds, alpha=cfg["alpha"]).acc
        theta_star = select_threshold_min_fn(sweep, cfg["max_acc_loss"], baseline)
        at = sweep.metrics[sweep.values.index(theta_star)]
        summary.update(
            {
                "theta_star": theta_star,
                "baseline_acc": baseline,
                "acc": at.acc,
                "fn_rate": at.fn_rate,
                "fp_rate": at.fp_rate,
            }
        )
    if cfg["out"] is not None:
        summary["out"] = cfg["out"]
    _print_json(summary)
    return EXIT_OK


def _cmd_timebound(cfg: dict) -> int:
    _require(cfg, "model", "T_grid", "out")
    model = get_model(cfg["model"])
    grid = _float_list(cfg["T_grid"], "T-grid")
    sweep = timebound_analysis(
        model,
        grid,
        train_size=cfg["train_size"],
        test_size=cfg["test_size"],
        arch=cfg["arch"],
        strategy=cfg["strategy"],
        seed=cfg["seed"],
        step=cfg["h"],
        alpha=cfg["alpha"],
    )
    save_sweep_csv(sweep, cfg["out"])
    _append_csv_provenance(cfg["out"], "timebound", cfg)
    _print_json(
        {
            "out": cfg["out"],
            "time_bounds": list(sweep.values),
            "acc": [m.acc for m in sweep.metrics],
        }
    )
    return EXIT_OK


def _cmd_pipeline(cfg: dict) -> int:
    _require(cfg, "model", "outdir")
    model = get_model(cfg["model"])
    arch = cfg["arch"]
    if arch not in ARCHITECTURES and arch not in _ENSEMBLE_ARCHS:
        valid = sorted(ARCHITECTURES) + list(_ENSEMBLE_ARCHS)
        raise ConfigError(f"unknown architecture {arch!r}; choose from {valid}")
    outdir = cfg["outdir"]
    os.makedirs(outdir, exist_ok=True)
    seed = cfg["seed"]
    adaptive = _adaptive_config(model.name, cfg["strategy"])

    test_ds = generate_dataset(
        model,
        cfg["test_count"],
        strategy="uniform",
        time_bound=cfg["T"],
        step=cfg["h"],
        seed=_derived_seed(seed, (1,)),
    )
    test_path = os.path.join(outdir, "test.csv")
    save_csv(test_ds, test_path)
    _append_csv_provenance(test_path, "pipeline", cfg)

    model_path = os.path.join(outdir, "model.json")
    if arch in _ENSEMBLE_ARCHS:
        # independent member datasets: distinct data and initializations
        member_sets = []
        train_paths = []
        for i in range(5):
            member_ds = generate_dataset(
                model,
                cfg["train_count"],
                strategy=cfg["strategy"],
                time_bound=cfg["T"],
                step=cfg["h"],
                seed=_derived_seed(seed, (2 + i,)),
                adaptive=adaptive,
            )
            member_sets.append(member_ds)
            path = os.path.join(outdir, f"train.member{i}.csv")
            save_csv(member_ds, path)
            _append_csv_provenance(path, "pipeline", cfg)
            train_paths.append(path)
        ens, logs = train_ensemble(arch, model, member_sets, seed=seed)
        member_files = [
            os.path.join(outdir, f"model.member{i}.json") for i in range(5)
        ]
        for member, mpath in zip(ens.members, member_files):
            _save_model_with_provenance(member, mpath, "pipeline", cfg)
        _save_model_with_provenance(
            ens, model_path, "pipeline", cfg, member_files=member_files
        )
        clf = ens
        train_info = {
            "train_files": train_paths,
            "final_losses": [log.final_loss for log in logs],
        }
    else:
        train_ds = generate_dataset(
            model,
            cfg["train_count"],
            strategy=cfg["strategy"],
            time_bound=cfg["T"],
            step=cfg["h"],
            seed=_derived_seed(seed, (0,)),
            adaptive=adaptive,
        )
        train_path = os.path.join(outdir, "train.csv")
        save_csv(train_ds, train_path)
        _append_csv_provenance(train_path, "pipeline", cfg)
        net, log = train_network(
            arch, model, train_ds, seed=_derived_seed(seed, (3,)) % (2**31)
        )
        _save_model_with_provenance(net, model_path, "pipeline", cfg)
        _write_train_log_csv(
            os.path.join(outdir, "train.log.csv"), log.losses, "pipeline", cfg
        )
        clf = net
        train_info = {
            "train_files": [train_path],
            "final_losses": [log.final_loss],
        }

    report = evaluate(clf, test_ds, alpha=cfg["alpha"])
    eval_path = os.path.join(outdir, "eval.json")
    _write_json(
        eval_path, {"provenance": _provenance("pipeline", cfg), **report.as_dict()}
    )
    summary = {
        "outdir": outdir,
        "model": model_path,
        "eval": eval_path,
        "acc": report.acc,
        "fn_rate": report.fn_rate,
        "fp_rate": report.fp_rate,
        **train_info,
    }
    _write_json(
        os.path.join(outdir, "run.json"),
        {"provenance": _provenance("pipeline", cfg), "summary": summary},
    )
    _print_json(summary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser construction

_DEFAULTS = {
    "generate": {
        "model": None,
        "count": 10_000,
        "strategy": "uniform",
        "T": None,
        "h": None,
        "seed": 0,
        "out": None,
        "threads": None,
    },
    "train": {
        "data": None,
        "arch": "dnn-s",
        "out": None,
        "seed": 0,
        "threshold": None,
        "algorithm": None,
        "max_epochs": None,
        "loss": None,
        "learning_rate": None,
        "batch_size": None,
        "lm_mu_init": None,
        "lm_mu_factor": None,
        "patience": None,
        "threads": None,
    },
    "eval": {
        "net": None,
        "data": None,
        "alpha": 0.01,
        "out": None,
        "threads": None,
    },
    "certify": {
        "net": None,
        "model": None,
        "metric": None,
        "theta": None,
        "delta": 0.001,
        "alpha": 0.01,
        "beta": 0.01,
        "max_samples": 50_000,
        "seed": 0,
        "T": None,
        "h": None,
        "out": None,
        "threads": None,
    },
    "region": {
        "net": None,
        "model": None,
        "axes": "0,1",
        "grid": "20x20",
        "per_cell": 10_000,
        "T": None,
        "h": None,
        "seed": 0,
        "alpha": 0.01,
        "out": None,
        "threads": None,
    },
    "adapt": {
        "net": None,
        "model": None,
        "iterations": 10,
        "per_iter": 10_000,
        "rate": None,
        "train_biases": False,
        "test_data": None,
        "test_size": 10_000,
        "test_seed": 1,
        "seed": 0,
        "T": None,
        "h": None,
        "alpha": 0.01,
        "out": None,
        "report": None,
        "threads": None,
    },
    "threshold": {
        "net": None,
        "data": None,
        "thetas": None,
        "max_acc_loss": None,
        "baseline_acc": None,
        "alpha": 0.01,
        "out": None,
        "threads": None,
    },
    "timebound": {
        "model": None,
        "T_grid": None,
        "train_size": 10_000,
        "test_size": 5_000,
        "arch": "dnn-s",
        "strategy": "uniform",
        "h": None,
        "seed": 0,
        "alpha": 0.01,
        "out": None,
        "threads": None,
    },
    "pipeline": {
        "model": None,
        "arch": "dnn-s",
        "train_count": 10_000,
        "test_count": 5_000,
        "strategy": "adaptive",
        "T": None,
        "h": None,
        "seed": 0,
        "alpha": 0.01,
        "outdir": None,
        "threads": None,
    },
}

_HANDLERS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "certify": _cmd_certify,
    "region": _cmd_region,
    "adapt": _cmd_adapt,
    "threshold": _cmd_threshold,
    "timebound": _cmd_timebound,
    "pipeline": _cmd_pipeline,
}


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--config",
        default=None,
        metavar="FILE",
        help="JSON object of option values; explicit flags override it",
    )
    sub.add_argument(
        "--threads",
        type=int,
        default=argparse.SUPPRESS,
        help="cap BLAS worker threads (advisory; algorithms are sequential)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="reachlearn",
        description="Learn, evaluate, certify and tune reachability classifiers.",
    )
    parser.add_argument(
        "--version", action="version", version=f"reachlearn {__version__}"
    )
    subs = parser.add_subparsers(dest="command", required=True, metavar="command")
    S = argparse.SUPPRESS

    p = subs.add_parser("generate", help="sample and label a dataset", parents=[])
    p.add_argument("--model", default=S, help="system name (pendulum, neuron, quadcopter)")
    p.add_argument("--count", type=int, default=S, help="number of samples")
    p.add_argument(
        "--strategy",
        choices=("uniform", "adaptive"),
        default=S,
        help="adaptive uses the model's tuned oversampling preset",
    )
    p.add_argument("--T", type=float, default=S, help="reachability horizon")
    p.add_argument("--h", type=float, default=S, help="label grid step")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--out", default=S, help="dataset CSV path")
    _add_common(p)

    p = subs.add_parser("train", help="train a classifier on a dataset")
    p.add_argument("--data", default=S, help="dataset CSV from generate")
    p.add_argument(
        "--arch",
        default=S,
        help="dnn-s, dnn-r, snn, ens1, or ens2 (ensembles write member files)",
    )
    p.add_argument("--out", default=S, help="model JSON path")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--threshold", type=float, default=S, help="decision threshold")
    p.add_argument("--algorithm", choices=("levenberg-marquardt", "gradient"), default=S)
    p.add_argument("--max-epochs", type=int, default=S)
    p.add_argument("--loss", choices=("mse", "cross-entropy"), default=S)
    p.add_argument("--learning-rate", type=float, default=S)
    p.add_argument("--batch-size", type=int, default=S)
    p.add_argument("--lm-mu-init", type=float, default=S)
    p.add_argument("--lm-mu-factor", type=float, default=S)
    p.add_argument("--patience", type=int, default=S)
    _add_common(p)

    p = subs.add_parser("eval", help="metrics with confidence intervals")
    p.add_argument("--net", default=S, help="model JSON from train")
    p.add_argument("--data", default=S, help="dataset CSV")
    p.add_argument("--alpha", type=float, default=S, help="CI significance level")
    p.add_argument("--out", default=S, help="report JSON path")
    _add_common(p)

    p = subs.add_parser("certify", help="sequential certification of a guarantee")
    p.add_argument("--net", default=S)
    p.add_argument("--model", default=S, help="system to sample fresh states from")
    p.add_argument("--metric", choices=("acc", "fn", "fp"), default=S)
    p.add_argument("--theta", type=float, default=S, help="claimed level")
    p.add_argument("--delta", type=float, default=S, help="indifference half-width")
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--beta", type=float, default=S)
    p.add_argument("--max-samples", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--T", type=float, default=S)
    p.add_argument("--h", type=float, default=S)
    p.add_argument("--out", default=S, help="verdict JSON path")
    _add_common(p)

    p = subs.add_parser("region", help="per-cell metrics over a 2-D grid")
    p.add_argument("--net", default=S)
    p.add_argument("--model", default=S)
    p.add_argument("--axes", default=S, help="two state indices, e.g. 0,1")
    p.add_argument("--grid", default=S, help="ROWSxCOLS, e.g. 20x20")
    p.add_argument("--per-cell", type=int, default=S)
    p.add_argument("--T", type=float, default=S)
    p.add_argument("--h", type=float, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--out", default=S, help="heatmap CSV path")
    _add_common(p)

    p = subs.add_parser("adapt", help="iterative false-negative repair")
    p.add_argument("--net", default=S)
    p.add_argument("--model", default=S)
    p.add_argument("--iterations", type=int, default=S)
    p.add_argument("--per-iter", type=int, default=S, help="fresh samples per iteration")
    p.add_argument("--rate", type=float, default=S, help="update rate (default: tuned per model)")
    p.add_argument("--train-biases", action="store_true", default=S, help="also update biases")
    p.add_argument("--test-data", default=S, help="fixed test CSV (else generated)")
    p.add_argument("--test-size", type=int, default=S)
    p.add_argument("--test-seed", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--T", type=float, default=S)
    p.add_argument("--h", type=float, default=S)
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--out", default=S, help="adapted model JSON path")
    p.add_argument("--report", default=S, help="iteration report JSON path")
    _add_common(p)

    p = subs.add_parser("threshold", help="threshold sweep and selection")
    p.add_argument("--net", default=S)
    p.add_argument("--data", default=S)
    p.add_argument("--thetas", default=S, help="comma-separated grid (default 0.01..0.99)")
    p.add_argument("--max-acc-loss", type=float, default=S, help="select the lowest-FN threshold within this accuracy loss")
    p.add_argument("--baseline-acc", type=float, default=S, help="baseline accuracy (default: measured at the stored threshold)")
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--out", default=S, help="sweep CSV path")
    _add_common(p)

    p = subs.add_parser("timebound", help="retrain across reachability horizons")
    p.add_argument("--model", default=S)
    p.add_argument("--T-grid", dest="T_grid", default=S, help="comma-separated horizons")
    p.add_argument("--train-size", type=int, default=S)
    p.add_argument("--test-size", type=int, default=S)
    p.add_argument("--arch", default=S)
    p.add_argument("--strategy", choices=("uniform", "adaptive"), default=S)
    p.add_argument("--h", type=float, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--out", default=S, help="sweep CSV path")
    _add_common(p)

    p = subs.add_parser("pipeline", help="generate, train, and evaluate in one run")
    p.add_argument("--model", default=S)
    p.add_argument("--arch", default=S)
    p.add_argument("--train-count", type=int, default=S)
    p.add_argument("--test-count", type=int, default=S)
    p.add_argument("--strategy", choices=("uniform", "adaptive"), default=S)
    p.add_argument("--T", type=float, default=S)
    p.add_argument("--h", type=float, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--outdir", default=S, help="directory for all artifacts")
    _add_common(p)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _merge_config(args, _DEFAULTS[args.command])
        with _thread_cap(cfg.get("threads")):
            return _HANDLERS[args.command](cfg)
    except (ConfigError, ContractError, ParseError, OSError) as exc:
        _emit_error(exc)
        return EXIT_USAGE
    except (
        SimulationError,
        np.linalg.LinAlgError,
        FloatingPointError,
        OverflowError,
        ZeroDivisionError,
    ) as exc:
        _emit_error(exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
