"""Spatial, incremental, and parametric analyses of trained classifiers.

Four workflows on top of evaluation:

* ``region_analysis``: a 2-D grid of per-cell metric reports showing where
  in the state space a classifier is weak.
* ``adaptation_loop``: repeated rounds of fresh sampling, false-negative
  collection, and incremental weight updates, tracked on a fixed test set.
* ``threshold_sweep`` / ``select_threshold_min_fn``: trade accuracy for a
  lower false-negative rate by moving the decision threshold.
* ``timebound_analysis``: retrain and re-evaluate across a grid of
  reachability horizons.

Helpers ``default_train_config``, ``train_network``, and ``train_ensemble``
bundle the architecture-appropriate training setup used throughout.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError
from .nets import (
    ARCHITECTURES,
    Ensemble,
    Network,
    build_ensemble,
    build_network,
    classify,
    forward,
)
from .sampling import Dataset, generate_dataset, labeled_uniform
from .stats import MetricsReport, evaluate, evaluate_predictions
from .systems import HybridSystem
from .train import DEFAULT_ADAPT_RATES, TrainConfig, TrainLog, adapt, train

__all__ = [
    "AdaptationReport",
    "RegionReport",
    "SweepReport",
    "adaptation_loop",
    "default_train_config",
    "region_analysis",
    "save_region_csv",
    "save_sweep_csv",
    "select_threshold_min_fn",
    "threshold_sweep",
    "timebound_analysis",
    "train_ensemble",
    "train_network",
]

_REGION_CSV_HEADER = (
    "row,col,axis1_lo,axis1_hi,axis2_lo,axis2_hi,"
    "acc,acc_lo,acc_hi,fn,fn_lo,fn_hi,fp,fp_lo,fp_hi"
)


def _derived_seed(seed: int, key: Tuple[int, ...]) -> int:
    """A reproducible child seed for a (seed, key) pair."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class RegionReport:
    """Per-cell metric reports over a 2-D grid of state-space boxes.

    ``axes`` names the two state coordinates that were gridded; rows run
    along the first, columns along the second.  ``cells`` is row-major.
    """

    model: str
    axes: Tuple[int, int]
    row_edges: Tuple[float, ...]
    col_edges: Tuple[float, ...]
    cells: Tuple[MetricsReport, ...]
    alpha: float

    def __post_init__(self) -> None:
        if len(self.cells) != self.rows * self.cols:
            raise ConfigError(
                f"expected {self.rows * self.cols} cells, got {len(self.cells)}"
            )

    @property
    def rows(self) -> int:
        return len(self.row_edges) - 1

    @property
    def cols(self) -> int:
        return len(self.col_edges) - 1

    def cell(self, row: int, col: int) -> MetricsReport:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise ConfigError(
                f"cell ({row}, {col}) outside {self.rows}x{self.cols} grid"
            )
        return self.cells[row * self.cols + col]

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "axes": list(self.axes),
            "row_edges": list(self.row_edges),
            "col_edges": list(self.col_edges),
            "alpha": self.alpha,
            "cells": [
                {"row": r, "col": c, **self.cell(r, c).as_dict()}
                for r in range(self.rows)
                for c in range(self.cols)
            ],
        }


def region_analysis(
    classifier: Union[Network, Ensemble],
    model: HybridSystem,
    axes: Tuple[int, int] = (0, 1),
    grid: Tuple[int, int] = (20, 20),
    per_cell: int = 10_000,
    time_bound: Optional[float] = None,
    step: Optional[float] = None,
    seed: int = 0,
    alpha: float = 0.01,
    strict: bool = True,
) -> RegionReport:
    """Evaluate a classifier cell by cell over a 2-D grid of the domain.

    The two ``axes`` coordinates are split into ``grid`` equal intervals;
    any remaining coordinates range over their full domain.  Each cell gets
    ``per_cell`` fresh uniform states labeled by simulation, from a seed
    stream keyed on (cell row, cell col), so cell results do not depend on
    grid traversal order.
    """
    rows, cols = int(grid[0]), int(grid[1])
    if rows < 1 or cols < 1:
        raise ConfigError(f"grid must be at least 1x1, got {grid}")
    if per_cell < 1:
        raise ConfigError(f"per_cell must be positive, got {per_cell}")
    a0, a1 = int(axes[0]), int(axes[1])
    dim = model.dim
    if a0 == a1 or not (0 <= a0 < dim and 0 <= a1 < dim):
        raise ConfigError(
            f"axes must be two distinct coordinates below {dim}, got {axes}"
        )

    domain = model.spec.domain
    row_edges = np.linspace(domain[a0, 0], domain[a0, 1], rows + 1)
    col_edges = np.linspace(domain[a1, 0], domain[a1, 1], cols + 1)

    cells = []
    for r in range(rows):
        for c in range(cols):
            lo = domain[:, 0].copy()
            hi = domain[:, 1].copy()
            lo[a0], hi[a0] = row_edges[r], row_edges[r + 1]
            lo[a1], hi[a1] = col_edges[c], col_edges[c + 1]
            states, labels, _ = labeled_uniform(
                model,
                per_cell,
                lo=lo,
                hi=hi,
                seed=seed,
                key_prefix=(r, c),
                time_bound=time_bound,
                step=step,
                strict=strict,
            )
            pred = classify(classifier, states)
            cells.append(evaluate_predictions(pred, labels, alpha))

    return RegionReport(
        model=model.name,
        axes=(a0, a1),
        row_edges=tuple(float(e) for e in row_edges),
        col_edges=tuple(float(e) for e in col_edges),
        cells=tuple(cells),
        alpha=alpha,
    )


def save_region_csv(report: RegionReport, path: Union[str, os.PathLike]) -> None:
    """Write one CSV row per grid cell, with point estimates and CI bounds."""
    lines = [
        f"# model={report.model}",
        f"# axes={report.axes[0]},{report.axes[1]}",
        f"# grid={report.rows}x{report.cols}",
        f"# alpha={report.alpha!r}",
        _REGION_CSV_HEADER,
    ]
    for r in range(report.rows):
        for c in range(report.cols):
            m = report.cell(r, c)
            vals = [
                report.row_edges[r],
                report.row_edges[r + 1],
                report.col_edges[c],
                report.col_edges[c + 1],
                m.acc,
                m.ci_acc[0],
                m.ci_acc[1],
                m.fn_rate,
                m.ci_fn[0],
                m.ci_fn[1],
                m.fp_rate,
                m.ci_fp[0],
                m.ci_fp[1],
            ]
            lines.append(f"{r},{c}," + ",".join(repr(float(v)) for v in vals))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class AdaptationReport:
    """Outcome of an adaptation loop, tracked on one fixed test set.

    ``per_iteration[i]`` is the fixed-test report after iteration i's
    update; ``fn_counts[i]`` is how many false negatives that iteration's
    fresh sample batch contributed.  ``reclassified_fraction`` is the share
    of all collected false-negative states that the final network maps to
    positive (1.0 when none were collected).
    """

    initial: MetricsReport
    per_iteration: Tuple[MetricsReport, ...]
    fn_counts: Tuple[int, ...]
    accumulated_fn: np.ndarray
    reclassified_fraction: float
    learning_rate: float

    @property
    def final(self) -> MetricsReport:
        return self.per_iteration[-1] if self.per_iteration else self.initial

    def as_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "initial": self.initial.as_dict(),
            "per_iteration": [m.as_dict() for m in self.per_iteration],
            "fn_counts": list(self.fn_counts),
            "accumulated_fn_count": int(self.accumulated_fn.shape[0]),
            "reclassified_fraction": self.reclassified_fraction,
        }


def adaptation_loop(
    net: Network,
    model: HybridSystem,
    fixed_test: Dataset,
    iterations: int = 10,
    per_iter_samples: int = 10_000,
    learning_rate: Optional[float] = None,
    freeze_biases: bool = True,
    seed: int = 0,
    time_bound: Optional[float] = None,
    step: Optional[float] = None,
    alpha: float = 0.01,
    strict: bool = True,
) -> Tuple[Network, AdaptationReport]:
    """Repeatedly patch false negatives found in fresh uniform samples.

    Each iteration draws its own labeled sample batch (seed stream keyed on
    the iteration index), collects the current network's false negatives,
    applies one incremental update per collected state, and re-evaluates on
    ``fixed_test``.  Iterations with no false negatives leave the network
    bit-identical.  ``learning_rate`` defaults to the model's tuned rate.
    """
    if iterations < 1:
        raise ConfigError(f"iterations must be positive, got {iterations}")
    if per_iter_samples < 1:
        raise ConfigError(
            f"per_iter_samples must be positive, got {per_iter_samples}"
        )
    if learning_rate is None:
        if model.name not in DEFAULT_ADAPT_RATES:
            raise ConfigError(
                f"no default adaptation rate for model {model.name!r};"
                f" pass learning_rate"
            )
        learning_rate = DEFAULT_ADAPT_RATES[model.name]

    initial = evaluate(net, fixed_test, alpha)
    current = net
    reports = []
    fn_counts = []
    fn_parts = []
    for it in range(iterations):
        states, labels, _ = labeled_uniform(
            model,
            per_iter_samples,
            seed=seed,
            key_prefix=(it,),
            time_bound=time_bound,
            step=step,
            strict=strict,
        )
        pred = classify(current, states)
        fn_states = states[labels & ~pred]
        fn_counts.append(int(fn_states.shape[0]))
        if fn_states.shape[0]:
            fn_parts.append(fn_states)
            current = adapt(
                current, fn_states, learning_rate, freeze_biases=freeze_biases
            )
        reports.append(evaluate(current, fixed_test, alpha))

    if fn_parts:
        accumulated = np.concatenate(fn_parts, axis=0)
        reclassified = float(np.mean(classify(current, accumulated)))
    else:
        accumulated = np.empty((0, model.dim))
        reclassified = 1.0
    accumulated.setflags(write=False)

    report = AdaptationReport(
        initial=initial,
        per_iteration=tuple(reports),
        fn_counts=tuple(fn_counts),
        accumulated_fn=accumulated,
        reclassified_fraction=reclassified,
        learning_rate=float(learning_rate),
    )
    return current, report


@dataclass(frozen=True)
class SweepReport:
    """Metric reports along one swept parameter (threshold or horizon)."""

    parameter: str
    values: Tuple[float, ...]
    metrics: Tuple[MetricsReport, ...]
    alpha: float

    def __post_init__(self) -> None:
        if len(self.values) != len(self.metrics):
            raise ConfigError(
                f"{len(self.values)} values but {len(self.metrics)} reports"
            )

    def __len__(self) -> int:
        return len(self.values)

    def as_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "alpha": self.alpha,
            "points": [
                {self.parameter: v, **m.as_dict()}
                for v, m in zip(self.values, self.metrics)
            ],
        }


def threshold_sweep(
    net: Network,
    dataset: Dataset,
    thresholds: Optional[Sequence[float]] = None,
    alpha: float = 0.01,
) -> SweepReport:
    """Metrics on one dataset across classification thresholds.

    Scores are computed once and re-cut per threshold, so the monotone
    trade-off (false negatives never decrease, false positives never
    increase as the threshold rises) holds exactly.  Majority-vote
    ensembles have no scalar score to cut, so only single networks are
    accepted.  The default grid is 0.01 to 0.99 in steps of 0.01.
    """
    if not isinstance(net, Network):
        raise ConfigError("threshold sweep needs a single network's scores")
    if thresholds is None:
        grid = np.linspace(0.01, 0.99, 99)
    else:
        grid = np.asarray(thresholds, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigError("thresholds must be a nonempty vector")
    if not np.all(np.isfinite(grid)) or grid.min() < 0.0 or grid.max() > 1.0:
        raise ConfigError("thresholds must lie in [0, 1]")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ConfigError("thresholds must be strictly increasing")
    if len(dataset) == 0:
        raise ConfigError("cannot sweep on an empty dataset")

    scores = np.asarray(forward(net, dataset.states), dtype=np.float64)
    labels = dataset.labels
    metrics = tuple(
        evaluate_predictions(scores >= theta, labels, alpha) for theta in grid
    )
    return SweepReport(
        parameter="threshold",
        values=tuple(float(t) for t in grid),
        metrics=metrics,
        alpha=alpha,
    )


def select_threshold_min_fn(
    sweep: SweepReport,
    max_acc_loss: float,
    baseline_acc: float,
) -> float:
    """The threshold minimizing false negatives at bounded accuracy loss.

    Feasible thresholds keep accuracy at or above
    ``baseline_acc - max_acc_loss``; among them the smallest false-negative
    rate wins, with ties broken toward the larger threshold (fewer false
    positives).  An empty feasible set is an error: loosen ``max_acc_loss``.
    """
    if len(sweep) == 0:
        raise ConfigError("sweep is empty")
    if not max_acc_loss >= 0.0:
        raise ConfigError(f"max_acc_loss must be >= 0, got {max_acc_loss}")
    floor = baseline_acc - max_acc_loss
    best_idx = None
    for i, m in enumerate(sweep.metrics):
        if m.acc < floor:
            continue
        if (
            best_idx is None
            or m.fn_rate < sweep.metrics[best_idx].fn_rate
            or (
                m.fn_rate == sweep.metrics[best_idx].fn_rate
                and sweep.values[i] > sweep.values[best_idx]
            )
        ):
            best_idx = i
    if best_idx is None:
        raise ConfigError(
            f"no swept threshold keeps accuracy >= {floor}; loosen max_acc_loss"
        )
    return sweep.values[best_idx]


def default_train_config(arch: str, seed: int = 0) -> TrainConfig:
    """The tuned training setup for a named architecture.

    Sigmoid networks use Levenberg-Marquardt on mean squared error; the
    relu/softmax architecture uses minibatch gradient descent on
    cross-entropy (its two-output softmax head is outside the scalar
    least-squares form the damped solver expects).
    """
    if arch not in ARCHITECTURES:
        raise ConfigError(
            f"unknown architecture {arch!r}; choose from {sorted(ARCHITECTURES)}"
        )
    if ARCHITECTURES[arch][2] == "softmax":
        return TrainConfig(
            algorithm="gradient",
            loss="cross-entropy",
            learning_rate=0.001,
            batch_size=32,
            max_epochs=120,
            seed=seed,
        )
    return TrainConfig(algorithm="levenberg-marquardt", loss="mse", max_epochs=60, seed=seed)


def _default_config_for(net: Network, seed: int) -> TrainConfig:
    if net.activations[-1] == "softmax":
        return default_train_config("dnn-r", seed=seed)
    return default_train_config("dnn-s", seed=seed)


def train_network(
    arch: str,
    model: HybridSystem,
    dataset: Dataset,
    seed: int = 0,
    config: Optional[TrainConfig] = None,
    threshold: float = 0.5,
) -> Tuple[Network, TrainLog]:
    """Initialize a named architecture on the model's domain and train it."""
    domain = model.spec.domain
    net = build_network(
        arch, domain[:, 0], domain[:, 1], seed=seed, threshold=threshold
    )
    cfg = config if config is not None else default_train_config(arch, seed=seed)
    return train(net, dataset.states, dataset.labels, cfg)


def train_ensemble(
    kind: str,
    model: HybridSystem,
    data: Union[Dataset, Sequence[Dataset]],
    seed: int = 0,
    configs: Optional[Sequence[Optional[TrainConfig]]] = None,
) -> Tuple[Ensemble, Tuple[TrainLog, ...]]:
    """Train every member of a five-network ensemble.

    ``data`` is either one shared dataset or one dataset per member.
    Member initializations always differ (seeds derived from ``seed``), so
    even members trained on shared data disagree usefully.  ``configs``
    optionally overrides the per-member training setup; None entries fall
    back to the member's architecture default.
    """
    domain = model.spec.domain
    ens = build_ensemble(kind, domain[:, 0], domain[:, 1], seed=seed)
    n = len(ens.members)
    datasets = [data] * n if isinstance(data, Dataset) else list(data)
    if len(datasets) != n:
        raise ConfigError(
            f"need one dataset or {n} member datasets, got {len(datasets)}"
        )
    if configs is None:
        configs = [None] * n
    if len(configs) != n:
        raise ConfigError(f"need {n} member configs, got {len(configs)}")

    trained = []
    logs = []
    for i, (member, ds, cfg) in enumerate(zip(ens.members, datasets, configs)):
        if cfg is None:
            cfg = _default_config_for(member, seed=_derived_seed(seed, (i, 3)) % (2**31))
        net, log = train(member, ds.states, ds.labels, cfg)
        trained.append(net)
        logs.append(log)
    return Ensemble(members=tuple(trained)), tuple(logs)


def timebound_analysis(
    model: HybridSystem,
    time_bounds: Sequence[float],
    train_size: int = 10_000,
    test_size: int = 5_000,
    arch: str = "dnn-s",
    strategy: str = "uniform",
    seed: int = 0,
    step: Optional[float] = None,
    config: Optional[TrainConfig] = None,
    alpha: float = 0.01,
    strict: bool = True,
) -> SweepReport:
    """Test metrics of freshly trained classifiers across horizons.

    For each horizon, labels are regenerated (train and test draws use
    seeds derived from ``seed`` and the grid index), a new network is
    initialized and trained, and the test report is recorded.
    """
    grid = np.asarray(time_bounds, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigError("time_bounds must be a nonempty vector")
    if not np.all(grid > 0):
        raise ConfigError("time bounds must be positive")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ConfigError("time bounds must be strictly increasing")
    if train_size < 1 or test_size < 1:
        raise ConfigError("train_size and test_size must be positive")

    metrics = []
    for k, T in enumerate(grid):
        train_ds = generate_dataset(
            model,
            train_size,
            strategy=strategy,
            time_bound=float(T),
            step=step,
            seed=_derived_seed(seed, (k, 0)),
            strict=strict,
        )
        test_ds = generate_dataset(
            model,
            test_size,
            strategy="uniform",
            time_bound=float(T),
            step=step,
            seed=_derived_seed(seed, (k, 1)),
            strict=strict,
        )
        net, _ = train_network(
            arch,
            model,
            train_ds,
            seed=_derived_seed(seed, (k, 2)) % (2**31),
            config=config,
        )
        metrics.append(evaluate(net, test_ds, alpha))

    return SweepReport(
        parameter="time_bound",
        values=tuple(float(t) for t in grid),
        metrics=tuple(metrics),
        alpha=alpha,
    )


def save_sweep_csv(report: SweepReport, path: Union[str, os.PathLike]) -> None:
    """Write one CSV row per swept value, with point estimates and CIs."""
    lines = [
        f"# parameter={report.parameter}",
        f"# alpha={report.alpha!r}",
        f"{report.parameter},acc,acc_lo,acc_hi,fn,fn_lo,fn_hi,fp,fp_lo,fp_hi",
    ]
    for v, m in zip(report.values, report.metrics):
        vals = [
            v,
            m.acc,
            m.ci_acc[0],
            m.ci_acc[1],
            m.fn_rate,
            m.ci_fn[0],
            m.ci_fn[1],
            m.fp_rate,
            m.ci_fp[0],
            m.ci_fp[1],
        ]
        lines.append(",".join(repr(float(x)) for x in vals))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
