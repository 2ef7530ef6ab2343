"""Labeled dataset generation by uniform and adaptive sampling.

Initial states are drawn from a model's domain box, labeled by simulation,
and collected into immutable :class:`Dataset` objects that can be saved to
and reloaded from CSV without losing a single bit.

Every candidate draw gets its own seed stream derived from the dataset seed
and the candidate index, so generation order and batching never change the
result: generating 10,000 samples in one call or in ten chunks of 1,000
produces the same dataset.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, ParseError, SimulationError
from .simulate import STATUS_OK, label_states
from .systems.base import HybridSystem, State

__all__ = [
    "AdaptiveConfig",
    "Dataset",
    "Sample",
    "adaptive_preset",
    "generate_dataset",
    "labeled_uniform",
    "load_csv",
    "sample_uniform",
    "save_csv",
    "split",
]

_STRATEGIES = ("uniform", "adaptive")

# Candidates are labeled in batches of this many; results are identical for
# any chunk size because each candidate owns an independent seed stream.
_CHUNK = 2048

# Cap on redraws for a single candidate slot before giving up.  Only reached
# when nearly every state in the domain fails to simulate.
_REDRAW_LIMIT = 1000


@dataclass(frozen=True)
class Sample:
    """One labeled initial state."""

    state: State
    label: bool


@dataclass(frozen=True)
class AdaptiveConfig:
    """Tuning knobs for adaptive sampling.

    When a candidate's label matches ``target_label``, up to
    ``extra_per_positive`` additional states are drawn uniformly from a box
    around it whose half-width per axis is ``neighborhood_radius`` times
    that axis's domain width (clipped to the domain).  Targeting the
    minority class concentrates samples near the decision boundary.
    """

    extra_per_positive: int = 3
    neighborhood_radius: Union[float, Sequence[float]] = 0.05
    target_label: bool = True

    def __post_init__(self) -> None:
        if self.extra_per_positive < 0:
            raise ConfigError(
                f"extra_per_positive must be >= 0, got {self.extra_per_positive}"
            )
        radii = np.atleast_1d(np.asarray(self.neighborhood_radius, dtype=np.float64))
        if radii.ndim != 1:
            raise ConfigError("neighborhood_radius must be a scalar or 1-d sequence")
        if not np.all((radii > 0.0) & (radii <= 1.0)):
            raise ConfigError(
                f"neighborhood_radius must lie in (0, 1], got {self.neighborhood_radius}"
            )

    def radii_for(self, dim: int) -> np.ndarray:
        """Per-axis radius vector of length ``dim``."""
        radii = np.atleast_1d(np.asarray(self.neighborhood_radius, dtype=np.float64))
        if radii.size == 1:
            return np.full(dim, radii[0])
        if radii.size != dim:
            raise ConfigError(
                f"neighborhood_radius has {radii.size} entries for a {dim}-d domain"
            )
        return radii.copy()


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable collection of labeled initial states.

    Metadata records exactly how the labels were produced: the model name,
    the time bound and sampling step of the reachability check, the sampling
    strategy, and the seed.  ``discarded`` counts draws that were thrown
    away because simulation failed on them.
    """

    model: str
    time_bound: float
    step: float
    strategy: str
    seed: int
    modes: np.ndarray
    states: np.ndarray
    labels: np.ndarray
    discarded: int = 0

    def __post_init__(self) -> None:
        if self.strategy not in _STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        modes = np.ascontiguousarray(np.asarray(self.modes, dtype=np.int64))
        states = np.ascontiguousarray(np.asarray(self.states, dtype=np.float64))
        labels = np.ascontiguousarray(np.asarray(self.labels, dtype=bool))
        if states.ndim != 2:
            raise ConfigError("states must be a 2-d array")
        n = states.shape[0]
        if modes.shape != (n,) or labels.shape != (n,):
            raise ConfigError("modes, states, and labels must have matching lengths")
        for arr, name in ((modes, "modes"), (states, "states"), (labels, "labels")):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def positive_fraction(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.count_nonzero(self.labels)) / len(self)

    def sample(self, i: int) -> Sample:
        return Sample(State(int(self.modes[i]), self.states[i]), bool(self.labels[i]))

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self.sample(i)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.model == other.model
            and self.time_bound == other.time_bound
            and self.step == other.step
            and self.strategy == other.strategy
            and self.seed == other.seed
            and self.discarded == other.discarded
            and np.array_equal(self.modes, other.modes)
            and np.array_equal(self.states, other.states)
            and np.array_equal(self.labels, other.labels)
        )


# Per-model tunings that concentrate adaptive draws near the reachability
# boundary.  The quadcopter's reachable class is the majority, so its
# neighborhoods must target the unreachable class (and be wider, because its
# boundary region is a thin shell of a 7-d box).
_ADAPTIVE_PRESETS = {
    "quadcopter": AdaptiveConfig(neighborhood_radius=0.17, target_label=False),
}


def adaptive_preset(model_name: str) -> AdaptiveConfig:
    """Adaptive sampling configuration tuned for a named model."""
    return _ADAPTIVE_PRESETS.get(model_name, AdaptiveConfig())


def sample_uniform(domain: np.ndarray, rng: np.random.Generator, mode: int = 0) -> State:
    """Draw one state with each coordinate uniform on its domain interval."""
    domain = np.asarray(domain, dtype=np.float64)
    lo = domain[:, 0]
    width = domain[:, 1] - lo
    return State(mode, lo + width * rng.random(domain.shape[0]))


def _candidate_rng(seed: int, key: Tuple[int, ...]) -> np.random.Generator:
    # spawn_key isolation: every (candidate, neighbor) slot replays its own
    # stream no matter how the slots are grouped into batches.
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _draw_batch(
    lo: np.ndarray, hi: np.ndarray, rngs: Sequence[np.random.Generator]
) -> np.ndarray:
    """One uniform draw per rng inside per-row boxes [lo, hi]."""
    n, dim = lo.shape
    out = np.empty((n, dim))
    for i, rng in enumerate(rngs):
        out[i] = lo[i] + (hi[i] - lo[i]) * rng.random(dim)
    return out


def _label_with_redraw(
    model: HybridSystem,
    X: np.ndarray,
    box_lo: np.ndarray,
    box_hi: np.ndarray,
    rngs: Sequence[np.random.Generator],
    time_bound: float,
    step: float,
    strict: bool,
) -> Tuple[np.ndarray, np.ndarray, int]:
    """Label each row, redrawing any row whose simulation fails.

    Redraws come from the failing row's own rng stream, so retries stay
    deterministic.  Returns (states, labels, discard count).
    """
    X = X.copy()
    labels, status = label_states(
        model, X, time_bound=time_bound, step=step, strict=strict
    )
    discarded = 0
    bad = np.flatnonzero(status != STATUS_OK)
    rounds = 0
    while bad.size:
        rounds += 1
        if rounds > _REDRAW_LIMIT:
            raise SimulationError(
                f"{bad.size} sample slots still failing after "
                f"{_REDRAW_LIMIT} redraws each"
            )
        discarded += bad.size
        X[bad] = _draw_batch(box_lo[bad], box_hi[bad], [rngs[i] for i in bad])
        sub_labels, sub_status = label_states(
            model, X[bad], time_bound=time_bound, step=step, strict=strict
        )
        labels[bad] = sub_labels
        bad = bad[sub_status != STATUS_OK]
    return X, labels, discarded


def generate_dataset(
    model: HybridSystem,
    count: int,
    strategy: str = "uniform",
    time_bound: Optional[float] = None,
    step: Optional[float] = None,
    seed: int = 0,
    adaptive: Optional[AdaptiveConfig] = None,
    strict: bool = True,
) -> Dataset:
    """Generate exactly ``count`` labeled samples from ``model``'s domain.

    Uniform strategy: candidate c's state is drawn from the seed stream
    (seed, c).  Adaptive strategy: whenever candidate c's label matches the
    configured target, up to n extra states are drawn from streams
    (seed, c, 1+j), uniformly inside the clipped neighborhood box around
    candidate c's state; the dataset is truncated at ``count``.

    States whose simulation blows up are discarded (counted in
    ``Dataset.discarded``) and replaced from the same stream.
    """
    if count <= 0:
        raise ConfigError(f"count must be positive, got {count}")
    if strategy not in _STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}")
    cfg = adaptive if adaptive is not None else AdaptiveConfig()
    if strategy != "adaptive":
        cfg = None

    T = model.spec.default_time_bound if time_bound is None else float(time_bound)
    h = model.spec.default_step if step is None else float(step)
    domain = model.spec.domain
    dim = model.dim
    lo = domain[:, 0]
    hi = domain[:, 1]
    if cfg is not None:
        half_width = cfg.radii_for(dim) * (hi - lo)

    states_parts = []
    labels_parts = []
    discarded = 0
    total = 0
    c_next = 0
    while total < count:
        n_chunk = min(_CHUNK, count - total)
        cands = range(c_next, c_next + n_chunk)
        c_next += n_chunk
        rngs = [_candidate_rng(seed, (c,)) for c in cands]
        box_lo = np.broadcast_to(lo, (n_chunk, dim))
        box_hi = np.broadcast_to(hi, (n_chunk, dim))
        X0 = _draw_batch(box_lo, box_hi, rngs)
        X0, lab0, disc = _label_with_redraw(
            model, X0, box_lo, box_hi, rngs, T, h, strict
        )
        discarded += disc

        if cfg is None or cfg.extra_per_positive == 0:
            states_parts.append(X0)
            labels_parts.append(lab0)
            total += n_chunk
            continue

        parents = np.flatnonzero(lab0 == cfg.target_label)
        n_extra = cfg.extra_per_positive
        if parents.size:
            nb_lo = np.repeat(
                np.maximum(lo, X0[parents] - half_width), n_extra, axis=0
            )
            nb_hi = np.repeat(
                np.minimum(hi, X0[parents] + half_width), n_extra, axis=0
            )
            nb_rngs = [
                _candidate_rng(seed, (cands[p], 1 + j))
                for p in parents
                for j in range(n_extra)
            ]
            XN = _draw_batch(nb_lo, nb_hi, nb_rngs)
            XN, labN, disc = _label_with_redraw(
                model, XN, nb_lo, nb_hi, nb_rngs, T, h, strict
            )
            discarded += disc

        # Canonical order: candidate c's own sample, then its neighbors,
        # then candidate c+1.  Truncation below lands mid-group when needed.
        is_parent = lab0 == cfg.target_label
        group_sizes = np.where(is_parent, 1 + n_extra, 1)
        chunk_total = int(group_sizes.sum())
        Xc = np.empty((chunk_total, dim))
        labc = np.empty(chunk_total, dtype=bool)
        starts = np.concatenate(([0], np.cumsum(group_sizes)[:-1]))
        Xc[starts] = X0
        labc[starts] = lab0
        if parents.size:
            nb_rows = (starts[parents, None] + 1 + np.arange(n_extra)).ravel()
            Xc[nb_rows] = XN
            labc[nb_rows] = labN
        keep = min(chunk_total, count - total)
        states_parts.append(Xc[:keep])
        labels_parts.append(labc[:keep])
        total += keep

    states = np.concatenate(states_parts, axis=0)
    labels = np.concatenate(labels_parts, axis=0)
    return Dataset(
        model=model.name,
        time_bound=T,
        step=h,
        strategy=strategy,
        seed=int(seed),
        modes=np.zeros(count, dtype=np.int64),
        states=states,
        labels=labels,
        discarded=discarded,
    )


def labeled_uniform(
    model: HybridSystem,
    count: int,
    lo: Optional[np.ndarray] = None,
    hi: Optional[np.ndarray] = None,
    seed: int = 0,
    key_prefix: Tuple[int, ...] = (),
    time_bound: Optional[float] = None,
    step: Optional[float] = None,
    strict: bool = True,
) -> Tuple[np.ndarray, np.ndarray, int]:
    """Draw ``count`` labeled states uniformly from a box inside the domain.

    The box defaults to the model's full domain.  Candidate c's state comes
    from the seed stream (seed, *key_prefix, c), so disjoint prefixes give
    independent streams under one seed; with an empty prefix and the full
    domain this reproduces the uniform strategy of :func:`generate_dataset`.
    Blown-up states are redrawn from their own stream and counted in the
    returned discard total.

    Returns ``(states, labels, discarded)``.
    """
    if count <= 0:
        raise ConfigError(f"count must be positive, got {count}")
    domain = model.spec.domain
    dim = model.dim
    box_lo = domain[:, 0] if lo is None else np.asarray(lo, dtype=np.float64)
    box_hi = domain[:, 1] if hi is None else np.asarray(hi, dtype=np.float64)
    if box_lo.shape != (dim,) or box_hi.shape != (dim,):
        raise ConfigError(
            f"box bounds must have shape ({dim},), got {box_lo.shape} and {box_hi.shape}"
        )
    if not np.all(box_lo < box_hi):
        raise ConfigError("box must have positive width on every axis")
    T = model.spec.default_time_bound if time_bound is None else float(time_bound)
    h = model.spec.default_step if step is None else float(step)
    prefix = tuple(int(k) for k in key_prefix)

    states_parts = []
    labels_parts = []
    discarded = 0
    total = 0
    while total < count:
        n_chunk = min(_CHUNK, count - total)
        rngs = [
            _candidate_rng(seed, prefix + (c,))
            for c in range(total, total + n_chunk)
        ]
        chunk_lo = np.broadcast_to(box_lo, (n_chunk, dim))
        chunk_hi = np.broadcast_to(box_hi, (n_chunk, dim))
        X = _draw_batch(chunk_lo, chunk_hi, rngs)
        X, lab, disc = _label_with_redraw(
            model, X, chunk_lo, chunk_hi, rngs, T, h, strict
        )
        discarded += disc
        states_parts.append(X)
        labels_parts.append(lab)
        total += n_chunk

    return (
        np.concatenate(states_parts, axis=0),
        np.concatenate(labels_parts, axis=0),
        discarded,
    )


def split(
    dataset: Dataset, fraction: float, seed: int = 0
) -> Tuple[Dataset, Dataset]:
    """Randomly partition a dataset into two disjoint, exhaustive parts.

    The first part receives round(fraction * len) samples.  Both parts keep
    their samples in the original dataset order, and a fixed seed always
    reproduces the same partition.
    """
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"fraction must lie in (0, 1), got {fraction}")
    n = len(dataset)
    n_first = int(round(fraction * n))
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    perm = rng.permutation(n)
    first = np.sort(perm[:n_first])
    second = np.sort(perm[n_first:])

    def take(idx: np.ndarray) -> Dataset:
        return Dataset(
            model=dataset.model,
            time_bound=dataset.time_bound,
            step=dataset.step,
            strategy=dataset.strategy,
            seed=dataset.seed,
            modes=dataset.modes[idx],
            states=dataset.states[idx],
            labels=dataset.labels[idx],
            discarded=dataset.discarded,
        )

    return take(first), take(second)


def save_csv(dataset: Dataset, path: Union[str, os.PathLike]) -> None:
    """Write a dataset as CSV with metadata comment lines.

    Floats are written in shortest round-trip form, so ``load_csv`` returns
    a bit-exact copy.
    """
    lines = [
        f"# model={dataset.model}",
        f"# T={dataset.time_bound!r}",
        f"# h={dataset.step!r}",
        f"# strategy={dataset.strategy}",
        f"# seed={dataset.seed}",
        f"# discarded={dataset.discarded}",
        "mode," + ",".join(f"x{i + 1}" for i in range(dataset.dim)) + ",label",
    ]
    for i in range(len(dataset)):
        coords = ",".join(repr(float(v)) for v in dataset.states[i])
        lines.append(f"{dataset.modes[i]},{coords},{int(dataset.labels[i])}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_csv(path: Union[str, os.PathLike]) -> Dataset:
    """Read a dataset written by :func:`save_csv`."""
    path_str = os.fspath(path)
    meta = {}
    header = None
    modes = []
    rows = []
    labels = []
    with open(path_str, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                key, sep, value = body.partition("=")
                if not sep:
                    raise ParseError(
                        f"malformed metadata line {body!r}", path_str, lineno
                    )
                meta[key.strip()] = value.strip()
                continue
            if header is None:
                header = line.split(",")
                if (
                    len(header) < 3
                    or header[0] != "mode"
                    or header[-1] != "label"
                    or header[1:-1] != [f"x{i + 1}" for i in range(len(header) - 2)]
                ):
                    raise ParseError(f"bad column header {line!r}", path_str, lineno)
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(parts)}",
                    path_str,
                    lineno,
                )
            try:
                modes.append(int(parts[0]))
                rows.append([float(v) for v in parts[1:-1]])
                flag = int(parts[-1])
            except ValueError as exc:
                raise ParseError(f"unparseable field: {exc}", path_str, lineno) from None
            if flag not in (0, 1):
                raise ParseError(f"label must be 0 or 1, got {flag}", path_str, lineno)
            labels.append(bool(flag))
    if header is None:
        raise ParseError("empty dataset file", path_str, 0)
    missing = [k for k in ("model", "T", "h", "strategy", "seed") if k not in meta]
    if missing:
        raise ParseError(f"missing metadata keys: {missing}", path_str, 0)
    if not rows:
        raise ParseError("dataset file has no sample rows", path_str, 0)
    try:
        return Dataset(
            model=meta["model"],
            time_bound=float(meta["T"]),
            step=float(meta["h"]),
            strategy=meta["strategy"],
            seed=int(meta["seed"]),
            modes=np.array(modes, dtype=np.int64),
            states=np.array(rows, dtype=np.float64),
            labels=np.array(labels, dtype=bool),
            discarded=int(meta.get("discarded", 0)),
        )
    except (ConfigError, ValueError) as exc:
        raise ParseError(f"invalid dataset metadata: {exc}", path_str, 0) from None
