"""Sequential probability ratio certification of classifier guarantees.

Wald's SPRT decides between p >= p0 and p <= p1 for the success
probability of a Bernoulli stream, with error bounds alpha (wrongly
rejecting a satisfied claim) and beta (wrongly accepting a violated one).
The indifference region (p1, p0) = (theta - delta, theta + delta) is
centered on the claimed level.

Claims are phrased per metric:

* ``acc``: accuracy >= theta; a success is a correct prediction.
* ``fn`` / ``fp``: error rate <= theta; a success is a sample that is NOT
  that kind of error, tested against the mirrored level 1 - theta, which
  preserves the (alpha, beta) semantics.

``certification_stream`` supplies the success events by drawing fresh
uniform states and labeling them by simulation on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

import numpy as np

from .errors import ConfigError
from .nets import Ensemble, Network, classify
from .sampling import _candidate_rng, _draw_batch, _label_with_redraw
from .systems import HybridSystem

__all__ = [
    "SPRTConfig",
    "SPRTVerdict",
    "certification_stream",
    "sprt_certify",
]

_METRICS = ("acc", "fn", "fp")


@dataclass(frozen=True)
class SPRTConfig:
    """Claim and error bounds for a sequential certification run."""

    metric: str
    theta: float
    delta: float = 0.001
    alpha: float = 0.01
    beta: float = 0.01
    max_samples: int = 50_000

    def __post_init__(self) -> None:
        if self.metric not in _METRICS:
            raise ConfigError(f"metric must be one of {_METRICS}, got {self.metric!r}")
        if not self.delta > 0.0:
            raise ConfigError(f"delta must be > 0, got {self.delta}")
        if not (0.0 < self.theta - self.delta and self.theta + self.delta < 1.0):
            raise ConfigError(
                f"need 0 < theta - delta and theta + delta < 1,"
                f" got theta={self.theta}, delta={self.delta}"
            )
        for name, value in (("alpha", self.alpha), ("beta", self.beta)):
            if not 0.0 < value < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {value}")
        if self.max_samples < 1:
            raise ConfigError(f"max_samples must be >= 1, got {self.max_samples}")

    @property
    def success_levels(self) -> tuple[float, float]:
        """(p0, p1) for the success event the stream must encode."""
        level = self.theta if self.metric == "acc" else 1.0 - self.theta
        return (level + self.delta, level - self.delta)


@dataclass(frozen=True)
class SPRTVerdict:
    """Outcome of a sequential run."""

    decision: str  # satisfied | violated | undetermined
    samples_used: int
    log_ratio: float


def sprt_certify(outcomes: Iterable[bool], cfg: SPRTConfig) -> SPRTVerdict:
    """Run the sequential test over a stream of success events.

    The log likelihood ratio accumulates log(p1/p0) per success and
    log((1-p1)/(1-p0)) per failure; the claim is satisfied when the ratio
    drops to log(beta/(1-alpha)) and violated when it climbs to
    log((1-beta)/alpha).  Exhausting max_samples (or the stream) without
    crossing either bound is undetermined.
    """
    p0, p1 = cfg.success_levels
    log_success = math.log(p1 / p0)
    log_failure = math.log((1.0 - p1) / (1.0 - p0))
    upper = math.log((1.0 - cfg.beta) / cfg.alpha)
    lower = math.log(cfg.beta / (1.0 - cfg.alpha))
    ratio = 0.0
    used = 0
    for outcome in outcomes:
        ratio += log_success if outcome else log_failure
        used += 1
        if ratio <= lower:
            return SPRTVerdict("satisfied", used, ratio)
        if ratio >= upper:
            return SPRTVerdict("violated", used, ratio)
        if used >= cfg.max_samples:
            break
    return SPRTVerdict("undetermined", used, ratio)


def certification_stream(
    classifier: Union[Network, Ensemble],
    model: HybridSystem,
    metric: str,
    seed: int = 0,
    time_bound: float | None = None,
    step: float | None = None,
    batch: int = 512,
    strict: bool = True,
) -> Iterator[bool]:
    """Endless success events from fresh uniform states labeled on demand.

    Sample i is drawn from its own seeded stream, so the event sequence is
    independent of batch size and of how many events the test consumes.
    """
    if metric not in _METRICS:
        raise ConfigError(f"metric must be one of {_METRICS}, got {metric!r}")
    if batch < 1:
        raise ConfigError(f"batch must be >= 1, got {batch}")
    domain = model.spec.domain
    T = model.spec.default_time_bound if time_bound is None else float(time_bound)
    h = model.spec.default_step if step is None else float(step)
    lo = np.broadcast_to(domain[:, 0], (batch, model.dim))
    hi = np.broadcast_to(domain[:, 1], (batch, model.dim))
    return _event_stream(classifier, model, metric, seed, T, h, lo, hi, batch, strict)


def _event_stream(classifier, model, metric, seed, T, h, lo, hi, batch, strict):
    start = 0
    while True:
        rngs = [_candidate_rng(seed, (i,)) for i in range(start, start + batch)]
        states = _draw_batch(lo, hi, rngs)
        states, labels, _ = _label_with_redraw(
            model, states, lo, hi, rngs, T, h, strict
        )
        pred = np.asarray(classify(classifier, states), dtype=bool)
        if metric == "acc":
            success = pred == labels
        elif metric == "fn":
            success = ~(labels & ~pred)
        else:
            success = ~(~labels & pred)
        yield from (bool(s) for s in success)
        start += batch
