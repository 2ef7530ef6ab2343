"""Classifier metrics with Wilson score confidence intervals.

Point estimates (accuracy, false-negative rate, false-positive rate) are
exact sample means; each comes with a Wilson score interval at confidence
1 - alpha.  The normal quantile needed for the interval is computed with a
rational approximation refined by one Newton step, accurate to well below
1e-10 in probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .errors import ConfigError, ContractError
from .nets import Ensemble, Network, classify
from .sampling import Dataset

__all__ = [
    "MetricsReport",
    "evaluate",
    "evaluate_predictions",
    "metrics_from_counts",
    "normal_quantile",
    "wilson_ci",
]

# rational approximation coefficients (central and tail regions)
_A = (
    -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
    1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00,
)
_B = (
    -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
    6.680131188771972e01, -1.328068155288572e01,
)
_C = (
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
    -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00,
)
_D = (
    7.784695709041462e-03, 3.224671290700398e-01,
    2.445134137142996e00, 3.754408661907416e00,
)
_TAIL = 0.02425


def _poly(coeffs, x: float) -> float:
    acc = 0.0
    for c in coeffs:
        acc = acc * x + c
    return acc


def normal_quantile(q: float) -> float:
    """Inverse standard normal CDF, |Phi(result) - q| < 1e-10."""
    q = float(q)
    if not 0.0 < q < 1.0:
        raise ContractError(f"quantile argument must lie in (0, 1), got {q}")
    if q < _TAIL:
        r = math.sqrt(-2.0 * math.log(q))
        x = _poly(_C, r) / (_poly(_D, r) * r + 1.0)
    elif q <= 1.0 - _TAIL:
        r = q - 0.5
        s = r * r
        x = r * _poly(_A, s) / (_poly(_B, s) * s + 1.0)
    else:
        r = math.sqrt(-2.0 * math.log(1.0 - q))
        x = -_poly(_C, r) / (_poly(_D, r) * r + 1.0)
    # one Newton refinement against the double-precision CDF
    cdf = 0.5 * math.erfc(-x / math.sqrt(2.0))
    pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if pdf > 0.0:
        x -= (cdf - q) / pdf
    return x


def wilson_ci(p_hat: float, n: int, alpha: float = 0.01) -> Tuple[float, float]:
    """Wilson score interval for a Bernoulli mean, clipped to [0, 1]."""
    p_hat = float(p_hat)
    if n <= 0:
        raise ContractError(f"n must be positive, got {n}")
    if not 0.0 <= p_hat <= 1.0:
        raise ContractError(f"p_hat must lie in [0, 1], got {p_hat}")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    z = normal_quantile(1.0 - alpha / 2.0)
    z2n = z * z / n
    denom = 1.0 + z2n
    center = (p_hat + z2n / 2.0) / denom
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / n + z2n / (4.0 * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class MetricsReport:
    """Sample metrics with Wilson intervals at confidence 1 - alpha.

    The three point estimates come from one set of integer counts, so
    acc + fn_rate + fp_rate recombine to 1 exactly in counts.
    """

    n: int
    acc: float
    fn_rate: float
    fp_rate: float
    ci_acc: Tuple[float, float]
    ci_fn: Tuple[float, float]
    ci_fp: Tuple[float, float]
    alpha: float

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "acc": self.acc,
            "fn_rate": self.fn_rate,
            "fp_rate": self.fp_rate,
            "ci_acc": list(self.ci_acc),
            "ci_fn": list(self.ci_fn),
            "ci_fp": list(self.ci_fp),
            "alpha": self.alpha,
        }


def metrics_from_counts(
    n: int, fn_count: int, fp_count: int, alpha: float = 0.01
) -> MetricsReport:
    """Report from integer error counts over n samples."""
    if n <= 0:
        raise ContractError(f"n must be positive, got {n}")
    if fn_count < 0 or fp_count < 0 or fn_count + fp_count > n:
        raise ContractError(
            f"error counts ({fn_count}, {fp_count}) must be non-negative"
            f" and sum to at most n={n}"
        )
    correct = n - fn_count - fp_count
    acc = correct / n
    fn_rate = fn_count / n
    fp_rate = fp_count / n
    return MetricsReport(
        n=n,
        acc=acc,
        fn_rate=fn_rate,
        fp_rate=fp_rate,
        ci_acc=wilson_ci(acc, n, alpha),
        ci_fn=wilson_ci(fn_rate, n, alpha),
        ci_fp=wilson_ci(fp_rate, n, alpha),
        alpha=alpha,
    )


def evaluate_predictions(
    predictions: np.ndarray, labels: np.ndarray, alpha: float = 0.01
) -> MetricsReport:
    """Report from parallel boolean prediction and label arrays."""
    pred = np.asarray(predictions, dtype=bool)
    lab = np.asarray(labels, dtype=bool)
    if pred.shape != lab.shape or pred.ndim != 1:
        raise ContractError(
            f"predictions and labels must be equal-length vectors,"
            f" got {pred.shape} and {lab.shape}"
        )
    if pred.size == 0:
        raise ContractError("cannot evaluate on an empty sample set")
    fn_count = int(np.sum(lab & ~pred))
    fp_count = int(np.sum(~lab & pred))
    return metrics_from_counts(pred.size, fn_count, fp_count, alpha)


def evaluate(
    classifier: Union[Network, Ensemble], dataset: Dataset, alpha: float = 0.01
) -> MetricsReport:
    """Evaluate a classifier on a labeled dataset.

    Accuracy counts agreements; a false negative is a positive-labeled
    sample classified negative, a false positive the reverse.
    """
    if len(dataset) == 0:
        raise ContractError("cannot evaluate on an empty dataset")
    pred = classify(classifier, dataset.states)
    return evaluate_predictions(pred, dataset.labels, alpha)
