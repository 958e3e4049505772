"""Streaming moments, estimator aggregation and performance metrics."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Moments:
    """Count, mean and sum of squared deviations of a batch of samples."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, samples) -> "Moments":
        a = np.asarray(samples, dtype=np.float64).ravel()
        if a.size == 0:
            return cls()
        mean = math.fsum(a) / a.size
        m2 = math.fsum((a - mean) ** 2)
        return cls(int(a.size), mean, m2)

    def merge(self, other: "Moments") -> "Moments":
        # Chan, Golub and LeVeque pairwise update
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return Moments(n, mean, m2)

    __add__ = merge


def merge_all(parts: Iterable[Moments]) -> Moments:
    """Pairwise tree reduction; deterministic for a given partition order."""
    items = list(parts)
    if not items:
        return Moments()
    while len(items) > 1:
        nxt = [items[i].merge(items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


CSV_COLUMNS = ("method", "param", "T", "N", "seed", "tau_max", "m0", "h", "mean",
               "stddev_of_estimator", "rsd", "rsdcc_seconds", "re_percent",
               "cost_per_sample_seconds", "c_constant", "mean_rho_tot", "clamp_rate")


@dataclass(frozen=True)
class SensitivityEstimate:
    mean: float
    stddev_of_estimator: float
    N: int
    cost_per_sample_seconds: float | None = None
    rsd: float | None = None
    rsdcc_seconds: float | None = None
    re_percent: float | None = None
    c_constant: float | None = None
    mean_rho_tot: float | None = None
    clamp_rate: float | None = None
    p_saturated_fraction: float | None = None
    # scenario description carried along for output
    method: str | None = None
    param: str | None = None
    T: float | None = None
    seed: int | None = None
    tau_max: float | None = None
    m0: int | None = None
    h: float | None = None
    cost_clock: str = "wall"
    samples: np.ndarray | None = field(default=None, repr=False, compare=False)

    def with_fields(self, **kw) -> "SensitivityEstimate":
        return replace(self, **kw)

    def row(self) -> dict:
        return {name: getattr(self, name) for name in CSV_COLUMNS}

    def ci99(self) -> float:
        """Half-width of the Gaussian 99% confidence interval."""
        return 2.5758293035489 * self.stddev_of_estimator


def aggregate(samples_or_moments) -> SensitivityEstimate:
    """Mean and estimator standard deviation sqrt(sum (s - mean)^2 / (N (N - 1)))."""
    if isinstance(samples_or_moments, Moments):
        m = samples_or_moments
    elif (isinstance(samples_or_moments, Sequence) and samples_or_moments
          and isinstance(samples_or_moments[0], Moments)):
        m = merge_all(samples_or_moments)
    else:
        m = Moments.of(samples_or_moments)
    if m.n < 2:
        raise ValueError(f"need at least 2 samples, got {m.n}")
    if not math.isfinite(m.mean):
        raise ValueError("samples contain non-finite values")
    sd = math.sqrt(max(m.m2, 0.0) / (m.n * (m.n - 1)))
    return SensitivityEstimate(mean=m.mean, stddev_of_estimator=sd, N=m.n)


def relative_error(mean: float, reference: float) -> float:
    if reference == 0:
        raise ValueError("relative error needs a nonzero reference")
    return abs(mean - reference) / abs(reference) * 100.0


def compute_metrics(est: SensitivityEstimate, reference: float | None = None,
                    cost_per_sample: float | None = None) -> SensitivityEstimate:
    """Fill in RSD, RSDCC (when a cost is known) and RE (when a reference is given)."""
    if est.mean == 0:
        raise ValueError("RSD is undefined for a zero mean")
    rsd = math.sqrt(est.N) * est.stddev_of_estimator / abs(est.mean)
    cost = est.cost_per_sample_seconds if cost_per_sample is None else cost_per_sample
    kw = {"rsd": rsd, "cost_per_sample_seconds": cost}
    if cost is not None:
        kw["rsdcc_seconds"] = rsd * rsd * cost
    if reference is not None:
        kw["re_percent"] = relative_error(est.mean, reference)
    return replace(est, **kw)


def finish_estimate(est: SensitivityEstimate, reference: float | None,
                    cost_per_sample: float) -> SensitivityEstimate:
    """Like :func:`compute_metrics` but tolerates a zero mean (RSD left empty)."""
    if est.mean != 0:
        return compute_metrics(est, reference, cost_per_sample)
    re = None if reference is None else relative_error(est.mean, reference)
    return replace(est, cost_per_sample_seconds=cost_per_sample, re_percent=re)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(estimates: Sequence[SensitivityEstimate], header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(CSV_COLUMNS)
    for e in estimates:
        w.writerow([_fmt(v) for v in e.row().values()])
    return buf.getvalue()


def to_json(estimates: Sequence[SensitivityEstimate]) -> str:
    rows = [e.row() for e in estimates]
    return json.dumps(rows if len(rows) != 1 else rows[0], indent=2) + "\n"
