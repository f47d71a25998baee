"""Friedman rank test, pairwise Friedman comparisons and Holm's step-down procedure."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

EPS = 1e-16
MAX_TERMS = 10_000


def _gser(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by its power series."""
    term = total = 1.0 / a
    ap = a
    for _ in range(MAX_TERMS):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gcf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by Lentz's continued fraction."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, MAX_TERMS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gammaincc(a: float, x: float) -> float:
    """Regularized upper incomplete gamma function Q(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gser(a, x)
    return _gcf(a, x)


def chi2_sf(x: float, df: int) -> float:
    """Upper tail probability of the chi-square distribution."""
    if x <= 0:
        return 1.0
    return gammaincc(df / 2.0, x / 2.0)


@dataclass
class AccuracyMatrix:
    """Accuracy percentages, rows = datasets, columns = algorithms."""

    values: np.ndarray
    rows: list[str]
    columns: list[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.rows), len(self.columns)):
            raise ValueError("matrix shape does not match its labels")
        if np.isnan(self.values).any():
            raise ValueError("accuracy matrix has missing cells")
        if (self.values < 0).any() or (self.values > 100).any():
            raise ValueError("accuracies must lie in [0, 100]")

    def column(self, label: str) -> int:
        try:
            return self.columns.index(label)
        except ValueError:
            raise KeyError(f"unknown column {label!r}") from None

    def select(self, labels: Sequence[str]) -> "AccuracyMatrix":
        idx = [self.column(c) for c in labels]
        return AccuracyMatrix(self.values[:, idx], list(self.rows), list(labels))

    @classmethod
    def read_csv(cls, path: str | Path) -> "AccuracyMatrix":
        with Path(path).open(newline="", encoding="utf-8") as fh:
            records = [r for r in csv.reader(fh) if r]
        if len(records) < 2:
            raise ValueError(f"{path}: need a header and at least one row")
        header = [h.strip() for h in records[0]]
        columns = header[1:]
        rows, values = [], []
        for r in records[1:]:
            if len(r) != len(header):
                raise ValueError(f"{path}: ragged row {r[0]!r}")
            rows.append(r[0].strip())
            values.append([float(x) for x in r[1:]])
        return cls(np.array(values), rows, columns)

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["dataset"] + self.columns)
            for name, row in zip(self.rows, self.values):
                w.writerow([name] + [repr(float(x)) for x in row])


def rank_rows(values: np.ndarray) -> np.ndarray:
    """Rank each row by error rate (rank 1 = highest accuracy), averaging ties."""
    err = 100.0 - np.asarray(values, dtype=float)
    ranks = np.empty_like(err)
    for i, row in enumerate(err):
        order = np.argsort(row, kind="stable")
        r = np.empty(row.size)
        j = 0
        while j < row.size:
            k = j
            while k + 1 < row.size and row[order[k + 1]] == row[order[j]]:
                k += 1
            r[order[j : k + 1]] = (j + k) / 2.0 + 1.0
            j = k + 1
        ranks[i] = r
    return ranks


@dataclass(frozen=True)
class FriedmanResult:
    mean_ranks: dict[str, float]
    statistic: float
    p_value: float


def friedman_test(am: AccuracyMatrix) -> FriedmanResult:
    N, k = am.values.shape
    if N < 2 or k < 2:
        raise ValueError(f"Friedman test needs at least 2 rows and 2 columns, got {N}x{k}")
    R = rank_rows(am.values).mean(axis=0)
    stat = 12.0 * N / (k * (k + 1)) * float(np.sum((R - (k + 1) / 2.0) ** 2))
    return FriedmanResult(dict(zip(am.columns, R.tolist())), stat, chi2_sf(stat, k - 1))


def pairwise_friedman(am: AccuracyMatrix, control: str) -> dict[str, float]:
    """p-value of a two-column Friedman test of ``control`` against every other column."""
    am.column(control)
    return {c: friedman_test(am.select([control, c])).p_value for c in am.columns if c != control}


@dataclass(frozen=True)
class HolmDecision:
    label: str
    p_value: float
    threshold: float
    reject: bool


def holm_adjust(pvalues: dict[str, float], alpha: float = 0.05) -> list[HolmDecision]:
    """Holm's step-down thresholds ``alpha / (m - i + 1)`` in ascending-p order."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    for label, p in pvalues.items():
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value of {label!r} outside [0, 1]")
    ordered = sorted(pvalues.items(), key=lambda kv: kv[1])
    m = len(ordered)
    out = []
    rejecting = True
    for i, (label, p) in enumerate(ordered, start=1):
        threshold = alpha / (m - i + 1)
        rejecting = rejecting and p <= threshold
        out.append(HolmDecision(label, p, threshold, rejecting))
    return out


def comparison_report(am: AccuracyMatrix, control: str | None = None, alpha: float = 0.05) -> str:
    """Aligned-text report: mean ranks, Friedman p-value and optional Holm decisions."""
    res = friedman_test(am)
    width = max(len(c) for c in am.columns)
    lines = [f"Friedman chi-square = {res.statistic:.4f}, df = {len(am.columns) - 1}, p = {res.p_value:.6f}", ""]
    lines.append(f"{'algorithm':<{width}}  mean_rank")
    for c, r in sorted(res.mean_ranks.items(), key=lambda kv: kv[1]):
        lines.append(f"{c:<{width}}  {r:9.4f}")
    if control is not None:
        lines += ["", f"pairwise Friedman vs {control} (Holm, alpha = {alpha})"]
        lines.append(f"{'algorithm':<{width}}  {'holm':>8}  {'p_value':>10}  decision")
        for h in holm_adjust(pairwise_friedman(am, control), alpha):
            decision = "reject" if h.reject else "not reject"
            lines.append(f"{h.label:<{width}}  {h.threshold:8.4f}  {h.p_value:10.6f}  {decision}")
    return "\n".join(lines) + "\n"
