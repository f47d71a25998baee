"""Per-feature 1-D K-means and strong trapezoid intuitionistic fuzzy partitions.

Each continuous feature is clustered on its own (labels never take part), the
sorted centers are turned into a strong trapezoid partition whose transition
bands are controlled by the shape parameter ``S``, and every cell is mapped to
one intuitionistic fuzzy element per partition with ``v = (1 - u) * d_pi``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset
from .ifs import entropy_array

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"

MAX_ITER = 300


class PartitionWarning(UserWarning):
    """Raised when the requested cluster count had to be reduced."""


def _sse(x: np.ndarray, centers: np.ndarray, assign: np.ndarray) -> float:
    return float(np.sum((x - centers[assign]) ** 2))


def _assign(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = np.abs(x[:, None] - centers[None, :])
    return np.argmin(d, axis=1)


def kmeans_1d(values: Sequence[float] | np.ndarray, C: int, seed: int = 0, trace: list | None = None) -> np.ndarray:
    """Lloyd's algorithm on one feature, seeded at quantiles of the distinct values.

    Initialization is deterministic, so ``seed`` does not change the result; it
    is accepted to keep the call signature uniform with the other fitting steps.
    When ``trace`` is a list, the within-cluster squared error after each
    update step is appended to it.
    """
    x = np.asarray(values, dtype=float)
    x = x[~np.isnan(x)]
    if x.size == 0:
        raise ValueError("no non-missing values to cluster")
    if C < 1:
        raise ValueError(f"cluster count must be >= 1, got {C}")
    distinct = np.unique(x)
    if C > distinct.size:
        warnings.warn(f"cluster count {C} exceeds {distinct.size} distinct values; reduced", PartitionWarning, stacklevel=2)
        C = distinct.size

    centers = np.quantile(distinct, (np.arange(C) + 0.5) / C)
    assign = _assign(x, centers)
    for _ in range(MAX_ITER):
        new = centers.copy()
        for i in range(C):
            members = x[assign == i]
            if members.size:
                new[i] = members.mean()
        empty = [i for i in range(C) if not np.any(assign == i)]
        if empty:
            # re-seed each empty cluster at the point farthest from its own center
            dist = np.abs(x - new[assign])
            for i in empty:
                j = int(np.argmax(dist))
                new[i] = x[j]
                dist[j] = -1.0
        centers = new
        if trace is not None:
            trace.append(_sse(x, centers, assign))
        new_assign = _assign(x, centers)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        if trace is not None:
            trace.append(_sse(x, centers, assign))

    centers = np.sort(centers)
    merged = np.unique(centers)
    if merged.size < centers.size:
        warnings.warn(f"merged {centers.size - merged.size} duplicate centers", PartitionWarning, stacklevel=2)
    return merged


@dataclass(frozen=True)
class TrapezoidPartition:
    index: int
    center: float
    plateau_lo: float
    plateau_hi: float
    foot_lo: float
    foot_hi: float
    unbounded_lo: bool = False
    unbounded_hi: bool = False

    def membership(self, x: float) -> float:
        if self.unbounded_lo:
            left = 1.0
        elif self.plateau_lo > self.foot_lo:
            left = min(max((x - self.foot_lo) / (self.plateau_lo - self.foot_lo), 0.0), 1.0)
        else:
            left = float(x > self.foot_lo)
        if self.unbounded_hi:
            right = 1.0
        elif self.foot_hi > self.plateau_hi:
            right = min(max((self.foot_hi - x) / (self.foot_hi - self.plateau_hi), 0.0), 1.0)
        else:
            right = float(x <= self.plateau_hi)
        return left * right


@dataclass(frozen=True)
class FeaturePartitionSet:
    feature: int
    kind: str
    S: float
    d_pi: float
    centers: tuple[float, ...] = ()
    categories: tuple[str, ...] = ()

    @property
    def C(self) -> int:
        return len(self.centers) if self.kind == CONTINUOUS else len(self.categories)

    @property
    def band_edges(self) -> list[tuple[float, float]]:
        """Transition band ``[c_i + e, c_{i+1} - e]`` for every adjacent pair, ``e = gap / S``."""
        edges = []
        for a, b in zip(self.centers[:-1], self.centers[1:]):
            e = (b - a) / self.S
            lo, hi = a + e, b - e
            if lo > hi:  # S = 2 may leave a rounding-sized inversion
                lo = hi = (a + b) / 2.0
            edges.append((lo, hi))
        return edges

    @property
    def partitions(self) -> list[TrapezoidPartition]:
        if self.kind != CONTINUOUS:
            raise ValueError("categorical features have no trapezoid geometry")
        edges = self.band_edges
        out = []
        C = self.C
        for i, c in enumerate(self.centers):
            if i == 0:
                foot_lo = plateau_lo = -math.inf
            else:
                foot_lo, plateau_lo = edges[i - 1]
            if i == C - 1:
                plateau_hi = foot_hi = math.inf
            else:
                plateau_hi, foot_hi = edges[i]
            out.append(TrapezoidPartition(i, c, plateau_lo, plateau_hi, foot_lo, foot_hi, i == 0, i == C - 1))
        return out

    def membership(self, x) -> np.ndarray:
        """Membership of each value in every partition, shape ``(len(x), C)``.

        NaN inputs give a row of NaN.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind == CATEGORICAL:
            out = np.zeros((x.size, self.C))
            ok = ~np.isnan(x)
            out[np.flatnonzero(ok), x[ok].astype(np.int64)] = 1.0
            out[~ok] = np.nan
            return out
        C = self.C
        out = np.ones((x.size, C))
        for g, (lo, hi) in enumerate(self.band_edges):
            if hi > lo:
                t = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
            else:
                t = (x > lo).astype(float)
            out[:, g] *= 1.0 - t
            out[:, g + 1] *= t
        out[np.isnan(x)] = np.nan
        return out


def build_partitions(centers: Sequence[float], S: float, d_pi: float, feature: int = 0) -> FeaturePartitionSet:
    centers = tuple(float(c) for c in centers)
    if not centers:
        raise ValueError("at least one center is required")
    if not S >= 2:
        raise ValueError(f"shape parameter S must be >= 2, got {S}")
    if not 0.0 <= d_pi <= 1.0:
        raise ValueError(f"hesitation parameter d_pi must lie in [0, 1], got {d_pi}")
    if any(b <= a for a, b in zip(centers[:-1], centers[1:])):
        raise ValueError("centers must be strictly increasing")
    return FeaturePartitionSet(feature, CONTINUOUS, float(S), float(d_pi), centers=centers)


def categorical_partitions(categories: Sequence[str], d_pi: float, feature: int = 0) -> FeaturePartitionSet:
    if not 0.0 <= d_pi <= 1.0:
        raise ValueError(f"hesitation parameter d_pi must lie in [0, 1], got {d_pi}")
    return FeaturePartitionSet(feature, CATEGORICAL, math.inf, float(d_pi), categories=tuple(categories))


def membership_vector(ps: FeaturePartitionSet, x: float) -> np.ndarray:
    return ps.membership(x)[0]


@dataclass(frozen=True, eq=False)
class FuzzifiedDataset:
    """Per (row, feature, partition) membership, non-membership and entropy.

    Arrays have shape ``(n, features, width)`` where ``width`` is the largest
    partition count; padding cells have ``u = v = E = 0``.  MISSING cells are
    flagged in ``missing`` and hold NaN in ``u``, ``v`` and ``E``.
    """

    partition_sets: tuple[FeaturePartitionSet, ...]
    u: np.ndarray
    v: np.ndarray
    E: np.ndarray
    missing: np.ndarray
    source: Dataset | None = field(default=None, repr=False)

    @property
    def n_samples(self) -> int:
        return self.u.shape[0]

    @property
    def n_features(self) -> int:
        return self.u.shape[1]

    @property
    def n_partitions(self) -> np.ndarray:
        return np.array([ps.C for ps in self.partition_sets], dtype=np.int64)


def fit_partitions(d: Dataset, C: int, S: float, d_pi: float, seed: int = 0) -> tuple[FeaturePartitionSet, ...]:
    """Fit one partition set per feature from the rows of ``d`` (labels unused)."""
    if C < 1:
        raise ValueError(f"cluster count must be >= 1, got {C}")
    if not S >= 2:
        raise ValueError(f"shape parameter S must be >= 2, got {S}")
    if not 0.0 <= d_pi <= 1.0:
        raise ValueError(f"hesitation parameter d_pi must lie in [0, 1], got {d_pi}")
    rows = d.rows
    sets = []
    for j, fs in enumerate(d.schema):
        if fs.is_categorical:
            sets.append(categorical_partitions(fs.categories, d_pi, feature=j))
            continue
        col = rows[:, j]
        col = col[~np.isnan(col)]
        if col.size == 0:
            # nothing to cluster: a single partition keeps the feature inert
            sets.append(build_partitions((0.0,), S, d_pi, feature=j))
            continue
        centers = kmeans_1d(col, C, seed)
        sets.append(build_partitions(centers, S, d_pi, feature=j))
    return tuple(sets)


def fuzzify_rows(partition_sets: Sequence[FeaturePartitionSet], rows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Map raw rows to ``(u, v, E, missing)`` arrays using fitted partition sets."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    n, m = rows.shape
    if m != len(partition_sets):
        raise ValueError(f"rows have {m} features, partitions fitted on {len(partition_sets)}")
    width = max((ps.C for ps in partition_sets), default=1)
    u = np.zeros((n, m, width))
    v = np.zeros((n, m, width))
    E = np.zeros((n, m, width))
    missing = np.isnan(rows)
    for j, ps in enumerate(partition_sets):
        col = rows[:, j]
        if ps.kind == CATEGORICAL:
            bad = ~np.isnan(col) & ((col < 0) | (col >= ps.C) | (col != np.round(col)))
            if bad.any():
                # unseen category codes are treated as missing
                col = np.where(bad, np.nan, col)
                missing[:, j] |= bad
        uj = ps.membership(col)
        vj = (1.0 - uj) * ps.d_pi
        u[:, j, : ps.C] = uj
        v[:, j, : ps.C] = vj
        E[:, j, : ps.C] = entropy_array(uj, vj)
    return u, v, E, missing


def fuzzify_with(partition_sets: Sequence[FeaturePartitionSet], d: Dataset) -> FuzzifiedDataset:
    """Fuzzify ``d`` with already-fitted partition sets."""
    u, v, E, missing = fuzzify_rows(partition_sets, d.rows)
    return FuzzifiedDataset(tuple(partition_sets), u, v, E, missing, d)


def fuzzify_dataset(d: Dataset, C: int, S: float, d_pi: float, seed: int = 0) -> FuzzifiedDataset:
    """Discretize every feature of ``d`` and fuzzify all of its cells.

    Only the feature rows are read; the result keeps a reference to ``d`` so
    tree induction can reach the labels later.
    """
    return fuzzify_with(fit_partitions(d, C, S, d_pi, seed), d)


def partition_report(partition_sets: Sequence[FeaturePartitionSet], names: Sequence[str] | None = None) -> str:
    lines = []
    for ps in partition_sets:
        name = names[ps.feature] if names else f"f{ps.feature}"
        if ps.kind == CATEGORICAL:
            lines.append(f"{name}\tcategorical\tC={ps.C}\td_pi={ps.d_pi!r}\tcategories={','.join(ps.categories)}")
            continue
        centers = ",".join(repr(c) for c in ps.centers)
        bands = ";".join(f"[{lo!r},{hi!r}]" for lo, hi in ps.band_edges)
        lines.append(f"{name}\tcontinuous\tC={ps.C}\tS={ps.S!r}\td_pi={ps.d_pi!r}\tcenters={centers}\tbands={bands}")
    return "\n".join(lines) + "\n"
