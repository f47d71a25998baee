"""Random forest of intuitionistic fuzzy decision trees.

Each tree is grown on a bootstrap sample with a random ``log2 m`` feature
subset evaluated at every node.  Its out-of-bag error rate sets a voting
weight in ``[0.25, 1]``, and predictions combine the reached leaves either
per tree (scheme 1) or across all leaves directly (scheme 2).
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import Dataset, FeatureSchema
from .discretizer import (
    CATEGORICAL,
    CONTINUOUS,
    FeaturePartitionSet,
    FuzzifiedDataset,
    fit_partitions,
    fuzzify_rows,
    fuzzify_with,
)
from .parallel import pmap
from .tree import (
    Factors,
    IfdtTree,
    LeafVote,
    build_tree,
    best_class,
    class_votes,
    leaf_votes,
    random_subset,
)

FORMAT_HEADER = "IFRF/1"
SCHEMES = (1, 2)


def tree_rng(seed: int, t: int) -> np.random.Generator:
    """Random stream of tree ``t``; depends only on ``(seed, t)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(t,)))


def bootstrap(n: int, seed: int | np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` indices with replacement; return the bag and the never-drawn (OOB) indices."""
    if n < 1:
        raise ValueError("bootstrap needs at least one sample")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    bag = rng.integers(0, n, size=n)
    counts = np.bincount(bag, minlength=n)
    return bag, np.flatnonzero(counts == 0)


def feature_subset_sampler(candidates: Sequence[int] | np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return random_subset(np.asarray(candidates, dtype=np.int64), rng)


def tree_weight(err: float, emin: float, emax: float) -> float:
    """Voting weight of a tree from its OOB error and the forest's error range."""
    if not emin <= err <= emax:
        raise ValueError(f"error rate {err} outside [{emin}, {emax}]")
    if emax == emin:
        return 1.0
    marg = (emax - emin) / 4.0
    if err <= emin + marg:
        return 1.0
    if err >= emax:
        return 0.25
    # clip guards the rounding of tiny ranges; the formula itself stays within [0.25, 1]
    return min(1.0, max(0.25, ((emax + marg) - err) / (emax - emin)))


@dataclass(frozen=True)
class ForestParams:
    n_gamma: int = 100
    d_beta: int = 5
    n_alpha: int = 5
    literal_parent_weights: bool = False


@dataclass(eq=False)
class IfrfForest:
    trees: list[IfdtTree]
    weights: np.ndarray
    errors: np.ndarray
    partition_sets: tuple[FeaturePartitionSet, ...]
    schema: tuple[FeatureSchema, ...]
    class_names: tuple[str, ...]
    seed: int
    params: dict = field(default_factory=dict)
    emin: float = 0.0
    emax: float = 0.0

    @property
    def n_gamma(self) -> int:
        return len(self.trees)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def factors(self, rows: np.ndarray) -> Factors:
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.shape[1] != len(self.schema):
            raise ValueError(f"schema mismatch: rows have {rows.shape[1]} features, model expects {len(self.schema)}")
        u, v, E, missing = fuzzify_rows(self.partition_sets, rows)
        return Factors.from_arrays(u, v, E, missing, [ps.C for ps in self.partition_sets])

    def tree_votes(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-tree, per-query, per-class sums of leaf votes and reached flags, shape ``(trees, q, K)``."""
        F = self.factors(rows)
        pairs = [class_votes(t, F) for t in self.trees]
        return np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])

    def tree_scores(self, rows: np.ndarray) -> np.ndarray:
        return self.tree_votes(rows)[0]

    def predict(self, rows: np.ndarray, scheme: int = 1) -> np.ndarray:
        check_scheme(scheme)
        S, R = self.tree_votes(rows)
        if scheme == 1:
            tally = np.zeros(S.shape[1:])
            labels = best_class(S, R)
            q = np.arange(S.shape[1])
            for t, w in enumerate(self.weights):
                tally[q, labels[t]] += w
            return best_class(tally, tally > 0)
        tally = np.einsum("t,tqk->qk", self.weights, S)
        return best_class(tally, R.any(axis=0))

    def result_matrix(self, row: Sequence[float]) -> "ResultMatrix":
        row = np.asarray(row, dtype=float)
        if row.ndim != 1 or row.size != len(self.schema):
            raise ValueError(f"schema mismatch: expected {len(self.schema)} feature values")
        u, v, _, missing = fuzzify_rows(self.partition_sets, row[None])
        votes = [leaf_votes(t, u[0], v[0], missing[0], tree_id=i) for i, t in enumerate(self.trees)]
        return ResultMatrix(votes, np.asarray(self.weights, dtype=float), self.n_classes)


def check_scheme(scheme: int) -> None:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected 1 or 2")


@dataclass(frozen=True, eq=False)
class ResultMatrix:
    """Leaves reached by one query in every tree, plus the tree weights.

    Unreached leaves are simply absent.
    """

    votes: list[list[LeafVote]]
    weights: np.ndarray
    n_classes: int

    def tree_scores(self) -> np.ndarray:
        return self.tree_votes()[0]

    def tree_votes(self) -> tuple[np.ndarray, np.ndarray]:
        scores = np.zeros((len(self.votes), self.n_classes))
        reached = np.zeros_like(scores, dtype=bool)
        for t, leaves in enumerate(self.votes):
            for lv in leaves:
                scores[t, lv.label] += lv.L
                reached[t, lv.label] = True
        return scores, reached


def _check_matrix(rm: ResultMatrix) -> None:
    if not rm.votes or not any(rm.votes):
        raise ValueError("empty result matrix")


def vote_scheme1(rm: ResultMatrix) -> int:
    """Tree-level fusion: each tree votes its top class with its weight."""
    _check_matrix(rm)
    tally = np.zeros(rm.n_classes)
    S, R = rm.tree_votes()
    for t in range(len(rm.votes)):
        if rm.votes[t]:
            tally[best_class(S[t], R[t])] += rm.weights[t]
    return best_class(tally, tally > 0)


def vote_scheme2(rm: ResultMatrix) -> int:
    """Leaf-level fusion: every reached leaf adds ``w_t * L`` to its class."""
    _check_matrix(rm)
    S, R = rm.tree_votes()
    return best_class(rm.weights @ S, R.any(axis=0))


def _grow(t: int, fz: FuzzifiedDataset, F: Factors, params: ForestParams, seed: int) -> tuple[IfdtTree, float | None]:
    rng = tree_rng(seed, t)
    bag, oob = bootstrap(fz.n_samples, rng)
    tree = build_tree(
        fz,
        bag,
        params.d_beta,
        params.n_alpha,
        feature_sampler=random_subset,
        seed=rng,
        literal_parent_weights=params.literal_parent_weights,
        factors=F,
    )
    if oob.size == 0:
        return tree, None
    pred = best_class(*class_votes(tree, F, oob))
    return tree, float(np.mean(pred != fz.source.labels[oob]))


def _grow_chunk(ts: list[int], fz, F, params, seed):
    return [_grow(t, fz, F, params, seed) for t in ts]


def forest_weights(errors: Sequence[float | None]) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Resolve empty-OOB errors to ``emin`` and map every error rate to a weight."""
    known = [e for e in errors if e is not None]
    if not known:
        return np.ones(len(errors)), np.zeros(len(errors)), 0.0, 0.0
    emin, emax = min(known), max(known)
    errs = np.array([emin if e is None else e for e in errors])
    weights = np.array([tree_weight(e, emin, emax) for e in errs])
    return weights, errs, emin, emax


def train_forest(
    fz: FuzzifiedDataset,
    n_gamma: int = 100,
    d_beta: int = 5,
    n_alpha: int = 5,
    seed: int = 42,
    workers: int = 1,
    literal_parent_weights: bool = False,
) -> IfrfForest:
    if n_gamma < 1:
        raise ValueError(f"n_gamma must be >= 1, got {n_gamma}")
    if fz.n_samples == 0:
        raise ValueError("cannot train on an empty dataset")
    params = ForestParams(n_gamma, d_beta, n_alpha, literal_parent_weights)
    F = Factors.of(fz)
    if workers <= 1:
        grown = [_grow(t, fz, F, params, seed) for t in range(n_gamma)]
    else:
        chunks = [list(range(n_gamma))[i::workers] for i in range(workers)]
        parts = pmap(partial(_grow_chunk, fz=fz, F=F, params=params, seed=seed), chunks, workers)
        by_t = {t: g for ts, gs in zip(chunks, parts) for t, g in zip(ts, gs)}
        grown = [by_t[t] for t in range(n_gamma)]
    trees = [g[0] for g in grown]
    weights, errs, emin, emax = forest_weights([g[1] for g in grown])
    src = fz.source
    return IfrfForest(
        trees,
        weights,
        errs,
        fz.partition_sets,
        src.schema,
        src.class_names,
        seed,
        {"n_gamma": n_gamma, "d_beta": d_beta, "n_alpha": n_alpha, "literal_parent_weights": literal_parent_weights},
        emin,
        emax,
    )


def fit_forest(
    d: Dataset,
    C: int = 2,
    S: float = 7,
    d_pi: float = 0.9,
    n_gamma: int = 100,
    d_beta: int = 5,
    n_alpha: int = 5,
    seed: int = 42,
    workers: int = 1,
    literal_parent_weights: bool = False,
) -> IfrfForest:
    """Fit the discretizer on ``d`` and train a forest on the fuzzified data."""
    fz = fuzzify_with(fit_partitions(d, C, S, d_pi, seed), d)
    forest = train_forest(fz, n_gamma, d_beta, n_alpha, seed, workers, literal_parent_weights)
    forest.params.update({"C": C, "S": S, "d_pi": d_pi})
    return forest


def predict(forest: IfrfForest, row: Sequence[float], scheme: int = 1) -> int:
    check_scheme(scheme)
    rm = forest.result_matrix(row)
    return vote_scheme1(rm) if scheme == 1 else vote_scheme2(rm)


# -- model file ---------------------------------------------------------------


def _num(x: float):
    return None if x is None or not math.isfinite(x) else float(x)


def _partition_to_dict(ps: FeaturePartitionSet) -> dict:
    d = {"feature": ps.feature, "kind": ps.kind, "d_pi": float(ps.d_pi)}
    if ps.kind == CONTINUOUS:
        d["S"] = float(ps.S)
        d["centers"] = [float(c) for c in ps.centers]
        d["bands"] = [[lo, hi] for lo, hi in ps.band_edges]
    else:
        d["categories"] = list(ps.categories)
    return d


def _partition_from_dict(d: dict) -> FeaturePartitionSet:
    if d["kind"] == CATEGORICAL:
        return FeaturePartitionSet(d["feature"], CATEGORICAL, math.inf, d["d_pi"], categories=tuple(d["categories"]))
    return FeaturePartitionSet(d["feature"], CONTINUOUS, d["S"], d["d_pi"], centers=tuple(d["centers"]))


def forest_to_dict(f: IfrfForest) -> dict:
    return {
        "schema": [{"name": s.name, "kind": s.kind, "categories": list(s.categories)} for s in f.schema],
        "class_names": list(f.class_names),
        "seed": f.seed,
        "params": f.params,
        "partitions": [_partition_to_dict(ps) for ps in f.partition_sets],
        "emin": _num(f.emin),
        "emax": _num(f.emax),
        "weights": [float(w) for w in f.weights],
        "errors": [float(e) for e in f.errors],
        "trees": [t.to_dict() for t in f.trees],
    }


def forest_from_dict(d: dict) -> IfrfForest:
    schema = tuple(FeatureSchema(s["name"], s["kind"], tuple(s["categories"])) for s in d["schema"])
    return IfrfForest(
        [IfdtTree.from_dict(t) for t in d["trees"]],
        np.array(d["weights"], dtype=float),
        np.array(d["errors"], dtype=float),
        tuple(_partition_from_dict(p) for p in d["partitions"]),
        schema,
        tuple(d["class_names"]),
        d["seed"],
        d["params"],
        d["emin"] or 0.0,
        d["emax"] or 0.0,
    )


def dumps(f: IfrfForest) -> str:
    return FORMAT_HEADER + "\n" + json.dumps(forest_to_dict(f), indent=1) + "\n"


def loads(text: str) -> IfrfForest:
    header, _, body = text.partition("\n")
    if header.strip() != FORMAT_HEADER:
        raise ValueError(f"not an {FORMAT_HEADER} model file (header {header[:20]!r})")
    return forest_from_dict(json.loads(body))


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save(f: IfrfForest, path: str | Path) -> None:
    atomic_write(path, dumps(f))


def load(path: str | Path) -> IfrfForest:
    return loads(Path(path).read_text(encoding="utf-8"))
