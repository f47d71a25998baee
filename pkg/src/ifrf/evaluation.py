"""Cross-validation, hyperparameter grid search and accuracy bookkeeping."""

from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import Dataset, inject_label_noise, stratified_kfold
from .discretizer import fit_partitions, fuzzify_rows, fuzzify_with
from .forest import check_scheme, train_forest
from .parallel import pmap
from .tree import Factors, build_tree, predict_tree

log = logging.getLogger(__name__)

PARAMS = ("C", "S", "d_pi", "n_alpha", "d_beta", "n_gamma")
DISCRETIZATION = ("C", "S", "d_pi")
MODELS = ("forest", "tree")


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 63-bit seed for a sub-task identified by ``keys``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(keys))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class Hyperparameters:
    C: int = 2
    S: float = 7
    d_pi: float = 0.9
    n_alpha: int = 5
    d_beta: int = 5
    n_gamma: int = 100

    def __post_init__(self):
        if int(self.C) != self.C or self.C < 1:
            raise ValueError(f"C must be a positive integer, got {self.C}")
        if not self.S >= 2:
            raise ValueError(f"S must be >= 2, got {self.S}")
        if not 0.0 <= self.d_pi <= 1.0:
            raise ValueError(f"d_pi must lie in [0, 1], got {self.d_pi}")
        if int(self.n_alpha) != self.n_alpha or self.n_alpha < 1:
            raise ValueError(f"n_alpha must be a positive integer, got {self.n_alpha}")
        if int(self.d_beta) != self.d_beta or self.d_beta < 1:
            raise ValueError(f"d_beta must be a positive integer, got {self.d_beta}")
        if int(self.n_gamma) != self.n_gamma or self.n_gamma < 1:
            raise ValueError(f"n_gamma must be a positive integer, got {self.n_gamma}")

    def as_dict(self) -> dict:
        return asdict(self)

    def __str__(self) -> str:
        return " ".join(f"{k}={v}" for k, v in self.as_dict().items())


DEFAULTS = Hyperparameters()

_CASTS = {"C": int, "S": float, "d_pi": float, "n_alpha": int, "d_beta": int, "n_gamma": int}


def _parse_value(name: str, token: str):
    x = float(token)
    if _CASTS[name] is int:
        if x != int(x):
            raise ValueError(f"{name} needs integer values, got {token.strip()!r}")
        return int(x)
    return x


@dataclass
class HyperparameterGrid:
    """Candidate values per hyperparameter, kept in declaration order."""

    values: dict[str, list] = field(default_factory=dict)

    def __post_init__(self):
        for name, vals in self.values.items():
            if name not in PARAMS:
                raise ValueError(f"unknown hyperparameter {name!r}")
            if not vals:
                raise ValueError(f"empty value list for {name!r}")
            for v in vals:
                replace(DEFAULTS, **{name: v})

    def __bool__(self) -> bool:
        return bool(self.values)

    def configurations(self, base: Hyperparameters = DEFAULTS) -> list[Hyperparameters]:
        names = list(self.values)
        return [replace(base, **dict(zip(names, combo))) for combo in itertools.product(*(self.values[n] for n in names))]

    @classmethod
    def parse(cls, text: str) -> "HyperparameterGrid":
        """Parse ``name=v1,v2,...`` lines; blank lines and ``#`` comments are ignored."""
        values = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            name, sep, rhs = line.partition("=")
            name = name.strip()
            if not sep or name not in _CASTS:
                raise ValueError(f"grid line {lineno}: expected name=v1,v2,... with name in {PARAMS}")
            if name in values:
                raise ValueError(f"grid line {lineno}: {name} given twice")
            try:
                values[name] = [_parse_value(name, x) for x in rhs.split(",") if x.strip()]
            except ValueError as exc:
                raise ValueError(f"grid line {lineno}: {exc}") from None
        return cls(values)

    @classmethod
    def read(cls, path: str | Path) -> "HyperparameterGrid":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def dumps(self) -> str:
        return "".join(f"{k}={','.join(repr(v) for v in vals)}\n" for k, vals in self.values.items())


REFERENCE_GRID = HyperparameterGrid(
    {
        "C": [2, 3, 4, 5, 6, 7],
        "S": [2.0, 3.0, 4.0, 5.0, 7.0, 9.0, 10000.0],
        "d_pi": [0.5, 0.6, 0.7, 0.8, 0.9],
        "n_alpha": [5, 10, 15, 20],
        "d_beta": [2, 4, 6, 8, 10, 12, 14, 16, 18, 20],
        "n_gamma": [600],
    }
)


@dataclass(frozen=True)
class CVResult:
    mean: float
    std: float
    fold_accuracies: tuple[float, ...]
    configs: tuple[Hyperparameters, ...] = ()

    def __str__(self) -> str:
        return f"{self.mean:.2f} +/- {self.std:.2f}"


def fit_predict(
    train: Dataset,
    test_rows: np.ndarray,
    config: Hyperparameters,
    seed: int,
    model: str = "forest",
    scheme: int = 1,
    literal_parent_weights: bool = False,
) -> np.ndarray:
    """Fit the discretizer and model on ``train`` only, then label ``test_rows``."""
    sets = fit_partitions(train, config.C, config.S, config.d_pi, seed)
    fz = fuzzify_with(sets, train)
    if model == "tree":
        tree = build_tree(fz, None, config.d_beta, config.n_alpha, seed=seed, literal_parent_weights=literal_parent_weights)
        u, v, E, missing = fuzzify_rows(sets, test_rows)
        F = Factors.from_arrays(u, v, E, missing, [ps.C for ps in sets])
        return predict_tree(tree, F)
    if model != "forest":
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    forest = train_forest(fz, config.n_gamma, config.d_beta, config.n_alpha, seed, literal_parent_weights=literal_parent_weights)
    return forest.predict(test_rows, scheme)


def _summarize(accs: Sequence[float], configs: Sequence[Hyperparameters] = ()) -> CVResult:
    a = np.asarray(accs, dtype=float)
    return CVResult(float(a.mean()), float(a.std()), tuple(float(x) for x in a), tuple(configs))


def _fold_task(fold, d, assignment, config, seed, model, scheme, noise, literal):
    train_idx = np.flatnonzero(assignment != fold)
    test_idx = np.flatnonzero(assignment == fold)
    train = d.subset(train_idx)
    if noise > 0:
        train = inject_label_noise(train, noise, derive_seed(seed, 2, fold))
    pred = fit_predict(train, d.rows[test_idx], config, derive_seed(seed, 1, fold), model, scheme, literal)
    return 100.0 * float(np.mean(pred == d.labels[test_idx]))


def cross_validate(
    d: Dataset,
    config: Hyperparameters = DEFAULTS,
    k: int = 5,
    scheme: int = 1,
    seed: int = 42,
    model: str = "forest",
    noise: float = 0.0,
    workers: int = 1,
    literal_parent_weights: bool = False,
) -> CVResult:
    """Stratified k-fold accuracy (percent) with a fixed configuration.

    ``noise`` shuffles that fraction of labels in each training portion; test
    folds keep their true labels.  ``std`` is the population standard deviation.
    """
    check_scheme(scheme)
    if k < 2:
        raise ValueError(f"need k >= 2 folds, got {k}")
    folds = stratified_kfold(d, k, seed)
    task = partial(
        _fold_task, d=d, assignment=folds.assignment, config=config, seed=seed,
        model=model, scheme=scheme, noise=noise, literal=literal_parent_weights,
    )
    return _summarize(pmap(task, range(k), workers))


@dataclass(frozen=True)
class GridSearchResult:
    best: Hyperparameters
    score: float
    scores: tuple[tuple[Hyperparameters, float], ...]


def _tie_key(item: tuple[int, Hyperparameters, float]):
    order, cfg, score = item
    return (-score, cfg.C, cfg.d_beta, order)


def _pick(scored: list[tuple[int, Hyperparameters, float]]) -> tuple[Hyperparameters, float]:
    _, cfg, score = min(scored, key=_tie_key)
    return cfg, score


def _score_task(cfg, d, inner_k, seed, model, scheme, literal):
    return cross_validate(d, cfg, inner_k, scheme, seed, model, literal_parent_weights=literal).mean


def _score_all(d, configs, inner_k, seed, models, scheme, workers, literal):
    tasks = [partial(_score_task, cfg, d, inner_k, seed, m, scheme, literal) for cfg, m in zip(configs, models)]
    return pmap(_call, tasks, workers)


def _call(fn):
    return fn()


def grid_search(
    d: Dataset,
    grid: HyperparameterGrid,
    inner_k: int = 5,
    seed: int = 42,
    scheme: int = 1,
    model: str = "forest",
    staged: bool = False,
    tree_proxy: Iterable[str] = (),
    base: Hyperparameters = DEFAULTS,
    workers: int = 1,
    literal_parent_weights: bool = False,
) -> GridSearchResult:
    """Pick the configuration with the best inner-CV mean accuracy on ``d``.

    Exhaustive over the Cartesian grid by default.  With ``staged`` the
    parameters are tuned one at a time in grid order (``C`` first), each stage
    holding the others at the defaults or at the values already chosen.
    Parameters named in ``tree_proxy`` are scored with a single tree instead
    of a forest.  Ties go to the smaller ``C``, then the smaller ``d_beta``,
    then the earlier configuration.
    """
    if not grid:
        raise ValueError("empty hyperparameter grid")
    proxy = set(tree_proxy)
    scored: list[tuple[Hyperparameters, float]] = []
    if not staged:
        configs = grid.configurations(base)
        if len(configs) == 1:
            return GridSearchResult(configs[0], float("nan"), ())
        models = ["tree" if model == "tree" or set(grid.values) <= proxy else "forest"] * len(configs)
        scores = _score_all(d, configs, inner_k, seed, models, scheme, workers, literal_parent_weights)
        scored = list(zip(configs, scores))
        best, score = _pick([(i, c, s) for i, (c, s) in enumerate(scored)])
        return GridSearchResult(best, score, tuple(scored))

    names = sorted(grid.values, key=lambda n: (n != "C", list(grid.values).index(n)))
    current, score = base, float("nan")
    for name in names:
        stage = HyperparameterGrid({name: grid.values[name]}).configurations(current)
        if len(stage) == 1:
            current = stage[0]
            continue
        m = "tree" if model == "tree" or name in proxy else "forest"
        scores = _score_all(d, stage, inner_k, seed, [m] * len(stage), scheme, workers, literal_parent_weights)
        scored.extend(zip(stage, scores))
        current, score = _pick([(i, c, s) for i, (c, s) in enumerate(zip(stage, scores))])
        log.info("stage %s -> %s (%.2f)", name, getattr(current, name), score)
    return GridSearchResult(current, score, tuple(scored))


def _nested_task(fold, d, assignment, grid, inner_k, seed, scheme, model, staged, proxy, noise, literal, cap):
    train_idx = np.flatnonzero(assignment != fold)
    test_idx = np.flatnonzero(assignment == fold)
    train = d.subset(train_idx)
    if noise > 0:
        train = inject_label_noise(train, noise, derive_seed(seed, 2, fold))
    gs = grid_search(train, grid, inner_k, derive_seed(seed, 3, fold), scheme, model, staged, proxy, literal_parent_weights=literal)
    best = gs.best
    if cap is not None and best.n_gamma > cap:
        best = replace(best, n_gamma=cap)
    pred = fit_predict(train, d.rows[test_idx], best, derive_seed(seed, 1, fold), model, scheme, literal)
    return 100.0 * float(np.mean(pred == d.labels[test_idx])), best


def nested_cross_validate(
    d: Dataset,
    grid: HyperparameterGrid,
    k: int = 5,
    inner_k: int = 5,
    scheme: int = 1,
    seed: int = 42,
    model: str = "forest",
    staged: bool = False,
    tree_proxy: Iterable[str] = (),
    noise: float = 0.0,
    workers: int = 1,
    literal_parent_weights: bool = False,
    n_gamma_cap: int | None = None,
) -> CVResult:
    """Outer k-fold accuracy where every fold tunes its own configuration on its training part."""
    check_scheme(scheme)
    folds = stratified_kfold(d, k, seed)
    task = partial(
        _nested_task, d=d, assignment=folds.assignment, grid=grid, inner_k=inner_k, seed=seed,
        scheme=scheme, model=model, staged=staged, proxy=tuple(tree_proxy), noise=noise,
        literal=literal_parent_weights, cap=n_gamma_cap,
    )
    results = pmap(task, range(k), workers)
    return _summarize([r[0] for r in results], [r[1] for r in results])
