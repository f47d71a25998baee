"""Command-line entry point: ``ifrf <subcommand> ...``.

Exit codes: 0 on success, 2 on invalid arguments or configuration, 1 when a
run fails after validation.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import forest as forest_mod
from .data import load_csv, read_feature_rows, inject_label_noise
from .discretizer import fit_partitions, fuzzify_with, partition_report
from .evaluation import (
    DEFAULTS,
    PARAMS,
    HyperparameterGrid,
    Hyperparameters,
    cross_validate,
    grid_search,
    nested_cross_validate,
)
from .stats import AccuracyMatrix, comparison_report, friedman_test, holm_adjust, pairwise_friedman

log = logging.getLogger("ifrf")


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    hyper: Hyperparameters = DEFAULTS
    scheme: int = 1
    folds: int = 5
    inner_folds: int = 5
    seed: int = 42
    noise: float = 0.0
    workers: int = 1
    flags: dict = field(default_factory=dict)


def _hyper_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--clusters", "-C", type=int, default=DEFAULTS.C, help="partitions per continuous feature (C)")
    g.add_argument("--shape", "-S", type=float, default=DEFAULTS.S, help="trapezoid shape parameter (S >= 2)")
    g.add_argument("--hesitation", type=float, default=DEFAULTS.d_pi, help="hesitation parameter d_pi in [0, 1]")
    g.add_argument("--max-depth", type=int, default=DEFAULTS.d_beta, help="maximum depth d_beta (root = 1)")
    g.add_argument("--min-samples", type=int, default=DEFAULTS.n_alpha, help="minimum node size n_alpha")
    g.add_argument("--trees", type=int, default=DEFAULTS.n_gamma, help="number of trees n_gamma")
    g.add_argument("--literal-parent-weights", action="store_true", help="normalize child weights by the parent total")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--workers", type=int, default=1, help="process count; output does not depend on it")
    p.add_argument("--label-column", default=None, help="label column name or index (default: last)")
    p.add_argument("--missing-token", default="?")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ifrf", description="Intuitionistic fuzzy decision trees and random forests.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fuzzify", help="fit the fuzzy discretizer and report the partitions")
    p.add_argument("--input", required=True)
    p.add_argument("--clusters", "-C", type=int, default=DEFAULTS.C)
    p.add_argument("--shape", "-S", type=float, default=DEFAULTS.S)
    p.add_argument("--hesitation", type=float, default=DEFAULTS.d_pi)
    p.add_argument("--dump-partitions", action="store_true", help="print centers and band edges per feature")
    p.add_argument("--output", help="write per-cell membership, non-membership and entropy as CSV")
    _common(p)

    p = sub.add_parser("train", help="train a forest and write a model file")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True, help="output model path")
    p.add_argument("--scheme", type=int, default=1, help="default voting scheme stored in the model")
    _hyper_args(p)
    _common(p)

    p = sub.add_parser("predict", help="label rows with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--scheme", type=int, default=None, help="voting scheme (default: the model's)")
    p.add_argument("--missing-token", default="?")

    p = sub.add_parser("evaluate", help="k-fold cross-validated accuracy")
    p.add_argument("--input", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--noise", type=float, default=0.0, help="fraction of training labels to shuffle")
    p.add_argument("--scheme", type=int, default=1)
    p.add_argument("--model-type", choices=["forest", "tree"], default="forest")
    p.add_argument("--grid", help="tune per fold with this grid file (nested CV)")
    p.add_argument("--inner-folds", type=int, default=5)
    p.add_argument("--staged-grid", action="store_true")
    p.add_argument("--tree-proxy", default="", help="comma-separated parameters scored with a single tree")
    p.add_argument("--max-trees", type=int, default=None, help="cap n_gamma of tuned configurations")
    p.add_argument("--output", help="append a result row to this CSV file")
    _hyper_args(p)
    _common(p)

    p = sub.add_parser("grid-search", help="select hyperparameters by inner cross-validation")
    p.add_argument("--input", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--inner-folds", type=int, default=5)
    p.add_argument("--scheme", type=int, default=1)
    p.add_argument("--model-type", choices=["forest", "tree"], default="forest")
    p.add_argument("--staged-grid", action="store_true")
    p.add_argument("--tree-proxy", default="")
    p.add_argument("--noise", type=float, default=0.0)
    _hyper_args(p)
    _common(p)

    p = sub.add_parser("compare", help="Friedman test with optional pairwise Holm comparison")
    p.add_argument("--matrix", required=True, help="accuracy CSV: dataset column then one column per algorithm")
    p.add_argument("--control", default=None)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--output", help="write mean ranks and pairwise results as CSV")
    return parser


def _hyper_from(args) -> Hyperparameters:
    try:
        return Hyperparameters(
            C=args.clusters, S=args.shape, d_pi=args.hesitation,
            n_alpha=args.min_samples, d_beta=args.max_depth, n_gamma=args.trees,
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def _require_file(path: str) -> None:
    if not Path(path).is_file():
        raise ValidationError(f"no such file: {path}")


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)


def _proxy(text: str) -> tuple[str, ...]:
    if text in ("", "none"):
        return ()
    if text == "all":
        return PARAMS[:5]
    names = tuple(t.strip() for t in text.split(",") if t.strip())
    bad = [n for n in names if n not in PARAMS]
    _check(not bad, f"unknown --tree-proxy parameters {bad}")
    return names


def validate(args) -> RunConfig:
    cmd = args.command
    cfg = RunConfig(cmd)
    if hasattr(args, "seed"):
        cfg.seed = args.seed
        cfg.workers = args.workers
        _check(args.workers >= 1, "--workers must be >= 1")
    if hasattr(args, "input"):
        _require_file(args.input)
    if cmd == "fuzzify":
        _check(args.clusters >= 1, "--clusters must be >= 1")
        _check(args.shape >= 2, "--shape must be >= 2")
        _check(0.0 <= args.hesitation <= 1.0, "--hesitation must lie in [0, 1]")
        cfg.hyper = replace(DEFAULTS, C=args.clusters, S=args.shape, d_pi=args.hesitation)
    if cmd in ("train", "evaluate", "grid-search"):
        cfg.hyper = _hyper_from(args)
    if getattr(args, "scheme", None) is not None:
        _check(args.scheme in forest_mod.SCHEMES, f"unknown scheme {args.scheme}; expected 1 or 2")
        cfg.scheme = args.scheme
    if cmd == "predict":
        _require_file(args.model)
    if cmd in ("evaluate", "grid-search"):
        _check(0.0 <= args.noise <= 1.0, "--noise must lie in [0, 1]")
        cfg.noise = args.noise
        _check(args.inner_folds >= 2, "--inner-folds must be >= 2")
        cfg.inner_folds = args.inner_folds
        cfg.flags["tree_proxy"] = _proxy(args.tree_proxy)
        cfg.flags["staged"] = args.staged_grid
        if args.grid:
            _require_file(args.grid)
            try:
                cfg.flags["grid"] = HyperparameterGrid.read(args.grid)
            except ValueError as exc:
                raise ValidationError(f"{args.grid}: {exc}") from None
            _check(bool(cfg.flags["grid"]), f"{args.grid}: empty grid")
    if cmd == "evaluate":
        _check(args.folds >= 2, "--folds must be >= 2")
        cfg.folds = args.folds
        _check(args.max_trees is None or args.max_trees >= 1, "--max-trees must be >= 1")
    if cmd == "compare":
        _require_file(args.matrix)
        _check(0.0 < args.alpha < 1.0, "--alpha must lie in (0, 1)")
    return cfg


def _load(args):
    return load_csv(args.input, args.label_column, args.missing_token)


def _cmd_fuzzify(args, cfg: RunConfig, out) -> None:
    d = _load(args)
    h = cfg.hyper
    sets = fit_partitions(d, h.C, h.S, h.d_pi, cfg.seed)
    fz = fuzzify_with(sets, d)
    names = [f.name for f in d.schema]
    out.write(f"rows={d.n_samples} features={d.n_features} classes={d.n_classes}\n")
    out.write("partitions=" + ",".join(f"{n}:{ps.C}" for n, ps in zip(names, sets)) + "\n")
    if args.dump_partitions:
        out.write(partition_report(sets, names))
    if args.output:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "feature", "partition", "u", "v", "pi", "E"])
        for i in range(fz.n_samples):
            for j, ps in enumerate(sets):
                for a in range(ps.C):
                    if fz.missing[i, j]:
                        w.writerow([i, names[j], a, "?", "?", "?", "?"])
                        continue
                    u, v, e = fz.u[i, j, a], fz.v[i, j, a], fz.E[i, j, a]
                    w.writerow([i, names[j], a, repr(float(u)), repr(float(v)), repr(float(max(0.0, 1.0 - u - v))), repr(float(e))])
        forest_mod.atomic_write(args.output, buf.getvalue())


def _cmd_train(args, cfg: RunConfig, out) -> None:
    d = _load(args)
    h = cfg.hyper
    f = forest_mod.fit_forest(
        d, h.C, h.S, h.d_pi, h.n_gamma, h.d_beta, h.n_alpha, cfg.seed, cfg.workers, args.literal_parent_weights
    )
    f.params["scheme"] = cfg.scheme
    forest_mod.save(f, args.model)
    out.write(f"trained {f.n_gamma} trees; OOB error min={f.emin:.4f} max={f.emax:.4f}; model written to {args.model}\n")


def _cmd_predict(args, cfg: RunConfig, out) -> None:
    f = forest_mod.load(args.model)
    scheme = args.scheme if args.scheme is not None else int(f.params.get("scheme", 1))
    rows = read_feature_rows(args.input, f.schema, args.missing_token)
    pred = f.predict(rows, scheme) if len(rows) else np.array([], dtype=int)
    forest_mod.atomic_write(args.output, "".join(f"{f.class_names[p]}\n" for p in pred))
    out.write(f"wrote {len(pred)} predictions to {args.output}\n")


def _cmd_evaluate(args, cfg: RunConfig, out) -> None:
    d = _load(args)
    grid = cfg.flags.get("grid")
    if grid is not None:
        res = nested_cross_validate(
            d, grid, cfg.folds, cfg.inner_folds, cfg.scheme, cfg.seed, args.model_type,
            cfg.flags["staged"], cfg.flags["tree_proxy"], cfg.noise, cfg.workers,
            args.literal_parent_weights, args.max_trees,
        )
    else:
        res = cross_validate(
            d, cfg.hyper, cfg.folds, cfg.scheme, cfg.seed, args.model_type, cfg.noise, cfg.workers,
            args.literal_parent_weights,
        )
    out.write(f"accuracy {res.mean:.2f} +/- {res.std:.2f} over {cfg.folds} folds\n")
    out.write("folds " + " ".join(f"{a:.2f}" for a in res.fold_accuracies) + "\n")
    for i, c in enumerate(res.configs):
        out.write(f"fold {i}: {c}\n")
    if args.output:
        path = Path(args.output)
        new = not path.exists() or path.stat().st_size == 0
        with path.open("a", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if new:
                w.writerow(["dataset", "model", "scheme", "folds", "noise", "seed", "config", "mean", "std", "fold_accuracies"])
            config = "grid" if grid is not None else str(cfg.hyper)
            w.writerow([
                Path(args.input).stem, args.model_type, cfg.scheme, cfg.folds, repr(cfg.noise), cfg.seed, config,
                f"{res.mean:.4f}", f"{res.std:.4f}", " ".join(f"{a:.4f}" for a in res.fold_accuracies),
            ])


def _cmd_grid_search(args, cfg: RunConfig, out) -> None:
    d = _load(args)
    if cfg.noise > 0:
        d = inject_label_noise(d, cfg.noise, cfg.seed)
    res = grid_search(
        d, cfg.flags["grid"], cfg.inner_folds, cfg.seed, cfg.scheme, args.model_type, cfg.flags["staged"],
        cfg.flags["tree_proxy"], cfg.hyper, cfg.workers, args.literal_parent_weights,
    )
    out.write(f"selected {res.best}\n")
    if res.scores:
        out.write(f"inner-cv accuracy {res.score:.2f}\n")


def _cmd_compare(args, cfg: RunConfig, out) -> None:
    am = AccuracyMatrix.read_csv(args.matrix)
    out.write(comparison_report(am, args.control, args.alpha))
    if args.output:
        res = friedman_test(am)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["algorithm", "mean_rank", "p_value", "holm_threshold", "reject"])
        holm = {}
        if args.control is not None:
            holm = {h.label: h for h in holm_adjust(pairwise_friedman(am, args.control), args.alpha)}
        for c in am.columns:
            h = holm.get(c)
            w.writerow([
                c, f"{res.mean_ranks[c]:.4f}",
                f"{h.p_value:.6f}" if h else (f"{res.p_value:.6f}" if args.control is None else ""),
                f"{h.threshold:.6f}" if h else "", ("reject" if h.reject else "not reject") if h else "",
            ])
        forest_mod.atomic_write(args.output, buf.getvalue())


COMMANDS = {
    "fuzzify": _cmd_fuzzify,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "grid-search": _cmd_grid_search,
    "compare": _cmd_compare,
}


def run(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        with contextlib.redirect_stderr(err), contextlib.redirect_stdout(out):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = validate(args)
    except ValidationError as exc:
        err.write(f"ifrf {args.command}: {exc}\n")
        return 2
    try:
        COMMANDS[args.command](args, cfg, out)
    except Exception as exc:  # report any runtime failure as exit 1
        log.debug("run failed", exc_info=True)
        err.write(f"ifrf {args.command}: {exc}\n")
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
