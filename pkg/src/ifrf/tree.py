"""Intuitionistic fuzzy decision tree induction and classification.

Every sample carries a cumulative membership ``chi`` and non-membership
``psi`` down the tree.  Entering the child for partition ``a`` multiplies them
by the sample's ``u_a`` and ``v_a``; a MISSING value on the split feature sends
the sample to every child with both factors equal to ``1 / C``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .discretizer import FuzzifiedDataset

ZERO = 1e-12

FeatureSampler = Callable[[np.ndarray, np.random.Generator], np.ndarray]


def all_features(candidates: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return candidates


def log2_subset_size(m: int) -> int:
    return max(1, int(math.floor(math.log2(m)))) if m >= 1 else 0


def random_subset(candidates: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """``max(1, floor(log2 m))`` distinct candidates drawn uniformly, returned sorted."""
    k = log2_subset_size(candidates.size)
    return np.sort(rng.choice(candidates, size=k, replace=False))


@dataclass
class Node:
    depth: int
    stats: np.ndarray
    label: int
    n_samples: int
    feature: int | None = None
    children: list["Node"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_dict(self) -> dict:
        out = {"depth": self.depth, "n": self.n_samples, "label": self.label, "stats": [float(x) for x in self.stats]}
        if not self.is_leaf:
            out["feature"] = self.feature
            out["children"] = [c.to_dict() for c in self.children]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Node":
        node = cls(d["depth"], np.array(d["stats"], dtype=float), int(d["label"]), int(d["n"]))
        if "feature" in d:
            node.feature = int(d["feature"])
            node.children = [cls.from_dict(c) for c in d["children"]]
        return node


@dataclass
class IfdtTree:
    root: Node
    n_partitions: tuple[int, ...]
    n_classes: int

    def nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> list[Node]:
        return [n for n in self.nodes() if n.is_leaf]

    @property
    def depth(self) -> int:
        return max(n.depth for n in self.nodes())

    def paths(self):
        """Yield the list of split features along every root-to-leaf path."""

        def walk(node, path):
            if node.is_leaf:
                yield path
                return
            for c in node.children:
                yield from walk(c, path + [node.feature])

        yield from walk(self.root, [])

    def to_dict(self) -> dict:
        return {"n_partitions": list(self.n_partitions), "n_classes": self.n_classes, "root": self.root.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "IfdtTree":
        return cls(Node.from_dict(d["root"]), tuple(d["n_partitions"]), int(d["n_classes"]))


@dataclass(frozen=True)
class LeafVote:
    tree: int
    leaf: int
    label: int
    L: float


@dataclass(frozen=True, eq=False)
class Factors:
    """Split factors of a fuzzified dataset with MISSING cells resolved.

    A MISSING cell behaves like ``u = v = 1/C`` on each of the feature's
    partitions and carries entropy 1, the entropy of the fully hesitant
    element ``<0, 0, 1>``.
    """

    u: np.ndarray
    v: np.ndarray
    E: np.ndarray
    n_partitions: np.ndarray
    valid: np.ndarray

    @classmethod
    def of(cls, fz: FuzzifiedDataset) -> "Factors":
        return cls.from_arrays(fz.u, fz.v, fz.E, fz.missing, fz.n_partitions)

    @classmethod
    def from_arrays(cls, u, v, E, missing, n_partitions) -> "Factors":
        n_partitions = np.asarray(n_partitions, dtype=np.int64)
        width = u.shape[2]
        valid = np.arange(width)[None, :] < n_partitions[:, None]
        share = np.where(valid, 1.0 / np.maximum(n_partitions, 1)[:, None], 0.0)
        miss = missing[:, :, None]
        u = np.where(miss, share[None], u)
        v = np.where(miss, share[None], v)
        E = np.where(miss, valid[None].astype(float), E)
        return cls(u, v, E, n_partitions, valid)


def best_class(scores: np.ndarray, secondary: np.ndarray) -> np.ndarray | int:
    """Argmax over the last axis; exact ties go to the larger ``secondary``, then the lowest index.

    Leaves use the class mass ``sum chi`` as ``secondary`` and votes use
    whether the class was reached at all, so an all-zero score vector still
    names a class that is actually present.
    """
    scores = np.asarray(scores, dtype=float)
    top = scores == scores.max(axis=-1, keepdims=True)
    key = np.where(top, np.asarray(secondary, dtype=float), -np.inf)
    out = np.argmax(key, axis=-1)
    return int(out) if out.ndim == 0 else out


def _distribution(w: np.ndarray, chi: np.ndarray, Y: np.ndarray) -> np.ndarray:
    total = w.sum()
    if total >= ZERO:
        return (w @ Y) / total
    return (chi @ Y) / chi.sum()


def class_distribution(chi: np.ndarray, entropy: np.ndarray, labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Entropy-weighted class proportions of a node.

    ``P_k = sum_{s in k} chi(s) E(s) / sum_s chi(s) E(s)``; when the
    denominator vanishes the proportions fall back to ``chi`` weights.
    """
    chi = np.asarray(chi, dtype=float)
    if chi.size == 0:
        raise ValueError("empty node")
    Y = np.eye(n_classes)[np.asarray(labels)]
    return _distribution(chi * np.asarray(entropy, dtype=float), chi, Y)


def info_entropy(P: np.ndarray) -> float:
    P = np.asarray(P, dtype=float)
    nz = P[P > 0]
    return max(0.0, float(-(nz * np.log2(nz)).sum()))


def ient(chi: np.ndarray, entropy: np.ndarray, labels: np.ndarray, n_classes: int) -> float:
    return info_entropy(class_distribution(chi, entropy, labels, n_classes))


def _entropy_rows(P: np.ndarray) -> np.ndarray:
    logs = np.log2(P, out=np.zeros_like(P), where=P > 0)
    return -(P * logs).sum(axis=-1)


def parent_entropy_weights(F: Factors, idx: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Mean entropy over every (candidate feature, partition) cell of each sample."""
    cells = F.E[idx][:, candidates, :].sum(axis=(1, 2))
    count = F.n_partitions[candidates].sum()
    return cells / count if count else np.zeros(idx.size)


def split_gains(
    F: Factors,
    idx: np.ndarray,
    chi: np.ndarray,
    Y: np.ndarray,
    candidates: np.ndarray,
    features: np.ndarray,
    literal_parent_weights: bool = False,
    with_parent: bool = True,
) -> np.ndarray:
    """Intuitionistic fuzzy information gain of splitting a node on each of ``features``.

    With ``with_parent=False`` the parent entropy (identical for every feature)
    is left out, which ranks features the same way at lower cost.
    """
    need_parent = with_parent or literal_parent_weights
    if need_parent:
        w_parent = chi * parent_entropy_weights(F, idx, candidates)
    parent = info_entropy(_distribution(w_parent, chi, Y)) if with_parent else 0.0

    U = F.u[idx][:, features, :]
    chi_c = chi[:, None, None] * U
    W = chi_c * F.E[idx][:, features, :]
    A = np.einsum("nfc,nk->fck", W, Y)
    T = A.sum(axis=-1)
    crisp = T < ZERO
    if crisp.any():
        B = np.einsum("nfc,nk->fck", chi_c, Y)
        Bt = B.sum(axis=-1)
        A = np.where(crisp[..., None], B, A)
        T_eff = np.where(crisp, Bt, T)
    else:
        Bt = None
        T_eff = T
    P = np.divide(A, T_eff[..., None], out=np.zeros_like(A), where=T_eff[..., None] > 0)
    H = _entropy_rows(P)

    if literal_parent_weights:
        denom = w_parent.sum()
        if denom >= ZERO:
            weights = T / denom
        else:
            weights = (Bt if Bt is not None else np.einsum("nfc->fc", chi_c)) / chi.sum()
    else:
        tot = T.sum(axis=1, keepdims=True)
        weights = np.divide(T, tot, out=np.zeros_like(T), where=tot >= ZERO)
        low = tot[:, 0] < ZERO
        if low.any():
            Bt_low = np.einsum("nfc->fc", chi_c[:, low, :])
            weights[low] = Bt_low / np.maximum(Bt_low.sum(axis=1, keepdims=True), np.finfo(float).tiny)
    gains = parent - (weights * H).sum(axis=1)
    gains[F.n_partitions[features] < 2] = 0.0
    return gains


def igain(fz: FuzzifiedDataset, F: int, idx=None, chi=None, candidates=None, literal_parent_weights: bool = False) -> float:
    """Gain of splitting the node holding samples ``idx`` (default: all, chi = 1) on feature ``F``."""
    labels = fz.source.labels
    n_classes = fz.source.n_classes
    idx = np.arange(fz.n_samples) if idx is None else np.asarray(idx, dtype=np.int64)
    chi = np.ones(idx.size) if chi is None else np.asarray(chi, dtype=float)
    candidates = np.arange(fz.n_features) if candidates is None else np.asarray(candidates, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("empty node")
    if F not in candidates:
        raise ValueError(f"feature {F} is not a candidate")
    Y = np.eye(n_classes)[labels[idx]]
    return float(split_gains(Factors.of(fz), idx, chi, Y, candidates, np.array([F]), literal_parent_weights)[0])


class _Builder:
    def __init__(self, F: Factors, labels, n_classes, d_beta, n_alpha, sampler, rng, literal):
        self.F = F
        self.labels = labels
        self.n_classes = n_classes
        self.eye = np.eye(n_classes)
        self.d_beta = d_beta
        self.n_alpha = n_alpha
        self.sampler = sampler
        self.rng = rng
        self.literal = literal

    def leaf_stats(self, idx, chi, psi):
        return np.bincount(self.labels[idx], weights=chi - psi, minlength=self.n_classes)

    def build(self, idx, chi, psi, candidates, depth, fallback_label=0) -> Node:
        if idx.size == 0:
            return Node(depth, np.zeros(self.n_classes), fallback_label, 0)
        stats = self.leaf_stats(idx, chi, psi)
        mass = np.bincount(self.labels[idx], weights=chi, minlength=self.n_classes)
        node = Node(depth, stats, best_class(stats, mass), int(idx.size))
        y = self.labels[idx]
        if depth >= self.d_beta or idx.size < self.n_alpha or np.all(y == y[0]) or candidates.size == 0:
            return node
        evaluated = self.sampler(candidates, self.rng)
        gains = split_gains(self.F, idx, chi, self.eye[y], candidates, evaluated, self.literal, with_parent=False)
        best = int(evaluated[int(np.argmax(gains))])
        node.feature = best
        rest = candidates[candidates != best]
        for a in range(int(self.F.n_partitions[best])):
            ua = self.F.u[idx, best, a]
            keep = ua > 0
            child = self.build(idx[keep], chi[keep] * ua[keep], psi[keep] * self.F.v[idx[keep], best, a], rest, depth + 1, node.label)
            node.children.append(child)
        return node


def build_tree(
    fz: FuzzifiedDataset,
    rows: Sequence[int] | np.ndarray | None = None,
    d_beta: int = 5,
    n_alpha: int = 5,
    feature_sampler: FeatureSampler = all_features,
    seed: int | np.random.Generator = 0,
    literal_parent_weights: bool = False,
    factors: Factors | None = None,
) -> IfdtTree:
    """Grow a tree on the (possibly repeated) sample indices ``rows``.

    A node becomes a leaf at depth ``d_beta`` (root depth is 1), with fewer
    than ``n_alpha`` samples, when it is single-class, or when no unused
    feature remains.  Otherwise the sampled candidate with the highest gain
    (lowest index on ties) splits it into one child per partition.
    """
    if d_beta < 1:
        raise ValueError(f"d_beta must be >= 1, got {d_beta}")
    if n_alpha < 1:
        raise ValueError(f"n_alpha must be >= 1, got {n_alpha}")
    idx = np.arange(fz.n_samples) if rows is None else np.asarray(rows, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("cannot grow a tree on an empty set of rows")
    F = factors if factors is not None else Factors.of(fz)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    candidates = np.flatnonzero(F.n_partitions >= 2)
    labels = np.asarray(fz.source.labels)
    b = _Builder(F, labels, fz.source.n_classes, d_beta, n_alpha, feature_sampler, rng, literal_parent_weights)
    root = b.build(idx, np.ones(idx.size), np.ones(idx.size), candidates, 1)
    return IfdtTree(root, tuple(int(c) for c in F.n_partitions), fz.source.n_classes)


def class_votes(tree: IfdtTree, F: Factors, rows: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-class sum of leaf votes ``chi - psi`` for a batch of queries, and which classes were reached.

    Both arrays have shape ``(q, K)``.
    """
    q = F.u.shape[0] if rows is None else len(rows)
    rows = np.arange(q) if rows is None else np.asarray(rows, dtype=np.int64)
    scores = np.zeros((q, tree.n_classes))
    reached = np.zeros((q, tree.n_classes), dtype=bool)
    stack = [(tree.root, np.arange(q), np.ones(q), np.ones(q))]
    while stack:
        node, pos, chi, psi = stack.pop()
        if node.is_leaf:
            np.add.at(scores[:, node.label], pos, chi - psi)
            reached[pos, node.label] = True
            continue
        f = node.feature
        r = rows[pos]
        for a, child in enumerate(node.children):
            ua = F.u[r, f, a]
            keep = ua > 0
            if keep.any():
                stack.append((child, pos[keep], chi[keep] * ua[keep], psi[keep] * F.v[r[keep], f, a]))
    return scores, reached


def class_scores(tree: IfdtTree, F: Factors, rows: np.ndarray | None = None) -> np.ndarray:
    return class_votes(tree, F, rows)[0]


def predict_tree(tree: IfdtTree, F: Factors, rows: np.ndarray | None = None) -> np.ndarray:
    return best_class(*class_votes(tree, F, rows))


def leaf_votes(tree: IfdtTree, u: np.ndarray, v: np.ndarray, missing: np.ndarray, tree_id: int = 0) -> list[LeafVote]:
    """Leaves reached by one fuzzified query row (arrays of shape ``(features, width)``)."""
    F = Factors.from_arrays(u[None], v[None], np.zeros_like(u)[None], missing[None], tree.n_partitions)
    votes = []
    leaf_ids = {id(n): i for i, n in enumerate(tree.leaves())}

    def walk(node, chi, psi):
        if node.is_leaf:
            votes.append(LeafVote(tree_id, leaf_ids[id(node)], node.label, chi - psi))
            return
        for a, child in enumerate(node.children):
            ua = F.u[0, node.feature, a]
            if ua > 0:
                walk(child, chi * ua, psi * F.v[0, node.feature, a])

    walk(tree.root, 1.0, 1.0)
    return votes


def vote_label(votes: Sequence[LeafVote], n_classes: int) -> int:
    scores = np.zeros(n_classes)
    reached = np.zeros(n_classes)
    for lv in votes:
        scores[lv.label] += lv.L
        reached[lv.label] = 1.0
    return best_class(scores, reached)


def classify_sample(tree: IfdtTree, u: np.ndarray, v: np.ndarray, missing: np.ndarray, tree_id: int = 0) -> tuple[int, list[LeafVote]]:
    votes = leaf_votes(tree, u, v, missing, tree_id)
    return vote_label(votes, tree.n_classes), votes
