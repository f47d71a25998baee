"""Intuitionistic fuzzy elements: hesitation, normalized Hamming distance, entropy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TOL = 1e-12


@dataclass(frozen=True)
class IfsElement:
    """A membership / non-membership / hesitation triple ``<u, v, pi>``."""

    u: float
    v: float
    pi: float

    def __iter__(self):
        yield self.u
        yield self.v
        yield self.pi


def _check_unit(name: str, x: float) -> None:
    if not math.isfinite(x) or x < 0.0 or x > 1.0:
        raise ValueError(f"{name}={x!r} is outside [0, 1]")


def make_element(u: float, v: float) -> IfsElement:
    u = float(u)
    v = float(v)
    _check_unit("u", u)
    _check_unit("v", v)
    pi = 1.0 - u - v
    if pi < -TOL:
        raise ValueError(f"u + v = {u + v!r} exceeds 1")
    if pi < 0.0:
        pi = 0.0
    return IfsElement(u, v, pi)


M = IfsElement(1.0, 0.0, 0.0)
N = IfsElement(0.0, 1.0, 0.0)


def hamming_distance(a: IfsElement, b: IfsElement) -> float:
    return (abs(a.u - b.u) + abs(a.v - b.v) + abs(a.pi - b.pi)) / 2.0


def ifs_entropy(e: IfsElement) -> float:
    """Ratio of the smaller to the larger distance to the anchors M and N.

    Zero for fully certain elements, one when membership equals non-membership.
    """
    dm = hamming_distance(e, M)
    dn = hamming_distance(e, N)
    return min(dm, dn) / max(dm, dn)


def non_membership_from(u: float, d_pi: float) -> float:
    _check_unit("u", float(u))
    _check_unit("d_pi", float(d_pi))
    return (1.0 - u) * d_pi


def entropy_array(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorised :func:`ifs_entropy` for arrays of valid ``(u, v)`` pairs.

    Uses the closed form ``min(1-u, 1-v) / max(1-u, 1-v)``; the denominator is
    zero only when ``u = v = 1``, which no valid element can reach.
    """
    a = 1.0 - np.asarray(u, dtype=float)
    b = 1.0 - np.asarray(v, dtype=float)
    return np.minimum(a, b) / np.maximum(a, b)
