"""Univariate interpolation/quadrature knot families.

A KnotFamily bundles the node generator with a level-to-nodes function
m(j): m(0)=0, m(1)=1 and m(j) >= j-1.  Weights are probability weights
(they sum to 1 under the uniform density of the interval), so sparse
quadrature of f yields E[f] directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

GAUSS_LEGENDRE = "gauss-legendre"
CLENSHAW_CURTIS = "clenshaw-curtis"
LINEAR_RULE = "linear"
DOUBLING_RULE = "doubling"


@lru_cache(maxsize=None)
def _gauss_legendre_unit(m: int):
    """Nodes/weights on [-1, 1]; weights normalised to sum 1."""
    x, w = np.polynomial.legendre.leggauss(m)
    order = np.argsort(x)
    return x[order], w[order] / 2.0


@lru_cache(maxsize=None)
def _clenshaw_curtis_unit(m: int):
    """Clenshaw-Curtis nodes/weights on [-1, 1], weights summing to 1."""
    if m == 1:
        return np.zeros(1), np.ones(1)
    n = m - 1
    k = np.arange(m)
    theta = k * np.pi / n
    x = -np.cos(theta)
    w = np.ones(m)
    js = np.arange(1, n // 2 + 1)
    b = np.where(js == n / 2.0, 1.0, 2.0)
    corr = (b / (4.0 * js**2 - 1.0))[None, :] * np.cos(2.0 * np.outer(theta, js))
    w -= corr.sum(axis=1)
    w *= 2.0 / n
    w[0] /= 2.0
    w[-1] /= 2.0
    return x, w / 2.0


@dataclass(frozen=True)
class KnotFamily:
    """Node family plus level-to-nodes map shared by all dimensions."""

    kind: str = GAUSS_LEGENDRE
    rule: str = LINEAR_RULE

    def __post_init__(self):
        if self.kind not in (GAUSS_LEGENDRE, CLENSHAW_CURTIS):
            raise ValueError(f"unknown knot kind {self.kind!r}")
        if self.rule not in (LINEAR_RULE, DOUBLING_RULE):
            raise ValueError(f"unknown level-to-nodes rule {self.rule!r}")
        if self.rule == DOUBLING_RULE and self.kind != CLENSHAW_CURTIS:
            raise ValueError("the doubling rule pairs with Clenshaw-Curtis")

    def m(self, j: int) -> int:
        """Number of nodes at level j."""
        if j < 0:
            raise ValueError("level must be >= 0")
        if j <= 1:
            return j
        if self.rule == LINEAR_RULE:
            return j
        return 2 ** (j - 1) + 1

    def nodes_weights(self, m: int, a: float, b: float):
        """m nodes (ascending) and probability weights on [a, b]."""
        if m < 1:
            raise ValueError("need at least one node")
        if self.kind == GAUSS_LEGENDRE:
            x, w = _gauss_legendre_unit(m)
        else:
            x, w = _clenshaw_curtis_unit(m)
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        return mid + half * x, w.copy()

    @property
    def nested(self) -> bool:
        return self.kind == CLENSHAW_CURTIS and self.rule == DOUBLING_RULE


def parse_knots(spec: str) -> KnotFamily:
    """CLI shorthand: 'gl' / 'cc' with optional ':doubling'."""
    parts = spec.lower().split(":")
    kind = {"gl": GAUSS_LEGENDRE, "cc": CLENSHAW_CURTIS}.get(parts[0])
    if kind is None:
        raise ValueError(f"unknown knots spec {spec!r} (use gl or cc)")
    rule = LINEAR_RULE
    if len(parts) > 1:
        rule = {"linear": LINEAR_RULE, "doubling": DOUBLING_RULE}[parts[1]]
    return KnotFamily(kind=kind, rule=rule)
