"""Downward-closed multi-index sets and combination coefficients.

Indices are 1-based (level 1 is the first interpolation level).  A set
I is downward closed when j - e_k stays inside I for every member j and
every k with j_k > 1; the combination-technique coefficients

    c_j = sum over k in {0,1}^N with j+k in I of (-1)^{|k|}

are only valid on such sets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..errors import NotDownwardClosedError


@dataclass(frozen=True)
class MultiIndexSet:
    dim: int
    indices: tuple  # of tuples, sorted
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_members", frozenset(self.indices))
        missing = find_downward_violation(self.indices)
        if missing is not None:
            raise NotDownwardClosedError(
                f"index set is not downward closed: missing {missing}"
            )

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, j):
        return tuple(j) in self._members

    def as_array(self) -> np.ndarray:
        return np.array(self.indices, dtype=int)


def find_downward_violation(indices):
    members = frozenset(indices)
    for j in indices:
        for k in range(len(j)):
            if j[k] > 1:
                below = j[:k] + (j[k] - 1,) + j[k + 1 :]
                if below not in members:
                    return below
    return None


def make_index_set_iso(dim: int, w: int) -> MultiIndexSet:
    """All j in N_+^dim with sum(j_n - 1) <= w."""
    if dim < 1 or w < 0:
        raise ValueError("need dim >= 1 and w >= 0")
    return make_index_set_aniso(dim, w, (1.0,) * dim)


def make_index_set_aniso(dim: int, w: float, alpha) -> MultiIndexSet:
    """All j in N_+^dim with sum(alpha_n * (j_n - 1)) <= w."""
    alpha = tuple(float(a) for a in alpha)
    if len(alpha) != dim:
        raise ValueError(f"alpha has {len(alpha)} entries for dim {dim}")
    if any(a <= 0 for a in alpha):
        raise ValueError("anisotropy weights must be positive")
    if w < 0:
        raise ValueError("w must be >= 0")

    out = []

    def recurse(prefix, budget):
        n = len(prefix)
        if n == dim:
            out.append(tuple(prefix))
            return
        a = alpha[n]
        top = int(np.floor(budget / a + 1e-12)) + 1
        for j in range(1, top + 1):
            cost = a * (j - 1)
            if cost > budget + 1e-12:
                break
            recurse(prefix + [j], budget - cost)

    recurse([], float(w))
    out.sort()
    return MultiIndexSet(
        dim=dim,
        indices=tuple(out),
        meta={"w": w, "alpha": list(alpha)},
    )


def make_index_set_explicit(indices) -> MultiIndexSet:
    """Wrap an externally computed list (validated for downward closure)."""
    indices = sorted(set(tuple(int(v) for v in j) for j in indices))
    if not indices:
        raise ValueError("index set cannot be empty")
    dims = {len(j) for j in indices}
    if len(dims) != 1:
        raise ValueError("indices have inconsistent dimensions")
    if any(v < 1 for j in indices for v in j):
        raise ValueError("indices are 1-based; levels must be >= 1")
    return MultiIndexSet(dim=dims.pop(), indices=tuple(indices),
                         meta={"explicit": True})


def combination_coefficients(index_set: MultiIndexSet) -> dict:
    """Map j -> c_j; zero coefficients are dropped.

    Skips the k-sum whenever j + 1 lies in the set (the coefficient is
    zero there for downward-closed sets).
    """
    dim = index_set.dim
    ones = tuple([1] * dim)
    shifts = list(itertools.product((0, 1), repeat=dim))
    coeffs = {}
    for j in index_set:
        jp1 = tuple(a + b for a, b in zip(j, ones))
        if jp1 in index_set:
            continue
        c = 0
        for k in shifts:
            if tuple(a + b for a, b in zip(j, k)) in index_set:
                c += -1 if sum(k) % 2 else 1
        if c != 0:
            coeffs[j] = c
    return coeffs
