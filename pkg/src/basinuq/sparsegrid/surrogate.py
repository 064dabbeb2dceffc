"""Sparse-grid collocation surrogate in combination-technique form.

The surrogate is the signed sum S[f](p) = sum_j c_j T_j[f](p) of tensor
Lagrange interpolants over the grids G_{m(j)}.  Collocation points are
deduplicated across tensor grids (per-dimension clustering with a
1e-12 * interval-width tolerance, which merges e.g. the repeated centre
point of odd Gauss rules), so the model is evaluated exactly once per
distinct point.  Vector-valued outputs share the grid: one model run
fills every output slot.

Serialisation is a versioned JSON document; stored outputs round-trip
bit-exactly (floats are written with repr).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import OutOfDomainError
from ..scenario import ParameterSpace
from .indexsets import (
    MultiIndexSet,
    combination_coefficients,
    make_index_set_explicit,
)
from .knots import KnotFamily

DEDUP_REL_TOL = 1e-12
NEAR_NODE_REL_TOL = 1e-14

SERIAL_FORMAT = "basinuq-sparse-grid"
SERIAL_VERSION = 1


@dataclass(frozen=True)
class TermGeometry:
    """One tensor grid of the combination: index, coefficient, layout."""

    j: tuple
    c: int
    node_ids: tuple  # per dim: array of global 1d-node ids, len m(j_n)
    flat_point_ids: np.ndarray  # C-order raveled ids into the point table


@dataclass
class GridDesign:
    """Geometry of a sparse grid: points, terms, barycentric data."""

    space: ParameterSpace
    knots: KnotFamily
    index_set: MultiIndexSet
    coeffs: dict
    node_values: list  # per dim: ascending array of distinct 1d nodes
    node_weights: dict  # (dim, level) -> probability weights
    terms: list
    points: np.ndarray  # (n_points, dim)
    _bary: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, space: ParameterSpace, index_set: MultiIndexSet,
              knots: KnotFamily) -> "GridDesign":
        dim = index_set.dim
        if space.dim != dim:
            raise ValueError(
                f"parameter space dim {space.dim} != index set dim {dim}"
            )
        coeffs = combination_coefficients(index_set)
        levels_per_dim = [
            sorted({j[n] for j in coeffs}) for n in range(dim)
        ]

        # cluster the union of 1d nodes per dimension
        node_values = []
        level_ids = {}  # (dim, level) -> global 1d ids
        node_weights = {}
        for n in range(dim):
            a, b = space.lows[n], space.highs[n]
            tol = DEDUP_REL_TOL * (b - a)
            raw = []
            for lev in levels_per_dim[n]:
                x, w = knots.nodes_weights(knots.m(lev), a, b)
                node_weights[(n, lev)] = w
                raw.append(x)
            allx = np.concatenate(raw)
            order = np.argsort(allx)
            sorted_x = allx[order]
            cluster_of = np.empty(len(allx), dtype=int)
            reps = []
            for pos, x in zip(order, sorted_x):
                if reps and x - reps[-1] <= tol:
                    cluster_of[pos] = len(reps) - 1
                else:
                    reps.append(x)
                    cluster_of[pos] = len(reps) - 1
            node_values.append(np.asarray(reps))
            start = 0
            for lev, x in zip(levels_per_dim[n], raw):
                level_ids[(n, lev)] = cluster_of[start : start + len(x)].copy()
                start += len(x)

        # assemble global points from the tensor grids
        point_index = {}
        coords = []
        terms = []
        for j in sorted(coeffs):
            ids_per_dim = [level_ids[(n, j[n])] for n in range(dim)]
            mesh = np.meshgrid(*ids_per_dim, indexing="ij")
            combos = np.stack([m.ravel() for m in mesh], axis=1)
            flat = np.empty(len(combos), dtype=int)
            for row, key_arr in enumerate(combos):
                key = tuple(int(v) for v in key_arr)
                idx = point_index.get(key)
                if idx is None:
                    idx = len(coords)
                    point_index[key] = idx
                    coords.append(
                        [node_values[n][key[n]] for n in range(dim)]
                    )
                flat[row] = idx
            terms.append(
                TermGeometry(
                    j=j,
                    c=coeffs[j],
                    node_ids=tuple(np.asarray(i) for i in ids_per_dim),
                    flat_point_ids=flat,
                )
            )
        points = np.asarray(coords, dtype=float).reshape(len(coords), dim)
        return cls(
            space=space,
            knots=knots,
            index_set=index_set,
            coeffs=coeffs,
            node_values=node_values,
            node_weights=node_weights,
            terms=terms,
            points=points,
        )

    @property
    def n_points(self) -> int:
        return len(self.points)

    def _barycentric(self, n: int, term: TermGeometry):
        key = (n, term.j[n])
        cached = self._bary.get(key)
        if cached is None:
            x = self.node_values[n][term.node_ids[n]]
            if len(x) == 1:
                bw = np.ones(1)
            else:
                diff = x[:, None] - x[None, :]
                np.fill_diagonal(diff, 1.0)
                bw = 1.0 / diff.prod(axis=1)
                bw = bw / np.max(np.abs(bw))
            cached = (x, bw)
            self._bary[key] = cached
        return cached

    def basis_matrix(self, n: int, term: TermGeometry,
                     queries: np.ndarray) -> np.ndarray:
        """Lagrange basis values at query coordinates, shape (P, m)."""
        x, bw = self._barycentric(n, term)
        if len(x) == 1:
            return np.ones((len(queries), 1))
        a, b = self.space.lows[n], self.space.highs[n]
        tiny = NEAR_NODE_REL_TOL * (b - a)
        diff = queries[:, None] - x[None, :]
        near = np.abs(diff) < tiny
        safe = np.where(near, 1.0, diff)
        ratio = bw[None, :] / safe
        basis = ratio / ratio.sum(axis=1, keepdims=True)
        hit = near.any(axis=1)
        if np.any(hit):
            basis[hit] = near[hit].astype(float)
        return basis

    def check_domain(self, pts: np.ndarray) -> None:
        lo = np.asarray(self.space.lows)
        hi = np.asarray(self.space.highs)
        pad = 1e-12 * (hi - lo)
        bad = (pts < lo - pad) | (pts > hi + pad)
        if np.any(bad):
            k = int(np.flatnonzero(bad.any(axis=1))[0])
            raise OutOfDomainError(
                f"point {pts[k].tolist()} outside the parameter rectangle "
                f"{list(zip(lo.tolist(), hi.tolist()))}"
            )


def collocation_points(space: ParameterSpace, index_set: MultiIndexSet,
                       knots: KnotFamily) -> np.ndarray:
    """Distinct collocation points of the design (evaluation order)."""
    return GridDesign.build(space, index_set, knots).points


@dataclass
class SparseGridSurrogate:
    """A built surrogate: design geometry plus stored model outputs."""

    design: GridDesign
    values: np.ndarray  # (n_points, n_outputs)
    n_evaluations: int
    output_names: tuple | None = None

    @property
    def n_outputs(self) -> int:
        return self.values.shape[1]

    @property
    def points(self) -> np.ndarray:
        return self.design.points

    def evaluate(self, p) -> np.ndarray:
        return self.evaluate_batch(np.asarray(p, dtype=float)[None, :])[0]

    def evaluate_batch(self, pts: np.ndarray) -> np.ndarray:
        """Combination-technique evaluation at pts, shape (P, n_outputs)."""
        pts = np.asarray(pts, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.design.space.dim:
            raise ValueError(f"expected (P, {self.design.space.dim}) points")
        self.design.check_domain(pts)
        out = np.zeros((len(pts), self.n_outputs))
        for term in self.design.terms:
            shape = tuple(len(ids) for ids in term.node_ids)
            tensor = self.values[term.flat_point_ids].reshape(
                shape + (self.n_outputs,)
            )
            acc = np.tensordot(
                self.design.basis_matrix(0, term, pts[:, 0]), tensor, (1, 0)
            )
            for n in range(1, self.design.space.dim):
                basis = self.design.basis_matrix(n, term, pts[:, n])
                acc = np.einsum("pa,pa...->p...", basis, acc)
            out += term.c * acc
        return out

    def point_weights(self) -> np.ndarray:
        """Combined quadrature weight of every stored collocation point."""
        w = np.zeros(self.design.n_points)
        for term in self.design.terms:
            parts = [
                self.design.node_weights[(n, term.j[n])]
                for n in range(self.design.space.dim)
            ]
            tw = parts[0]
            for p in parts[1:]:
                tw = np.multiply.outer(tw, p)
            np.add.at(w, term.flat_point_ids, term.c * tw.ravel())
        return w

    def quadrature(self):
        """(mean, variance) of every output under the uniform density.

        The mean is the sparse quadrature sum(f(p_j) * weight_j); the
        variance comes from the orthonormal-polynomial expansion of the
        surrogate (exact Gauss projections at matching order), i.e.
        E[S^2] - E[S]^2 evaluated exactly.
        """
        from .sobol import pce_coefficients

        mean = self.values.T @ self.point_weights()
        coeffs = pce_coefficients(self)
        var = np.zeros(self.n_outputs)
        for q, a in coeffs.items():
            if any(q):
                var += a**2
        return mean, var

    def mean(self) -> np.ndarray:
        return self.quadrature()[0]

    # --- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        d = self.design
        return {
            "format": SERIAL_FORMAT,
            "version": SERIAL_VERSION,
            "space": {
                "names": list(d.space.names),
                "lows": list(d.space.lows),
                "highs": list(d.space.highs),
            },
            "knots": {"kind": d.knots.kind, "rule": d.knots.rule},
            "indices": [list(j) for j in d.index_set.indices],
            "n_evaluations": self.n_evaluations,
            "output_names": list(self.output_names) if self.output_names else None,
            "points": self.points.tolist(),
            "values": self.values.tolist(),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()))

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SparseGridSurrogate":
        if doc.get("format") != SERIAL_FORMAT:
            raise ValueError("not a serialized sparse-grid surrogate")
        if doc.get("version") != SERIAL_VERSION:
            raise ValueError(f"unsupported version {doc.get('version')}")
        space = ParameterSpace(
            names=tuple(doc["space"]["names"]),
            lows=tuple(doc["space"]["lows"]),
            highs=tuple(doc["space"]["highs"]),
        )
        knots = KnotFamily(**doc["knots"])
        index_set = make_index_set_explicit(doc["indices"])
        design = GridDesign.build(space, index_set, knots)
        points = np.asarray(doc["points"], dtype=float)
        if points.shape != design.points.shape or not np.allclose(
            points, design.points, rtol=0, atol=1e-9
        ):
            raise ValueError("stored points disagree with the rebuilt design")
        values = np.asarray(doc["values"], dtype=float)
        names = doc.get("output_names")
        return cls(
            design=design,
            values=values,
            n_evaluations=int(doc["n_evaluations"]),
            output_names=tuple(names) if names else None,
        )

    @classmethod
    def load(cls, path) -> "SparseGridSurrogate":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def build_surrogate(evaluator, space: ParameterSpace,
                    index_set: MultiIndexSet, knots: KnotFamily,
                    output_names=None) -> SparseGridSurrogate:
    """Evaluate ``evaluator`` once per distinct collocation point.

    ``evaluator(p)`` returns a scalar or a 1d output vector.  Failures
    propagate with the offending point attached.
    """
    design = GridDesign.build(space, index_set, knots)
    rows = []
    for p in design.points:
        try:
            out = np.atleast_1d(np.asarray(evaluator(p), dtype=float))
        except Exception as exc:
            raise RuntimeError(
                f"evaluator failed at collocation point {p.tolist()}: {exc}"
            ) from exc
        rows.append(out)
    values = np.asarray(rows, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    return SparseGridSurrogate(
        design=design,
        values=values,
        n_evaluations=len(design.points),
        output_names=tuple(output_names) if output_names else None,
    )


def surrogate_from_values(design: GridDesign, values: np.ndarray,
                          output_names=None) -> SparseGridSurrogate:
    """Attach externally computed outputs (e.g. cached model runs)."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if len(values) != design.n_points:
        raise ValueError(
            f"got {len(values)} value rows for {design.n_points} points"
        )
    return SparseGridSurrogate(
        design=design,
        values=values,
        n_evaluations=design.n_points,
        output_names=tuple(output_names) if output_names else None,
    )
