"""Variance decomposition of a sparse-grid surrogate.

Every tensor term is projected onto orthonormal (shifted) Legendre
polynomials by Gauss quadrature that is exact at the term's degree; the
combination coefficients then assemble one polynomial-chaos coefficient
table for the whole surrogate.  First-order and total Sobol indices
follow from squared coefficients grouped by support.  A Saltelli/Jansen
Monte Carlo estimator is included as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import eval_legendre

from .knots import GAUSS_LEGENDRE, _gauss_legendre_unit

VARIANCE_FLOOR = 1e-20  # relative: below this the decomposition is undefined


def orthonormal_legendre(q_max: int, x: np.ndarray, a: float, b: float):
    """Values of sqrt(2q+1) P_q mapped to [a, b]; shape (len(x), q_max+1).

    Orthonormal with respect to the uniform probability density on [a, b].
    """
    u = 2.0 * (np.asarray(x, dtype=float) - a) / (b - a) - 1.0
    qs = np.arange(q_max + 1)
    return np.sqrt(2.0 * qs + 1.0)[None, :] * eval_legendre(qs[None, :], u[:, None])


def _projection_matrix(design, n: int, term) -> np.ndarray:
    """C with C[q, i]: nodal value at node i -> Legendre coefficient q."""
    a, b = design.space.lows[n], design.space.highs[n]
    x = design.node_values[n][term.node_ids[n]]
    m = len(x)
    if design.knots.kind == GAUSS_LEGENDRE:
        w = design.node_weights[(n, term.j[n])]
        phi = orthonormal_legendre(m - 1, x, a, b)
        return phi.T * w[None, :]
    # non-Gauss knots: project through an m-point Gauss rule (exact for
    # the degree 2(m-1) integrand) with barycentric evaluation of the
    # nodal basis at the Gauss points
    y_unit, w = _gauss_legendre_unit(m)
    y = 0.5 * (a + b) + 0.5 * (b - a) * y_unit
    basis = design.basis_matrix(n, term, y)  # (m_gauss, m_nodes)
    phi = orthonormal_legendre(m - 1, y, a, b)
    return phi.T @ (basis * w[:, None])


def pce_coefficients(surrogate) -> dict:
    """Polynomial-chaos table: degree tuple -> coefficient vector (n_out,)."""
    design = surrogate.design
    dim = design.space.dim
    out: dict = {}
    for term in design.terms:
        shape = tuple(len(ids) for ids in term.node_ids)
        tensor = surrogate.values[term.flat_point_ids].reshape(
            shape + (surrogate.n_outputs,)
        )
        for n in range(dim):
            c = _projection_matrix(design, n, term)
            tensor = np.moveaxis(np.tensordot(c, tensor, (1, n)), 0, n)
        for q in np.ndindex(*shape):
            coeff = out.get(q)
            contrib = term.c * tensor[q]
            if coeff is None:
                out[q] = contrib.copy()
            else:
                coeff += contrib
    return out


@dataclass(frozen=True)
class SobolReport:
    """First-order and total indices per parameter and output."""

    parameter_names: tuple
    output_names: tuple | None
    mean: np.ndarray  # (n_out,)
    variance: np.ndarray  # (n_out,)
    first_order: np.ndarray  # (n_params, n_out)
    total: np.ndarray  # (n_params, n_out)
    defined: np.ndarray  # (n_out,) bool; False where variance ~ 0

    def first(self, param: str, output: int = 0) -> float:
        return float(self.first_order[self.parameter_names.index(param), output])

    def total_index(self, param: str, output: int = 0) -> float:
        return float(self.total[self.parameter_names.index(param), output])


def sobol_indices(surrogate) -> SobolReport:
    """Variance-based sensitivities of every output of the surrogate.

    Outputs whose variance is (relatively) zero are flagged undefined and
    carry zero indices instead of NaNs.
    """
    design = surrogate.design
    dim = design.space.dim
    coeffs = pce_coefficients(surrogate)
    n_out = surrogate.n_outputs

    mean = np.zeros(n_out)
    variance = np.zeros(n_out)
    first = np.zeros((dim, n_out))
    total = np.zeros((dim, n_out))
    for q, a in coeffs.items():
        a2 = a**2
        if not any(q):
            mean += a
            continue
        variance += a2
        support = [n for n in range(dim) if q[n] > 0]
        for n in support:
            total[n] += a2
        if len(support) == 1:
            first[support[0]] += a2

    scale = np.maximum(mean**2, 1.0)
    defined = variance > VARIANCE_FLOOR * scale
    safe_var = np.where(defined, variance, 1.0)
    first = np.where(defined[None, :], first / safe_var, 0.0)
    total = np.where(defined[None, :], total / safe_var, 0.0)
    return SobolReport(
        parameter_names=tuple(design.space.names),
        output_names=surrogate.output_names,
        mean=mean,
        variance=np.where(defined, variance, 0.0),
        first_order=first,
        total=total,
        defined=defined,
    )


def saltelli_indices(f_batch, space, n_samples: int,
                     rng: np.random.Generator):
    """Monte Carlo first-order/total indices (Saltelli + Jansen estimators).

    ``f_batch`` maps an (n, dim) array to (n,) outputs.  Used as an
    independent oracle against the polynomial-chaos route.
    """
    dim = space.dim
    a = space.sample(rng, n_samples)
    b = space.sample(rng, n_samples)
    fa = np.asarray(f_batch(a), dtype=float)
    fb = np.asarray(f_batch(b), dtype=float)
    var = np.var(np.concatenate([fa, fb]), ddof=1)
    first = np.empty(dim)
    total = np.empty(dim)
    for k in range(dim):
        abk = a.copy()
        abk[:, k] = b[:, k]
        fabk = np.asarray(f_batch(abk), dtype=float)
        first[k] = np.mean(fb * (fabk - fa)) / var
        total[k] = 0.5 * np.mean((fa - fabk) ** 2) / var
    return first, total
