"""Two-step surrogate for discontinuous layered outputs.

Fields like porosity jump at material interfaces whose depths move with
the uncertain parameters, so a plain sparse-grid surrogate of the field
at fixed depth converges poorly.  The two-step treatment exploits that
the interface depths themselves depend smoothly on the parameters:

  1. build a sparse-grid surrogate of the interface depths;
  2. align every realization with the piecewise-linear map x = F(z, p)
     that pins interface k to the reference station k/K, and build
     per-station sparse-grid surrogates of the field in the aligned
     coordinate, layer by layer.

Predicting the field at (z*, p*) then chains: predicted interfaces ->
alignment map -> reference coordinate -> station surrogates, with
piecewise-linear interpolation between stations inside a layer.  At a
reference interface the value belongs to the layer below.

Depths are negative (seafloor above basement) and interface arrays are
ordered decreasing: entry 0 is the seafloor, entry K the basement.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfColumnError, UndefinedMetricError
from .sparsegrid import SparseGridSurrogate, sobol_indices

logger = logging.getLogger(__name__)

STATION_EPS = 1e-6


# --- alignment map ---------------------------------------------------------


def map_to_reference(z, interfaces, validate: bool = True):
    """Piecewise-linear reference coordinate of depth z given interfaces.

    Interface k maps to k/K; within a layer the map is affine.  Raises
    OutOfColumnError for depths above the seafloor or below the basement.
    """
    ifc = np.asarray(interfaces, dtype=float)
    if validate and np.any(np.diff(ifc) >= 0):
        raise ValueError("interfaces must be strictly decreasing in depth")
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z_arr > ifc[0]) or np.any(z_arr < ifc[-1]):
        raise OutOfColumnError(
            f"depth outside the column [{ifc[-1]}, {ifc[0]}]",
            top=ifc[0], bottom=ifc[-1],
        )
    big_k = len(ifc) - 1
    # layer index: interfaces at-or-above z, minus one (a depth exactly on
    # an interface belongs to the layer below it)
    k = np.clip(np.sum(z_arr[:, None] <= ifc[None, :], axis=1) - 1, 0, big_k - 1)
    top = ifc[k]
    bot = ifc[k + 1]
    xhat = (k + (z_arr - top) / (bot - top)) / big_k
    return xhat if np.ndim(z) else float(xhat[0])


def map_to_physical(xhat, interfaces):
    """Inverse of map_to_reference (piecewise-linear inversion)."""
    ifc = np.asarray(interfaces, dtype=float)
    x_arr = np.atleast_1d(np.asarray(xhat, dtype=float))
    if np.any(x_arr < -1e-12) or np.any(x_arr > 1.0 + 1e-12):
        raise OutOfColumnError("reference coordinate outside [0, 1]")
    big_k = len(ifc) - 1
    scaled = np.clip(x_arr, 0.0, 1.0) * big_k
    k = np.minimum(scaled.astype(int), big_k - 1)
    frac = scaled - k
    z = ifc[k] + frac * (ifc[k + 1] - ifc[k])
    return z if np.ndim(xhat) else float(z[0])


@dataclass(frozen=True)
class AlignmentMap:
    """One realization of F(., p): knots at (interface_k, k/K)."""

    interfaces: np.ndarray

    def __post_init__(self):
        ifc = np.asarray(self.interfaces, dtype=float)
        if np.any(np.diff(ifc) >= 0):
            raise ValueError("interfaces must be strictly decreasing in depth")

    @property
    def n_layers(self) -> int:
        return len(self.interfaces) - 1

    def to_reference(self, z):
        return map_to_reference(z, self.interfaces, validate=False)

    def to_physical(self, xhat):
        return map_to_physical(xhat, self.interfaces)


# --- surrogates ------------------------------------------------------------


def _sorted_interfaces(values: np.ndarray, counter: dict | None = None):
    """Restore strict ordering of predicted interfaces when interpolation
    overshoot breaks it; violations are counted and logged, never silent."""
    diffs = np.diff(values, axis=-1)
    bad = np.any(diffs >= 0, axis=-1)
    n_bad = int(np.count_nonzero(bad))
    if n_bad:
        if counter is not None:
            counter["ordering_violations"] = (
                counter.get("ordering_violations", 0) + n_bad
            )
        logger.warning(
            "interface surrogate produced %d non-monotone prediction(s); "
            "classified by nearest valid ordering", n_bad,
        )
        fixed = -np.sort(-values, axis=-1)
        values = np.where(bad[..., None], fixed, values)
    return values


@dataclass
class InterfaceSurrogate:
    """Sparse-grid surrogate of the K+1 interface depths."""

    surrogate: SparseGridSurrogate
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_interfaces(self) -> int:
        return self.surrogate.n_outputs

    @property
    def n_layers(self) -> int:
        return self.n_interfaces - 1

    @property
    def n_evaluations(self) -> int:
        return self.surrogate.n_evaluations

    def predict(self, p) -> np.ndarray:
        return self.predict_batch(np.asarray(p, dtype=float)[None, :])[0]

    def predict_batch(self, pts) -> np.ndarray:
        raw = self.surrogate.evaluate_batch(np.asarray(pts, dtype=float))
        return _sorted_interfaces(raw, self.diagnostics)

    def quadrature_mean(self) -> np.ndarray:
        return self.surrogate.mean()

    def sobol(self):
        return sobol_indices(self.surrogate)


def build_interface_surrogate(model, index_set, knots) -> InterfaceSurrogate:
    """Step 1: surrogate of every interface depth over the parameters.

    ``model`` exposes ``space``, ``n_interfaces`` and ``run(p)`` whose
    result carries the realized interfaces; a run with a different
    interface count aborts the build (the procedure assumes the layer
    count does not depend on the parameters).
    """
    from .sparsegrid import GridDesign, surrogate_from_values

    design = GridDesign.build(model.space, index_set, knots)
    rows = np.empty((design.n_points, model.n_interfaces))
    for i, p in enumerate(design.points):
        run = model.run(p)
        ifc = np.asarray(run.interfaces, dtype=float)
        if len(ifc) != model.n_interfaces:
            raise ValueError(
                f"run at {p.tolist()} produced {len(ifc)} interfaces, "
                f"expected {model.n_interfaces}"
            )
        if np.any(np.diff(ifc) >= 0):
            raise ValueError(
                f"run at {p.tolist()} produced non-monotone interfaces"
            )
        rows[i] = ifc
    names = tuple(f"interface_{k}" for k in range(model.n_interfaces))
    sur = surrogate_from_values(design, rows, output_names=names)
    return InterfaceSurrogate(surrogate=sur)


def default_stations(n_layers: int, per_layer: int = 40) -> np.ndarray:
    """Equispaced reference stations inside each layer, interfaces excluded."""
    offsets = (np.arange(per_layer) + 0.5) / per_layer
    return np.concatenate(
        [(k + offsets) / n_layers for k in range(n_layers)]
    )


def resample_profile(z_centers, values, interfaces, stations) -> np.ndarray:
    """Field profile resampled at reference stations via the run's own
    interfaces (piecewise-linear in z on the cell-centred data)."""
    z = map_to_physical(stations, interfaces)
    zc = np.asarray(z_centers, dtype=float)
    vals = np.asarray(values, dtype=float)
    if zc[0] > zc[-1]:  # np.interp wants ascending abscissae
        zc = zc[::-1]
        vals = vals[::-1]
    return np.interp(z, zc, vals)


@dataclass
class AlignedFieldSurrogate:
    """Per-station sparse-grid surrogates of a field in aligned coordinates."""

    field_name: str
    stations: np.ndarray  # ascending, grouped by layer, no interface hits
    n_layers: int
    surrogate: SparseGridSurrogate

    def station_layers(self) -> np.ndarray:
        return np.minimum(
            (self.stations * self.n_layers).astype(int), self.n_layers - 1
        )

    def station_values(self, pts) -> np.ndarray:
        """Surrogate values at every station, shape (P, n_stations)."""
        return self.surrogate.evaluate_batch(np.asarray(pts, dtype=float))

    def interp_at(self, xhat: np.ndarray, station_vals: np.ndarray) -> np.ndarray:
        """Piecewise-linear interpolation between stations inside the
        layer of each query; at an interface the layer below governs."""
        xhat = np.asarray(xhat, dtype=float)
        layer = np.minimum(
            (xhat * self.n_layers).astype(int), self.n_layers - 1
        )
        out = np.empty(xhat.shape)
        st_layer = self.station_layers()
        for ell in np.unique(layer):
            sel = layer == ell
            cols = np.flatnonzero(st_layer == ell)
            xs = self.stations[cols]
            sub = station_vals[..., cols]
            if sub.ndim == 1:
                out[sel] = np.interp(xhat[sel], xs, sub)
            else:
                for i in np.flatnonzero(sel):
                    out[i] = np.interp(xhat[i], xs, sub[i])
        return out


def build_aligned_field_surrogate(model, field_name: str, index_set, knots,
                                  stations=None, per_layer: int = 40
                                  ) -> AlignedFieldSurrogate:
    """Step 2: per-station surrogates of a field in aligned coordinates.

    Each collocation run's profile is mapped onto the stations with that
    run's own exact interfaces before the surpluses are assembled, so
    the interface surrogate and the field surrogate share collocation
    data (one model run per point fills both).
    """
    from .sparsegrid import GridDesign, surrogate_from_values

    n_layers = model.n_interfaces - 1
    if stations is None:
        stations = default_stations(n_layers, per_layer)
    else:
        stations = np.sort(np.asarray(stations, dtype=float).ravel())
        on_interface = np.isclose(
            stations * n_layers, np.round(stations * n_layers), atol=1e-12
        )
        if np.any(on_interface):
            logger.warning(
                "%d station(s) coincide with a reference interface; "
                "perturbed inward by %g (the field is double-valued there)",
                int(np.count_nonzero(on_interface)), STATION_EPS,
            )
            shift = np.where(stations < 1.0, STATION_EPS, -STATION_EPS)
            stations = np.where(on_interface, stations + shift, stations)

    design = GridDesign.build(model.space, index_set, knots)
    rows = np.empty((design.n_points, len(stations)))
    for i, p in enumerate(design.points):
        run = model.run(p)
        rows[i] = resample_profile(
            run.z_centers, run.fields[field_name], run.interfaces, stations
        )
    sur = surrogate_from_values(design, rows)
    return AlignedFieldSurrogate(
        field_name=field_name,
        stations=stations,
        n_layers=n_layers,
        surrogate=sur,
    )


# --- prediction and post-processing ---------------------------------------


def predict_field(z, p, interface_surr: InterfaceSurrogate,
                  field_surr: AlignedFieldSurrogate):
    """Two-step prediction of the field at depth z for parameters p.

    Chains: surrogate interfaces at p -> alignment map -> reference
    coordinate of z -> station surrogates, linear between stations.
    """
    p = np.asarray(p, dtype=float)
    ifc = interface_surr.predict(p)
    xhat = map_to_reference(z, ifc, validate=False)
    vals = field_surr.station_values(p[None, :])[0]
    out = field_surr.interp_at(np.atleast_1d(xhat), vals)
    return out if np.ndim(z) else float(out[0])


def predict_field_batch(z_values, pts, interface_surr: InterfaceSurrogate,
                        field_surr: AlignedFieldSurrogate) -> np.ndarray:
    """Vectorised two-step prediction: (n_depths, n_samples) array."""
    pts = np.asarray(pts, dtype=float)
    z_values = np.atleast_1d(np.asarray(z_values, dtype=float))
    ifc = interface_surr.predict_batch(pts)  # (P, K+1)
    station_vals = field_surr.station_values(pts)  # (P, S)
    big_k = interface_surr.n_layers
    out = np.empty((len(z_values), len(pts)))
    st_layer = field_surr.station_layers()
    layer_cols = [np.flatnonzero(st_layer == ell) for ell in range(big_k)]
    for zi, z in enumerate(z_values):
        above = z > ifc[:, 0]
        below = z < ifc[:, -1]
        if np.any(above) or np.any(below):
            raise OutOfColumnError(
                f"depth {z} outside the predicted column for "
                f"{int(np.count_nonzero(above | below))} sample(s)",
                top=float(np.min(ifc[:, 0])), bottom=float(np.max(ifc[:, -1])),
            )
        k = np.clip(np.sum(z <= ifc, axis=1) - 1, 0, big_k - 1)
        rows = np.arange(len(pts))
        top = ifc[rows, k]
        bot = ifc[rows, k + 1]
        xhat = (k + (z - top) / (bot - top)) / big_k
        layer = np.minimum((xhat * big_k).astype(int), big_k - 1)
        vals = np.empty(len(pts))
        for ell in np.unique(layer):
            sel = np.flatnonzero(layer == ell)
            cols = layer_cols[ell]
            xs = field_surr.stations[cols]
            u = np.clip(
                np.searchsorted(xs, xhat[sel]) - 1, 0, len(xs) - 2
            )
            x0 = xs[u]
            x1 = xs[u + 1]
            t = np.clip((xhat[sel] - x0) / (x1 - x0), 0.0, 1.0)
            sub = station_vals[sel]
            idx = np.arange(len(sel))
            vals[sel] = (1 - t) * sub[idx, cols[u]] + t * sub[idx, cols[u + 1]]
        out[zi] = vals
    return out


def classify_material(z, p, interface_surr: InterfaceSurrogate) -> int:
    """Layer index k (0 = top layer) with interface_k >= z > interface_{k+1}."""
    ifc = interface_surr.predict(np.asarray(p, dtype=float))
    return int(_classify_against(np.atleast_1d(float(z)), ifc[None, :])[0, 0])


def _classify_against(z_values: np.ndarray, ifc: np.ndarray) -> np.ndarray:
    """Layer indices, shape (n_depths, n_samples); raises when a depth
    leaves any sample's column."""
    big_k = ifc.shape[1] - 1
    out = np.empty((len(z_values), len(ifc)), dtype=int)
    for zi, z in enumerate(z_values):
        if np.any(z > ifc[:, 0]) or np.any(z < ifc[:, -1]):
            raise OutOfColumnError(
                f"depth {z} outside the column for some sample(s)",
                top=float(np.min(ifc[:, 0])),
                bottom=float(np.max(ifc[:, -1])),
            )
        out[zi] = np.clip(np.sum(z <= ifc, axis=1) - 1, 0, big_k - 1)
    return out


def classify_batch(z_values, pts, interface_surr: InterfaceSurrogate) -> np.ndarray:
    """Layer indices for a depth grid and a sample block."""
    ifc = interface_surr.predict_batch(np.asarray(pts, dtype=float))
    return _classify_against(
        np.atleast_1d(np.asarray(z_values, dtype=float)), ifc
    )


def material_frequency_profile(depth_grid, interface_surr: InterfaceSurrogate,
                               samples) -> np.ndarray:
    """Relative frequency of each layer at each depth over the sample.

    Returns (n_depths, n_layers); rows sum to one exactly.
    """
    layers = classify_batch(depth_grid, samples_pts(samples), interface_surr)
    n_layers = interface_surr.n_layers
    n = layers.shape[1]
    freq = np.empty((layers.shape[0], n_layers))
    for ell in range(n_layers):
        freq[:, ell] = np.count_nonzero(layers == ell, axis=1)
    return freq / n


def samples_pts(samples) -> np.ndarray:
    pts = np.asarray(samples, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    return pts


def error_metrics(interface_surr: InterfaceSurrogate, sample_pts,
                  full_model_values, mu_ref) -> dict:
    """Convergence metrics of the interface surrogate.

    E_mean_k = |Q(interface_k) - mu_ref_k| / |mu_ref_k| compares the
    sparse quadrature mean against a reference mean; E_max_k is the
    worst relative prediction error over the supplied sample of full
    model values (shape (n, K+1)).
    """
    mu_ref = np.asarray(mu_ref, dtype=float)
    if np.any(mu_ref == 0.0):
        raise UndefinedMetricError("reference mean contains zeros")
    q = interface_surr.quadrature_mean()
    e_mean = np.abs(q - mu_ref) / np.abs(mu_ref)
    fm = np.asarray(full_model_values, dtype=float)
    if np.any(fm == 0.0):
        raise UndefinedMetricError("full-model interface value is zero")
    pred = interface_surr.predict_batch(np.asarray(sample_pts, dtype=float))
    e_max = np.max(np.abs((pred - fm) / fm), axis=0)
    return {"e_mean": e_mean, "e_max": e_max}
