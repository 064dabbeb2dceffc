"""Residual and analytic Jacobian of the fully coupled compaction system.

One time step advances the unknown vector

    X = [Z, u_s, phi_Q, phi_M, phi, S, P, u_D]

with implicit Euler.  The blocks are:

  * node kinematics          dZ/dt = u_s, basement pinned (Z_0, u_s0 = 0)
  * solid mass (Lagrangian)  d[(1-phi) rho_s h]/dt = rho_Q dphi_Q/dt h
  * fluid mass (Lagrangian)  d[phi h]/dt = -(u_D_top - u_D_bot)
  * Darcy closure            u_D = -(K/mu)(dP/dz + rho_l g), u_D(bottom)=0,
                             P = rho_sea g h_sea at the column top
  * mechanical compaction    exact increment of the compaction law,
                             phi_M - phi_M_old
                               = (phi0-phi_f)(e^{-beta sig} - e^{-beta sig_old})
  * quartz precipitation     phi_Q - phi_Q_old = dt A (M_Q/rho_Q) a_q 10^{b_q T_C°}
  * porosity consistency     dphi = dphi_M - dphi_Q
  * load recurrence          S_i = S_{i+1} + g(rho_b_i h_i + rho_b_{i+1} h_{i+1})/2,
                             topped by water column + fresh-sediment surcharge

The mechanical law integrates exactly (it is a total differential), so
the increment form keeps the scheme on the closed-form compaction curve
for any step size while leaving the Newton linearisation unchanged.

Unknown ordering interleaves nodes and cells,

    [Z_i, u_s_i, u_D_i | phi_Q_i, phi_M_i, phi_i, S_i, P_i | Z_{i+1}, ...]

which keeps every coupling within 10 sub/super-diagonals; the Jacobian
is assembled directly in LAPACK banded storage.  Rows are scaled by
fixed characteristic magnitudes so the linear solves are well
conditioned; scaling rows of F and J identically leaves Newton steps
unchanged.

Temperature enters only through the quartz rate and is held fixed
within an iteration (it is solved separately after each Newton update).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..units import CELSIUS_OFFSET

LN10 = np.log(10.0)

# offsets within one node/cell super-block of width 8
_Z, _US, _UD = 0, 1, 2
_PQ, _PM, _PHI, _S, _P = 3, 4, 5, 6, 7

BANDWIDTH = 10  # both lower and upper


def n_dof(n_cells: int) -> int:
    return 8 * n_cells + 3


def idx_z(i):
    return 8 * np.asarray(i)


def idx_us(i):
    return 8 * np.asarray(i) + _US


def idx_ud(i):
    return 8 * np.asarray(i) + _UD


def idx_phiq(c):
    return 8 * np.asarray(c) + _PQ


def idx_phim(c):
    return 8 * np.asarray(c) + _PM


def idx_phi(c):
    return 8 * np.asarray(c) + _PHI


def idx_s(c):
    return 8 * np.asarray(c) + _S


def idx_p(c):
    return 8 * np.asarray(c) + _P


def describe_dof(k: int) -> str:
    """Human-readable name of unknown/equation slot k (for diagnostics)."""
    block, off = divmod(k, 8)
    node_names = {_Z: "Z", _US: "u_s", _UD: "u_D"}
    cell_names = {_PQ: "phi_Q", _PM: "phi_M", _PHI: "phi", _S: "S", _P: "P"}
    if off in node_names:
        return f"{node_names[off]}[node {block}]"
    return f"{cell_names[off]}[cell {block}]"


@dataclass(frozen=True)
class CellProps:
    """Per-cell material constants gathered from the material table."""

    rho_s: np.ndarray
    c_s: np.ndarray
    lambda_s: np.ndarray
    phi0: np.ndarray
    phi_f: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    beta: np.ndarray
    quartz_active: np.ndarray

    @classmethod
    def gather(cls, table, mat_id: np.ndarray) -> "CellProps":
        return cls(
            rho_s=table.rho_s[mat_id],
            c_s=table.c_s[mat_id],
            lambda_s=table.lambda_s[mat_id],
            phi0=table.phi0[mat_id],
            phi_f=table.phi_f[mat_id],
            k1=table.k1[mat_id],
            k2=table.k2[mat_id],
            beta=table.beta[mat_id],
            quartz_active=table.quartz_active[mat_id],
        )


@dataclass
class StepContext:
    """Everything frozen during one implicit step of size dt."""

    dt: float
    props: CellProps
    rho_l: float
    mu_l: float
    gravity: float
    p_top: float  # Dirichlet pore pressure at the column top [Pa]
    fresh_load: float  # surcharge from not-yet-meshed sediment [Pa]
    rho_q: float  # quartz density [kg m^-3]
    # previous-step fields
    h_old: np.ndarray
    phi_old: np.ndarray
    phi_m_old: np.ndarray
    phi_q_old: np.ndarray
    z_old: np.ndarray
    exp_sig_old: np.ndarray  # exp(-beta * sigma_c_old)
    # quartz kinetics (coefficient of phi in the rate, per cell, >=0)
    quartz_coeff_base: np.ndarray  # act * a0/phi_act * (M_Q/rho_Q) * a_q
    b_q: float
    t_c: float
    # row scales
    scale_z: float
    scale_u: float
    scale_p: float
    scale_mass: float
    scale_fluid: float


def make_step_context(state, props: CellProps, cfg, kin, dt: float,
                      fresh_load: float) -> StepContext:
    sigma_old = state.S - state.P
    exp_sig_old = np.exp(-props.beta * sigma_old)
    coeff = np.zeros(state.n_cells)
    usable = state.activated & props.quartz_active & (state.phi_act > 0.0)
    if np.any(usable):
        coeff[usable] = (
            state.a0[usable]
            / state.phi_act[usable]
            * (kin.m_q / kin.rho_q)
            * kin.a_q
        )
    h_ref = cfg.cell_size
    return StepContext(
        dt=dt,
        props=props,
        rho_l=cfg.fluid.rho_l,
        mu_l=cfg.fluid.mu_l,
        gravity=cfg.gravity,
        p_top=cfg.fluid.rho_sea * cfg.gravity * cfg.h_sea,
        fresh_load=fresh_load,
        rho_q=kin.rho_q,
        h_old=state.h.copy(),
        phi_old=state.phi.copy(),
        phi_m_old=state.phi_M.copy(),
        phi_q_old=state.phi_Q.copy(),
        z_old=state.Z.copy(),
        exp_sig_old=exp_sig_old,
        quartz_coeff_base=coeff,
        b_q=kin.b_q,
        t_c=kin.t_c,
        scale_z=h_ref,
        scale_u=h_ref / dt,
        scale_p=1.0e6,
        scale_mass=2600.0 * h_ref,
        scale_fluid=h_ref,
    )


from functools import lru_cache


@lru_cache(maxsize=None)
def layout(n: int):
    """Precomputed index arrays for a mesh with n cells."""
    nodes = np.arange(n + 1)
    cells = np.arange(n)
    return {
        "nodes": nodes,
        "cells": cells,
        "z": idx_z(nodes),
        "us": idx_us(nodes),
        "ud": idx_ud(nodes),
        "pq": idx_phiq(cells),
        "pm": idx_phim(cells),
        "phi": idx_phi(cells),
        "s": idx_s(cells),
        "p": idx_p(cells),
    }


def _unpack(x: np.ndarray, n: int):
    lay = layout(n)
    return (
        x[lay["z"]],
        x[lay["us"]],
        x[lay["ud"]],
        x[lay["pq"]],
        x[lay["pm"]],
        x[lay["phi"]],
        x[lay["s"]],
        x[lay["p"]],
    )


def pack_state(state) -> np.ndarray:
    n = state.n_cells
    lay = layout(n)
    x = np.empty(n_dof(n))
    x[lay["z"]] = state.Z
    x[lay["us"]] = state.u_s
    x[lay["ud"]] = state.u_D
    x[lay["pq"]] = state.phi_Q
    x[lay["pm"]] = state.phi_M
    x[lay["phi"]] = state.phi
    x[lay["s"]] = state.S
    x[lay["p"]] = state.P
    return x


def unpack_into_state(x: np.ndarray, state) -> None:
    lay = layout(state.n_cells)
    state.Z = x[lay["z"]].copy()
    state.u_s = x[lay["us"]].copy()
    state.u_D = x[lay["ud"]].copy()
    state.phi_Q = x[lay["pq"]].copy()
    state.phi_M = x[lay["pm"]].copy()
    state.phi = x[lay["phi"]].copy()
    state.S = x[lay["s"]].copy()
    state.P = x[lay["p"]].copy()


def _quartz_coeff(ctx: StepContext, temperature: np.ndarray) -> np.ndarray:
    """Coefficient kappa so that dphi_Q/dt = kappa * phi (>=0)."""
    gate = temperature >= ctx.t_c
    t_cel = temperature - CELSIUS_OFFSET
    return np.where(
        gate, ctx.quartz_coeff_base * 10.0 ** (ctx.b_q * t_cel), 0.0
    )


def assemble_residual(x: np.ndarray, ctx: StepContext,
                      temperature: np.ndarray) -> np.ndarray:
    """Scaled residual vector F(X); raises on non-finite entries."""
    p = ctx.props
    n = len(ctx.phi_old)
    Z, us, ud, pq, pm, phi, S, P = _unpack(x, n)
    h = Z[1:] - Z[:-1]
    dt = ctx.dt
    g = ctx.gravity
    rho_l = ctx.rho_l

    lay = layout(n)
    R = np.empty(n_dof(n))

    # node kinematics & basement anchors
    R[0] = Z[0] / ctx.scale_z
    R[_US] = us[0] / ctx.scale_u
    R[_UD] = ud[0] / ctx.scale_u
    R[lay["z"][1:]] = (Z[1:] - ctx.z_old[1:] - dt * us[1:]) / ctx.scale_z

    # solid mass of cell c, assigned to the u_s row of node c+1
    solid = (
        p.rho_s * ((1.0 - phi) * h - (1.0 - ctx.phi_old) * ctx.h_old)
        - ctx.rho_q * (pq - ctx.phi_q_old) * h
    )
    R[lay["us"][1:]] = solid / ctx.scale_mass

    # Darcy closure at interior nodes and the top node
    K = 10.0 ** (p.k1 * phi - p.k2 - 15.0)
    half_res = 0.5 * ctx.mu_l * h / K  # half-cell viscous resistance
    if n >= 2:
        row = (
            ud[1:n] * (half_res[:-1] + half_res[1:])
            + (P[1:] - P[:-1])
            + rho_l * g * 0.5 * (Z[2:] - Z[:-2])
        )
        R[lay["ud"][1:n]] = row / ctx.scale_p
    top = (
        ud[n] * half_res[n - 1]
        + (ctx.p_top - P[n - 1])
        + rho_l * g * 0.5 * h[n - 1]
    )
    R[lay["ud"][n]] = top / ctx.scale_p

    # quartz update (linear in phi; kappa frozen at current temperature)
    kappa = _quartz_coeff(ctx, temperature)
    R[lay["pq"]] = pq - ctx.phi_q_old - dt * kappa * phi

    # mechanical compaction, exact increment of the compaction curve
    sigma = S - P
    exp_sig = np.exp(-p.beta * sigma)
    R[lay["pm"]] = pm - ctx.phi_m_old - (p.phi0 - p.phi_f) * (
        exp_sig - ctx.exp_sig_old
    )

    # porosity consistency dphi = dphi_M - dphi_Q
    R[lay["phi"]] = (
        (phi - ctx.phi_old) - (pm - ctx.phi_m_old) + (pq - ctx.phi_q_old)
    )

    # load recurrence (midpoint-to-midpoint overburden increments)
    rho_b = phi * rho_l + (1.0 - phi) * p.rho_s
    top_load = ctx.p_top + ctx.fresh_load + g * rho_b[n - 1] * h[n - 1] * 0.5
    if n >= 2:
        R[lay["s"][:-1]] = (
            S[:-1] - S[1:] - g * 0.5 * (rho_b[:-1] * h[:-1] + rho_b[1:] * h[1:])
        ) / ctx.scale_p
    R[lay["s"][n - 1]] = (S[n - 1] - top_load) / ctx.scale_p

    # fluid mass
    R[lay["p"]] = (
        phi * h - ctx.phi_old * ctx.h_old + dt * (ud[1:] - ud[:-1])
    ) / ctx.scale_fluid

    if not np.all(np.isfinite(R)):
        bad = int(np.flatnonzero(~np.isfinite(R))[0])
        raise FloatingPointError(
            f"non-finite residual in equation for {describe_dof(bad)}"
        )
    return R


# Jacobian sparsity pattern per cell count: concatenated flat indices
# into the banded array, in the exact order the value blocks are emitted.
_JAC_PATTERN: dict = {}


def assemble_jacobian(x: np.ndarray, ctx: StepContext,
                      temperature: np.ndarray):
    """Analytic Jacobian in LAPACK banded storage.

    Returns (ab, (l, u)) with ab[u + i - j, j] = dF_i/dx_j.
    """
    p = ctx.props
    n = len(ctx.phi_old)
    Z, us, ud, pq, pm, phi, S, P = _unpack(x, n)
    h = Z[1:] - Z[:-1]
    dt = ctx.dt
    g = ctx.gravity
    rho_l = ctx.rho_l
    rho_q = ctx.rho_q

    ndof = n_dof(n)
    ab = np.zeros((2 * BANDWIDTH + 1, ndof))

    pattern = _JAC_PATTERN.get(n)
    collecting = pattern is None
    rows = [] if collecting else None
    cols = [] if collecting else None
    vals = []

    def add(r, c, v):
        v = np.asarray(v, dtype=float)
        if v.ndim == 0:
            v = np.full(np.size(r), float(v))
        vals.append(v)
        if collecting:
            rows.append(np.atleast_1d(np.asarray(r)))
            cols.append(np.atleast_1d(np.asarray(c)))

    cells = np.arange(n)
    inodes = np.arange(1, n + 1)

    # anchors
    add(idx_z(0), idx_z(0), 1.0 / ctx.scale_z)
    add(idx_us(0), idx_us(0), 1.0 / ctx.scale_u)
    add(idx_ud(0), idx_ud(0), 1.0 / ctx.scale_u)

    # kinematics
    add(idx_z(inodes), idx_z(inodes), 1.0 / ctx.scale_z)
    add(idx_z(inodes), idx_us(inodes), -dt / ctx.scale_z)

    # solid mass (row: u_s of node c+1)
    sm_rows = idx_us(cells + 1)
    coeff_h = p.rho_s * (1.0 - phi) - rho_q * (pq - ctx.phi_q_old)
    add(sm_rows, idx_phi(cells), -p.rho_s * h / ctx.scale_mass)
    add(sm_rows, idx_phiq(cells), -rho_q * h / ctx.scale_mass)
    add(sm_rows, idx_z(cells + 1), coeff_h / ctx.scale_mass)
    add(sm_rows, idx_z(cells), -coeff_h / ctx.scale_mass)

    # Darcy interior
    K = 10.0 ** (p.k1 * phi - p.k2 - 15.0)
    half_res = 0.5 * ctx.mu_l * h / K
    dres_dphi = -half_res * p.k1 * LN10  # d(half_res)/dphi
    dres_dh = 0.5 * ctx.mu_l / K  # d(half_res)/dh
    sp = ctx.scale_p
    if n >= 2:
        mid = np.arange(1, n)
        r = idx_ud(mid)
        lo = mid - 1  # lower cell
        hi = mid  # upper cell
        add(r, idx_ud(mid), (half_res[lo] + half_res[hi]) / sp)
        add(r, idx_p(hi), 1.0 / sp)
        add(r, idx_p(lo), -1.0 / sp)
        add(r, idx_phi(lo), ud[mid] * dres_dphi[lo] / sp)
        add(r, idx_phi(hi), ud[mid] * dres_dphi[hi] / sp)
        add(r, idx_z(mid - 1), (-ud[mid] * dres_dh[lo] - rho_l * g * 0.5) / sp)
        add(r, idx_z(mid), ud[mid] * (dres_dh[lo] - dres_dh[hi]) / sp)
        add(r, idx_z(mid + 1), (ud[mid] * dres_dh[hi] + rho_l * g * 0.5) / sp)

    # Darcy top
    c = n - 1
    r = idx_ud(n)
    add(r, idx_ud(n), half_res[c] / sp)
    add(r, idx_p(c), -1.0 / sp)
    add(r, idx_phi(c), ud[n] * dres_dphi[c] / sp)
    add(r, idx_z(n), (ud[n] * dres_dh[c] + rho_l * g * 0.5) / sp)
    add(r, idx_z(n - 1), -(ud[n] * dres_dh[c] + rho_l * g * 0.5) / sp)

    # quartz
    kappa = _quartz_coeff(ctx, temperature)
    add(idx_phiq(cells), idx_phiq(cells), 1.0)
    add(idx_phiq(cells), idx_phi(cells), -dt * kappa)

    # mechanical compaction
    sigma = S - P
    dmech = (p.phi0 - p.phi_f) * p.beta * np.exp(-p.beta * sigma)
    add(idx_phim(cells), idx_phim(cells), 1.0)
    add(idx_phim(cells), idx_s(cells), dmech)
    add(idx_phim(cells), idx_p(cells), -dmech)

    # porosity consistency
    add(idx_phi(cells), idx_phi(cells), 1.0)
    add(idx_phi(cells), idx_phim(cells), -1.0)
    add(idx_phi(cells), idx_phiq(cells), 1.0)

    # load recurrence
    rho_b = phi * rho_l + (1.0 - phi) * p.rho_s
    drho_b = rho_l - p.rho_s  # d(rho_b)/dphi
    rtop = idx_s(n - 1)
    add(rtop, idx_s(n - 1), 1.0 / sp)
    add(rtop, idx_phi(n - 1), -g * h[n - 1] * 0.5 * drho_b[n - 1] / sp)
    add(rtop, idx_z(n), -g * rho_b[n - 1] * 0.5 / sp)
    add(rtop, idx_z(n - 1), g * rho_b[n - 1] * 0.5 / sp)
    if n >= 2:
        lower = np.arange(n - 1)
        r = idx_s(lower)
        add(r, idx_s(lower), 1.0 / sp)
        add(r, idx_s(lower + 1), -1.0 / sp)
        add(r, idx_phi(lower), -g * h[:-1] * 0.5 * drho_b[:-1] / sp)
        add(r, idx_phi(lower + 1), -g * h[1:] * 0.5 * drho_b[1:] / sp)
        add(r, idx_z(lower), g * rho_b[:-1] * 0.5 / sp)
        add(r, idx_z(lower + 1), -g * 0.5 * (rho_b[:-1] - rho_b[1:]) / sp)
        add(r, idx_z(lower + 2), -g * rho_b[1:] * 0.5 / sp)

    # fluid mass
    r = idx_p(cells)
    sf = ctx.scale_fluid
    add(r, idx_phi(cells), h / sf)
    add(r, idx_z(cells + 1), phi / sf)
    add(r, idx_z(cells), -phi / sf)
    add(r, idx_ud(cells + 1), dt / sf)
    add(r, idx_ud(cells), -dt / sf)

    vals_arr = np.concatenate(vals)
    if collecting:
        rows_arr = np.concatenate(rows)
        cols_arr = np.concatenate(cols)
        flat = (BANDWIDTH + rows_arr - cols_arr) * ndof + cols_arr
        _JAC_PATTERN[n] = flat
        pattern = flat
    np.add.at(ab.reshape(-1), pattern, vals_arr)
    return ab, (BANDWIDTH, BANDWIDTH)
