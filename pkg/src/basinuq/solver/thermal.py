"""Decoupled temperature solve on the current mesh.

Heat balance with advection by the Darcy flux, implicit Euler in time,
piecewise-constant temperature per cell and nodal heat fluxes.  The
advection term is upwinded.  Boundary conditions: Dirichlet T_top at the
column top, prescribed geothermal gradient G_T at the basement (heat
flux K_T(phi_bot) * G_T entering from below).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded


def thermal_conductances(h: np.ndarray, k_cell: np.ndarray):
    """Two-point conductances at interior nodes (series half-cells)."""
    if len(h) < 2:
        return np.zeros(0)
    return 1.0 / (0.5 * h[:-1] / k_cell[:-1] + 0.5 * h[1:] / k_cell[1:])


def solve_temperature(
    h: np.ndarray,
    phi: np.ndarray,
    lambda_s: np.ndarray,
    c_s: np.ndarray,
    rho_s: np.ndarray,
    fluid,
    u_d: np.ndarray,
    t_old: np.ndarray,
    dt: float,
    t_top: float,
    g_t: float,
    steady: bool = False,
) -> np.ndarray:
    """Return the new cellwise temperature field.

    ``steady=True`` drops the storage term (used to initialise columns).
    """
    n = len(h)
    if n == 0:
        return np.zeros(0)

    k_cell = fluid.lambda_l**phi * lambda_s ** (1.0 - phi)
    c_cell = phi * fluid.rho_l * fluid.c_l + (1.0 - phi) * rho_s * c_s

    lower = np.zeros(n)  # coupling to cell i-1
    diag = np.zeros(n)
    upper = np.zeros(n)  # coupling to cell i+1
    rhs = np.zeros(n)

    if not steady:
        diag += c_cell * h / dt
        rhs += c_cell * h / dt * t_old

    # diffusion
    cond = thermal_conductances(h, k_cell)
    if n >= 2:
        # node i couples cells i-1 and i, flux up F_i = cond (T_{i-1} - T_i)
        diag[:-1] += cond
        upper[:-1] -= cond
        diag[1:] += cond
        lower[1:] -= cond
    # top Dirichlet through a half cell
    cond_top = k_cell[-1] / (0.5 * h[-1])
    diag[-1] += cond_top
    rhs[-1] += cond_top * t_top
    # basement Neumann: prescribed upward flux K_T(phi_bot) * G_T
    rhs[0] += k_cell[0] * g_t

    # advection rho_l c_l u_D dT/dz, upwinded on the nodal Darcy flux;
    # cell balance: F_a[i+1] - F_a[i] - T_i (a u[i+1] - a u[i]) with
    # F_a[f] = a u[f] T_upwind(f)
    if not steady:
        au = fluid.rho_l * fluid.c_l * u_d
        up_hi = au[1:] > 0.0  # upper face of each cell, flow upward?
        diag += np.where(up_hi, au[1:], 0.0)
        inflow_hi = ~up_hi
        if n >= 2:
            upper[:-1] += np.where(inflow_hi[:-1], au[1 : n], 0.0)
        if inflow_hi[-1]:
            rhs[-1] -= au[n] * t_top  # inflow from the sea
        up_lo = au[:n] > 0.0  # lower face (u_d[0]=0 by BC)
        if n >= 2:
            lower[1:] -= np.where(up_lo[1:], au[1:n], 0.0)
        diag -= np.where(up_lo, 0.0, au[:n])
        diag -= au[1:] - au[:n]

    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs)
