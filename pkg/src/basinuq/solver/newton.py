"""Monolithic Newton solve of one implicit time step.

The initial guess is the converged state of the previous step; the
stopping test is on relative grid-node movement,

    max_i |Z_i^(j+1) - Z_i^(j)| / h_i^(j)  <=  tol.

Temperature is solved separately after every Newton update (it feeds
back only through the quartz rate).  A backtracking line search
(halving, at most 8 halvings) engages only when a full step would
increase the residual norm.  Porosity iterates leaving (1e-4, 1-1e-4)
abort the step rather than being clamped.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

from ..errors import NonConvergenceError
from . import assembly
from .thermal import solve_temperature

PHI_GUARD_LO = 1.0e-4
PHI_GUARD_HI = 1.0 - 1.0e-4
MAX_HALVINGS = 8


def _thermal_from_vector(x, n, props, cfg, t_old, dt):
    nodes = np.arange(n + 1)
    z = x[assembly.idx_z(nodes)]
    phi = x[assembly.idx_phi(np.arange(n))]
    u_d = x[assembly.idx_ud(nodes)]
    return solve_temperature(
        h=np.diff(z),
        phi=phi,
        lambda_s=props.lambda_s,
        c_s=props.c_s,
        rho_s=props.rho_s,
        fluid=cfg.fluid,
        u_d=u_d,
        t_old=t_old,
        dt=dt,
        t_top=cfg.t_top,
        g_t=cfg.g_t,
    )


def newton_step(state, props, cfg, kin, dt, fresh_load=0.0):
    """Advance ``state`` in place by one implicit step of size ``dt``.

    Returns the number of Newton iterations used.  Raises
    NonConvergenceError when the iteration budget is exhausted, an
    iterate leaves the porosity guard, or the accepted mesh is invalid.
    """
    n = state.n_cells
    if n == 0:
        state.time += dt
        return 0
    ctx = assembly.make_step_context(state, props, cfg, kin, dt, fresh_load)
    x = assembly.pack_state(state)
    t_field = state.T.copy()
    nodes = np.arange(n + 1)
    z_slots = assembly.idx_z(nodes)
    phi_slots = assembly.idx_phi(np.arange(n))

    try:
        resid = assembly.assemble_residual(x, ctx, t_field)
        norm0 = float(np.linalg.norm(resid))
        iterations = 0
        converged = False
        while iterations < cfg.newton_max_iter:
            iterations += 1
            ab, bands = assembly.assemble_jacobian(x, ctx, t_field)
            delta = solve_banded(bands, ab, -resid, check_finite=False)

            step = 1.0
            x_new = x + delta
            resid_new = assembly.assemble_residual(x_new, ctx, t_field)
            norm_new = float(np.linalg.norm(resid_new))
            halvings = 0
            while norm_new > norm0 and halvings < MAX_HALVINGS:
                step *= 0.5
                halvings += 1
                x_new = x + step * delta
                resid_new = assembly.assemble_residual(x_new, ctx, t_field)
                norm_new = float(np.linalg.norm(resid_new))

            phi_new = x_new[phi_slots]
            if np.any(phi_new <= PHI_GUARD_LO) or np.any(phi_new >= PHI_GUARD_HI):
                raise NonConvergenceError(
                    f"porosity iterate left ({PHI_GUARD_LO}, {PHI_GUARD_HI}) "
                    f"at t={state.time:.6g} s",
                    state=state,
                    residual_norm=norm_new,
                    time=state.time,
                )

            h_prev = np.diff(x[z_slots])
            dz = np.abs(step * delta[z_slots][1:])
            crit = float(np.max(dz / h_prev))

            x = x_new
            resid = resid_new
            norm0 = norm_new
            t_field = _thermal_from_vector(x, n, props, cfg, state.T, dt)
            if crit <= cfg.newton_tol:
                converged = True
                break
        if not converged:
            raise NonConvergenceError(
                f"Newton did not converge in {cfg.newton_max_iter} iterations "
                f"at t={state.time:.6g} s (residual norm {norm0:.3e})",
                state=state,
                residual_norm=norm0,
                time=state.time,
            )
    except FloatingPointError as exc:
        raise NonConvergenceError(
            f"{exc} at t={state.time:.6g} s",
            state=state,
            time=state.time,
        ) from exc

    z = x[z_slots]
    if np.any(np.diff(z) <= 0.0):
        raise NonConvergenceError(
            f"accepted step produced a non-increasing mesh at t={state.time:.6g} s",
            state=state,
            time=state.time,
        )
    assembly.unpack_into_state(x, state)
    state.T = t_field
    state.time += dt
    state.fresh_load = fresh_load
    return iterations
