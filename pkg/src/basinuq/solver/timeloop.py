"""Time evolution through the depositional history.

Each deposition event runs with step size dt = h / (alpha * U_sed) so
that fresh sediment accumulates into exactly one new cell every alpha
steps.  Between insertions the not-yet-meshed sediment acts as a load
surcharge on the column top that ramps linearly in time.  An optional
quiescent phase (no deposition) lets a pre-existing column compact under
its own weight, which is how the single-layer robustness case runs.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass

import numpy as np

from ..errors import NonConvergenceError, ScenarioError
from ..scenario import ScenarioConfig
from ..units import SECONDS_PER_MA
from .assembly import CellProps
from .newton import newton_step
from .state import BasinState, MaterialTable, SolveReport, empty_state
from .thermal import solve_temperature


@dataclass(frozen=True)
class Phase:
    """One uniform-dt stretch of the run."""

    kind: str  # "deposition" | "quiescent"
    dt: float
    n_steps: int
    material: str | None = None
    layer_id: int = -1
    rate: float = 0.0  # [m/s], deposition only


def deposition_schedule(cfg: ScenarioConfig) -> list:
    """Stepping plan implied by the scenario (pure arithmetic)."""
    phases = []
    layer0 = len(cfg.initial_column)
    for k, ev in enumerate(cfg.deposition):
        n_cells = int(round(ev.thickness / cfg.cell_size))
        dt = cfg.cell_size / (cfg.alpha_steps * ev.rate_m_per_s)
        phases.append(
            Phase(
                kind="deposition",
                dt=dt,
                n_steps=cfg.alpha_steps * n_cells,
                material=ev.material,
                layer_id=layer0 + k,
                rate=ev.rate_m_per_s,
            )
        )
    if cfg.quiescent_duration_s > 0.0:
        phases.append(
            Phase(
                kind="quiescent",
                dt=cfg.quiescent_duration_s / cfg.quiescent_steps,
                n_steps=cfg.quiescent_steps,
            )
        )
    return phases


def total_steps(cfg: ScenarioConfig) -> int:
    return sum(ph.n_steps for ph in deposition_schedule(cfg))


def cells_appended(cfg: ScenarioConfig) -> int:
    return sum(
        ph.n_steps // cfg.alpha_steps
        for ph in deposition_schedule(cfg)
        if ph.kind == "deposition"
    )


def _bulk_density(phi, mat, fluid):
    return phi * fluid.rho_l + (1.0 - phi) * mat.rho_s


def initial_state(cfg: ScenarioConfig, table: MaterialTable | None = None) -> BasinState:
    """Column at t=0.

    With an initial column: uniform depositional porosity and zero
    effective stress, i.e. the pore fluid carries the whole load
    (P = S), plus a steady conduction temperature profile.  Without one:
    an empty mesh that grows once deposition starts.
    """
    if table is None:
        table = MaterialTable.from_config(cfg)
    if not cfg.initial_column:
        return empty_state()

    heights = []
    mat_ids = []
    layer_ids = []
    for k, lay in enumerate(cfg.initial_column):
        n = int(round(lay.thickness / cfg.cell_size))
        heights.extend([cfg.cell_size] * n)
        mat_ids.extend([table.index(lay.material)] * n)
        layer_ids.extend([k] * n)
    n = len(heights)
    h = np.asarray(heights, dtype=float)
    Z = np.concatenate([[0.0], np.cumsum(h)])
    mat_id = np.asarray(mat_ids, dtype=int)
    layer_id = np.asarray(layer_ids, dtype=int)
    phi0 = table.phi0[mat_id]

    g = cfg.gravity
    p_top = cfg.fluid.rho_sea * g * cfg.h_sea
    rho_b = phi0 * cfg.fluid.rho_l + (1.0 - phi0) * table.rho_s[mat_id]
    # load recurrence from the top down; zero effective stress => P = S
    S = np.empty(n)
    S[n - 1] = p_top + g * rho_b[n - 1] * h[n - 1] * 0.5
    for c in range(n - 2, -1, -1):
        S[c] = S[c + 1] + g * 0.5 * (rho_b[c] * h[c] + rho_b[c + 1] * h[c + 1])
    P = S.copy()

    props = CellProps.gather(table, mat_id)
    T = solve_temperature(
        h=h,
        phi=phi0,
        lambda_s=props.lambda_s,
        c_s=props.c_s,
        rho_s=props.rho_s,
        fluid=cfg.fluid,
        u_d=np.zeros(n + 1),
        t_old=np.full(n, cfg.t_top),
        dt=1.0,
        t_top=cfg.t_top,
        g_t=cfg.g_t,
        steady=True,
    )

    return BasinState(
        time=0.0,
        Z=Z,
        u_s=np.zeros(n + 1),
        u_D=np.zeros(n + 1),
        phi_Q=np.zeros(n),
        phi_M=phi0.copy(),
        phi=phi0.copy(),
        S=S,
        P=P,
        T=T,
        mat_id=mat_id,
        layer_id=layer_id,
        activated=np.zeros(n, dtype=bool),
        phi_act=np.zeros(n),
        a0=np.zeros(n),
    )


def insert_cell(state: BasinState, cfg: ScenarioConfig, table: MaterialTable,
                mat_name: str, layer_id: int) -> BasinState:
    """Append one freshly deposited cell at the column top."""
    m = table.index(mat_name)
    phi0 = table.phi0[m]
    h = cfg.cell_size
    g = cfg.gravity
    p_top = cfg.fluid.rho_sea * g * cfg.h_sea
    rho_b = phi0 * cfg.fluid.rho_l + (1.0 - phi0) * table.rho_s[m]

    new = state.copy()
    top = state.Z[-1]
    new.Z = np.append(state.Z, top + h)
    new.u_s = np.append(state.u_s, state.u_s[-1] if len(state.u_s) else 0.0)
    new.u_D = np.append(state.u_D, state.u_D[-1] if len(state.u_D) else 0.0)
    new.phi_Q = np.append(state.phi_Q, 0.0)
    new.phi_M = np.append(state.phi_M, phi0)
    new.phi = np.append(state.phi, phi0)
    new.S = np.append(state.S, p_top + rho_b * g * h * 0.5)
    new.P = np.append(state.P, p_top + cfg.fluid.rho_l * g * h * 0.5)
    new.T = np.append(state.T, cfg.t_top)
    new.mat_id = np.append(state.mat_id, m)
    new.layer_id = np.append(state.layer_id, layer_id)
    new.activated = np.append(state.activated, False)
    new.phi_act = np.append(state.phi_act, 0.0)
    new.a0 = np.append(state.a0, 0.0)
    new.fresh_load = 0.0
    return new


def _update_activation(state: BasinState, props: CellProps, kin) -> None:
    newly = (
        props.quartz_active
        & ~state.activated
        & (state.T >= kin.t_c)
        & (state.phi > 0.0)
    )
    if np.any(newly):
        state.activated = state.activated | newly
        state.phi_act = np.where(newly, state.phi, state.phi_act)
        state.a0 = np.where(newly, kin.a0, state.a0)


def advance_time(cfg: ScenarioConfig, snapshot_times_ma=(),
                 initial: BasinState | None = None) -> SolveReport:
    """Run the whole depositional history and return a SolveReport.

    ``snapshot_times_ma`` requests state copies at the first step whose
    end time reaches each value.  NonConvergence propagates with the
    failing model time attached.
    """
    t0 = _time.perf_counter()
    table = MaterialTable.from_config(cfg)
    state = initial if initial is not None else initial_state(cfg, table)
    report = SolveReport()
    pending = sorted(float(t) * SECONDS_PER_MA for t in snapshot_times_ma)

    props = CellProps.gather(table, state.mat_id) if state.n_cells else None

    for phase in deposition_schedule(cfg):
        for k in range(phase.n_steps):
            if phase.kind == "deposition":
                in_cycle = k % cfg.alpha_steps + 1
                fresh = (
                    _bulk_density(
                        table.phi0[table.index(phase.material)],
                        cfg.materials[phase.material],
                        cfg.fluid,
                    )
                    * cfg.gravity
                    * phase.rate
                    * phase.dt
                    * in_cycle
                )
            else:
                fresh = 0.0

            iters = newton_step(state, props, cfg, cfg.quartz, phase.dt, fresh)
            report.times.append(state.time)
            report.iterations.append(iters)
            report.converged.append(True)
            if state.n_cells:
                _update_activation(state, props, cfg.quartz)

            if phase.kind == "deposition" and (k + 1) % cfg.alpha_steps == 0:
                state = insert_cell(state, cfg, table, phase.material, phase.layer_id)
                props = CellProps.gather(table, state.mat_id)

            while pending and state.time >= pending[0] - 1e-6:
                report.snapshots.append((state.time, state.copy()))
                pending.pop(0)

    report.final_state = state
    report.n_steps = len(report.times)
    report.n_cells_final = state.n_cells
    report.wall_time = _time.perf_counter() - t0
    return report


def hydrostatic_pressure(state: BasinState, cfg: ScenarioConfig) -> np.ndarray:
    """Hydrostatic pore pressure at cell centres (water column included)."""
    depth = state.Z[-1] - state.z_centers  # below the column top
    return cfg.fluid.rho_sea * cfg.gravity * cfg.h_sea + cfg.fluid.rho_l * cfg.gravity * depth


def extract_interfaces(state: BasinState, cfg: ScenarioConfig) -> np.ndarray:
    """Interface depths [m] in the seafloor-anchored frame, decreasing.

    Entry 0 is the seafloor (-h_sea), the last entry the basement;
    intermediate entries sit at nodes where the cell provenance
    (depositional episode) changes.  The count must match the scenario.
    """
    expected = len(cfg.initial_column) + len(cfg.deposition) + 1
    if state.n_cells == 0:
        raise ScenarioError("cannot extract interfaces from an empty column")
    changes = np.flatnonzero(np.diff(state.layer_id)) + 1  # node indices
    z_nodes = np.concatenate([[state.Z[-1]], state.Z[changes][::-1], [state.Z[0]]])
    depths = state.depth_below_sea(z_nodes, cfg.h_sea)
    if len(depths) != expected:
        raise ScenarioError(
            f"run produced {len(depths)} interfaces, scenario implies {expected}"
        )
    return depths
