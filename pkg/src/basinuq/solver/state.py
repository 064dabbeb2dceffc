"""Discrete basin state on the Lagrangian mesh.

Internal frame: the z axis points upward with the basement fixed at z=0;
node 0 is the basement, node N the current sediment top.  Output depths
are reported in a seafloor-anchored frame where the column top sits at
-h_sea (``depth_below_sea``), matching how interface positions are
quoted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..scenario import ScenarioConfig


@dataclass(frozen=True)
class MaterialTable:
    """Per-lithology constants stacked into arrays for vectorised lookup."""

    names: tuple
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
    def from_config(cls, cfg: ScenarioConfig) -> "MaterialTable":
        names = tuple(cfg.materials)
        mats = [cfg.materials[n] for n in names]
        return cls(
            names=names,
            rho_s=np.array([m.rho_s for m in mats]),
            c_s=np.array([m.c_s for m in mats]),
            lambda_s=np.array([m.lambda_s for m in mats]),
            phi0=np.array([m.phi0 for m in mats]),
            phi_f=np.array([m.phi_f for m in mats]),
            k1=np.array([m.k1 for m in mats]),
            k2=np.array([m.k2 for m in mats]),
            beta=np.array([m.beta for m in mats]),
            quartz_active=np.array([m.quartz_active for m in mats], dtype=bool),
        )

    def index(self, name: str) -> int:
        return self.names.index(name)


@dataclass
class BasinState:
    """All discrete unknowns plus temperature and per-cell bookkeeping.

    Arrays: nodes carry Z, u_s, u_D (length N+1, bottom to top); cells
    carry porosities, load, pressure and temperature (length N).
    ``layer_id`` records which depositional episode produced each cell,
    which is what interface extraction keys on.
    """

    time: float  # [s]
    Z: np.ndarray
    u_s: np.ndarray
    u_D: np.ndarray
    phi_Q: np.ndarray
    phi_M: np.ndarray
    phi: np.ndarray
    S: np.ndarray
    P: np.ndarray
    T: np.ndarray
    mat_id: np.ndarray
    layer_id: np.ndarray
    activated: np.ndarray
    phi_act: np.ndarray
    a0: np.ndarray
    fresh_load: float = 0.0  # surcharge from not-yet-meshed sediment [Pa]

    @property
    def n_cells(self) -> int:
        return len(self.phi)

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.Z)

    @property
    def z_centers(self) -> np.ndarray:
        return 0.5 * (self.Z[1:] + self.Z[:-1])

    def depth_below_sea(self, z, h_sea: float) -> np.ndarray:
        """Map internal z to the output frame (column top at -h_sea)."""
        return np.asarray(z, dtype=float) - self.Z[-1] - h_sea

    def copy(self) -> "BasinState":
        return BasinState(
            time=self.time,
            Z=self.Z.copy(),
            u_s=self.u_s.copy(),
            u_D=self.u_D.copy(),
            phi_Q=self.phi_Q.copy(),
            phi_M=self.phi_M.copy(),
            phi=self.phi.copy(),
            S=self.S.copy(),
            P=self.P.copy(),
            T=self.T.copy(),
            mat_id=self.mat_id.copy(),
            layer_id=self.layer_id.copy(),
            activated=self.activated.copy(),
            phi_act=self.phi_act.copy(),
            a0=self.a0.copy(),
            fresh_load=self.fresh_load,
        )


def empty_state() -> BasinState:
    """Zero-cell column (used before the first cell is deposited)."""
    z0 = np.zeros(1)
    e = np.zeros(0)
    return BasinState(
        time=0.0,
        Z=z0,
        u_s=np.zeros(1),
        u_D=np.zeros(1),
        phi_Q=e.copy(),
        phi_M=e.copy(),
        phi=e.copy(),
        S=e.copy(),
        P=e.copy(),
        T=e.copy(),
        mat_id=np.zeros(0, dtype=int),
        layer_id=np.zeros(0, dtype=int),
        activated=np.zeros(0, dtype=bool),
        phi_act=e.copy(),
        a0=e.copy(),
    )


@dataclass
class SolveReport:
    """Per-step convergence record of one forward run."""

    times: list = field(default_factory=list)  # end-of-step time [s]
    iterations: list = field(default_factory=list)
    converged: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # (time_s, BasinState)
    final_state: BasinState | None = None
    wall_time: float = 0.0
    n_steps: int = 0
    n_cells_final: int = 0
