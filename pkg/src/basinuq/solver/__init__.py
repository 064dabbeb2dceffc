"""Deterministic forward solver: Lagrangian mesh, Newton time stepping."""

from .assembly import (
    CellProps,
    StepContext,
    assemble_jacobian,
    assemble_residual,
    make_step_context,
    pack_state,
)
from .newton import newton_step
from .state import BasinState, MaterialTable, SolveReport, empty_state
from .thermal import solve_temperature
from .timeloop import (
    advance_time,
    cells_appended,
    deposition_schedule,
    extract_interfaces,
    hydrostatic_pressure,
    initial_state,
    insert_cell,
    total_steps,
)

__all__ = [
    "BasinState",
    "CellProps",
    "MaterialTable",
    "SolveReport",
    "StepContext",
    "advance_time",
    "assemble_jacobian",
    "assemble_residual",
    "cells_appended",
    "deposition_schedule",
    "empty_state",
    "extract_interfaces",
    "hydrostatic_pressure",
    "initial_state",
    "insert_cell",
    "make_step_context",
    "newton_step",
    "pack_state",
    "solve_temperature",
    "total_steps",
]
