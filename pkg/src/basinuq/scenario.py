"""Scenario configuration: JSON loading, validation and parameter overrides.

Scenario files carry Ma and m/Ma; everything is converted to SI during
loading, so a ``ScenarioConfig`` is SI throughout.  Configs are frozen;
``apply_parameters`` returns modified copies, which keeps concurrent
model evaluations free of shared mutable state.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import OutOfDomainError, ScenarioError
from .materials import FluidProperties, MaterialProperties, QuartzKinetics
from .units import SECONDS_PER_MA

DEFAULT_GRAVITY = 9.81
DEFAULT_NEWTON_TOL = 1e-8
DEFAULT_NEWTON_MAX_ITER = 50


@dataclass(frozen=True)
class DepositionEvent:
    """One depositional episode; rate refers to uncompacted sediment."""

    material: str
    duration_s: float
    rate_m_per_s: float

    @property
    def thickness(self) -> float:
        """Total uncompacted thickness laid down by this event [m]."""
        return self.duration_s * self.rate_m_per_s


@dataclass(frozen=True)
class InitialLayer:
    """Pre-existing column segment present at t=0 (uniform phi0, zero
    effective stress)."""

    material: str
    thickness: float


@dataclass(frozen=True)
class UncertainParameter:
    """Uniformly distributed scalar input.

    ``target`` is a dotted path into the scenario, e.g.
    ``materials.shale.k2`` or ``boundary.h_sea``.
    """

    name: str
    target: str
    low: float
    high: float


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    materials: dict  # name -> MaterialProperties
    fluid: FluidProperties
    quartz: QuartzKinetics
    deposition: tuple  # of DepositionEvent, oldest first
    initial_column: tuple  # of InitialLayer, bottom first
    quiescent_duration_s: float
    quiescent_steps: int
    h_sea: float
    t_top: float
    g_t: float
    gravity: float
    cell_size: float
    alpha_steps: int
    newton_tol: float
    newton_max_iter: int
    uncertain: tuple  # of UncertainParameter

    def material(self, name: str) -> MaterialProperties:
        return self.materials[name]

    @property
    def material_names(self) -> tuple:
        return tuple(self.materials)

    def parameter_space(self) -> "ParameterSpace":
        return ParameterSpace.from_uncertain(self.uncertain)

    def with_mesh(self, cell_size=None, alpha_steps=None) -> "ScenarioConfig":
        """Copy with a different mesh resolution / insertion cadence."""
        changes = {}
        if cell_size is not None:
            changes["cell_size"] = float(cell_size)
        if alpha_steps is not None:
            changes["alpha_steps"] = int(alpha_steps)
        cfg = dataclasses.replace(self, **changes)
        _validate(cfg)
        return cfg


@dataclass(frozen=True)
class ParameterSpace:
    """N-dimensional hyper-rectangle with independent uniform marginals."""

    names: tuple
    lows: tuple
    highs: tuple

    @classmethod
    def from_uncertain(cls, uncertain) -> "ParameterSpace":
        return cls(
            names=tuple(u.name for u in uncertain),
            lows=tuple(float(u.low) for u in uncertain),
            highs=tuple(float(u.high) for u in uncertain),
        )

    @classmethod
    def from_intervals(cls, intervals, names=None) -> "ParameterSpace":
        lows, highs = zip(*((float(a), float(b)) for a, b in intervals))
        if names is None:
            names = tuple(f"p{n+1}" for n in range(len(lows)))
        return cls(names=tuple(names), lows=lows, highs=highs)

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def intervals(self) -> tuple:
        return tuple(zip(self.lows, self.highs))

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(
            np.all(p >= np.asarray(self.lows)) and np.all(p <= np.asarray(self.highs))
        )

    def density(self, p) -> float:
        """Joint pdf: constant 1/vol inside the rectangle, 0 outside."""
        vol = float(np.prod(np.asarray(self.highs) - np.asarray(self.lows)))
        return 1.0 / vol if self.contains(p) else 0.0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n uniform draws, shape (n, dim)."""
        lo = np.asarray(self.lows)
        hi = np.asarray(self.highs)
        return lo + (hi - lo) * rng.random((n, self.dim))


def apply_parameters(cfg: ScenarioConfig, values) -> ScenarioConfig:
    """Return a copy of ``cfg`` with its uncertain targets set to ``values``.

    ``values`` is a sequence ordered like ``cfg.uncertain`` or a
    name->value mapping.
    """
    if isinstance(values, dict):
        vals = values
    else:
        arr = np.asarray(values, dtype=float).ravel()
        if arr.size != len(cfg.uncertain):
            raise OutOfDomainError(
                f"expected {len(cfg.uncertain)} parameter values, got {arr.size}"
            )
        vals = {u.name: float(v) for u, v in zip(cfg.uncertain, arr)}

    by_name = {u.name: u for u in cfg.uncertain}
    unknown = set(vals) - set(by_name)
    if unknown:
        raise OutOfDomainError(f"unknown parameter names: {sorted(unknown)}")

    cfg_out = cfg
    for name, value in vals.items():
        u = by_name[name]
        if not (u.low <= value <= u.high):
            raise OutOfDomainError(
                f"{name}={value} outside [{u.low}, {u.high}]"
            )
        cfg_out = _set_target(cfg_out, u.target, float(value))
    return cfg_out


def _set_target(cfg: ScenarioConfig, target: str, value: float) -> ScenarioConfig:
    parts = target.split(".")
    if parts[0] == "materials" and len(parts) == 3:
        mat_name, field = parts[1], parts[2]
        if mat_name not in cfg.materials:
            raise ScenarioError(f"target {target!r}: unknown material {mat_name!r}")
        mat = dataclasses.replace(cfg.materials[mat_name], **{field: value})
        mats = dict(cfg.materials)
        mats[mat_name] = mat
        return dataclasses.replace(cfg, materials=mats)
    if parts[0] == "boundary" and len(parts) == 2 and parts[1] in ("h_sea", "t_top", "g_t"):
        return dataclasses.replace(cfg, **{parts[1]: value})
    raise ScenarioError(f"unsupported uncertain-parameter target {target!r}")


# --- JSON loading ---------------------------------------------------------


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ScenarioError(f"{where}: missing required field {key!r}")
    return doc[key]


def load_scenario(path) -> ScenarioConfig:
    """Parse and validate a scenario JSON file.

    Raises ScenarioError with a line/field hint on parse failure, or
    with the complete list of violated invariants on validation failure.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}"
        ) from exc
    return scenario_from_dict(doc, where=str(path))


def scenario_from_dict(doc: dict, where: str = "<dict>") -> ScenarioConfig:
    problems = []

    materials = {}
    for name, fields in _require(doc, "materials", where).items():
        try:
            materials[name] = MaterialProperties(**fields)
        except (TypeError, ValueError) as exc:
            problems.append(f"materials.{name}: {exc}")

    try:
        fluid = FluidProperties(**_require(doc, "fluid", where))
    except (TypeError, ValueError) as exc:
        problems.append(f"fluid: {exc}")
        fluid = None
    try:
        quartz = QuartzKinetics(**_require(doc, "quartz", where))
    except (TypeError, ValueError) as exc:
        problems.append(f"quartz: {exc}")
        quartz = None

    deposition = []
    for k, ev in enumerate(doc.get("deposition", [])):
        mat = ev.get("material")
        duration = float(ev.get("duration", 0.0))
        rate = float(ev.get("rate", 0.0))
        if mat not in materials:
            problems.append(f"deposition[{k}]: unknown material {mat!r}")
        if duration <= 0.0:
            problems.append(f"deposition[{k}]: duration must be > 0, got {duration}")
        if rate <= 0.0:
            problems.append(f"deposition[{k}]: rate must be > 0, got {rate}")
        deposition.append(
            DepositionEvent(
                material=mat,
                duration_s=duration * SECONDS_PER_MA,
                rate_m_per_s=rate / SECONDS_PER_MA,
            )
        )

    initial = []
    for k, lay in enumerate(doc.get("initial_column", [])):
        mat = lay.get("material")
        thickness = float(lay.get("thickness", 0.0))
        if mat not in materials:
            problems.append(f"initial_column[{k}]: unknown material {mat!r}")
        if thickness <= 0.0:
            problems.append(
                f"initial_column[{k}]: thickness must be > 0, got {thickness}"
            )
        initial.append(InitialLayer(material=mat, thickness=thickness))

    quiescent = doc.get("quiescent", {})
    q_duration = float(quiescent.get("duration", 0.0)) * SECONDS_PER_MA
    q_steps = int(quiescent.get("steps", 0))

    boundary = _require(doc, "boundary", where)
    mesh = _require(doc, "mesh", where)
    newton = doc.get("newton", {})

    uncertain = []
    seen = set()
    for k, u in enumerate(doc.get("uncertain", [])):
        name = u.get("name", f"p{k+1}")
        low, high = float(u.get("low")), float(u.get("high"))
        if not low < high:
            problems.append(
                f"uncertain[{k}] ({name}): empty interval [{low}, {high}]"
            )
        if name in seen:
            problems.append(f"uncertain[{k}]: duplicate name {name!r}")
        seen.add(name)
        uncertain.append(
            UncertainParameter(name=name, target=u.get("target", ""), low=low, high=high)
        )

    cfg = ScenarioConfig(
        name=doc.get("name", where),
        materials=materials,
        fluid=fluid,
        quartz=quartz,
        deposition=tuple(deposition),
        initial_column=tuple(initial),
        quiescent_duration_s=q_duration,
        quiescent_steps=q_steps,
        h_sea=float(_require(boundary, "h_sea", where + ".boundary")),
        t_top=float(_require(boundary, "t_top", where + ".boundary")),
        g_t=float(_require(boundary, "g_t", where + ".boundary")),
        gravity=float(doc.get("gravity", DEFAULT_GRAVITY)),
        cell_size=float(_require(mesh, "cell_size", where + ".mesh")),
        alpha_steps=int(mesh.get("alpha_steps", 1)),
        newton_tol=float(newton.get("tol", DEFAULT_NEWTON_TOL)),
        newton_max_iter=int(newton.get("max_iter", DEFAULT_NEWTON_MAX_ITER)),
        uncertain=tuple(uncertain),
    )

    problems.extend(_validate(cfg, collect=True))
    if problems:
        raise ScenarioError(
            f"{where}: invalid scenario:\n  " + "\n  ".join(problems)
        )

    # Uncertain targets must resolve; probe with the midpoint values.
    for u in cfg.uncertain:
        _set_target(cfg, u.target, 0.5 * (u.low + u.high))
    return cfg


def _validate(cfg: ScenarioConfig, collect: bool = False):
    problems = []
    if not cfg.cell_size > 0.0:
        problems.append(f"mesh.cell_size must be > 0, got {cfg.cell_size}")
    if cfg.alpha_steps < 1:
        problems.append(f"mesh.alpha_steps must be >= 1, got {cfg.alpha_steps}")
    if cfg.h_sea < 0.0:
        problems.append(f"boundary.h_sea must be >= 0, got {cfg.h_sea}")
    if cfg.newton_tol <= 0.0 or cfg.newton_max_iter < 1:
        problems.append("newton settings must satisfy tol > 0, max_iter >= 1")
    if not cfg.deposition and not cfg.initial_column:
        problems.append("scenario needs deposition events or an initial column")
    if cfg.quiescent_duration_s > 0.0 and cfg.quiescent_steps < 1:
        problems.append("quiescent.steps must be >= 1 when a duration is given")
    if cfg.cell_size > 0.0:
        for k, ev in enumerate(cfg.deposition):
            n = ev.thickness / cfg.cell_size
            if abs(n - round(n)) > 1e-9 or round(n) < 1:
                problems.append(
                    f"deposition[{k}]: thickness {ev.thickness:.6g} m is not a "
                    f"positive multiple of cell_size {cfg.cell_size:.6g} m"
                )
        for k, lay in enumerate(cfg.initial_column):
            n = lay.thickness / cfg.cell_size
            if abs(n - round(n)) > 1e-9 or round(n) < 1:
                problems.append(
                    f"initial_column[{k}]: thickness {lay.thickness:.6g} m is not "
                    f"a positive multiple of cell_size {cfg.cell_size:.6g} m"
                )
    if collect:
        return problems
    if problems:
        raise ScenarioError("invalid scenario:\n  " + "\n  ".join(problems))
    return []
