"""Full compaction model as a parameter-to-outputs map.

``BasinModel`` runs the forward solver for one parameter vector and
returns the final-time interfaces plus cellwise profiles in the
seafloor-anchored depth frame.  Runs are memoised in memory and,
optionally, in an on-disk cache keyed by the scenario content and the
parameter vector, so surrogate construction, Monte Carlo validation and
classification studies share full-model solves.  Simulations are pure
functions of (scenario, parameter vector); ensembles can therefore be
evaluated concurrently.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scenario import ScenarioConfig, apply_parameters
from .solver import advance_time, extract_interfaces, hydrostatic_pressure

PROFILE_FIELDS = ("phi", "phi_M", "phi_Q", "P", "P_hydro", "sigma_c", "T")


@dataclass
class ModelRun:
    """Final-time outputs of one forward solve (output depth frame)."""

    interfaces: np.ndarray
    z_centers: np.ndarray
    fields: dict
    iterations_total: int
    n_steps: int


def _run_outputs(cfg: ScenarioConfig, report) -> ModelRun:
    st = report.final_state
    ifc = extract_interfaces(st, cfg)
    zc = st.depth_below_sea(st.z_centers, cfg.h_sea)
    p_hydro = hydrostatic_pressure(st, cfg)
    fields = {
        "phi": st.phi.copy(),
        "phi_M": st.phi_M.copy(),
        "phi_Q": st.phi_Q.copy(),
        "P": st.P.copy(),
        "P_hydro": p_hydro,
        "sigma_c": st.S - st.P,
        "T": st.T.copy(),
    }
    return ModelRun(
        interfaces=ifc,
        z_centers=zc,
        fields=fields,
        iterations_total=int(np.sum(report.iterations)),
        n_steps=report.n_steps,
    )


def scenario_digest(cfg: ScenarioConfig) -> str:
    """Content hash of everything a run depends on."""
    payload = {
        "name": cfg.name,
        "materials": {
            n: vars(m).copy() for n, m in sorted(cfg.materials.items())
        },
        "fluid": vars(cfg.fluid).copy(),
        "quartz": vars(cfg.quartz).copy(),
        "deposition": [
            (e.material, e.duration_s, e.rate_m_per_s) for e in cfg.deposition
        ],
        "initial_column": [
            (l.material, l.thickness) for l in cfg.initial_column
        ],
        "quiescent": (cfg.quiescent_duration_s, cfg.quiescent_steps),
        "boundary": (cfg.h_sea, cfg.t_top, cfg.g_t, cfg.gravity),
        "mesh": (cfg.cell_size, cfg.alpha_steps),
        "newton": (cfg.newton_tol, cfg.newton_max_iter),
        "uncertain": [
            (u.name, u.target, u.low, u.high) for u in cfg.uncertain
        ],
    }
    blob = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


_WORKER_MODEL = None


def _worker_init(cfg):
    global _WORKER_MODEL
    _WORKER_MODEL = BasinModel(cfg)


def _worker_run(p):
    run = _WORKER_MODEL.run(np.asarray(p))
    return run


class BasinModel:
    """Parameter-vector -> final-time outputs, with caching."""

    def __init__(self, cfg: ScenarioConfig, cache_dir=None):
        self.cfg = cfg
        self.space = cfg.parameter_space()
        self.n_interfaces = (
            len(cfg.initial_column) + len(cfg.deposition) + 1
        )
        self.digest = scenario_digest(cfg)
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._memory: dict = {}
        self.n_solves = 0

    # deposition order is oldest first; layer 0 is the *top* layer
    def layer_materials(self) -> tuple:
        mats = [l.material for l in self.cfg.initial_column]
        mats += [e.material for e in self.cfg.deposition]
        return tuple(reversed(mats))

    def _key(self, p: np.ndarray) -> str:
        return hashlib.sha256(
            (self.digest + "|" + repr([float(v) for v in p])).encode()
        ).hexdigest()[:24]

    def _cache_path(self, key: str) -> Path:
        return self.cache_dir / f"{self.digest}_{key}.npz"

    def run(self, p) -> ModelRun:
        p = np.asarray(p, dtype=float).ravel()
        key = self._key(p)
        hit = self._memory.get(key)
        if hit is not None:
            return hit
        if self.cache_dir:
            path = self._cache_path(key)
            if path.exists():
                run = self._load(path)
                self._memory[key] = run
                return run
        cfg_p = apply_parameters(self.cfg, p)
        report = advance_time(cfg_p)
        run = _run_outputs(cfg_p, report)
        self.n_solves += 1
        self._memory[key] = run
        if self.cache_dir:
            self._store(self._cache_path(key), run)
        return run

    def run_many(self, pts, jobs: int = 1) -> list:
        """Ensemble evaluation; results ordered like ``pts`` regardless of
        completion order."""
        pts = np.asarray(pts, dtype=float)
        todo = []
        results: list = [None] * len(pts)
        for i, p in enumerate(pts):
            key = self._key(p)
            cached = self._memory.get(key)
            if cached is None and self.cache_dir:
                path = self._cache_path(key)
                if path.exists():
                    cached = self._load(path)
                    self._memory[key] = cached
            if cached is not None:
                results[i] = cached
            else:
                todo.append(i)
        if todo and jobs > 1:
            with ProcessPoolExecutor(
                max_workers=jobs, initializer=_worker_init,
                initargs=(self.cfg,),
            ) as pool:
                for i, run in zip(
                    todo, pool.map(_worker_run, [pts[i] for i in todo])
                ):
                    self._finish(pts[i], run)
                    results[i] = run
        else:
            for i in todo:
                results[i] = self.run(pts[i])
        return results

    def _finish(self, p, run: ModelRun) -> None:
        key = self._key(p)
        self._memory[key] = run
        self.n_solves += 1
        if self.cache_dir:
            self._store(self._cache_path(key), run)

    def interfaces_many(self, pts, jobs: int = 1) -> np.ndarray:
        return np.array(
            [r.interfaces for r in self.run_many(pts, jobs=jobs)]
        )

    @staticmethod
    def _store(path: Path, run: ModelRun) -> None:
        tmp = path.with_suffix(".tmp.npz")
        np.savez(
            tmp,
            interfaces=run.interfaces,
            z_centers=run.z_centers,
            iterations_total=run.iterations_total,
            n_steps=run.n_steps,
            **{f"field_{k}": v for k, v in run.fields.items()},
        )
        tmp.replace(path)

    @staticmethod
    def _load(path: Path) -> ModelRun:
        with np.load(path) as dat:
            fields = {
                k[len("field_"):]: dat[k]
                for k in dat.files
                if k.startswith("field_")
            }
            return ModelRun(
                interfaces=dat["interfaces"],
                z_centers=dat["z_centers"],
                fields=fields,
                iterations_total=int(dat["iterations_total"]),
                n_steps=int(dat["n_steps"]),
            )
