"""Run configuration: strict JSON parsing, defaults, and object assembly.

Unknown keys are rejected with a nearest-match suggestion; every default is
materialized into the resolved configuration, which is echoed to
``resolved-config.json`` and is itself a valid configuration reproducing
the run.
"""

from __future__ import annotations

import difflib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .fieldio import read_face_field, read_scalar_field
from .forward import ControlField, Models
from .grid import FaceVectorField, Grid2D, ObservationPoint, ScalarField, make_grid
from .materials import MaterialModel, PotentialModel, stabilization_constant
from .objective import AdmissibleBox, CostSpec, CostWeights
from .optimizer import OptimOptions
from .problem import ControlProblem


def _reject_unknown(section: dict, allowed, path: str) -> None:
    for key in section:
        if key not in allowed:
            hint = difflib.get_close_matches(key, allowed, n=1)
            suffix = f"; did you mean {hint[0]!r}?" if hint else ""
            raise ConfigError(f"unknown key {key!r} in {path}{suffix}")


def _require(section: dict, key: str, path: str):
    if key not in section:
        raise ConfigError(f"missing required key {key!r} in {path}")
    return section[key]


DEFAULT_WEIGHTS = {"tracking_running": 1.0, "tracking_terminal": 1.0,
                   "velocity_running": 1.0, "velocity_terminal": 1.0,
                   "control_energy": 1.0}

DEFAULT_OPTIMIZER = {"max_iters": 60, "armijo_c1": 1e-4, "backtrack": 0.5,
                     "initial_step": 1.0, "tolerance": 1e-3,
                     "step_mode": "barzilai-borwein-with-armijo-safeguard"}


@dataclass
class RunConfig:
    """Fully validated configuration with all defaults materialized."""

    resolved: dict
    base_dir: Path

    @property
    def grid(self) -> Grid2D:
        g = self.resolved["grid"]
        return make_grid(g["nx"], g["ny"], g["Lx"], g["Ly"])

    @property
    def dt(self) -> float:
        return self.resolved["time"]["dt"]

    @property
    def n_steps(self) -> int:
        return self.resolved["time"]["n_steps"]

    @property
    def T(self) -> float:
        return self.resolved["time"]["T"]

    @property
    def seed(self) -> int:
        return self.resolved["seed"]

    @property
    def output_dir(self) -> str:
        return self.resolved["output"]["directory"]

    def models(self) -> Models:
        m = self.resolved["models"]
        pot_cfg = m["potential"]
        kind = pot_cfg["kind"]
        if kind == "double-well":
            pot = PotentialModel.double_well()
        elif kind == "logarithmic":
            pot = PotentialModel.logarithmic(pot_cfg["theta"], pot_cfg["theta_c"],
                                             pot_cfg["delta_min"])
        elif kind == "custom-polynomial":
            pot = PotentialModel.polynomial(pot_cfg["coefficients"])
        else:
            raise ConfigError(f"unknown potential kind {kind!r}")

        def coeffs(v):
            return [v] if isinstance(v, (int, float)) else list(v["coefficients"])

        lo, hi = m["stabilization_range"]
        mat = MaterialModel.from_polynomials(coeffs(m["mobility"]),
                                             coeffs(m["viscosity"]), (lo, hi))
        return Models(mat, pot, m["stabilization"])

    def initial_phi(self) -> ScalarField:
        grid = self.grid
        spec = self.resolved["initial"]["phi"]
        if "file" in spec:
            return read_scalar_field(self.base_dir / spec["file"], grid)
        preset = spec["preset"]
        X, Y = grid.cell_centers()
        if preset == "constant":
            return ScalarField.full(grid, spec["value"])
        if preset == "tanh-blob":
            cx, cy = spec["center"]
            r = np.hypot(X - cx, Y - cy)
            return ScalarField(grid, np.tanh((spec["radius"] - r) / spec["width"]))
        if preset == "tanh-stripe":
            return ScalarField(grid, np.tanh((Y - spec["position"]) / spec["width"]))
        if preset == "random-smooth":
            rng = np.random.default_rng(self.seed)
            modes = spec["modes"]
            f = np.zeros(grid.shape)
            for k in range(modes + 1):
                for l in range(modes + 1):
                    if k == l == 0:
                        continue
                    f += rng.standard_normal() * np.cos(np.pi * k * X / grid.Lx) \
                        * np.cos(np.pi * l * Y / grid.Ly)
            f *= spec["amplitude"] / max(np.max(np.abs(f)), 1e-300)
            return ScalarField(grid, spec["mean"] + f)
        raise ConfigError(f"unknown phi preset {preset!r}")

    def initial_u(self) -> FaceVectorField:
        grid = self.grid
        spec = self.resolved["initial"]["u"]
        if "file" in spec:
            f = read_face_field(self.base_dir / spec["file"], grid)
            return FaceVectorField(grid, f.x, f.y)  # re-enforce no-slip normals
        preset = spec["preset"]
        if preset == "zero":
            return FaceVectorField.zeros(grid)
        if preset == "vortex":
            amp = spec["amplitude"]
            xc = np.arange(grid.nx + 1) * grid.hx
            yc = np.arange(grid.ny + 1) * grid.hy
            Xc, Yc = np.meshgrid(xc, yc, indexing="ij")
            chi = amp * np.sin(np.pi * Xc / grid.Lx) ** 2 * np.sin(np.pi * Yc / grid.Ly) ** 2
            ux = (chi[:, 1:] - chi[:, :-1]) / grid.hy
            uy = -(chi[1:, :] - chi[:-1, :]) / grid.hx
            return FaceVectorField(grid, ux, uy)
        raise ConfigError(f"unknown velocity preset {preset!r}")

    def cost(self) -> CostSpec:
        c = self.resolved.get("cost")
        if c is None:
            return None
        points = [ObservationPoint(float(p[0]), float(p[1])) for p in c["points"]]
        targets = c["targets"]
        n1 = self.n_steps + 1
        rows = []
        for t in targets:
            rows.append([float(t)] * n1 if isinstance(t, (int, float)) else
                        [float(v) for v in t])
        if c["u_desired"] != "zero":
            raise ConfigError("only u_desired = 'zero' is supported in config files")
        return CostSpec(points=points, targets=np.asarray(rows), mode=c["mode"],
                        observation=c["observation"], epsilon=c["epsilon"],
                        u_desired=None, weights=CostWeights(**c["weights"]))

    def box(self) -> AdmissibleBox:
        b = self.resolved.get("box")
        if b is None:
            return None

        def bound(v):
            if isinstance(v, str):
                return read_scalar_field(self.base_dir / v, self.grid).values
            return float(v)

        return AdmissibleBox(bound(b["U1"]), bound(b["U2"]))

    def optimizer_options(self) -> OptimOptions:
        return OptimOptions(**{k: v for k, v in self.resolved["optimizer"].items()})

    def problem(self) -> ControlProblem:
        cost = self.cost()
        if cost is None:
            raise ConfigError("this command needs a 'cost' section in the config")
        return ControlProblem(grid=self.grid, dt=self.dt, n_steps=self.n_steps,
                              models=self.models(), phi0=self.initial_phi(),
                              u0=self.initial_u(), cost=cost, box=self.box())

    def problem_for_verify(self) -> ControlProblem:
        """Like problem(), but the cost section is optional (invariants only)."""
        return ControlProblem(grid=self.grid, dt=self.dt, n_steps=self.n_steps,
                              models=self.models(), phi0=self.initial_phi(),
                              u0=self.initial_u(), cost=self.cost(), box=self.box())

    def initial_control(self) -> ControlField:
        return ControlField.zeros(self.grid, self.dt, self.n_steps)

    def echo(self, outdir) -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "resolved-config.json").write_text(
            json.dumps(self.resolved, indent=2, sort_keys=True) + "\n")


def parse_config(path) -> RunConfig:
    """Load, validate, and materialize all defaults of a JSON run config."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: line {exc.lineno}: {exc.msg}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return RunConfig(resolved=_resolve(raw), base_dir=p.parent)


def _resolve(raw: dict) -> dict:
    _reject_unknown(raw, ["grid", "time", "models", "initial", "cost", "box",
                          "optimizer", "output", "seed"], "config root")

    out = {}
    g = _require(raw, "grid", "config")
    _reject_unknown(g, ["nx", "ny", "Lx", "Ly"], "grid")
    grid = make_grid(_require(g, "nx", "grid"), _require(g, "ny", "grid"),
                     _require(g, "Lx", "grid"), _require(g, "Ly", "grid"))
    out["grid"] = {"nx": grid.nx, "ny": grid.ny, "Lx": grid.Lx, "Ly": grid.Ly}

    t = _require(raw, "time", "config")
    _reject_unknown(t, ["T", "dt", "n_steps"], "time")
    dt = float(_require(t, "dt", "time"))
    if dt <= 0:
        raise ConfigError("time.dt must be positive")
    if "n_steps" in t:
        n_steps = int(t["n_steps"])
        T = n_steps * dt
        if "T" in t and abs(float(t["T"]) - T) > 1e-9 * max(1.0, T):
            raise ConfigError("time.T disagrees with n_steps * dt")
    else:
        T = float(_require(t, "T", "time"))
        n_steps = round(T / dt)
        if abs(n_steps * dt - T) > 1e-9 * max(1.0, abs(T)):
            raise ConfigError(f"time.T = {T} is not an integer multiple of dt = {dt}")
    out["time"] = {"T": n_steps * dt, "dt": dt, "n_steps": n_steps}

    m = dict(raw.get("models", {}))
    _reject_unknown(m, ["potential", "mobility", "viscosity", "stabilization",
                        "stabilization_range"], "models")
    pot_cfg = dict(m.get("potential", {"kind": "double-well"}))
    kinds = {"double-well": [], "logarithmic": ["theta", "theta_c", "delta_min"],
             "custom-polynomial": ["coefficients"]}
    kind = pot_cfg.get("kind", "double-well")
    if kind not in kinds:
        hint = difflib.get_close_matches(kind, kinds, n=1)
        raise ConfigError(f"unknown potential kind {kind!r}"
                          + (f"; did you mean {hint[0]!r}?" if hint else ""))
    _reject_unknown(pot_cfg, ["kind"] + kinds[kind], "models.potential")
    if kind == "logarithmic":
        pot_cfg = {"kind": kind, "theta": float(pot_cfg.get("theta", 1.0)),
                   "theta_c": float(pot_cfg.get("theta_c", 0.0)),
                   "delta_min": float(pot_cfg.get("delta_min", 1e-4))}
        pot = PotentialModel.logarithmic(pot_cfg["theta"], pot_cfg["theta_c"],
                                         pot_cfg["delta_min"])
    elif kind == "custom-polynomial":
        pot_cfg = {"kind": kind,
                   "coefficients": [float(c) for c in _require(pot_cfg, "coefficients",
                                                               "models.potential")]}
        pot = PotentialModel.polynomial(pot_cfg["coefficients"])
    else:
        pot_cfg = {"kind": "double-well"}
        pot = PotentialModel.double_well()

    def material_entry(v, name):
        if isinstance(v, (int, float)):
            return float(v)
        if isinstance(v, dict):
            _reject_unknown(v, ["coefficients"], f"models.{name}")
            return {"coefficients": [float(c) for c in v["coefficients"]]}
        raise ConfigError(f"models.{name} must be a number or {{coefficients: [...]}}")

    mob = material_entry(m.get("mobility", 1.0), "mobility")
    vis = material_entry(m.get("viscosity", 1.0), "viscosity")
    srange = [float(v) for v in m.get("stabilization_range", [-1.2, 1.2])]
    if len(srange) != 2 or srange[0] >= srange[1]:
        raise ConfigError("models.stabilization_range must be [lo, hi] with lo < hi")
    stab = m.get("stabilization")
    if stab is None:
        stab = stabilization_constant(pot, tuple(srange))
    out["models"] = {"potential": pot_cfg, "mobility": mob, "viscosity": vis,
                     "stabilization": float(stab), "stabilization_range": srange}

    ini = dict(raw.get("initial", {}))
    _reject_unknown(ini, ["phi", "u"], "initial")
    phi_spec = dict(ini.get("phi", {"preset": "constant", "value": 0.0}))
    out["initial"] = {"phi": _resolve_phi(phi_spec), "u": _resolve_u(dict(ini.get("u", {"preset": "zero"})))}

    if "cost" in raw and raw["cost"] is not None:
        c = dict(raw["cost"])
        _reject_unknown(c, ["points", "targets", "mode", "observation", "epsilon",
                            "u_desired", "weights"], "cost")
        points = _require(c, "points", "cost")
        targets = _require(c, "targets", "cost")
        if len(points) != len(targets):
            raise ConfigError("cost.points and cost.targets must have the same length")
        mode = c.get("mode", "J1")
        if mode not in ("J1", "J2"):
            raise ConfigError("cost.mode must be 'J1' or 'J2'")
        obs = c.get("observation", "mollified")
        if obs not in ("point", "mollified"):
            raise ConfigError("cost.observation must be 'point' or 'mollified'")
        eps = c.get("epsilon")
        if eps is None:
            eps = 2.0 * grid.hmax
        weights = dict(DEFAULT_WEIGHTS)
        wraw = dict(c.get("weights", {}))
        _reject_unknown(wraw, list(DEFAULT_WEIGHTS), "cost.weights")
        weights.update({k: float(v) for k, v in wraw.items()})
        out["cost"] = {"points": [[float(p[0]), float(p[1])] for p in points],
                       "targets": targets, "mode": mode, "observation": obs,
                       "epsilon": float(eps), "u_desired": c.get("u_desired", "zero"),
                       "weights": weights}

    if "box" in raw and raw["box"] is not None:
        b = dict(raw["box"])
        _reject_unknown(b, ["U1", "U2"], "box")
        lo, hi = _require(b, "U1", "box"), _require(b, "U2", "box")
        if isinstance(lo, (int, float)) and isinstance(hi, (int, float)) and lo > hi:
            raise ConfigError("box requires U1 <= U2")
        out["box"] = {"U1": lo, "U2": hi}

    opt = dict(DEFAULT_OPTIMIZER)
    oraw = dict(raw.get("optimizer", {}))
    _reject_unknown(oraw, list(DEFAULT_OPTIMIZER) + ["min_step", "max_backtracks"],
                    "optimizer")
    opt.update(oraw)
    out["optimizer"] = opt

    o = dict(raw.get("output", {}))
    _reject_unknown(o, ["directory"], "output")
    out["output"] = {"directory": o.get("directory", "run-output")}
    out["seed"] = int(raw.get("seed", 0))
    return out


def _resolve_phi(spec: dict) -> dict:
    if "file" in spec:
        _reject_unknown(spec, ["file"], "initial.phi")
        return {"file": spec["file"]}
    preset = spec.get("preset", "constant")
    fields = {"constant": {"value": 0.0},
              "tanh-blob": {"center": [0.5, 0.5], "radius": 0.2, "width": 0.05},
              "tanh-stripe": {"position": 0.5, "width": 0.05},
              "random-smooth": {"amplitude": 0.1, "mean": 0.0, "modes": 4}}
    if preset not in fields:
        hint = difflib.get_close_matches(preset, fields, n=1)
        raise ConfigError(f"unknown phi preset {preset!r}"
                          + (f"; did you mean {hint[0]!r}?" if hint else ""))
    _reject_unknown(spec, ["preset"] + list(fields[preset]), "initial.phi")
    resolved = {"preset": preset}
    for k, dflt in fields[preset].items():
        resolved[k] = spec.get(k, dflt)
    return resolved


def _resolve_u(spec: dict) -> dict:
    if "file" in spec:
        _reject_unknown(spec, ["file"], "initial.u")
        return {"file": spec["file"]}
    preset = spec.get("preset", "zero")
    fields = {"zero": {}, "vortex": {"amplitude": 1.0}}
    if preset not in fields:
        hint = difflib.get_close_matches(preset, fields, n=1)
        raise ConfigError(f"unknown velocity preset {preset!r}"
                          + (f"; did you mean {hint[0]!r}?" if hint else ""))
    _reject_unknown(spec, ["preset"] + list(fields[preset]), "initial.u")
    resolved = {"preset": preset}
    for k, dflt in fields[preset].items():
        resolved[k] = spec.get(k, dflt)
    return resolved
