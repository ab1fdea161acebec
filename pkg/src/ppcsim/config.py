"""Run-configuration schema: strict JSON validation with unit-suffixed keys.

Every physical key carries its unit in the name (``_cm1``, ``_ps``, ``_K``).
Unknown keys are rejected with a suggestion when they look like a known key
with a missing or wrong unit suffix, so typos never silently change physics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .exciton import SiteHamiltonian, build_dimer, load_site_hamiltonian
from .spectral import BackgroundSD, DiscreteMode, SpectralDensity

_SCHEMA = {
    "engine": {"semiclassical", "tedopa", "redfield", "oracle"},
    "system": {
        "kind": None,
        "delta_eps_cm1": None,
        "j12_cm1": None,
        "path": None,
        "shift_energies": None,
    },
    "bath": {
        "lambda_cm1": None,
        "omega_a_cm1": None,
        "omega_b_cm1": None,
        "temperature_K": None,
        "modes": None,
    },
    "mode": {"omega_cm1": None, "huang_rhys": None, "damping_time_ps": None},
    "semiclassical": {
        "n_traj": None, "dt_ps": None, "t_end_ps": None, "save_every": None,
        "batch_size": None, "pure_dephasing": None, "fit_window_start_ps": None,
    },
    "tedopa": {
        "n_chain": None, "chi_max": None, "dt_ps": None, "t_end_ps": None,
        "d_chain": None, "d_mode": None, "therm_steps": None, "save_every": None,
        "weight_threshold": None, "omega_max_cm1": None,
    },
    "redfield": {"t_end_ps": None, "n_points": None, "pure_dephasing": None},
    "oracle": {"t_end_ps": None, "n_points": None, "d_mode": None},
    "top": {
        "engine": None, "system": None, "bath": None, "initial_state": None,
        "subruns": None, "semiclassical": None, "tedopa": None,
        "redfield": None, "oracle": None,
    },
    "subrun": {"name": None, "drop_mode_cm1": None, "initial_state": None},
}


def _check_keys(section: dict, allowed_key: str, where: str):
    allowed = _SCHEMA[allowed_key]
    for key in section:
        if key in allowed:
            continue
        hint = ""
        for known in allowed:
            stem = known.rsplit("_", 1)[0]
            if key == stem or key.rsplit("_", 1)[0] == stem:
                hint = f"; did you mean '{known}' (unit suffix is required)"
                break
        raise ConfigError(f"unknown key '{key}' in {where}{hint}")


DEFAULTS = {
    "engine": "semiclassical",
    "system": {"kind": "dimer", "delta_eps_cm1": 130.0, "j12_cm1": 53.5},
    "bath": {
        "lambda_cm1": 35.0,
        "omega_a_cm1": 0.57,
        "omega_b_cm1": 1.9,
        "temperature_K": 77.0,
        "modes": [
            {"omega_cm1": 37.0, "huang_rhys": 0.12, "damping_time_ps": 1.0},
            {"omega_cm1": 180.0, "huang_rhys": 0.22, "damping_time_ps": 1.0},
        ],
    },
    "initial_state": "e1+e2",
    "semiclassical": {
        "n_traj": 2000, "dt_ps": 5.0e-4, "t_end_ps": 1.5, "save_every": 6,
        "batch_size": 500, "pure_dephasing": True, "fit_window_start_ps": 0.25,
    },
    "tedopa": {
        "n_chain": 30, "chi_max": 64, "dt_ps": 1.0e-3, "t_end_ps": 1.0,
        "d_chain": 3, "d_mode": 6, "therm_steps": 64, "save_every": 10,
        "weight_threshold": 1e-10,
    },
    "redfield": {"t_end_ps": 2.0, "n_points": 201, "pure_dephasing": True},
    "oracle": {"t_end_ps": 1.0, "n_points": 101, "d_mode": 8},
}


@dataclass
class RunSpec:
    """Validated, defaulted configuration for one experiment."""

    raw: dict
    engine: str
    system: SiteHamiltonian
    bath: SpectralDensity
    temperature: float
    initial_state: str
    engine_options: dict
    subruns: list[dict] = field(default_factory=list)
    shift_energies: bool = True

    def describe(self) -> str:
        bg = self.bath.background
        lines = [
            f"engine             : {self.engine}",
            f"electronic sites   : {self.system.n_sites}",
            f"temperature        : {self.temperature} K",
            f"background lambda  : {bg.lam if bg else 0.0} cm^-1",
            f"modes              : "
            + ", ".join(
                f"{m.omega} cm^-1 (S={m.huang_rhys}, t_damp={m.damping_time} ps)"
                for m in self.bath.modes
            )
            if self.bath.modes
            else "modes              : none",
            f"initial state      : {self.initial_state}",
        ]
        return "\n".join(lines)


def _deep_merge(base: dict, override: dict) -> dict:
    out = json.loads(json.dumps(base))
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def data_path(name: str) -> Path:
    """Path of a packaged data file (shipped Hamiltonians)."""
    return Path(resources.files("ppcsim.data") / name)


def validate_config(raw: dict | str | Path) -> RunSpec:
    """Check, default and materialise a configuration document."""
    if isinstance(raw, (str, Path)):
        p = Path(raw)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(raw, "top", "config root")
    merged = _deep_merge(DEFAULTS, raw)

    engine = merged["engine"]
    if engine not in _SCHEMA["engine"]:
        raise ConfigError(f"unknown engine '{engine}'; one of {sorted(_SCHEMA['engine'])}")

    sys_cfg = merged["system"]
    _check_keys(sys_cfg, "system", "system")
    kind = sys_cfg.get("kind")
    if kind == "dimer":
        system = build_dimer(float(sys_cfg["delta_eps_cm1"]), float(sys_cfg["j12_cm1"]))
    elif kind == "file":
        path = sys_cfg.get("path")
        if path is None:
            raise ConfigError("system.kind = 'file' requires system.path")
        if path.startswith("data:"):
            path = data_path(path[5:])
        system = load_site_hamiltonian(path)
    else:
        raise ConfigError(f"system.kind must be 'dimer' or 'file', got {kind!r}")

    bath_cfg = merged["bath"]
    _check_keys(bath_cfg, "bath", "bath")
    try:
        lam = float(bath_cfg["lambda_cm1"])
        background = (
            BackgroundSD(
                lam=lam,
                omega_a=float(bath_cfg["omega_a_cm1"]),
                omega_b=float(bath_cfg["omega_b_cm1"]),
            )
            if lam > 0
            else None
        )
        modes = []
        for m in bath_cfg.get("modes", []):
            _check_keys(m, "mode", "bath.modes[]")
            modes.append(
                DiscreteMode(
                    omega=float(m["omega_cm1"]),
                    huang_rhys=float(m["huang_rhys"]),
                    damping_time=float(m.get("damping_time_ps", 1.0)),
                )
            )
        modes.sort(key=lambda m: m.omega)
        bath = SpectralDensity(background=background, modes=tuple(modes))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid bath parameters: {exc}") from exc

    temperature = float(bath_cfg["temperature_K"])
    if temperature < 0:
        raise ConfigError("temperature_K must be non-negative")

    eng_cfg = merged[engine] if engine in merged else {}
    _check_keys(eng_cfg, engine, f"{engine} options")

    subruns = merged.get("subruns") or [{"name": "main"}]
    for s in subruns:
        _check_keys(s, "subrun", "subruns[]")

    return RunSpec(
        raw=merged,
        engine=engine,
        system=system,
        bath=bath,
        temperature=temperature,
        initial_state=merged.get("initial_state", "e1+e2"),
        engine_options=eng_cfg,
        subruns=subruns,
        shift_energies=bool(sys_cfg.get("shift_energies", True)),
    )


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply dotted ``key.path=value`` overrides (values parsed as JSON)."""
    out = json.loads(json.dumps(raw))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key.path=value")
        path, _, value = item.partition("=")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = out
        keys = path.split(".")
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path '{path}' crosses a non-object")
        node[keys[-1]] = parsed
    return out


def config_hash(raw: dict) -> str:
    import hashlib

    return hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest()[:16]
