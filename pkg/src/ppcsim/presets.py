"""Named experiment presets and the deterministic run orchestrator.

A preset is a complete configuration document plus sub-run variants (with /
without the resonant mode, Huang-Rhys sweeps, temperature pairs).  Running a
preset writes a config snapshot, one ObservableSeries CSV per sub-run and a
summary JSON with fitted coherence times, plateau values and diagnostics.
Identical inputs and master seed reproduce every CSV byte for byte.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import oracles, redfield, semiclassical, tedopa
from .config import RunSpec, apply_overrides, config_hash, validate_config
from .errors import ConfigError, InsufficientDataError
from .exciton import ExcitonBasis, diagonalize
from .spectral import DiscreteMode, SpectralDensity


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    engine: str
    description: str
    config: dict
    runtime_budget_s: float


def _fmo_system() -> dict:
    return {"kind": "file", "path": "data:fmo7_adolphs_renger.json"}


def _bath(modes, temperature):
    return {
        "lambda_cm1": 35.0,
        "omega_a_cm1": 0.57,
        "omega_b_cm1": 1.9,
        "temperature_K": temperature,
        "modes": modes,
    }


_MODE_180 = {"omega_cm1": 180.0, "huang_rhys": 0.22, "damping_time_ps": 1.0}
_MODE_37 = {"omega_cm1": 37.0, "huang_rhys": 0.12, "damping_time_ps": 1.0}


def _fig2_preset(temperature: float, initials: list[str], tag: str) -> dict:
    subruns = []
    for init in initials:
        subruns.append({"name": f"{init.replace('+', '')}_with180", "initial_state": init})
        subruns.append(
            {"name": f"{init.replace('+', '')}_without180",
             "initial_state": init, "drop_mode_cm1": 180.0}
        )
    return {
        "engine": "semiclassical",
        "system": _fmo_system(),
        "bath": _bath([_MODE_180], temperature),
        "semiclassical": {
            "n_traj": 2000 if temperature < 200 else 4000,
            "t_end_ps": 1.5,
        },
        "subruns": subruns,
    }


def _fig3_preset(temperature: float, initials: list[str]) -> dict:
    subruns = []
    for init in initials:
        subruns.append({"name": f"{init.replace('+', '')}_with180", "initial_state": init})
        subruns.append(
            {"name": f"{init.replace('+', '')}_without180",
             "initial_state": init, "drop_mode_cm1": 180.0}
        )
    return {
        "engine": "tedopa",
        "system": {"kind": "dimer", "delta_eps_cm1": 130.0, "j12_cm1": 53.5},
        "bath": _bath([_MODE_37, _MODE_180], temperature),
        "subruns": subruns,
    }


def _fig67_preset(initial: str) -> dict:
    subruns = [
        {"name": f"S{s:.2f}".replace(".", "p"), "set_huang_rhys": [[180.0, s]]}
        for s in (0.0, 0.22, 0.5, 1.0)
    ]
    return {
        "engine": "semiclassical",
        "system": {"kind": "dimer", "delta_eps_cm1": 100.0, "j12_cm1": 86.0},
        "bath": _bath([_MODE_180], 77.0),
        "initial_state": initial,
        "semiclassical": {"n_traj": 500, "t_end_ps": 2.0},
        "subruns": subruns,
    }


PRESETS: dict[str, ExperimentPreset] = {}


def _register(name, engine, description, config, budget):
    PRESETS[name] = ExperimentPreset(name, engine, description, config, budget)


_register(
    "fig2a-77K", "semiclassical",
    "FMO inter-exciton coherence at 77 K, with/without the 180 cm^-1 mode",
    _fig2_preset(77.0, ["e1+e2"], "a"), 600,
)
_register(
    "fig2b-77K", "semiclassical",
    "FMO ground-excited coherences at 77 K, with/without the 180 cm^-1 mode",
    _fig2_preset(77.0, ["e1+g", "e2+g"], "b"), 900,
)
_register(
    "fig2c-277K", "semiclassical",
    "FMO inter-exciton coherence at 277 K",
    _fig2_preset(277.0, ["e1+e2"], "c"), 900,
)
_register(
    "fig2d-277K", "semiclassical",
    "FMO ground-excited coherences at 277 K",
    _fig2_preset(277.0, ["e1+g", "e2+g"], "d"), 1500,
)
_register(
    "fig3a-77K", "tedopa",
    "Exact dimer inter-exciton coherence at 77 K, with/without the 180 cm^-1 mode",
    _fig3_preset(77.0, ["e1+e2"]), 2400,
)
_register(
    "fig3b-77K", "tedopa",
    "Exact dimer ground-excited coherences at 77 K",
    _fig3_preset(77.0, ["e1+g", "e2+g"]), 4200,
)
_register(
    "fig3c-277K", "tedopa",
    "Exact dimer inter-exciton coherence at 277 K",
    _fig3_preset(277.0, ["e1+e2"]), 2400,
)
_register(
    "fig3d-277K", "tedopa",
    "Exact dimer ground-excited coherences at 277 K",
    _fig3_preset(277.0, ["e1+g", "e2+g"]), 4200,
)
_register(
    "fig4-77K", "tedopa",
    "Exact dimer populations, spontaneous coherence and <X1> from |e2><e2| at 77 K",
    {**_fig3_preset(77.0, ["e2"])}, 2400,
)
_register(
    "fig4-277K", "tedopa",
    "Same as fig4-77K with the environment at 277 K",
    {**_fig3_preset(277.0, ["e2"])}, 2400,
)
_register(
    "fig5", "redfield",
    "Transient pure-dephasing suppression curves at 77 K and 277 K",
    {
        "engine": "redfield",
        "system": {"kind": "dimer", "delta_eps_cm1": 130.0, "j12_cm1": 53.5},
        "bath": _bath([], 77.0),
        "initial_state": "e1+g",
        "redfield": {"t_end_ps": 2.0, "n_points": 201},
        "subruns": [
            {"name": "77K", "temperature_K": 77.0},
            {"name": "277K", "temperature_K": 277.0},
        ],
    },
    120,
)
_register(
    "fig6", "semiclassical",
    "Dimer population decay under a Huang-Rhys sweep S in {0, 0.22, 0.5, 1}",
    _fig67_preset("e2"), 1200,
)
_register(
    "fig7", "semiclassical",
    "Spontaneously generated dimer coherence under the same sweep",
    _fig67_preset("e1"), 1200,
)
_register(
    "oracle-dimer-mode", "oracle",
    "Dense exact reference: dimer plus one 180 cm^-1 mode per site at 77 K",
    {
        "engine": "oracle",
        "system": {"kind": "dimer", "delta_eps_cm1": 130.0, "j12_cm1": 53.5},
        "bath": _bath([_MODE_180], 77.0),
        "initial_state": "e1+e2",
        "oracle": {"t_end_ps": 1.0, "n_points": 101, "d_mode": 8},
    },
    60,
)


def list_presets() -> list[ExperimentPreset]:
    return [PRESETS[k] for k in sorted(PRESETS)]


# ---------------------------------------------------------------------------
# Sub-run materialisation
# ---------------------------------------------------------------------------

def _subrun_bath(spec: RunSpec, subrun: dict) -> SpectralDensity:
    modes = list(spec.bath.modes)
    drop = subrun.get("drop_mode_cm1")
    if drop is not None:
        modes = [m for m in modes if m.omega != float(drop)]
    for omega, s in subrun.get("set_huang_rhys", []):
        modes = [
            DiscreteMode(m.omega, float(s), m.damping_time) if m.omega == float(omega) else m
            for m in modes
        ]
    return SpectralDensity(background=spec.bath.background, modes=tuple(modes))


def _initial_density(name: str, basis: ExcitonBasis) -> np.ndarray:
    """|psi><psi| in the [g, e1, ..] basis for the named preparation."""
    dim = basis.n_excitons + 1
    psi = np.zeros(dim, dtype=complex)
    if name.startswith("site"):
        k = int(name[4:])
        if not 1 <= k <= basis.n_excitons:
            raise ConfigError(f"site index out of range in initial state '{name}'")
        site_vec = np.zeros(dim, dtype=complex)
        site_vec[k] = 1.0
        psi = basis.rotation_with_ground().T @ site_vec
    else:
        parts = name.split("+")
        for p in parts:
            if p == "g":
                psi[0] += 1.0
            elif p.startswith("e") and p[1:].isdigit():
                idx = int(p[1:])
                if not 1 <= idx <= basis.n_excitons:
                    raise ConfigError(f"exciton index out of range in '{name}'")
                psi[idx] += 1.0
            else:
                raise ConfigError(f"cannot parse initial state '{name}'")
        psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def _series_from_density(times, rho, x_mean, modes, stderr_re=None) -> tedopa.ObservableSeries:
    """Adapt a DensityMatrixSeries-shaped result to the pinned CSV schema."""
    g = np.array([m.coupling for m in modes])
    if x_mean is not None and g.size:
        x1_modes = x_mean[:, 0, :] @ g
    else:
        x1_modes = np.zeros(len(times))
    data = {
        "re_rho_e1e2": rho[:, 1, 2].real,
        "im_rho_e1e2": rho[:, 1, 2].imag,
        "abs_rho_e1g": np.abs(rho[:, 1, 0]),
        "abs_rho_e2g": np.abs(rho[:, 2, 0]),
        "pop_e1": rho[:, 1, 1].real,
        "pop_e2": rho[:, 2, 2].real,
        "pop_g": rho[:, 0, 0].real,
        "X1_modes": x1_modes,
        "X1_chain": np.zeros(len(times)),
        "X1_total": x1_modes,
        "discarded_weight": np.zeros(len(times)),
    }
    if stderr_re is not None:
        data["stderr_re_rho_e1e2"] = stderr_re[:, 1, 2]
    return tedopa.ObservableSeries(times=np.asarray(times), data=data)


def _fit_summary(series: tedopa.ObservableSeries, window_start: float) -> dict:
    out = {}
    try:
        fit = semiclassical.fit_coherence_lifetime(
            series.times, series.data["re_rho_e1e2"], window_start
        )
        out["tau_ps"] = fit.tau if fit.finite else None
        out["tau_finite"] = fit.finite
        out["fit_residual"] = fit.residual
        out["n_extrema"] = fit.n_extrema
    except InsufficientDataError as exc:
        out["tau_ps"] = None
        out["fit_error"] = str(exc)
    return out


# ---------------------------------------------------------------------------
# Engine dispatchers
# ---------------------------------------------------------------------------

def _run_semiclassical(spec: RunSpec, subrun: dict, seed: int) -> tuple[tedopa.ObservableSeries, dict]:
    opts = spec.engine_options
    sd = _subrun_bath(spec, subrun)
    system = spec.system.shifted() if spec.shift_energies else spec.system
    basis = diagonalize(system)
    init = subrun.get("initial_state", spec.initial_state)
    rho0 = _initial_density(init, basis)
    temperature = float(subrun.get("temperature_K", spec.temperature))
    n_traj = int(opts.get("n_traj", 2000))
    if not sd.modes:
        n_traj = 1  # no stochastic initial data: the ensemble is deterministic
    cfg = semiclassical.TrajectoryConfig(
        n_traj=n_traj,
        seed=seed,
        dt=float(opts.get("dt_ps", 5e-4)),
        t_end=float(opts.get("t_end_ps", 1.5)),
        temperature=temperature,
        save_every=int(opts.get("save_every", 6)),
        batch_size=int(opts.get("batch_size", 500)),
        pure_dephasing=bool(opts.get("pure_dephasing", True)),
        shift_energies=False,  # already applied above
    )
    result = semiclassical.ensemble_average(system, sd, rho0, cfg)
    series = _series_from_density(
        result.times, result.rho, result.mode_displacement, sd.modes, result.stderr_re
    )
    series.metadata = dict(result.metadata)
    summary = _fit_summary(series, float(opts.get("fit_window_start_ps", 0.25)))
    summary["hermiticity_defect"] = result.hermiticity_defect()
    summary["trace_defect"] = result.trace_defect()
    return series, summary


def _run_tedopa(spec: RunSpec, subrun: dict, seed: int) -> tuple[tedopa.ObservableSeries, dict]:
    opts = spec.engine_options
    sd = _subrun_bath(spec, subrun)
    temperature = float(subrun.get("temperature_K", spec.temperature))
    cfg = tedopa.RunConfig(
        temperature=temperature,
        t_end=float(opts.get("t_end_ps", 1.0)),
        dt=float(opts.get("dt_ps", 1e-3)),
        save_every=int(opts.get("save_every", 10)),
        chi_max=int(opts.get("chi_max", 64)),
        weight_threshold=float(opts.get("weight_threshold", 1e-10)),
        n_chain=int(opts.get("n_chain", 30)),
        omega_max=opts.get("omega_max_cm1"),
        d_chain=int(opts.get("d_chain", 3)),
        d_mode=int(opts.get("d_mode", 6)),
        therm_steps=int(opts.get("therm_steps", 64)),
        initial_state=subrun.get("initial_state", spec.initial_state),
    )
    series = tedopa.run(spec.system, sd, cfg)
    summary = _fit_summary(series, 0.25)
    summary["max_bond_dim"] = series.metadata["max_bond_dim"]
    summary["cumulative_discarded"] = series.metadata["cumulative_discarded"]
    summary["final_last_site_occupation"] = max(
        series.data["left_last_occupation"][-1], series.data["right_last_occupation"][-1]
    )
    return series, summary


def _run_redfield(spec: RunSpec, subrun: dict, seed: int) -> tuple[tedopa.ObservableSeries, dict]:
    opts = spec.engine_options
    sd = _subrun_bath(spec, subrun)
    temperature = float(subrun.get("temperature_K", spec.temperature))
    system = spec.system.shifted() if spec.shift_energies else spec.system
    basis = diagonalize(system)
    from .exciton import coupling_coefficients

    k = coupling_coefficients(basis)
    t_grid = np.linspace(0.0, float(opts.get("t_end_ps", 2.0)), int(opts.get("n_points", 201)))
    tensor = redfield.assemble_secular_tensor(basis, k, sd, temperature, t_grid)
    init = subrun.get("initial_state", spec.initial_state)
    rho0 = _initial_density(init, basis)
    rho = redfield.propagate(
        tensor, rho0, t_grid, pure_dephasing=bool(opts.get("pure_dephasing", True))
    )
    series = _series_from_density(t_grid, rho, None, sd.modes)
    summary = {
        "suppression_plateau": float(np.exp(-tensor.profile.exponent[-1])),
        "lifetimes_ps": [tensor.rates.lifetime(n) for n in range(basis.n_excitons)],
    }
    series.data["suppression"] = np.exp(-tensor.profile.exponent)
    return series, summary


def _run_oracle(spec: RunSpec, subrun: dict, seed: int) -> tuple[tedopa.ObservableSeries, dict]:
    opts = spec.engine_options
    sd = _subrun_bath(spec, subrun)
    temperature = float(subrun.get("temperature_K", spec.temperature))
    d = int(opts.get("d_mode", 8))
    oscs = []
    for site in (1, 2):
        for m in sd.modes:
            oscs.append(oracles.DenseOscillator(site=site, omega=m.omega, coupling=m.coupling, dim=d))
    model = oracles.build_dense_model(spec.system, oscs)
    basis = diagonalize(spec.system)
    init = subrun.get("initial_state", spec.initial_state)
    rho0_exc = _initial_density(init, basis)
    w = basis.rotation_with_ground()
    rho0_site = w @ rho0_exc @ w.T
    rho0 = oracles.dense_thermal_state(model, rho0_site, temperature)
    t_grid = np.linspace(0.0, float(opts.get("t_end_ps", 1.0)), int(opts.get("n_points", 101)))
    red = oracles.dense_evolve(model, rho0, t_grid)
    rho_exc = np.einsum("ab,tbc,cd->tad", w.T, red, w)
    series = _series_from_density(t_grid, rho_exc, None, sd.modes)
    return series, {"dense_dim": model.dim}


_ENGINES = {
    "semiclassical": _run_semiclassical,
    "tedopa": _run_tedopa,
    "redfield": _run_redfield,
    "oracle": _run_oracle,
}


def run_preset(name_or_config, overrides: list[str] | None = None,
               master_seed: int = 2024, out_dir="runs") -> Path:
    """Execute a preset (or a config file) and write its artifact directory."""
    overrides = overrides or []
    if isinstance(name_or_config, str) and name_or_config in PRESETS:
        preset = PRESETS[name_or_config]
        raw = json.loads(json.dumps(preset.config))
        run_name = preset.name
    else:
        raw = validate_config(name_or_config).raw
        run_name = Path(str(name_or_config)).stem
    raw = apply_overrides(raw, overrides)
    spec = validate_config(raw)

    out = Path(out_dir) / run_name
    out.mkdir(parents=True, exist_ok=True)
    snapshot = dict(raw)
    snapshot["_master_seed"] = master_seed
    (out / "config_snapshot.json").write_text(json.dumps(snapshot, indent=1, sort_keys=True))

    summary = {
        "preset": run_name,
        "config_hash": config_hash(raw),
        "master_seed": master_seed,
        "subruns": {},
    }
    t0 = time.time()
    runner = _ENGINES[spec.engine]
    for subrun in spec.subruns:
        t_sub = time.time()
        series, sub_summary = runner(spec, subrun, master_seed)
        csv_path = out / f"{run_name}__{subrun['name']}.csv"
        series.to_csv(csv_path)
        if "suppression" in series.data:
            sup_path = out / f"{run_name}__{subrun['name']}__suppression.csv"
            with open(sup_path, "w") as f:
                f.write("t_fs,suppression\n")
                for t, s in zip(series.times, series.data["suppression"]):
                    f.write(f"{t*1e3:.12e},{s:.12e}\n")
        sub_summary["runtime_s"] = time.time() - t_sub
        sub_summary["csv"] = csv_path.name
        summary["subruns"][subrun["name"]] = sub_summary
    summary["runtime_s"] = time.time() - t0
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    return out
