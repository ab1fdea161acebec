"""Coupled exciton / classical-mode trajectory dynamics with ensembles.

Each discrete vibrational mode is a classical oscillator per site, driven by
the exciton density matrix and damping back-action on it through the
time-dependent couplings

    Q_nm(t) = sum_{i,k} sqrt(S_k) w_k K_nm^i X_ik(t),

while the smooth background enters through the secular Redfield tensor with
its transient pure-dephasing rate.  Mode initial conditions are sampled from
the quantum thermal distribution; observables are ensemble averages over
trajectories.

All trajectories of a batch are integrated simultaneously (fixed-step RK4,
state shape (batch, ...)), which keeps the ensemble loop inside numpy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, IntegrationError
from .exciton import ExcitonBasis, SiteHamiltonian, coupling_coefficients, diagonalize
from .redfield import SecularTensor, _DephasingKernel, assemble_secular_tensor
from .spectral import RAD_PS_PER_CM1, SpectralDensity, thermal_variance

U = RAD_PS_PER_CM1


@dataclass(frozen=True)
class TrajectoryConfig:
    """Ensemble integration settings.

    ``dt`` must resolve the fastest frequency in the problem
    (dt <= 2 pi / (20 * u * omega_max)); mode damping enters the momentum
    equation as -2*gamma*p with gamma = 1/(2 * damping_time).
    """

    n_traj: int = 2000
    seed: int = 2024
    dt: float = 0.25e-3
    t_end: float = 1.5
    temperature: float = 77.0
    save_every: int = 4
    batch_size: int = 500
    shift_energies: bool = True
    pure_dephasing: bool = True

    def time_grid(self) -> np.ndarray:
        n_steps = int(round(self.t_end / self.dt))
        return self.dt * np.arange(0, n_steps + 1)


@dataclass
class DensityMatrixSeries:
    """Time series of the exciton-basis density matrix [g, e1, .., eN]."""

    times: np.ndarray
    rho: np.ndarray
    stderr_re: np.ndarray | None = None
    stderr_im: np.ndarray | None = None
    mode_displacement: np.ndarray | None = None  # ensemble mean X_ik per save point
    metadata: dict = field(default_factory=dict)

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.rho - np.conj(np.swapaxes(self.rho, 1, 2))).max())

    def trace_defect(self) -> float:
        tr = np.einsum("tnn->t", self.rho).real
        return float(np.abs(tr - tr[0]).max())

    def observable(self, name: str) -> np.ndarray:
        """Named scalar observables used by the CSV writer and fits."""
        if name == "re_rho_e1e2":
            return self.rho[:, 1, 2].real
        if name == "im_rho_e1e2":
            return self.rho[:, 1, 2].imag
        if name == "abs_rho_e1g":
            return np.abs(self.rho[:, 1, 0])
        if name == "abs_rho_e2g":
            return np.abs(self.rho[:, 2, 0])
        if name == "pop_g":
            return self.rho[:, 0, 0].real
        if name.startswith("pop_e"):
            n = int(name[5:])
            return self.rho[:, n, n].real
        raise KeyError(name)


class _Model:
    """Precomputed arrays shared by every trajectory of a run."""

    def __init__(self, h: SiteHamiltonian, sd: SpectralDensity, cfg: TrajectoryConfig):
        if cfg.shift_energies:
            h = h.shifted()
        self.h = h
        self.sd = sd
        self.basis: ExcitonBasis = diagonalize(h)
        self.k_site = coupling_coefficients(self.basis)
        n_sites = h.n_sites
        self.dim = self.basis.n_excitons + 1
        self.e_full = np.concatenate(([0.0], self.basis.energies))

        modes = sd.modes
        self.n_modes = len(modes)
        self.omega_k = np.array([m.omega for m in modes])
        self.g_k = np.array([m.coupling for m in modes])  # sqrt(S) * omega
        self.gamma_k = np.array([0.5 / m.damping_time for m in modes])
        self.sigma_k = np.array(
            [math.sqrt(thermal_variance(m.omega, cfg.temperature)) for m in modes]
        )

        # K embedded with the ground level (no environment coupling there)
        self.k_full = np.zeros((n_sites, self.dim, self.dim))
        self.k_full[:, 1:, 1:] = self.k_site

        fastest = max(
            [m.omega for m in modes] + [abs(e) for e in self.e_full] + [1.0]
        )
        if cfg.dt > 2.0 * math.pi / (20.0 * U * fastest):
            raise ValueError(
                f"dt = {cfg.dt} ps does not resolve the fastest frequency "
                f"{fastest:.1f} cm^-1; need dt <= {2*math.pi/(20*U*fastest):.2e} ps"
            )

        grid = cfg.time_grid()
        self.tensor: SecularTensor = assemble_secular_tensor(
            self.basis, self.k_site, sd, cfg.temperature, grid
        )
        self.generator = self.tensor.rates.generator()
        self.coh_gamma = self.tensor.coherence_gamma
        self.kappa = self.tensor.kappa
        if cfg.pure_dephasing:
            kernel = _DephasingKernel(sd, cfg.temperature)
            stage_times = np.concatenate([grid, grid[:-1] + 0.5 * cfg.dt])
            stage_times = np.unique(stage_times)
            self._rate_times = stage_times
            self._rate_values = kernel.rate(stage_times)
        else:
            self._rate_times = grid
            self._rate_values = np.zeros_like(grid)

    def base_rate(self, t: float) -> float:
        return float(np.interp(t, self._rate_times, self._rate_values))

    def rhs(self, rho, x, p, base_rate: float):
        """Time derivatives for a batch: rho (B,M,M), x/p (B,n_sites,n_modes)."""
        xk = x @ self.g_k  # (B, n_sites)
        q = np.einsum("bi,inm->bnm", xk, self.k_full)
        h_rho = q @ rho + self.e_full[None, :, None] * rho
        rho_h = rho @ q + rho * self.e_full[None, None, :]
        drho = -1j * U * (h_rho - rho_h)

        decay = self.coh_gamma + self.kappa * base_rate
        drho -= decay[None, :, :] * rho

        pe = np.einsum("bnn->bn", rho).real[:, 1:]
        dpop = pe @ self.generator.T
        idx = np.arange(1, self.dim)
        drho[:, idx, idx] += dpop

        force = np.einsum("inm,bnm->bi", self.k_full, rho.real)
        dx = U * self.omega_k[None, None, :] * p
        dp = (
            -U * self.omega_k[None, None, :] * x
            - 2.0 * self.gamma_k[None, None, :] * p
            + 2.0 * U * self.g_k[None, None, :] * force[:, :, None]
        )
        return drho, dx, dp


def mode_rhs(x, p, rho, k_full, omega_k, g_k, gamma_k):
    """Classical mode derivatives (single trajectory); exposed for testing.

    x_dot = u w p ; p_dot = -u w x - 2 gamma p + 2 u sqrt(S) w * drive, with
    drive = sum_nm K_nm^i Re rho_nm (populations plus coherence cross terms).
    """
    force = np.einsum("inm,nm->i", k_full, np.asarray(rho).real)
    dx = U * omega_k * p
    dp = -U * omega_k * x - 2.0 * gamma_k * p + 2.0 * U * g_k * force[:, None]
    return dx, dp


def exciton_rhs(rho, q, e_full, generator=None, coh_gamma=None, kappa=None, base_rate=0.0):
    """d rho / dt for a single density matrix under H = diag(E) + Q plus the
    secular dissipator; exposed for testing."""
    rho = np.asarray(rho, dtype=complex)
    if q.shape != rho.shape:
        raise ValueError("coupling matrix Q and rho must share dimensions")
    h = np.diag(e_full) + q
    drho = -1j * U * (h @ rho - rho @ h)
    if coh_gamma is not None:
        decay = coh_gamma + (kappa if kappa is not None else 0.0) * base_rate
        drho -= decay * rho
    if generator is not None:
        pe = np.diag(rho).real[1:]
        idx = np.arange(1, rho.shape[0])
        drho[idx, idx] += pe @ generator.T
    return drho


def _integrate_batch(model: _Model, cfg: TrajectoryConfig, rho0, x0, p0, t_grid, save_idx):
    """Fixed-step RK4 over one batch; returns rho and x at the save points."""
    batch = x0.shape[0]
    rho = np.broadcast_to(rho0, (batch,) + rho0.shape).astype(complex).copy()
    x = x0.copy()
    p = p0.copy()
    dt = cfg.dt
    saves_rho = np.empty((len(save_idx),) + rho.shape, dtype=complex)
    saves_x = np.empty((len(save_idx),) + x.shape)
    save_pos = {s: j for j, s in enumerate(save_idx)}
    if 0 in save_pos:
        saves_rho[0] = rho
        saves_x[0] = x
    for step in range(t_grid.size - 1):
        t = t_grid[step]
        g0 = model.base_rate(t)
        gh = model.base_rate(t + 0.5 * dt)
        g1 = model.base_rate(t + dt)
        k1 = model.rhs(rho, x, p, g0)
        k2 = model.rhs(rho + 0.5 * dt * k1[0], x + 0.5 * dt * k1[1], p + 0.5 * dt * k1[2], gh)
        k3 = model.rhs(rho + 0.5 * dt * k2[0], x + 0.5 * dt * k2[1], p + 0.5 * dt * k2[2], gh)
        k4 = model.rhs(rho + dt * k3[0], x + dt * k3[1], p + dt * k3[2], g1)
        rho = rho + (dt / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        x = x + (dt / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        p = p + (dt / 6.0) * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        j = save_pos.get(step + 1)
        if j is not None:
            saves_rho[j] = rho
            saves_x[j] = x
    if not np.isfinite(saves_rho[-1]).all():
        raise IntegrationError("non-finite state at end of batch", trajectory=0)
    return saves_rho, saves_x


def _sample_initial(model: _Model, cfg: TrajectoryConfig, traj_indices) -> tuple[np.ndarray, np.ndarray]:
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_traj)
    xs, ps = [], []
    shape = (model.h.n_sites, model.n_modes)
    for i in traj_indices:
        rng = np.random.Generator(np.random.PCG64(children[i]))
        x = rng.normal(0.0, 1.0, size=shape) * model.sigma_k[None, :]
        p = rng.normal(0.0, 1.0, size=shape) * model.sigma_k[None, :]
        xs.append(x)
        ps.append(p)
    return np.array(xs), np.array(ps)


def propagate_trajectory(h: SiteHamiltonian, sd: SpectralDensity, rho0: np.ndarray,
                         cfg: TrajectoryConfig, trajectory: int = 0) -> DensityMatrixSeries:
    """Integrate a single thermal-sample trajectory (trajectory index selects
    the per-trajectory seed stream)."""
    model = _Model(h, sd, cfg)
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (model.dim, model.dim):
        raise ValueError(f"rho0 must be {model.dim}x{model.dim} in the [g, e..] basis")
    t_grid = cfg.time_grid()
    save_idx = list(range(0, t_grid.size, cfg.save_every))
    if save_idx[-1] != t_grid.size - 1:
        save_idx.append(t_grid.size - 1)
    x0, p0 = _sample_initial(model, cfg, [trajectory])
    try:
        rho_t, x_t = _integrate_batch(model, cfg, rho0, x0, p0, t_grid, save_idx)
    except IntegrationError as exc:
        raise IntegrationError(str(exc), trajectory=trajectory) from exc
    return DensityMatrixSeries(
        times=t_grid[save_idx],
        rho=rho_t[:, 0],
        mode_displacement=x_t[:, 0],
        metadata={"n_traj": 1, "seed": cfg.seed, "trajectory": trajectory},
    )


def ensemble_average(h: SiteHamiltonian, sd: SpectralDensity, rho0: np.ndarray,
                     cfg: TrajectoryConfig) -> DensityMatrixSeries:
    """Pointwise ensemble mean over ``cfg.n_traj`` thermal trajectories.

    Trajectory seeds come from a splittable SeedSequence; batches are reduced
    in a fixed order, so results do not depend on batch size placement and
    repeat bit-exactly for a given master seed.
    """
    model = _Model(h, sd, cfg)
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (model.dim, model.dim):
        raise ValueError(f"rho0 must be {model.dim}x{model.dim} in the [g, e..] basis")
    t_grid = cfg.time_grid()
    save_idx = list(range(0, t_grid.size, cfg.save_every))
    if save_idx[-1] != t_grid.size - 1:
        save_idx.append(t_grid.size - 1)
    n_save = len(save_idx)

    sum_rho = np.zeros((n_save, model.dim, model.dim), dtype=complex)
    sum_re2 = np.zeros((n_save, model.dim, model.dim))
    sum_im2 = np.zeros((n_save, model.dim, model.dim))
    sum_x = np.zeros((n_save, model.h.n_sites, model.n_modes))

    for start in range(0, cfg.n_traj, cfg.batch_size):
        idx = range(start, min(start + cfg.batch_size, cfg.n_traj))
        x0, p0 = _sample_initial(model, cfg, idx)
        try:
            rho_t, x_t = _integrate_batch(model, cfg, rho0, x0, p0, t_grid, save_idx)
        except IntegrationError as exc:
            raise IntegrationError(str(exc), trajectory=start) from exc
        sum_rho += rho_t.sum(axis=1)
        sum_re2 += (rho_t.real**2).sum(axis=1)
        sum_im2 += (rho_t.imag**2).sum(axis=1)
        sum_x += x_t.sum(axis=1)

    n = cfg.n_traj
    mean = sum_rho / n
    var_re = np.maximum(sum_re2 / n - mean.real**2, 0.0)
    var_im = np.maximum(sum_im2 / n - mean.imag**2, 0.0)
    denom = max(n - 1, 1)
    return DensityMatrixSeries(
        times=t_grid[save_idx],
        rho=mean,
        stderr_re=np.sqrt(var_re * n / denom / n),
        stderr_im=np.sqrt(var_im * n / denom / n),
        mode_displacement=sum_x / n,
        metadata={
            "n_traj": n,
            "seed": cfg.seed,
            "temperature_K": cfg.temperature,
            "dt_ps": cfg.dt,
            "config": json.dumps(
                {"n_traj": n, "seed": cfg.seed, "dt": cfg.dt, "t_end": cfg.t_end,
                 "T": cfg.temperature}, sort_keys=True),
        },
    )


@dataclass(frozen=True)
class CoherenceFit:
    """Envelope decay time of an oscillatory coherence."""

    tau: float
    residual: float
    n_extrema: int
    finite: bool


def fit_coherence_lifetime(times, values, window_start: float,
                           slope_tol: float = 1e-3, floor: float = 1e-9) -> CoherenceFit:
    """Exponential fit to the |extrema| envelope of an oscillatory signal.

    Least squares on the log of the local extremal magnitudes inside
    [window_start, end].  An essentially flat envelope (decay slower than
    ``slope_tol`` per ps) is flagged as non-finite (undamped).
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    mask = t >= window_start
    t, y = t[mask], y[mask]
    if t.size < 5:
        raise InsufficientDataError("window contains too few samples")
    dy = np.diff(y)
    sign_change = np.where(dy[:-1] * dy[1:] < 0)[0] + 1
    ext_t = t[sign_change]
    ext_y = np.abs(y[sign_change])
    keep = ext_y > floor
    ext_t, ext_y = ext_t[keep], ext_y[keep]
    if ext_y.size < 4:
        raise InsufficientDataError(
            f"found only {ext_y.size} usable extrema after {window_start} ps; need >= 4"
        )
    coeffs, *_ = np.linalg.lstsq(
        np.column_stack([ext_t, np.ones_like(ext_t)]), np.log(ext_y), rcond=None
    )
    slope = coeffs[0]
    pred = ext_t * slope + coeffs[1]
    residual = float(np.sqrt(np.mean((np.log(ext_y) - pred) ** 2)))
    if slope >= -slope_tol:
        return CoherenceFit(tau=float("inf"), residual=residual,
                            n_extrema=ext_y.size, finite=False)
    return CoherenceFit(tau=float(-1.0 / slope), residual=residual,
                        n_extrema=ext_y.size, finite=True)
