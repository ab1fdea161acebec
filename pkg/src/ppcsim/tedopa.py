"""Network assembly and finite-temperature runs of the chain-mapped model.

Layout: a strictly linear network [site-1 environment (reversed), electronic
block, site-2 environment], with the electronic block {|g>, |1>, |2>} one
3-dimensional MPS site.  Every Hamiltonian term must be nearest-neighbour.

Each site's environment consists of its explicit discrete modes plus the
chain-mapped background, all physically coupled to the same projector
|i><i|.  A strictly linear layout cannot host several of these couplings at
once, so the assembly merges each side's one-body environment matrix
(modes + chain) by an exact orthogonal Lanczos rotation seeded with the
system-coupling vector.  The merged chain couples to the block through its
entry site only, with strength |v| = sqrt(sum g_k^2 + c0^2); hops between
the mode-dominated entry region and the background chain are the rotation's
couplings.  The rotation matrix is stored, so mode-resolved displacements
(linear observables) remain exactly measurable; with no background the
merged chain degenerates to the bare modes, with no modes to the bare chain.

Environment oscillators are purified (physical x ancilla) and thermalised
by imaginary-time evolution before the system coupling is switched on.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .chainmap import ChainCoefficients, lanczos_tridiagonalize, map_background
from .errors import LayoutError
from .exciton import ExcitonBasis, SiteHamiltonian, diagonalize
from .mps import (
    MPS,
    TruncationPolicy,
    build_trotter_plan,
    infinite_temperature_vector,
    lift_bond,
    lift_single,
    thermalize,
    trotter_block,
)
from .spectral import KB_CM1_PER_K, RAD_PS_PER_CM1, SpectralDensity


def _osc_ops(d: int):
    a = np.diag(np.sqrt(np.arange(1, d)), k=1)
    return a, a.T.copy(), np.diag(np.arange(d, dtype=float))


# ---------------------------------------------------------------------------
# Environment branches and the network layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnvBranch:
    """Merged (modes + chain) environment of one electronic site.

    ``rotation[r, j]`` expresses original DOF r (modes first, then chain
    sites) in terms of merged site j; the system couples to merged site 0
    with strength ``entry_coupling``.
    """

    frequencies: np.ndarray
    hops: np.ndarray
    entry_coupling: float
    rotation: np.ndarray
    mode_couplings: np.ndarray  # g_k of the original discrete modes
    chain_coupling: float  # c0 of the background chain (0 if absent)
    dims: tuple[int, ...]  # physical dimension per merged site

    @property
    def n_sites(self) -> int:
        return self.frequencies.size


def merge_environment(modes, chain: ChainCoefficients | None,
                      d_mode: int, d_chain: int,
                      mode_weight_threshold: float = 0.25) -> EnvBranch | None:
    """Exact one-body tridiagonalisation of [discrete modes + chain]."""
    mode_freqs = np.array([m.omega for m in modes], dtype=float)
    mode_g = np.array([m.coupling for m in modes], dtype=float)
    n_modes = mode_freqs.size
    n_chain = chain.length if chain is not None else 0
    n_env = n_modes + n_chain
    if n_env == 0:
        return None
    m = np.zeros((n_env, n_env))
    v = np.zeros(n_env)
    m[:n_modes, :n_modes] = np.diag(mode_freqs)
    v[:n_modes] = mode_g
    if chain is not None:
        block = slice(n_modes, n_env)
        m[block, block] = chain.jacobi_matrix()
        v[n_modes] = chain.system_coupling
    alpha, beta, q = lanczos_tridiagonalize(m, v, n_env)
    weights = (q[:n_modes, :] ** 2).sum(axis=0) if n_modes else np.zeros(n_env)
    dims = tuple(d_mode if w >= mode_weight_threshold else d_chain for w in weights)
    return EnvBranch(
        frequencies=alpha,
        hops=np.sqrt(beta[1:n_env]),
        entry_coupling=float(np.sqrt(beta[0])),
        rotation=q,
        mode_couplings=mode_g,
        chain_coupling=chain.system_coupling if chain is not None else 0.0,
        dims=dims,
    )


@dataclass(frozen=True)
class NetworkLayout:
    """Linear ordering [left env reversed | electronic block | right env]."""

    left: EnvBranch | None
    right: EnvBranch | None
    system_index: int
    site_dims: tuple[int, ...]  # MPS dimensions (purified env, bare system)
    phys_dims: tuple[int, ...]  # physical dimensions before purification

    @property
    def n_sites(self) -> int:
        return len(self.site_dims)

    def env_mps_index(self, side: str, j: int) -> int:
        """MPS index of merged env site j (j = 0 adjacent to the block)."""
        if side == "left":
            return self.system_index - 1 - j
        return self.system_index + 1 + j


def validate_nearest_neighbour(n_sites: int, bond_terms: dict[int, np.ndarray]):
    for i in bond_terms:
        if not 0 <= i < n_sites - 1:
            raise LayoutError(
                f"bond term at {i} does not connect nearest neighbours in a "
                f"{n_sites}-site chain"
            )


@dataclass
class Network:
    """Layout plus Hamiltonian terms, ready for plan building."""

    layout: NetworkLayout
    bond_terms: dict[int, np.ndarray]
    site_terms: dict[int, np.ndarray]
    env_bond_terms: dict[int, np.ndarray]
    env_site_terms: dict[int, np.ndarray]
    basis: ExcitonBasis
    h_site: SiteHamiltonian


@dataclass(frozen=True)
class RunConfig:
    """Exact-engine run settings (desk-scale defaults).

    The paper-scale profile (49 chain sites, bond dimension 320) is the
    ``paper_scale()`` variant; it needs cluster-class resources.
    """

    temperature: float = 77.0
    t_end: float = 1.0
    dt: float = 1.0e-3
    save_every: int = 10
    chi_max: int = 64
    weight_threshold: float = 1e-9
    hard_limit: float = 1e-2
    n_chain: int = 30
    omega_max: float | None = None
    d_chain: int = 3
    d_mode: int = 6
    therm_steps: int = 32
    initial_state: str = "e1+e2"
    n_quad: int | None = None
    sides: str = "both"  # attach environments to both sites or one only

    def __post_init__(self):
        if self.sides not in ("both", "left", "right"):
            raise ValueError("sides must be 'both', 'left' or 'right'")

    @classmethod
    def paper_scale(cls, **overrides) -> "RunConfig":
        base = dict(n_chain=49, chi_max=320, d_chain=3)
        base.update(overrides)
        return cls(**base)


def exciton_amplitudes(name: str, dim: int = 3) -> np.ndarray:
    """Named electronic preparations as exciton-basis amplitudes [g, e1, e2]."""
    states = {
        "e1": [0, 1, 0],
        "e2": [0, 0, 1],
        "e1+e2": [0, 1, 1],
        "e1+g": [1, 1, 0],
        "e2+g": [1, 0, 1],
        "g": [1, 0, 0],
    }
    if name not in states:
        raise ValueError(f"unknown initial state '{name}'; one of {sorted(states)}")
    v = np.asarray(states[name], dtype=complex)
    return v / np.linalg.norm(v)


def assemble(h: SiteHamiltonian, sd: SpectralDensity, cfg: RunConfig,
             chain: ChainCoefficients | None = None) -> Network:
    """Build the linear network and all nearest-neighbour gate generators."""
    if h.n_sites != 2:
        raise LayoutError("the exact engine supports the dimer network only")
    basis = diagonalize(h)
    if chain is None and sd.background is not None and sd.background.lam > 0:
        chain = map_background(
            sd.background, cfg.n_chain, n_quad=cfg.n_quad, omega_max=cfg.omega_max
        )
    branch = merge_environment(sd.modes, chain, cfg.d_mode, cfg.d_chain)
    left = branch if cfg.sides in ("both", "left") else None
    right = branch if cfg.sides in ("both", "right") else None
    n_left = left.n_sites if left else 0
    n_right = right.n_sites if right else 0
    sys_idx = n_left

    phys_dims = (
        tuple(reversed(left.dims)) if left else ()
    ) + (3,) + (right.dims if right else ())
    site_dims = tuple(
        d * d if i != sys_idx else d
        for i, d in enumerate(phys_dims)
    )
    layout = NetworkLayout(
        left=left, right=right, system_index=sys_idx,
        site_dims=site_dims, phys_dims=phys_dims,
    )

    bond_terms: dict[int, np.ndarray] = {}
    site_terms: dict[int, np.ndarray] = {}
    env_bond_terms: dict[int, np.ndarray] = {}
    env_site_terms: dict[int, np.ndarray] = {}

    site_terms[sys_idx] = h.full_matrix().astype(complex)

    for side, branch in (("left", left), ("right", right)):
        if branch is None:
            continue
        for j in range(branch.n_sites):
            idx = layout.env_mps_index(side, j)
            d = branch.dims[j]
            _, _, n_op = _osc_ops(d)
            term = lift_single(branch.frequencies[j] * n_op)
            env_site_terms[idx] = term
            site_terms[idx] = term
        for j in range(branch.n_sites - 1):
            ia = layout.env_mps_index(side, j)
            ib = layout.env_mps_index(side, j + 1)
            lo, hi = min(ia, ib), max(ia, ib)
            d_lo, d_hi = layout.phys_dims[lo], layout.phys_dims[hi]
            a_lo, adag_lo, _ = _osc_ops(d_lo)
            a_hi, adag_hi, _ = _osc_ops(d_hi)
            hop = branch.hops[j] * (np.kron(adag_lo, a_hi) + np.kron(a_lo, adag_hi))
            term = lift_bond(hop, d_lo, d_hi, purified=(True, True))
            env_bond_terms[lo] = env_bond_terms.get(lo, 0.0) + term
            bond_terms[lo] = bond_terms.get(lo, 0.0) + term

        # block-entry coupling |i><i| (x) (a + a^dag)
        entry = layout.env_mps_index(side, 0)
        d_env = layout.phys_dims[entry]
        a, adag, _ = _osc_ops(d_env)
        x_op = a + adag
        proj = np.zeros((3, 3))
        proj[1 if side == "left" else 2, 1 if side == "left" else 2] = 1.0
        if side == "left":
            coupling = branch.entry_coupling * np.kron(x_op, proj)
            term = lift_bond(coupling, d_env, 3, purified=(True, False))
            bond_terms[entry] = bond_terms.get(entry, 0.0) + term
        else:
            coupling = branch.entry_coupling * np.kron(proj, x_op)
            term = lift_bond(coupling, 3, d_env, purified=(False, True))
            bond_terms[sys_idx] = bond_terms.get(sys_idx, 0.0) + term

    validate_nearest_neighbour(layout.n_sites, bond_terms)
    return Network(
        layout=layout,
        bond_terms=bond_terms,
        site_terms=site_terms,
        env_bond_terms=env_bond_terms,
        env_site_terms=env_site_terms,
        basis=basis,
        h_site=h,
    )


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------

OBSERVABLE_COLUMNS = [
    "t_fs",
    "re_rho_e1e2",
    "im_rho_e1e2",
    "abs_rho_e1g",
    "abs_rho_e2g",
    "pop_e1",
    "pop_e2",
    "pop_g",
    "X1_modes",
    "X1_chain",
    "X1_total",
    "discarded_weight",
]


@dataclass
class ObservableSeries:
    """Named time series with run metadata; CSV columns are pinned."""

    times: np.ndarray  # ps
    data: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        if name == "t_fs":
            return self.times * 1e3
        return self.data[name]

    def to_csv(self, path):
        cols = [self.column(c) for c in OBSERVABLE_COLUMNS]
        with open(path, "w") as f:
            f.write(",".join(OBSERVABLE_COLUMNS) + "\n")
            for row in zip(*cols):
                f.write(",".join(f"{x:.12e}" for x in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "ObservableSeries":
        raw = np.genfromtxt(path, delimiter=",", names=True)
        names = raw.dtype.names
        times = raw["t_fs"] / 1e3
        data = {n: np.atleast_1d(raw[n]) for n in names if n != "t_fs"}
        return cls(times=np.atleast_1d(times), data=data)


def collective_coordinate(state: MPS, network: Network, side: str = "left") -> dict:
    """Components of <X_site>: discrete-mode part, chain-entry part, total.

    Original-DOF displacements are linear, so they follow from the merged
    sites' displacements through the stored orthogonal rotation.
    """
    branch = network.layout.left if side == "left" else network.layout.right
    if branch is None:
        return {"modes": 0.0, "chain": 0.0, "total": 0.0}
    disp = np.empty(branch.n_sites)
    ops = {}
    for j in range(branch.n_sites):
        idx = network.layout.env_mps_index(side, j)
        d = network.layout.phys_dims[idx]
        a, adag, _ = _osc_ops(d)
        ops[idx] = lift_single(a + adag)
    measured = state.expectations(ops)
    for j in range(branch.n_sites):
        disp[j] = measured[network.layout.env_mps_index(side, j)].real
    n_modes = branch.mode_couplings.size
    modes_part = float(branch.mode_couplings @ (branch.rotation[:n_modes, :] @ disp)) if n_modes else 0.0
    chain_part = (
        float(branch.chain_coupling * (branch.rotation[n_modes, :] @ disp))
        if branch.chain_coupling
        else 0.0
    )
    total = float(branch.entry_coupling * disp[0])
    return {"modes": modes_part, "chain": chain_part, "total": total}


def _measure(state: MPS, network: Network) -> dict:
    lay = network.layout
    rho_site = state.reduced_density(lay.system_index)
    w = network.basis.rotation_with_ground()
    rho_exc = w.T @ rho_site @ w
    tr = np.trace(rho_exc).real
    x1 = collective_coordinate(state, network, "left")
    out = {
        "re_rho_e1e2": rho_exc[1, 2].real,
        "im_rho_e1e2": rho_exc[1, 2].imag,
        "abs_rho_e1g": float(np.abs(rho_exc[1, 0])),
        "abs_rho_e2g": float(np.abs(rho_exc[2, 0])),
        "pop_e1": rho_exc[1, 1].real,
        "pop_e2": rho_exc[2, 2].real,
        "pop_g": rho_exc[0, 0].real,
        "X1_modes": x1["modes"],
        "X1_chain": x1["chain"],
        "X1_total": x1["total"],
        "trace": tr,
    }
    # diagnostics: last-site occupation and top-level population per branch
    for side, branch in (("left", lay.left), ("right", lay.right)):
        if branch is None:
            out[f"{side}_last_occupation"] = 0.0
            out[f"{side}_top_level"] = 0.0
            continue
        last = lay.env_mps_index(side, branch.n_sites - 1)
        entry = lay.env_mps_index(side, 0)
        d_last = lay.phys_dims[last]
        d_entry = lay.phys_dims[entry]
        _, _, n_last = _osc_ops(d_last)
        top = np.zeros((d_entry, d_entry))
        top[d_entry - 1, d_entry - 1] = 1.0
        out[f"{side}_last_occupation"] = state.expectation(last, lift_single(n_last)).real
        out[f"{side}_top_level"] = state.expectation(entry, lift_single(top)).real
    return out


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

def initial_state(network: Network, cfg: RunConfig) -> MPS:
    """Product of the chosen exciton state and per-site env purifications."""
    lay = network.layout
    vectors = []
    for i, d_phys in enumerate(lay.phys_dims):
        if i == lay.system_index:
            amp = exciton_amplitudes(cfg.initial_state)
            vectors.append(network.basis.state_in_site_basis(amp))
        elif cfg.temperature == 0.0:
            v = np.zeros(d_phys * d_phys, dtype=complex)
            v[0] = 1.0  # |0>|0>: purified vacuum
            vectors.append(v)
        else:
            vectors.append(infinite_temperature_vector(d_phys))
    return MPS.product(vectors)


def thermalize_environment(state: MPS, network: Network, cfg: RunConfig,
                           policy: TruncationPolicy) -> MPS:
    """Imaginary-time preparation of the uncoupled thermal environment."""
    if cfg.temperature == 0.0:
        return state
    beta = 1.0 / (KB_CM1_PER_K * cfg.temperature)
    return thermalize(
        state,
        list(network.layout.site_dims),
        network.env_bond_terms,
        {k: v for k, v in network.env_site_terms.items()},
        beta,
        cfg.therm_steps,
        policy,
    )


def run(h: SiteHamiltonian, sd: SpectralDensity, cfg: RunConfig,
        chain: ChainCoefficients | None = None,
        checkpoint_every: int | None = None,
        checkpoint_path=None) -> ObservableSeries:
    """Thermalise, switch on the coupling, evolve, record observables."""
    t_start = time.time()
    network = assemble(h, sd, cfg, chain=chain)
    policy = TruncationPolicy(
        chi_max=cfg.chi_max, weight_threshold=cfg.weight_threshold,
        hard_limit=cfg.hard_limit,
    )
    state = initial_state(network, cfg)
    thermalize_environment(state, network, cfg, policy)

    n_steps = int(round(cfg.t_end / cfg.dt))
    plan = build_trotter_plan(
        list(network.layout.site_dims),
        network.bond_terms,
        network.site_terms,
        -1j * RAD_PS_PER_CM1 * cfg.dt,
    )
    save_steps = list(range(0, n_steps + 1, cfg.save_every))
    if save_steps[-1] != n_steps:
        save_steps.append(n_steps)
    rows = []
    times = []
    real_policy = TruncationPolicy(
        chi_max=cfg.chi_max, weight_threshold=cfg.weight_threshold,
        hard_limit=cfg.hard_limit,
    )
    rows.append(_measure(state, network))
    rows[-1]["discarded_weight"] = 0.0
    times.append(0.0)
    for prev, step in zip(save_steps[:-1], save_steps[1:]):
        trotter_block(state, plan, step - prev, real_policy)
        if checkpoint_every and checkpoint_path and step % checkpoint_every == 0:
            from .mps import save_checkpoint

            save_checkpoint(state, checkpoint_path, {"step": step})
        row = _measure(state, network)
        row["discarded_weight"] = state.cumulative_discarded
        rows.append(row)
        times.append(step * cfg.dt)

    data = {k: np.array([r[k] for r in rows]) for k in rows[0]}
    meta = {
        "temperature_K": cfg.temperature,
        "dt_ps": cfg.dt,
        "chi_max": cfg.chi_max,
        "n_chain": cfg.n_chain,
        "d_chain": cfg.d_chain,
        "d_mode": cfg.d_mode,
        "initial_state": cfg.initial_state,
        "max_bond_dim": max(state.bond_dims, default=1),
        "cumulative_discarded": state.cumulative_discarded,
        "exciton_rotation": network.basis.rotation_with_ground().tolist(),
        "runtime_s": time.time() - t_start,
        "config_hash": hashlib.sha256(
            json.dumps(
                {
                    "T": cfg.temperature, "t_end": cfg.t_end, "dt": cfg.dt,
                    "chi": cfg.chi_max, "n_chain": cfg.n_chain,
                    "d_chain": cfg.d_chain, "d_mode": cfg.d_mode,
                    "init": cfg.initial_state,
                    "modes": [[m.omega, m.huang_rhys] for m in sd.modes],
                },
                sort_keys=True,
            ).encode()
        ).hexdigest()[:16],
    }
    return ObservableSeries(times=np.array(times), data=data, metadata=meta)
