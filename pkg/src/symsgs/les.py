"""Desk-scale periodic-box LES driver with a pluggable closure.

Discretization: collocated grid, second-order central differences ``D``,
skew-symmetric convection ``(D.(u u) + u.D u)/2`` and an FFT pressure
projection that uses the exact symbol of ``D``.  With these choices the
semi-discrete kinetic energy obeys ``dE/dt = -(Phi_visc + Phi_sgs)`` with
``Phi_visc = sum 2 nu S:S h^3`` and ``Phi_sgs = -sum tau:S h^3``, so the
dissipation budget can be read off the state directly.

Time stepping is the three-stage low-storage Runge-Kutta scheme of
Williamson (1980); every stage right-hand side is projected.
"""
from __future__ import annotations

import dataclasses
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .invariants import SingularityPolicy
from .models import ClosureModel, ZeroModel
from .tensor_core import frobenius_norm, skew, sym

log = logging.getLogger(__name__)

RK3_A = (0.0, -5.0 / 9.0, -153.0 / 128.0)
RK3_B = (1.0 / 3.0, 15.0 / 16.0, 8.0 / 15.0)
RK3_C = (0.0, 1.0 / 3.0, 3.0 / 4.0)


class BlowUpError(FloatingPointError):
    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class Grid:
    n: int
    length: float = 2 * np.pi

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise ValueError("grid needs an even number of points per axis, at least 8")
        if not self.length > 0:
            raise ValueError("box length must be positive")

    @property
    def h(self) -> float:
        return self.length / self.n

    def coords(self) -> np.ndarray:
        """Point coordinates, shape (n, n, n, 3)."""
        x = np.arange(self.n) * self.h
        return np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)

    def symbols(self):
        """Fourier symbols ``sin(k h)/h`` of the central difference, rfft layout."""
        k = 2 * np.pi * np.fft.fftfreq(self.n, d=self.h)
        kr = 2 * np.pi * np.fft.rfftfreq(self.n, d=self.h)
        s = np.sin(k * self.h) / self.h
        sr = np.sin(kr * self.h) / self.h
        # the Nyquist symbol is zero analytically; sin(pi) is not
        s[np.abs(s) < 1e-12 / self.h] = 0.0
        sr[np.abs(sr) < 1e-12 / self.h] = 0.0
        return s[:, None, None], s[None, :, None], sr[None, None, :]


@dataclass
class FlowState:
    u: np.ndarray  # (3, n, n, n)
    p: np.ndarray  # (n, n, n)
    t: float
    nu: float
    grid: Grid
    rho: float = 1.0

    def copy(self) -> "FlowState":
        return dataclasses.replace(self, u=self.u.copy(), p=self.p.copy())


# ---------------------------------------------------------------- operators


def ddx(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Periodic central difference along a spatial ``axis`` (0, 1, 2 of the last three)."""
    ax = f.ndim - 3 + axis
    return (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2.0 * h)


def velocity_gradient(u: np.ndarray, h: float) -> np.ndarray:
    """``grad[..., i, j] = D_j u_i`` with shape (n, n, n, 3, 3)."""
    g = np.empty(u.shape[1:] + (3, 3))
    for j in range(3):
        d = ddx(u, j, h)
        for i in range(3):
            g[..., i, j] = d[i]
    return g


def divergence(u: np.ndarray, h: float) -> np.ndarray:
    return sum(ddx(u[j], j, h) for j in range(3))


def tensor_divergence(t: np.ndarray, h: float) -> np.ndarray:
    """``(D_j T_ij)_i`` for ``t`` of shape (n, n, n, 3, 3)."""
    return np.stack([sum(ddx(t[..., i, j], j, h) for j in range(3)) for i in range(3)])


def convection(u: np.ndarray, h: float, grad: np.ndarray | None = None) -> np.ndarray:
    """Skew-symmetric form ``(D_j(u_j u_i) + u_j D_j u_i) / 2``."""
    if grad is None:
        grad = velocity_gradient(u, h)
    adv = np.einsum("j...,...ij->i...", u, grad)
    div = np.stack([sum(ddx(u[j] * u[i], j, h) for j in range(3)) for i in range(3)])
    return 0.5 * (div + adv)


def project(f: np.ndarray, grid: Grid):
    """Remove the discrete gradient part: returns ``(f - D phi, phi)`` with ``D.(f - D phi) = 0``."""
    sx, sy, sz = grid.symbols()
    fh = [np.fft.rfftn(f[i]) for i in range(3)]
    # D -> i*s in Fourier space
    div = 1j * (sx * fh[0] + sy * fh[1] + sz * fh[2])
    lap = -(sx**2 + sy**2 + sz**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(lap != 0.0, div / lap, 0.0)
    n = grid.n
    out = np.stack([np.fft.irfftn(fh[i] - 1j * s * phi, s=(n, n, n), axes=(0, 1, 2))
                    for i, s in enumerate((sx, sy, sz))])
    return out, np.fft.irfftn(phi, s=(n, n, n), axes=(0, 1, 2))


# ---------------------------------------------------------------- closure hook


def with_policy(model: ClosureModel, policy: SingularityPolicy) -> ClosureModel:
    if dataclasses.is_dataclass(model) and any(f.name == "policy" for f in dataclasses.fields(model)):
        return dataclasses.replace(model, policy=policy)
    return model


@dataclass
class Tendency:
    rhs: np.ndarray
    pressure: np.ndarray
    phi_visc: float
    phi_sgs: float
    nu_sgs_max: float


def tendency(u: np.ndarray, nu: float, model: ClosureModel, grid: Grid, rho: float = 1.0) -> Tendency:
    h = grid.h
    grad = velocity_gradient(u, h)
    s, w = sym(grad), skew(grad)
    tau = model.tau(s, w)
    rhs = -convection(u, h, grad) + 2.0 * nu * tensor_divergence(s, h) - tensor_divergence(tau, h)
    rhs, phi = project(rhs, grid)
    vol = h**3
    phi_visc = float(2.0 * nu * np.sum(s * s) * vol)
    phi_sgs = float(-np.sum(tau * s) * vol)
    snorm = frobenius_norm(s)
    tnorm = frobenius_norm(tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(snorm > 0, tnorm / (2.0 * snorm), 0.0)
    return Tendency(rhs, rho * phi, phi_visc, phi_sgs, float(np.max(ratio)))


def stable_dt(state: FlowState, nu_sgs: float, cfl: float = 0.3, diffusive: float = 0.2) -> float:
    h = state.grid.h
    umax = float(np.max(np.abs(state.u)))
    bounds = [diffusive * h * h / (state.nu + nu_sgs)] if state.nu + nu_sgs > 0 else []
    if umax > 0:
        bounds.append(cfl * h / umax)
    if not bounds:
        raise ValueError("no stability bound applies (zero flow and zero viscosity); give dt explicitly")
    return min(bounds)


def step(state: FlowState, model: ClosureModel, dt: float, *, step_index: int = 0,
         first: Tendency | None = None) -> FlowState:
    """Advance one RK3 step; the returned state is discretely divergence-free.

    ``first`` may carry the already computed tendency of ``state``.
    """
    u = state.u.copy()
    q = np.zeros_like(u)
    p = state.p
    for a, b in zip(RK3_A, RK3_B):
        if a == 0.0 and first is not None:
            tend = first
        else:
            tend = tendency(u, state.nu, model, state.grid, state.rho)
        q = a * q + dt * tend.rhs
        u = u + b * q
        if a == 0.0:
            p = tend.pressure
    # clean accumulated round-off in the divergence
    u, _ = project(u, state.grid)
    if not np.all(np.isfinite(u)):
        raise BlowUpError(f"non-finite velocity after step {step_index}", step_index)
    return FlowState(u, p, state.t + dt, state.nu, state.grid, state.rho)


def kinetic_energy(u: np.ndarray, grid: Grid) -> float:
    return float(0.5 * np.sum(u * u) * grid.h**3)


# ---------------------------------------------------------------- initial data


def taylor_green_velocity(grid: Grid, amplitude: float = 1.0) -> np.ndarray:
    x = grid.coords() * (2 * np.pi / grid.length)
    X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
    return amplitude * np.stack([np.sin(X) * np.cos(Y) * np.cos(Z),
                                 -np.cos(X) * np.sin(Y) * np.cos(Z),
                                 np.zeros_like(X)])


def cellular_velocity(grid: Grid, amplitude: float = 1.0) -> np.ndarray:
    """Periodic rotation-like cells ``(-sin y, sin x, 0.5 sin(x + y))``."""
    x = grid.coords() * (2 * np.pi / grid.length)
    X, Y = x[..., 0], x[..., 1]
    return amplitude * np.stack([-np.sin(Y), np.sin(X), 0.5 * np.sin(X + Y)])


def random_velocity(grid: Grid, amplitude: float = 1.0, seed=0, kmax: int = 3) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = grid.n
    k = np.fft.fftfreq(n, 1.0 / n)
    kk = np.sqrt(k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2)
    mask = (kk > 0) & (kk <= kmax)
    u = np.stack([np.real(np.fft.ifftn(mask * (rng.standard_normal((n, n, n)) + 1j * rng.standard_normal((n, n, n)))))
                  for _ in range(3)])
    u, _ = project(u, grid)
    return amplitude * u / np.max(np.abs(u))


INITIAL_CONDITIONS = {"taylor_green": taylor_green_velocity, "cellular": cellular_velocity,
                      "random": random_velocity}


# ---------------------------------------------------------------- runs


@dataclass
class EnergyBudget:
    t: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    phi_visc: list = field(default_factory=list)
    phi_sgs: list = field(default_factory=list)
    max_u: list = field(default_factory=list)

    def record(self, t, energy, phi_visc, phi_sgs, max_u):
        self.t.append(float(t))
        self.energy.append(float(energy))
        self.phi_visc.append(float(phi_visc))
        self.phi_sgs.append(float(phi_sgs))
        self.max_u.append(float(max_u))

    def to_csv(self) -> str:
        rows = ["t,E,phi_visc,phi_sgs,max_u"]
        for row in zip(self.t, self.energy, self.phi_visc, self.phi_sgs, self.max_u):
            rows.append(",".join(repr(v) for v in row))
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class RunConfig:
    n: int = 16
    length: float = 2 * np.pi
    nu: float = 0.05
    steps: int = 500
    dt: float | None = None
    cfl: float = 0.3
    diffusive: float = 0.2
    initial: str = "taylor_green"
    amplitude: float = 1.0
    seed: int = 0
    sample_every: int = 1
    blowup_factor: float = 10.0
    energy_tol: float = 1e-3
    reg_rel_eps: float = 1e-8
    model: ClosureModel = field(default_factory=ZeroModel)


@dataclass
class RunResult:
    budget: EnergyBudget
    state: FlowState
    steps_taken: int
    blowup: str | None = None
    growth_steps: list = field(default_factory=list)
    max_divergence: float = 0.0

    @property
    def energy_bounded(self) -> bool:
        return self.blowup is None and not self.growth_steps


def initial_state(cfg: RunConfig) -> FlowState:
    grid = Grid(cfg.n, cfg.length)
    make = INITIAL_CONDITIONS[cfg.initial]
    kwargs = {"seed": cfg.seed} if cfg.initial == "random" else {}
    u = make(grid, cfg.amplitude, **kwargs)
    u, _ = project(u, grid)
    return FlowState(u, np.zeros(u.shape[1:]), 0.0, cfg.nu, grid)


def run(cfg: RunConfig, state: FlowState | None = None) -> RunResult:
    """Integrate ``cfg.steps`` steps, recording the energy budget.

    The closure's singularity policy is replaced by regularization with
    ``eps = reg_rel_eps * U / L``.  A step whose energy exceeds the previous
    one by more than ``energy_tol`` (relative) is flagged; energy above
    ``blowup_factor`` times the initial value stops the run.
    """
    state = state or initial_state(cfg)
    grid = state.grid
    u_ref = max(float(np.max(np.abs(state.u))), 1e-300)
    model = with_policy(cfg.model, SingularityPolicy.regularized(cfg.reg_rel_eps * u_ref / grid.length,
                                                                 reference_scale=u_ref / grid.length))
    budget = EnergyBudget()
    e0 = kinetic_energy(state.u, grid)
    result = RunResult(budget, state, 0)
    prev_e = e0
    dt_cap = None
    for k in range(cfg.steps + 1):
        tend = tendency(state.u, state.nu, model, grid, state.rho)
        e = kinetic_energy(state.u, grid)
        if k % cfg.sample_every == 0 or k == cfg.steps:
            budget.record(state.t, e, tend.phi_visc, tend.phi_sgs, np.max(np.abs(state.u)))
        if k > 0 and e > prev_e * (1.0 + cfg.energy_tol):
            result.growth_steps.append(k)
        if e > cfg.blowup_factor * e0:
            result.blowup = f"energy {e:.6g} exceeded {cfg.blowup_factor:g} x initial at step {k}"
            log.warning(result.blowup)
            break
        if k == cfg.steps:
            break
        prev_e = e
        if cfg.dt is not None:
            dt = cfg.dt
        else:
            # never let dt grow beyond its initial value as the flow decays
            dt = stable_dt(state, max(tend.nu_sgs_max, 0.0), cfg.cfl, cfg.diffusive)
            dt_cap = dt if dt_cap is None else dt_cap
            dt = min(dt, dt_cap)
        try:
            state = step(state, model, dt, step_index=k, first=tend)
        except BlowUpError as exc:
            result.blowup = str(exc)
            break
        result.steps_taken = k + 1
        result.max_divergence = max(result.max_divergence, float(np.max(np.abs(divergence(state.u, grid.h)))))
    result.state = state
    return result


# ---------------------------------------------------------------- field dumps

DUMP_MAGIC = b"SYMSGSF1"
_HEADER = struct.Struct("<8sqddd8s")


def dump_fields(state: FlowState, path) -> None:
    """Raw little-endian float64 dump: header (magic, n, L, t, nu, order) then u, v, w, p."""
    g = state.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DUMP_MAGIC, g.n, g.length, state.t, state.nu, b"u,v,w,p"))
        fh.write(np.ascontiguousarray(state.u, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(state.p, dtype="<f8").tobytes())


def load_fields(path) -> FlowState:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, n, length, t, nu, order = _HEADER.unpack_from(raw)
    if magic != DUMP_MAGIC:
        raise ValueError("not a field dump")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    m = n**3
    u = data[: 3 * m].reshape(3, n, n, n).copy()
    p = data[3 * m: 4 * m].reshape(n, n, n).copy()
    return FlowState(u, p, t, nu, Grid(int(n), length))
