"""Time evolution, measurement records, and Heisenberg-picture recovery.

States evolve under the time-dependent Schroedinger equation with a
classic fixed-step fourth-order Runge-Kutta integrator; each sampling
interval is subdivided into `substeps` integrator steps.  Measurement
records hold expectation values (and their time derivatives) of local
observables over an ensemble of initial states.  From those records the
Heisenberg-picture observables A^H(t) are recovered by linear least
squares in the Pauli basis: for any operator B,

    <psi_s| B |psi_s> = sum_i b_i <psi_s| S_i |psi_s>,

so with at least 4**n well-spread states the coefficient vector of
A^H(t_j) (and of its derivative) is the unique least-squares solution
against the same state design matrix for every time and observable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.linalg

from . import pauli
from .errors import (
    ContractError,
    InputError,
    IntegratorAccuracyError,
    RankDeficiencyError,
    SizeError,
)
from .models import HamiltonianSpec
from .pauli import PauliString, check_n

NORM_DRIFT_LIMIT = 1e-6
CONVERSION_DRIFT_LIMIT = 1e-6
DERIVATIVE_MODES = ("exact", "finite_diff")

# 30 integrator steps per sample interval keep the norm drift of typical
# generated networks (operator norms up to ~13) below 1e-8 over t in (0,5).
DEFAULT_SUBSTEPS = 30


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling grid with integrator substeps per interval."""

    t_start: float = 0.0
    t_end: float = 5.0
    n_samples: int = 100
    substeps: int = DEFAULT_SUBSTEPS

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise InputError(f"need t_end > t_start, got [{self.t_start}, {self.t_end}]")
        if self.n_samples < 2:
            raise InputError("need at least 2 samples")
        if self.substeps < 1:
            raise InputError("substeps must be >= 1")

    @cached_property
    def times(self) -> np.ndarray:
        t = np.linspace(self.t_start, self.t_end, self.n_samples)
        t.flags.writeable = False
        return t

    @property
    def spacing(self) -> float:
        return (self.t_end - self.t_start) / (self.n_samples - 1)

    def as_dict(self) -> dict:
        return {
            "t_start": self.t_start,
            "t_end": self.t_end,
            "n_samples": self.n_samples,
            "substeps": self.substeps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TimeGrid":
        return cls(d["t_start"], d["t_end"], d["n_samples"], d["substeps"])


@dataclass
class InitialStateEnsemble:
    """Normalized pure states, one per row."""

    n: int
    states: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        check_n(self.n)
        self.states = np.asarray(self.states, dtype=complex)
        if self.states.ndim != 2 or self.states.shape[1] != 2**self.n:
            raise SizeError(f"states must be (count, {2**self.n}), got {self.states.shape}")
        norms = np.linalg.norm(self.states, axis=1)
        if np.abs(norms - 1).max() > 1e-8:
            raise ContractError("ensemble states must be normalized")

    @property
    def count(self) -> int:
        return self.states.shape[0]


def gen_initial_states(n: int, count: int, rng: np.random.Generator,
                       seed: int | None = None) -> InitialStateEnsemble:
    """Random pure states with amplitudes sqrt(r) e^{2 pi i theta}.

    Per state: draw the 2**n radii r, then the 2**n phases theta, both
    U[0,1], and normalize.
    """
    check_n(n)
    if count < 1:
        raise InputError("state count must be >= 1")
    d = 2**n
    states = np.empty((count, d), dtype=complex)
    for s in range(count):
        r = rng.random(d)
        theta = rng.random(d)
        psi = np.sqrt(r) * np.exp(2j * np.pi * theta)
        states[s] = psi / np.linalg.norm(psi)
    return InitialStateEnsemble(n, states, seed)


def _rk4_block(spec: HamiltonianSpec, psi0: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Integrate dPsi/dt = -i H(t) Psi for a (dim, m) block of columns.

    Returns the block at every sample time, shape (n_samples, dim, m).
    """
    h1, h2, f = spec.h1, spec.h2, spec.driving
    ham = lambda t: h1 + f(t) * h2
    dt = grid.spacing / grid.substeps
    psi = psi0.astype(complex)
    out = np.empty((grid.n_samples,) + psi.shape, dtype=complex)
    out[0] = psi
    for j in range(grid.n_samples - 1):
        t = grid.times[j]
        for m in range(grid.substeps):
            tm = t + m * dt
            h_a = ham(tm)
            h_mid = ham(tm + dt / 2)
            h_b = ham(tm + dt)
            k1 = -1j * (h_a @ psi)
            k2 = -1j * (h_mid @ (psi + (dt / 2) * k1))
            k3 = -1j * (h_mid @ (psi + (dt / 2) * k2))
            k4 = -1j * (h_b @ (psi + dt * k3))
            psi = psi + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[j + 1] = psi
    return out


def evolve_state(spec: HamiltonianSpec, psi0: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Trajectory of one state at the sample times, shape (n_samples, dim).

    Raises IntegratorAccuracyError if the norm drifts by more than 1e-6;
    increase grid.substeps in that case.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    d = 2**spec.n
    if psi0.shape != (d,):
        raise SizeError(f"state must have shape ({d},), got {psi0.shape}")
    traj = _rk4_block(spec, psi0[:, None], grid)[:, :, 0]
    drift = np.abs(np.linalg.norm(traj, axis=1) - np.linalg.norm(psi0)).max()
    if drift > NORM_DRIFT_LIMIT:
        raise IntegratorAccuracyError(
            f"norm drift {drift:.2e} exceeds {NORM_DRIFT_LIMIT:.0e}; "
            f"increase substeps (currently {grid.substeps})")
    return traj


def evolve_ensemble(spec: HamiltonianSpec, ensemble: InitialStateEnsemble,
                    grid: TimeGrid) -> np.ndarray:
    """All trajectories at once, shape (n_samples, dim, count)."""
    if ensemble.n != spec.n:
        raise SizeError("ensemble and spec disagree on spin count")
    traj = _rk4_block(spec, ensemble.states.T, grid)
    drift = np.abs(np.linalg.norm(traj, axis=1) - 1).max()
    if drift > NORM_DRIFT_LIMIT:
        raise IntegratorAccuracyError(
            f"norm drift {drift:.2e} exceeds {NORM_DRIFT_LIMIT:.0e}; "
            f"increase substeps (currently {grid.substeps})")
    return traj


def evolve_propagator(spec: HamiltonianSpec, grid: TimeGrid) -> np.ndarray:
    """Propagator U(t_j) with U(t_start) = I, shape (n_samples, dim, dim)."""
    d = 2**spec.n
    u = _rk4_block(spec, np.eye(d, dtype=complex), grid)
    gap = np.abs(np.einsum("tde,tdf->tef", u.conj(), u) - np.eye(d)).max()
    if gap > NORM_DRIFT_LIMIT:
        raise IntegratorAccuracyError(
            f"propagator unitarity drift {gap:.2e}; increase substeps")
    return u


def conjugate_series(u: np.ndarray, op: np.ndarray) -> np.ndarray:
    """Heisenberg picture of an operator: U^dag op U at every time.

    `op` is either a fixed (dim, dim) matrix or a (n_samples, dim, dim)
    series (e.g. H(t) itself).
    """
    op = np.asarray(op, dtype=complex)
    if op.ndim == 2:
        return np.einsum("ted,ef,tfg->tdg", u.conj(), op, u)
    return np.einsum("ted,tef,tfg->tdg", u.conj(), op, u)


@dataclass
class OperatorSeries:
    """A labelled time series of equal-size square matrices."""

    grid: TimeGrid
    label: str
    matrices: np.ndarray

    def __post_init__(self):
        self.matrices = np.asarray(self.matrices, dtype=complex)
        t, d = self.grid.n_samples, self.matrices.shape[-1]
        if self.matrices.shape != (t, d, d):
            raise SizeError(f"series must be ({t}, d, d), got {self.matrices.shape}")

    @property
    def dim(self) -> int:
        return self.matrices.shape[-1]


@dataclass
class ObservationSet:
    """Expectation values and derivatives over (state, observable, time)."""

    grid: TimeGrid
    observables: tuple[PauliString, ...]
    values: np.ndarray
    derivatives: np.ndarray
    derivative_mode: str
    noise_sigma: float = 0.0

    def __post_init__(self):
        self.observables = tuple(self.observables)
        self.values = np.asarray(self.values, dtype=float)
        self.derivatives = np.asarray(self.derivatives, dtype=float)
        k, t = len(self.observables), self.grid.n_samples
        if self.values.ndim != 3 or self.values.shape[1:] != (k, t):
            raise SizeError(f"values must be (states, {k}, {t}), got {self.values.shape}")
        if self.derivatives.shape != self.values.shape:
            raise SizeError("derivatives shape must match values")
        if self.derivative_mode not in DERIVATIVE_MODES:
            raise InputError(f"derivative_mode must be one of {DERIVATIVE_MODES}")
        if self.noise_sigma < 0:
            raise InputError("noise_sigma must be >= 0")

    @property
    def state_count(self) -> int:
        return self.values.shape[0]


def _finite_diff(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    return np.gradient(values, times, axis=-1, edge_order=2)


def measure_expectations(spec: HamiltonianSpec, ensemble: InitialStateEnsemble,
                         observables, grid: TimeGrid,
                         derivative_mode: str = "exact",
                         observed=None) -> ObservationSet:
    """Simulate the measurement record of local observables.

    Exact derivatives use d<A>/dt = i <psi(t)|[H(t), A]|psi(t)>; the
    finite_diff mode applies central differences on the sampled values
    (second-order one-sided at the endpoints).  If `observed` is given,
    every observable must act trivially outside those spins.
    """
    observables = tuple(observables)
    if not observables:
        raise InputError("need at least one observable")
    if derivative_mode not in DERIVATIVE_MODES:
        raise InputError(f"derivative_mode must be one of {DERIVATIVE_MODES}")
    if observed is not None:
        allowed = set(int(s) for s in observed)
        for a in observables:
            if not set(a.support) <= allowed:
                raise ContractError(
                    f"observable {a.label} acts outside observed spins {sorted(allowed)}")
    for a in observables:
        if a.n != spec.n:
            raise SizeError(f"observable {a.label} has wrong spin count")

    traj = evolve_ensemble(spec, ensemble, grid)  # (t, d, s)
    mats = np.stack([a.matrix() for a in observables])  # (k, d, d)
    values = np.einsum("tds,kde,tes->skt", traj.conj(), mats, traj).real

    if derivative_mode == "exact":
        hs = spec.hamiltonian(grid.times)  # (t, d, d)
        comm = 1j * (np.einsum("tde,kef->tkdf", hs, mats)
                     - np.einsum("kde,tef->tkdf", mats, hs))
        derivatives = np.einsum("tds,tkde,tes->skt", traj.conj(), comm, traj).real
    else:
        derivatives = _finite_diff(values, grid.times)
    return ObservationSet(grid, observables, values, derivatives, derivative_mode)


def add_noise(obs: ObservationSet, sigma: float, rng: np.random.Generator) -> ObservationSet:
    """Gaussian measurement noise on the values; derivatives switch to
    finite differences of the noisy record."""
    if sigma < 0:
        raise InputError("noise sigma must be >= 0")
    values = obs.values if sigma == 0 else obs.values + rng.normal(0.0, sigma, obs.values.shape)
    derivatives = _finite_diff(values, obs.grid.times)
    return ObservationSet(obs.grid, obs.observables, values, derivatives,
                          "finite_diff", noise_sigma=float(sigma))


@dataclass
class HeisenbergReconstruction:
    """Recovered A^H series (and derivative series) per observable."""

    operators: list[OperatorSeries]
    derivatives: list[OperatorSeries]
    condition: float
    max_residual: float


def reconstruct_heisenberg(obs: ObservationSet,
                           ensemble: InitialStateEnsemble) -> HeisenbergReconstruction:
    """Least-squares recovery of Heisenberg-picture observables.

    Builds the real design matrix M[s, i] = <psi_s|S_i|psi_s>, factors it
    once by column-pivoted QR, and solves for the Pauli coefficients of
    A^H(t_j) and dA^H/dt(t_j) for every observable and sample time.
    """
    n = ensemble.n
    p = pauli.basis_size(n)
    s_count = ensemble.count
    if s_count < p:
        raise SizeError(f"need at least {p} states for n={n}, got {s_count}")
    if obs.values.shape[0] != s_count:
        raise SizeError("observation set and ensemble disagree on state count")

    mats = pauli.basis_matrices(n)
    design = np.einsum("sd,ide,se->si", ensemble.states.conj(), mats,
                       ensemble.states).real

    q, r, piv = scipy.linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag[0] * max(design.shape) * np.finfo(float).eps
    rank = int(np.count_nonzero(diag > tol))
    condition = float(diag[0] / diag[-1]) if diag[-1] > 0 else np.inf
    if rank < p:
        raise RankDeficiencyError(
            f"design matrix rank {rank} < {p} (condition ~ {condition:.2e}); "
            "use more or better-spread initial states")

    k, t = len(obs.observables), obs.grid.n_samples
    rhs = np.concatenate([obs.values.reshape(s_count, k * t),
                          obs.derivatives.reshape(s_count, k * t)], axis=1)
    z = scipy.linalg.solve_triangular(r, q.T @ rhs)
    coef = np.empty_like(z)
    coef[piv] = z

    resid = np.linalg.norm(design @ coef - rhs, axis=0)
    scale = np.maximum(np.linalg.norm(rhs, axis=0), 1.0)
    max_residual = float((resid / scale).max())

    series = np.einsum("pm,pde->mde", coef, mats).reshape(2, k, t, 2**n, 2**n)
    operators, derivatives = [], []
    for ki, a in enumerate(obs.observables):
        operators.append(OperatorSeries(obs.grid, a.label, series[0, ki]))
        derivatives.append(OperatorSeries(obs.grid, f"d{a.label}/dt", series[1, ki]))
    return HeisenbergReconstruction(operators, derivatives, condition, max_residual)


def _expm_hermitian(h: np.ndarray, factor: complex) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return (v * np.exp(factor * w)) @ v.conj().T


def heisenberg_to_schrodinger(hh: OperatorSeries, substeps: int = 1,
                              return_unitarity: bool = False):
    """Convert a Heisenberg-picture Hamiltonian series back to H(t).

    Integrates dU/dt = -i U H^H(t) with midpoint exponential steps
    (H^H linearly interpolated between samples), then H(t) = U H^H U^dag.
    With return_unitarity=True also returns the worst ||U^dag U - I||
    encountered, which stays at rounding level for the exponential steps.
    """
    if substeps < 1:
        raise InputError("substeps must be >= 1")
    mats = hh.matrices
    pauli.check_hermitian(mats)
    t_count, d = mats.shape[0], mats.shape[-1]
    dt = hh.grid.spacing / substeps
    u = np.eye(d, dtype=complex)
    out = np.empty_like(mats)
    out[0] = mats[0]
    worst_gap = 0.0
    for j in range(t_count - 1):
        a, b = mats[j], mats[j + 1]
        for m in range(substeps):
            frac = (m + 0.5) / substeps
            h_mid = a + frac * (b - a)
            u = u @ _expm_hermitian(h_mid, -1j * dt)
        out[j + 1] = u @ b @ u.conj().T
        gap = np.abs(u.conj().T @ u - np.eye(d)).max()
        worst_gap = max(worst_gap, gap)
        if gap > CONVERSION_DRIFT_LIMIT:
            raise IntegratorAccuracyError(f"conversion propagator drift {gap:.2e}")
    out = (out + np.conj(np.swapaxes(out, -1, -2))) / 2
    series = OperatorSeries(hh.grid, "H", out)
    return (series, worst_gap) if return_unitarity else series
