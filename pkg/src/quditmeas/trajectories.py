"""Seeded trajectory simulation under the four equivalent integration paths.

=====================  ================================================
method                 update per step
=====================  ================================================
``ito_sme``            Euler-Maruyama on the density-matrix SME
``pure_exact``         exponential state-disturbance map on amplitudes
``stratonovich_kraus`` Heun step of the Kraus-generated equation
``bloch_sme``          Euler-Maruyama in Bloch coordinates
=====================  ================================================

Every step draws the noise, forms the readout from the state at the start of
the step, then updates the state. Trajectory ``i`` of seed ``s`` sees the same
noise whether it is run alone, inside an ensemble, or on another thread.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import kraus, sme
from .dispersive import MeasurementConfig
from .errors import InvalidDimensionError, StepperDivergenceError, UnsupportedMethodError
from .noise import ensemble_normals
from .state import (bloch_populations, bloch_to_density, clamp_state, density_to_bloch,
                    dominant_amplitudes, gell_mann_basis, pure_density, validate_state)

DEFAULT_POSITIVITY_ABORT = 0.5


class Method(str, Enum):
    ITO_SME = "ito_sme"
    PURE_EXACT = "pure_exact"
    STRATONOVICH_KRAUS = "stratonovich_kraus"
    BLOCH_SME = "bloch_sme"


@dataclass
class TrajectoryRecord:
    """One seeded trajectory.

    ``states`` holds Bloch vectors ``(n_times, N**2 - 1)`` or density matrices
    ``(n_times, N, N)``. ``readouts[k]`` is the readout of the step starting
    at ``times[k]`` (``nan`` for the last recorded time). ``noise`` holds the
    white-noise samples of every step when requested, and ``defects`` the
    per-step diagnostics when the record was simulated on its own.
    """

    config_digest: str
    seed: int
    trajectory: int
    method: Method
    times: np.ndarray
    states: np.ndarray
    readouts: Optional[np.ndarray] = None
    noise: Optional[np.ndarray] = None
    defects: Optional[dict] = None

    @property
    def bloch(self):
        return self.states if self.states.ndim == 2 else density_to_bloch(self.states)


@dataclass
class Ensemble:
    """A block of trajectories sharing configuration, seed, method and time grid.

    Arrays are stacked with the trajectory on axis 0, in the order of
    ``indices``. ``defects`` holds per-step worst cases over the whole block:
    ``trace`` and ``hermiticity`` (before the defensive fix-ups) and
    ``min_eigenvalue``.
    """

    config: MeasurementConfig
    seed: int
    method: Method
    duration: float
    indices: np.ndarray
    times: np.ndarray
    states: np.ndarray
    readouts: Optional[np.ndarray] = None
    noise: Optional[np.ndarray] = None
    defects: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.indices)

    @property
    def config_digest(self):
        return self.config.digest()

    @property
    def bloch(self):
        return self.states if self.states.ndim == 3 else density_to_bloch(self.states)

    def __getitem__(self, k):
        return TrajectoryRecord(
            self.config_digest, self.seed, int(self.indices[k]), self.method, self.times,
            self.states[k],
            None if self.readouts is None else self.readouts[k],
            None if self.noise is None else self.noise[k],
        )

    def records(self):
        return [self[k] for k in range(len(self))]

    def subset(self, mask):
        mask = np.asarray(mask)
        return Ensemble(self.config, self.seed, self.method, self.duration, self.indices[mask],
                        self.times, self.states[mask],
                        None if self.readouts is None else self.readouts[mask],
                        None if self.noise is None else self.noise[mask], dict(self.defects))

    @classmethod
    def from_records(cls, records, config, duration=None):
        """Stack records into an ensemble, sorted by trajectory index."""
        records = sorted(records, key=lambda r: r.trajectory)
        if not records:
            raise ValueError("cannot build an ensemble from zero records")
        digest = config.digest()
        first = records[0]
        for r in records:
            if r.config_digest != digest:
                raise ValueError(f"record {r.trajectory} has config digest {r.config_digest}, expected {digest}")
            if r.times.shape != first.times.shape or not np.array_equal(r.times, first.times):
                raise ValueError("records do not share a time grid")
        stack = lambda name: (None if getattr(first, name) is None
                              else np.stack([getattr(r, name) for r in records]))
        return cls(config, first.seed, first.method,
                   float(first.times[-1]) if duration is None else duration,
                   np.array([r.trajectory for r in records]), first.times,
                   np.stack([r.states for r in records]), stack("readouts"), stack("noise"))


def prepare_initial(initial, N, method):
    """Convert an initial state to the representation ``method`` integrates.

    ``initial`` may be a density matrix ``(N, N)``, amplitudes ``(N,)`` or a
    Bloch vector ``(N**2 - 1,)``.
    """
    x = np.asarray(initial)
    if x.shape == (N, N):
        rho = x.astype(complex)
    elif x.shape == (N,):
        rho = pure_density(x)
    elif x.shape == (N * N - 1,):
        rho = bloch_to_density(np.real(x))
    else:
        raise InvalidDimensionError(f"initial state of shape {x.shape} does not fit N = {N}")
    diag = validate_state(rho)
    if not diag.ok(herm_tol=1e-10, trace_tol=1e-10, pos_tol=1e-9):
        raise ValueError(f"initial state is not a valid density matrix: {diag}")
    method = Method(method)
    if method is Method.PURE_EXACT:
        return dominant_amplitudes(rho) if x.shape != (N,) else x.astype(complex) / np.linalg.norm(x)
    if method is Method.BLOCH_SME:
        return density_to_bloch(rho)
    return rho


def n_steps_for(duration, dt):
    n = int(np.floor(duration / dt + 1e-9))
    if n < 1:
        raise ValueError(f"duration {duration} is shorter than one step of {dt}")
    return n


def _as_density(state, method):
    if method is Method.PURE_EXACT:
        return pure_density(state)
    if method is Method.BLOCH_SME:
        return bloch_to_density(state)
    return state


def _populations(state, method):
    if method is Method.PURE_EXACT:
        return np.abs(state) ** 2
    if method is Method.BLOCH_SME:
        return bloch_populations(state)
    return sme.populations(state)


def _to_stored(state, method, store):
    if store == "density":
        return _as_density(state, method)
    if method is Method.BLOCH_SME:
        return state.copy()
    return density_to_bloch(_as_density(state, method), tol=1e-9)


def _run_block(indices, init, config, n_steps, seed, method, record_every, store,
               store_readouts, store_noise, check_positivity, positivity_abort, clamp, chunk):
    M = len(indices)
    K = config.n_channels
    dt = config.dt
    state = np.broadcast_to(init, (M,) + init.shape).copy()
    rec_steps = np.arange(0, n_steps + 1, record_every)
    n_rec = len(rec_steps)
    states = None
    readouts = np.full((M, n_rec, K), np.nan) if store_readouts else None
    noise = np.empty((M, n_steps, K)) if store_noise else None
    tr_def = np.zeros(n_steps)
    herm_def = np.zeros(n_steps)
    min_eig = np.full(n_steps, np.nan)
    rec = 0

    def record(k):
        nonlocal states, rec
        s = _to_stored(state, method, store)
        if states is None:
            states = np.empty((M, n_rec) + s.shape[1:], dtype=s.dtype)
        states[:, rec] = s
        rec += 1

    record(0)
    s0 = 0
    while s0 < n_steps:
        cnt = min(chunk, n_steps - s0)
        xi_chunk = ensemble_normals(seed, indices, s0, cnt, K) / np.sqrt(dt)
        if store_noise:
            noise[:, s0:s0 + cnt] = np.swapaxes(xi_chunk, 0, 1)
        for j in range(cnt):
            step = s0 + j
            xi = xi_chunk[j]
            pops = _populations(state, method)
            ro = sme.readout_from_populations(pops, config, xi)
            if store_readouts and step % record_every == 0:
                readouts[:, step // record_every] = ro
            try:
                if method is Method.ITO_SME:
                    state, d = sme.step_ito(state, config, xi, check_positivity=False, return_defects=True)
                    tr_def[step], herm_def[step] = d.trace, d.hermiticity
                elif method is Method.STRATONOVICH_KRAUS:
                    state = kraus.step_stratonovich(state, config, ro)
                elif method is Method.PURE_EXACT:
                    state = sme.step_pure_exact(state, config, ro).normalized
                else:
                    state = sme.step_bloch(state, config, xi, pops)
                if not np.all(np.isfinite(state)):
                    raise StepperDivergenceError("state became non-finite; reduce dt")
                if check_positivity or positivity_abort is not None:
                    rho = _as_density(state, method)
                    if method is Method.BLOCH_SME:
                        tr_def[step] = float(np.max(np.abs(np.trace(rho, axis1=1, axis2=2).real - 1)))
                    min_eig[step] = float(np.min(np.linalg.eigvalsh(rho)))
                    if positivity_abort is not None and min_eig[step] < -positivity_abort:
                        raise StepperDivergenceError(
                            f"smallest eigenvalue {min_eig[step]:.3g} below -{positivity_abort:g}; reduce dt")
                if clamp and method in (Method.ITO_SME, Method.STRATONOVICH_KRAUS):
                    state = clamp_state(state)
            except StepperDivergenceError as exc:
                raise StepperDivergenceError(str(exc), step=step) from None
            if (step + 1) % record_every == 0:
                record(step + 1)
        s0 += cnt
    return states, readouts, noise, dict(trace=tr_def, hermiticity=herm_def, min_eigenvalue=min_eig)


def simulate_ensemble(initial, config: MeasurementConfig, duration, n_traj, seed, method="ito_sme",
                      threads=1, start_index=0, record_every=1, store="bloch", store_readouts=True,
                      store_noise=False, check_positivity=True,
                      positivity_abort=DEFAULT_POSITIVITY_ABORT, clamp=False, chunk=256):
    """Run ``n_traj`` trajectories with indices ``start_index ..``.

    Parameters
    ----------
    initial : array_like
        Density matrix, amplitudes or Bloch vector.
    duration : float
        Total time; the number of steps is ``floor(duration / dt)``.
    method : str or Method
    threads : int
        Trajectory blocks run on this many threads. Results do not depend on it.
    record_every : int
        Store the state every this many steps.
    store : {"bloch", "density"}
    positivity_abort : float or None
        Abort when an eigenvalue drops below ``-positivity_abort``.
    clamp : bool
        Project negative eigenvalues away after each step (off by default).
    """
    method = Method(method)
    if method in (Method.PURE_EXACT, Method.STRATONOVICH_KRAUS, Method.BLOCH_SME) and not config.efficient:
        raise UnsupportedMethodError(f"{method.value} needs perfect detection; use ito_sme for eta < 1")
    if method is Method.BLOCH_SME and config.n_channels != 2:
        raise UnsupportedMethodError("bloch_sme is implemented for phase-preserving detection")
    if store not in ("bloch", "density"):
        raise ValueError("store must be 'bloch' or 'density'")
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    n_steps = n_steps_for(duration, config.dt)
    init = prepare_initial(initial, config.N, method)
    indices = np.arange(start_index, start_index + n_traj)
    threads = max(1, min(int(threads), n_traj))
    blocks = np.array_split(indices, threads)
    args = (init, config, n_steps, seed, method, record_every, store, store_readouts,
            store_noise, check_positivity, positivity_abort, clamp, chunk)
    if threads == 1:
        results = [_run_block(blocks[0], *args)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda b: _run_block(b, *args), blocks))
    states = np.concatenate([r[0] for r in results])
    readouts = None if not store_readouts else np.concatenate([r[1] for r in results])
    noise = None if not store_noise else np.concatenate([r[2] for r in results])
    defects = {
        "trace": np.max([r[3]["trace"] for r in results], axis=0),
        "hermiticity": np.max([r[3]["hermiticity"] for r in results], axis=0),
        "min_eigenvalue": np.min([r[3]["min_eigenvalue"] for r in results], axis=0),
    }
    times = np.arange(0, n_steps + 1, record_every) * config.dt
    return Ensemble(config, int(seed), method, float(duration), indices, times, states,
                    readouts, noise, defects)


def simulate(initial, config, duration, seed, method="ito_sme", trajectory=0, **kwargs):
    """Run a single trajectory; identical to member ``trajectory`` of an ensemble."""
    ens = simulate_ensemble(initial, config, duration, 1, seed, method, start_index=trajectory, **kwargs)
    rec = ens[0]
    rec.defects = ens.defects
    return rec
