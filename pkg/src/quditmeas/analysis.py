"""Ensemble reductions, trajectory densities, collapse rates and readout distinguishability."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats

from .dispersive import MeasurementConfig, Scheme, wrap_angle
from .sme import readout_means
from .state import gell_mann_basis, seqsum
from .trajectories import Ensemble


def _ordered(e: Ensemble):
    if len(e) == 0:
        raise ValueError("empty ensemble")
    order = np.argsort(e.indices, kind="stable")
    return e.bloch[order]


def ensemble_mean(e: Ensemble):
    """Mean Bloch vector at every recorded time, shape ``(n_times, N**2 - 1)``.

    The reduction runs in trajectory-index order, so the result does not
    depend on how the trajectories were produced or stored.
    """
    q = _ordered(e)
    return seqsum(q, axis=0) / len(e)


def ensemble_mean_error(e: Ensemble):
    """Standard error of :func:`ensemble_mean`."""
    q = _ordered(e)
    if len(e) < 2:
        return np.full(q.shape[1:], np.inf)
    return np.std(q, axis=0, ddof=1) / np.sqrt(len(e))


def postselect_final(e: Ensemble, coordinate, threshold=0.0):
    """Split by the final value of one Bloch coordinate.

    Returns ``(upper, lower)`` with ``final >= threshold`` in ``upper``; exact
    ties go to ``upper``. Either part may be empty.
    """
    final = e.bloch[:, -1, coordinate]
    upper = final >= threshold
    return e.subset(upper), e.subset(~upper)


def coordinate_index(N, label):
    """Linear index of ``"x"/"y"/"z"`` (qubits) or a basis label tuple."""
    basis = gell_mann_basis(N)
    if isinstance(label, (int, np.integer)):
        return int(label)
    if N == 2 and label in ("x", "y", "z"):
        return "xyz".index(label)
    return basis.index_map[tuple(label)]


@dataclass(frozen=True)
class TrajectoryDensity:
    """Histogram of one coordinate against time.

    ``values[t, k]`` is the weight of coordinate bin ``k`` in time bin ``t``.
    With ``normalization="column"`` every time bin holding samples sums to 1.
    """

    time_edges: np.ndarray
    coord_edges: np.ndarray
    values: np.ndarray
    samples: np.ndarray
    normalization: str


def trajectory_density(e: Ensemble, coordinate, time_bins=100, coord_bins=61,
                       coord_range=(-1.0, 1.0), normalization="column"):
    """Trajectory density of Bloch coordinate ``coordinate``.

    ``time_bins`` and ``coord_bins`` are bin counts or explicit monotone edges.
    Samples outside the coordinate range are clipped into the edge bins.
    """
    if normalization not in ("column", "global"):
        raise ValueError("normalization must be 'column' or 'global'")
    t_edges = (np.linspace(e.times[0], e.times[-1], int(time_bins) + 1)
               if np.ndim(time_bins) == 0 else np.asarray(time_bins, dtype=float))
    z_edges = (np.linspace(coord_range[0], coord_range[1], int(coord_bins) + 1)
               if np.ndim(coord_bins) == 0 else np.asarray(coord_bins, dtype=float))
    for name, edges in (("time", t_edges), ("coordinate", z_edges)):
        if len(edges) < 2:
            raise ValueError(f"{name} bins are empty")
        if np.any(np.diff(edges) <= 0):
            raise ValueError(f"{name} bin edges must increase strictly")
    z = e.bloch[:, :, coordinate]
    ti = np.clip(np.searchsorted(t_edges, e.times, side="right") - 1, 0, len(t_edges) - 2)
    zi = np.clip(np.searchsorted(z_edges, z, side="right") - 1, 0, len(z_edges) - 2)
    counts = np.zeros((len(t_edges) - 1, len(z_edges) - 1))
    np.add.at(counts, (np.broadcast_to(ti, zi.shape), zi), 1.0)
    samples = counts.sum(axis=1)
    if normalization == "column":
        values = np.divide(counts, samples[:, None], out=np.zeros_like(counts), where=samples[:, None] > 0)
    else:
        values = counts / counts.sum()
    return TrajectoryDensity(t_edges, z_edges, values, samples, normalization)


# collapse ---------------------------------------------------------------

class CollapseFit(NamedTuple):
    rate: float
    stderr: float
    degenerate: bool
    times: np.ndarray
    values: np.ndarray


def coherence_magnitude(q, N):
    """``2 sum_{m<n} |rho_mn|`` from Bloch vectors on the last axis."""
    pairs = list(gell_mann_basis(N).pairs())
    i_mn = [p[2] for p in pairs]
    i_nm = [p[3] for p in pairs]
    return seqsum(np.hypot(q[..., i_mn], q[..., i_nm]))


def collapse_rate(e: Ensemble, observable="coherence", coordinate=None, floor=np.exp(-3.0),
                  t_max=None):
    """Exponential collapse rate of an ensemble, fitted by log-linear regression.

    Parameters
    ----------
    observable : {"coherence", "z2"}
        ``"coherence"`` fits the ensemble mean of ``2 sum |rho_mn|``. For a
        qubit this is the mean of ``sqrt(1 - z**2)``, which decays as a pure
        exponential at half the collapse-noise variance rate. ``"z2"`` fits
        ``1 - <q_c**2>`` for ``coordinate`` (default: last diagonal).
    floor : float
        Only times where the observable exceeds ``floor`` times its initial
        value enter the fit.
    t_max : float, optional
        Upper time limit of the fit window.

    Returns
    -------
    CollapseFit
        ``rate`` is minus the fitted slope of ``log(observable)``. Constant
        data give ``rate = 0`` with ``stderr = inf`` and ``degenerate`` set.
    """
    q = _ordered(e)
    N = e.config.N
    if observable == "coherence":
        y = seqsum(coherence_magnitude(q, N), axis=0) / len(e)
    elif observable == "z2":
        c = (N * N - 2) if coordinate is None else coordinate
        y = 1.0 - seqsum(q[..., c] ** 2, axis=0) / len(e)
    else:
        raise ValueError(f"unknown observable {observable!r}")
    t = e.times
    if not np.all(np.isfinite(y)) or y[0] <= 0 or np.ptp(y) <= 1e-12 * max(abs(y[0]), 1e-300):
        return CollapseFit(0.0, np.inf, True, t, y)
    keep = y > floor * y[0]
    if t_max is not None:
        keep &= t <= t_max
    if np.count_nonzero(keep) < 3:
        return CollapseFit(0.0, np.inf, True, t, y)
    fit = stats.linregress(t[keep], np.log(y[keep]))
    return CollapseFit(float(-fit.slope), float(fit.stderr), False, t, y)


# distinguishability -----------------------------------------------------

def bhattacharyya_signal_pp(config: MeasurementConfig, i, j, dt_signal):
    """Closed-form heterodyne signal ``S = dt |alpha|^2/(4T) |e^{i th_i} - e^{i th_j}|^2``.

    With ``|alpha|^2 / T = 1/(4 tau)`` only ``tau`` is needed.
    """
    th = config.thetas
    return float(dt_signal * np.abs(np.exp(1j * th[i]) - np.exp(1j * th[j])) ** 2 / (16 * config.tau))


def bhattacharyya_signal_ps(config: MeasurementConfig, i, j, dt_signal, phi=None):
    """Closed-form homodyne signal ``S = dt |alpha|^2/(2T) [cos(th_i - phi) - cos(th_j - phi)]^2``."""
    phi = config.phi if phi is None else phi
    th = config.thetas
    return float(dt_signal * (np.cos(th[i] - phi) - np.cos(th[j] - phi)) ** 2 / (8 * config.tau))


def bhattacharyya_signal(config, i, j, dt_signal):
    if config.scheme is Scheme.PHASE_PRESERVING:
        return bhattacharyya_signal_pp(config, i, j, dt_signal)
    return bhattacharyya_signal_ps(config, i, j, dt_signal)


def readout_gaussians(config: MeasurementConfig, dt_signal):
    """Means ``(N, channels)`` and shared variance of the time-averaged readout.

    The variance ``2 tau C^2 |alpha|^2 / dt`` is that of perfect detection.
    """
    means = readout_means(np.eye(config.N), config)
    amp = config.C * config.alpha_mag
    return means, 2 * config.tau * amp**2 / dt_signal


def bhattacharyya_numeric(means_i, means_j, variance, dims=None, n_points=2048, extent=10.0):
    """``-ln int sqrt(P_i P_j)`` for isotropic Gaussians, by trapezoidal quadrature.

    The grid spans ``extent`` standard deviations beyond both means with
    ``n_points`` nodes per axis. The integrand is handled in log space so
    widely separated densities do not underflow.
    """
    mi = np.atleast_1d(np.asarray(means_i, dtype=float))
    mj = np.atleast_1d(np.asarray(means_j, dtype=float))
    dims = mi.size if dims is None else int(dims)
    if dims not in (1, 2) or mi.size != dims or mj.size != dims:
        raise ValueError("means must have 1 or 2 components matching dims")
    if not (np.all(np.isfinite(mi)) and np.all(np.isfinite(mj)) and np.isfinite(variance)) or variance <= 0:
        raise ValueError("means must be finite and variance positive")
    sig = np.sqrt(variance)
    axes = [np.linspace(min(a, b) - extent * sig, max(a, b) + extent * sig, n_points)
            for a, b in zip(mi, mj)]
    grids = np.meshgrid(*axes, indexing="ij")
    d2 = sum((g - a) ** 2 + (g - b) ** 2 for g, a, b in zip(grids, mi, mj))
    log_f = -d2 / (4 * variance) - 0.5 * dims * np.log(2 * np.pi * variance)
    top = np.max(log_f)
    integral = np.exp(log_f - top)
    for k, ax in enumerate(axes):
        integral = np.trapezoid(integral, ax, axis=0)
    return float(max(-(np.log(integral) + top), 0.0))


class PhaseChoice(NamedTuple):
    phi: float
    degenerate: bool


def optimal_phase(theta_e, theta_g):
    """Amplification axis maximizing the homodyne signal between two levels.

    The signal is proportional to ``sin^2((theta_e + theta_g)/2 - phi)``, so
    the optimum is ``(theta_e + theta_g)/2 - pi/2`` (mod pi), wrapped to
    ``(-pi, pi]``. Equal pointer angles give no signal at any phase and are
    flagged ``degenerate``.
    """
    phi = wrap_angle(0.5 * (theta_e + theta_g) - 0.5 * np.pi)
    degenerate = abs(np.sin(0.5 * (theta_e - theta_g))) < 1e-12
    return PhaseChoice(float(phi), bool(degenerate))
