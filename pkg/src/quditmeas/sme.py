"""Stochastic master equation for dispersive qudit readout.

All measurement operators are diagonal in the qudit basis, so the steppers
work with the diagonal entries ``l_k`` of each channel operator and apply the
superoperators elementwise. The general matrix forms :func:`dissipator` and
:func:`meas_superop` are kept for arbitrary ``L`` and are the reference the
fast paths are tested against.

Noise arguments ``xi`` are white-noise samples with variance ``1/dt`` (so
``xi * dt`` is a Wiener increment), laid out on the last axis by channel:
``(xi_I, xi_Q)`` for phase-preserving and ``(xi,)`` for phase-sensitive
detection. Every stepper accepts a single state or a stack of states.
"""
from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .dispersive import MeasurementConfig, Scheme
from .errors import InvalidDimensionError, SchemeError, StepperDivergenceError, UnsupportedMethodError
from .state import bnorm, btrace, gell_mann_basis, rowdot, seqsum


def _dag(a):
    return np.conj(np.swapaxes(a, -1, -2))


def lindblad_pp(config: MeasurementConfig):
    """``(L_I, L_Q)`` for phase-preserving detection.

    ``L_I = sum_j exp(i theta_j) P_j / (2 sqrt(2 tau))`` and ``L_Q = -i L_I``.
    """
    if config.scheme is not Scheme.PHASE_PRESERVING:
        raise SchemeError("lindblad_pp needs a phase-preserving configuration")
    LI = np.diag(np.exp(1j * config.thetas)) / (2 * np.sqrt(2 * config.tau))
    return LI, -1j * LI


def lindblad_ps(config: MeasurementConfig):
    """``L = sum_j exp(i(theta_j - phi)) P_j / (2 sqrt(tau))`` for phase-sensitive detection."""
    if config.scheme is not Scheme.PHASE_SENSITIVE:
        raise SchemeError("lindblad_ps needs a phase-sensitive configuration")
    return np.diag(np.exp(1j * (config.thetas - config.phi))) / (2 * np.sqrt(config.tau))


def lindblad_operators(config):
    if config.scheme is Scheme.PHASE_PRESERVING:
        return list(lindblad_pp(config))
    return [lindblad_ps(config)]


def dissipator(L, rho):
    """``L rho L^+ - (L^+ L rho + rho L^+ L) / 2``."""
    L = np.asarray(L)
    rho = np.asarray(rho)
    if L.shape[-1] != rho.shape[-1]:
        raise InvalidDimensionError(f"operator dimension {L.shape[-1]} != state dimension {rho.shape[-1]}")
    Ld = _dag(L)
    LdL = Ld @ L
    return L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)


def meas_superop(L, rho):
    """``L rho + rho L^+ - rho Tr(L rho + rho L^+)``."""
    L = np.asarray(L)
    rho = np.asarray(rho)
    if L.shape[-1] != rho.shape[-1]:
        raise InvalidDimensionError(f"operator dimension {L.shape[-1]} != state dimension {rho.shape[-1]}")
    A = L @ rho + rho @ _dag(L)
    return A - rho * btrace(A)[..., None, None]


class ChannelFactors(NamedTuple):
    """Precomputed elementwise factors of the diagonal SME.

    ``drift[m, n]`` multiplies ``rho_mn`` in the total dissipator,
    ``meas[k, m, n] = l_km + conj(l_kn)`` and ``trace[k, j] = 2 Re l_kj``.
    ``meas0`` and ``trace0`` are the same factors shifted by ``trace[k, 0]``;
    for unit-trace states they give the identical measurement term, and they
    make it vanish exactly when all pointer angles coincide.
    """

    l: np.ndarray
    drift: np.ndarray
    meas: np.ndarray
    trace: np.ndarray
    meas0: np.ndarray
    trace0: np.ndarray
    sqrt_eta: np.ndarray


@lru_cache(maxsize=64)
def channel_factors(config: MeasurementConfig) -> ChannelFactors:
    l = np.array([np.diag(L) for L in lindblad_operators(config)])
    th = config.thetas
    # sum_k D[L_k] in closed form; the same for both schemes
    drift = -(1 - np.exp(1j * (th[:, None] - th[None, :]))) / (4 * config.tau)
    meas = l[:, :, None] + np.conj(l)[:, None, :]
    trace = 2 * l.real
    ref = trace[:, :1]
    out = ChannelFactors(l, drift, meas, trace, meas - ref[:, :, None], trace - ref,
                         np.sqrt(np.array(config.eta)))
    for a in out:
        a.setflags(write=False)
    return out


def lindblad_drift(rho, config):
    """Deterministic part ``sum_k D_k[rho]`` of the SME (elementwise fast path)."""
    return np.asarray(rho) * channel_factors(config).drift


def meas_terms(rho, config):
    """``M_k[rho]`` for every channel, stacked on axis ``-3`` (elementwise fast path).

    Assumes ``Tr rho = 1``.
    """
    f = channel_factors(config)
    rho = np.asarray(rho)
    pops = np.real(np.diagonal(rho, axis1=-2, axis2=-1))
    tr = rowdot(pops, f.trace0)  # (..., K)
    return rho[..., None, :, :] * (f.meas0 - tr[..., :, None, None])


# readouts ---------------------------------------------------------------

def populations(rho):
    return np.real(np.diagonal(np.asarray(rho), axis1=-2, axis2=-1))


def readout_means(pops, config):
    """Noise-free readout for level populations ``pops`` (last axis)."""
    pops = np.asarray(pops, dtype=float)
    amp = config.C * config.alpha_mag
    th = config.thetas
    if config.scheme is Scheme.PHASE_PRESERVING:
        return amp * rowdot(pops, np.array([np.cos(th), np.sin(th)]))
    return np.sqrt(2) * amp * rowdot(pops, np.cos(th - config.phi)[None])


def readout_noise_scale(config):
    """Per-channel factor multiplying ``xi`` in the readout, ``C|alpha| sqrt(2 tau / eta)``."""
    return config.C * config.alpha_mag * np.sqrt(2 * config.tau / np.array(config.eta))


def readout_from_populations(pops, config, xi):
    return readout_means(pops, config) + readout_noise_scale(config) * np.asarray(xi, dtype=float)


def readout_pp(rho, config, xi1, xi2):
    """Quadrature readouts ``(I, Q)`` for the state ``rho`` and noise ``(xi1, xi2)``."""
    if config.scheme is not Scheme.PHASE_PRESERVING:
        raise SchemeError("readout_pp needs a phase-preserving configuration")
    xi = np.stack(np.broadcast_arrays(np.asarray(xi1, float), np.asarray(xi2, float)), axis=-1)
    out = readout_from_populations(populations(rho), config, xi)
    return out[..., 0], out[..., 1]


def readout_ps(rho, config, xi):
    """Single-quadrature readout ``r`` for the state ``rho`` and noise ``xi``."""
    if config.scheme is not Scheme.PHASE_SENSITIVE:
        raise SchemeError("readout_ps needs a phase-sensitive configuration")
    xi = np.asarray(xi, float)[..., None]
    return readout_from_populations(populations(rho), config, xi)[..., 0]


def noise_from_readout(pops, config, readout):
    """Invert :func:`readout_from_populations` for the white noise."""
    return (np.asarray(readout) - readout_means(pops, config)) / readout_noise_scale(config)


# steppers ---------------------------------------------------------------

class StepDefects(NamedTuple):
    """Worst-case defects of one step over a stack of states.

    ``trace`` and ``hermiticity`` are measured before the defensive
    renormalization and symmetrization; ``min_eigenvalue`` after them
    (``nan`` when positivity was not checked).
    """

    trace: float
    hermiticity: float
    min_eigenvalue: float


def _check_noise(xi, config):
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1:] != (config.n_channels,):
        raise ValueError(f"expected {config.n_channels} noise channel(s) on the last axis, got shape {xi.shape}")
    return xi


def ito_increment(rho, config, xi):
    """Raw Euler-Maruyama increment ``sum_k D_k dt + sqrt(eta_k) M_k xi_k dt``."""
    f = channel_factors(config)
    xi = _check_noise(xi, config)
    dt = config.dt
    rho = np.asarray(rho, dtype=complex)
    w = (f.sqrt_eta * xi) * dt  # (..., K)
    M = meas_terms(rho, config)
    return rho * f.drift * dt + seqsum(w[..., :, None, None] * M, axis=-3)


def step_ito(rho, config, xi, check_positivity=True, positivity_abort=None, return_defects=False):
    """One Euler-Maruyama step of the Ito SME (``H = 0``).

    The result is symmetrized and renormalized to unit trace. With
    ``positivity_abort`` set, a smallest eigenvalue below ``-positivity_abort``
    raises :class:`StepperDivergenceError`; non-finite states always raise.
    """
    new = np.asarray(rho, dtype=complex) + ito_increment(rho, config, xi)
    return _finish(new, check_positivity, positivity_abort, return_defects)


def _finish(new, check_positivity, positivity_abort, return_defects):
    herm = np.max(np.abs(new - _dag(new))) if return_defects else 0.0
    new = 0.5 * (new + _dag(new))
    tr = np.real(btrace(new))
    if not np.all(np.isfinite(tr)):
        raise StepperDivergenceError("state became non-finite; reduce dt")
    new = new / tr[..., None, None]
    mineig = np.nan
    if check_positivity or positivity_abort is not None:
        mineig = float(np.min(np.linalg.eigvalsh(new)))
        if positivity_abort is not None and mineig < -positivity_abort:
            raise StepperDivergenceError(
                f"smallest eigenvalue {mineig:.3g} below -{positivity_abort:g}; reduce dt")
    if return_defects:
        return new, StepDefects(float(np.max(np.abs(tr - 1.0))), float(herm), mineig)
    return new


class PureStep(NamedTuple):
    amplitudes: np.ndarray
    normalized: np.ndarray


def _require_efficient(config, what):
    if not config.efficient:
        raise UnsupportedMethodError(f"{what} is defined for perfect detection only; use step_ito for eta < 1")


def exact_exponent(config, readout):
    """Log-weights of the time-averaged state-disturbance map for one step."""
    readout = np.asarray(readout, dtype=float)
    amp = config.C * config.alpha_mag
    scale = config.dt / (4 * config.tau * amp)
    if config.scheme is Scheme.PHASE_PRESERVING:
        IQ = readout[..., 0] - 1j * readout[..., 1]
        return scale * IQ[..., None] * np.exp(1j * config.thetas)
    th = config.thetas - config.phi
    r = readout[..., 0]
    return scale * np.exp(1j * th) * (np.sqrt(2) * r[..., None] - amp * np.cos(th))


def step_pure_exact(c, config, readout):
    """Update pure amplitudes with the exponential state-disturbance map.

    ``readout`` is ``(..., 2)`` holding ``(I, Q)`` or ``(..., 1)`` holding ``r``.
    Returns the unnormalized amplitudes and their normalized view.
    """
    _require_efficient(config, "the exact pure-state map")
    c = np.asarray(c, dtype=complex)
    eps = exact_exponent(config, readout)
    with np.errstate(over="ignore", invalid="ignore"):
        raw = c * np.exp(eps)  # may overflow; the normalized view below never does
    shifted = c * np.exp(eps - np.max(eps.real, axis=-1, keepdims=True))
    norm = bnorm(shifted)[..., None]
    if not np.all(np.isfinite(norm)) or np.any(norm == 0):
        raise StepperDivergenceError("normalization of the exact update failed")
    return PureStep(raw, shifted / norm)


@lru_cache(maxsize=16)
def _bloch_layout(N):
    basis = gell_mann_basis(N)
    pairs = list(basis.pairs())
    m = np.array([p[0] for p in pairs], dtype=int)
    n = np.array([p[1] for p in pairs], dtype=int)
    i_mn = np.array([p[2] for p in pairs], dtype=int)
    i_nm = np.array([p[3] for p in pairs], dtype=int)
    d_idx = np.array([basis.diag_index(k) for k in range(N - 1)], dtype=int)
    # diagonal coordinate k = sqrt(2/((k+1)(k+2))) (sum_{j<=k} rho_jj - (k+1) rho_{k+1,k+1})
    W = np.zeros((N - 1, N))
    for k in range(N - 1):
        W[k, : k + 1] = 1.0
        W[k, k + 1] = -(k + 1)
        W[k] *= np.sqrt(2.0 / ((k + 1) * (k + 2)))
    return m, n, i_mn, i_nm, d_idx, W


def step_bloch(q, config, xi, rho_diag):
    """One Euler-Maruyama step written directly in Bloch coordinates.

    Each pair ``(q_mn, q_nm)`` follows the coupled damped-oscillator drift with
    its own multiplicative noise; the diagonal coordinates carry only the
    population noise. Phase-preserving, perfect detection only.
    """
    if config.scheme is not Scheme.PHASE_PRESERVING:
        raise SchemeError("step_bloch is implemented for phase-preserving detection")
    _require_efficient(config, "step_bloch")
    xi = _check_noise(xi, config)
    q = np.asarray(q, dtype=float)
    rho_diag = np.asarray(rho_diag, dtype=float)
    N, tau, dt = config.N, config.tau, config.dt
    m, n, i_mn, i_nm, d_idx, W = _bloch_layout(N)
    th = config.thetas
    c, s = np.cos(th), np.sin(th)
    x1, x2 = xi[..., 0:1], xi[..., 1:2]
    xj = x1 * c + x2 * s  # (..., N)
    xpj = x1 * s - x2 * c
    S = seqsum(rho_diag * xj)[..., None]
    th_nm = th[n] - th[m]
    a = (1 - np.cos(th_nm)) / (4 * tau)
    b = np.sin(th_nm) / (4 * tau)
    X = xj[..., m] + xj[..., n] - 2 * S
    Y = xpj[..., m] - xpj[..., n]
    qmn, qnm = q[..., i_mn], q[..., i_nm]
    g = 1.0 / (2 * np.sqrt(2 * tau))
    out = q.copy()
    out[..., i_mn] = qmn + (-a * qmn - b * qnm + g * (qmn * X + qnm * Y)) * dt
    out[..., i_nm] = qnm + (-a * qnm + b * qmn + g * (qnm * X - qmn * Y)) * dt
    drho = rho_diag * (xj - S) * dt / np.sqrt(2 * tau)
    out[..., d_idx] = q[..., d_idx] + rowdot(drho, W)
    return out


# ensemble-average solutions ---------------------------------------------

def analytic_mean(rho0, config, t):
    """Ensemble-averaged state at time ``t``.

    Populations are constant; coherence ``rho_mn`` is multiplied by
    ``exp(-t (1 - exp(-i theta_nm)) / (4 tau))`` with ``theta_nm = theta_n - theta_m``.
    Identical for both detection schemes and any ``phi``. ``t`` may be an array,
    in which case time runs along a new leading axis.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    th = config.thetas
    th_nm = th[None, :] - th[:, None]
    rate = (1 - np.exp(-1j * th_nm)) / (4 * config.tau)
    t = np.asarray(t, dtype=float)
    return rho0 * np.exp(-t[..., None, None] * rate)


def bloch_pair_mean(q_mn0, q_nm0, theta_nm, tau, t):
    """Damped rotation of an ensemble-averaged coordinate pair ``(q_mn, q_nm)``."""
    t = np.asarray(t, dtype=float)
    gamma = (1 - np.cos(theta_nm)) / (4 * tau)
    omega = np.sin(theta_nm) / (4 * tau)
    env = np.exp(-gamma * t)
    co, si = np.cos(omega * t), np.sin(omega * t)
    return env * (q_mn0 * co - q_nm0 * si), env * (q_nm0 * co + q_mn0 * si)
