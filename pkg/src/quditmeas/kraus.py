"""Discrete Kraus updates and the Stratonovich form of the qudit dynamics.

This is a second, independently derived route to the trajectory equations:
products of coherent-state overlaps for batches of photon measurements, the
first-order generators ``m_beta`` and ``m_x``, an explicit Heun integrator for
the resulting Stratonovich equation, and the drift correction that maps the
Stratonovich drift back onto the Ito one.

Quadrature wave functions ``<X|alpha>`` are used without the ``pi**-1/4``
prefactor; it cancels in every normalized update.
"""
from __future__ import annotations

import numpy as np

from .dispersive import MeasurementConfig, Scheme
from .errors import SchemeError
from .state import bnorm, btrace
from .sme import _require_efficient, channel_factors, lindblad_drift, readout_means


def coherent_overlap(beta, alpha):
    """``<beta|alpha> = exp(-|beta - alpha|^2 / 2 + i Im(conj(beta) alpha))``."""
    beta = np.asarray(beta, dtype=complex)
    alpha = np.asarray(alpha, dtype=complex)
    return np.exp(-0.5 * np.abs(beta - alpha) ** 2 + 1j * np.imag(np.conj(beta) * alpha))


def quadrature_overlap(X, alpha):
    """Unnormalized ``<X|alpha>`` for the dimensionless quadrature ``X``."""
    X = np.asarray(X, dtype=float)
    alpha = np.asarray(alpha, dtype=complex)
    a, b = alpha.real, alpha.imag
    return np.exp(-0.5 * (X - np.sqrt(2) * a) ** 2 + 1j * b * (np.sqrt(2) * X - a))


def _log_normalize(c, logw):
    logw = logw - np.max(logw.real, axis=-1, keepdims=True)
    out = c * np.exp(logw)
    return out / bnorm(out)[..., None]


def _log_coherent_overlap(beta, alpha):
    return -0.5 * np.abs(beta - alpha) ** 2 + 1j * np.imag(np.conj(beta) * alpha)


def kraus_update_pp(c, betas, thetas, alpha_mag, normalize=True):
    """Apply a batch of heterodyne outcomes ``betas`` to amplitudes ``c``.

    ``c'_j = c_j prod_k <beta_k | alpha_j>`` with ``alpha_j = |alpha| exp(i theta_j)``.
    The product is accumulated in log space; with ``normalize`` the result is
    returned as a unit vector, otherwise the raw product is returned.
    """
    c = np.asarray(c, dtype=complex)
    betas = np.atleast_1d(np.asarray(betas, dtype=complex))
    alphas = alpha_mag * np.exp(1j * np.asarray(thetas, dtype=float))
    logw = np.sum(_log_coherent_overlap(betas[:, None], alphas[None, :]), axis=0)
    if normalize:
        return _log_normalize(c, logw)
    return c * np.exp(logw)


def kraus_update_ps(c, xs, thetas, alpha_mag, phi):
    """Apply a batch of quadrature outcomes ``xs`` measured along axis ``phi``."""
    c = np.asarray(c, dtype=complex)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    alphas = alpha_mag * np.exp(1j * (np.asarray(thetas, dtype=float) - phi))
    a, b = alphas.real, alphas.imag
    X = xs[:, None]
    logw = np.sum(-0.5 * (X - np.sqrt(2) * a) ** 2 + 1j * b * (np.sqrt(2) * X - a), axis=0)
    return _log_normalize(c, logw)


def kraus_operator_pp(I, Q, config: MeasurementConfig):
    """Diagonal of the time-averaged heterodyne Kraus operator for one step.

    Includes the Gaussian envelope, so that
    ``dt/(4 pi tau C^2 |alpha|^2) * int dI dQ |M|^2 = 1`` for every level.
    """
    amp = config.C * config.alpha_mag
    th = config.thetas
    k = config.dt / (8 * config.tau * amp**2)
    I = np.asarray(I, dtype=float)[..., None]
    Q = np.asarray(Q, dtype=float)[..., None]
    env = -k * ((I - amp * np.cos(th)) ** 2 + (Q - amp * np.sin(th)) ** 2)
    phase = config.dt / (4 * config.tau * amp) * (I * np.sin(th) - Q * np.cos(th))
    return np.exp(env + 1j * phase)


def kraus_normalization_weight(config):
    amp = config.C * config.alpha_mag
    return config.dt / (4 * np.pi * config.tau * amp**2)


def m_beta(I, Q, config: MeasurementConfig):
    """First-order generator ``(I - iQ)/(4 tau C |alpha|^2) sum_j alpha_j P_j`` (diagonal)."""
    if config.scheme is not Scheme.PHASE_PRESERVING:
        raise SchemeError("m_beta needs a phase-preserving configuration")
    amp = config.C * config.alpha_mag
    IQ = np.asarray(I, dtype=float) - 1j * np.asarray(Q, dtype=float)
    d = IQ[..., None] * np.exp(1j * config.thetas) / (4 * config.tau * amp)
    return _diag(d)


def m_x(r, config: MeasurementConfig):
    """First-order generator for a quadrature readout ``r`` along ``phi`` (diagonal)."""
    if config.scheme is not Scheme.PHASE_SENSITIVE:
        raise SchemeError("m_x needs a phase-sensitive configuration")
    amp = config.C * config.alpha_mag
    th = config.thetas - config.phi
    r = np.asarray(r, dtype=float)[..., None]
    d = np.exp(1j * th) * (np.sqrt(2) * r - amp * np.cos(th)) / (4 * config.tau * amp)
    return _diag(d)


def _diag(d):
    N = d.shape[-1]
    out = np.zeros(d.shape + (N,), dtype=complex)
    idx = np.arange(N)
    out[..., idx, idx] = d
    return out


def generator_diagonal(config, readout):
    """Diagonal entries of ``m_beta`` or ``m_x`` for readouts on the last axis."""
    readout = np.asarray(readout, dtype=float)
    if config.scheme is Scheme.PHASE_PRESERVING:
        return np.diagonal(m_beta(readout[..., 0], readout[..., 1], config), axis1=-2, axis2=-1)
    return np.diagonal(m_x(readout[..., 0], config), axis1=-2, axis2=-1)


def kraus_rhs(rho, m):
    """``m rho + rho m^+ - rho Tr(m rho + rho m^+)`` for diagonal ``m`` given by its entries."""
    rho = np.asarray(rho, dtype=complex)
    A = (m[..., :, None] + np.conj(m)[..., None, :]) * rho
    return A - rho * btrace(A)[..., None, None]


def step_stratonovich(rho, config, readout):
    """One Heun (explicit midpoint-trapezoid) step of the Stratonovich equation.

    The generator is built from the readout of this step, which stays fixed
    over the predictor and corrector stages. The result is symmetrized and
    renormalized like the Ito stepper output.
    """
    _require_efficient(config, "the Stratonovich Kraus path")
    rho = np.asarray(rho, dtype=complex)
    m = generator_diagonal(config, readout)
    dt = config.dt
    f0 = kraus_rhs(rho, m)
    pred = rho + f0 * dt
    new = rho + 0.5 * (f0 + kraus_rhs(pred, m)) * dt
    new = 0.5 * (new + np.conj(np.swapaxes(new, -1, -2)))
    return new / np.real(btrace(new))[..., None, None]


# Ito <-> Stratonovich ---------------------------------------------------

def noise_coefficients(config, rho):
    """``B[p, m, n]``, the coefficient of ``dW_p`` in ``d rho_mn`` (shared by both calculi)."""
    f = channel_factors(config)
    rho = np.asarray(rho, dtype=complex)
    pops = np.real(np.diagonal(rho))
    return rho[None] * (f.meas - (f.trace @ pops)[:, None, None])


def stratonovich_drift(config, rho):
    """Drift of the Kraus-generated equation: the generator at the mean readout."""
    _require_efficient(config, "the Stratonovich drift")
    rho = np.asarray(rho, dtype=complex)
    mean = readout_means(np.real(np.diagonal(rho)), config)
    return kraus_rhs(rho, generator_diagonal(config, mean))


def noise_jacobian(config, rho):
    """``J[p, m, n, i, j] = d B[p, m, n] / d rho_ij`` in the reduced coordinates.

    ``rho_ij`` and ``rho_ji`` are independent complex coordinates and the last
    population is eliminated through ``rho_{N-1,N-1} = 1 - sum_{k<N-1} rho_kk``,
    so the ``(N-1, N-1)`` slot of the Jacobian is identically zero.
    """
    f = channel_factors(config)
    rho = np.asarray(rho, dtype=complex)
    N = rho.shape[-1]
    pops = np.real(np.diagonal(rho))
    K = f.meas.shape[0]
    J = np.zeros((K, N, N, N, N), dtype=complex)
    # B_mn = rho_mn (mu_mn - c_last - sum_{k<last} (c_k - c_last) rho_kk)
    base = f.meas - (f.trace @ pops)[:, None, None]
    dc = f.trace - f.trace[:, -1:]
    for p in range(K):
        for m in range(N):
            for n in range(N):
                J[p, m, n, m, n] += base[p, m, n]
                for k in range(N - 1):
                    J[p, m, n, k, k] -= rho[m, n] * dc[p, k]
        # rho_{N-1,N-1} is itself a function of the free populations
        for k in range(N - 1):
            J[p, N - 1, N - 1, k, k] -= base[p, N - 1, N - 1]
    J[:, :, :, N - 1, N - 1] = 0.0
    return J


def ito_correction(config, rho):
    """``(1/2) sum_{ij} sum_p B_ij,p dB_mn,p/d rho_ij`` over the free coordinates."""
    B = noise_coefficients(config, rho)
    J = noise_jacobian(config, rho)
    N = B.shape[-1]
    mask = np.ones((N, N))
    mask[N - 1, N - 1] = 0.0
    corr = 0.5 * np.einsum("pij,pmnij->mn", B * mask, J)
    # the eliminated population follows from trace conservation
    corr[N - 1, N - 1] = -np.trace(corr[: N - 1, : N - 1]) if N > 1 else 0.0
    return corr


def ito_drift_from_stratonovich(config, rho):
    """Ito drift obtained by correcting the Stratonovich drift of the Kraus equation."""
    return stratonovich_drift(config, rho) + ito_correction(config, rho)


def ito_drift(config, rho):
    """Ito drift straight from the Lindblad dissipators, for comparison."""
    return lindblad_drift(rho, config)
