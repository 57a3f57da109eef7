"""Dispersive qudit-cavity parameters and the effective measurement configuration.

Units throughout: angular frequencies in rad/us, times in us. Level labels are
0-based, ``j = 0 .. N-1``; transition ``j`` couples levels ``j`` and ``j+1``.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import InvalidDimensionError, SingularDetuningError


class Scheme(str, Enum):
    PHASE_PRESERVING = "phase_preserving"
    PHASE_SENSITIVE = "phase_sensitive"


def wrap_angle(x):
    """Reduce angles to the branch ``(-pi, pi]``."""
    x = np.asarray(x, dtype=float)
    y = np.pi - np.mod(np.pi - x, 2 * np.pi)
    return y if y.ndim else float(y)


@dataclass(frozen=True)
class MeasurementConfig:
    """Everything the stochastic dynamics depend on.

    Parameters
    ----------
    theta : sequence of float
        Pointer angles, one per level (rad). Kept raw, not wrapped.
    tau : float
        Characteristic measurement time (us).
    dt : float
        Integration step (us).
    eta : sequence of float, optional
        Detection efficiency per channel: two entries for phase-preserving,
        one for phase-sensitive. Defaults to perfect detection.
    C : float
        Amplification constant; only scales readouts.
    scheme : Scheme or str
    phi : float
        Amplification axis (rad) for phase-sensitive detection.
    alpha_mag : float
        Coherent-state amplitude ``|alpha|``; only scales readouts.
    max_dt_ratio : float
        A warning is issued if ``dt > max_dt_ratio * tau``.
    """

    theta: tuple
    tau: float
    dt: float
    eta: Optional[tuple] = None
    C: float = 1.0
    scheme: Scheme = Scheme.PHASE_PRESERVING
    phi: float = 0.0
    alpha_mag: float = 1.0
    max_dt_ratio: float = field(default=0.1, compare=False)

    def __post_init__(self):
        theta = tuple(float(t) for t in np.atleast_1d(self.theta))
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        nchan = 2 if self.scheme is Scheme.PHASE_PRESERVING else 1
        eta = (1.0,) * nchan if self.eta is None else tuple(float(e) for e in np.atleast_1d(self.eta))
        object.__setattr__(self, "eta", eta)
        for name in ("tau", "dt", "C", "phi", "alpha_mag"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if len(theta) < 1:
            raise InvalidDimensionError("need at least one pointer angle")
        if len(eta) != nchan:
            raise ValueError(f"{self.scheme.value} needs {nchan} efficiency entries, got {len(eta)}")
        if any(not (0.0 < e <= 1.0) for e in eta):
            raise ValueError(f"efficiencies must lie in (0, 1], got {eta}")
        if not self.tau > 0 or not self.dt > 0:
            raise ValueError("tau and dt must be positive")
        if not (self.C > 0 and self.alpha_mag > 0):
            raise ValueError("C and alpha_mag must be positive")
        if self.dt > self.max_dt_ratio * self.tau:
            warnings.warn(f"dt = {self.dt:g} exceeds {self.max_dt_ratio:g} tau; "
                          "Euler-Maruyama accuracy will suffer", RuntimeWarning, stacklevel=3)

    @property
    def N(self):
        return len(self.theta)

    @property
    def n_channels(self):
        return len(self.eta)

    @property
    def thetas(self):
        return np.array(self.theta)

    @property
    def efficient(self):
        return all(e == 1.0 for e in self.eta)

    def replace(self, **changes):
        d = self.to_dict()
        d.update(changes)
        d.pop("N", None)
        return MeasurementConfig(**d)

    def to_dict(self):
        d = asdict(self)
        d["scheme"] = self.scheme.value
        d["theta"] = list(self.theta)
        d["eta"] = list(self.eta)
        d.pop("max_dt_ratio")
        return d

    def digest(self):
        """Short stable identifier of the configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class PhysicalParams:
    """Qudit-cavity parameters of the dispersive Jaynes-Cummings model.

    ``omega`` holds the ``N`` level frequencies, ``g`` the ``N-1`` transition
    couplings, ``T`` the per-photon interaction time and ``kappa`` the optional
    cavity linewidth (used only for the bad-cavity check).
    """

    omega_r: float
    omega: tuple
    g: tuple
    T: float
    alpha_mag: float
    kappa: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in self.omega))
        object.__setattr__(self, "g", tuple(float(x) for x in self.g))
        if len(self.omega) < 2:
            raise InvalidDimensionError("need at least two levels")
        if len(self.g) != len(self.omega) - 1:
            raise ValueError(f"expected {len(self.omega) - 1} couplings, got {len(self.g)}")

    @property
    def N(self):
        return len(self.omega)

    @property
    def detunings(self):
        w = np.array(self.omega)
        return np.diff(w) - self.omega_r


def dispersive_shifts(p: PhysicalParams) -> np.ndarray:
    """Level-dependent cavity pull ``chi_j = g_{j-1}^2/D_{j-1} - g_j^2/D_j``.

    The bottom level has only the second term and the top level only the first.
    """
    delta = p.detunings
    for j, d in enumerate(delta):
        if d == 0:
            raise SingularDetuningError(j)
    g = np.array(p.g)
    s = g**2 / delta
    chi = np.zeros(p.N)
    chi[1:] += s
    chi[:-1] -= s
    return chi


def pointer_angles(chi, T, reduce=False):
    """Pointer angles ``theta_j = -chi_j T``, optionally wrapped to ``(-pi, pi]``."""
    if not T > 0:
        raise ValueError("interaction time T must be positive")
    theta = -np.asarray(chi, dtype=float) * T
    return wrap_angle(theta) if reduce else theta


def char_meas_time(T, alpha_mag):
    """Characteristic measurement time ``tau = T / (4 |alpha|^2)``."""
    if alpha_mag == 0:
        raise ZeroDivisionError("alpha_mag = 0: no photons, no measurement")
    return T / (4.0 * alpha_mag**2)


def config_from_physical(p: PhysicalParams, dt, scheme=Scheme.PHASE_PRESERVING, **kwargs):
    theta = pointer_angles(dispersive_shifts(p), p.T)
    tau = char_meas_time(p.T, p.alpha_mag)
    return MeasurementConfig(theta=tuple(theta), tau=tau, dt=dt, scheme=scheme,
                             alpha_mag=p.alpha_mag, **kwargs)


def clock_config(N, tau, dt, **kwargs):
    """Phase-preserving configuration with pointer angles ``2 pi j / N``."""
    if int(N) != N or N < 2:
        raise InvalidDimensionError(f"clock system needs N >= 2, got {N}")
    theta = 2 * np.pi * np.arange(N) / N
    return MeasurementConfig(theta=tuple(theta), tau=tau, dt=dt, **kwargs)


def pair_rates(theta_nm, tau):
    """Damping ``gamma`` and angular frequency ``omega`` of a coordinate pair."""
    return (1 - np.cos(theta_nm)) / (4 * tau), np.sin(theta_nm) / (4 * tau)


class ValidityReport(NamedTuple):
    ratios: np.ndarray
    n_crit: np.ndarray
    kappa_ratio: Optional[float]
    flagged: bool


def dispersive_validity(p: PhysicalParams, n_photons, threshold=0.1, bad_cavity_min=10.0):
    """Advisory check of the dispersive and bad-cavity approximations.

    ``ratios[j] = 4 n (g_j/D_j)^2`` must be small; ``n_crit[j] = (D_j/2g_j)^2``.
    ``flagged`` is set if any ratio exceeds ``threshold`` or, when ``kappa`` is
    given, if ``kappa / max|chi|`` is below ``bad_cavity_min``.
    """
    delta = p.detunings
    g = np.array(p.g)
    with np.errstate(divide="ignore"):
        ratios = 4 * n_photons * (g / delta) ** 2
        n_crit = np.where(g == 0, np.inf, (delta / (2 * np.where(g == 0, 1, g))) ** 2)
    flagged = bool(np.any(ratios > threshold))
    kappa_ratio = None
    if p.kappa is not None:
        chimax = np.max(np.abs(dispersive_shifts(p)))
        kappa_ratio = math.inf if chimax == 0 else p.kappa / chimax
        flagged = flagged or kappa_ratio < bad_cavity_min
    return ValidityReport(ratios, n_crit, kappa_ratio, flagged)
