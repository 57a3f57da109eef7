"""
Kraus operators, time averaging and the Ito correction
======================================================

Each light pulse leaves the cavity in a coherent state tagged by the qudit
level. Updating a state with a batch of individual heterodyne outcomes gives
the same result as one update with their average, which is what the
stochastic master equation works with. The Kraus-form equation is a
Stratonovich equation; adding the Ito correction recovers the Lindblad drift.
"""

import numpy as np

from quditmeas import MeasurementConfig, ito_drift_from_stratonovich, kraus_update_pp
from quditmeas import step_pure_exact
from quditmeas.kraus import ito_drift, stratonovich_drift
from quditmeas.state import pure_density, random_density

rng = np.random.default_rng(5)
alpha, T, n = 0.7, 0.02, 4
theta = (0.0, 2.1, 4.2)
tau = T / (4 * alpha**2)
cfg = MeasurementConfig(theta=theta, tau=tau, dt=n * T, max_dt_ratio=np.inf, alpha_mag=alpha)

c = np.array([0.6, 0.0, 0.8], dtype=complex)
betas = alpha + rng.normal(size=n) + 1j * rng.normal(size=n)
batch = kraus_update_pp(c, betas, theta, alpha)
avg = betas.mean()
once = step_pure_exact(c, cfg, [avg.real, avg.imag]).normalized
print("populations after 4 pulses, one by one:", np.round(np.abs(batch) ** 2, 6))
print("populations from the averaged readout:   ", np.round(np.abs(once) ** 2, 6))
print(f"largest density difference {np.max(np.abs(pure_density(batch) - pure_density(once))):.1e}")

# equator state of a qubit: the Stratonovich drift vanishes and the whole
# dephasing comes from the correction term
qubit = MeasurementConfig(theta=(0, np.pi), tau=1.0, dt=1e-3)
plus = np.full((2, 2), 0.5)
print(f"\nqubit |+>: Stratonovich drift of rho_01 {abs(stratonovich_drift(qubit, plus)[0, 1]):.1e}")
print(f"           corrected drift of rho_01    {ito_drift_from_stratonovich(qubit, plus)[0, 1].real:+.4f}")

worst = 0.0
for N in (2, 3, 6):
    cfg = MeasurementConfig(theta=tuple(rng.uniform(-np.pi, np.pi, N)), tau=1.0, dt=1e-3)
    for _ in range(20):
        rho = random_density(N, rng)
        worst = max(worst, np.max(np.abs(ito_drift_from_stratonovich(cfg, rho) - ito_drift(cfg, rho))))
print(f"\ncorrected Stratonovich against Ito drift, 60 random states: {worst:.1e}")
