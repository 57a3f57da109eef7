"""Continuous dispersive measurement of qudits: stochastic trajectories and ensemble checks."""

__version__ = "0.1.0"

from .analysis import (CollapseFit, PhaseChoice, TrajectoryDensity, bhattacharyya_numeric,
                       bhattacharyya_signal, bhattacharyya_signal_pp, bhattacharyya_signal_ps,
                       collapse_rate, ensemble_mean, optimal_phase, postselect_final,
                       readout_gaussians, trajectory_density)
from .dispersive import (MeasurementConfig, PhysicalParams, Scheme, char_meas_time, clock_config,
                         config_from_physical, dispersive_shifts, dispersive_validity, pointer_angles)
from .errors import (ConfigError, InvalidDimensionError, SchemeError, SingularDetuningError,
                     StepperDivergenceError, UnsupportedMethodError)
from .kraus import (coherent_overlap, ito_drift_from_stratonovich, kraus_update_pp, kraus_update_ps, m_beta,
                    m_x, quadrature_overlap, step_stratonovich)
from .sme import (analytic_mean, bloch_pair_mean, dissipator, lindblad_pp, lindblad_ps, meas_superop,
                  readout_pp, readout_ps, step_bloch, step_ito, step_pure_exact)
from .state import (GellMannBasis, bloch_to_density, density_to_bloch, gell_mann_basis, purity,
                    validate_state)
from .trajectories import Ensemble, Method, TrajectoryRecord, simulate, simulate_ensemble
