"""Steady states, output quadrature spectra and Reid EPR-steering products
for a non-degenerate optical parametric oscillator with an injected signal.

Phase-space variables are always ordered
``(alpha0, alpha0+, alpha1, alpha1+, alpha2, alpha2+)``.
"""
from .errors import (DegenerateConditioning, ExcessiveDivergence, ImaginaryResidue,
                     InconsistentCovariance, InvalidConfiguration, NdopoError, NoConvergence,
                     NonphysicalState, NoRealRoot, NoUniqueSolution, SingularMatrix,
                     UnstableDynamics)
from .model import SteadyState, SystemParams, expand, phase_space_index, validate_params
from .ou_engine import (build_diffusion_matrix, build_drift_matrix, check_stability,
                        drift_diffusion, integrate_spectrum, intracavity_spectrum,
                        output_covariances, quadrature_spectrum, spectrum_at)
from .pp_oracle import (SdeSettings, estimate_output_spectrum, simulate_linearized_ou,
                        simulate_positive_p, solve_lyapunov)
from .steady_state import (SolverSettings, quintic_coefficients, solve_steady_state,
                           steady_state_oracle)
from .steering import (EPRRecord, FrequencyGrid, SteeringClass, SteeringKind, classify_pair,
                       epr_product, epr_records, inferred_variance, minimize_over_frequency)
from .sweep import (SweepConfig, SweepRow, emit_figure_scripts, parse_config, run_sweep,
                    write_csv)

__version__ = "0.1.0"
