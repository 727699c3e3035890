"""Simulation and verification toolkit for a rotating disk-beam with boundary feedback."""
from .exceptions import (ConfigurationError, DataError, DiskBeamError, DomainError,
                         NotApplicable, NumericalError, StepFailure)
from .model import (DampingLaw, FeedbackLaw, GrowthProfile, PhysicalParams, TorqueLaw,
                    check_hypotheses, validate_params)
from .spatial import Grid, Operators, assemble, beam_modes, coercivity_min_eig, static_solve
from .config import SimConfig, load_config, config_from_dict
from .dynamics import BeamState, Trace, initial_state, integrate, simulate, step
from .functionals import (FunctionalSeries, diagnostic_R, dissipation_residuals, energy_E,
                          energy_E0, evaluate_trace, functional_F, lyapunov_V)
from .decay import (EnvelopeFit, EnvelopeFitError, H1, H1_inv, H_calculus, H_prime, H_star,
                    RateFit, calibrate_envelope, fit_rates, spectral_abscissa, verify_young)

__version__ = "0.1.0"
