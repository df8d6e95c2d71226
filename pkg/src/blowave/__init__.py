"""Numerical companion for the semilinear wave equation u_tt - Laplacian u = (u_t)^2 in 3+1 dimensions."""
from .asymptotic_system import (AsymptoticData, asymptotic_lifespan, asymptotic_profile,
                                decay_rate_U, integrate_U, solve_Uq)
from .approximate_solution import (ApproximateSolution, CutoffSpec, eval_uapp,
                                   first_order_vectorfield_check, uapp_residual)
from .blowup_diagnostics import (BlowupCertificate, beta_functional, blowup_radius_bound,
                                 n_functional, ode_inequality_check)
from .data import make, parse_datum
from .linear_wave import SignCondition, classify_sign_condition, kirchhoff_eval
from .radial_fields import RadialGrid, RadialProfile, SpacetimeField
from .semilinear_solver import (BackwardProblemSpec, SolveStatus, cauchy_gap, energy,
                                solve_backward, solve_forward, tail_lower_bound)
from .spherical_means import mean_profile, spherical_mean

__version__ = "0.1.0"
