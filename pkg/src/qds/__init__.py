"""Quasistatic dynamical systems on the circle.

Triangular arrays of expanding maps limiting to a curve of systems, the
interpolated time-average functional and its limit curve from instantaneous
invariant measures, and the Monte Carlo machinery to verify almost-sure
convergence at desk scale.
"""

from .core import (ErgodicPath, TriangularArrayScheme, centered_zeta_path,
                   default_t_grid, ensemble_zeta_paths, evolve_orbit,
                   observable_sequence, sup_distance, zeta_path,
                   zeta_values_from_observations)
from .errors import ConfigurationError, ConvergenceError, GridMismatchError
from .maps import (CurvePiece, CurveSpec, ExpandingMapParams, LambdaAstar,
                   admissibility_check, array_rate_check, c1_distance,
                   constant_curve, map_deriv, map_eval, map_second_deriv)
from .observables import (Observable, cosine, cosine_squared,
                          default_dictionary, sine, tabulated, tent)
from .srb import (InvariantDensity, UlamOperator, ZetaCurve, build_ulam,
                  density_curve, measure_expectation, stationary_density,
                  transfer_matrix, zeta_curve)
from .stats import (CorrelationSpec, DecayFit, EnsembleEstimate,
                    correlation_estimate, decay_fit,
                    four_point_expansion_check, fourth_moment_series, phi,
                    phi_half_integral_bound_check)

__version__ = "0.1.0"
