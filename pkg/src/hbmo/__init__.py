"""Threshold dynamics for curvature-accelerated (hyperbolic) mean curvature
flow: wave-equation evolution of signed distance fields, re-thresholded at
fixed intervals, with multiphase and volume-preserving variants."""

from .backend import backend_name
from .circle import (CircleParams, convergence_table, erf, erfinv, exact_radius,
                     extinction_time, idealized_recursion, pointmass_check)
from .errors import ConfigurationError, ConvergenceError, ExtinctInterfaceError
from .experiments import (ExperimentSpec, convergence_sweep, l2_radius_error,
                          run_experiment, run_ideal, run_reconstructed)
from .geometry import (Interface, average_radius, circle_distance,
                       extract_interface, load_interface, save_interface,
                       signed_distance_field, velocity_extension)
from .grid import (Grid2D, ScalarField, VectorField, integrate,
                   laplacian_neumann, load_field, make_grid, save_field,
                   save_pgm)
from .multiphase import (PhaseSet, SimplexBasis, build_z_field, multiphase_step,
                         phase_set_from_labels, run_multiphase, simplex_vectors,
                         threshold)
from .stepping import (HbmoState, Trajectory, first_step, run, smooth_initial,
                       step)
from .volume import (VolumeTargets, constrained_step, functional_descent,
                     functional_value)
from .wave import (WaveParams, WaveState, discrete_energy, first_leap,
                   leapfrog_step, poisson_reference, resolve_wave_params, solve)

__version__ = "0.1.0"
