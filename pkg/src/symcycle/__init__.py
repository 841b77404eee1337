"""Numerical laboratory for cyclic symmetric ODE systems.

Each element is driven by one neighbour (generative loop), decays on its
own, and is inhibited bilinearly by another neighbour (suppressive loop).
Depending on rates and loop offsets a system either returns to its positive
fixed point (propagator) or settles on a sustained oscillation (generator).
"""
from .diagnostics import (Classification, DiagnosticsSeries, Thresholds, classify,
                          diagnostics_series, lyapunov_rate, lyapunov_sum, onroad_energy,
                          oscillation_metrics, reference_points)
from .equilibria import (EquilibriumReport, HomotopyPoint, averaged_fixed_point,
                         bounding_specs, brouwer_iterate, fixed_point_1d, fixed_point_2d,
                         homotopy_path, newton_fixed_point, solve_fixed_point)
from .integrator import (DivergenceError, InputEntry, InputSchedule, IntegrationBlowup,
                         IntegratorConfig, Trajectory, augmented_field, simulate, step_rk4)
from .kernels import BACKEND
from .model import (FieldDecomposition, SpecError, SystemSpec, decompose_field, jacobian,
                    validate, vector_field)
from .scenarios import Scenario, builtin_catalog, run_scenario, run_sweep

__version__ = "0.1.0"
