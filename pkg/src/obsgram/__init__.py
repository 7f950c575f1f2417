"""Empirical observability Gramians for deterministic and stochastic systems."""

__version__ = "0.1.0"

from .linalg import mat_exp, sym_eig, kron, kron_sum, vec, unvec, rank_with_tolerance
from .systems import (
    ControlSignal,
    SystemModel,
    LinearAdditiveSpec,
    LinearMultiplicativeSpec,
    build_system,
    linear_to_model,
)
from .integrate import TimeGrid, WienerPath, derive_stream, wiener_path, integrate_ode, integrate_sde, output_of
from .gramian import GramianResult, perturbed_outputs, assemble_gramian, empirical_gramian
from .bounds import (
    BoundReport,
    jacobian_estimate,
    third_derivative_sup,
    weak_observability_bound,
    fisher_upper_bound,
    fisher_condition_bounds,
)
from .closed_form import (
    linear_observability_gramian,
    ou_expected_gramian,
    second_moment_propagation,
    bs_expected_gramian,
    stochastic_observability_test,
    observability_expectation,
    mean_gramian_parts,
)
from .ensemble import EnsembleConfig, run_ensemble, sweep, empirical_decomposition, heading_experiment
