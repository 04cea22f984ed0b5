"""Continuous-variable IQP circuits as high-dimensional oscillatory integrals."""
from .circuit import (
    CircuitSpec,
    GridSpec,
    OutcomeGrid,
    TabulatedPhase,
    default_grid,
    displace,
)
from .exceptions import BudgetExceededError, NumericalCheckError
from .hardness import (
    BooleanOracle,
    FoolingInstance,
    anticoncentration_report,
    arccos_embed,
    build_sharp_p_phase,
    fooling_demo,
    fooling_eval,
    fooling_node_bound,
    hiding_check,
    markov_check,
    verify_sharp_p_sum,
)
from .integrator import (
    AmplitudeEstimate,
    PhaseBinReport,
    binned_amplitude,
    exact_probability_sinc_1d,
    gaussian_closed_form,
    oscillation_scale,
    riemann_amplitude,
    squeezed_amplitude_grid,
    squeezed_amplitude_mc,
)
from .polynomial import CZ, CubicPhase, Gate, Polynomial, Z, from_gates, random_polynomial
from .sampler import OutcomeDistribution, distribution, l1_distance, perturb, sample

__all__ = [
    "AmplitudeEstimate",
    "BooleanOracle",
    "BudgetExceededError",
    "CZ",
    "CircuitSpec",
    "CubicPhase",
    "FoolingInstance",
    "Gate",
    "GridSpec",
    "NumericalCheckError",
    "OutcomeDistribution",
    "OutcomeGrid",
    "PhaseBinReport",
    "Polynomial",
    "TabulatedPhase",
    "Z",
    "anticoncentration_report",
    "arccos_embed",
    "binned_amplitude",
    "build_sharp_p_phase",
    "default_grid",
    "displace",
    "distribution",
    "exact_probability_sinc_1d",
    "fooling_demo",
    "fooling_eval",
    "fooling_node_bound",
    "from_gates",
    "gaussian_closed_form",
    "hiding_check",
    "l1_distance",
    "markov_check",
    "oscillation_scale",
    "perturb",
    "random_polynomial",
    "riemann_amplitude",
    "sample",
    "squeezed_amplitude_grid",
    "squeezed_amplitude_mc",
    "verify_sharp_p_sum",
]
