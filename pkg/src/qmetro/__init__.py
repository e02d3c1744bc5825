"""Noisy-qubit metrology with correlated probe states.

Compares a single-qubit, single-channel protocol with an ``n``-qubit
correlated protocol whose spectator qubits suffer their own noise, using
lowest-order closed forms backed by dense density-matrix simulation.
"""

from .advisor import (
    AdviceRequest,
    ProtocolReport,
    Recommendation,
    advise,
    build_protocol,
    sweep,
    validate,
)
from .channels import (
    ChannelFamily,
    ChannelKind,
    X_AXIS,
    Y_AXIS,
    Z_AXIS,
    SpectralTriple,
    channel_matrix,
    channel_matrix_derivative,
    gram_spectrum,
    real_diagonal_decomposition,
    svd3,
)
from .errors import *  # noqa: F401,F403
from .measurement import (
    MeasurementKind,
    MeasurementScheme,
    estimation_experiment,
    fisher_generic,
    fisher_numeric,
    fisher_tailored,
    generic_probabilities_closed,
    simulated_probabilities,
    tailored_probabilities_closed,
)
from .qfi import (
    QfiBounds,
    cs_qfi_bounds,
    cs_qfi_closed_form,
    local_frame,
    protocol_qfi_exact,
    qfi_exact_sld,
    qfi_series_order2,
    sqsc_optimal,
    sqsc_qfi,
)
from .states import (
    DensityOperator,
    ProtocolSpec,
    Spectator,
    apply_local_unital_channel,
    apply_local_unitary,
    initial_product_state,
    outcome_probabilities,
    pauli_combination,
    u_c,
    u_prep,
)
from .twist import (
    TwistPlan,
    apply_twists,
    plan_twists,
    su2_from_rotation,
    twist_rotation,
    twisted_gram,
)

__version__ = "0.1.0"
