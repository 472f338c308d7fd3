from .admittance import (
    DisconnectedNetwork,
    SingularImpedance,
    assemble_ybus,
    branch_admittance,
    branch_impedance,
    check_connected,
    network_branch_admittances,
    slack_voltage,
    transformer_sequence_impedance,
)
from .fortescue import (
    ALPHA,
    fortescue_inverse,
    fortescue_matrix,
    phase_to_sequence,
    sequence_components,
    sequence_to_phase,
)
from .model import (
    PHASES,
    THREE_PHASE,
    Bus,
    Line,
    Load,
    NetworkModel,
    OperatingLimits,
    PvUnit,
    SequenceImpedance,
    Transformer,
    line_rating_pu,
    transformer_rating_pu,
)
from .validate import NetworkValidationError, validate, validation_errors
