"""Key rates, CH thresholds and Monte Carlo simulation for the loss-tolerant
generalized ent-B92 device-independent QKD protocol."""

__version__ = "0.1.0"

from .errors import DomainError, InsufficientDataError, NoViolationError, UndefinedQBERError
from .keyrate import (
    Efficiencies,
    RateReport,
    binary_entropy,
    conclusive_prob,
    f_ch,
    qber_conclusive,
    qber_ps,
    rate_bb84_style,
    rate_bb84_trusted,
    rate_no_postselection,
    rate_post_selected,
    rate_report,
    s_ch_ideal,
    s_ch_max,
)
from .loss import predict_probabilities, predict_s_ch, threshold_bob, threshold_symmetric
from .states import (
    CoincidenceTable,
    MeasurementOutcome,
    NoiseParams,
    ProtocolParams,
    TwoQubitState,
    apply_noise,
    bob_povm,
    coincidence_probs,
    make_state,
    projector,
)
