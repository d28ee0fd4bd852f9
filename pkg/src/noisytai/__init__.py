"""Distributed testing against independence over a noisy channel.

All information quantities are in nats.
"""

from ._validation import ConvergenceError, SizeLimitError, ValidationError
from .blowup import (
    SequenceSet,
    SequenceSpace,
    blowing_up_bound,
    compute_l_n,
    hamming_neighborhood,
    penalty_factor_log,
    verify_blowup_exact,
)
from .capacity import Dmc, bec, bsc, capacity, closed_form_capacity
from .estimators import BlahutArimoto, LikelihoodRatioDetector, TaiExponent
from .exponent import (
    AuxChannel,
    dsbs_theta_closed_form,
    r_s_mu_nu,
    region,
    theta,
    theta_direct,
    theta_mu,
)
from .probcore import (
    Alphabet,
    CondPmf,
    JointPmf,
    Pmf,
    compose,
    conditional_mutual_information,
    entropy,
    kl_divergence,
    mutual_information,
    total_variation,
)
from .simulator import (
    CodebookEncoder,
    DecisionRule,
    SymbolwiseEncoder,
    TestInstance,
    blow_up_rule,
    converse_check,
    exact_errors,
    exponent_estimate,
    likelihood_rule,
    monte_carlo_errors,
    reliable_set,
    truncated_measure,
)

__version__ = "0.1.0"
