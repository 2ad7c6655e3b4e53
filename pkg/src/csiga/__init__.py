"""Cross-splitting information-geometry detectors for uplink multi-user MIMO.

``cs_iga.detect`` gives LMMSE-equivalent means (and approximate variances) at O(N^2) cost
per iteration; ``ncs_iga.detect_soft`` adds a discrete QAM prior and returns
symbol posteriors and bit LLRs.  ``baselines`` holds exact references and
``harness`` the Monte Carlo driver.
"""

__version__ = "0.1.0"

from .errors import IndefiniteStateError
from .model import (Constellation, DetectionProblem, PrecomputedGram, generate_channel,
                    make_constellation, precompute, snr_to_sigma2, transmit)
from .ig_core import (GaussianExp, GaussianNat, exp_to_nat, free_energy, kl_divergence,
                      m_project_diag, nat_to_exp)
from .splitting import SplitComponents, assemble_cross_matrix, cross_split
from .cs_iga import LinearConfig, LinearOutput, detect
from .ncs_iga import LlrOutput, SoftConfig, detect_soft, llr_from_eta, symbol_posteriors
from .baselines import exact_marginals, lmmse, matched_filter
