# %% [markdown]
# # Soft output with NCS-IGA
#
# Replacing the Gaussian prior by the actual QAM alphabet makes the posterior
# non-Gaussian.  NCS-IGA adds one more auxiliary point that carries the
# discrete prior: every iteration it forms per-user symbol probabilities,
# matches their mean and variance with a Gaussian and feeds the difference
# back.  The last symbol probabilities become bit LLRs.

# %%
import numpy as np

from csiga import baselines, ncs_iga
from csiga.model import (DetectionProblem, generate_channel, make_constellation,
                         snr_to_sigma2, transmit)

rng = np.random.default_rng(1)
cons = make_constellation(4)
M, N = 8, 2
sigma2 = snr_to_sigma2(8.0)

# %% [markdown]
# With two QPSK users there are only 16 hypotheses, so the exact per-user
# marginals can be enumerated and compared with the detector's probabilities.

# %%
H = generate_channel(M, N, rng)
idx = rng.integers(0, cons.order, N)
x, y = transmit(idx, H, sigma2, cons, rng)
problem = DetectionProblem(H, y, sigma2, cons)

out = ncs_iga.detect_soft(problem, T=10, alpha=0.5)
exact = baselines.exact_marginals(problem)
np.set_printoptions(precision=4, suppress=True)
print("transmitted  ", idx)
print("NCS-IGA eta\n", out.eta)
print("exact eta\n", exact.eta_exact)
print("bit LLRs\n", out.llr)

# %% [markdown]
# Agreement of the hard decisions with the exact marginal argmax over many
# draws.

# %%
agree = 0
for _ in range(300):
    H = generate_channel(M, N, rng)
    x, y = transmit(rng.integers(0, 4, N), H, sigma2, cons, rng)
    p = DetectionProblem(H, y, sigma2, cons)
    agree += np.sum(ncs_iga.detect_soft(p).hard
                    == np.argmax(baselines.exact_marginals(p).eta_exact, axis=1))
print(f"agreement: {agree / 600:.3f}")
