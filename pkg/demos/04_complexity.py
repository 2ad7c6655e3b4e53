# %% [markdown]
# # Cost per iteration
#
# Each auxiliary point costs O(N), so one iteration over all N of them costs
# O(N^2).  The antenna count only enters the one-off Gram matrix, which the
# timings below exclude.  The prior step of NCS-IGA adds O(NL) for an
# L-point constellation.

# %%
import numpy as np

from csiga.harness import _time_iterations, prior_overhead_scan, timing_scan

rows, slope = timing_scan("cs-iga", M=256, Ns=(16, 32, 64, 128), T=100, reps=15)
for r in rows:
    print(f"N={r['N']:4d}   {r['iter_time_us']:8.1f} us/iteration")
print(f"log-log slope: {slope:.2f}")

# %%
for M in (128, 256, 512):
    t = _time_iterations("cs-iga", M, 32, 16, 100, 15, np.random.default_rng(0))
    print(f"M={M:4d}   {t * 1e6:6.1f} us/iteration at N=32")

# %%
rows, per_point, r2 = prior_overhead_scan(N=32, Ls=(4, 16, 64))
for r in rows:
    print(f"L={r['L']:3d}   prior step {r['overhead_us']:6.1f} us/iteration")
print(f"{per_point:.2f} us per constellation point (R^2 = {r2:.3f})")
