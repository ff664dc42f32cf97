"""
From pure prediction to pure exploration
========================================

The fused policy asks the predictor for the k least popular cached ids and
lets the bandit pick among them. k=1 trusts the forecast blindly; k=K hands
the whole cache to the bandit.
"""

# %%
from lae2sim import LaE2Config, LaE2Policy, SyntheticSpec, generate_synthetic, simulate

N, K = 500, 20
trace = generate_synthetic(SyntheticSpec(N, 100_000, 0.8, shift_period=5000, rng_seed=3))

# %%
for k in (1, 2, 5, 10, 15, 20):
    policy = LaE2Policy(N, LaE2Config(top_k=k))
    print(f"k={k:>2}  hit rate {simulate(trace, K, policy).hit_rate:.4f}")

# %%
# The endpoints are exactly the single-component policies.
one = simulate(trace, K, LaE2Policy(N, LaE2Config(top_k=1))).evictions
pred = simulate(trace, K, LaE2Policy(N, LaE2Config(mode="prediction"))).evictions
print("k=1 matches prediction-only:", one == pred)
