"""
Scoring eviction candidates with a sliding-window bandit
========================================================

Each cached id is an arm. Its score is the discounted request frequency in
the last tau requests plus a (negative) exploration term that shrinks as the
id is evicted more often. The lowest score is evicted.
"""

# %%
from lae2sim import BanditConfig, SlidingWindowUCB

bandit = SlidingWindowUCB(BanditConfig(gamma=0.9, tau=8))
for t, content in enumerate([3, 1, 3, 2, 3, 1, 3, 3]):
    bandit.record_request(t, content)
bandit.record_eviction(7, 2)

# %%
# Id 1 has never been evicted, so its padding sits at the clamp and it looks
# the most attractive victim, even though id 2 is requested less.
for i in (1, 2, 3):
    print(i, round(bandit.empirical_popularity(i), 4), bandit.eviction_count(i),
          round(bandit.ucb_score(i), 4))
print("evict:", bandit.select([1, 2, 3]))

# %%
# Once the window slides past the old traffic, state drains away.
for t in range(8, 16):
    bandit.record_request(t, 9)
print([bandit.empirical_popularity(i) for i in (1, 2, 3)], bandit.eviction_count(2))
