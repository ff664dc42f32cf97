"""
A small LSTM popularity forecaster
==================================

The recurrent predictor reads the last few request ids and outputs a softmax
over the catalogue. It is retrained every n requests on a sliding history.
"""

# %%
import numpy as np

from lae2sim import LstmConfig, LstmPredictor, PredictorConfig, SyntheticSpec, generate_synthetic, zipf_pmf

N = 60
trace = generate_synthetic(SyntheticSpec(N, 12_000, zipf_exponent=1.0, rng_seed=4))
pred = LstmPredictor(N, PredictorConfig(kind="lstm", update_interval=1000,
                                        lstm=LstmConfig(hidden_units=16, embed_dim=8)))

# %%
for t, c in enumerate(trace.contents[:10_000].tolist()):
    pred.observe(t, c)
for update, loss in pred.loss_log:
    print(f"update {update:>2}: training loss {loss:.3f}")

# %%
# On a stationary Zipf stream the best achievable cross-entropy is the
# entropy of the popularity law.
pmf = zipf_pmf(1.0, N)
print("held-out cross-entropy", round(pred.evaluate(trace.contents[10_000:]), 4))
print("entropy               ", round(float(-(pmf * np.log(pmf)).sum()), 4))
