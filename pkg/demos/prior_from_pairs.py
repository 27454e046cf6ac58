# coding: utf-8

# # Recovering the class prior from pair statistics
#
# With independent members, a pair is similar with probability
# pi_+^2 + pi_-^2, so the share of similar pairs pins down the prior up to
# the swap pi_+ <-> 1 - pi_+. Side information picks the root.

import numpy as np

from sdpcomp import GaussianMixtureSpec
from sdpcomp.datagen import PriorSide, estimate_prior, make_sd_pairs, sample_labeled

for pi in (0.55, 0.7, 0.9):
    mix = GaussianMixtureSpec.symmetric(pi)
    est = []
    for seed in range(50):
        pairs = make_sd_pairs(sample_labeled(mix, 4000, seed), 2000, seed)
        n_s = int(np.sum(pairs.sd == 1))
        est.append(estimate_prior(n_s, len(pairs) - n_s, PriorSide.GE_HALF))
    est = np.array(est)
    print(f"pi_+={pi:.2f}  mean estimate {est.mean():.4f}  sd {est.std():.4f}")

# In[1]:

# Near pi_+ = 1/2 the square root makes the estimate noisy and biased upward:
# d pi / d pi_S blows up, and sampling noise below 1/2 is clamped.
print(estimate_prior(58, 42), estimate_prior(58, 42, PriorSide.LT_HALF))
