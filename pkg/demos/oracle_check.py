"""Check a few analytic bounds against Monte Carlo at reduced trial counts.

The full suites run through ``adqkd oracle --suite all``.
"""

import numpy as np

from adqkd.ad import ad_success_and_error
from adqkd.bounds import serfling_nu
from adqkd.mc_oracle.blocks import BlockTally, expected_blocks_exact, permutation_block_experiment
from adqkd.mc_oracle.concentration import ad_iid_experiment, serfling_experiment

pop = np.r_[np.ones(500), np.zeros(9500)]
st = serfling_experiment(pop, 1000, eps=0.01, trials=20000, seed=1)
print(f"serfling: nu = {serfling_nu(9000, 1000, 0.01):.4f}, "
      f"violations {st.empirical_freq_violation:.4f} (budget 0.01)")

tally = BlockTally(m_I=30, m_X=4, m_Y=1, m_Z=3, n_K=60)
st = permutation_block_experiment(tally, b=3, trials=20000, seed=2)
S, R = expected_blocks_exact(tally, 3)
print(f"blocks: mean S = {st.empirical_mean:.4f} +- {st.extra['se_S']:.4f}, exact {float(S):.4f}; "
      f"mean R = {st.extra['mean_R']:.4f}, exact {float(R):.4f}")

for b in (2, 3, 5):
    st = ad_iid_experiment(0.1, b, trials=200000, seed=b)
    acc, err = ad_success_and_error(0.1, b)
    print(f"AD b={b}: acceptance {st.empirical_mean:.4f} (exact {acc:.4f}), "
          f"distilled error {st.empirical_freq_violation:.5f} (exact {err:.5f})")
