"""Monte Carlo check of the three central limit theorems at small scale.

Each run takes a few seconds.  Run with ``python3 demos/03_regime_clts.py``.
"""

from branching_clt import catalog
from branching_clt.clt import verify_clt_critical, verify_clt_large, verify_clt_small
from branching_clt.spectral import spectral_decompose

# %% small regime
model = catalog.small_pair()
decomp = spectral_decompose(model)
f = decomp.block(2).Phi[:, 0].real
print(verify_clt_small(model, decomp, f, [1, 1], 8.0, 500, seed=1).to_markdown())

# %% critical regime; the balanced start keeps <h, nu> = 0
model = catalog.critical_pair()
decomp = spectral_decompose(model)
h = decomp.block(2).Phi[:, 0].real
print(verify_clt_critical(model, decomp, h, [2, 2], 6.0, 500, seed=2).to_markdown())

# %% large regime, with H at a later time standing in for H_infinity
model = catalog.large_block_pair()
decomp = spectral_decompose(model)
print(verify_clt_large(model, decomp, decomp.phi1, 0, 3.0, T_est=8.0, N=400, seed=3,
                       horizon_factor=3.0, bias_check=False).to_markdown())
