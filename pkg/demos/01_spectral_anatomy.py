"""Spectral anatomy of a four-state model with one block in every regime.

Run with ``python3 demos/01_spectral_anatomy.py``.
"""

import numpy as np

from branching_clt import catalog
from branching_clt.spectral import block_polynomial, block_regime, classify_function, mean_semigroup, spectral_decompose

np.set_printoptions(precision=4, suppress=True)

# %% decompose the mean semigroup
model = catalog.four_regimes()
decomp = spectral_decompose(model)
print("leading rate lam1 =", decomp.lam1)
print("biorthogonality residual =", decomp.biorthogonality_residual())
for b in decomp.blocks:
    print(f"block {b.index}: lambda = {b.lam:.4g}, sizes = {b.sizes}, regime = {block_regime(decomp, b)}")

# %% each block is invariant: T_t Phi_k = exp(-lambda_k t) Phi_k D_k(t)
t = 1.5
for b in decomp.blocks:
    moved = np.column_stack([mean_semigroup(model, t, b.Phi[:, j]) for j in range(b.width)])
    want = np.exp(-b.lam * t) * b.Phi @ block_polynomial(b, t)
    print(f"block {b.index}: max deviation {np.abs(moved - want).max():.2e}")

# %% a generic function splits into regime projections
f = np.array([1.0, -0.5, 2.0, 0.25])
profile = classify_function(decomp, f)
print("first block hit:", profile.gamma, "regime:", profile.regime)
for regime, part in profile.projections.items():
    print(f"  {regime:>8}: {np.real(part)}")
print("projections sum back to f:", np.allclose(sum(np.real(p) for p in profile.projections.values()), f))
