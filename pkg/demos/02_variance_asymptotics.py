"""Normalized variances approach their limits in the small and critical regimes.

Run with ``python3 demos/02_variance_asymptotics.py``.
"""

import math

from branching_clt import catalog
from branching_clt.moments import rho_sq, sigma_sq, variance
from branching_clt.spectral import spectral_decompose

# %% small regime: exp(lam1 t) Var<f, X_t> / phi1(x) -> sigma_f^2
model = catalog.small_pair()
decomp = spectral_decompose(model)
f = decomp.block(2).Phi[:, 0].real
limit = sigma_sq(decomp, model, f)
print(f"small regime, sigma^2 = {limit:.6g}")
for c in (2, 5, 10, 20, 30):
    t = c / abs(decomp.lam1)
    value = math.exp(decomp.lam1 * t) * variance(model, 0, f, t) / decomp.phi1[0]
    print(f"  t = {t:7.3f}: normalized variance {value:.6g}, relative gap {abs(value - limit) / limit:.2e}")

# %% critical regime: the extra factor t^(1 + 2 tau) is needed
model = catalog.critical_pair()
decomp = spectral_decompose(model)
h = decomp.block(2).Phi[:, 0].real
limit = rho_sq(decomp, model, h)
print(f"critical regime, rho^2 = {limit:.6g}")
for c in (2, 5, 10, 20, 30):
    t = c / abs(decomp.lam1)
    value = math.exp(decomp.lam1 * t) * variance(model, 0, h, t) / (t * decomp.phi1[0])
    print(f"  t = {t:7.3f}: normalized variance {value:.6g}, relative gap {abs(value - limit) / limit:.2e}")
# the gap closes like 1/t, much slower than the exponential rate above
