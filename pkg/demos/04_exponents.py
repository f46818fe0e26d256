"""False-negative error exponents: how fast the defender still wins."""

# %%
import numpy as np

from secmargin.attack import DistortionBudget
from secmargin.game import fn_error_exponent, fn_error_exponent_lambda, tr_error_exponent
from secmargin.pmf import bernoulli
from secmargin.transport import CostSpec

p_x, p_y = bernoulli(0.3), bernoulli(0.7)
ham = DistortionBudget(CostSpec.hamming(), 0.0)

# %% [markdown]
# The exponent falls as the attacker's budget grows and reaches zero at the
# security margin, here |0.3 - 0.7| = 0.4.

# %%
for l_max in np.linspace(0, 0.45, 10):
    eps = fn_error_exponent(p_x, p_y, ham.with_l_max(l_max)).epsilon_bits
    print(f"L_max = {l_max:.2f}  eps = {eps:.6f}")

# %% [markdown]
# A larger false-positive exponent lambda widens the acceptance region, which
# is easier for the attacker to reach, so the false-negative exponent drops.

# %%
for lam in (0.001, 0.01, 0.05, 0.1):
    eps = fn_error_exponent_lambda(p_x, p_y, lam, ham.with_l_max(0.1)).epsilon_bits
    print(f"lambda = {lam:<6} eps = {eps:.6f}")

# %% [markdown]
# With only training data for P_X the exponent is lower, and approaches the
# known-source value as the training set grows (c = N / n).

# %%
known = fn_error_exponent(p_x, p_y, ham.with_l_max(0.1)).epsilon_bits
for c in (0.5, 2, 10, 100, 1000):
    res = tr_error_exponent(p_x, p_y, ham.with_l_max(0.1), c)
    print(f"c = {c:<5} eps_tr = {res.epsilon_bits:.6f}  (known source: {known:.6f})")
