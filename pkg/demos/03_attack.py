"""The attacker's optimal transformation and its effect on a real sequence."""

# %%
import numpy as np

from secmargin.attack import DistortionBudget, apply_map_to_sequence, optimal_attack_map, optimal_attack_map_linf
from secmargin.pmf import Pmf, empirical_type, sample_sequence
from secmargin.transport import CostSpec, emd

# %% [markdown]
# The attacker holds a sequence from P_Y and wants it to look like P_X while
# changing symbols by at most L_max per letter on average.

# %%
p_y = Pmf(0, np.array([0.5, 0.3, 0.15, 0.05]))
p_x = Pmf(0, np.array([0.1, 0.2, 0.3, 0.4]))
cost = CostSpec.lp(1)
E = emd(p_y, p_x, cost)
print(f"EMD = {E:.4f}")
for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
    sol = optimal_attack_map(p_y, p_x, DistortionBudget(cost, frac * E))
    print(f"L_max = {frac:4.2f} EMD  ->  D(S_Z || P_X) = {sol.objective_bits:.6f} bits")

# %% [markdown]
# Apply the half-budget map to a concrete sequence: each symbol class is
# rewritten according to the rounded map rows, positions picked at random.

# %%
y = sample_sequence(p_y, 2000, rng_seed=1)
t = empirical_type(y, 4)
sol = optimal_attack_map(t, p_x, DistortionBudget(cost, 0.5 * E))
z = apply_map_to_sequence(y, sol.map, seed=2)
print("type of y:", np.round(t.probs, 4))
print("type of z:", np.round(empirical_type(z, 4).probs, 4))
print("realized distortion:", np.mean(np.abs(z - y)), " budget:", 0.5 * E)

# %% [markdown]
# With an L-infinity budget every symbol may move at most L_max positions.

# %%
for l_max in range(4):
    print(f"L_inf budget {l_max}: {optimal_attack_map_linf(p_y, p_x, l_max).objective_bits:.6f} bits")
