"""Earth mover distance between discrete sources, and how the plan is found."""

# %%
import numpy as np

from secmargin.pmf import Pmf, bernoulli, uniform
from secmargin.transport import CostSpec, emd, emd_l1_closed_form, is_monge, linf_cost, nwc_map, optimal_map

# %% [markdown]
# Two Bernoulli sources: under Hamming cost the cheapest way to turn one into
# the other moves exactly |p - q| of the mass.

# %%
p, q = bernoulli(0.8), bernoulli(0.5)
print("hamming EMD:", emd(p, q, CostSpec.hamming()))

# %% [markdown]
# For |i - j|^p costs the cost grid is Monge, so the greedy north-west corner
# plan is optimal and the solver never needs a network flow.

# %%
p = Pmf(0, np.array([0.1, 0.4, 0.2, 0.3]))
q = Pmf(0, np.array([0.25, 0.25, 0.25, 0.25]))
for cost in (CostSpec.lp(1), CostSpec.lp(2)):
    value, plan, method = optimal_map(p, q, cost)
    print(f"{cost.describe():>10}: EMD={value:.6f} via {method}, monge={is_monge(cost, 4, 4)}")
print("L1 closed form:", emd_l1_closed_form(p, q))

# %% [markdown]
# A cost matrix that is not Monge falls back to successive shortest paths.

# %%
weird = CostSpec.from_matrix(np.array([[0, 5, 1, 1], [1, 0, 5, 1], [1, 1, 0, 5], [5, 1, 1, 0]], float))
value, plan, method = optimal_map(p, q, weird)
print(f"custom matrix: EMD={value:.6f} via {method}")
print(np.round(plan.flow, 4))

# %% [markdown]
# The L-infinity margin: the largest distance any single symbol has to travel
# under the NWC plan, which is the smallest achievable maximum.

# %%
plan = nwc_map(uniform(4), Pmf(2, np.array([0.5, 0.5])))
print("L-inf margin between U{0..3} and U{2,3}:", linf_cost(plan))
