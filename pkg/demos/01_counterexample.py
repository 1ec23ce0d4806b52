"""Why sign-perturbation objectives are not submodular.

Two pixels, a logistic victim with w = (-1, -1), clean image x = 0 and
epsilon = 1. Element i means "pixel i goes to +epsilon"; every other pixel
goes to -epsilon. Adding pixel 2 is worth more once pixel 1 is already in,
so diminishing returns fails.
"""
# %%
from blockattack import analysis as an

F = an.logistic_counterexample()
for S in an.subsets(2):
    print(f"F({sorted(S)}) = {F(S):.4f}")

# %% marginal gains of element 1 (the second pixel)
print("gain of 1 given {}  :", round(F({1}) - F(set()), 4))
print("gain of 1 given {0} :", round(F({0, 1}) - F({0}), 4))

# %% the exhaustive checker finds the same witness (A, B, e)
print(an.is_submodular(F, 2))

# %% how far from submodular? A negative index quantifies it.
print("lambda(V, 2) =", an.submodularity_index(F, {0, 1}, k=2))
