"""Lazy greedy returns the plain greedy answer with fewer function calls."""
# %%
import numpy as np

from blockattack import SetFunction, SearchTrace
from blockattack import analysis as an
from blockattack.setfn import lazy_greedy_insert, naive_greedy_insert, local_search

rng = np.random.default_rng(0)

# %% one weighted-coverage instance, n = 10
F = an.random_coverage(10, rng)
lazy, naive = SetFunction(F._fn, 10), SetFunction(F._fn, 10)
trace = SearchTrace(working=frozenset())
S = lazy_greedy_insert(lazy, frozenset(), range(10), trace=trace)
R = naive_greedy_insert(naive, frozenset(), range(10))
print("lazy  ", sorted(S), "evals", lazy.eval_count, "refreshes", trace.refreshes)
print("naive ", sorted(R), "evals", naive.eval_count)

# %% savings grow with n
for n in (10, 20, 40):
    F = an.random_coverage(n, rng)
    lazy, naive = SetFunction(F._fn, n), SetFunction(F._fn, n)
    assert lazy_greedy_insert(lazy, frozenset(), range(n)) == naive_greedy_insert(naive, frozenset(), range(n))
    print(f"n={n:3d}  lazy {lazy.eval_count:5d}  naive {naive.eval_count:5d}")

# %% a full insert-then-delete pass on a non-submodular table
G = an.random_table(8, rng, nonnegative=False)
S = local_search(G, frozenset(), range(8))
print("local search:", sorted(S), round(G(S), 4))
