"""Exhaustive checks of the local-search guarantee on tiny ground sets."""
# %%
import numpy as np

from blockattack import analysis as an

rng = np.random.default_rng(3)

# %% local search bound: 2F(S) + F(V-S) >= F(C) + xi * lambda(V, 2)
for kind, F in [("coverage", an.random_coverage(6, rng)), ("table", an.random_table(6, rng, False))]:
    r = an.check_theorem1(F, 6)
    print(f"{kind:9s} S={sorted(r.S)} C={sorted(r.C)} lhs={r.lhs:.3f} rhs={r.rhs:.3f} "
          f"lambda={r.lam:.3f} xi={r.xi} offset={r.offset:.3f} holds={r.holds}")

# %% submodular functions have index 0; random tables go negative
print("coverage lambda:", an.submodularity_index(an.random_coverage(6, rng), range(6)))
print("table lambda   :", an.submodularity_index(an.random_table(6, rng), range(6)))

# %% the supporting lemmas, every subset triple
rep = an.check_appendix_lemmas(an.random_table(5, rng, False), 5)
print({k: f"{len(rep.violations[k])}/{n}" for k, n in rep.checked.items()})
rep = an.check_smi_properties(an.random_table(5, rng, False), 5)
print({k: f"{len(rep.violations[k])}/{n}" for k, n in rep.checked.items()})
