"""Coarse-to-fine block attack on a small trained classifier.

Only loss values are queried; the search starts with 4x4 blocks and halves
the block size each round.
"""
# %%
import numpy as np

from blockattack import (AttackConfig, AttackObjective, ImageSpec, SoftmaxRegression, fgsm,
                         gen_synthetic, hierarchical_attack, train_sgd)

spec = ImageSpec(16, 16, 1)
train, test = gen_synthetic(5, spec, 1200, seed=1).split(1000)
model = train_sgd(SoftmaxRegression.zeros(5, spec.size, spec), train, epochs=8, lr=0.05)
print("test accuracy", np.mean(model.predict(test.images) == test.labels))

# %% untargeted attack on one image
i = 0
x, y = test.image(i), int(test.labels[i])
obj = AttackObjective(model, label=y, budget=5000)
res = hierarchical_attack(obj, x, AttackConfig(epsilon=0.3, initial_k=4, max_queries=5000), spec)
print(res.stop_reason, "after", res.queries, "queries; block size", res.k)
print("prediction", y, "->", model.predict(res.x_adv.reshape(-1)))

# %% the noise is +/- epsilon everywhere except where clipping bites
noise = (res.x_adv - x).reshape(-1)
print("noise values:", np.unique(np.round(noise, 3))[:5], "...")

# %% loss trajectory (query number, objective)
for q, f in res.trajectory[:: max(1, len(res.trajectory) // 8)]:
    print(f"{q:5d}  {f:.4f}")

# %% targeted: minimise the loss at a chosen class
obj = AttackObjective(model, target=(y + 1) % 5, budget=5000)
res = hierarchical_attack(obj, x, AttackConfig(epsilon=0.3, max_queries=5000), spec)
print("targeted:", res.success, res.queries, "queries")

# %% white-box reference: one gradient-sign step
print("FGSM prediction:", model.predict(fgsm(model, x, y, 0.3, clip=True, spec=spec).reshape(-1)))
