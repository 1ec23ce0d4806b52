"""A small campaign end to end: attack vs random-sign on the same pool, then
the summary table and the noise histogram. The same steps are available as
``blockattack attack | baseline | report``."""
# %%
import tempfile
from pathlib import Path

from blockattack import ImageSpec, SoftmaxRegression, gen_synthetic, train_sgd
from blockattack import harness

spec = ImageSpec(28, 28, 1)
train, test = gen_synthetic(10, spec, 1500, seed=0).split(1000)
model = train_sgd(SoftmaxRegression.zeros(10, spec.size, spec), train, epochs=10, lr=0.05)

cfg = harness.CampaignConfig(epsilon=0.3, max_queries=20000, initial_k=4, images=20)
attack = harness.run_attack(model, test, cfg, keep_images=True)
rs = harness.run_baseline(model, test, cfg, "random-sign")
fg = harness.run_baseline(model, test, cfg, "fgsm", keep_images=True)

# %% summary (averages are over successful images only)
for camp in (attack, rs, fg):
    s = harness.summarize(camp.name, camp.records, camp.comparable, reference=fg.records)
    print({k: (round(v, 3) if isinstance(v, float) else v) for k, v in s.items()})

# %% success rate vs queries
print(harness.success_curve(attack.records)[:10])

# %% block noise is nearly all at the vertices of the epsilon box
import numpy as np
xs = np.stack([a for a, _ in attack.adversarial.values()])
xa = np.stack([b for _, b in attack.adversarial.values()])
hist, vertex = harness.noise_histogram(xs, xa, cfg.epsilon, bins=4)
print(hist, "vertex fraction", round(vertex, 3))

# %% write the campaign files
out = Path(tempfile.mkdtemp())
harness.write_campaign(attack, out / "attack")
print(sorted(p.name for p in (out / "attack").iterdir()))
