"""Experiment harness: attack and baseline campaigns, metrics, CSV output,
noise histograms, and the property-verification suites."""

from __future__ import annotations

import csv
import json
import statistics
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis as an
from .blocks import (AttackConfig, BlockGrid, ImageSpec, NoiseCanvas, assemble_perturbation,
                     hierarchical_attack, split_blocks)
from .errors import BudgetExhausted, ConfigurationError
from .models import MLP, LabeledDataset, fgsm, gen_synthetic, pgd, train_sgd
from .oracle import AttackObjective
from .setfn import (SetFunction, is_local_optimum, lazy_greedy_insert, local_search,
                    naive_greedy_insert, naive_local_search)

RECORD_COLUMNS = ("image_id", "label", "target", "success", "queries", "final_f", "stop_reason")
CURVE_COLUMNS = ("queries", "success_rate")
SUMMARY_COLUMNS = ("campaign", "images", "success_rate", "avg_queries", "median_queries",
                   "failures_at_budget", "avg_queries_on_reference_success", "comparable")
CSV_SCHEMA = "blockattack.campaign/1"
RS_CHUNK = 256


class AccountingError(AssertionError):
    """Oracle ledger and independent query counts disagree."""


@dataclass
class CampaignConfig:
    mode: str = "untargeted"
    epsilon: float = 0.3
    initial_k: int = 4
    batch_size: int = 64
    max_queries: int = 20000
    max_rounds: int = 100
    clip: bool = True
    seed: int = 0
    images: int = 100
    model: Optional[str] = None
    dataset: Optional[str] = None
    pgd_steps: int = 20
    pgd_step_size: Optional[float] = None

    def __post_init__(self):
        if self.mode not in ("untargeted", "targeted"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.epsilon <= 0 or self.images < 1 or self.max_queries < 0:
            raise ConfigurationError("epsilon and images must be positive, max_queries >= 0")

    def attack_config(self, spec=None) -> AttackConfig:
        return AttackConfig(epsilon=self.epsilon, initial_k=self.initial_k, batch_size=self.batch_size,
                            max_queries=self.max_queries, max_rounds=self.max_rounds, clip=self.clip)

    @classmethod
    def from_mapping(cls, values: dict) -> "CampaignConfig":
        """Build from string values (config file or CLI), casting by field type."""
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for key, raw in values.items():
            if key not in kinds or raw is None:
                continue
            kind = kinds[key]
            if isinstance(raw, str):
                if "bool" in kind:
                    raw = raw.lower() in ("1", "true", "yes", "on")
                elif "float" in kind:
                    raw = float(raw)
                elif "int" in kind:
                    raw = int(raw)
            out[key] = raw
        return cls(**out)


@dataclass
class ImageRecord:
    image_id: int
    label: int
    target: int
    success: bool
    queries: int
    final_f: float
    stop_reason: str = ""


@dataclass
class Campaign:
    name: str
    records: list
    comparable: bool = True
    adversarial: dict = field(default_factory=dict)  # image_id -> (x, x_adv)
    epsilon: float = 0.0


class CountingVictim:
    """Pass-through victim that counts every loss query independently of the
    oracle ledger."""

    def __init__(self, model):
        self.model = model
        self.calls = 0

    def loss_report(self, x, y):
        self.calls += 1
        return self.model.loss_report(x, y)


def select_pool(model: MLP, data: LabeledDataset, cfg: CampaignConfig):
    """First ``cfg.images`` correctly classified images, with a seeded random
    target (different from the label) per image."""
    preds = model.predict(data.images)
    ids = [i for i in range(len(data)) if preds[i] == data.labels[i]][: cfg.images]
    rng = np.random.default_rng(cfg.seed)
    classes = model.num_classes
    pool = []
    for i in ids:
        label = int(data.labels[i])
        t = int(rng.integers(0, classes - 1))
        target = t + (t >= label)
        pool.append((i, label, target))
    return pool


def _objective(victim, label, target, cfg):
    if cfg.mode == "targeted":
        return AttackObjective(victim, target=target, budget=cfg.max_queries)
    return AttackObjective(victim, label=label, budget=cfg.max_queries)


def run_attack(model: MLP, data: LabeledDataset, cfg: CampaignConfig, keep_images=False) -> Campaign:
    """Hierarchical lazy local search on every pool image, with a query audit."""
    acfg = cfg.attack_config()
    records, adv = [], {}
    for i, label, target in select_pool(model, data, cfg):
        victim = CountingVictim(model)
        obj = _objective(victim, label, target, cfg)
        x = data.image(i)
        res = hierarchical_attack(obj, x, acfg, spec=data.spec)
        ledger = obj.ledger
        if not (ledger.count == res.set_evals == victim.calls == res.queries) or ledger.count > cfg.max_queries:
            raise AccountingError(
                f"image {i}: ledger {ledger.count}, set evals {res.set_evals}, victim calls {victim.calls}")
        final_f = res.value if res.value is not None else float("nan")
        records.append(ImageRecord(i, label, target, res.success,
                                   ledger.first_success_at if res.success else ledger.count,
                                   final_f, res.stop_reason))
        if keep_images:
            adv[i] = (x, res.x_adv)
    return Campaign("attack", records, True, adv, cfg.epsilon)


def run_baseline(model: MLP, data: LabeledDataset, cfg: CampaignConfig, kind: str,
                 keep_images=False) -> Campaign:
    """random-sign: i.i.d. +/-epsilon images under the same budget and ledger.
    fgsm / pgd: white-box; ``queries`` counts gradient steps and the campaign
    is flagged non-comparable."""
    if kind not in ("random-sign", "fgsm", "pgd"):
        raise ConfigurationError(f"unknown baseline {kind!r}")
    records, adv = [], {}
    targeted = cfg.mode == "targeted"
    for i, label, target in select_pool(model, data, cfg):
        x = data.image(i)
        y = target if targeted else label
        if kind == "random-sign":
            victim = CountingVictim(model)
            obj = _objective(victim, label, target, cfg)
            rng = np.random.default_rng([cfg.seed, i])
            f = float("nan")
            x_adv = x
            try:
                while not obj.ledger.success:
                    # Candidates are drawn in chunks; each is still one query.
                    cands = x + cfg.epsilon * np.where(rng.random((RS_CHUNK,) + x.shape) < 0.5, 1.0, -1.0)
                    if cfg.clip:
                        np.clip(cands, data.spec.lo, data.spec.hi, out=cands)
                    for cand in cands:
                        f = obj.evaluate(cand)
                        x_adv = cand
                        if obj.ledger.success:
                            break
            except BudgetExhausted:
                pass
            ledger = obj.ledger
            if ledger.count != victim.calls or ledger.count > cfg.max_queries:
                raise AccountingError(f"image {i}: ledger {ledger.count}, victim calls {victim.calls}")
            queries = ledger.first_success_at if ledger.success else ledger.count
            records.append(ImageRecord(i, label, target, ledger.success, queries, f,
                                       "success" if ledger.success else "budget"))
        else:
            if kind == "fgsm":
                x_adv = fgsm(model, x, y, cfg.epsilon, clip=cfg.clip, spec=data.spec, targeted=targeted)
                steps = 1
            else:
                x_adv = pgd(model, x, y, cfg.epsilon, steps=cfg.pgd_steps, step_size=cfg.pgd_step_size,
                            clip=cfg.clip, spec=data.spec, targeted=targeted)
                steps = cfg.pgd_steps
            rep = model.loss_report(x_adv.reshape(-1), y)
            hit = rep.predicted == target if targeted else rep.predicted != label
            f = -rep.loss if targeted else rep.loss
            records.append(ImageRecord(i, label, target, bool(hit), steps, f, "white-box"))
        if keep_images:
            adv[i] = (x, x_adv)
    return Campaign(kind, records, kind == "random-sign", adv, cfg.epsilon)


# -- metrics ----------------------------------------------------------------

def summarize(name, records, comparable=True, reference=None) -> dict:
    """Success rate over the pool; average/median queries over successes
    only. ``reference`` is a list of records from a designated baseline; the
    conditional average covers images both campaigns fooled."""
    n = len(records)
    wins = [r.queries for r in records if r.success]
    row = {
        "campaign": name,
        "images": n,
        "success_rate": len(wins) / n if n else 0.0,
        "avg_queries": statistics.fmean(wins) if wins else float("nan"),
        "median_queries": statistics.median(wins) if wins else float("nan"),
        "failures_at_budget": sum(1 for r in records if not r.success),
        "avg_queries_on_reference_success": float("nan"),
        "comparable": comparable,
    }
    if reference is not None:
        fooled = {r.image_id for r in reference if r.success}
        both = [r.queries for r in records if r.success and r.image_id in fooled]
        if both:
            row["avg_queries_on_reference_success"] = statistics.fmean(both)
    return row


def success_curve(records):
    """(queries, success_rate) at every distinct success query count."""
    n = len(records)
    qs = sorted(r.queries for r in records if r.success)
    out = []
    for j, q in enumerate(qs, 1):
        if out and out[-1][0] == q:
            out[-1] = (q, j / n)
        else:
            out.append((q, j / n))
    return out


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_records(path, records):
    write_csv(path, RECORD_COLUMNS, ([getattr(r, c) for c in RECORD_COLUMNS] for r in records))


def read_records(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RECORD_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [ImageRecord(int(r["image_id"]), int(r["label"]), int(r["target"]),
                            r["success"] == "1", int(r["queries"]), float(r["final_f"]),
                            r["stop_reason"]) for r in reader]


def write_campaign(campaign: Campaign, out_dir, reference=None):
    """Writes records.csv, curve.csv, summary.json (and noise.npz when
    adversarial images were kept)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    recs = sorted(campaign.records, key=lambda r: r.image_id)
    write_records(out / "records.csv", recs)
    write_csv(out / "curve.csv", CURVE_COLUMNS, success_curve(recs))
    summary = summarize(campaign.name, recs, campaign.comparable, reference)
    summary["schema"] = CSV_SCHEMA
    summary["note"] = "avg/median queries over successful attacks only"
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    if campaign.adversarial:
        ids = sorted(campaign.adversarial)
        np.savez(out / "noise.npz", ids=np.array(ids),
                 x=np.stack([campaign.adversarial[i][0] for i in ids]),
                 x_adv=np.stack([campaign.adversarial[i][1] for i in ids]),
                 epsilon=np.array(campaign.epsilon))
    return summary


def noise_histogram(x, x_adv, epsilon, bins=20, tol=1e-9):
    """Histogram of (x_adv - x) / epsilon over [-1, 1] plus the vertex bin
    (coordinates at exactly +/-epsilon, within ``tol``)."""
    d = (np.asarray(x_adv, dtype=float) - np.asarray(x, dtype=float)).reshape(-1) / epsilon
    counts, edges = np.histogram(np.clip(d, -1, 1), bins=bins, range=(-1.0, 1.0))
    total = max(d.size, 1)
    rows = [(float(edges[j]), float(edges[j + 1]), float(counts[j] / total)) for j in range(bins)]
    vertex = float(np.mean(np.abs(np.abs(d) - 1.0) <= tol / epsilon)) if d.size else 0.0
    return rows, vertex


# -- verification suites ----------------------------------------------------

SUITES = ("counterexample", "greedy-equivalence", "local-optimum", "theorem1", "lemmas", "smi",
          "split-invariance", "objective-ordering")


def _sizes(rng, lo, hi):
    return int(rng.integers(lo, hi + 1))


def verify_counterexample(seed=0, trials=1):
    F = an.logistic_counterexample()
    a = F({1}) - F(set())
    b = F({0, 1}) - F({0})
    sub, witness = an.is_submodular(F, 2)
    ok = abs(a - 0.5662) <= 1e-3 and abs(b - 1.4338) <= 1e-3 and not sub
    wit = None if witness is None else tuple(sorted(e + 1 for e in s) for s in witness[:2]) + (witness[2] + 1,)
    lines = [f"gain(pixel 2 | {{}}) = {a:.4f}", f"gain(pixel 2 | {{pixel 1}}) = {b:.4f}",
             f"submodular: {sub}; witness (A, B, e) in one-based pixels: {wit}"]
    return ok, lines


def verify_greedy_equivalence(seed=0, trials=200):
    rng = np.random.default_rng(seed)
    lines, ok = [], True
    for t in range(trials):
        n = _sizes(rng, 4, 10)
        F = an.random_coverage(n, rng)
        lazy_F = SetFunction(F._fn, n)
        naive_F = SetFunction(F._fn, n)
        a = lazy_greedy_insert(lazy_F, frozenset(), range(n))
        b = naive_greedy_insert(naive_F, frozenset(), range(n))
        good = a == b and lazy_F.eval_count <= naive_F.eval_count
        ok &= good
        lines.append(f"instance {t}: n={n} lazy={sorted(a)} evals={lazy_F.eval_count} "
                     f"naive={sorted(b)} evals={naive_F.eval_count} {'ok' if good else 'FAIL'}")
    return ok, lines


def verify_local_optimum(seed=0, trials=100):
    rng = np.random.default_rng(seed)
    lines, ok = [], True
    for t in range(trials):
        n = _sizes(rng, 3, 10)
        kind = "coverage" if t < trials // 2 else "table"
        F = an.random_coverage(n, rng) if kind == "coverage" else an.random_table(n, rng, nonnegative=False)
        S = naive_local_search(F, frozenset(), range(n))
        good = is_local_optimum(F, S, range(n))
        ok &= good
        lines.append(f"instance {t}: {kind} n={n} S={sorted(S)} {'ok' if good else 'FAIL'}")
    return ok, lines


def random_instance(rng, n, t):
    kind = ("coverage", "modular", "table")[t % 3]
    if kind == "coverage":
        return kind, an.random_coverage(n, rng)
    if kind == "modular":
        return kind, an.random_modular(n, rng)
    return kind, an.random_table(n, rng, nonnegative=False)


def verify_theorem1(seed=0, trials=200, max_n=8):
    rng = np.random.default_rng(seed)
    lines, ok = [], True
    for t in range(trials):
        n = _sizes(rng, 2, max_n)
        kind, F = random_instance(rng, n, t)
        rep = an.check_theorem1(F, n)
        cor = an.check_corollary1(F, n)
        good = rep.holds and cor is not False
        ok &= good
        lines.append(f"instance {t}: {kind} n={n} lhs={rep.lhs:.6f} rhs={rep.rhs:.6f} "
                     f"lambda={rep.lam:.6f} xi={rep.xi} corollary={'skipped' if cor is None else cor} "
                     f"{'ok' if good else 'FAIL'}")
    return ok, lines


def verify_lemmas(seed=0, trials=50, max_n=6):
    rng = np.random.default_rng(seed)
    lines, ok = [], True
    for t in range(trials):
        n = _sizes(rng, 2, max_n)
        kind, F = random_instance(rng, n, t)
        rep = an.check_appendix_lemmas(F, n)
        ok &= rep.ok
        counts = " ".join(f"{k}={len(rep.violations[k])}/{rep.checked[k]}" for k in sorted(rep.checked))
        lines.append(f"instance {t}: {kind} n={n} violations {counts} {'ok' if rep.ok else 'FAIL'}")
    return ok, lines


def verify_smi(seed=0, trials=50, max_n=6):
    rng = np.random.default_rng(seed)
    lines, ok = ["reading: A ranges over subsets of L, S over the ground set minus A"], True
    for t in range(trials):
        n = _sizes(rng, 2, max_n)
        kind, F = random_instance(rng, n, t)
        rep = an.check_smi_properties(F, n)
        ok &= rep.ok
        counts = " ".join(f"{k}={len(rep.violations[k])}/{rep.checked[k]}" for k in sorted(rep.checked))
        lines.append(f"instance {t}: {kind} n={n} violations {counts} {'ok' if rep.ok else 'FAIL'}")
    return ok, lines


def verify_split_invariance(seed=0, trials=100):
    rng = np.random.default_rng(seed)
    lines, ok = [], True
    for t in range(trials):
        k = int(2 ** rng.integers(1, 4))
        H, W = k * int(rng.integers(1, 4)), k * int(rng.integers(1, 4))
        c = int(rng.integers(1, 4))
        h, w = int(rng.integers(1, 2 * H + 1)), int(rng.integers(1, 2 * W + 1))
        grid = BlockGrid(NoiseCanvas(H, W), c, k)
        S = frozenset(np.flatnonzero(rng.random(len(grid)) < 0.5).tolist())
        grid = grid.with_working(S)
        x = rng.random((h, w, c))
        eps = float(rng.uniform(0.01, 0.5))
        before = assemble_perturbation(x, grid, None, eps, clip=False)
        after = assemble_perturbation(x, split_blocks(grid), None, eps, clip=False)
        good = np.array_equal(before, after)
        ok &= good
        lines.append(f"instance {t}: canvas {H}x{W}x{c} k={k} image {h}x{w} |S|={len(S)} "
                     f"{'identical' if good else 'FAIL'}")
    return ok, lines


def verify_objective_ordering(seed=0, trials=10):
    """Pixel-level greedy insertion vs full local search vs PGD on a small
    trained one-hidden-layer victim. Local search >= greedy is asserted;
    PGD is reported only."""
    spec = ImageSpec(8, 8, 1)
    train, test = gen_synthetic(4, spec, 400 + trials, seed).split(400)
    model = train_sgd(MLP.random([spec.size, 16, 4], seed=seed, spec=spec), train, epochs=5, lr=0.05, seed=seed)
    eps = 0.1
    grid = BlockGrid(NoiseCanvas(8, 8), 1, 1)
    V = range(len(grid))
    lines, ok = ["f = loss at the true label; clip on; epsilon 0.1"], True
    wins = 0
    for t in range(trials):
        x, y = test.image(t), int(test.labels[t])
        obj = AttackObjective(model, label=y, budget=10 ** 9)
        F = obj.as_set_function(x, grid, eps, clip=True, spec=spec)
        f_greedy = F(lazy_greedy_insert(F, frozenset(), V))
        f_ls = F(local_search(F, frozenset(), V))
        f_pgd = model.loss_report(pgd(model, x, y, eps, steps=20, clip=True, spec=spec).reshape(-1), y).loss
        good = f_ls >= f_greedy
        ok &= good
        wins += f_ls >= f_pgd
        lines.append(f"instance {t}: greedy={f_greedy:.6f} local_search={f_ls:.6f} pgd={f_pgd:.6f} "
                     f"{'ok' if good else 'FAIL'}")
    lines.append(f"local search >= pgd on {wins}/{trials} (reported, not asserted)")
    return ok, lines


VERIFIERS = {
    "counterexample": verify_counterexample,
    "greedy-equivalence": verify_greedy_equivalence,
    "local-optimum": verify_local_optimum,
    "theorem1": verify_theorem1,
    "lemmas": verify_lemmas,
    "smi": verify_smi,
    "split-invariance": verify_split_invariance,
    "objective-ordering": verify_objective_ordering,
}


def run_suite(name, seed=0, trials=None):
    if name not in VERIFIERS:
        raise ConfigurationError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    start = time.perf_counter()
    ok, lines = VERIFIERS[name](seed=seed) if trials is None else VERIFIERS[name](seed=seed, trials=trials)
    return ok, lines, time.perf_counter() - start
