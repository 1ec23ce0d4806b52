"""Acceptance criteria, one test each. Every test prints a single
``[PASS]``/``[FAIL]`` line with its measured figure and runtime.

Run alone with ``pytest tests/test_acceptance.py -v -s`` (lines are printed
even without ``-s``)."""

import itertools
import math
import time

import numpy as np
import pytest

from blockattack import (AttackConfig, AttackObjective, ImageSpec, SetFunction, SoftmaxRegression,
                         MLP, binary_logistic, fgsm, gen_synthetic, hierarchical_attack, train_sgd)
from blockattack import analysis as an
from blockattack import harness
from blockattack.models import forward_loss
from blockattack.setfn import is_local_optimum, lazy_greedy_insert, naive_local_search


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail, seconds, limit=None):
        timing = f"{seconds:.2f}s" + (f" (limit {limit}s)" if limit else "")
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}; {timing}")
    return emit


def _timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


# -- independent references ---------------------------------------------------

def plain_greedy(fn, n):
    """Textbook greedy: add the best positive gain, ties to the smallest id."""
    S, value = frozenset(), fn(frozenset())
    while True:
        best = None
        for e in range(n):
            if e in S:
                continue
            gain = fn(S | {e}) - value
            if gain > 0 and (best is None or gain > best[0]):
                best = (gain, e)
        if best is None:
            return S
        S = S | {best[1]}
        value = fn(S)


def pair_smi(table, n):
    """lambda(V, 2) straight from its definition over all A and pairs {x, y}."""
    lam = 0.0
    for A in range(1 << n):
        for x, y in itertools.combinations([i for i in range(n) if not A >> i & 1], 2):
            phi = (table[A | 1 << x] - table[A]) + (table[A | 1 << y] - table[A]) \
                  - (table[A | 1 << x | 1 << y] - table[A])
            lam = min(lam, phi)
    return lam


def _mask(S):
    return sum(1 << e for e in S)


# -- criteria -------------------------------------------------------------------

def test_counterexample(report):
    def run():
        F = an.logistic_counterexample()
        a = F({1}) - F(set())
        b = F({0, 1}) - F({0})
        return a, b, an.is_submodular(F, 2)
    (a, b, (sub, witness)), sec = _timed(run)
    ok = (abs(a - 0.5662) <= 1e-3 and abs(b - 1.4338) <= 1e-3 and not sub
          and witness == (frozenset(), frozenset({0}), 1) and sec < 1)
    report("counterexample", ok, f"gains {a:.4f} / {b:.4f}, submodular={sub}, witness={witness}", sec, 1)
    assert ok


def test_lazy_naive_greedy_equivalence(report):
    def run():
        rng = np.random.default_rng(2024)
        bad = []
        for t in range(200):
            n = int(rng.integers(4, 11))
            F = an.random_coverage(n, rng)
            lazy = SetFunction(F._fn, n)
            counted = SetFunction(F._fn, n)
            S = lazy_greedy_insert(lazy, frozenset(), range(n))
            R = plain_greedy(counted, n)
            if S != R or lazy.eval_count > counted.eval_count:
                bad.append(t)
        return bad
    bad, sec = _timed(run)
    ok = not bad and sec < 10
    report("lazy/naive greedy equivalence", ok, f"{200 - len(bad)}/200 identical, lazy evals <= naive", sec, 10)
    assert ok


def test_local_search_reaches_local_optimum(report):
    def run():
        rng = np.random.default_rng(11)
        bad = []
        for t in range(100):
            n = int(rng.integers(3, 11))
            F = an.random_coverage(n, rng) if t < 50 else an.random_table(n, rng, nonnegative=False)
            S = naive_local_search(F, frozenset(), range(n))
            v = F(S)
            direct = all(F(S ^ {e}) <= v for e in range(n))
            if not (direct and is_local_optimum(F, S, range(n))):
                bad.append(t)
        return bad
    bad, sec = _timed(run)
    ok = not bad and sec < 10
    report("local optimality (50 coverage, 50 tables)", ok, f"{100 - len(bad)}/100 local optima", sec, 10)
    assert ok


def test_theorem1(report):
    def run():
        rng = np.random.default_rng(31)
        worst, bad = math.inf, []
        for t in range(200):
            n = int(rng.integers(2, 9))
            _, F = harness.random_instance(rng, n, t)
            G, _ = an.offset_nonnegative(F, n)
            T = an.value_table(G, n)
            S = naive_local_search(G, frozenset(), range(n))
            C = int(np.argmax(T))
            lam = pair_smi(T, n)
            x = an.xi(S, an.to_set(C, list(range(n))), range(n))
            slack = 2 * T[_mask(S)] + T[_mask(set(range(n)) - S)] - (T[C] + x * lam)
            rep = an.check_theorem1(F, n)
            worst = min(worst, slack)
            if slack < -1e-9 or not rep.holds or abs(rep.lam - lam) > 1e-12:
                bad.append(t)
        return bad, worst
    (bad, worst), sec = _timed(run)
    ok = not bad and sec < 60
    report("local-search bound", ok, f"{200 - len(bad)}/200 hold, min slack {worst:.3g}", sec, 60)
    assert ok


def test_lemmas_and_smi_properties(report):
    def run():
        rng = np.random.default_rng(41)
        violations, checks = 0, 0
        for t in range(50):
            n = int(rng.integers(2, 7))
            _, F = harness.random_instance(rng, n, t)
            for rep in (an.check_appendix_lemmas(F, n), an.check_smi_properties(F, n)):
                violations += sum(len(v) for v in rep.violations.values())
                checks += sum(rep.checked.values())
        return violations, checks
    (violations, checks), sec = _timed(run)
    ok = violations == 0 and sec < 60
    report("supporting lemmas + SmI monotone/range", ok, f"{violations} violations in {checks} checks", sec, 60)
    assert ok


def test_split_invariance(report):
    (ok_suite, lines, _), sec = _timed(lambda: harness.run_suite("split-invariance", seed=5, trials=100))
    n_ok = sum(line.endswith("identical") for line in lines)
    ok = ok_suite and n_ok == 100 and sec < 5
    report("split invariance", ok, f"{n_ok}/100 bitwise identical", sec, 5)
    assert ok


def test_linear_victim_matches_fgsm(report):
    def run():
        rng = np.random.default_rng(51)
        bad, worst = [], 0.0
        for t in range(50):
            h, w = int(rng.integers(2, 7)), int(rng.integers(2, 7))
            spec = ImageSpec(h, w, 1)
            x = rng.random(spec.shape)
            wv = rng.normal(0, 1, spec.size)
            eps = float(rng.uniform(0.05, 0.4))
            # Bias keeps class 1 predicted everywhere in the ball: the search
            # never stops early and must reach the loss maximiser.
            b = eps * np.abs(wv).sum() + 1.0 - wv @ x.reshape(-1)
            model = binary_logistic(wv, b, spec)
            obj = AttackObjective(model, label=1, budget=10 ** 6)
            cfg = AttackConfig(epsilon=eps, initial_k=1, clip=False, max_queries=10 ** 6)
            res = hierarchical_attack(obj, x, cfg, spec)
            x_f = fgsm(model, x, 1, eps)
            same = np.array_equal(np.sign(res.x_adv - x), np.sign(x_f - x))
            gap = abs(res.value - model.loss_report(x_f.reshape(-1), 1).loss)
            worst = max(worst, gap)
            if not same or gap > 1e-9 or res.success:
                bad.append(t)
        return bad, worst
    (bad, worst), sec = _timed(run)
    ok = not bad and sec < 10
    report("linear victim = FGSM", ok, f"{50 - len(bad)}/50 sign patterns equal, max |dF| {worst:.2e}", sec, 10)
    assert ok


def test_gradient_check(report):
    def run():
        rng = np.random.default_rng(61)
        worst = 0.0
        for t in range(50):
            d, c = int(rng.integers(2, 12)), int(rng.integers(2, 6))
            if t % 2:
                model = MLP.random([d, int(rng.integers(2, 8)), c], seed=t)
            else:
                model = SoftmaxRegression(rng.normal(0, 1, (c, d)), rng.normal(0, 1, c))
            x = rng.normal(0, 1, d)
            y = int(rng.integers(0, c))
            _, _, g = forward_loss(model, x, y)
            h = 1e-4
            fd = np.array([(forward_loss(model, x + h * e, y)[0] - forward_loss(model, x - h * e, y)[0]) / (2 * h)
                           for e in np.eye(d)])
            rel = np.linalg.norm(g - fd) / max(np.linalg.norm(g), np.linalg.norm(fd), 1e-12)
            worst = max(worst, rel)
        return worst
    worst, sec = _timed(run)
    ok = worst <= 1e-5 and sec < 10
    report("input gradients vs central differences", ok, f"max relative error {worst:.2e}", sec, 10)
    assert ok


# -- desk-scale campaign --------------------------------------------------------

class AuditVictim:
    """Counts every victim query across the whole session."""
    total = 0

    def __init__(self, model):
        self.model = model

    def loss_report(self, x, y):
        AuditVictim.total += 1
        return self.model.loss_report(x, y)


@pytest.fixture(scope="module")
def campaign():
    start = time.perf_counter()
    spec = ImageSpec(28, 28, 1)
    train, test = gen_synthetic(10, spec, 3000, seed=0).split(2000)
    model = train_sgd(SoftmaxRegression.zeros(10, spec.size, spec), train, epochs=10, lr=0.05, seed=0)
    acc = float(np.mean(model.predict(test.images) == test.labels))
    cfg = harness.CampaignConfig(epsilon=0.3, max_queries=20000, initial_k=4, images=100)
    attack = harness.run_attack(model, test, cfg)
    rs = harness.run_baseline(model, test, cfg, "random-sign")

    # Independent audit: re-run the attack with an instrumented victim and
    # compare per-image query counts against the victim's own tally.
    audit = []
    acfg = cfg.attack_config()
    for i, label, _ in harness.select_pool(model, test, cfg):
        before = AuditVictim.total
        obj = AttackObjective(AuditVictim(model), label=label, budget=cfg.max_queries)
        res = hierarchical_attack(obj, test.image(i), acfg, test.spec)
        audit.append((obj.ledger.count, res.set_evals, AuditVictim.total - before, cfg.max_queries))
    return dict(acc=acc, attack=attack, rs=rs, audit=audit, seconds=time.perf_counter() - start)


def test_end_to_end_campaign(campaign, report):
    s = harness.summarize("attack", campaign["attack"].records)
    r = harness.summarize("random-sign", campaign["rs"].records)
    n = len(campaign["attack"].records)
    ok = (campaign["acc"] >= 0.9 and n == 100 and s["success_rate"] >= 0.95
          and s["success_rate"] > r["success_rate"] and campaign["seconds"] < 300)
    report("desk-scale campaign", ok,
           f"victim test acc {campaign['acc']:.3f}, {n} images, success {s['success_rate']:.2%} "
           f"(random-sign {r['success_rate']:.2%}), median queries {s['median_queries']}, "
           f"mean {s['avg_queries']:.1f}", campaign["seconds"], 300)
    assert ok


def test_query_accounting(campaign, report):
    bad = [a for a in campaign["audit"] if not (a[0] == a[1] == a[2] <= a[3])]
    # run_attack raises on any mismatch, so reaching here means its own audit passed too
    total = sum(a[2] for a in campaign["audit"])
    ok = not bad and len(campaign["audit"]) == 100
    report("query accounting", ok, f"{len(campaign['audit']) - len(bad)}/100 images: ledger == set evals "
           f"== victim calls <= budget ({total} queries audited)", campaign["seconds"])
    assert ok
