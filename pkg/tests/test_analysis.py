import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blockattack import analysis as an
from blockattack.errors import DomainError
from blockattack.setfn import SetFunction

from conftest import F_BOTH, F_EMPTY, F_ONE


def all_subsets(elems):
    elems = list(elems)
    for r in range(len(elems) + 1):
        yield from (frozenset(c) for c in itertools.combinations(elems, r))


def smi_by_definition(F, L, V, k):
    """Direct enumeration of the index, independent of the table code."""
    best = math.inf
    for A in all_subsets(L):
        for S in all_subsets(set(V) - A):
            if len(S) > k:
                continue
            phi = sum(F(A | {x}) - F(A) for x in S) - (F(A | S) - F(A))
            best = min(best, phi)
    return best


def test_brute_force_optimum_examples(mod3, counterexample):
    assert an.brute_force_optimum(mod3, 3) == (frozenset({0, 2}), 5.0)
    C, v = an.brute_force_optimum(counterexample, 2)
    assert C == {0, 1} and v == pytest.approx(2.1269, abs=1e-4)
    const = SetFunction(lambda S: 1.5, size=3)
    assert an.brute_force_optimum(const, 3) == (frozenset(), 1.5)


def test_brute_force_size_guard():
    with pytest.raises(DomainError):
        an.brute_force_optimum(SetFunction(lambda S: 0.0), 21)


def test_is_submodular_counterexample(counterexample):
    ok, witness = an.is_submodular(counterexample, 2)
    # (empty, {pixel 1}, pixel 2) with zero-based ids
    assert not ok and witness == (frozenset(), frozenset({0}), 1)


def test_is_submodular_true_cases(mod3):
    assert an.is_submodular(mod3, 3) == (True, None)
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert an.is_submodular(an.random_coverage(6, rng), 6)[0]


def test_smi_examples(mod3, counterexample):
    assert an.submodularity_index(mod3, {0, 1, 2}) == pytest.approx(0.0, abs=1e-12)
    lam = an.submodularity_index(counterexample, {0, 1})
    assert lam == pytest.approx(2 * (F_ONE - F_EMPTY) - (F_BOTH - F_EMPTY), abs=1e-12)
    assert lam == pytest.approx(-0.8676, abs=1e-4)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1), st.integers(2, 3), st.data())
def test_smi_table_matches_definition(n, seed, k, data):
    F = an.random_table(n, np.random.default_rng(seed), nonnegative=False)
    L = frozenset(data.draw(st.sets(st.integers(0, n - 1))))
    assert an.submodularity_index(F, L, k) == pytest.approx(smi_by_definition(F, L, range(n), k), abs=1e-12)


def test_smi_monotone_in_L():
    rng = np.random.default_rng(1)
    F = an.random_table(5, rng)
    lam = an.smi_table(F, 5)
    for J in range(32):
        for I in range(32):
            if I & J == I:
                assert lam[I] >= lam[J]


@pytest.mark.parametrize("S,C,V,expected", [
    ({1, 2}, {2, 3}, {1, 2, 3, 4}, 3),
    ({1, 2, 3}, {1, 2, 3}, {1, 2, 3}, 0),
    (set(), {0, 1, 2}, {0, 1, 2}, 3),
])
def test_xi(S, C, V, expected):
    assert an.xi(S, C, V) == expected


def test_theorem1_on_random_families():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        assert an.check_theorem1(an.random_coverage(6, rng), 6).holds
    for _ in range(100):
        rep = an.check_theorem1(an.random_table(6, rng, nonnegative=False), 6)
        assert rep.holds and rep.offset >= 0


def test_theorem1_zero_function():
    rep = an.check_theorem1(SetFunction(lambda S: 0.0, size=4), 4)
    assert rep.lhs == rep.rhs == 0 and rep.holds


def test_corollary_cases():
    rng = np.random.default_rng(3)
    for _ in range(30):
        assert an.check_corollary1(an.random_coverage(5, rng), 5) is True
    assert an.check_corollary1(SetFunction(lambda S: 0.0, size=3), 3) is True
    # strongly non-submodular table: F(C) + xi * lambda < 0
    F = an.random_table(4, np.random.default_rng(0))
    assert an.check_theorem1(F, 4).rhs < 0
    assert an.check_corollary1(F, 4) is None


def test_lemmas_modular_and_counterexample(mod3, counterexample):
    assert an.check_appendix_lemmas(mod3, 3).ok
    assert an.check_appendix_lemmas(counterexample, 2).ok


def test_lemmas_random():
    rng = np.random.default_rng(77)
    for t in range(50):
        F = an.random_table(5, rng, nonnegative=False) if t % 2 else an.random_coverage(5, rng)
        rep = an.check_appendix_lemmas(F, 5)
        assert rep.ok, rep.violations
        assert set(rep.checked) == {"lemma2", "lemma3", "lemma4_lower", "lemma4_upper"}


def test_smi_range_and_monotone_properties():
    rng = np.random.default_rng(5)
    for _ in range(20):
        assert an.check_smi_properties(an.random_table(5, rng, nonnegative=False), 5).ok


def test_lemma_checker_detects_planted_violation(monkeypatch):
    # a checker that never fails is worthless: corrupt the index and expect hits
    rng = np.random.default_rng(0)
    F = an.random_table(4, rng)
    real = an.smi_table
    monkeypatch.setattr(an, "smi_table", lambda *a, **k: real(*a, **k) + 5.0)
    assert not an.check_appendix_lemmas(F, 4).ok
