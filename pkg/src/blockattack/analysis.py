"""Exhaustive checkers for the submodularity theory of local search.

Everything here enumerates subsets, so ground sets must be tiny. Functions
take a :class:`~blockattack.setfn.SetFunction` and a ground set given either
as a size ``n`` or an iterable of ids; internally subsets are bitmasks over
the sorted ground set and F is tabulated once (2^n evaluations).

The submodularity index is read with S ranging over the whole ground set
(disjoint from A), and only A restricted to L.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np

from .errors import DomainError
from .setfn import SetFunction, is_local_optimum, naive_local_search

TOL = 1e-9


def _elements(V):
    return list(range(V)) if isinstance(V, int) else sorted(V)


def _guard(elems, limit):
    if len(elems) > limit:
        raise DomainError(f"ground set of size {len(elems)} exceeds enumeration limit {limit}")


def to_mask(S, elems):
    pos = {e: i for i, e in enumerate(elems)}
    m = 0
    for e in S:
        m |= 1 << pos[e]
    return m


def to_set(mask, elems):
    return frozenset(e for i, e in enumerate(elems) if mask >> i & 1)


def subsets(V):
    """All subsets of V in binary-counting order."""
    elems = _elements(V)
    _guard(elems, 20)
    for m in range(1 << len(elems)):
        yield to_set(m, elems)


def value_table(F, V):
    elems = _elements(V)
    _guard(elems, 20)
    return np.array([F(to_set(m, elems)) for m in range(1 << len(elems))], dtype=float)


def _submasks(mask):
    """Submasks of ``mask`` in increasing order."""
    out = []
    s = mask
    while True:
        out.append(s)
        if s == 0:
            break
        s = (s - 1) & mask
    return out[::-1]


def _popcount(m):
    return bin(m).count("1")


# -- instance families ------------------------------------------------------

def from_table(values):
    """SetFunction over range(n) reading a length-2^n table indexed by bitmask."""
    values = np.asarray(values, dtype=float)
    n = int(np.log2(len(values)))
    if 1 << n != len(values):
        raise DomainError("table length must be a power of two")
    elems = list(range(n))
    return SetFunction(lambda S: values[to_mask(S, elems)], size=n)


def modular(weights, offset=0.0):
    weights = np.asarray(weights, dtype=float)
    return SetFunction(lambda S: offset + float(sum(weights[e] for e in sorted(S))), size=len(weights))


def coverage(cover, weights):
    """Weighted coverage: F(S) = total weight of items covered by S.

    ``cover`` is a boolean (n, items) incidence matrix.
    """
    cover = np.asarray(cover, dtype=bool)
    weights = np.asarray(weights, dtype=float)

    def fn(S):
        if not S:
            return 0.0
        hit = cover[sorted(S)].any(axis=0)
        return float(weights[hit].sum())

    return SetFunction(fn, size=cover.shape[0])


def random_coverage(n, rng, items=None, density=0.35):
    # Dyadic weights keep every coverage sum exact in float64, so cached
    # gains stay true upper bounds and exact ties are real ties.
    items = items or 2 * n
    return coverage(rng.random((n, items)) < density, rng.integers(1, 1024, items) / 1024)


def random_modular(n, rng):
    return modular(rng.normal(0, 1, n))


def random_table(n, rng, nonnegative=True):
    """Uniform random values, a generic non-submodular function."""
    lo = 0.0 if nonnegative else -1.0
    return from_table(rng.uniform(lo, 1.0, 1 << n))


def logistic_counterexample():
    """Closed-form two-pixel instance: f(x) = log(1 + exp(-w.x)), w = (-1, -1),
    x = 0, epsilon = 1; element i puts +1 on pixel i, the rest get -1."""
    w = np.array([-1.0, -1.0])

    def fn(S):
        x_adv = np.array([1.0 if i in S else -1.0 for i in range(2)])
        return float(np.log1p(np.exp(-w @ x_adv)))

    return SetFunction(fn, size=2)


def offset_nonnegative(F, V):
    """(G, offset) with G = F + offset and offset = max(0, -min F)."""
    table = value_table(F, V)
    offset = max(0.0, -float(table.min()))
    elems = _elements(V)
    shifted = table + offset
    return SetFunction(lambda S: shifted[to_mask(S, elems)], size=F.size), offset


# -- optimisation and submodularity -----------------------------------------

def brute_force_optimum(F, V):
    """Global maximiser over all subsets; ties go to the smallest bitmask."""
    elems = _elements(V)
    table = value_table(F, elems)
    m = int(np.argmax(table))
    return to_set(m, elems), float(table[m])


def is_submodular(F, V, tol=TOL):
    """Return ``(True, None)`` or ``(False, (A, B, e))`` for the first
    violation of diminishing returns in (B, A, e) ascending bitmask order."""
    elems = _elements(V)
    _guard(elems, 12)
    n = len(elems)
    T = value_table(F, elems)
    for B in range(1 << n):
        for A in _submasks(B):
            for i in range(n):
                bit = 1 << i
                if B & bit:
                    continue
                if T[A | bit] - T[A] < T[B | bit] - T[B] - tol:
                    return False, (to_set(A, elems), to_set(B, elems), elems[i])
    return True, None


def _pair_minimum(T, n, k):
    """m[A] = min(0, min phi(S, A)) over S disjoint from A, 2 <= |S| <= k."""
    m = np.zeros(1 << n)
    for A in range(1 << n):
        free = [i for i in range(n) if not (A >> i) & 1]
        base = T[A]
        singles = {i: T[A | 1 << i] - base for i in free}
        best = 0.0
        for size in range(2, min(k, len(free)) + 1):
            for S in itertools.combinations(free, size):
                Smask = sum(1 << i for i in S)
                phi = sum(singles[i] for i in S) - (T[A | Smask] - base)
                if phi < best:
                    best = phi
        m[A] = best
    return m


def smi_table(F, V, k=2, table=None):
    """lambda_F(L, k) for every L (indexed by bitmask), via a subset-minimum
    pass over the per-A minima."""
    elems = _elements(V)
    n = len(elems)
    T = value_table(F, elems) if table is None else table
    lam = _pair_minimum(T, n, k)
    for i in range(n):
        bit = 1 << i
        for L in range(1 << n):
            if L & bit:
                lam[L] = min(lam[L], lam[L ^ bit])
    return lam


def submodularity_index(F, L, k=2, V=None):
    """min over A subset of L, S disjoint from A with |S| <= k, of
    sum_x F_x(A) - F_S(A). ``V`` defaults to ``F.ground_set()``."""
    elems = _elements(F.ground_set() if V is None else V)
    _guard(elems, 12)
    lam = smi_table(F, elems, k)
    return float(lam[to_mask(L, elems)])


def xi(S, C, V):
    """Combinatorial coefficient of the SmI term in the local-search bound."""
    S, C, V = frozenset(S), frozenset(C), frozenset(V)
    outside = len(V - (S | C))
    return (comb(len(S - C), 2) + comb(len(C - S), 2)
            + outside * len(S) + len(C - S) * len(S & C))


@dataclass
class TheoremReport:
    S: frozenset
    C: frozenset
    F_S: float
    F_C: float
    F_complement: float
    lam: float
    xi: int
    lhs: float
    rhs: float
    holds: bool
    offset: float = 0.0


def check_theorem1(F, V, tol=TOL) -> TheoremReport:
    """Run reference local search to convergence from the empty set and test
    2F(S) + F(V-S) >= F(C) + xi * lambda_F(V, 2).

    F is shifted to be non-negative first if needed (``report.offset``).
    """
    elems = _elements(V)
    _guard(elems, 10)
    G, offset = offset_nonnegative(F, elems)
    T = value_table(G, elems)
    Vset = frozenset(elems)
    S = naive_local_search(G, frozenset(), Vset)
    C, fc = brute_force_optimum(G, elems)
    lam = float(smi_table(G, elems, 2, T)[-1])
    x = xi(S, C, Vset)
    fs = float(T[to_mask(S, elems)])
    fcomp = float(T[to_mask(Vset - S, elems)])
    lhs = 2 * fs + fcomp
    rhs = fc + x * lam
    return TheoremReport(S, C, fs, fc, fcomp, lam, x, lhs, rhs, lhs >= rhs - tol, offset)


def check_corollary1(F, V, tol=TOL) -> Optional[bool]:
    """max(F(S), F(V-S)) >= (F(C) + xi * lambda) / 3, or ``None`` (skipped)
    when the right-hand side is negative."""
    rep = check_theorem1(F, V, tol)
    if rep.rhs < 0:
        return None
    return max(rep.F_S, rep.F_complement) >= rep.rhs / 3 - tol


@dataclass
class LemmaReport:
    checked: dict = field(default_factory=dict)
    violations: dict = field(default_factory=dict)

    @property
    def ok(self):
        return not any(self.violations.values())

    def _add(self, name, bad, witness):
        self.checked[name] = self.checked.get(name, 0) + 1
        self.violations.setdefault(name, [])
        if bad:
            self.violations[name].append(witness)


def check_appendix_lemmas(F, V, tol=TOL) -> LemmaReport:
    """Exhaustively test the three supporting lemmas.

    * pair-chain bound: F_x(A) - F_x(B) >= |B-A| lambda(B, 2), A <= B, x not in B
    * set-chain bound: F(A+Y) - F(A) >= F(B+Y) - F(B) + |B-A||Y| lambda(B+Y, 2)
      for A <= B and Y disjoint from B
    * local-optimum bounds for every local optimum S and all I <= S <= J
    """
    elems = _elements(V)
    _guard(elems, 8)
    n = len(elems)
    T = value_table(F, elems)
    lam = smi_table(F, elems, 2, T)
    full = (1 << n) - 1
    rep = LemmaReport()

    for B in range(1 << n):
        for A in _submasks(B):
            M = _popcount(B ^ A)
            for i in range(n):
                bit = 1 << i
                if B & bit:
                    continue
                lhs = (T[A | bit] - T[A]) - (T[B | bit] - T[B])
                rep._add("lemma2", lhs < M * lam[B] - tol, (A, B, i))

    for B in range(1 << n):
        rest = full ^ B
        for A in _submasks(B):
            d = _popcount(B ^ A)
            for Y in _submasks(rest):
                lhs = T[A | Y] - T[A]
                rhs = T[B | Y] - T[B] + d * _popcount(Y) * lam[B | Y]
                rep._add("lemma3", lhs < rhs - tol, (A, B, Y))

    Fs = SetFunction(lambda S: T[to_mask(S, elems)], size=None)
    for S in range(1 << n):
        if not is_local_optimum(Fs, to_set(S, elems), elems):
            continue
        for I in _submasks(S):
            bound = T[S] - comb(_popcount(S ^ I), 2) * lam[S]
            rep._add("lemma4_lower", T[I] > bound + tol, (I, S))
        for Jx in _submasks(full ^ S):
            J = S | Jx
            bound = T[S] - comb(_popcount(Jx), 2) * lam[J]
            rep._add("lemma4_upper", T[J] > bound + tol, (S, J))
    return rep


def check_smi_properties(F, V, ks=(2, 3), tol=TOL) -> LemmaReport:
    """SmI monotonicity in L, and -2F(C) <= lambda(V, 2) <= 2F(C) (F is
    shifted to be non-negative for the range check)."""
    elems = _elements(V)
    _guard(elems, 8)
    n = len(elems)
    rep = LemmaReport()
    for k in ks:
        lam = smi_table(F, elems, k)
        for J in range(1 << n):
            for I in _submasks(J):
                rep._add("smi_monotone", lam[I] < lam[J] - tol, (k, I, J))
    G, _ = offset_nonnegative(F, elems)
    _, fc = brute_force_optimum(G, elems)
    lam_v = smi_table(G, elems, 2)[-1]
    rep._add("smi_range", not (-2 * fc - tol <= lam_v <= 2 * fc + tol), (lam_v, fc))
    return rep
