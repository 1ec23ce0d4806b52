"""Set-function machinery: marginal gains, lazy greedy insertion/deletion and
local search, plus naive (non-lazy) reference versions used as test oracles.

Sets are plain ``frozenset`` objects of integer element ids. A ground set is
any iterable of ids; the full ground set of a problem is ``range(n)``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .errors import ConfigurationError, DomainError

ElementSet = frozenset


class SetFunction:
    """Counted wrapper around ``fn: frozenset -> float``.

    ``size`` is the ground set size n used for range checks; ``None`` skips
    the check.
    """

    def __init__(self, fn: Callable[[frozenset], float], size: Optional[int] = None):
        self._fn = fn
        self.size = size
        self.eval_count = 0

    def __call__(self, s: Iterable[int]) -> float:
        s = frozenset(s)
        if self.size is not None:
            for e in s:
                if not 0 <= e < self.size:
                    raise DomainError(f"element {e} outside ground set of size {self.size}")
        value = float(self._fn(s))
        self.eval_count += 1
        return value

    def ground_set(self) -> range:
        if self.size is None:
            raise DomainError("set function has no declared ground set size")
        return range(self.size)


@dataclass
class SearchTrace:
    """Mutable record of a greedy phase.

    ``working`` and ``value`` always hold the incumbent (last accepted set and
    its F value), so a caller that catches an exception mid-phase can recover
    it. Counters split evaluations by purpose for accounting audits.
    """

    working: frozenset = frozenset()
    value: Optional[float] = None
    bookkeeping: int = 0
    initial: int = 0
    refreshes: int = 0
    accepted: list = field(default_factory=list)
    values: list = field(default_factory=list)

    @property
    def evals(self):
        return self.bookkeeping + self.initial + self.refreshes


@dataclass(frozen=True)
class LocalSearchConfig:
    max_iter: int = 1
    return_best_side: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be >= 1")


def _check_elem(F, e):
    if e < 0 or (F.size is not None and e >= F.size):
        raise DomainError(f"element {e} out of range")


def marginal_gain(F: SetFunction, S, e: int, value: Optional[float] = None) -> float:
    """F(S + e) - F(S). Pass ``value=F(S)`` to save one evaluation."""
    S = frozenset(S)
    _check_elem(F, e)
    if e in S:
        raise DomainError(f"element {e} already in the set")
    if value is None:
        value = F(S)
    return F(S | {e}) - value


def deletion_gain(F: SetFunction, S, e: int, value: Optional[float] = None) -> float:
    """F(S - e) - F(S)."""
    S = frozenset(S)
    if e not in S:
        raise DomainError(f"element {e} not in the set")
    if value is None:
        value = F(S)
    return F(S - {e}) - value


def _lazy_phase(F, S, candidates, move, value, trace):
    # Heap entries are (-rho, element, epoch, F value). Ordering by (-rho, id) gives
    # rho descending with the smaller id first on ties.
    if trace is None:
        trace = SearchTrace()
    trace.working = S
    if value is None:
        value = F(S)
        trace.bookkeeping += 1
    trace.value = value

    heap = []
    for e in sorted(candidates):
        v = F(move(S, e))
        trace.initial += 1
        heap.append((-(v - value), e, 0, v))
    heapq.heapify(heap)

    epoch = 0
    while heap:
        neg_rho, e, stamp, new_value = heapq.heappop(heap)
        if stamp == epoch:
            # Bound computed against the current set, so it is exact and,
            # being on top, beats every other upper bound.
            if neg_rho >= 0:
                break
        else:
            new_value = F(move(S, e))
            trace.refreshes += 1
            rho = new_value - value
            top = (heap[0][0], heap[0][1]) if heap else (math.inf, -1)
            if (-rho, e) < top:
                if rho <= 0:
                    break
            else:
                heapq.heappush(heap, (-rho, e, epoch, new_value))
                continue
        S = move(S, e)
        value = new_value
        epoch += 1
        trace.working = S
        trace.value = value
        trace.accepted.append(e)
        trace.values.append(value)
    return S


def lazy_greedy_insert(F: SetFunction, S, V, value=None, trace=None) -> frozenset:
    """Lazy greedy insertion of elements of ``V`` into ``S``.

    Upper bounds on the marginal gains are kept in a max-heap. A popped bound
    computed at an earlier working-set epoch is refreshed and accepted only if
    it still dominates the next bound (ties go to the smaller id); otherwise
    it is pushed back. The phase stops at the first dominant bound <= 0.

    ``value`` is a cached F(S); when omitted one extra evaluation is spent.
    ``trace`` (a :class:`SearchTrace`) receives the incumbent and counters.
    """
    S = frozenset(S)
    return _lazy_phase(F, S, frozenset(V) - S, lambda A, e: A | {e}, value, trace)


def lazy_greedy_delete(F: SetFunction, S, candidates=None, value=None, trace=None) -> frozenset:
    """Lazy greedy deletion from ``S``. ``candidates`` restricts which members
    may be removed (defaults to all of ``S``)."""
    S = frozenset(S)
    cands = S if candidates is None else frozenset(candidates) & S
    return _lazy_phase(F, S, cands, lambda A, e: A - {e}, value, trace)


def local_search(F: SetFunction, S, V, cfg: LocalSearchConfig = LocalSearchConfig(),
                 value=None, trace=None) -> frozenset:
    """Alternate lazy insertion and deletion for ``cfg.max_iter`` rounds.

    Deletion candidates are ``S & V``. With ``cfg.return_best_side`` the
    result is whichever of S and its complement in ``V`` scores higher (the
    complement costs one evaluation and wins only on a strict improvement).
    """
    if trace is None:
        trace = SearchTrace()
    V = frozenset(V)
    S = frozenset(S)
    for _ in range(cfg.max_iter):
        S = lazy_greedy_insert(F, S, V, value=value, trace=trace)
        value = trace.value
        S = lazy_greedy_delete(F, S, candidates=S & V, value=value, trace=trace)
        value = trace.value
    if cfg.return_best_side:
        comp = V - S
        comp_value = F(comp)
        trace.bookkeeping += 1
        if comp_value > value:
            S, value = comp, comp_value
            trace.working, trace.value = S, value
    return S


def _naive_phase(F, S, candidates_of, move):
    S = frozenset(S)
    value = F(S)
    while True:
        best = None
        for e in sorted(candidates_of(S)):
            v = F(move(S, e))
            if best is None or v - value > best[0]:
                best = (v - value, e, v)
        if best is None or best[0] <= 0:
            return S, value
        S = move(S, best[1])
        value = best[2]


def naive_greedy_insert(F: SetFunction, S, V) -> frozenset:
    """Plain greedy insertion: rescan every gain, add the argmax while > 0."""
    V = frozenset(V)
    S, _ = _naive_phase(F, S, lambda A: V - A, lambda A, e: A | {e})
    return S


def naive_greedy_delete(F: SetFunction, S) -> frozenset:
    S, _ = _naive_phase(F, S, lambda A: A, lambda A, e: A - {e})
    return S


def naive_local_search(F: SetFunction, S, V, until_convergence: bool = True,
                       max_iter: int = 1) -> frozenset:
    """Reference local search: greedy insert then greedy delete, repeated
    until a full pass changes nothing (or ``max_iter`` passes)."""
    V = frozenset(V)
    S = frozenset(S)
    passes = 0
    while True:
        before = S
        S = naive_greedy_insert(F, S, V)
        S = naive_greedy_delete(F, S)
        passes += 1
        if S == before or (not until_convergence and passes >= max_iter):
            return S


def is_local_optimum(F: SetFunction, S, V) -> bool:
    """No single insertion or deletion strictly improves F(S)."""
    S = frozenset(S)
    value = F(S)
    ok = True
    for a in sorted(V):
        flipped = S - {a} if a in S else S | {a}
        if F(flipped) > value:
            ok = False
    return ok
