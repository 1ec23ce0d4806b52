"""Zeroth-order attack objective with exact query accounting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .blocks import assemble_perturbation
from .errors import AttackSucceeded, BudgetExhausted, ConfigurationError
from .setfn import SetFunction


class LossReport(NamedTuple):
    loss: float
    predicted: int


@dataclass
class QueryLedger:
    budget: int
    count: int = 0
    success: bool = False
    first_success_at: Optional[int] = None
    last_success: bool = False
    trajectory: list = field(default_factory=list)

    @property
    def remaining(self):
        return self.budget - self.count


class AttackObjective:
    """Loss oracle over a victim classifier.

    The victim only needs ``loss_report(x_flat, label) -> LossReport``. In
    untargeted mode the objective is the loss at the true label; in targeted
    mode it is the negated loss at the target label. Success is checked on
    every query.
    """

    def __init__(self, victim, label: Optional[int] = None, target: Optional[int] = None,
                 budget: int = 10000):
        if (label is None) == (target is None):
            raise ConfigurationError("give exactly one of label (untargeted) or target (targeted)")
        if budget < 0:
            raise ConfigurationError("budget must be >= 0")
        self.victim = victim
        self.label = label
        self.target = target
        self.ledger = QueryLedger(budget)

    @property
    def targeted(self):
        return self.target is not None

    def evaluate(self, x_adv) -> float:
        ledger = self.ledger
        if ledger.count >= ledger.budget:
            raise BudgetExhausted(ledger.budget)
        flat = np.asarray(x_adv, dtype=float).reshape(-1)
        if self.targeted:
            report = self.victim.loss_report(flat, self.target)
            f = -report.loss
            hit = report.predicted == self.target
        else:
            report = self.victim.loss_report(flat, self.label)
            f = report.loss
            hit = report.predicted != self.label
        ledger.count += 1
        ledger.last_success = hit
        if hit and not ledger.success:
            ledger.success = True
            ledger.first_success_at = ledger.count
        ledger.trajectory.append((ledger.count, f))
        return f

    def as_set_function(self, x, grid, epsilon, clip=True, spec=None,
                        stop_on_success=False) -> "OracleSetFunction":
        return OracleSetFunction(self, x, grid, epsilon, clip, spec, stop_on_success)


class OracleSetFunction(SetFunction):
    """F(S) = objective of the image with +epsilon on S and -epsilon elsewhere.

    With ``stop_on_success`` a successful query raises
    :class:`AttackSucceeded` after it has been counted.
    """

    def __init__(self, objective, x, grid, epsilon, clip, spec, stop_on_success):
        self.objective = objective
        self.grid = grid
        x = np.asarray(x, dtype=float)

        def fn(S):
            return objective.evaluate(assemble_perturbation(x, grid, S, epsilon, clip, spec))

        super().__init__(fn, size=len(grid))
        self.stop_on_success = stop_on_success

    def __call__(self, s):
        s = frozenset(s)
        value = super().__call__(s)
        if self.stop_on_success and self.objective.ledger.last_success:
            raise AttackSucceeded(s, value)
        return value
