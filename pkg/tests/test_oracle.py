import math

import numpy as np
import pytest

from blockattack import AttackObjective, BlockGrid, NoiseCanvas, binary_logistic
from blockattack.errors import BudgetExhausted, ConfigurationError

from conftest import F_BOTH, F_EMPTY


def two_pixel():
    return binary_logistic([-1.0, -1.0])


def test_untargeted_closed_form():
    obj = AttackObjective(two_pixel(), label=1, budget=5)
    f = obj.evaluate(np.array([1.0, 1.0]))
    assert f == pytest.approx(math.log1p(math.exp(2.0)), abs=1e-12)
    assert f == pytest.approx(2.1269, abs=1e-4)
    assert obj.ledger.success and obj.ledger.first_success_at == 1


def test_targeted_success_and_sign():
    obj = AttackObjective(two_pixel(), target=0, budget=5)
    f = obj.evaluate(np.array([1.0, 1.0]))
    assert obj.ledger.success
    assert f == pytest.approx(-math.log1p(math.exp(-2.0)))


def test_mode_sign_contract():
    rng = np.random.default_rng(0)
    model = binary_logistic(rng.normal(0, 1, 4), 0.3)
    x = rng.random(4)
    for y in (0, 1):
        u = AttackObjective(model, label=y).evaluate(x)
        t = AttackObjective(model, target=y).evaluate(x)
        assert u == -t


def test_budget_boundary():
    obj = AttackObjective(two_pixel(), label=0, budget=10)
    for _ in range(10):
        obj.evaluate(np.zeros(2))
    with pytest.raises(BudgetExhausted):
        obj.evaluate(np.zeros(2))
    assert obj.ledger.count == 10 and len(obj.ledger.trajectory) == 10


def test_success_is_monotone():
    obj = AttackObjective(two_pixel(), label=1, budget=10)
    obj.evaluate(np.array([-1.0, -1.0]))
    assert not obj.ledger.success
    obj.evaluate(np.array([1.0, 1.0]))
    obj.evaluate(np.array([-1.0, -1.0]))
    assert obj.ledger.success and obj.ledger.first_success_at == 2
    assert not obj.ledger.last_success


def test_as_set_function_reproduces_instance():
    obj = AttackObjective(two_pixel(), label=1, budget=100)
    grid = BlockGrid(NoiseCanvas(1, 2), 1, 1)
    F = obj.as_set_function(np.zeros((1, 2, 1)), grid, 1.0, clip=False)
    assert F(set()) == pytest.approx(F_EMPTY, abs=1e-12)
    assert F({0, 1}) == pytest.approx(F_BOTH, abs=1e-12)
    assert F({0, 1}) == F({0, 1})
    assert F.eval_count == obj.ledger.count == 4


def test_objective_needs_one_mode():
    with pytest.raises(ConfigurationError):
        AttackObjective(two_pixel())
    with pytest.raises(ConfigurationError):
        AttackObjective(two_pixel(), label=0, target=1)
