import pytest
from hypothesis import given, strategies as st

from evbudget.budget import BudgetConfig, compute_budget, load_budget_block
from evbudget.errors import BudgetNonPositive


@pytest.mark.parametrize(
    "cfg, expected",
    [
        (BudgetConfig(16384, 512, 256, 100), 15516),
        (BudgetConfig(12288, 0, 0, 0), 12288),
    ],
)
def test_compute_budget_examples(cfg, expected):
    assert compute_budget(cfg) == expected


def test_non_positive_budget_raises():
    with pytest.raises(BudgetNonPositive):
        compute_budget(BudgetConfig(8192, 8000, 100, 100))
    with pytest.raises(BudgetNonPositive):
        compute_budget(BudgetConfig(300, 100, 100, 100))


def test_default_epsilon_is_100():
    assert BudgetConfig(1000, 0, 0).epsilon == 100


@pytest.mark.parametrize("bad", [-1, 1.5, True])
def test_fields_must_be_non_negative_ints(bad):
    with pytest.raises((TypeError, ValueError)):
        BudgetConfig(bad, 0, 0, 0)


def test_run_config_block():
    cfg = load_budget_block({"budget": {"l_max": 16384, "l_text": 512, "l_gen": 256, "epsilon": 100}})
    assert compute_budget(cfg) == 15516
    with pytest.raises(KeyError):
        load_budget_block({})


counts = st.integers(min_value=0, max_value=10**6)


@given(counts, counts, counts, counts)
def test_accounting_identity(l_max, l_text, l_gen, eps):
    cfg = BudgetConfig(l_max, l_text, l_gen, eps)
    try:
        b = compute_budget(cfg)
    except BudgetNonPositive:
        assert l_max - l_text - l_gen - eps <= 0
        return
    assert b + l_text + l_gen + eps == l_max


@given(st.integers(10**5, 10**6), counts.map(lambda x: x % 1000), st.integers(1, 500), st.sampled_from(["l_max", "l_text", "l_gen", "epsilon"]))
def test_budget_is_monotone_in_each_field(l_max, l_text, delta, name):
    cfg = BudgetConfig(l_max, l_text, 256, 100)
    bumped = BudgetConfig(**{**cfg.to_dict(), name: getattr(cfg, name) + delta})
    sign = 1 if name == "l_max" else -1
    assert compute_budget(bumped) - compute_budget(cfg) == sign * delta
