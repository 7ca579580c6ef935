"""Visual-token budget from context-window accounting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

from .errors import BudgetNonPositive

DEFAULT_EPSILON = 100


@dataclass(frozen=True)
class BudgetConfig:
    """Context-window accounting inputs, all in tokens.

    Attributes:
        l_max: maximum context length of the language model.
        l_text: length of the text part of the prompt.
        l_gen: tokens reserved for generation.
        epsilon: safety margin.
    """

    l_max: int
    l_text: int
    l_gen: int
    epsilon: int = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        for name in ("l_max", "l_text", "l_gen", "epsilon"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError(f"{name} must be an int, got {type(value).__name__}")
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")

    @classmethod
    def from_dict(cls, block: Mapping[str, Any]) -> "BudgetConfig":
        return cls(
            l_max=int(block["l_max"]),
            l_text=int(block.get("l_text", 0)),
            l_gen=int(block.get("l_gen", 0)),
            epsilon=int(block.get("epsilon", DEFAULT_EPSILON)),
        )

    def to_dict(self) -> dict[str, int]:
        return {"l_max": self.l_max, "l_text": self.l_text, "l_gen": self.l_gen, "epsilon": self.epsilon}


def raw_budget(cfg: BudgetConfig) -> int:
    """Signed budget, without the positivity check."""
    return cfg.l_max - cfg.l_text - cfg.l_gen - cfg.epsilon


def compute_budget(cfg: BudgetConfig) -> int:
    """Return the visual-token budget ``l_max - l_text - l_gen - epsilon``.

    Raises:
        BudgetNonPositive: the prompt leaves no room for visual tokens.
    """
    budget = raw_budget(cfg)
    if budget <= 0:
        raise BudgetNonPositive(
            f"no room for visual tokens: {cfg.l_max} - {cfg.l_text} - {cfg.l_gen} - {cfg.epsilon} = {budget}"
        )
    return budget


def load_budget_block(run_config: Mapping[str, Any]) -> BudgetConfig:
    """Read the ``budget`` block of a run-config mapping."""
    if "budget" not in run_config:
        raise KeyError("run config has no 'budget' block")
    return BudgetConfig.from_dict(run_config["budget"])
