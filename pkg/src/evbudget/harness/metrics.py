"""Policy-label derivation, evidence utility, and token/cost accounting."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path

from ..allocator import AllocationPlan
from ..errors import ShapeMismatch
from ..routers import Policy
from .workload import Workload

# Router overhead in token units: the 0.5 s router pass against 3.0 s of
# prefill for 7,748 visual tokens.
DEFAULT_ROUTER_CONSTANT = round(7748 * 0.5 / 3.0)


@dataclass(frozen=True)
class ABRecord:
    category: str
    acc_fragment: float
    acc_global: float

    def __post_init__(self) -> None:
        for name in ("acc_fragment", "acc_global"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


def _dec(x: float) -> Decimal:
    return Decimal(repr(float(x)))


def derive_policy_label(record: ABRecord, tau: float) -> Policy:
    """Fragment only if its accuracy beats Global by strictly more than ``tau``.

    The margin is compared in decimal arithmetic on the values as written, so
    ``0.65 - 0.60`` is exactly ``0.05`` rather than its binary approximation.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    margin = _dec(record.acc_fragment) - _dec(record.acc_global)
    return Policy.FRAGMENT if margin > _dec(tau) else Policy.GLOBAL


def read_ab_csv(path: str | Path) -> list[ABRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            ABRecord(row["category"], float(row["acc_fragment"]), float(row["acc_global"]))
            for row in csv.DictReader(fh)
        ]


def fidelity(scale: int) -> float:
    return 1.0 / (scale * scale)


def utility(plan: AllocationPlan, workload: Workload) -> float:
    """Fidelity-weighted share of the workload's evidence that the plan retains."""
    if plan.t != workload.t:
        raise ShapeMismatch(f"plan covers {plan.t} frames, workload has {workload.t}")
    total = sum(f.evidence for f in workload.frames)
    if total == 0:
        return 1.0
    kept = sum(workload.frames[k.frame].evidence * fidelity(k.scale) for k in plan.kept)
    return kept / total


def token_reduction(dense_tokens: int, compressed_tokens: int) -> float:
    """Percent of dense tokens saved, rounded to one decimal."""
    if dense_tokens <= 0:
        raise ValueError("dense_tokens must be positive")
    if compressed_tokens < 0:
        raise ValueError("compressed_tokens must be non-negative")
    return round(100.0 * (1.0 - compressed_tokens / dense_tokens), 1)


def cost_proxy(plan: AllocationPlan | int, router_used: bool, router_constant: int = DEFAULT_ROUTER_CONSTANT) -> int:
    """Prefill cost in token units plus a fixed router overhead."""
    tokens = plan if isinstance(plan, int) else plan.total_tokens
    return tokens + (router_constant if router_used else 0)
