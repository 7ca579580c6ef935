"""Budgeted allocation of visual tokens across video frames.

A policy router picks between uniform coverage (Global) and relevance-driven
allocation (Fragment); a frame router marks the frames worth keeping at full
resolution; the allocator fits the result into the visual-token budget left
over by the prompt.
"""

from .allocator import (
    AllocationPlan,
    KeptFrame,
    RelevancePartition,
    ScaleConfig,
    allocate,
    allocate_fragment,
    allocate_global,
    tokens_at_scale,
    uniform_sample,
)
from .budget import BudgetConfig, compute_budget
from .routers import FrameScore, Policy, PolicyDecision, RouterModel, TrainingConfig

__version__ = "0.1.0"

__all__ = [
    "AllocationPlan", "BudgetConfig", "FrameScore", "KeptFrame", "Policy", "PolicyDecision", "RelevancePartition",
    "RouterModel", "ScaleConfig", "TrainingConfig", "allocate", "allocate_fragment", "allocate_global",
    "compute_budget", "tokens_at_scale", "uniform_sample",
]
