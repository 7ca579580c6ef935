"""End-to-end run: workload -> routers -> allocation -> pooling -> prompt."""

from __future__ import annotations

from dataclasses import dataclass

from ..allocator import AllocationPlan, ScaleConfig, allocate
from ..budget import BudgetConfig, compute_budget
from ..sequencer import PromptTemplate, TokenSequence, fits_context, frame_grids, pool_plan, reconstruct
from .sweep import ORACLE, Routers
from .workload import Workload


@dataclass(frozen=True)
class PipelineResult:
    budget: int
    plan: AllocationPlan
    sequence: TokenSequence
    fits: bool


def run_pipeline(workload: Workload, cfg: BudgetConfig, scales: ScaleConfig, routers: Routers = ORACLE, *,
                 token_dim: int = 4, preamble: int | None = None, grid_seed: int = 0) -> PipelineResult:
    """Route, allocate, pool and splice one workload into a prompt.

    The prompt's text spans add up to ``cfg.l_text``: ``preamble`` tokens before
    the frames (half by default) and the rest after them.
    """
    budget = compute_budget(cfg)
    decision, scores = routers.decide(workload)
    plan = allocate(decision, scores, workload.n, budget, scales)
    grids = frame_grids(workload.t, workload.n, token_dim, seed=grid_seed)
    pooled = pool_plan(plan, grids)
    head = cfg.l_text // 2 if preamble is None else preamble
    template = PromptTemplate.interleaved(workload.t, head, cfg.l_text - head)
    seq = reconstruct(template, plan, pooled)
    return PipelineResult(budget, plan, seq, fits_context(seq, cfg))
