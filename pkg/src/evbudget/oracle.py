"""Independent reference allocator, plan verifier, and exhaustive comparison.

Nothing here calls into the allocator's decision logic. The reference is built
from the priority list (guarantee critical frames, then background frames,
then discard/subsample), so agreement with the allocator is a real check.
"""

from __future__ import annotations

import enum
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .allocator import AllocationPlan, KeptFrame, RelevancePartition, ScaleConfig, allocate_fragment
from .errors import BudgetTooSmall, EvBudgetError, InvalidGeometry
from .routers import Policy

MAX_REFERENCE_T = 16


class ViolationKind(str, enum.Enum):
    BUDGET_EXCEEDED = "BudgetExceeded"
    PRIORITY_INVERSION = "PriorityInversion"
    WRONG_SCALE = "WrongScale"
    BAD_PARTITION = "BadPartition"
    WRONG_COUNT = "WrongCount"
    NON_UNIFORM_SAMPLE = "NonUniformSample"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    detail: str

    def __str__(self) -> str:
        return f"{self.kind.value}: {self.detail}"


def _pooled_size(n: int, s: int) -> int:
    side = 0
    while side * side < n:
        side += 1
    if side * side != n or s <= 0 or side % s != 0:
        raise InvalidGeometry(f"n={n}, s={s}")
    return (side // s) ** 2


def _spread(pool: Sequence[int], count: int) -> list[int]:
    """Evenly spaced picks: bin ``j`` of ``count`` equal bins, take its midpoint."""
    size = len(pool)
    picks = []
    for j in range(count):
        pos, _ = divmod((2 * j + 1) * size, 2 * count)
        picks.append(pool[pos])
    return picks


def reference_allocate(partition: RelevancePartition, n: int, b: int, scales: ScaleConfig, *,
                       max_t: int = MAX_REFERENCE_T) -> AllocationPlan:
    critical = list(partition.f1)
    background = list(partition.f0)
    t = len(critical) + len(background)
    if t > max_t:
        raise ValueError(f"reference allocator is limited to T <= {max_t}, got {t}")
    fine = _pooled_size(n, scales.s_1)
    coarse = _pooled_size(n, scales.s_0)
    need_critical = fine * len(critical)
    need_background = coarse * len(background)

    assigned: list[tuple[int, int, int]] = []
    sampled = None
    if b > 0 and need_critical <= b:
        # every critical frame at full fidelity
        assigned += [(f, scales.s_1, fine) for f in critical]
        left = b - need_critical
        # background gets whatever remains
        if need_background <= left:
            assigned += [(f, scales.s_0, coarse) for f in background]
        else:
            sampled = left // coarse
            assigned += [(f, scales.s_0, coarse) for f in _spread(background, sampled)]
    elif b > 0:
        # background discarded, critical set thinned evenly
        sampled = b // fine
        assigned += [(f, scales.s_1, fine) for f in _spread(critical, sampled)]
    if not assigned and t > 0:
        raise BudgetTooSmall(f"budget {b} holds no frame")

    assigned.sort()
    kept_ids = {a[0] for a in assigned}
    return AllocationPlan(
        policy=Policy.FRAGMENT,
        kept=tuple(KeptFrame(*a) for a in assigned),
        dropped=tuple(f for f in range(t) if f not in kept_ids),
        total_tokens=sum(a[2] for a in assigned),
        c1=need_critical,
        c0=need_background,
        k_sampled=sampled,
    )


# --- plan verification ---------------------------------------------------------


def _check_tier(kept: list[int], tier: Sequence[int], label: str, out: list[Violation]) -> None:
    if 0 < len(kept) < len(tier) and kept != _spread(tier, len(kept)):
        out.append(Violation(ViolationKind.NON_UNIFORM_SAMPLE, f"{label} frames {kept} are not evenly spaced over {list(tier)}"))


def verify_plan(plan: AllocationPlan, partition: RelevancePartition, n: int, b: int,
                scales: ScaleConfig) -> list[Violation]:
    """Return every rule the plan breaks; an empty list means the plan is valid."""
    out: list[Violation] = []
    t = partition.t
    kept_ids = [k.frame for k in plan.kept]
    dropped = list(plan.dropped)

    if kept_ids != sorted(set(kept_ids)) or dropped != sorted(set(dropped)):
        out.append(Violation(ViolationKind.BAD_PARTITION, "kept/dropped lists must be strictly ascending"))
    if set(kept_ids) & set(dropped):
        out.append(Violation(ViolationKind.BAD_PARTITION, f"frames both kept and dropped: {sorted(set(kept_ids) & set(dropped))}"))
    if set(kept_ids) | set(dropped) != set(range(t)) or len(kept_ids) + len(dropped) != t:
        out.append(Violation(ViolationKind.BAD_PARTITION, f"kept and dropped do not partition 0..{t - 1}"))

    token_sum = sum(k.tokens for k in plan.kept)
    if plan.total_tokens > b or token_sum > b:
        out.append(Violation(ViolationKind.BUDGET_EXCEEDED, f"{max(plan.total_tokens, token_sum)} tokens > budget {b}"))
    if plan.total_tokens != token_sum:
        out.append(Violation(ViolationKind.WRONG_COUNT, f"total_tokens {plan.total_tokens} != sum of kept {token_sum}"))
    for k in plan.kept:
        try:
            if k.tokens != _pooled_size(n, k.scale):
                out.append(Violation(ViolationKind.WRONG_COUNT, f"frame {k.frame}: {k.tokens} tokens at scale {k.scale}"))
        except InvalidGeometry:
            out.append(Violation(ViolationKind.WRONG_SCALE, f"frame {k.frame}: scale {k.scale} invalid for n={n}"))

    if plan.policy == Policy.GLOBAL:
        _verify_global(plan, t, n, b, scales, out)
    else:
        _verify_fragment(plan, partition, n, b, scales, out)
    return out


def _verify_global(plan, t, n, b, scales, out) -> None:
    for k in plan.kept:
        if k.scale != scales.s_g:
            out.append(Violation(ViolationKind.WRONG_SCALE, f"frame {k.frame} at scale {k.scale}, global scale is {scales.s_g}"))
    per = _pooled_size(n, scales.s_g)
    expected = t if t * per <= b else b // per
    if len(plan.kept) != expected:
        out.append(Violation(ViolationKind.WRONG_COUNT, f"global policy keeps {len(plan.kept)} frames, expected {expected}"))
    _check_tier(plan.kept_frames, list(range(t)), "global", out)


def _verify_fragment(plan, partition, n, b, scales, out) -> None:
    f1, f0 = list(partition.f1), list(partition.f0)
    in_f1 = set(f1)
    kept1 = [k.frame for k in plan.kept if k.frame in in_f1]
    kept0 = [k.frame for k in plan.kept if k.frame not in in_f1]
    for k in plan.kept:
        want = scales.s_1 if k.frame in in_f1 else scales.s_0
        if k.scale != want:
            out.append(Violation(ViolationKind.WRONG_SCALE, f"frame {k.frame} at scale {k.scale}, expected {want}"))
    if len(kept1) < len(f1) and kept0:
        out.append(Violation(ViolationKind.PRIORITY_INVERSION,
                             f"{len(f1) - len(kept1)} critical frames dropped while {len(kept0)} background frames kept"))

    fine, coarse = _pooled_size(n, scales.s_1), _pooled_size(n, scales.s_0)
    if fine * len(f1) <= b:
        want1 = len(f1)
        left = b - fine * len(f1)
        want0 = len(f0) if coarse * len(f0) <= left else left // coarse
    else:
        want1, want0 = b // fine, 0
    if (len(kept1), len(kept0)) != (want1, want0):
        out.append(Violation(ViolationKind.WRONG_COUNT,
                             f"kept {len(kept1)} critical / {len(kept0)} background, expected {want1} / {want0}"))
    _check_tier(kept1, f1, "critical", out)
    _check_tier(kept0, f0, "background", out)


# --- exhaustive comparison --------------------------------------------------------


Allocator = Callable[[RelevancePartition, int, int, ScaleConfig], AllocationPlan]


@dataclass
class CompareSummary:
    cases: int = 0
    mismatches: int = 0
    examples: list[tuple] = field(default_factory=list)

    def merge(self, other: "CompareSummary", keep: int = 10) -> None:
        self.cases += other.cases
        self.mismatches += other.mismatches
        self.examples.extend(other.examples[: max(0, keep - len(self.examples))])


def _outcome(fn: Allocator, partition, n, b, scales):
    try:
        return fn(partition, n, b, scales)
    except EvBudgetError as exc:
        return type(exc).__name__


def _compare_patterns(t: int, patterns: Iterable[tuple[int, ...]], n: int, scale_sets: Sequence[ScaleConfig],
                      budgets: Sequence[int], allocator: Allocator) -> CompareSummary:
    summary = CompareSummary()
    for pattern in patterns:
        partition = RelevancePartition.from_labels(pattern)
        for scales in scale_sets:
            for b in budgets:
                summary.cases += 1
                got = _outcome(allocator, partition, n, b, scales)
                ref = _outcome(reference_allocate, partition, n, b, scales)
                if got != ref:
                    summary.mismatches += 1
                    if len(summary.examples) < 10:
                        summary.examples.append((pattern, scales, b, got, ref))
    return summary


def _compare_chunk(args) -> CompareSummary:
    return _compare_patterns(*args)


def exhaustive_compare(t_max: int, n: int, scale_sets: Sequence[ScaleConfig], budget_grid: Sequence[int], *,
                       t_min: int = 1, allocator: Allocator = allocate_fragment,
                       workers: int = 1) -> CompareSummary:
    """Run ``allocator`` against the reference on every relevance pattern.

    Covers every frame count ``t_min..t_max``, every 0/1 pattern of that length,
    every scale set and every budget. Both sides raising the same error counts
    as agreement. ``workers > 1`` fans patterns out to processes; the summary
    is aggregated in a fixed order.
    """
    if t_max > 12:
        raise ValueError("exhaustive comparison is limited to t_max <= 12")
    budgets = list(budget_grid)
    scale_sets = list(scale_sets)
    jobs = []
    for t in range(t_min, t_max + 1):
        patterns = list(itertools.product((0, 1), repeat=t))
        step = max(1, len(patterns) // max(1, workers * 4))
        for i in range(0, len(patterns), step):
            jobs.append((t, patterns[i:i + step], n, scale_sets, budgets, allocator))

    total = CompareSummary()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_compare_chunk, jobs):
                total.merge(part)
    else:
        for job in jobs:
            total.merge(_compare_chunk(job))
    return total
