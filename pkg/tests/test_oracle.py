import dataclasses

import numpy as np
import pytest

from evbudget.allocator import (
    KeptFrame,
    RelevancePartition,
    ScaleConfig,
    allocate,
    allocate_fragment,
    uniform_sample,
)
from evbudget.errors import BudgetTooSmall
from evbudget.oracle import ViolationKind, exhaustive_compare, reference_allocate, verify_plan
from evbudget.routers import FrameScore, Policy

SCALES = ScaleConfig(2, 1, 4)


def ten_of_sixty_four():
    f1 = uniform_sample(list(range(64)), 10)
    return RelevancePartition.from_labels([int(t in f1) for t in range(64)])


def small_partition():
    return RelevancePartition.from_labels([0, 1, 0, 0, 1, 1, 0, 0, 0, 1, 0, 0])


@pytest.mark.parametrize("b, total, kept", [(12288, 3424, 64), (3000, 2992, 37), (2000, 1792, 7)])
def test_reference_matches_hand_traces(b, total, kept):
    part = ten_of_sixty_four()
    with pytest.raises(ValueError):
        reference_allocate(part, 256, b, SCALES)
    ref = reference_allocate(part, 256, b, SCALES, max_t=64)
    assert ref == allocate_fragment(part, 256, b, SCALES)
    assert (ref.total_tokens, len(ref.kept)) == (total, kept)


@pytest.mark.parametrize("b, total, kept", [(12288, 3424, 64), (3000, 2992, 37), (2000, 1792, 7)])
def test_verify_accepts_hand_traced_plans(b, total, kept):
    part = ten_of_sixty_four()
    plan = allocate_fragment(part, 256, b, SCALES)
    assert (plan.total_tokens, len(plan.kept)) == (total, kept)
    assert verify_plan(plan, part, 256, b, SCALES) == []


def test_reference_scaled_down_traces():
    # 16 frames, 4 critical (uniformly placed), n=16, scales (1, 4): 16 and 1 tokens
    f1 = uniform_sample(list(range(16)), 4)
    part = RelevancePartition.from_labels([int(t in f1) for t in range(16)])
    for b, total in [(100, 4 * 16 + 12), (70, 70), (40, 32)]:
        ref = reference_allocate(part, 16, b, ScaleConfig(2, 1, 4))
        assert ref == allocate_fragment(part, 16, b, ScaleConfig(2, 1, 4))
        assert ref.total_tokens == total


def test_reference_zero_budget():
    with pytest.raises(BudgetTooSmall):
        reference_allocate(small_partition(), 16, 0, SCALES)


def test_reference_only_critical():
    part = RelevancePartition.from_labels([1] * 6)
    plan = reference_allocate(part, 16, 10**6, SCALES)
    assert [k.scale for k in plan.kept] == [1] * 6 and plan.dropped == ()


def test_exhaustive_small():
    summary = exhaustive_compare(8, 16, [ScaleConfig(2, 1, 4)], range(129), t_min=8)
    assert summary.cases == 2**8 * 129
    assert summary.mismatches == 0
    tiny = exhaustive_compare(1, 16, [ScaleConfig(2, 1, 4)], range(20))
    assert tiny.cases == 2 * 20 and tiny.mismatches == 0


def test_exhaustive_detects_off_by_one():
    def off_by_one(partition, n, b, scales):
        # behaves as if one more background frame fit
        return allocate_fragment(partition, n, b + n // scales.s_0**2, scales)

    assert exhaustive_compare(5, 16, [ScaleConfig(2, 1, 4)], range(0, 81), allocator=off_by_one).mismatches > 0


def test_exhaustive_parallel_matches_serial():
    args = (6, 16, [ScaleConfig(2, 1, 2), ScaleConfig(2, 1, 4)], range(0, 97))
    serial = exhaustive_compare(*args)
    parallel = exhaustive_compare(*args, workers=2)
    assert (serial.cases, serial.mismatches) == (parallel.cases, parallel.mismatches)


# --- fault injection: every violation kind must be reachable ------------------------


def _good():
    part = small_partition()
    b = 4 * 16 + 3  # all 4 critical frames plus 3 of 8 background frames
    plan = allocate_fragment(part, 16, b, SCALES)
    assert verify_plan(plan, part, 16, b, SCALES) == []
    return part, b, plan


def _kinds(plan, part, b):
    return {v.kind for v in verify_plan(plan, part, 16, b, SCALES)}


def test_injected_budget_excess():
    part, b, plan = _good()
    bad = dataclasses.replace(plan, total_tokens=b + 1)
    assert ViolationKind.BUDGET_EXCEEDED in _kinds(bad, part, b)


def test_injected_priority_inversion():
    part, b, plan = _good()
    kept = [k for k in plan.kept if k.frame != part.f1[0]]
    extra = [f for f in part.f0 if f not in plan.kept_frames][0]
    kept = sorted(kept + [KeptFrame(extra, 4, 1)], key=lambda k: k.frame)
    dropped = sorted(set(range(part.t)) - {k.frame for k in kept})
    bad = dataclasses.replace(plan, kept=tuple(kept), dropped=tuple(dropped),
                              total_tokens=sum(k.tokens for k in kept))
    assert ViolationKind.PRIORITY_INVERSION in _kinds(bad, part, b)


def test_injected_wrong_scale():
    part, b, plan = _good()
    first = plan.kept[0]
    bad = dataclasses.replace(plan, kept=(KeptFrame(first.frame, 2, 4),) + plan.kept[1:])
    assert ViolationKind.WRONG_SCALE in _kinds(bad, part, b)


def test_injected_bad_partition():
    part, b, plan = _good()
    bad = dataclasses.replace(plan, dropped=plan.dropped + (plan.kept[0].frame,))
    assert ViolationKind.BAD_PARTITION in _kinds(bad, part, b)


def test_injected_wrong_count():
    part, b, plan = _good()
    last = plan.kept[-1]
    kept = plan.kept[:-1]
    bad = dataclasses.replace(plan, kept=kept, dropped=tuple(sorted(plan.dropped + (last.frame,))),
                              total_tokens=plan.total_tokens - last.tokens)
    assert ViolationKind.WRONG_COUNT in _kinds(bad, part, b)


def test_injected_non_uniform_sample():
    part, b, plan = _good()
    bg_kept = [k.frame for k in plan.kept if k.scale == 4]
    bg_drop = [f for f in part.f0 if f not in bg_kept]
    swap_out, swap_in = bg_kept[0], bg_drop[-1]
    kept = sorted([k for k in plan.kept if k.frame != swap_out] + [KeptFrame(swap_in, 4, 1)], key=lambda k: k.frame)
    dropped = sorted(set(range(part.t)) - {k.frame for k in kept})
    bad = dataclasses.replace(plan, kept=tuple(kept), dropped=tuple(dropped))
    kinds = _kinds(bad, part, b)
    assert kinds == {ViolationKind.NON_UNIFORM_SAMPLE}


def test_verify_global_plan():
    labels = [0] * 64
    scores = [FrameScore(t, 0.0, 0) for t in range(64)]
    plan = allocate(Policy.GLOBAL, scores, 256, 1000, SCALES)
    part = RelevancePartition.from_labels(labels)
    assert verify_plan(plan, part, 256, 1000, SCALES) == []
    bad = dataclasses.replace(plan, kept=plan.kept[:-1], dropped=tuple(sorted(plan.dropped + (plan.kept[-1].frame,))),
                              total_tokens=plan.total_tokens - 64)
    assert ViolationKind.WRONG_COUNT in {v.kind for v in verify_plan(bad, part, 256, 1000, SCALES)}


def test_random_plans_verify_clean():
    rng = np.random.default_rng(5)
    for _ in range(300):
        t = int(rng.integers(1, 200))
        labels = (rng.random(t) < rng.random()).astype(int).tolist()
        b = int(rng.integers(1, t * 256 + 1))
        part = RelevancePartition.from_labels(labels)
        try:
            plan = allocate(Policy(int(rng.integers(0, 2))), [FrameScore(i, float(y), y) for i, y in enumerate(labels)],
                            256, b, SCALES)
        except BudgetTooSmall:
            continue
        assert verify_plan(plan, part, 256, b, SCALES) == []
