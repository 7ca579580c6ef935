"""Exit criteria. Each test records one PASS/FAIL line (see the terminal summary)."""

import math
import time

import numpy as np
import pytest

from evbudget.allocator import RelevancePartition, ScaleConfig, allocate, allocate_fragment, uniform_sample
from evbudget.budget import BudgetConfig
from evbudget.errors import BudgetTooSmall
from evbudget.harness import (
    ABRecord,
    Routers,
    SweepConfig,
    WorkloadSpec,
    budget_sweep,
    derive_policy_label,
    gen_workload,
    run_pipeline,
    token_reduction,
)
from evbudget.harness.workload import frame_dataset, query_dataset, separable_dataset
from evbudget.oracle import exhaustive_compare, verify_plan
from evbudget.routers import (
    IMAGE,
    SEMANTIC,
    FrameScore,
    Policy,
    PolicyDecision,
    RouterModel,
    TrainingConfig,
    accuracy,
    bce_loss,
    grad_check,
    image_forward,
    joint_loss,
    semantic_forward,
    train_router,
)

pytestmark = pytest.mark.acceptance

FEATURE_DIM = 16


@pytest.fixture(scope="module")
def trained_routers():
    train = [gen_workload(WorkloadSpec(t=64, evidence_frames=int(e), evidence_mode=m, noise=0.1, seed=s,
                                       feature_dim=FEATURE_DIM))
             for s, (e, m) in enumerate(zip([0, 4, 10, 20, 40, 64] * 5, ["spread", "concentrated", "mixed"] * 10))]
    cfg = TrainingConfig(learning_rate=0.5, epochs=200, seed=0)
    image = train_router(RouterModel.zeros(IMAGE, FEATURE_DIM), frame_dataset(train), cfg)
    semantic = train_router(RouterModel.zeros(SEMANTIC, FEATURE_DIM), query_dataset(train), cfg)
    return Routers(semantic, image)


def test_ac1_algorithm_branch_traces(criterion):
    start = time.perf_counter()
    f1 = uniform_sample(list(range(64)), 10)
    part = RelevancePartition.from_labels([int(t in f1) for t in range(64)])
    got = []
    for b in (12288, 3000, 2000):
        plan = allocate_fragment(part, 256, b, ScaleConfig(2, 1, 4))
        got.append((plan.total_tokens, len(plan.kept)))
    elapsed = time.perf_counter() - start
    criterion("AC1 branch traces", got == [(3424, 64), (2992, 37), (1792, 7)] and elapsed < 1.0,
              f"(total, kept)={got} in {elapsed:.3f}s")


def test_ac2_oracle_equivalence(criterion):
    start = time.perf_counter()
    scale_sets = [ScaleConfig(2, 1, 2), ScaleConfig(2, 1, 4)]
    summary = exhaustive_compare(10, 16, scale_sets, range(0, 161))
    elapsed = time.perf_counter() - start
    expected_cases = sum(2**t for t in range(1, 11)) * 2 * 161
    criterion("AC2 oracle equivalence",
              summary.mismatches == 0 and summary.cases == expected_cases and elapsed < 60.0,
              f"{summary.cases} cases (T=1..10; {2**10 * 2 * 161} at T=10), {summary.mismatches} mismatches, "
              f"{elapsed:.1f}s")


def test_ac3_budget_safety(criterion):
    rng = np.random.default_rng(2024)
    geometries = [(16, [1, 2, 4]), (64, [1, 2, 4, 8]), (256, [1, 2, 4, 8, 16])]
    start = time.perf_counter()
    violations, plans, too_small, bad_refusals = 0, 0, 0, 0
    for _ in range(10_000):
        n, valid = geometries[rng.integers(len(geometries))]
        s1, s0 = sorted(rng.choice(valid, 2))
        scales = ScaleConfig(int(rng.choice(valid)), int(s1), int(s0))
        t = int(rng.integers(1, 257))
        labels = (rng.random(t) < rng.random()).astype(int).tolist()
        b = int(rng.integers(1, t * n + 1))
        policy = Policy(int(rng.integers(0, 2)))
        scores = [FrameScore(i, float(y), y) for i, y in enumerate(labels)]
        try:
            plan = allocate(policy, scores, n, b, scales)
        except BudgetTooSmall:
            too_small += 1
            # only legitimate when not even one frame at the chosen scale fits
            fragment = policy == Policy.FRAGMENT and any(labels)
            smallest = n // (scales.s_1 if fragment else scales.s_g) ** 2
            bad_refusals += b >= smallest
            continue
        plans += 1
        violations += len(verify_plan(plan, RelevancePartition.from_labels(labels), n, b, scales))
    elapsed = time.perf_counter() - start
    criterion("AC3 budget safety", violations == 0 and bad_refusals == 0 and elapsed < 30.0,
              f"{plans} plans + {too_small} BudgetTooSmall, {violations} violations, {elapsed:.1f}s")


def test_ac4_token_reduction(criterion):
    r1 = token_reduction(16384, 5262)
    r2 = token_reduction(16384, 7748)
    criterion("AC4 token reduction", abs(r1 - 67.9) <= 0.05 and abs(r2 - 52.7) <= 0.1, f"{r1}%, {r2}%")


def test_ac5_loss_correctness(criterion):
    ln2_err = abs(bce_loss([0.5] * 7, [1, 0, 1, 1, 0, 0, 1]) - math.log(2))
    worst = 0.0
    rng = np.random.default_rng(5)
    for i in range(100):
        head = SEMANTIC if i % 2 else IMAGE
        dim = int(rng.integers(2, 9))
        model = RouterModel.random(head, dim, seed=i, scale=1.0)
        x = rng.standard_normal((32, dim))
        y = rng.integers(0, 2, 32)
        worst = max(worst, grad_check(model, x, y))
    joint = joint_loss(1.0, 0.5, 0.5, TrainingConfig(lambda_s=0.01, lambda_v=0.01))
    criterion("AC5 loss correctness", ln2_err <= 1e-9 and worst < 1e-5 and joint == 1.01,
              f"|bce-ln2|={ln2_err:.1e}, max grad rel err={worst:.1e}, joint={joint!r}")


def test_ac6_router_trainability(criterion):
    start = time.perf_counter()
    x, y = separable_dataset(2500, 8, margin=0.5, seed=1)
    sem = train_router(RouterModel.zeros(SEMANTIC, 8), list(zip(x[:2000], y[:2000])),
                       TrainingConfig(learning_rate=0.5, epochs=500))
    sem_acc = accuracy(sem, x[2000:], y[2000:])

    def workloads(seeds, noise):
        return [gen_workload(WorkloadSpec(t=64, evidence_frames=int(8 + s % 20), evidence_mode=("spread", "mixed", "concentrated")[s % 3],
                                          noise=noise, seed=s, feature_dim=FEATURE_DIM)) for s in seeds]

    img = train_router(RouterModel.zeros(IMAGE, FEATURE_DIM), frame_dataset(workloads(range(20), 0.1)),
                       TrainingConfig(learning_rate=0.5, epochs=200))
    test = frame_dataset(workloads(range(100, 120), 0.1))
    img_acc = accuracy(img, np.stack([f for f, _ in test]), [lab for _, lab in test])
    elapsed = time.perf_counter() - start
    criterion("AC6 router trainability", sem_acc >= 0.98 and img_acc >= 0.95 and elapsed < 60.0,
              f"semantic held-out {sem_acc:.4f}, image frame-level {img_acc:.4f}, {elapsed:.1f}s")


def test_ac7_budget_sweep_shape(criterion, trained_routers):
    start = time.perf_counter()
    budgets = [4096, 8192, 12288, 16384, 24576]
    configs = [SweepConfig("64f", 64, ScaleConfig(2, 1, 4)), SweepConfig("128f", 128, ScaleConfig(2, 1, 4))]
    spread = WorkloadSpec(t=64, evidence_frames=10, evidence_mode="spread", noise=0.05, seed=11,
                          feature_dim=FEATURE_DIM)
    mixed = [WorkloadSpec(t=64, evidence_frames=e, evidence_mode=m, noise=0.1, seed=s, feature_dim=FEATURE_DIM)
             for s, (e, m) in enumerate([(6, "mixed"), (12, "concentrated"), (48, "spread"), (0, "spread")])]

    monotone = True
    for routers in (trained_routers, Routers()):
        for workloads in ([spread], mixed):
            rows = budget_sweep(workloads, configs, budgets, routers=routers)
            for cfg in configs:
                utils = [r.utility for r in rows if r.config == cfg.label]
                monotone &= all(a <= b for a, b in zip(utils, utils[1:]))
                monotone &= all(r.status == "ok" and r.total_tokens <= r.budget for r in rows)

    rows = {(r.config, r.budget): r.utility for r in budget_sweep([spread], configs, budgets, routers=trained_routers)}
    low = (rows["64f", 4096], rows["128f", 4096])
    high = (rows["64f", 24576], rows["128f", 24576])
    elapsed = time.perf_counter() - start
    criterion("AC7 budget-sweep shape", monotone and low[0] > low[1] and high[1] >= high[0] and elapsed < 120.0,
              f"monotone={monotone}; 4096: 64f={low[0]:.3f} 128f={low[1]:.3f}; "
              f"24576: 64f={high[0]:.3f} 128f={high[1]:.3f}; {elapsed:.1f}s")


def test_ac8_decision_rule_fidelity(criterion):
    at_half = image_forward(RouterModel("image", np.zeros((1, 2)), np.zeros(1)), np.ones(2))
    boundary = derive_policy_label(ABRecord("c", 0.65, 0.60), 0.05)
    tie = semantic_forward(RouterModel.zeros("semantic", 3), np.ones(3))
    ok = (at_half.p == 0.5 and at_half.y_hat == 0 and boundary == Policy.GLOBAL
          and tie.decision == Policy.GLOBAL and PolicyDecision.from_probabilities(0.5, 0.5).decision == Policy.GLOBAL)
    criterion("AC8 decision-rule fidelity", ok,
              f"y_hat(p=0.5)={at_half.y_hat}, label(margin=tau)={boundary.name}, tie={tie.decision.name}")


def test_ac9_end_to_end_context(criterion, trained_routers):
    rng = np.random.default_rng(99)
    modes = ["concentrated", "spread", "mixed"]
    start = time.perf_counter()
    fits, runs = 0, 1000
    for i in range(runs):
        t = int(rng.integers(4, 129))
        spec = WorkloadSpec(t=t, n=256, evidence_mode=modes[i % 3], evidence_frames=int(rng.integers(0, t + 1)),
                            feature_dim=FEATURE_DIM, noise=float(rng.uniform(0, 0.5)), seed=i)
        l_text, l_gen, eps = int(rng.integers(0, 2000)), int(rng.integers(0, 1000)), int(rng.integers(0, 200))
        budget = int(rng.integers(256, 20000))
        cfg = BudgetConfig(l_max=l_text + l_gen + eps + budget, l_text=l_text, l_gen=l_gen, epsilon=eps)
        scales = ScaleConfig(*[(2, 1, 4), (4, 1, 8), (2, 2, 4), (1, 1, 2)][i % 4])
        res = run_pipeline(gen_workload(spec), cfg, scales, trained_routers, token_dim=2, grid_seed=i)
        fits += res.fits and res.sequence.visual_tokens <= res.budget
    elapsed = time.perf_counter() - start
    criterion("AC9 end-to-end context guarantee", fits == runs, f"{fits}/{runs} runs fit, {elapsed:.1f}s")
