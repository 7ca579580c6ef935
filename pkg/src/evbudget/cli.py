"""Command-line entry point (``evbudget <subcommand>``)."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .allocator import AllocationPlan, RelevancePartition, ScaleConfig, allocate
from .budget import BudgetConfig, compute_budget, load_budget_block
from .errors import EvBudgetError
from .harness.metrics import DEFAULT_ROUTER_CONSTANT, derive_policy_label, read_ab_csv
from .harness.sweep import ORACLE, Routers, SweepConfig, budget_sweep, emit_report
from .harness.workload import Workload, WorkloadSpec, frame_dataset, gen_workload, query_dataset
from .oracle import verify_plan
from .routers import (
    IMAGE,
    SEMANTIC,
    Policy,
    RouterModel,
    TrainingConfig,
    accuracy,
    batch_loss,
    read_scores,
    score_frames,
    train_router,
    write_scores,
)

log = logging.getLogger("evbudget")

SEED_ENV = "EB_SEED"


def _read_json(path: str):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw not in (None, "") else None


def _seeded(specs: list[WorkloadSpec]) -> list[WorkloadSpec]:
    seed = _env_seed()
    if seed is None:
        return specs
    return [replace(s, seed=seed + i) for i, s in enumerate(specs)]


def _parse_budget(value: str) -> int:
    """An integer budget, or a run-config JSON file with a ``budget`` block."""
    try:
        return int(value)
    except ValueError:
        return compute_budget(load_budget_block(_read_json(value)))


# --- subcommands ---------------------------------------------------------------


def cmd_gen_workload(args) -> int:
    raw = _read_json(args.spec)
    many = isinstance(raw, list)
    specs = _seeded([WorkloadSpec.from_dict(d) for d in (raw if many else [raw])])
    workloads = [gen_workload(s).to_dict() for s in specs]
    Path(args.out).write_text(json.dumps(workloads if many else workloads[0]), encoding="utf-8")
    log.info("wrote %d workload(s) to %s", len(workloads), args.out)
    return 0


def _load_training_data(path: str, head: str) -> list[tuple[np.ndarray, int]]:
    raw = _read_json(path)
    if isinstance(raw, dict) and "features" in raw:
        return [(np.asarray(f, dtype=np.float64), int(y)) for f, y in zip(raw["features"], raw["labels"])]
    workloads = [Workload.from_dict(d) for d in (raw if isinstance(raw, list) else [raw])]
    return frame_dataset(workloads) if head == IMAGE else query_dataset(workloads)


def cmd_train_router(args) -> int:
    data = _load_training_data(args.data, args.head)
    seed = _env_seed()
    cfg = TrainingConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size,
                         seed=args.seed if seed is None else seed)
    dim = len(data[0][0])
    model = RouterModel.random(args.head, dim, seed=cfg.seed)
    x = np.stack([f for f, _ in data])
    y = np.array([lab for _, lab in data])
    before = batch_loss(model, x, y)
    model = train_router(model, data, cfg)
    print(f"{args.head} head: loss {before:.6f} -> {batch_loss(model, x, y):.6f}, "
          f"train accuracy {accuracy(model, x, y):.4f}")
    model.save(args.out)
    return 0


def cmd_score(args) -> int:
    model = RouterModel.load(args.model)
    workload = Workload.load(args.workload)
    write_scores(score_frames(model, workload.frame_features()), args.out)
    return 0


def cmd_allocate(args) -> int:
    scores = read_scores(args.scores)
    budget = _parse_budget(args.budget)
    plan = allocate(Policy[args.policy.upper()], scores, args.n, budget, ScaleConfig.parse(args.scales))
    plan.save(args.out)
    print(f"{plan.policy.name.lower()}: kept {len(plan.kept)}/{plan.t} frames, "
          f"{plan.total_tokens}/{budget} tokens")
    return 0


def cmd_derive_labels(args) -> int:
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        out.write("category,policy,y_s\n")
        for rec in read_ab_csv(args.ab):
            label = derive_policy_label(rec, args.tau)
            out.write(f"{rec.category},{label.name.lower()},{int(label)}\n")
    finally:
        if args.out:
            out.close()
    return 0


def _grid_routers(grid: dict) -> Routers:
    spec = grid.get("routers") or {}
    if spec == "oracle":
        return ORACLE
    semantic = RouterModel.load(spec["semantic"]) if spec.get("semantic") else None
    image = RouterModel.load(spec["image"]) if spec.get("image") else None
    return Routers(semantic, image)


def cmd_sweep(args) -> int:
    grid = _read_json(args.grid)
    specs = _seeded([WorkloadSpec.from_dict(d) for d in grid["workloads"]])
    configs = [SweepConfig.from_dict(c) for c in grid["configs"]]
    rows = budget_sweep(specs, configs, [int(b) for b in grid["budgets"]], routers=_grid_routers(grid),
                        router_used=bool(grid.get("router_used", True)),
                        router_constant=int(grid.get("router_constant", DEFAULT_ROUTER_CONSTANT)),
                        workers=args.workers)
    fmt = "json" if args.out.endswith(".json") else "csv"
    emit_report(rows, fmt, args.out)
    bad = sum(r.status != "ok" for r in rows)
    print(f"{len(rows)} rows written to {args.out} ({bad} with errors)")
    return 0


def _instance_budget(value) -> int:
    if isinstance(value, dict):
        return compute_budget(BudgetConfig.from_dict(value))
    return int(value)


def cmd_verify(args) -> int:
    plan = AllocationPlan.load(args.plan)
    inst = _read_json(args.instance)
    scales = inst.get("scales", [2, 1, 4])
    scales = ScaleConfig.parse(scales) if isinstance(scales, str) else ScaleConfig(*scales)
    partition = RelevancePartition.from_labels(inst["relevance"])
    violations = verify_plan(plan, partition, int(inst["n"]), _instance_budget(inst["budget"]), scales)
    for v in violations:
        print(v)
    if not violations:
        print("ok")
    return 1 if violations else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evbudget", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-workload", help="generate synthetic workload(s) from a spec file")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_workload)

    p = sub.add_parser("train-router", help="train a reference router head")
    p.add_argument("--head", choices=[SEMANTIC, IMAGE], required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_router)

    p = sub.add_parser("score", help="score a workload's frames with an image head (JSON lines)")
    p.add_argument("--workload", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("allocate", help="allocate a budget over scored frames")
    p.add_argument("--scores", required=True)
    p.add_argument("--budget", required=True, help="integer budget or run-config JSON path")
    p.add_argument("--scales", default="2,1,4", help="sg,s1,s0")
    p.add_argument("--n", type=int, default=256, help="tokens per frame")
    p.add_argument("--policy", choices=["global", "fragment"], default="fragment")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("derive-labels", help="policy labels from A/B accuracies")
    p.add_argument("--ab", required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_derive_labels)

    p = sub.add_parser("sweep", help="budget-sensitivity sweep")
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="check a plan against its instance")
    p.add_argument("--plan", required=True)
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except EvBudgetError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
