"""Budget-sensitivity sweeps and report emission."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..allocator import ScaleConfig, allocate
from ..errors import EvBudgetError, IoFailure
from ..routers import FrameScore, Policy, PolicyDecision, RouterModel, score_frames, semantic_forward
from .metrics import DEFAULT_ROUTER_CONSTANT, cost_proxy, token_reduction, utility
from .workload import Workload, WorkloadSpec, gen_workload

REPORT_COLUMNS = ("config", "budget", "frames", "total_tokens", "utility", "reduction_pct", "cost_units", "status")


@dataclass(frozen=True)
class Routers:
    """Trained heads; a missing head is replaced by the workload's ground truth."""

    semantic: RouterModel | None = None
    image: RouterModel | None = None

    def decide(self, workload: Workload) -> tuple[PolicyDecision, list[FrameScore]]:
        if self.semantic is None:
            frag = float(workload.policy_label == Policy.FRAGMENT)
            decision = PolicyDecision.from_probabilities(1.0 - frag, frag)
        else:
            decision = semantic_forward(self.semantic, workload.query_features)
        if self.image is None:
            scores = [FrameScore(f.index, float(f.relevant), f.relevant) for f in workload.frames]
        else:
            scores = score_frames(self.image, workload.frame_features())
        return decision, scores


ORACLE = Routers()


@dataclass(frozen=True)
class SweepConfig:
    label: str
    frames: int
    scales: ScaleConfig = field(default_factory=ScaleConfig)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        scales = data.get("scales", [2, 1, 4])
        if isinstance(scales, str):
            sc = ScaleConfig.parse(scales)
        else:
            sc = ScaleConfig(*scales)
        return cls(str(data.get("label", f"{data['frames']}f")), int(data["frames"]), sc)


@dataclass(frozen=True)
class SweepRow:
    config: str
    budget: int
    frames: float
    total_tokens: float
    utility: float
    reduction_pct: float
    cost_units: float
    status: str = "ok"


def _mean(values: list[float]) -> float:
    return float(np.mean(values)) if values else 0.0


def _sweep_config(config: SweepConfig, templates: Sequence[WorkloadSpec], budgets: Sequence[int],
                  routers: Routers, router_used: bool, router_constant: int) -> list[SweepRow]:
    workloads = [gen_workload(spec.scaled_to(config.frames)) for spec in templates]
    routed = [routers.decide(w) for w in workloads]
    rows = []
    for b in budgets:
        kept, tokens, utils, costs = [], [], [], []
        status = "ok"
        for w, (decision, scores) in zip(workloads, routed):
            try:
                plan = allocate(decision, scores, w.n, b, config.scales)
            except EvBudgetError as exc:
                if status == "ok":
                    status = type(exc).__name__
                continue
            kept.append(len(plan.kept))
            tokens.append(plan.total_tokens)
            utils.append(utility(plan, w))
            costs.append(cost_proxy(plan, router_used, router_constant))
        n = workloads[0].n if workloads else 0
        mean_tokens = _mean(tokens)
        reduction = token_reduction(config.frames * n, mean_tokens) if tokens else 0.0
        rows.append(SweepRow(config.label, int(b), _mean(kept), mean_tokens, _mean(utils), reduction,
                             _mean(costs), status))
    return rows


def budget_sweep(workloads: Sequence[WorkloadSpec], configs: Sequence[SweepConfig], budgets: Sequence[int], *,
                 routers: Routers = ORACLE, router_used: bool = True,
                 router_constant: int = DEFAULT_ROUTER_CONSTANT, workers: int = 1) -> list[SweepRow]:
    """Allocate every workload under every (config, budget) and summarise per cell.

    Each workload spec is a template: for a config with ``frames`` frames it is
    regenerated at that frame count with the evidence count scaled to match.
    Rows average over workloads. Allocation failures become the row status.
    """
    if not workloads or not configs or not budgets:
        raise ValueError("sweep needs at least one workload, config and budget")
    budgets = sorted(budgets)
    args = [(c, workloads, budgets, routers, router_used, router_constant) for c in configs]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_config = list(pool.map(lambda a: _sweep_config(*a), args))
    else:
        per_config = [_sweep_config(*a) for a in args]
    # gather in config order so scheduling never changes the output
    return [row for rows in per_config for row in rows]


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def render_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in rows:
        d = asdict(row)
        writer.writerow([_fmt(d[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def render_json(rows: Sequence[SweepRow]) -> str:
    return json.dumps([asdict(r) for r in rows], indent=2) + "\n"


def emit_report(rows: Sequence[SweepRow], fmt: str, path: str | Path) -> Path:
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    text = render_csv(rows) if fmt == "csv" else render_json(rows)
    path = Path(path)
    try:
        path.write_bytes(text.encode("utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot write report to {path}: {exc}") from exc
    return path


def rows_from_json(text: str) -> list[SweepRow]:
    return [SweepRow(**r) for r in json.loads(text)]
