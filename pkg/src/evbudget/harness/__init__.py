"""Synthetic workloads, label derivation, sweeps and reporting."""

from .metrics import (
    DEFAULT_ROUTER_CONSTANT,
    ABRecord,
    cost_proxy,
    derive_policy_label,
    fidelity,
    read_ab_csv,
    token_reduction,
    utility,
)
from .pipeline import PipelineResult, run_pipeline
from .sweep import ORACLE, REPORT_COLUMNS, Routers, SweepConfig, SweepRow, budget_sweep, emit_report
from .workload import FrameDescriptor, Workload, WorkloadSpec, gen_workload

__all__ = [
    "ABRecord", "DEFAULT_ROUTER_CONSTANT", "FrameDescriptor", "ORACLE", "PipelineResult", "REPORT_COLUMNS",
    "Routers", "SweepConfig", "SweepRow", "Workload", "WorkloadSpec", "budget_sweep", "cost_proxy",
    "derive_policy_label", "emit_report", "fidelity", "gen_workload", "read_ab_csv", "run_pipeline",
    "token_reduction", "utility",
]
