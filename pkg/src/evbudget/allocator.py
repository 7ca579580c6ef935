"""Priority-aware token allocation under a visual-token budget.

Two policies:

* Global: every frame pooled at ``s_g``; when that overflows the budget, frames
  are subsampled uniformly in time at the same scale.
* Fragment: relevant frames (``y_hat = 1``) at the fine scale ``s_1``, the rest
  at the coarse scale ``s_0``. The budget first covers all relevant frames,
  then as many uniformly spaced irrelevant frames as fit; if the relevant
  frames alone overflow, irrelevant frames are dropped and the relevant set is
  subsampled uniformly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import BudgetTooSmall, DuplicateFrame, InvalidGeometry, MalformedScores, SampleTooLarge
from .routers import FrameScore, Policy, PolicyDecision


@dataclass(frozen=True)
class ScaleConfig:
    s_g: int = 2
    s_1: int = 1
    s_0: int = 4

    def __post_init__(self) -> None:
        for name in ("s_g", "s_1", "s_0"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.s_1 > self.s_0:
            raise ValueError(f"critical scale s_1={self.s_1} coarser than s_0={self.s_0}")

    @classmethod
    def parse(cls, text: str) -> "ScaleConfig":
        """Parse ``"sg,s1,s0"``."""
        parts = [int(p) for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated scales, got {text!r}")
        return cls(*parts)

    def as_list(self) -> list[int]:
        return [self.s_g, self.s_1, self.s_0]


@dataclass(frozen=True)
class RelevancePartition:
    f1: tuple[int, ...]
    f0: tuple[int, ...]

    @property
    def t(self) -> int:
        return len(self.f1) + len(self.f0)

    @classmethod
    def from_labels(cls, y_hat: Sequence[int]) -> "RelevancePartition":
        f1 = tuple(t for t, y in enumerate(y_hat) if y)
        f0 = tuple(t for t, y in enumerate(y_hat) if not y)
        return cls(f1, f0)

    def labels(self) -> list[int]:
        out = [0] * self.t
        for t in self.f1:
            out[t] = 1
        return out


@dataclass(frozen=True)
class KeptFrame:
    frame: int
    scale: int
    tokens: int


@dataclass(frozen=True)
class AllocationPlan:
    """Frames kept (ascending, with scale and token count) and dropped.

    ``c1``, ``c0`` and ``k_sampled`` are audit fields and do not take part in
    equality.
    """

    policy: Policy
    kept: tuple[KeptFrame, ...]
    dropped: tuple[int, ...]
    total_tokens: int
    c1: int | None = field(default=None, compare=False)
    c0: int | None = field(default=None, compare=False)
    k_sampled: int | None = field(default=None, compare=False)

    @property
    def t(self) -> int:
        return len(self.kept) + len(self.dropped)

    @property
    def kept_frames(self) -> list[int]:
        return [k.frame for k in self.kept]

    def to_dict(self) -> dict:
        return {
            "policy": self.policy.name.lower(),
            "kept": [{"frame": k.frame, "scale": k.scale, "tokens": k.tokens} for k in self.kept],
            "dropped": list(self.dropped),
            "total_tokens": self.total_tokens,
            "c1": self.c1,
            "c0": self.c0,
            "k_sampled": self.k_sampled,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AllocationPlan":
        return cls(
            policy=Policy[str(data["policy"]).upper()],
            kept=tuple(KeptFrame(int(k["frame"]), int(k["scale"]), int(k["tokens"])) for k in data["kept"]),
            dropped=tuple(int(t) for t in data["dropped"]),
            total_tokens=int(data["total_tokens"]),
            c1=data.get("c1"),
            c0=data.get("c0"),
            k_sampled=data.get("k_sampled"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "AllocationPlan":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def tokens_at_scale(n: int, s: int) -> int:
    """Tokens left in an ``n``-token square frame after ``s x s`` mean pooling."""
    side = math.isqrt(n) if n >= 0 else -1
    if n < 1 or side * side != n:
        raise InvalidGeometry(f"tokens per frame {n} is not a perfect square")
    if s < 1 or side % s:
        raise InvalidGeometry(f"scale {s} does not divide grid side {side}")
    return n // (s * s)


def uniform_sample(candidates: Sequence[int], k: int) -> list[int]:
    """Pick ``k`` of ``candidates`` at positions ``floor((j + 0.5) * M / k)``."""
    m = len(candidates)
    if k > m:
        raise SampleTooLarge(f"cannot sample {k} of {m}")
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == m:
        return list(candidates)
    return [candidates[(2 * j + 1) * m // (2 * k)] for j in range(k)]


def _assemble(policy: Policy, t: int, chosen: dict[int, tuple[int, int]], **audit) -> AllocationPlan:
    kept = tuple(KeptFrame(f, s, tok) for f, (s, tok) in sorted(chosen.items()))
    dropped = tuple(f for f in range(t) if f not in chosen)
    return AllocationPlan(policy, kept, dropped, sum(k.tokens for k in kept), **audit)


def allocate_fragment(partition: RelevancePartition, n: int, b: int, scales: ScaleConfig) -> AllocationPlan:
    if b <= 0:
        raise BudgetTooSmall(f"budget {b} must be positive")
    n1 = tokens_at_scale(n, scales.s_1)
    n0 = tokens_at_scale(n, scales.s_0)
    f1, f0 = partition.f1, partition.f0
    c1 = len(f1) * n1
    c0 = len(f0) * n0

    chosen: dict[int, tuple[int, int]] = {}
    k_sampled = None
    if c1 + c0 <= b:
        keep1, keep0 = f1, f0
    elif c1 <= b:
        k_sampled = (b - c1) // n0
        keep1, keep0 = f1, uniform_sample(f0, k_sampled)
    else:
        k_sampled = b // n1
        if k_sampled == 0:
            raise BudgetTooSmall(f"budget {b} is below one critical frame ({n1} tokens)")
        keep1, keep0 = uniform_sample(f1, k_sampled), ()
    for f in keep1:
        chosen[f] = (scales.s_1, n1)
    for f in keep0:
        chosen[f] = (scales.s_0, n0)
    if not chosen and partition.t:
        # only reachable with no relevant frames and b < one coarse frame
        raise BudgetTooSmall(f"budget {b} is below one background frame ({n0} tokens)")
    return _assemble(Policy.FRAGMENT, partition.t, chosen, c1=c1, c0=c0, k_sampled=k_sampled)


def allocate_global(t: int, n: int, b: int, s_g: int) -> AllocationPlan:
    if b <= 0:
        raise BudgetTooSmall(f"budget {b} must be positive")
    per_frame = tokens_at_scale(n, s_g)
    frames = range(t)
    k_sampled = None
    if t * per_frame <= b:
        keep: Iterable[int] = frames
    else:
        k_sampled = b // per_frame
        if k_sampled == 0:
            raise BudgetTooSmall(f"budget {b} is below one pooled frame ({per_frame} tokens)")
        keep = uniform_sample(frames, k_sampled)
    chosen = {f: (s_g, per_frame) for f in keep}
    return _assemble(Policy.GLOBAL, t, chosen, k_sampled=k_sampled)


def partition_from_scores(scores: Sequence[FrameScore]) -> RelevancePartition:
    by_index: dict[int, int] = {}
    for s in scores:
        if s.frame_index in by_index:
            raise DuplicateFrame(f"frame {s.frame_index} scored twice")
        by_index[s.frame_index] = s.y_hat
    t = len(by_index)
    if set(by_index) != set(range(t)):
        missing = sorted(set(range(t)) - set(by_index))
        raise MalformedScores(f"scores must cover frames 0..{t - 1}; missing {missing[:5]}")
    return RelevancePartition.from_labels([by_index[i] for i in range(t)])


def allocate(decision: PolicyDecision | Policy, scores: Sequence[FrameScore], n: int, b: int,
             scales: ScaleConfig) -> AllocationPlan:
    """Dispatch on the policy decision.

    A Fragment decision with no relevant frame falls back to the Global policy.
    """
    policy = decision.decision if isinstance(decision, PolicyDecision) else Policy(decision)
    partition = partition_from_scores(scores)
    if policy == Policy.FRAGMENT and partition.f1:
        return allocate_fragment(partition, n, b, scales)
    return allocate_global(partition.t, n, b, scales.s_g)
