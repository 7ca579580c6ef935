"""Synthetic video/query workloads with ground-truth relevance and evidence."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from ..allocator import uniform_sample
from ..errors import InvalidSpec
from ..routers import Policy

EVIDENCE_MODES = ("concentrated", "spread", "mixed")

# Separation of the class means along their shared direction.
SIGNAL = 1.0


@dataclass(frozen=True)
class WorkloadSpec:
    t: int = 64
    n: int = 256
    evidence_mode: str = "spread"
    evidence_frames: int = 10
    feature_dim: int = 16
    noise: float = 0.1
    seed: int = 0
    # evidence covering more than this fraction of the video makes the query holistic
    holistic_fraction: float = 0.5

    def validate(self) -> None:
        if self.t < 1:
            raise InvalidSpec(f"t must be >= 1, got {self.t}")
        side = math.isqrt(self.n) if self.n > 0 else 0
        if side * side != self.n or self.n < 1:
            raise InvalidSpec(f"n={self.n} is not a perfect square")
        if self.evidence_mode not in EVIDENCE_MODES:
            raise InvalidSpec(f"evidence_mode must be one of {EVIDENCE_MODES}")
        if not 0 <= self.evidence_frames <= self.t:
            raise InvalidSpec(f"evidence_frames={self.evidence_frames} outside 0..{self.t}")
        if self.feature_dim < 1:
            raise InvalidSpec("feature_dim must be >= 1")
        if self.noise < 0:
            raise InvalidSpec("noise must be >= 0")

    def scaled_to(self, t: int) -> "WorkloadSpec":
        """Same spec at ``t`` frames with the evidence count scaled proportionally."""
        e = round(self.evidence_frames * t / self.t)
        return replace(self, t=t, evidence_frames=min(t, e))

    @classmethod
    def from_dict(cls, data: dict) -> "WorkloadSpec":
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**known)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FrameDescriptor:
    index: int
    features: np.ndarray
    relevant: int
    evidence: float


@dataclass(frozen=True)
class Workload:
    spec: WorkloadSpec
    frames: tuple[FrameDescriptor, ...]
    query_features: np.ndarray
    policy_label: Policy

    @property
    def t(self) -> int:
        return len(self.frames)

    @property
    def n(self) -> int:
        return self.spec.n

    def frame_features(self) -> np.ndarray:
        return np.stack([f.features for f in self.frames])

    def relevance(self) -> list[int]:
        return [f.relevant for f in self.frames]

    def evidence(self) -> np.ndarray:
        return np.array([f.evidence for f in self.frames])

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "frames": [
                {"index": f.index, "features": f.features.tolist(), "relevant": f.relevant, "evidence": f.evidence}
                for f in self.frames
            ],
            "query_features": self.query_features.tolist(),
            "policy_label": int(self.policy_label),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Workload":
        frames = tuple(
            FrameDescriptor(int(f["index"]), np.asarray(f["features"], dtype=np.float64), int(f["relevant"]),
                            float(f["evidence"]))
            for f in data["frames"]
        )
        return cls(WorkloadSpec.from_dict(data["spec"]), frames, np.asarray(data["query_features"], dtype=np.float64),
                   Policy(int(data["policy_label"])))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Workload":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def class_directions(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit directions separating relevant/irrelevant frames and Fragment/Global queries.

    They depend only on ``dim`` so every workload of one dimension shares them,
    which is what lets a single linear router generalise across workloads.
    """
    rng = np.random.default_rng(10_000 + dim)
    frame_dir = rng.standard_normal(dim)
    query_dir = rng.standard_normal(dim)
    return frame_dir / np.linalg.norm(frame_dir), query_dir / np.linalg.norm(query_dir)


def evidence_positions(spec: WorkloadSpec, rng: np.random.Generator) -> list[int]:
    t, e = spec.t, spec.evidence_frames
    if e == 0:
        return []
    if spec.evidence_mode == "spread":
        return uniform_sample(range(t), e)
    if spec.evidence_mode == "concentrated":
        start = int(rng.integers(0, t - e + 1))
        return list(range(start, start + e))
    # mixed: one cluster per half of the timeline
    half = (t + 1) // 2
    e1, e2 = (e + 1) // 2, e // 2
    s1 = int(rng.integers(0, half - e1 + 1))
    s2 = half + int(rng.integers(0, (t - half) - e2 + 1))
    return list(range(s1, s1 + e1)) + list(range(s2, s2 + e2))


def policy_for(spec: WorkloadSpec) -> Policy:
    """Fragment when evidence is present but sparse; Global when absent or holistic."""
    if spec.evidence_frames == 0 or spec.evidence_frames > spec.holistic_fraction * spec.t:
        return Policy.GLOBAL
    return Policy.FRAGMENT


def gen_workload(spec: WorkloadSpec) -> Workload:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    positions = set(evidence_positions(spec, rng))
    frame_dir, query_dir = class_directions(spec.feature_dim)

    relevant = np.array([1 if t in positions else 0 for t in range(spec.t)])
    signs = 2 * relevant - 1
    feats = SIGNAL * signs[:, None] * frame_dir + spec.noise * rng.standard_normal((spec.t, spec.feature_dim))
    values = np.where(relevant == 1, rng.uniform(0.5, 1.0, spec.t), 0.0)
    frames = tuple(
        FrameDescriptor(t, feats[t], int(relevant[t]), float(values[t])) for t in range(spec.t)
    )

    label = policy_for(spec)
    q_sign = 1.0 if label == Policy.FRAGMENT else -1.0
    query = SIGNAL * q_sign * query_dir + spec.noise * rng.standard_normal(spec.feature_dim)
    return Workload(spec, frames, query, label)


def frame_dataset(workloads) -> list[tuple[np.ndarray, int]]:
    """(features, relevance) pairs for training the frame-relevance head."""
    return [(f.features, f.relevant) for w in workloads for f in w.frames]


def query_dataset(workloads) -> list[tuple[np.ndarray, int]]:
    """(query features, policy label) pairs for training the policy head."""
    return [(w.query_features, int(w.policy_label)) for w in workloads]


def separable_dataset(count: int, dim: int, margin: float = 1.0, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Points labelled by a random hyperplane, keeping only those at least ``margin`` from it."""
    rng = np.random.default_rng(seed)
    normal = rng.standard_normal(dim)
    normal /= np.linalg.norm(normal)
    xs: list[np.ndarray] = []
    while len(xs) < count:
        batch = 3.0 * rng.standard_normal((2 * count, dim))
        dist = batch @ normal
        xs.extend(batch[np.abs(dist) >= margin])
    x = np.stack(xs[:count])
    y = (x @ normal > 0).astype(int)
    return x, y
