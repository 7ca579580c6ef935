"""Mean pooling of per-frame token grids and prompt reconstruction."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Union

import numpy as np

from .allocator import AllocationPlan
from .budget import BudgetConfig, raw_budget
from .errors import InvalidGeometry, MissingFrame, ScaleMismatch


@dataclass
class TokenGrid:
    """A ``side x side`` grid of ``dim``-dimensional token vectors, row-major."""

    values: np.ndarray  # (side, side, dim)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim == 2:
            self.values = self.values[:, :, None]
        if self.values.ndim != 3 or self.values.shape[0] != self.values.shape[1] or self.values.shape[0] < 1:
            raise InvalidGeometry(f"grid must be (g, g, dim) with g >= 1, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    @property
    def side(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    @property
    def n_tokens(self) -> int:
        return self.side * self.side

    def tokens(self) -> np.ndarray:
        """Flattened (side*side, dim) token sequence."""
        return self.values.reshape(-1, self.dim)

    @classmethod
    def from_tokens(cls, tokens: np.ndarray) -> "TokenGrid":
        tokens = np.asarray(tokens, dtype=np.float64)
        side = int(round(np.sqrt(tokens.shape[0])))
        if side * side != tokens.shape[0]:
            raise InvalidGeometry(f"{tokens.shape[0]} tokens do not form a square grid")
        return cls(tokens.reshape(side, side, -1))

    def to_json(self) -> list:
        return self.values.tolist()

    @classmethod
    def from_json(cls, data: list) -> "TokenGrid":
        return cls(np.asarray(data, dtype=np.float64))


def mean_pool(grid: TokenGrid, s: int) -> TokenGrid:
    """Average non-overlapping ``s x s`` blocks; output side is ``side / s``."""
    g = grid.side
    if s < 1 or g % s:
        raise InvalidGeometry(f"scale {s} does not divide grid side {g}")
    if s == 1:
        return TokenGrid(grid.values.copy())
    h = g // s
    blocks = grid.values.reshape(h, s, h, s, grid.dim)
    return TokenGrid(blocks.mean(axis=(1, 3)))


def pool_plan(plan: AllocationPlan, grids: Mapping[int, TokenGrid]) -> dict[int, TokenGrid]:
    """Pool every kept frame of ``plan`` at its assigned scale."""
    out = {}
    for k in plan.kept:
        if k.frame not in grids:
            raise MissingFrame(f"no grid for kept frame {k.frame}")
        out[k.frame] = mean_pool(grids[k.frame], k.scale)
    return out


# --- prompt template and reconstructed sequence -----------------------------


@dataclass(frozen=True)
class TextSpan:
    count: int


@dataclass(frozen=True)
class FramePlaceholder:
    frame_index: int


@dataclass(frozen=True)
class VisualSpan:
    frame_index: int
    tokens: np.ndarray

    @property
    def count(self) -> int:
        return int(self.tokens.shape[0])


Segment = Union[TextSpan, VisualSpan]


@dataclass(frozen=True)
class PromptTemplate:
    segments: tuple[Union[TextSpan, FramePlaceholder], ...]

    def __post_init__(self) -> None:
        frames = [s.frame_index for s in self.segments if isinstance(s, FramePlaceholder)]
        if len(set(frames)) != len(frames):
            raise ValueError("each frame placeholder may appear only once")
        if frames != sorted(frames):
            raise ValueError("frame placeholders must be in ascending order")

    @property
    def text_tokens(self) -> int:
        return sum(s.count for s in self.segments if isinstance(s, TextSpan))

    @classmethod
    def interleaved(cls, t: int, preamble: int, question: int, per_frame_text: int = 0) -> "PromptTemplate":
        """``preamble`` text, then ``t`` frame slots, then the ``question`` text."""
        segs: list = []
        if preamble:
            segs.append(TextSpan(preamble))
        for f in range(t):
            if per_frame_text:
                segs.append(TextSpan(per_frame_text))
            segs.append(FramePlaceholder(f))
        if question:
            segs.append(TextSpan(question))
        return cls(tuple(segs))


@dataclass(frozen=True)
class TokenSequence:
    segments: tuple[Segment, ...]

    @property
    def total_length(self) -> int:
        return sum(s.count for s in self.segments)

    @property
    def text_tokens(self) -> int:
        return sum(s.count for s in self.segments if isinstance(s, TextSpan))

    @property
    def visual_tokens(self) -> int:
        return self.total_length - self.text_tokens

    def summary(self) -> dict:
        segs = []
        for s in self.segments:
            if isinstance(s, TextSpan):
                segs.append({"kind": "text", "count": s.count})
            else:
                segs.append({"kind": "visual", "frame": s.frame_index, "count": s.count})
        return {"segments": segs, "total_length": self.total_length}

    def save_summary(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2) + "\n", encoding="utf-8")


def reconstruct(template: PromptTemplate, plan: AllocationPlan, pooled: Mapping[int, TokenGrid]) -> TokenSequence:
    """Replace kept frames' placeholders with pooled tokens; drop the rest."""
    kept = {k.frame: k for k in plan.kept}
    slots = {s.frame_index for s in template.segments if isinstance(s, FramePlaceholder)}
    for frame, entry in kept.items():
        if frame not in slots:
            raise MissingFrame(f"template has no placeholder for kept frame {frame}")
        if frame not in pooled:
            raise MissingFrame(f"no pooled grid for kept frame {frame}")
        if pooled[frame].n_tokens != entry.tokens:
            raise ScaleMismatch(
                f"frame {frame}: grid has {pooled[frame].n_tokens} tokens, plan expects {entry.tokens}"
            )

    out: list[Segment] = []
    for seg in template.segments:
        if isinstance(seg, TextSpan):
            out.append(seg)
        elif seg.frame_index in kept:
            out.append(VisualSpan(seg.frame_index, pooled[seg.frame_index].tokens()))
    return TokenSequence(tuple(out))


def fits_context(seq: TokenSequence, cfg: BudgetConfig) -> bool:
    """Whether ``seq`` respects the visual budget and the context window.

    An empty visual part needs no budget, so it only has to fit the window.
    """
    visual = seq.visual_tokens
    within_budget = visual == 0 or visual <= raw_budget(cfg)
    return within_budget and seq.total_length + cfg.l_gen <= cfg.l_max


def load_grids(path: str | Path) -> dict[int, TokenGrid]:
    """Read ``{"frame": [[[...]]], ...}`` JSON into grids keyed by frame index."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return {int(k): TokenGrid.from_json(v) for k, v in data.items()}


def save_grids(grids: Mapping[int, TokenGrid], path: str | Path) -> None:
    data = {str(k): grids[k].to_json() for k in sorted(grids)}
    Path(path).write_text(json.dumps(data), encoding="utf-8")


def frame_grids(t: int, n: int, dim: int, seed: int = 0) -> dict[int, TokenGrid]:
    """Synthetic token grids for frames ``0..t-1``."""
    side = int(round(np.sqrt(n)))
    if side * side != n:
        raise InvalidGeometry(f"tokens per frame {n} is not a perfect square")
    rng = np.random.default_rng(seed)
    return {f: TokenGrid(rng.standard_normal((side, side, dim))) for f in range(t)}

