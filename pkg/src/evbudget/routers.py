"""Reference logistic routers: a 2-class policy head and a binary frame-relevance head.

Both heads are linear maps over abstract feature vectors. The policy head is a
softmax over (Global, Fragment) logits; the frame head is a sigmoid. Losses are
mean binary cross-entropy (frame head) and mean cross-entropy (policy head),
with probabilities clamped to ``[PROB_EPS, 1 - PROB_EPS]`` before the log.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyInput

PROB_EPS = 1e-12

SEMANTIC = "semantic"
IMAGE = "image"


class Policy(enum.IntEnum):
    GLOBAL = 0
    FRAGMENT = 1


@dataclass
class RouterModel:
    """Linear head. ``weights`` is (classes, dim); ``bias`` is (classes,)."""

    head_kind: str
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if self.head_kind not in (SEMANTIC, IMAGE):
            raise ValueError(f"unknown head kind {self.head_kind!r}")
        rows = 2 if self.head_kind == SEMANTIC else 1
        if self.weights.ndim == 1:
            self.weights = self.weights.reshape(rows, -1)
        if self.weights.shape[0] != rows or self.bias.shape != (rows,):
            raise DimensionMismatch(
                f"{self.head_kind} head needs weights ({rows}, d) and bias ({rows},), "
                f"got {self.weights.shape} and {self.bias.shape}"
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("router parameters must be finite")

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, head_kind: str, dim: int) -> "RouterModel":
        rows = 2 if head_kind == SEMANTIC else 1
        return cls(head_kind, np.zeros((rows, dim)), np.zeros(rows))

    @classmethod
    def random(cls, head_kind: str, dim: int, seed: int = 0, scale: float = 0.1) -> "RouterModel":
        rng = np.random.default_rng(seed)
        rows = 2 if head_kind == SEMANTIC else 1
        return cls(head_kind, scale * rng.standard_normal((rows, dim)), scale * rng.standard_normal(rows))

    def copy(self) -> "RouterModel":
        return RouterModel(self.head_kind, self.weights.copy(), self.bias.copy())

    def params(self) -> np.ndarray:
        """Flat parameter vector: weights row-major, then bias."""
        return np.concatenate([self.weights.ravel(), self.bias])

    def with_params(self, flat: np.ndarray) -> "RouterModel":
        n_w = self.weights.size
        return RouterModel(self.head_kind, flat[:n_w].reshape(self.weights.shape).copy(), flat[n_w:].copy())

    def to_dict(self) -> dict:
        return {
            "head_kind": self.head_kind,
            "dim": self.dim,
            "weights": self.weights.ravel().tolist(),
            "bias": self.bias.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RouterModel":
        rows = 2 if data["head_kind"] == SEMANTIC else 1
        dim = int(data["dim"])
        weights = np.asarray(data["weights"], dtype=np.float64)
        if weights.size != rows * dim:
            raise DimensionMismatch(f"expected {rows * dim} weights for dim={dim}, got {weights.size}")
        return cls(data["head_kind"], weights.reshape(rows, dim), data["bias"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RouterModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class PolicyDecision:
    p_global: float
    p_fragment: float
    decision: Policy

    @property
    def probabilities(self) -> tuple[float, float]:
        return (self.p_global, self.p_fragment)

    @classmethod
    def from_probabilities(cls, p_global: float, p_fragment: float) -> "PolicyDecision":
        # ties go to Global
        decision = Policy.FRAGMENT if p_fragment > p_global else Policy.GLOBAL
        return cls(float(p_global), float(p_fragment), decision)


@dataclass(frozen=True)
class FrameScore:
    frame_index: int
    p: float
    y_hat: int

    @classmethod
    def from_probability(cls, frame_index: int, p: float) -> "FrameScore":
        return cls(int(frame_index), float(p), int(p > 0.5))

    def to_dict(self) -> dict:
        return {"frame_index": self.frame_index, "p": self.p, "y_hat": self.y_hat}


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.1
    epochs: int = 100
    batch_size: int = 0  # 0 means full batch
    lambda_s: float = 0.01
    lambda_v: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        # zero epochs is accepted and leaves the model untouched
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size < 0:
            raise ValueError("batch_size must be non-negative")
        if self.lambda_s < 0 or self.lambda_v < 0:
            raise ValueError("loss weights must be non-negative")


# --- forward passes -------------------------------------------------------


def _as_matrix(model: RouterModel, features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise DimensionMismatch(f"expected feature dimension {model.dim}, got shape {x.shape}")
    return x


def _require_head(model: RouterModel, kind: str) -> None:
    if model.head_kind != kind:
        raise DimensionMismatch(f"expected a {kind} head, got {model.head_kind}")


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def semantic_logits(model: RouterModel, features) -> np.ndarray:
    _require_head(model, SEMANTIC)
    return _as_matrix(model, features) @ model.weights.T + model.bias


def semantic_probs(model: RouterModel, features) -> np.ndarray:
    """(batch, 2) policy probabilities."""
    return softmax(semantic_logits(model, features))


def image_probs(model: RouterModel, features) -> np.ndarray:
    """(batch,) relevance probabilities."""
    _require_head(model, IMAGE)
    x = _as_matrix(model, features)
    return sigmoid(x @ model.weights[0] + model.bias[0])


def semantic_forward(model: RouterModel, query) -> PolicyDecision:
    x = np.asarray(query, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("semantic_forward takes a single feature vector")
    p = semantic_probs(model, x)[0]
    return PolicyDecision.from_probabilities(p[0], p[1])


def image_forward(model: RouterModel, frame, frame_index: int = 0) -> FrameScore:
    x = np.asarray(frame, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("image_forward takes a single feature vector")
    return FrameScore.from_probability(frame_index, image_probs(model, x)[0])


def score_frames(model: RouterModel, frames) -> list[FrameScore]:
    """Score a (T, d) stack of frame features, indexing frames 0..T-1."""
    probs = image_probs(model, frames)
    return [FrameScore.from_probability(t, p) for t, p in enumerate(probs)]


# --- losses ---------------------------------------------------------------


def _clamp(p):
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def bce_loss(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mean binary cross-entropy over T frames."""
    p = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if p.size == 0:
        raise EmptyInput("bce_loss needs at least one frame")
    if p.shape != y.shape:
        raise DimensionMismatch(f"{p.size} scores vs {y.size} labels")
    p = _clamp(p)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def ce_loss(decision: PolicyDecision, label: int) -> float:
    """Cross-entropy of one policy prediction against a 0/1 label."""
    if label not in (0, 1):
        raise ValueError(f"policy label must be 0 or 1, got {label!r}")
    return -math.log(float(_clamp(decision.probabilities[label])))


def joint_loss(l_lm: float, l_sem: float, l_img: float, cfg: TrainingConfig) -> float:
    # router terms first: they are small next to the LM loss
    return l_lm + (cfg.lambda_s * l_sem + cfg.lambda_v * l_img)


# --- gradients and training -----------------------------------------------


def loss_and_grad(model: RouterModel, features, labels) -> tuple[float, np.ndarray]:
    """Mean head loss over a batch and its gradient w.r.t. ``model.params()``.

    The gradient is that of the clamped loss: samples whose target probability
    sits in a clamped region contribute zero.
    """
    x = _as_matrix(model, features)
    y = np.asarray(labels).reshape(-1)
    m = x.shape[0]
    if m == 0:
        raise EmptyInput("empty batch")
    if y.shape[0] != m:
        raise DimensionMismatch(f"{m} feature rows vs {y.shape[0]} labels")

    if model.head_kind == IMAGE:
        p = image_probs(model, x)
        yf = y.astype(np.float64)
        pc = _clamp(p)
        loss = float(-np.mean(yf * np.log(pc) + (1.0 - yf) * np.log(1.0 - pc)))
        live = (p > PROB_EPS) & (p < 1.0 - PROB_EPS)
        dz = np.where(live, p - yf, 0.0) / m
        grad_w = (dz @ x).reshape(1, -1)
        grad_b = np.array([dz.sum()])
    else:
        probs = semantic_probs(model, x)
        yi = y.astype(int)
        p_true = probs[np.arange(m), yi]
        loss = float(-np.mean(np.log(_clamp(p_true))))
        onehot = np.zeros_like(probs)
        onehot[np.arange(m), yi] = 1.0
        live = (p_true > PROB_EPS) & (p_true < 1.0 - PROB_EPS)
        dz = np.where(live[:, None], probs - onehot, 0.0) / m
        grad_w = dz.T @ x
        grad_b = dz.sum(axis=0)
    return loss, np.concatenate([grad_w.ravel(), grad_b])


def batch_loss(model: RouterModel, features, labels) -> float:
    return loss_and_grad(model, features, labels)[0]


def _dataset_arrays(model: RouterModel, dataset) -> tuple[np.ndarray, np.ndarray]:
    if len(dataset) == 0:
        raise EmptyInput("training set is empty")
    x = _as_matrix(model, np.stack([np.asarray(f, dtype=np.float64) for f, _ in dataset]))
    y = np.asarray([int(lab) for _, lab in dataset])
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return x, y


def train_router(model: RouterModel, dataset, cfg: TrainingConfig) -> RouterModel:
    """Gradient descent on the head's own loss; returns a new model.

    ``dataset`` is a sequence of ``(features, label)`` pairs. With
    ``cfg.batch_size`` of 0 (or at least the dataset size) every step is full
    batch; otherwise each epoch visits a seed-driven permutation in mini-batches.
    """
    x, y = _dataset_arrays(model, dataset)
    trained = model.copy()
    if cfg.epochs == 0:
        return trained
    rng = np.random.default_rng(cfg.seed)
    m = x.shape[0]
    bs = m if cfg.batch_size == 0 or cfg.batch_size >= m else cfg.batch_size
    params = trained.params()
    for _ in range(cfg.epochs):
        order = np.arange(m) if bs == m else rng.permutation(m)
        for start in range(0, m, bs):
            idx = order[start:start + bs]
            _, grad = loss_and_grad(trained, x[idx], y[idx])
            params = params - cfg.learning_rate * grad
            trained = trained.with_params(params)
    return trained


def accuracy(model: RouterModel, features, labels) -> float:
    y = np.asarray(labels).reshape(-1)
    if model.head_kind == IMAGE:
        pred = (image_probs(model, features) > 0.5).astype(int)
    else:
        probs = semantic_probs(model, features)
        pred = (probs[:, 1] > probs[:, 0]).astype(int)
    return float(np.mean(pred == y))


GradFn = Callable[[RouterModel, np.ndarray, np.ndarray], tuple[float, np.ndarray]]


def grad_check(
    model: RouterModel,
    features,
    labels,
    loss_kind: str | None = None,
    *,
    step: float = 1e-5,
    grad_fn: GradFn | None = None,
    floor: float = 1e-4,
) -> float:
    """Max relative error between an analytic gradient and central differences.

    ``loss_kind`` is ``"bce"`` or ``"ce"`` and must agree with the head. Relative
    error per parameter is ``|a - f| / max(|a|, |f|, floor)``.
    """
    expected = "bce" if model.head_kind == IMAGE else "ce"
    if loss_kind is not None and loss_kind != expected:
        raise ValueError(f"{model.head_kind} head trains with {expected}, not {loss_kind}")
    grad_fn = grad_fn or loss_and_grad
    x = _as_matrix(model, features)
    y = np.asarray(labels)
    _, analytic = grad_fn(model, x, y)
    base = model.params()
    numeric = np.empty_like(base)
    for i in range(base.size):
        hi = base.copy()
        lo = base.copy()
        hi[i] += step
        lo[i] -= step
        numeric[i] = (batch_loss(model.with_params(hi), x, y) - batch_loss(model.with_params(lo), x, y)) / (2 * step)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def write_scores(scores: Sequence[FrameScore], path: str | Path) -> None:
    """One JSON record per line: ``{"frame_index", "p", "y_hat"}``."""
    lines = [json.dumps(s.to_dict()) for s in scores]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def read_scores(path: str | Path) -> list[FrameScore]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        p = float(rec["p"])
        # an explicit y_hat from an external scorer wins over re-thresholding
        y_hat = int(rec["y_hat"]) if "y_hat" in rec else int(p > 0.5)
        out.append(FrameScore(int(rec["frame_index"]), p, y_hat))
    return out
