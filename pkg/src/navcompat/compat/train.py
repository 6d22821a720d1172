"""Forward/backward over a minibatch, Adam updates, and finite-difference checks."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..rng import as_rng
from ..textperturb import DIRECTION_SETS
from .data import Minibatch, TrainingSet, sample_minibatch
from .losses import ClassificationKind, LossConfig, cosine_matrix, cosine_matrix_backward, total_loss_and_grad
from .model import CompatModel, ModelConfig, build_vocab


class NumericError(ArithmeticError):
    pass


@dataclass
class TrainConfig:
    d_e: int = 32
    d_h: int = 64
    d_img: int = 16
    lr: float = 1e-3
    steps: int = 500
    batch_size: int = 8
    loss: str = "focal"
    contrastive: bool = True
    beta: float = 1.0
    gamma: float = 2.0
    mix: tuple[int, int, int] = (2, 1, 1)
    clip_norm: float | None = None

    def __post_init__(self):
        self.mix = tuple(self.mix)
        problems = []
        for name in ("d_e", "d_h", "d_img", "batch_size"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be positive")
        if self.steps < 0 or self.lr < 0:
            problems.append("steps and lr must be non-negative")
        if self.loss not in ("ce", "focal", "none"):
            problems.append(f"unknown loss kind {self.loss!r}")
        if self.loss == "none" and not self.contrastive:
            problems.append("no loss term enabled")
        if len(self.mix) != 3 or min(self.mix) < 0 or self.mix[0] == 0:
            problems.append("mix needs three non-negative counts with positives > 0")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def loss_config(self) -> LossConfig:
        kind = None if self.loss == "none" else ClassificationKind(self.loss)
        return LossConfig(kind, self.contrastive, self.beta, self.gamma)

    @classmethod
    def from_json(cls, path: str | Path) -> "TrainConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mix"] = list(self.mix)
        return d


def forward_loss(model: CompatModel, batch: Minibatch, cfg: LossConfig):
    hw, icache = model.encode_instructions(batch.tokens())
    hv, tcache = model.encode_trajectories(batch.views)
    S, ccache = cosine_matrix(hw, hv)
    p = model.params
    loss, parts, dS, scalars = total_loss_and_grad(
        S, batch.mask, float(p["log_tau"]), float(p["cls.a"]), float(p["cls.b"]), cfg)
    return loss, parts, S, dS, scalars, (icache, tcache, ccache)


def loss_and_grads(model: CompatModel, batch: Minibatch, cfg: LossConfig = LossConfig()):
    """Returns ``(loss, parts, S, grads)`` with one gradient array per parameter."""
    loss, parts, S, dS, scalars, (icache, tcache, ccache) = forward_loss(model, batch, cfg)
    grads = model.zero_grads()
    dhw, dhv = cosine_matrix_backward(dS, ccache)
    model.backward_instructions(dhw, icache, grads)
    model.backward_trajectories(dhv, tcache, grads)
    for name, value in scalars.items():
        grads[name] = np.array(value)
    return loss, parts, S, grads


def batch_loss(model: CompatModel, batch: Minibatch, cfg: LossConfig = LossConfig()) -> float:
    return forward_loss(model, batch, cfg)[0]


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict, grads: dict, frozen=frozenset()) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            if name in frozen:
                continue
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _clip(grads: dict, max_norm: float) -> None:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm:
        for g in grads.values():
            g *= max_norm / norm


def dataset_vocab(dataset: TrainingSet) -> tuple[str, ...]:
    extra = [w for group in DIRECTION_SETS for phrase in group for w in phrase.split()]
    return build_vocab((p.instruction.tokens for p in dataset.pairs), extra)


@dataclass
class TrainResult:
    model: CompatModel
    losses: list[float] = field(default_factory=list)
    parts: list[dict] = field(default_factory=list)


def train(dataset: TrainingSet, config: TrainConfig, rng=None, model: CompatModel | None = None,
          vocab: Sequence[str] | None = None,
          on_step: Callable[[int, float, dict], None] | None = None) -> TrainResult:
    """Adam on sampled minibatches; initialization and sampling share one stream."""
    rng = as_rng(rng)
    if model is None:
        vocab = tuple(vocab) if vocab is not None else dataset_vocab(dataset)
        mcfg = ModelConfig(vocab, config.d_e, config.d_h, config.d_img, loss=config.loss)
        model = CompatModel.initialize(mcfg, rng)
    cfg = config.loss_config
    opt = Adam(config.lr)
    result = TrainResult(model)
    for step in range(config.steps):
        batch = sample_minibatch(dataset, config.batch_size, rng, config.mix)
        try:
            loss, parts, _, grads = loss_and_grads(model, batch, cfg)
        except OverflowError as exc:
            raise NumericError(f"overflow at step {step}: {exc}") from exc
        if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
            raise NumericError(f"non-finite loss or gradient at step {step}: loss={loss}, parts={parts}")
        if config.clip_norm is not None:
            _clip(grads, config.clip_norm)
        opt.step(model.params, grads, model.frozen)
        result.losses.append(loss)
        result.parts.append(parts)
        if on_step is not None:
            on_step(step, loss, parts)
    return result


@dataclass(frozen=True)
class GradCheckEntry:
    name: str
    index: tuple[int, ...]
    analytic: float
    numeric: float

    @property
    def error(self) -> float:
        return abs(self.analytic - self.numeric) / max(1.0, abs(self.analytic))


@dataclass
class GradCheckReport:
    entries: list[GradCheckEntry]
    tol: float

    @property
    def worst(self) -> GradCheckEntry:
        return max(self.entries, key=lambda e: e.error)

    @property
    def passed(self) -> bool:
        return self.worst.error < self.tol

    @property
    def groups(self) -> set[str]:
        return {e.name for e in self.entries}

    @property
    def failures(self) -> list[GradCheckEntry]:
        return [e for e in self.entries if e.error >= self.tol]

    def summary(self) -> str:
        w = self.worst
        status = "ok" if self.passed else "FAIL"
        return (f"{status}: {len(self.entries)} entries over {len(self.groups)} tensors, "
                f"worst {w.name}{list(w.index)} analytic={w.analytic:.6g} numeric={w.numeric:.6g} "
                f"rel_err={w.error:.3g}")


def _pick_indices(model: CompatModel, batch: Minibatch, n_params: int, rng) -> list[tuple[str, tuple]]:
    """At least one entry per trainable tensor, the rest spread evenly up to each tensor's size."""
    names = [k for k in model.params if k not in model.frozen]
    used_rows = sorted({i for toks in batch.tokens() for i in model.token_ids(toks)})
    pools = {}
    for name in names:
        shape = model.params[name].shape
        if name == "embedding":
            pools[name] = [r * shape[1] + c for r in used_rows for c in range(shape[1])]
        else:
            pools[name] = list(range(int(np.prod(shape, dtype=int))))
    quota = {name: 0 for name in names}
    remaining = n_params
    while remaining > 0:
        open_names = [n for n in names if quota[n] < len(pools[n])]
        if not open_names:
            break
        share = max(1, remaining // len(open_names))
        for name in open_names:
            take = min(share, len(pools[name]) - quota[name], remaining)
            quota[name] += take
            remaining -= take
            if remaining == 0:
                break
    picks = []
    for name in names:
        shape = model.params[name].shape
        flat = sorted(rng.choice(pools[name], size=quota[name], replace=False).tolist())
        picks.extend((name, tuple(int(i) for i in np.unravel_index(f, shape))) for f in flat)
    return picks


def gradient_check(model: CompatModel, batch: Minibatch, cfg: LossConfig = LossConfig(),
                   eps: float = 1e-4, tol: float = 1e-4, n_params: int = 200, rng=None,
                   analytic: dict | None = None) -> GradCheckReport:
    """Central differences on a random subset of entries from every trainable tensor.

    ``analytic`` overrides the backward pass, which is how fault injection is tested.
    """
    rng = as_rng(0 if rng is None else rng)
    if analytic is None:
        analytic = loss_and_grads(model, batch, cfg)[3]
    entries = []
    for name, idx in _pick_indices(model, batch, n_params, rng):
        arr = model.params[name]
        orig = float(arr[idx])
        arr[idx] = orig + eps
        lp = batch_loss(model, batch, cfg)
        arr[idx] = orig - eps
        lm = batch_loss(model, batch, cfg)
        arr[idx] = orig
        entries.append(GradCheckEntry(name, idx, float(analytic[name][idx]), (lp - lm) / (2 * eps)))
    return GradCheckReport(entries, tol)
