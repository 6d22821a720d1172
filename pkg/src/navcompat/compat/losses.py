"""Cosine scoring plus classification and contrastive losses with gradients."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .layers import sigmoid, softmax

P_CLAMP = 1e-12


class ClassificationKind(str, enum.Enum):
    CE = "ce"
    Focal = "focal"


@dataclass(frozen=True)
class LossConfig:
    classification: ClassificationKind | None = ClassificationKind.Focal
    contrastive: bool = True
    beta: float = 1.0
    gamma: float = 2.0


def compatibility_score(hv, hw) -> float:
    hv = np.asarray(hv, dtype=float)
    hw = np.asarray(hw, dtype=float)
    if hv.shape != hw.shape:
        raise ValueError(f"width mismatch {hv.shape} vs {hw.shape}")
    nv, nw = np.linalg.norm(hv), np.linalg.norm(hw)
    if nv == 0.0 or nw == 0.0:
        raise ValueError("zero vector has no direction")
    return float(np.clip(hv @ hw / (nv * nw), -1.0, 1.0))


def cosine_matrix(hw, hv):
    """``S[i, j]`` = cosine of instruction ``i`` with trajectory ``j``."""
    nw = np.linalg.norm(hw, axis=1, keepdims=True)
    nv = np.linalg.norm(hv, axis=1, keepdims=True)
    if np.any(nw == 0.0) or np.any(nv == 0.0):
        raise ValueError("zero vector has no direction")
    uw, uv = hw / nw, hv / nv
    return uw @ uv.T, (uw, uv, nw, nv)


def cosine_matrix_backward(dS, cache):
    uw, uv, nw, nv = cache
    duw = dS @ uv
    duv = dS.T @ uw
    dhw = (duw - uw * np.sum(uw * duw, axis=1, keepdims=True)) / nw
    dhv = (duv - uv * np.sum(uv * duv, axis=1, keepdims=True)) / nv
    return dhw, dhv


def classification_prob(s, a: float, b: float):
    return sigmoid(np.atleast_1d(a * np.asarray(s, dtype=float) + b)).reshape(np.shape(s))


def _pt(p, label):
    pt = np.where(np.asarray(label) == 1, p, 1.0 - p)
    return np.clip(pt, P_CLAMP, 1.0 - P_CLAMP)


def classification_loss(p, label, kind: ClassificationKind | str = ClassificationKind.CE,
                        gamma: float = 2.0):
    """Cross entropy on ``p_t``; focal multiplies by ``(1 - p_t) ** gamma``."""
    kind = ClassificationKind(kind)
    pt = _pt(np.asarray(p, dtype=float), label)
    ce = -np.log(pt)
    loss = ce if kind is ClassificationKind.CE else (1.0 - pt) ** gamma * ce
    return float(loss) if np.ndim(loss) == 0 else loss


def contrastive_loss(S, M, tau: float) -> float:
    return contrastive_loss_and_grad(S, M, math.log(tau))[0]


def contrastive_loss_and_grad(S, M, log_tau: float):
    """Row and column softmax losses at the diagonal, summed over unmasked pairs.

    Returns ``(loss, dS, dlog_tau)``.
    """
    S = np.asarray(S, dtype=float)
    M = np.asarray(M, dtype=float)
    total = M.sum()
    if total <= 0:
        raise ValueError("contrastive loss needs at least one unperturbed pair")
    logits = S * math.exp(-log_tau)
    diag = np.diag(logits)
    row = logsumexp(logits, axis=1) - diag
    col = logsumexp(logits, axis=0) - diag
    loss = float(np.sum(M * (row + col)) / total)
    g = M[:, None] * softmax(logits, axis=1) + M[None, :] * softmax(logits, axis=0)
    g -= np.diag(2.0 * M)
    g /= total
    dS = g * math.exp(-log_tau)
    dlog_tau = -float(np.sum(g * logits))
    return loss, dS, dlog_tau


def classification_terms_and_grad(S, M, a: float, b: float, kind: ClassificationKind,
                                  beta: float = 1.0, gamma: float = 2.0):
    """``(beta / N) * sum_i L_cls(sigma(a S_ii + b), M_i)``; returns loss, dS, da, db."""
    S = np.asarray(S, dtype=float)
    M = np.asarray(M)
    N = S.shape[0]
    s = np.diag(S)
    p = sigmoid(a * s + b)
    sign = np.where(M == 1, 1.0, -1.0)
    raw_pt = np.where(M == 1, p, 1.0 - p)
    pt = np.clip(raw_pt, P_CLAMP, 1.0 - P_CLAMP)
    live = (raw_pt == pt).astype(float)
    ce = -np.log(pt)
    if kind is ClassificationKind.CE:
        per = ce
        dpt = -1.0 / pt
    else:
        q = 1.0 - pt
        per = q ** gamma * ce
        dpt = -gamma * q ** (gamma - 1.0) * ce - q ** gamma / pt
    scale = beta / N
    dz = scale * dpt * live * sign * p * (1.0 - p)
    dS = np.diag(dz * a)
    return float(scale * per.sum()), dS, float(np.sum(dz * s)), float(dz.sum())


def total_loss_and_grad(S, M, log_tau: float, a: float, b: float, cfg: LossConfig = LossConfig()):
    """Returns ``(loss, parts, dS, {"log_tau", "cls.a", "cls.b"})``."""
    S = np.asarray(S, dtype=float)
    loss = 0.0
    parts = {}
    dS = np.zeros_like(S)
    scalars = {"log_tau": 0.0, "cls.a": 0.0, "cls.b": 0.0}
    if cfg.contrastive:
        lc, dSc, dlt = contrastive_loss_and_grad(S, M, log_tau)
        loss += lc
        parts["contrastive"] = lc
        dS += dSc
        scalars["log_tau"] = dlt
    if cfg.classification is not None:
        kind = ClassificationKind(cfg.classification)
        lcls, dSk, da, db = classification_terms_and_grad(S, M, a, b, kind, cfg.beta, cfg.gamma)
        loss += lcls
        parts["classification"] = lcls
        dS += dSk
        scalars["cls.a"] = da
        scalars["cls.b"] = db
    return loss, parts, dS, scalars


def total_loss(S, M, tau: float, a: float, b: float,
               kind: ClassificationKind | str = ClassificationKind.Focal,
               beta: float = 1.0, gamma: float = 2.0) -> float:
    cfg = LossConfig(ClassificationKind(kind), True, beta, gamma)
    return total_loss_and_grad(S, M, math.log(tau), a, b, cfg)[0]
