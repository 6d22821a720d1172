"""Dual-encoder instruction/trajectory compatibility model.

Instruction side: token embeddings -> bidirectional GRU, final states
concatenated. Trajectory side: per viewpoint, bilinear attention of the
previous top-layer state over the 36 slot features, a linear projection of
``[e_prev, e_next, attended, step geometry]``, then two stacked GRUs. The
score is the cosine of the two final vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .features import GEOM_DIM, N_SLOTS, ORIENT_DIM, StackedViews
from .layers import gru_cell, gru_cell_backward, gru_sequence, gru_sequence_backward, softmax
from .losses import cosine_matrix

PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1


@dataclass(frozen=True)
class ModelConfig:
    vocab: tuple[str, ...]
    d_e: int = 32
    d_h: int = 64
    d_img: int = 16
    d_proj: int | None = None
    loss: str = "focal"

    @property
    def feature_dim(self) -> int:
        return self.d_img + ORIENT_DIM

    @property
    def traj_hidden(self) -> int:
        return 2 * self.d_h

    @property
    def proj_dim(self) -> int:
        return self.d_proj or self.d_h

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        F, H, dh, P = self.feature_dim, self.traj_hidden, self.d_h, self.proj_dim
        shapes = {"embedding": (len(self.vocab), self.d_e)}
        for side in ("inst_fwd", "inst_bwd"):
            shapes[f"{side}.W"] = (self.d_e, 3 * dh)
            shapes[f"{side}.U"] = (dh, 3 * dh)
            shapes[f"{side}.b"] = (3 * dh,)
        shapes["attn.W"] = (H, F)
        shapes["proj.W"] = (3 * F + GEOM_DIM, P)
        shapes["proj.b"] = (P,)
        for layer, width in (("traj_l1", P), ("traj_l2", H)):
            shapes[f"{layer}.W"] = (width, 3 * H)
            shapes[f"{layer}.U"] = (H, 3 * H)
            shapes[f"{layer}.b"] = (3 * H,)
        shapes["cls.a"] = ()
        shapes["cls.b"] = ()
        shapes["log_tau"] = ()
        return shapes


def build_vocab(token_lists, extra: Sequence[str] = ()) -> tuple[str, ...]:
    words = set(extra)
    for toks in token_lists:
        words.update(toks)
    words.discard(PAD)
    words.discard(UNK)
    return (PAD, UNK) + tuple(sorted(words))


@dataclass
class CompatModel:
    config: ModelConfig
    params: dict[str, np.ndarray]
    frozen: set[str] = field(default_factory=set)

    def __post_init__(self):
        self._index = {w: i for i, w in enumerate(self.config.vocab)}

    @classmethod
    def initialize(cls, config: ModelConfig, rng=None) -> "CompatModel":
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        params = {}
        for name, shape in config.param_shapes().items():
            params[name] = rng.uniform(-0.1, 0.1, size=shape)
        params["cls.a"] = np.array(1.0)
        params["cls.b"] = np.array(0.0)
        params["log_tau"] = np.array(0.0)
        params["embedding"][PAD_ID] = 0.0
        return cls(config, params)

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    @property
    def tau(self) -> float:
        return float(np.exp(self.params["log_tau"]))

    def token_ids(self, tokens: Sequence[str]) -> list[int]:
        return [self._index.get(t, UNK_ID) for t in tokens]

    def load_token_vectors(self, vectors: dict[str, np.ndarray], freeze: bool = True) -> int:
        """Copy precomputed per-token vectors into the embedding table."""
        table = self.params["embedding"]
        hits = 0
        for word, vec in vectors.items():
            idx = self._index.get(word)
            if idx is not None:
                table[idx] = np.asarray(vec, dtype=float)
                hits += 1
        if freeze:
            self.frozen.add("embedding")
        return hits

    # --- instruction encoder ---------------------------------------------------

    def encode_instructions(self, token_batches: Sequence[Sequence[str]]):
        ids = [self.token_ids(t) for t in token_batches]
        if any(len(i) == 0 for i in ids):
            raise ValueError("cannot encode an empty instruction")
        B, T = len(ids), max(len(i) for i in ids)
        fwd_ids = np.full((B, T), PAD_ID)
        bwd_ids = np.full((B, T), PAD_ID)
        mask = np.zeros((B, T))
        for row, seq in enumerate(ids):
            fwd_ids[row, :len(seq)] = seq
            bwd_ids[row, :len(seq)] = seq[::-1]
            mask[row, :len(seq)] = 1.0
        E = self.params["embedding"]
        p = self.params
        hf, sf = gru_sequence(E[fwd_ids], mask, p["inst_fwd.W"], p["inst_fwd.U"], p["inst_fwd.b"])
        hb, sb = gru_sequence(E[bwd_ids], mask, p["inst_bwd.W"], p["inst_bwd.U"], p["inst_bwd.b"])
        return np.concatenate([hf, hb], axis=1), (fwd_ids, bwd_ids, mask, sf, sb)

    def backward_instructions(self, dhw, cache, grads):
        fwd_ids, bwd_ids, mask, sf, sb = cache
        dh = self.config.d_h
        p = self.params
        dxf = gru_sequence_backward(dhw[:, :dh], sf, p["inst_fwd.W"], p["inst_fwd.U"], grads, "inst_fwd")
        dxb = gru_sequence_backward(dhw[:, dh:], sb, p["inst_bwd.W"], p["inst_bwd.U"], grads, "inst_bwd")
        dE = grads["embedding"]
        m = mask[:, :, None]
        np.add.at(dE, fwd_ids, dxf * m)
        np.add.at(dE, bwd_ids, dxb * m)

    # --- trajectory encoder ----------------------------------------------------

    def encode_trajectories(self, views: Sequence[StackedViews], return_attention: bool = False):
        B = len(views)
        T = max(len(v) for v in views)
        F = self.config.feature_dim
        H = self.config.traj_hidden
        if views[0].pano.shape[-1] != F:
            raise ValueError(f"feature width {views[0].pano.shape[-1]} != model width {F}")
        pano = np.zeros((B, T, N_SLOTS, F))
        side = np.zeros((B, T, 2 * F + GEOM_DIM))
        mask = np.zeros((B, T))
        for row, v in enumerate(views):
            n = len(v)
            pano[row, :n] = v.pano
            side[row, :n] = np.concatenate([v.prev, v.next, v.geom], axis=1)
            mask[row, :n] = 1.0
        p = self.params
        Wa, Wp, bp = p["attn.W"], p["proj.W"], p["proj.b"]
        h1 = np.zeros((B, H))
        h2 = np.zeros((B, H))
        steps = []
        for t in range(T):
            m = mask[:, t, None]
            e = pano[:, t]
            q = h2 @ Wa
            alpha = softmax(np.einsum("bf,bkf->bk", q, e), axis=1)
            att = np.einsum("bk,bkf->bf", alpha, e)
            u = np.concatenate([side[:, t, :2 * F], att, side[:, t, 2 * F:]], axis=1)
            v = u @ Wp + bp
            h1_new, c1 = gru_cell(v @ p["traj_l1.W"] + p["traj_l1.b"], h1, p["traj_l1.U"])
            h1 = m * h1_new + (1.0 - m) * h1
            h2_prev = h2
            h2_new, c2 = gru_cell(h1 @ p["traj_l2.W"] + p["traj_l2.b"], h2, p["traj_l2.U"])
            h2 = m * h2_new + (1.0 - m) * h2
            steps.append((h2_prev, e, alpha, u, v, h1, c1, c2, m))
        cache = (steps, F)
        if return_attention:
            return h2, cache, np.stack([s[2] for s in steps], axis=1)
        return h2, cache

    def backward_trajectories(self, dhv, cache, grads):
        steps, F = cache
        p = self.params
        Wa, Wp = p["attn.W"], p["proj.W"]
        W1, W2 = p["traj_l1.W"], p["traj_l2.W"]
        dh2 = dhv
        dh1 = np.zeros_like(dhv)
        for h2_prev, e, alpha, u, v, h1, c1, c2, m in reversed(steps):
            dgx2, dh2_cell = gru_cell_backward(m * dh2, c2, p["traj_l2.U"], grads["traj_l2.U"])
            dh2_prev = (1.0 - m) * dh2 + dh2_cell
            grads["traj_l2.W"] += h1.T @ dgx2
            grads["traj_l2.b"] += dgx2.sum(axis=0)
            dh1 = dh1 + dgx2 @ W2.T

            dgx1, dh1_cell = gru_cell_backward(m * dh1, c1, p["traj_l1.U"], grads["traj_l1.U"])
            dh1_prev = (1.0 - m) * dh1 + dh1_cell
            grads["traj_l1.W"] += v.T @ dgx1
            grads["traj_l1.b"] += dgx1.sum(axis=0)
            dv = dgx1 @ W1.T

            grads["proj.W"] += u.T @ dv
            grads["proj.b"] += dv.sum(axis=0)
            datt = (dv @ Wp.T)[:, 2 * F:3 * F]
            dalpha = np.einsum("bf,bkf->bk", datt, e)
            dscore = alpha * (dalpha - np.sum(alpha * dalpha, axis=1, keepdims=True))
            dq = np.einsum("bk,bkf->bf", dscore, e)
            grads["attn.W"] += h2_prev.T @ dq
            dh2_prev = dh2_prev + dq @ Wa.T

            dh2, dh1 = dh2_prev, dh1_prev

    # --- scoring -----------------------------------------------------------------

    def score_matrix(self, token_batches, views) -> np.ndarray:
        hw, _ = self.encode_instructions(token_batches)
        hv, _ = self.encode_trajectories(views)
        return cosine_matrix(hw, hv)[0]

    def score_pair(self, tokens, views: StackedViews) -> float:
        return float(self.score_matrix([tokens], [views])[0, 0])

    def score_pairs(self, token_batches, views, chunk: int = 64) -> np.ndarray:
        """Diagonal scores for aligned lists, computed in chunks."""
        out = []
        for start in range(0, len(views), chunk):
            hw, _ = self.encode_instructions(token_batches[start:start + chunk])
            hv, _ = self.encode_trajectories(views[start:start + chunk])
            uw = hw / np.linalg.norm(hw, axis=1, keepdims=True)
            uv = hv / np.linalg.norm(hv, axis=1, keepdims=True)
            out.append(np.sum(uw * uv, axis=1))
        return np.concatenate(out) if out else np.zeros(0)
