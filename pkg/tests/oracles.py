"""Brute-force reference implementations used only by the tests."""

from __future__ import annotations

import itertools
import math

import numpy as np


def auc_pairs(scores, labels) -> float:
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


def tau_b_pairs(x, y) -> float:
    """Kendall tau-b by counting all pairs."""
    n = len(x)
    conc = disc = ties_x = ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif dx * dy > 0:
                conc += 1
            else:
                disc += 1
    denom = math.sqrt((conc + disc + ties_x) * (conc + disc + ties_y))
    return (conc - disc) / denom


def _alignments(n: int, m: int):
    """All monotone warping paths from (0, 0) to (n-1, m-1)."""
    def extend(path):
        i, j = path[-1]
        if (i, j) == (n - 1, m - 1):
            yield path
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            a, b = i + di, j + dj
            if a < n and b < m:
                yield from extend(path + [(a, b)])
    yield from extend([(0, 0)])


def dtw_brute(hyp, ref) -> float:
    hyp = np.asarray(hyp, dtype=float)
    ref = np.asarray(ref, dtype=float)
    best = math.inf
    for path in _alignments(len(hyp), len(ref)):
        cost = sum(float(np.linalg.norm(hyp[i] - ref[j])) for i, j in path)
        best = min(best, cost)
    return best


def viterbi_brute(initial, transition, emission, obs):
    """Argmax state sequence by enumeration; ties go to the lexicographically smallest."""
    n_states = len(initial)
    best, best_seq = -math.inf, None
    with np.errstate(divide="ignore"):
        li, lt, le = np.log(initial), np.log(transition), np.log(emission)
    for seq in itertools.product(range(n_states), repeat=len(obs)):
        lp = li[seq[0]] + le[seq[0], obs[0]]
        for k in range(1, len(obs)):
            lp += lt[seq[k - 1], seq[k]] + le[seq[k], obs[k]]
        if lp > best + 1e-12:
            best, best_seq = lp, seq
    return list(best_seq), best


def simple_path_min(graph, a: str, b: str) -> float:
    """Shortest path length by enumerating every simple path."""
    if a == b:
        return 0.0
    best = math.inf
    stack = [(a, (a,), 0.0)]
    while stack:
        node, path, length = stack.pop()
        for nb in graph.neighbors(node):
            if nb in path:
                continue
            d = length + graph.edge_length(node, nb)
            if nb == b:
                best = min(best, d)
            else:
                stack.append((nb, path + (nb,), d))
    return best


def contrastive_direct(S, M, tau) -> float:
    """Row and column losses written out term by term."""
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    total = 0.0
    for i in range(n):
        if M[i] == 0:
            continue
        row = -math.log(math.exp(S[i, i] / tau) / sum(math.exp(S[i, j] / tau) for j in range(n)))
        col = -math.log(math.exp(S[i, i] / tau) / sum(math.exp(S[j, i] / tau) for j in range(n)))
        total += row + col
    return total / sum(M)


def gru_step_scalar(x, h, W, U, b):
    """One gated step with explicit loops, gate layout [update | reset | candidate]."""
    H = len(h)
    def dot_col(vec, mat, col):
        return sum(vec[k] * mat[k][col] for k in range(len(vec)))
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    z = [sig(dot_col(x, W, c) + b[c] + dot_col(h, U, c)) for c in range(H)]
    r = [sig(dot_col(x, W, H + c) + b[H + c] + dot_col(h, U, H + c)) for c in range(H)]
    rh = [r[c] * h[c] for c in range(H)]
    n = [math.tanh(dot_col(x, W, 2 * H + c) + b[2 * H + c] + dot_col(rh, U, 2 * H + c)) for c in range(H)]
    return [(1 - z[c]) * n[c] + z[c] * h[c] for c in range(H)]


def trajectory_forward_scalar(params, pano, prev, nxt, geom):
    """Trajectory encoder for a single route, one scalar at a time.

    ``pano`` is (T, 36, F); returns the final top-layer state as a list.
    """
    Wa, Wp, bp = params["attn.W"], params["proj.W"], params["proj.b"]
    H = len(Wa)
    h1 = [0.0] * H
    h2 = [0.0] * H
    for t in range(len(pano)):
        slots = pano[t]
        F = len(slots[0])
        q = [sum(h2[k] * Wa[k][f] for k in range(H)) for f in range(F)]
        logits = [sum(q[f] * slot[f] for f in range(F)) for slot in slots]
        top = max(logits)
        w = [math.exp(l - top) for l in logits]
        z = sum(w)
        att = [sum(w[s] / z * slots[s][f] for s in range(len(slots))) for f in range(F)]
        u = list(prev[t]) + list(nxt[t]) + att + list(geom[t])
        v = [sum(u[k] * Wp[k][c] for k in range(len(u))) + bp[c] for c in range(len(bp))]
        h1 = gru_step_scalar(v, h1, params["traj_l1.W"], params["traj_l1.U"], params["traj_l1.b"])
        h2 = gru_step_scalar(h1, h2, params["traj_l2.W"], params["traj_l2.U"], params["traj_l2.b"])
    return h2


def viterbi_enumerate(initial, transition, emission, obs):
    """Log probability of every state sequence, enumerated in lexicographic order.

    Returns ``(sequences, logprobs)`` with one row per sequence.
    """
    S, T = len(initial), len(obs)
    seqs = np.array(np.unravel_index(np.arange(S ** T), (S,) * T)).T.reshape(-1, T)
    with np.errstate(divide="ignore"):
        li, lt, le = np.log(initial), np.log(transition), np.log(emission)
    lp = li[seqs[:, 0]] + le[seqs[:, 0], obs[0]]
    for k in range(1, T):
        lp = lp + lt[seqs[:, k - 1], seqs[:, k]] + le[seqs[:, k], obs[k]]
    return seqs, lp
