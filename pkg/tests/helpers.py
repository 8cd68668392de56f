"""Shared test oracles: finite differences, dense convolution references,
exhaustive search baselines.  These stay independent of the library paths
they check."""

from __future__ import annotations

import numpy as np

from graph2text.graphrep import DEFAULT, REVERSE, TokenGraph


def finite_difference_check(fn, tensors, eps=1e-5, n_per_tensor=None, rng=None):
    """Max relative error between recorded gradients and central differences.

    ``fn`` recomputes a scalar-output Tensor from the current tensor values.
    Checks every element unless ``n_per_tensor`` limits to a random subset.
    """
    for t in tensors:
        t.zero_grad()
    fn().backward()
    grads = [
        (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for t in tensors
    ]
    worst = 0.0
    for t, grad in zip(tensors, grads):
        flat = t.data.reshape(-1)
        gflat = grad.reshape(-1)
        if n_per_tensor is None or flat.size <= n_per_tensor:
            indices = range(flat.size)
        else:
            indices = (rng or np.random.default_rng(0)).choice(
                flat.size, size=n_per_tensor, replace=False)
        for i in indices:
            original = flat[i]
            flat[i] = original + eps
            hi = float(fn().data)
            flat[i] = original - eps
            lo = float(fn().data)
            flat[i] = original
            fd = (hi - lo) / (2 * eps)
            err = abs(gflat[i] - fd) / max(1.0, abs(gflat[i]), abs(fd))
            worst = max(worst, err)
    for t in tensors:
        t.zero_grad()
    return worst


def model_fd_check(bundle, batch, n_per_tensor=4, eps=1e-5, seed=0):
    """Finite-difference check of a full model loss over a parameter subset."""
    rng = np.random.default_rng(seed)
    for p in bundle.params.values():
        p.zero_grad()
    bundle.loss(batch).backward()
    worst = 0.0
    for name, p in bundle.params.items():
        flat = p.data.reshape(-1)
        grad = (p.grad if p.grad is not None else np.zeros_like(p.data)).reshape(-1)
        idx = rng.choice(flat.size, size=min(n_per_tensor, flat.size), replace=False)
        for i in idx:
            original = flat[i]
            flat[i] = original + eps
            hi = float(bundle.loss(batch).data)
            flat[i] = original - eps
            lo = float(bundle.loss(batch).data)
            flat[i] = original
            fd = (hi - lo) / (2 * eps)
            worst = max(worst, abs(grad[i] - fd) / max(1.0, abs(grad[i]), abs(fd)))
    for p in bundle.params.values():
        p.zero_grad()
    return worst


def dense_gcn_reference(tg: TokenGraph, h: np.ndarray, w: np.ndarray,
                        degree_mode: str = "in_self") -> np.ndarray:
    """Brute-force degree-normalized convolution via a dense coefficient matrix."""
    n = tg.seq_len
    indeg = np.zeros(n)
    outdeg = np.zeros(n)
    for s, t, rel in tg.edges:
        if rel == DEFAULT:
            indeg[t] += 1
            outdeg[s] += 1
    deg = indeg + 1 if degree_mode == "in_self" else indeg + outdeg + 1
    coeffs = np.zeros((n, n))
    for s, t, rel in tg.edges:
        if rel == DEFAULT:
            coeffs[t, s] += 1.0 / np.sqrt(deg[t] * deg[s])
    for v in range(n):
        coeffs[v, v] += 1.0 / deg[v]
    return (coeffs @ h) @ w.T


def dense_rgcn_reference(tg: TokenGraph, h: np.ndarray,
                         weights: dict[str, np.ndarray]) -> np.ndarray:
    """Brute-force per-relation mean aggregation via dense matrices."""
    n = tg.seq_len
    m = next(iter(weights.values())).shape[0]
    out = np.zeros((n, m))
    for rel, w in weights.items():
        counts = np.zeros(n)
        for s, t, r in tg.edges:
            if r == rel:
                counts[t] += 1
        coeffs = np.zeros((n, n))
        for s, t, r in tg.edges:
            if r == rel:
                coeffs[t, s] += 1.0 / counts[t]
        out += (coeffs @ h) @ w.T
    return out


def random_token_graph(rng, n_positions: int, relations=(DEFAULT, REVERSE),
                       density: float = 0.35) -> TokenGraph:
    """Random adjacency with paired reverse twins for oracle comparisons."""
    edges = set()
    for s in range(n_positions):
        for t in range(n_positions):
            if s != t and rng.random() < density:
                edges.add((s, t, DEFAULT))
                edges.add((t, s, REVERSE))
    return TokenGraph(
        seq_len=n_positions,
        edges=tuple(sorted(edges)),
        position_origin=tuple(f"n:{i}" for i in range(n_positions)),
        relations=relations,
    )


def enumerate_best_sequence(score_batch, vocab_size: int, eos: int, max_len: int):
    """Exhaustive search for the best length-normalized sequence.

    Considers every sequence that either ends with ``eos`` within ``max_len``
    tokens or runs the full length, mirroring the beam-search hypothesis
    space.
    """
    best, best_score = None, -np.inf

    def walk(prefix, total):
        nonlocal best, best_score
        if prefix and prefix[-1] == eos:
            score = total / len(prefix)
            if score > best_score:
                best, best_score = prefix[:-1], score
            return
        if len(prefix) == max_len:
            score = total / max(1, len(prefix))
            if score > best_score:
                best, best_score = list(prefix), score
            return
        row = score_batch([prefix])[0]
        for tok in range(vocab_size):
            walk(prefix + [tok], total + float(row[tok]))

    walk([], 0.0)
    return best, best_score
