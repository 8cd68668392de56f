"""Toy transformer encoder-decoder used as the trainable stand-in backbone.

Pre-norm residual layout with learned absolute positions: each sublayer
computes ``residual + sublayer(norm(input))``, and the adapter insertion
point is the output of the feed-forward sublayer, after its residual.  Input
and output embeddings are tied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .bpe import EOS_ID, MASK_ID, PAD_ID

FT_MODES = ("finetune_all", "ft_top2", "ft_bottom2", "adapters_only")


@dataclass(frozen=True)
class BackboneConfig:
    vocab_size: int
    layers: int = 2
    d_model: int = 64
    heads: int = 4
    ffn: int = 128
    max_src_len: int = 160
    max_tgt_len: int = 64
    dropout: float = 0.0

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise ValueError("d_model must be divisible by heads")

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size, "layers": self.layers,
            "d_model": self.d_model, "heads": self.heads, "ffn": self.ffn,
            "max_src_len": self.max_src_len, "max_tgt_len": self.max_tgt_len,
            "dropout": self.dropout,
        }


def _normal(rng, shape, std):
    return Tensor(rng.normal(0.0, std, size=shape), requires_grad=True)


def _zeros(shape):
    return Tensor(np.zeros(shape), requires_grad=True)


def _ones(shape):
    return Tensor(np.ones(shape), requires_grad=True)


def init_backbone(cfg: BackboneConfig, seed: int = 0) -> dict[str, Tensor]:
    """Seed-deterministic parameter initialization."""
    rng = np.random.default_rng(seed)
    d, f = cfg.d_model, cfg.ffn
    params: dict[str, Tensor] = {
        "backbone.tok_emb": _normal(rng, (cfg.vocab_size, d), 1.0 / math.sqrt(d)),
        "backbone.enc_pos": _normal(rng, (cfg.max_src_len, d), 0.02),
        "backbone.dec_pos": _normal(rng, (cfg.max_tgt_len, d), 0.02),
    }

    def add_ln(name):
        params[f"{name}.scale"] = _ones((d,))
        params[f"{name}.shift"] = _zeros((d,))

    def add_attn(name):
        std = 1.0 / math.sqrt(d)
        for w in ("wq", "wk", "wv", "wo"):
            params[f"{name}.{w}"] = _normal(rng, (d, d), std)

    def add_ffn(name):
        params[f"{name}.w1"] = _normal(rng, (d, f), 1.0 / math.sqrt(d))
        params[f"{name}.b1"] = _zeros((f,))
        params[f"{name}.w2"] = _normal(rng, (f, d), 1.0 / math.sqrt(f))
        params[f"{name}.b2"] = _zeros((d,))

    for i in range(cfg.layers):
        base = f"backbone.enc.{i}"
        add_ln(f"{base}.attn_ln")
        add_attn(f"{base}.attn")
        add_ln(f"{base}.ffn_ln")
        add_ffn(f"{base}.ffn")
    add_ln("backbone.enc_final_ln")
    for i in range(cfg.layers):
        base = f"backbone.dec.{i}"
        add_ln(f"{base}.self_ln")
        add_attn(f"{base}.self")
        add_ln(f"{base}.cross_ln")
        add_attn(f"{base}.cross")
        add_ln(f"{base}.ffn_ln")
        add_ffn(f"{base}.ffn")
    add_ln("backbone.dec_final_ln")
    return params


# --- masks ---------------------------------------------------------------------

NEG_INF = -1e9


def pad_mask(lengths, seq_len: int):
    """(B, 1, 1, S) additive mask: 0 on valid keys, -inf on padding."""
    lengths = np.asarray(lengths)
    valid = np.arange(seq_len)[None, :] < lengths[:, None]
    return np.where(valid, 0.0, NEG_INF)[:, None, None, :]


def causal_mask(seq_len: int):
    mask = np.triu(np.full((seq_len, seq_len), NEG_INF), k=1)
    return mask[None, None, :, :]


# --- sublayers -------------------------------------------------------------------


def _ln(params, name, x) -> Tensor:
    return ad.layer_norm(x, params[f"{name}.scale"], params[f"{name}.shift"])


def _heads_split(x, heads):
    b, t, d = x.shape
    return ad.transpose(ad.reshape(x, (b, t, heads, d // heads)), (0, 2, 1, 3))


def _heads_join(x):
    b, h, t, dk = x.shape
    return ad.reshape(ad.transpose(x, (0, 2, 1, 3)), (b, t, h * dk))


def _attention(params, name, query, keyval, mask, cfg) -> Tensor:
    if keyval is None:  # self-attention
        keyval = query
    dk = cfg.d_model // cfg.heads
    q = _heads_split(ad.matmul(query, params[f"{name}.wq"]), cfg.heads)
    k = _heads_split(ad.matmul(keyval, params[f"{name}.wk"]), cfg.heads)
    v = _heads_split(ad.matmul(keyval, params[f"{name}.wv"]), cfg.heads)
    scores = ad.mul(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dk))
    if mask is not None:
        scores = ad.add(scores, mask)
    out = ad.matmul(ad.softmax(scores, axis=-1), v)
    return ad.matmul(_heads_join(out), params[f"{name}.wo"])


def _ffn(params, name, x) -> Tensor:
    h = ad.relu(ad.add(ad.matmul(x, params[f"{name}.w1"]), params[f"{name}.b1"]))
    return ad.add(ad.matmul(h, params[f"{name}.w2"]), params[f"{name}.b2"])


def encoder_forward(params, cfg: BackboneConfig, src_ids, src_lengths,
                    adapter_hook=None, collect_layers: bool = False):
    """Run the encoder; returns the final hidden state (B, S, d).

    With ``collect_layers`` also returns the per-layer post-FFN-sublayer
    outputs, the adapter insertion points.
    """
    b, s = np.asarray(src_ids).shape
    if s > cfg.max_src_len:
        raise ValueError(f"source length {s} exceeds max {cfg.max_src_len}")
    mask = pad_mask(src_lengths, s)
    h = ad.add(ad.embedding(params["backbone.tok_emb"], src_ids),
               params["backbone.enc_pos"][:s])
    layers = []
    for i in range(cfg.layers):
        base = f"backbone.enc.{i}"
        h = ad.add(h, _attention(params, f"{base}.attn",
                                 _ln(params, f"{base}.attn_ln", h), None, mask, cfg))
        h = ad.add(h, _ffn(params, f"{base}.ffn", _ln(params, f"{base}.ffn_ln", h)))
        if collect_layers:
            layers.append(h)
        if adapter_hook is not None:
            h = adapter_hook("enc", i, h)
    h = _ln(params, "backbone.enc_final_ln", h)
    if collect_layers:
        return h, layers
    return h


def decoder_forward(params, cfg: BackboneConfig, tgt_ids, enc_out, src_lengths,
                    adapter_hook=None):
    """Teacher-forced decoder pass; returns hidden states (B, T, d)."""
    b, t = np.asarray(tgt_ids).shape
    if t > cfg.max_tgt_len:
        raise ValueError(f"target length {t} exceeds max {cfg.max_tgt_len}")
    self_mask = causal_mask(t)
    cross = pad_mask(src_lengths, enc_out.shape[1])
    h = ad.add(ad.embedding(params["backbone.tok_emb"], tgt_ids),
               params["backbone.dec_pos"][:t])
    for i in range(cfg.layers):
        base = f"backbone.dec.{i}"
        h = ad.add(h, _attention(params, f"{base}.self",
                                 _ln(params, f"{base}.self_ln", h), None, self_mask, cfg))
        normed = _ln(params, f"{base}.cross_ln", h)
        h = ad.add(h, _attention(params, f"{base}.cross", normed, enc_out, cross, cfg))
        h = ad.add(h, _ffn(params, f"{base}.ffn", _ln(params, f"{base}.ffn_ln", h)))
        if adapter_hook is not None:
            h = adapter_hook("dec", i, h)
    return _ln(params, "backbone.dec_final_ln", h)


def output_logits(params, hidden) -> Tensor:
    """Tied-embedding projection to vocabulary logits."""
    emb = params["backbone.tok_emb"]
    return ad.matmul(hidden, ad.transpose(emb, (1, 0)))


def sequence_loss(params, cfg: BackboneConfig, src_ids, src_lengths,
                  tgt_in, tgt_out, adapter_hook=None) -> Tensor:
    """Mean token negative log-likelihood, excluding padding positions."""
    enc = encoder_forward(params, cfg, src_ids, src_lengths, adapter_hook)
    dec = decoder_forward(params, cfg, tgt_in, enc, src_lengths, adapter_hook)
    return ad.cross_entropy(output_logits(params, dec), tgt_out, ignore_index=PAD_ID)


# --- trainable-parameter selection -------------------------------------------------


def trainable_mask(mode: str, cfg: BackboneConfig):
    """Predicate over parameter names for a training mode.

    ``ft_top2``/``ft_bottom2`` mark the top/bottom two encoder and decoder
    layers; ``adapters_only`` marks exactly the adapter parameters;
    embeddings are frozen except under ``finetune_all``.
    """
    if mode not in FT_MODES:
        raise ValueError(f"unknown training mode {mode!r}")
    if mode == "finetune_all":
        return lambda name: True
    if mode == "adapters_only":
        return lambda name: name.startswith("adapter.")
    n = min(2, cfg.layers)
    if mode == "ft_top2":
        wanted = {cfg.layers - i - 1 for i in range(n)}
    else:
        wanted = set(range(n))
    prefixes = tuple(f"backbone.{side}.{i}." for side in ("enc", "dec") for i in wanted)
    return lambda name: name.startswith(prefixes)


# --- denoising pretraining ---------------------------------------------------------


def pad_batch(id_lists, pad_id: int = PAD_ID):
    """Right-pad to a rectangle; returns (ids array, lengths array)."""
    lengths = np.array([len(ids) for ids in id_lists], dtype=np.int64)
    width = max(1, int(lengths.max()))
    out = np.full((len(id_lists), width), pad_id, dtype=np.int64)
    for i, ids in enumerate(id_lists):
        out[i, :len(ids)] = ids
    return out, lengths


def pretrain_backbone(token_seqs, cfg: BackboneConfig, steps: int, seed: int = 0,
                      batch_size: int = 8, lr: float = 1e-3, mask_rate: float = 0.15,
                      log=None) -> dict[str, Tensor]:
    """Denoising pretraining: mask 15% of input tokens, reconstruct the text.

    ``token_seqs`` are encoded sentences (no specials).  Returns the trained
    parameter map; with ``steps == 0`` the seeded initialization is returned
    unchanged.  The caller freezes the result by saving it as a checkpoint
    flagged frozen.
    """
    params = init_backbone(cfg, seed=seed)
    if steps == 0:
        return params
    rng = np.random.default_rng(seed + 1)
    seqs = [list(ids)[:cfg.max_tgt_len - 1] for ids in token_seqs if ids]
    if not seqs:
        raise ValueError("pretraining corpus is empty")
    optimizer = ad.Adam(params, lr)
    for step in range(steps):
        batch = [seqs[rng.integers(len(seqs))] for _ in range(batch_size)]
        src, tgt_in, tgt_out = [], [], []
        for ids in batch:
            corrupted = [MASK_ID if rng.random() < mask_rate else t for t in ids]
            src.append(corrupted + [EOS_ID])
            tgt_in.append([PAD_ID] + ids)
            tgt_out.append(ids + [EOS_ID])
        src_ids, src_len = pad_batch(src)
        tin, _ = pad_batch(tgt_in)
        tout, _ = pad_batch(tgt_out)
        loss = sequence_loss(params, cfg, src_ids, src_len, tin, tout)
        if not np.isfinite(loss.data):
            raise FloatingPointError(f"pretraining diverged at step {step}")
        optimizer.zero_grad()
        loss.backward()
        optimizer.step(lr * (1.0 - step / steps))
        if log is not None and (step % 100 == 0 or step == steps - 1):
            log(f"pretrain step {step} loss {float(loss.data):.4f}")
    return params


def masked_reconstruction_accuracy(params, cfg: BackboneConfig, token_seqs,
                                   seed: int = 0, mask_rate: float = 0.15) -> float:
    """Token accuracy of greedy reconstruction on held-out sentences."""
    rng = np.random.default_rng(seed)
    correct = total = 0
    with ad.no_grad():
        for ids in token_seqs:
            ids = list(ids)[:cfg.max_tgt_len - 1]
            if not ids:
                continue
            corrupted = [MASK_ID if rng.random() < mask_rate else t for t in ids]
            src_ids, src_len = pad_batch([corrupted + [EOS_ID]])
            tin, _ = pad_batch([[PAD_ID] + ids])
            enc = encoder_forward(params, cfg, src_ids, src_len)
            dec = decoder_forward(params, cfg, tin, enc, src_len)
            pred = output_logits(params, dec).data[0].argmax(axis=-1)
            gold = np.array(ids + [EOS_ID])
            correct += int((pred[:len(gold)] == gold).sum())
            total += len(gold)
    return correct / max(1, total)
