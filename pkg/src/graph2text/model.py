"""Model bundle: backbone weights plus optional adapter weights and configs.

The bundle is the unit that is trained, checkpointed, and decoded from.
Adapter parameters live under the ``adapter.`` name prefix so trainable-set
selection is name-based and auditable in checkpoints.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .adapters import (
    AdapterConfig,
    adapt_forward,
    count_params,
    init_adapter_params,
    structadapt_forward,
)
from .autodiff import Tensor
from .bpe import EOS_ID, PAD_ID
from .checkpoint import load_checkpoint, save_checkpoint
from .data import Batch
from .transformer import (
    BackboneConfig,
    decoder_forward,
    encoder_forward,
    init_backbone,
    output_logits,
    sequence_loss,
    trainable_mask,
)


class ModelBundle:
    """Backbone + adapters with a flat, named parameter map."""

    def __init__(self, backbone_cfg: BackboneConfig, adapter_cfg: AdapterConfig | None,
                 params: dict[str, Tensor]):
        self.backbone_cfg = backbone_cfg
        self.adapter_cfg = adapter_cfg
        self.params = params

    @classmethod
    def build(cls, backbone_cfg: BackboneConfig, adapter_cfg: AdapterConfig | None = None,
              seed: int = 0) -> "ModelBundle":
        params = init_backbone(backbone_cfg, seed=seed)
        if adapter_cfg is not None:
            params.update(init_adapter_params(adapter_cfg, backbone_cfg.d_model,
                                              backbone_cfg.layers, seed=seed + 1))
        return cls(backbone_cfg, adapter_cfg, params)

    # -- adapter wiring ------------------------------------------------------

    def _hook(self, graph_batch):
        cfg = self.adapter_cfg
        if cfg is None:
            return None

        def hook(side: str, layer: int, h):
            if side == "enc":
                if not cfg.encoder:
                    return h
                prefix = f"adapter.enc.{layer}"
                if cfg.variant == "adapt":
                    return adapt_forward(self.params, prefix, h)
                if graph_batch is None:
                    raise ValueError("structural adapter needs a token-graph batch")
                return structadapt_forward(self.params, prefix, cfg, h, graph_batch)
            if not cfg.decoder:
                return h
            return adapt_forward(self.params, f"adapter.dec.{layer}", h)

        return hook

    # -- forward -----------------------------------------------------------------

    def loss(self, batch: Batch):
        """Mean token negative log-likelihood on a teacher-forced batch."""
        return sequence_loss(self.params, self.backbone_cfg, batch.src, batch.src_len,
                             batch.tgt_in, batch.tgt_out, self._hook(batch.graphs))

    def encode(self, src, src_len, graph_batch=None, collect_layers: bool = False):
        return encoder_forward(self.params, self.backbone_cfg, src, src_len,
                               self._hook(graph_batch), collect_layers=collect_layers)

    def decode_logits(self, tgt_in, enc_out, src_len):
        dec = decoder_forward(self.params, self.backbone_cfg, tgt_in, enc_out, src_len,
                              self._hook(None))
        return output_logits(self.params, dec)

    def greedy_decode(self, batch: Batch, max_len: int | None = None) -> list[list[int]]:
        """Batched greedy decoding; returns token ids without the end marker."""
        max_len = max_len or (self.backbone_cfg.max_tgt_len - 1)
        n = batch.src.shape[0]
        with ad.no_grad():
            enc = self.encode(batch.src, batch.src_len, batch.graphs)
            out = [[] for _ in range(n)]
            alive = np.ones(n, dtype=bool)
            tgt = np.full((n, 1), PAD_ID, dtype=np.int64)
            for _ in range(max_len):
                logits = self.decode_logits(tgt, enc, batch.src_len).data[:, -1, :]
                nxt = logits.argmax(axis=-1)
                for i in range(n):
                    if alive[i]:
                        if nxt[i] == EOS_ID:
                            alive[i] = False
                        else:
                            out[i].append(int(nxt[i]))
                if not alive.any():
                    break
                tgt = np.concatenate([tgt, nxt[:, None]], axis=1)
        return out

    def beam_score_fn(self, src, src_len, graph_batch=None):
        """Log-probability scorer over prefix batches, for beam search."""
        with ad.no_grad():
            enc = self.encode(src, src_len, graph_batch)
        enc_data = enc.data

        def score_batch(prefixes: list[list[int]]) -> np.ndarray:
            n = len(prefixes)
            width = 1 + max(len(p) for p in prefixes)
            tgt = np.full((n, width), PAD_ID, dtype=np.int64)
            for i, p in enumerate(prefixes):
                tgt[i, 1:1 + len(p)] = p
            with ad.no_grad():
                enc_rep = Tensor(np.repeat(enc_data, n, axis=0))
                lengths = np.repeat(src_len, n)
                logits = self.decode_logits(tgt, enc_rep, lengths).data
            rows = logits[np.arange(n), [len(p) for p in prefixes], :]
            shifted = rows - rows.max(axis=-1, keepdims=True)
            return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))

        return score_batch

    # -- parameter management ------------------------------------------------------

    def trainable(self, mode: str):
        return trainable_mask(mode, self.backbone_cfg)

    def trainable_params(self, mode: str) -> dict[str, Tensor]:
        predicate = self.trainable(mode)
        return {name: p for name, p in self.params.items() if predicate(name)}

    def count(self, mode: str) -> dict:
        return count_params(self.params, self.trainable(mode))

    def backbone_state(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()
                if name.startswith("backbone.")}

    def load_backbone(self, path) -> dict:
        """Load pretrained backbone weights from a checkpoint; returns its meta."""
        arrays, meta = load_checkpoint(path)
        for name, array in arrays.items():
            if name not in self.params:
                raise ValueError(f"checkpoint parameter {name!r} not in model")
            if self.params[name].data.shape != array.shape:
                raise ValueError(f"shape mismatch for {name!r}")
            self.params[name].data = array.astype(self.params[name].data.dtype)
        return meta

    def save(self, path, meta: dict | None = None) -> None:
        info = {
            "backbone": self.backbone_cfg.to_dict(),
            "adapter": self.adapter_cfg.to_dict() if self.adapter_cfg else None,
        }
        info.update(meta or {})
        save_checkpoint(path, self.params, meta=info)

    def snapshot(self, names=None) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()
                if names is None or name in names}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        for name, array in snapshot.items():
            self.params[name].data = array.copy()
