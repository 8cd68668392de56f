"""Bottleneck adapters: sequential and graph-convolutional variants.

The sequential adapter is a per-position transform ``up(relu(down(LN(h)))) + h``.
The structural variants replace the down-projection with a graph convolution
over the token graph: degree-normalized aggregation with a shared weight, or
per-relation mean aggregation (optionally with basis-decomposed relation
weights).  Zeroing the up-projection makes every variant an exact identity,
which is also how adapters are initialized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graphrep import DEFAULT, TokenGraph

ADAPTER_VARIANTS = ("adapt", "structadapt_gcn", "structadapt_rgcn")
GCN_DEGREE_MODES = ("in_self", "total_self")


@dataclass(frozen=True)
class AdapterConfig:
    """Adapter hyperparameters.

    ``variant`` selects the encoder-side adapter; the decoder side, when
    enabled, always uses the sequential adapter.  ``basis`` > 0 expresses the
    per-relation weights as learned combinations of that many shared basis
    matrices.  ``gcn_degree`` picks how a neighbor's normalization degree is
    computed ("in_self": its own in-degree plus one; "total_self": total
    incident default edges plus one).
    """

    variant: str
    hidden: int
    encoder: bool = True
    decoder: bool = True
    relations: tuple[str, ...] = ("default", "reverse")
    basis: int = 0
    gcn_degree: str = "in_self"

    def __post_init__(self):
        if self.variant not in ADAPTER_VARIANTS:
            raise ValueError(f"unknown adapter variant {self.variant!r}")
        if self.hidden < 1:
            raise ValueError("adapter hidden width must be >= 1")
        if self.gcn_degree not in GCN_DEGREE_MODES:
            raise ValueError(f"unknown gcn_degree {self.gcn_degree!r}")
        if self.basis < 0:
            raise ValueError("basis count must be >= 0")

    def to_dict(self) -> dict:
        return {
            "variant": self.variant, "hidden": self.hidden,
            "encoder": self.encoder, "decoder": self.decoder,
            "relations": list(self.relations), "basis": self.basis,
            "gcn_degree": self.gcn_degree,
        }


def init_adapter_params(cfg: AdapterConfig, d_model: int, layers: int,
                        seed: int = 0) -> dict[str, Tensor]:
    """Adapter parameters under the ``adapter.`` name prefix.

    Up-projections start at zero so a freshly attached adapter is an exact
    identity map.
    """
    rng = np.random.default_rng(seed)
    m, d = cfg.hidden, d_model
    std = 1.0 / np.sqrt(d)
    params: dict[str, Tensor] = {}

    def t(shape, scale=std):
        return Tensor(rng.normal(0.0, scale, size=shape), requires_grad=True)

    def zeros(shape):
        return Tensor(np.zeros(shape), requires_grad=True)

    def ones(shape):
        return Tensor(np.ones(shape), requires_grad=True)

    if cfg.encoder:
        for i in range(layers):
            base = f"adapter.enc.{i}"
            params[f"{base}.ln.scale"] = ones((d,))
            params[f"{base}.ln.shift"] = zeros((d,))
            params[f"{base}.w_up"] = zeros((d, m))
            if cfg.variant == "adapt":
                params[f"{base}.w_down"] = t((m, d))
            elif cfg.variant == "structadapt_gcn":
                params[f"{base}.w_graph"] = t((m, d))
            elif cfg.basis > 0:
                params[f"{base}.basis_coeff"] = t((len(cfg.relations), cfg.basis),
                                                  scale=1.0 / np.sqrt(cfg.basis))
                params[f"{base}.basis_mats"] = t((cfg.basis, m, d))
            else:
                for rel in cfg.relations:
                    params[f"{base}.w_rel.{rel}"] = t((m, d))
    if cfg.decoder:
        for i in range(layers):
            base = f"adapter.dec.{i}"
            params[f"{base}.ln.scale"] = ones((d,))
            params[f"{base}.ln.shift"] = zeros((d,))
            params[f"{base}.w_down"] = t((m, d))
            params[f"{base}.w_up"] = zeros((d, m))
    return params


# --- forward passes -----------------------------------------------------------


def adapt_forward(params, prefix: str, h) -> Tensor:
    """Sequential bottleneck with residual; position-wise, width-preserving."""
    normed = ad.layer_norm(h, params[f"{prefix}.ln.scale"], params[f"{prefix}.ln.shift"])
    mid = ad.relu(ad.matmul(normed, ad.transpose(params[f"{prefix}.w_down"], (1, 0))))
    return ad.add(ad.matmul(mid, ad.transpose(params[f"{prefix}.w_up"], (1, 0))), h)


def gcn_conv(h, arrays, w_graph) -> Tensor:
    """Degree-normalized convolution over default edges plus self loops.

    ``h`` is (N, d) and ``arrays`` the (src, tgt, coeff) triple prepared by
    :func:`conv_arrays`; every position's own row is part of its
    neighborhood, so isolated positions reduce to the self term.
    """
    src, tgt, coeff = arrays
    agg = ad.neighborhood_aggregate(h, src, tgt, coeff, num_out=h.shape[0])
    return ad.matmul(agg, ad.transpose(w_graph, (1, 0)))


def rgcn_conv(h, arrays_by_relation, weights_by_relation) -> Tensor:
    """Per-relation mean aggregation, summed over relations; no self term."""
    out = None
    for rel, (src, tgt, coeff) in arrays_by_relation.items():
        if rel not in weights_by_relation:
            raise ValueError(f"unknown relation id {rel!r}")
        if len(src) == 0:
            continue
        agg = ad.neighborhood_aggregate(h, src, tgt, coeff, num_out=h.shape[0])
        term = ad.matmul(agg, ad.transpose(weights_by_relation[rel], (1, 0)))
        out = term if out is None else ad.add(out, term)
    if out is None:
        out = ad.mul(ad.matmul(h, ad.transpose(next(iter(weights_by_relation.values())), (1, 0))), 0.0)
    return out


def basis_weights(coeff, mats) -> Tensor:
    """Combine basis matrices into per-relation weights: W_r = sum_b a[r,b] B_b."""
    n_basis, m, d = mats.shape
    flat = ad.reshape(mats, (n_basis, m * d))
    return ad.reshape(ad.matmul(coeff, flat), (coeff.shape[0], m, d))


def relation_weights(params, prefix: str, cfg: AdapterConfig) -> dict[str, Tensor]:
    """Per-relation weight map for one layer, resolving basis decomposition."""
    if cfg.basis > 0:
        w_all = basis_weights(params[f"{prefix}.basis_coeff"], params[f"{prefix}.basis_mats"])
        return {rel: w_all[i] for i, rel in enumerate(cfg.relations)}
    return {rel: params[f"{prefix}.w_rel.{rel}"] for rel in cfg.relations}


def structadapt_forward(params, prefix: str, cfg: AdapterConfig, h, graph_batch) -> Tensor:
    """Graph-convolutional adapter over a (B, S, d) hidden state.

    The convolution runs on layer-normalized inputs; the result is projected
    back up and added to the unnormalized residual.
    """
    b, s, d = h.shape
    flat = ad.reshape(h, (b * s, d))
    normed = ad.layer_norm(flat, params[f"{prefix}.ln.scale"], params[f"{prefix}.ln.shift"])
    if cfg.variant == "structadapt_gcn":
        g = gcn_conv(normed, graph_batch.gcn, params[f"{prefix}.w_graph"])
    else:
        g = rgcn_conv(normed, graph_batch.rgcn, relation_weights(params, prefix, cfg))
    up = ad.matmul(ad.relu(g), ad.transpose(params[f"{prefix}.w_up"], (1, 0)))
    return ad.reshape(ad.add(up, flat), (b, s, d))


# --- aggregation arrays -----------------------------------------------------------


@dataclass(frozen=True)
class ConvArrays:
    """Precomputed edge arrays for one token graph."""

    seq_len: int
    gcn: tuple
    rgcn: dict


@dataclass(frozen=True)
class GraphBatch:
    """Edge arrays for a padded batch, positions offset into (B*S) rows."""

    num_rows: int
    gcn: tuple
    rgcn: dict


def conv_arrays(tg: TokenGraph, relations: tuple[str, ...],
                gcn_degree: str = "in_self") -> ConvArrays:
    """Build (src, tgt, coeff) arrays for both convolution types."""
    for _, _, rel in tg.edges:
        if rel not in relations:
            raise ValueError(f"unknown relation id {rel!r}")

    default_in = [(s, t) for s, t, rel in tg.edges if rel == DEFAULT]
    indeg = np.zeros(tg.seq_len, dtype=np.int64)
    outdeg = np.zeros(tg.seq_len, dtype=np.int64)
    for s, t in default_in:
        indeg[t] += 1
        outdeg[s] += 1
    if gcn_degree == "in_self":
        deg = indeg + 1
    else:
        deg = indeg + outdeg + 1

    src = [s for s, _ in default_in] + list(range(tg.seq_len))
    tgt = [t for _, t in default_in] + list(range(tg.seq_len))
    coeff = [1.0 / np.sqrt(deg[t] * deg[s]) for s, t in default_in]
    coeff += [1.0 / deg[v] for v in range(tg.seq_len)]
    gcn = (np.array(src, dtype=np.int64), np.array(tgt, dtype=np.int64),
           np.array(coeff, dtype=np.float64))

    rgcn = {}
    for rel in relations:
        pairs = [(s, t) for s, t, r in tg.edges if r == rel]
        counts = np.zeros(tg.seq_len, dtype=np.int64)
        for _, t in pairs:
            counts[t] += 1
        rgcn[rel] = (
            np.array([s for s, _ in pairs], dtype=np.int64),
            np.array([t for _, t in pairs], dtype=np.int64),
            np.array([1.0 / counts[t] for _, t in pairs], dtype=np.float64),
        )
    return ConvArrays(seq_len=tg.seq_len, gcn=gcn, rgcn=rgcn)


def collate_conv(arrays_list, row_stride: int) -> GraphBatch:
    """Stack per-example arrays into one block-diagonal batch."""
    gcn_src, gcn_tgt, gcn_coeff = [], [], []
    rel_names = arrays_list[0].rgcn.keys() if arrays_list else ()
    rgcn_parts = {rel: ([], [], []) for rel in rel_names}
    for i, arrays in enumerate(arrays_list):
        offset = i * row_stride
        s, t, c = arrays.gcn
        gcn_src.append(s + offset)
        gcn_tgt.append(t + offset)
        gcn_coeff.append(c)
        for rel, (rs, rt, rc) in arrays.rgcn.items():
            rgcn_parts[rel][0].append(rs + offset)
            rgcn_parts[rel][1].append(rt + offset)
            rgcn_parts[rel][2].append(rc)

    def cat(parts, dtype):
        return np.concatenate(parts) if parts else np.array([], dtype=dtype)

    return GraphBatch(
        num_rows=len(arrays_list) * row_stride,
        gcn=(cat(gcn_src, np.int64), cat(gcn_tgt, np.int64), cat(gcn_coeff, np.float64)),
        rgcn={rel: (cat(p[0], np.int64), cat(p[1], np.int64), cat(p[2], np.float64))
              for rel, p in rgcn_parts.items()},
    )


# --- parameter accounting -----------------------------------------------------------


def count_params(params: dict, trainable) -> dict:
    """Exact parameter counts from declared shapes.

    ``trainable`` is a predicate over parameter names; the fraction is
    trainable over the full bundle.
    """
    total = 0
    trained = 0
    for name, p in params.items():
        size = int(np.prod(p.data.shape)) if p.data.shape else 1
        total += size
        if trainable(name):
            trained += size
    return {
        "trainable": trained,
        "total": total,
        "fraction": trained / total if total else 0.0,
    }
