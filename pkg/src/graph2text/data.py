"""Dataset records, JSONL persistence, and batch preparation.

A record is (amr, text, split).  Preparation parses the graph, linearizes it
under the configured mode/variant, tokenizes symbols and target text, and
precomputes the convolution edge arrays so training touches no graph code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .adapters import ConvArrays, collate_conv, conv_arrays
from .bpe import EOS_ID, PAD_ID, Vocabulary
from .graphrep import (
    build_token_graph,
    linearize,
    relation_table,
    to_unlabeled,
    tokenize_linearization,
)
from .penman import graph_stats, normalize_inverse_roles, parse_penman

SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class DatasetRecord:
    amr: str
    text: str
    split: str = "train"


def save_jsonl(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps({"amr": r.amr, "text": r.text, "split": r.split},
                                ensure_ascii=False) + "\n")


def load_jsonl(path) -> list[DatasetRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if not str(obj.get("text", "")).strip():
                raise ValueError(f"{path}:{lineno}: record has empty text")
            records.append(DatasetRecord(amr=obj["amr"], text=obj["text"],
                                         split=obj.get("split", "train")))
    return records


def split_records(records) -> dict[str, list[DatasetRecord]]:
    out: dict[str, list[DatasetRecord]] = {s: [] for s in SPLITS}
    for r in records:
        out.setdefault(r.split, []).append(r)
    return out


def observed_roles(records) -> tuple[str, ...]:
    """Normalized role labels appearing in a record set (training split)."""
    roles = set()
    for r in records:
        g = normalize_inverse_roles(parse_penman(r.amr))
        roles.update(role for _, role, _ in g.edges)
    return tuple(sorted(roles))


@dataclass(frozen=True)
class PreparedExample:
    src_ids: tuple[int, ...]
    tgt_ids: tuple[int, ...]
    conv: ConvArrays
    stats: dict
    text: str


@dataclass(frozen=True)
class PipelineConfig:
    """How graphs become model inputs."""

    linearization: str = "canon"
    variant: str = "nodes_and_edges"
    rep: str = "rep1"
    gcn_degree: str = "in_self"
    relations: tuple[str, ...] = ("default", "reverse")
    seed: int = 0


def prepare_example(record: DatasetRecord, vocab: Vocabulary, pipe: PipelineConfig,
                    index: int = 0) -> PreparedExample:
    g = parse_penman(record.amr)
    lin = linearize(g, mode=pipe.linearization, variant=pipe.variant,
                    seed=pipe.seed + index)
    u = to_unlabeled(normalize_inverse_roles(g))
    tok = tokenize_linearization(lin, vocab.encode, n_special_tail=1)
    tg = build_token_graph(u, lin, tok, rep=pipe.rep, relations=pipe.relations)
    conv = conv_arrays(tg, pipe.relations, gcn_degree=pipe.gcn_degree)

    src_ids = []
    for symbol in lin.symbols:
        src_ids.extend(vocab.encode(symbol))
    src_ids.append(EOS_ID)
    tgt_ids = vocab.encode(record.text) + [EOS_ID]
    return PreparedExample(
        src_ids=tuple(src_ids), tgt_ids=tuple(tgt_ids), conv=conv,
        stats=graph_stats(g), text=record.text,
    )


def prepare_examples(records, vocab: Vocabulary, pipe: PipelineConfig) -> list[PreparedExample]:
    return [prepare_example(r, vocab, pipe, index=i) for i, r in enumerate(records)]


def pipeline_relations(variant: str, records=None) -> tuple[str, ...]:
    """Relation table for a variant; nodes_only needs the training records."""
    if variant == "nodes_and_edges":
        return relation_table(variant)
    return relation_table(variant, observed_roles(records or ()))


@dataclass(frozen=True)
class Batch:
    src: np.ndarray        # (B, S) int64
    src_len: np.ndarray    # (B,)
    tgt_in: np.ndarray     # (B, T)
    tgt_out: np.ndarray    # (B, T) with PAD on padding
    graphs: object         # GraphBatch aligned with src padding
    texts: tuple[str, ...]


def collate(examples) -> Batch:
    src_width = max(len(e.src_ids) for e in examples)
    tgt_width = max(len(e.tgt_ids) for e in examples)
    n = len(examples)
    src = np.full((n, src_width), PAD_ID, dtype=np.int64)
    tgt_in = np.full((n, tgt_width), PAD_ID, dtype=np.int64)
    tgt_out = np.full((n, tgt_width), PAD_ID, dtype=np.int64)
    src_len = np.zeros(n, dtype=np.int64)
    for i, e in enumerate(examples):
        src[i, :len(e.src_ids)] = e.src_ids
        src_len[i] = len(e.src_ids)
        tgt_in[i, 0] = PAD_ID
        tgt_in[i, 1:len(e.tgt_ids)] = e.tgt_ids[:-1]
        tgt_out[i, :len(e.tgt_ids)] = e.tgt_ids
    graphs = collate_conv([e.conv for e in examples], row_stride=src_width)
    return Batch(src=src, src_len=src_len, tgt_in=tgt_in, tgt_out=tgt_out,
                 graphs=graphs, texts=tuple(e.text for e in examples))
