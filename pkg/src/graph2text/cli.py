"""Command-line entry point.

Commands read a flat key=value config file plus ``--set key=value``
overrides, and write their outputs under a run directory together with a
config snapshot, so every run is reproducible from its snapshot and seed.
Experiment commands emit a CSV and render a PNG figure next to it.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import config as cfgmod
from . import plots
from .bpe import Vocabulary, train_vocab
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (
    PipelineConfig,
    load_jsonl,
    pipeline_relations,
    prepare_examples,
    save_jsonl,
    split_records,
)
from .experiments import (
    FINE_TUNE,
    Harness,
    ModelSpec,
    adapt_hidden_matching_rgcn,
    linearization_robustness,
    low_data,
    placement_ablation,
    rows_to_csv,
    sweep_hidden,
    write_text,
)
from .graphrep import (
    build_token_graph,
    dump_token_graph,
    linearize,
    relation_table,
    symbol_tokenization,
    to_unlabeled,
    tokenize_linearization,
)
from .metrics import bleu, breakdown, chrf, sentence_chrf
from .model import ModelBundle
from .penman import PenmanError, graph_stats, normalize_inverse_roles, parse_penman
from .synth import generate_corpus
from .training import beam_decode, evaluate_greedy, train
from .transformer import masked_reconstruction_accuracy, pretrain_backbone


def _read_graph_texts(path: str) -> list[str]:
    """PENMAN graphs from a raw text file (blank-line separated) or JSONL."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return [r.amr for r in load_jsonl(path)]
    blocks = [b.strip() for b in text.split("\n\n")]
    return [b for b in blocks if b]


def _resolve(args) -> dict:
    return cfgmod.resolve_config(getattr(args, "config", None), getattr(args, "set", []) or [])


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _snapshot(cfg: dict, out: Path) -> None:
    cfgmod.save_config(cfg, out / "config.snapshot")


def _load_dataset(cfg: dict):
    path = cfg["data.dataset"]
    if not path:
        raise cfgmod.ConfigError("data.dataset is not set")
    return split_records(load_jsonl(path))


def _load_vocab(cfg: dict) -> Vocabulary:
    path = cfg["data.vocab"]
    if not path:
        raise cfgmod.ConfigError("data.vocab is not set")
    return Vocabulary.load(path)


def _build_bundle(cfg: dict, vocab: Vocabulary, records_train) -> ModelBundle:
    relations = pipeline_relations(cfg["train.variant"], records_train)
    backbone_cfg = cfgmod.backbone_config(cfg, vocab.size)
    adapter_cfg = cfgmod.adapter_config(cfg, relations)
    bundle = ModelBundle.build(backbone_cfg, adapter_cfg, seed=cfg["train.seed"])
    if cfg["data.backbone"]:
        bundle.load_backbone(cfg["data.backbone"])
    return bundle


def _pipe_from_cfg(cfg: dict, records_train) -> PipelineConfig:
    return PipelineConfig(
        linearization=cfg["train.linearization"], variant=cfg["train.variant"],
        rep=cfg["train.rep"], gcn_degree=cfg["adapter.gcn_degree"],
        relations=pipeline_relations(cfg["train.variant"], records_train),
        seed=cfg["train.seed"],
    )


# --- inspection commands ----------------------------------------------------------


def cmd_parse(args) -> int:
    status = 0
    for i, text in enumerate(_read_graph_texts(args.file)):
        try:
            g = parse_penman(text)
            print(f"graph {i}: ok nodes={len(g.nodes)} edges={len(g.edges)} root={g.root}")
        except PenmanError as exc:
            print(f"graph {i}: error: {exc}")
            status = 1
    return status


def cmd_stats(args) -> int:
    for i, text in enumerate(_read_graph_texts(args.file)):
        st = graph_stats(parse_penman(text))
        print(f"graph {i}: size {st['size']} diameter {st['diameter']} "
              f"reentrancies {st['reentrancies']}")
    return 0


def cmd_linearize(args) -> int:
    for text in _read_graph_texts(args.file):
        lin = linearize(parse_penman(text), mode=args.mode, variant=args.variant,
                        seed=args.seed)
        print(" ".join(lin.symbols))
    return 0


def cmd_graphify(args) -> int:
    cfg = _resolve(args)
    vocab = Vocabulary.load(cfg["data.vocab"]) if cfg["data.vocab"] else None
    for text in _read_graph_texts(args.file):
        g = parse_penman(text)
        lin = linearize(g, mode=args.mode, variant=args.variant, seed=args.seed)
        normalized = normalize_inverse_roles(g)
        u = to_unlabeled(normalized)
        if vocab is None:
            tok = symbol_tokenization(lin)
        else:
            tok = tokenize_linearization(lin, vocab.encode)
        relations = None
        if args.variant == "nodes_only":
            roles = tuple(sorted({role for _, role, _ in normalized.edges}))
            relations = relation_table("nodes_only", roles)
        tg = build_token_graph(u, lin, tok, rep=args.rep, relations=relations)
        sys.stdout.write(dump_token_graph(tg))
    return 0


def cmd_generate(args) -> int:
    cfg = _resolve(args)
    records = generate_corpus(
        n=cfg["data.records"], seed=cfg["train.seed"],
        max_nodes=cfg["data.max_nodes"], reentrancy_rate=cfg["data.reentrancy_rate"])
    save_jsonl(records, args.out)
    counts = {}
    for r in records:
        counts[r.split] = counts.get(r.split, 0) + 1
    print(f"wrote {len(records)} records to {args.out} " +
          " ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return 0


def cmd_make_vocab(args) -> int:
    cfg = _resolve(args)
    records = load_jsonl(cfg["data.dataset"])
    corpus = [r.text for r in records]
    for r in records:
        corpus.extend(linearize(parse_penman(r.amr)).symbols)
    vocab = train_vocab(corpus, args.size)
    vocab.save(args.out)
    print(f"trained vocabulary of {vocab.size} ids ({len(vocab.merges)} merges) -> {args.out}")
    return 0


def cmd_params(args) -> int:
    cfg = _resolve(args)
    vocab_size = cfg["backbone.vocab_size"]
    if not vocab_size and cfg["data.vocab"]:
        vocab_size = Vocabulary.load(cfg["data.vocab"]).size
    backbone_cfg = cfgmod.backbone_config(cfg, vocab_size or 512)
    relations = pipeline_relations("nodes_and_edges")
    adapter_cfg = cfgmod.adapter_config(cfg, relations)
    bundle = ModelBundle.build(backbone_cfg, adapter_cfg, seed=cfg["train.seed"])
    counts = bundle.count(cfg["train.mode"])
    print(json.dumps(counts, sort_keys=True))
    return 0


# --- training commands ----------------------------------------------------------


def cmd_pretrain(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args)
    _snapshot(cfg, out)
    vocab = _load_vocab(cfg)
    splits = _load_dataset(cfg)
    texts = [r.text for r in splits["train"]]
    held_out = [r.text for r in splits["dev"]] or texts[:50]
    backbone_cfg = cfgmod.backbone_config(cfg, vocab.size)

    log_path = out / "pretrain.log"
    with open(log_path, "w", encoding="utf-8") as log_fh:
        def log(msg):
            print(msg)
            log_fh.write(msg + "\n")

        started = time.time()
        params = pretrain_backbone([vocab.encode(t) for t in texts], backbone_cfg,
                                   steps=cfg["train.max_steps"], seed=cfg["train.seed"],
                                   batch_size=cfg["train.batch_size"], log=log)
        accuracy = masked_reconstruction_accuracy(
            params, backbone_cfg, [vocab.encode(t) for t in held_out[:200]])
        log(f"held-out reconstruction accuracy {accuracy:.4f} "
            f"({time.time() - started:.1f}s)")
    save_checkpoint(out / "backbone.ckpt", params,
                    meta={"frozen": True, "backbone": backbone_cfg.to_dict(),
                          "reconstruction_accuracy": accuracy})
    print(f"saved frozen backbone to {out / 'backbone.ckpt'}")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args)
    _snapshot(cfg, out)
    vocab = _load_vocab(cfg)
    splits = _load_dataset(cfg)
    bundle = _build_bundle(cfg, vocab, splits["train"])
    pipe = _pipe_from_cfg(cfg, splits["train"])
    train_prep = prepare_examples(splits["train"], vocab, pipe)
    dev_prep = prepare_examples(splits["dev"], vocab, pipe)
    train_cfg = cfgmod.train_config(cfg)

    with open(out / "train.log", "w", encoding="utf-8") as log_fh:
        def log(msg):
            print(msg)
            log_fh.write(msg + "\n")

        result = train(bundle, train_prep, dev_prep, train_cfg, vocab, log_fn=log)
    bundle.save(out / "checkpoint.bin", meta={"mode": train_cfg.mode})
    counts = bundle.count(train_cfg.mode)
    metrics = {
        "best_dev_bleu": result.best_dev_bleu,
        "best_epoch": result.best_epoch,
        "steps": result.steps,
        "epochs": result.epochs,
        "wall_time": result.wall_time,
        "trainable": counts["trainable"],
        "total": counts["total"],
        "trainable_fraction": counts["fraction"],
    }
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    print(json.dumps(metrics, sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args)
    _snapshot(cfg, out)
    vocab = _load_vocab(cfg)
    splits = _load_dataset(cfg)
    records = splits[args.split]
    if not records:
        raise cfgmod.ConfigError(f"no records in split {args.split!r}")
    pipe = _pipe_from_cfg(cfg, splits["train"])
    prepared = prepare_examples(records, vocab, pipe)
    refs = [e.text for e in prepared]
    stats = [e.stats for e in prepared]

    started = time.time()
    runs: dict[str, list[str]] = {}
    fractions: dict[str, float] = {}
    for item in args.checkpoint:
        name, _, path = item.partition("=")
        if not path:
            name, path = "model", name
        bundle = _build_bundle(cfg, vocab, splits["train"])
        arrays, _ = load_checkpoint(path)
        bundle.restore(arrays)
        fractions[name] = bundle.count(cfg["train.mode"])["fraction"]
        if args.greedy:
            _, hyps = evaluate_greedy(bundle, prepared, vocab)
        else:
            hyps = [vocab.decode(beam_decode(bundle, e, beam=cfg["train.beam"]))
                    for e in prepared]
        runs[name] = hyps

    baseline = next(iter(runs)) if len(runs) > 1 else None
    report = {
        "split": args.split,
        "bleu": {name: bleu(hyps, refs) for name, hyps in runs.items()},
        "chrf": {name: chrf(hyps, refs) for name, hyps in runs.items()},
        "per_example_chrf": {
            name: [round(sentence_chrf(h, r), 4) for h, r in zip(hyps, refs)]
            for name, hyps in runs.items()},
        "trainable_fraction": fractions,
        "breakdown": breakdown(runs, refs, stats, baseline=baseline),
        "wall_time": None,  # filled below
    }
    report["wall_time"] = time.time() - started
    (out / "metrics.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")

    rows = []
    for name, hyps in runs.items():
        per_example = [sentence_chrf(h, r) for h, r in zip(hyps, refs)]
        rows.append([name, float(report["bleu"][name]), float(report["chrf"][name]),
                     float(sum(per_example) / len(per_example))])
    csv_text = rows_to_csv(["run", "bleu", "chrf", "mean_sentence_chrf"], rows)
    write_text(out / "metrics.csv", csv_text)
    plots.render_breakdown(report["breakdown"], out / "breakdown.png")
    print(json.dumps({"bleu": report["bleu"], "chrf": report["chrf"]}, sort_keys=True))
    return 0


# --- experiment commands ----------------------------------------------------------


def _make_harness(cfg: dict, log_fn=print) -> Harness:
    vocab = _load_vocab(cfg)
    splits = _load_dataset(cfg)
    backbone_cfg = cfgmod.backbone_config(cfg, vocab.size)
    if not cfg["data.backbone"]:
        raise cfgmod.ConfigError("data.backbone must point to a pretrained checkpoint")
    state, _ = load_checkpoint(cfg["data.backbone"])
    return Harness(
        train_records=splits["train"], dev_records=splits["dev"], vocab=vocab,
        backbone_cfg=backbone_cfg, backbone_state=state,
        base_train=cfgmod.train_config(cfg), gcn_degree=cfg["adapter.gcn_degree"],
        log_fn=log_fn,
    )


def _parse_specs(raw: str, default_hidden: int) -> list[ModelSpec]:
    specs = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        name, _, width = item.partition(":")
        if name == "fine-tune":
            specs.append(FINE_TUNE)
            continue
        if width:
            hidden = int(width)
        elif name == "adapt" and default_hidden % 4 == 0:
            hidden = adapt_hidden_matching_rgcn(default_hidden)
        else:
            hidden = default_hidden
        specs.append(ModelSpec(name=f"{name}-m{hidden}", variant=name, hidden=hidden))
    return specs


def cmd_sweep(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args)
    _snapshot(cfg, out)
    harness = _make_harness(cfg)
    dims = [int(x) for x in args.dims.split(",")]
    seeds = tuple(range(args.seeds))
    header, rows = sweep_hidden(harness, dims, seeds=seeds,
                                variants=tuple(args.variants.split(",")))
    write_text(out / "sweep.csv", rows_to_csv(header, rows))
    plots.render_sweep(rows, out / "sweep.png")
    print(f"wrote {out / 'sweep.csv'}")
    return 0


def cmd_lowdata(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args)
    _snapshot(cfg, out)
    harness = _make_harness(cfg)
    sizes = [int(x) for x in args.sizes.split(",")]
    specs = _parse_specs(args.specs, cfg["adapter.hidden"])
    header, rows = low_data(harness, sizes, samples=args.samples, seeds=args.seeds,
                            specs=specs)
    write_text(out / "lowdata.csv", rows_to_csv(header, rows))
    plots.render_low_data(rows, out / "lowdata.png")
    print(f"wrote {out / 'lowdata.csv'}")
    return 0


def cmd_robustness(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args)
    _snapshot(cfg, out)
    harness = _make_harness(cfg)
    specs = _parse_specs(args.specs, cfg["adapter.hidden"])
    header, rows = linearization_robustness(
        harness, specs, modes=tuple(args.modes.split(",")),
        seeds=tuple(range(args.seeds)))
    write_text(out / "robustness.csv", rows_to_csv(header, rows))
    plots.render_robustness(rows, out / "robustness.png")
    print(f"wrote {out / 'robustness.csv'}")
    return 0


def cmd_ablation(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args)
    _snapshot(cfg, out)
    harness = _make_harness(cfg)
    header, rows = placement_ablation(harness, hidden=cfg["adapter.hidden"],
                                      seeds=tuple(range(args.seeds)))
    write_text(out / "ablation.csv", rows_to_csv(header, rows))
    plots.render_ablation(rows, out / "ablation.png")
    print(f"wrote {out / 'ablation.csv'}")
    return 0


# --- argument wiring ----------------------------------------------------------


def _add_common(parser):
    parser.add_argument("-c", "--config", help="flat key=value config file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config entry (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graph2text",
        description="Graph-to-text laboratory: parsing, adapters, experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse PENMAN graphs and report errors")
    p.add_argument("file")
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("stats", help="size/diameter/reentrancies per graph")
    p.add_argument("file")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("linearize", help="print linearization symbols")
    p.add_argument("file")
    p.add_argument("--mode", default="canon", choices=["canon", "reconf", "random"])
    p.add_argument("--variant", default="nodes_and_edges",
                   choices=["nodes_and_edges", "nodes_only"])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_linearize)

    p = sub.add_parser("graphify", help="dump token-graph edge lists")
    _add_common(p)
    p.add_argument("file")
    p.add_argument("--mode", default="canon", choices=["canon", "reconf", "random"])
    p.add_argument("--variant", default="nodes_and_edges",
                   choices=["nodes_and_edges", "nodes_only"])
    p.add_argument("--rep", default="rep1", choices=["rep1", "rep2", "rep3", "complete"])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_graphify)

    p = sub.add_parser("generate", help="generate a synthetic corpus (JSONL)")
    _add_common(p)
    p.add_argument("-o", "--out", required=True, help="output JSONL path")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("make-vocab", help="train the subword vocabulary")
    _add_common(p)
    p.add_argument("-o", "--out", required=True, help="output vocabulary path")
    p.add_argument("--size", type=int, default=800, help="target vocabulary size")
    p.set_defaults(fn=cmd_make_vocab)

    p = sub.add_parser("params", help="print trainable parameter counts")
    _add_common(p)
    p.set_defaults(fn=cmd_params)

    p = sub.add_parser("pretrain", help="denoising-pretrain the backbone")
    _add_common(p)
    p.add_argument("-o", "--out", required=True, help="run directory")
    p.set_defaults(fn=cmd_pretrain)

    p = sub.add_parser("train", help="train a model per the config")
    _add_common(p)
    p.add_argument("-o", "--out", required=True, help="run directory")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="decode a split and score it")
    _add_common(p)
    p.add_argument("-o", "--out", required=True, help="run directory")
    p.add_argument("--checkpoint", action="append", required=True,
                   metavar="[NAME=]PATH", help="model checkpoint (repeatable)")
    p.add_argument("--split", default="test", choices=["train", "dev", "test"])
    p.add_argument("--greedy", action="store_true", help="greedy instead of beam")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("sweep", help="hidden-width / parameter sweep")
    _add_common(p)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--dims", default="8,16,32")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--variants", default="adapt,structadapt_rgcn")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("lowdata", help="low-data training curves")
    _add_common(p)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--sizes", default="250,500,1000")
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--seeds", type=int, default=2)
    p.add_argument("--specs", default="adapt,structadapt_rgcn")
    p.set_defaults(fn=cmd_lowdata)

    p = sub.add_parser("robustness", help="linearization robustness comparison")
    _add_common(p)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--modes", default="canon,reconf,random")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--specs", default="fine-tune,adapt,structadapt_rgcn")
    p.set_defaults(fn=cmd_robustness)

    p = sub.add_parser("ablation", help="encoder/decoder placement ablation")
    _add_common(p)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--seeds", type=int, default=1)
    p.set_defaults(fn=cmd_ablation)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (cfgmod.ConfigError, PenmanError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
