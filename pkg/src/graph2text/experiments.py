"""Controlled experiment harnesses: hidden-width sweep, low-data curves,
linearization robustness, and encoder/decoder placement ablation.

Every harness emits one CSV row per configuration with means and standard
deviations over seeds, writes a rendered figure next to the CSV, and is
byte-deterministic for a fixed seed set.
"""

from __future__ import annotations

import csv
import io
import random
import time
from dataclasses import dataclass, replace

import numpy as np

from .adapters import AdapterConfig
from .bpe import Vocabulary
from .data import PipelineConfig, prepare_examples
from .model import ModelBundle
from .training import TrainConfig, evaluate_greedy, train
from .transformer import BackboneConfig


@dataclass(frozen=True)
class ModelSpec:
    """A named model configuration to train and score."""

    name: str
    variant: str | None  # None trains the backbone itself (no adapter)
    hidden: int = 16
    encoder: bool = True
    decoder: bool = True
    mode: str = "adapters_only"
    basis: int = 0


FINE_TUNE = ModelSpec(name="fine-tune", variant=None, mode="finetune_all")


def adapt_hidden_matching_rgcn(hidden: int) -> int:
    """Sequential-adapter width with the same trainable count as a
    relational-conv adapter of width ``hidden`` (two relations).

    Per encoder layer the relational adapter holds 3*m*d + 2*d parameters and
    its decoder side 2*m*d + 2*d, against 2*m_a*d + 2*d per layer for the
    sequential adapter on both sides: equality means m_a = 5*m/4.
    """
    if hidden % 4 != 0:
        raise ValueError("hidden must be divisible by 4 for an exact match")
    return 5 * hidden // 4


def single_side_hidden(hidden: int) -> int:
    """Encoder-only (or decoder-only) width matching an enc+dec adapter.

    Per layer an adapter holds 2*m*d + 2*d parameters, so halving the number
    of adapted stacks doubles the width: m' = 2*m + 1 (the +1 absorbs the
    layer-norm pair, independent of d).
    """
    return 2 * hidden + 1


class Harness:
    """Shared state for experiment runs: data, vocabulary, frozen backbone."""

    def __init__(self, train_records, dev_records, vocab: Vocabulary,
                 backbone_cfg: BackboneConfig, backbone_state: dict,
                 base_train: TrainConfig, gcn_degree: str = "in_self",
                 log_fn=None):
        self.train_records = list(train_records)
        self.dev_records = list(dev_records)
        self.vocab = vocab
        self.backbone_cfg = backbone_cfg
        self.backbone_state = backbone_state
        self.base_train = base_train
        self.gcn_degree = gcn_degree
        self.log_fn = log_fn
        self._prepared: dict = {}

    def log(self, msg: str) -> None:
        if self.log_fn is not None:
            self.log_fn(msg)

    def prepared(self, split: str, linearization: str, variant: str, rep: str,
                 records=None):
        pipe = PipelineConfig(linearization=linearization, variant=variant,
                              rep=rep, gcn_degree=self.gcn_degree)
        if records is not None:  # explicit subsets (low-data runs) are not cached
            return prepare_examples(records, self.vocab, pipe)
        key = (split, linearization, variant, rep)
        if key not in self._prepared:
            source = self.train_records if split == "train" else self.dev_records
            self._prepared[key] = prepare_examples(source, self.vocab, pipe)
        return self._prepared[key]

    def build_bundle(self, spec: ModelSpec, seed: int) -> ModelBundle:
        adapter_cfg = None
        if spec.variant is not None:
            adapter_cfg = AdapterConfig(
                variant=spec.variant, hidden=spec.hidden, encoder=spec.encoder,
                decoder=spec.decoder, basis=spec.basis, gcn_degree=self.gcn_degree)
        bundle = ModelBundle.build(self.backbone_cfg, adapter_cfg, seed=seed)
        bundle.restore(self.backbone_state)
        return bundle

    def run(self, spec: ModelSpec, linearization: str = "canon",
            rep: str = "rep1", seed: int = 0, train_records=None) -> dict:
        """Train one configuration and score it on the dev split (greedy)."""
        started = time.time()
        cfg = replace(self.base_train, mode=spec.mode, seed=seed,
                      linearization=linearization, rep=rep)
        train_prep = self.prepared("train", linearization, cfg.variant, rep,
                                   records=train_records)
        dev_prep = self.prepared("dev", linearization, cfg.variant, rep)
        bundle = self.build_bundle(spec, seed)
        result = train(bundle, train_prep, dev_prep, cfg, self.vocab,
                       log_fn=self.log_fn)
        counts = bundle.count(spec.mode)
        dev_bleu, hyps = evaluate_greedy(bundle, dev_prep, self.vocab)
        self.log(f"run {spec.name} lin={linearization} seed={seed} "
                 f"dev_bleu={dev_bleu:.2f} steps={result.steps}")
        return {
            "spec": spec.name,
            "linearization": linearization,
            "seed": seed,
            "dev_bleu": dev_bleu,
            "hyps": hyps,
            "trainable": counts["trainable"],
            "fraction": counts["fraction"],
            "steps": result.steps,
            "wall_time": time.time() - started,
        }


# --- CSV helpers ---------------------------------------------------------------


def format_float(x: float) -> str:
    return f"{x:.4f}"


def rows_to_csv(header, rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return buffer.getvalue()


def write_text(path, content: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(content)


def mean_sd(values) -> tuple[float, float]:
    arr = np.asarray(list(values), dtype=np.float64)
    sd = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return float(arr.mean()), sd


# --- harnesses -------------------------------------------------------------------


def sweep_hidden(harness: Harness, dims, seeds=(0,), variants=("adapt", "structadapt_rgcn")):
    """Dev BLEU as a function of adapter width (trainable-parameter budget)."""
    rows = []
    for variant in variants:
        for hidden in dims:
            spec = ModelSpec(name=f"{variant}-m{hidden}", variant=variant, hidden=hidden)
            results = [harness.run(spec, seed=s) for s in seeds]
            mean, sd = mean_sd(r["dev_bleu"] for r in results)
            rows.append([variant, hidden, results[0]["trainable"],
                         float(results[0]["fraction"]), len(seeds), mean, sd])
    header = ["variant", "hidden", "trainable", "fraction", "seeds", "bleu_mean", "bleu_sd"]
    return header, rows


def schedule_low_data(sizes, samples: int = 5, seeds: int = 2):
    """Run plan: ``samples`` seeded subsamples times ``seeds`` training seeds."""
    plan = []
    for size in sizes:
        for sample in range(samples):
            for seed in range(seeds):
                plan.append({"size": size, "sample": sample, "seed": seed})
    return plan


def low_data(harness: Harness, sizes, samples: int = 5, seeds: int = 2,
             specs=(FINE_TUNE,)):
    """Average dev BLEU over subsample x seed pairs for each training size."""
    rows = []
    for spec in specs:
        for size in sizes:
            if size > len(harness.train_records):
                raise ValueError(f"subsample size {size} exceeds the training set")
            scores = []
            for item in schedule_low_data([size], samples, seeds):
                rng = random.Random(10_000 + 7 * item["size"] + item["sample"])
                subset = rng.sample(harness.train_records, item["size"])
                result = harness.run(spec, seed=item["seed"], train_records=subset)
                scores.append(result["dev_bleu"])
            mean, sd = mean_sd(scores)
            rows.append([spec.name, size, samples * seeds, mean, sd])
    header = ["spec", "train_size", "runs", "bleu_mean", "bleu_sd"]
    return header, rows


def linearization_robustness(harness: Harness, specs, modes=("canon", "reconf", "random"),
                             seeds=(0,)):
    """Dev BLEU per linearization mode, with deltas against the first spec."""
    raw: dict[tuple[str, str], tuple[float, float]] = {}
    for spec in specs:
        for mode in modes:
            results = [harness.run(spec, linearization=mode, seed=s) for s in seeds]
            raw[(spec.name, mode)] = mean_sd(r["dev_bleu"] for r in results)
    baseline = specs[0].name
    rows = []
    for spec in specs:
        for mode in modes:
            mean, sd = raw[(spec.name, mode)]
            delta = mean - raw[(baseline, mode)][0]
            rows.append([spec.name, mode, len(seeds), mean, sd, delta])
    header = ["spec", "linearization", "seeds", "bleu_mean", "bleu_sd", "delta_vs_" + baseline]
    return header, rows


def placement_ablation(harness: Harness, hidden: int, seeds=(0,)):
    """Encoder-only / decoder-only / both, at equal trainable counts.

    Single-side widths are solved in closed form so that every row trains
    exactly the same number of parameters; the counts column comes from the
    live bundles, making the equality auditable.
    """
    wide = single_side_hidden(hidden)
    specs = [
        ModelSpec(name="adapt-enc", variant="adapt", hidden=wide, decoder=False),
        ModelSpec(name="adapt-dec", variant="adapt", hidden=wide, encoder=False),
        ModelSpec(name="adapt-enc+dec", variant="adapt", hidden=hidden),
        ModelSpec(name="structadapt_gcn-enc", variant="structadapt_gcn",
                  hidden=wide, decoder=False),
        ModelSpec(name="structadapt_gcn-enc+dec", variant="structadapt_gcn", hidden=hidden),
    ]
    rows = []
    trainable_counts = set()
    for spec in specs:
        results = [harness.run(spec, seed=s) for s in seeds]
        mean, sd = mean_sd(r["dev_bleu"] for r in results)
        trainable = results[0]["trainable"]
        trainable_counts.add(trainable)
        rows.append([spec.name, spec.hidden, trainable, len(seeds), mean, sd])
    if len(trainable_counts) != 1:
        raise AssertionError(f"placement rows differ in trainable counts: {trainable_counts}")
    header = ["spec", "hidden", "trainable", "seeds", "bleu_mean", "bleu_sd"]
    return header, rows
