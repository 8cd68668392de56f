"""Training loop with linear learning-rate decay, BLEU early stopping, and
length-normalized beam search."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Adam
from .bpe import EOS_ID
from .data import PreparedExample, collate
from .metrics import bleu
from .model import ModelBundle


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters; defaults follow the standard recipe for this setup.

    ``lr`` of None resolves by mode: 3e-5 for full fine-tuning, 1e-4
    otherwise (partial fine-tuning and adapters).
    """

    mode: str = "adapters_only"
    lr: float | None = None
    batch_size: int = 4
    beam: int = 5
    max_steps: int = 2000
    patience: int = 5
    seed: int = 0
    max_epochs: int = 1000
    linearization: str = "canon"
    variant: str = "nodes_and_edges"
    rep: str = "rep1"

    def __post_init__(self):
        for name in ("batch_size", "beam", "max_steps", "patience", "max_epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def resolved_lr(self) -> float:
        if self.lr is not None:
            return self.lr
        return 3e-5 if self.mode == "finetune_all" else 1e-4


def linear_lr(step: int, max_steps: int, lr0: float) -> float:
    """Linearly decreasing schedule without warm-up, reaching zero at the end."""
    return lr0 * max(0.0, 1.0 - step / max_steps)


class TrainingDiverged(RuntimeError):
    pass


class EarlyStopper:
    """Stop after ``patience`` consecutive epochs without a dev-score improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = None
        self.best_epoch = None
        self.streak = 0

    def update(self, epoch: int, score: float) -> bool:
        """Record an epoch score; returns True when it improved the best."""
        if self.best is None or score > self.best:
            self.best = score
            self.best_epoch = epoch
            self.streak = 0
            return True
        self.streak += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.streak >= self.patience


@dataclass
class TrainResult:
    bundle: ModelBundle
    best_dev_bleu: float
    best_epoch: int
    steps: int
    epochs: int
    wall_time: float
    log: list[str] = field(default_factory=list)


def evaluate_greedy(bundle: ModelBundle, examples: list[PreparedExample], vocab,
                    batch_size: int = 32, max_len: int | None = None):
    """Corpus BLEU of batched greedy decodes; returns (bleu, hypotheses)."""
    hyps = []
    for start in range(0, len(examples), batch_size):
        chunk = examples[start:start + batch_size]
        ids = bundle.greedy_decode(collate(chunk), max_len=max_len)
        hyps.extend(vocab.decode(seq) for seq in ids)
    refs = [e.text for e in examples]
    return bleu(hyps, refs), hyps


def train(bundle: ModelBundle, train_examples, dev_examples, cfg: TrainConfig,
          vocab, log_fn=None) -> TrainResult:
    """Train with Adam, linear decay, and dev-BLEU early stopping.

    Dev BLEU uses greedy decodes (beam is reserved for final evaluation).
    Returns the bundle restored to its best dev checkpoint.  Under
    ``adapters_only`` the backbone is never registered with the optimizer, so
    it stays bit-identical.
    """
    if not train_examples:
        raise ValueError("empty training set")
    lines: list[str] = []

    def log(msg):
        lines.append(msg)
        if log_fn is not None:
            log_fn(msg)

    lr0 = cfg.resolved_lr()
    trainable = bundle.trainable_params(cfg.mode)
    if not trainable:
        raise ValueError(f"no trainable parameters under mode {cfg.mode!r}")
    optimizer = Adam(trainable, lr0)
    rng = np.random.default_rng(cfg.seed)
    stopper = EarlyStopper(cfg.patience)
    best_state = bundle.snapshot(set(trainable))
    started = time.time()
    # crop greedy dev decodes a little above the longest reference
    dev_cap = None
    if dev_examples:
        dev_cap = min(bundle.backbone_cfg.max_tgt_len - 1,
                      max(len(e.tgt_ids) for e in dev_examples) + 8)

    step = 0
    epoch = 0
    while step < cfg.max_steps and epoch < cfg.max_epochs:
        epoch += 1
        order = rng.permutation(len(train_examples))
        for start in range(0, len(order), cfg.batch_size):
            if step >= cfg.max_steps:
                break
            batch = collate([train_examples[i] for i in order[start:start + cfg.batch_size]])
            loss = bundle.loss(batch)
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss at step {step} (epoch {epoch}, lr "
                    f"{linear_lr(step, cfg.max_steps, lr0):.2e})")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step(linear_lr(step, cfg.max_steps, lr0))
            if step % 50 == 0:
                log(f"step {step} loss {value:.4f} lr {linear_lr(step, cfg.max_steps, lr0):.2e}")
            step += 1

        if dev_examples:
            dev_bleu, _ = evaluate_greedy(bundle, dev_examples, vocab, max_len=dev_cap)
            improved = stopper.update(epoch, dev_bleu)
            log(f"epoch {epoch} dev_bleu {dev_bleu:.2f}"
                + (" (new best)" if improved else ""))
            if improved:
                best_state = bundle.snapshot(set(trainable))
            if stopper.should_stop:
                log(f"early stop after epoch {epoch} (best epoch {stopper.best_epoch})")
                break
        else:
            stopper.update(epoch, 0.0)
            best_state = bundle.snapshot(set(trainable))

    bundle.restore(best_state)
    return TrainResult(
        bundle=bundle,
        best_dev_bleu=stopper.best if stopper.best is not None else 0.0,
        best_epoch=stopper.best_epoch or 0,
        steps=step,
        epochs=epoch,
        wall_time=time.time() - started,
        log=lines,
    )


# --- beam search ---------------------------------------------------------------


def beam_search(score_batch, beam: int = 5, max_len: int = 32, eos: int = EOS_ID):
    """Length-normalized beam search over a prefix scorer.

    ``score_batch(prefixes)`` returns one log-probability row per prefix.
    Finished hypotheses keep their end marker excluded from the returned ids;
    ranking divides the summed log-probability by hypothesis length.
    Deterministic: ties break toward lower token ids.
    """
    beams: list[tuple[list[int], float]] = [([], 0.0)]
    finished: list[tuple[list[int], float]] = []
    for _ in range(max_len):
        logprobs = score_batch([ids for ids, _ in beams])
        candidates = []
        for (ids, total), row in zip(beams, logprobs):
            top = np.argsort(-row, kind="stable")[:beam]
            for tok in top:
                candidates.append((ids + [int(tok)], total + float(row[tok])))
        candidates.sort(key=lambda c: (-c[1], c[0]))
        beams = []
        for ids, total in candidates[:beam]:
            if ids[-1] == eos:
                finished.append((ids, total))
            else:
                beams.append((ids, total))
        if not beams:
            break
    finished.extend(beams)

    def normalized(candidate):
        ids, total = candidate
        return total / max(1, len(ids))

    # max keeps the first of equal-scoring hypotheses; candidate order is
    # deterministic, so decoding is too
    best = max(finished, key=normalized)
    ids = best[0]
    return (ids[:-1] if ids and ids[-1] == eos else ids), normalized(best)


def beam_decode(bundle: ModelBundle, example: PreparedExample, beam: int = 5,
                max_len: int | None = None):
    """Beam-search decode of one prepared example; returns token ids."""
    batch = collate([example])
    score = bundle.beam_score_fn(batch.src, batch.src_len, batch.graphs)
    max_len = max_len or (bundle.backbone_cfg.max_tgt_len - 1)
    ids, _ = beam_search(score, beam=beam, max_len=max_len)
    return ids
