"""Corpus BLEU and chrF++ plus bucketed breakdowns by graph properties.

BLEU is corpus-level BLEU-4 over whitespace tokens with the standard brevity
penalty and no smoothing: any n-gram order with zero matches zeroes the
score.  chrF++ averages F-scores over character 1..6-grams and word
1..2-grams with recall weighted twice (beta = 2).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

BUCKETS = {
    "size": ((1, 30), (31, 60), (61, None)),
    "diameter": ((1, 10), (11, 20), (21, None)),
    "reentrancies": ((0, 0), (1, 3), (4, 20)),
}


@dataclass(frozen=True)
class BleuScore:
    score: float
    precisions: tuple[float, ...]
    brevity_penalty: float
    hyp_len: int
    ref_len: int


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_stats(hyps, refs, max_order: int = 4) -> BleuScore:
    """Corpus BLEU with matched-count statistics exposed."""
    if len(hyps) != len(refs):
        raise ValueError("hypothesis and reference lists differ in length")
    if not hyps:
        raise ValueError("empty corpus")
    correct = [0] * max_order
    total = [0] * max_order
    hyp_len = ref_len = 0
    for hyp, ref in zip(hyps, refs):
        h_tokens = hyp.split()
        r_tokens = ref.split()
        hyp_len += len(h_tokens)
        ref_len += len(r_tokens)
        for n in range(1, max_order + 1):
            h_counts = _ngrams(h_tokens, n)
            r_counts = _ngrams(r_tokens, n)
            total[n - 1] += sum(h_counts.values())
            correct[n - 1] += sum((h_counts & r_counts).values())

    precisions = tuple(c / t if t else 0.0 for c, t in zip(correct, total))
    if hyp_len == 0:
        bp = 0.0
    elif hyp_len < ref_len:
        bp = math.exp(1.0 - ref_len / hyp_len)
    else:
        bp = 1.0
    if any(p == 0.0 for p in precisions):
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / max_order)
    return BleuScore(score=score, precisions=precisions, brevity_penalty=bp,
                     hyp_len=hyp_len, ref_len=ref_len)


def bleu(hyps, refs) -> float:
    """Corpus BLEU-4, 0..100."""
    return bleu_stats(hyps, refs).score


def _char_ngrams(text, n):
    squeezed = "".join(text.split())
    return Counter(squeezed[i:i + n] for i in range(len(squeezed) - n + 1))


def chrf(hyps, refs, char_order: int = 6, word_order: int = 2, beta: float = 2.0) -> float:
    """Corpus chrF++, 0..100: mean F-score over character and word n-grams."""
    if len(hyps) != len(refs):
        raise ValueError("hypothesis and reference lists differ in length")
    if not hyps:
        raise ValueError("empty corpus")
    n_orders = char_order + word_order
    stats = [[0, 0, 0] for _ in range(n_orders)]  # hyp total, ref total, matched
    for hyp, ref in zip(hyps, refs):
        grams = []
        for n in range(1, char_order + 1):
            grams.append((_char_ngrams(hyp, n), _char_ngrams(ref, n)))
        h_tokens, r_tokens = hyp.split(), ref.split()
        for n in range(1, word_order + 1):
            grams.append((_ngrams(h_tokens, n), _ngrams(r_tokens, n)))
        for i, (h_counts, r_counts) in enumerate(grams):
            stats[i][0] += sum(h_counts.values())
            stats[i][1] += sum(r_counts.values())
            stats[i][2] += sum((h_counts & r_counts).values())

    beta_sq = beta * beta
    f_total = 0.0
    effective = 0
    for h_total, r_total, matched in stats:
        if h_total == 0 and r_total == 0:
            continue
        effective += 1
        precision = matched / h_total if h_total else 0.0
        recall = matched / r_total if r_total else 0.0
        if precision + recall > 0:
            f_total += (1 + beta_sq) * precision * recall / (beta_sq * precision + recall)
    if effective == 0:
        return 0.0
    return 100.0 * f_total / effective


def sentence_chrf(hyp: str, ref: str) -> float:
    return chrf([hyp], [ref])


def bucket_label(dimension: str, value: int) -> str | None:
    """Bucket name for a stat value, or None when the value falls outside."""
    for low, high in BUCKETS[dimension]:
        if value >= low and (high is None or value <= high):
            return f"{low}-{high}" if high is not None else f">{low - 1}"
    return None


def breakdown(runs: dict[str, list[str]], refs, stats, baseline: str | None = None) -> dict:
    """Per-bucket corpus BLEU for named runs, with deltas against a baseline.

    ``stats`` carries one graph_stats dict per example.  Empty buckets are
    absent from the result, not reported as zero.
    """
    for name, hyps in runs.items():
        if len(hyps) != len(refs):
            raise ValueError(f"run {name!r} length does not match references")
    if len(stats) != len(refs):
        raise ValueError("stats length does not match references")

    result: dict = {}
    for dimension in BUCKETS:
        buckets: dict[str, list[int]] = {}
        for i, st in enumerate(stats):
            label = bucket_label(dimension, st[dimension])
            if label is not None:
                buckets.setdefault(label, []).append(i)
        rows = {}
        for low, high in BUCKETS[dimension]:
            label = f"{low}-{high}" if high is not None else f">{low - 1}"
            if label not in buckets:
                continue
            idx = buckets[label]
            scores = {name: bleu([hyps[i] for i in idx], [refs[i] for i in idx])
                      for name, hyps in runs.items()}
            row = {"count": len(idx), "bleu": scores}
            if baseline is not None:
                row["delta"] = {name: scores[name] - scores[baseline] for name in scores}
            rows[label] = row
        result[dimension] = rows
    return result
