"""Deterministic byte-level subword vocabulary with greedy pair merging.

Ids are dense from zero: the three specials first (pad, end-of-sequence,
mask), then the 256 single-byte tokens (so every byte string is encodable),
then merged tokens in training order.  Training is a pure function of the
corpus and target size; ties between equally frequent pairs break by
lexicographic pair order.

Text is pre-split into word pretokens (a word keeps its single leading
space), and merges never cross pretoken boundaries, mirroring the usual
pretrained-LM setup.
"""

from __future__ import annotations

import re
from collections import Counter

SPECIAL_TOKENS = ("<pad>", "<eos>", "<mask>")
PAD_ID, EOS_ID, MASK_ID = 0, 1, 2
N_SPECIALS = len(SPECIAL_TOKENS)
BYTE_BASE = N_SPECIALS  # id of byte 0x00

_PRETOKEN_RE = re.compile(r" ?\S+|\s+")


def pretokenize(text: str) -> list[str]:
    """Split into word pretokens; concatenating them reproduces the text."""
    return _PRETOKEN_RE.findall(text)


class Vocabulary:
    """Immutable merge-rule vocabulary; encode/decode are thread-safe."""

    def __init__(self, merges: tuple[tuple[bytes, bytes], ...]):
        self.merges = tuple(merges)
        self.id_to_token: list[bytes | None] = [None] * N_SPECIALS
        self.id_to_token.extend(bytes([b]) for b in range(256))
        self.token_to_id: dict[bytes, int] = {
            tok: i for i, tok in enumerate(self.id_to_token) if tok is not None
        }
        self.rank: dict[tuple[bytes, bytes], int] = {}
        for pair in self.merges:
            merged = pair[0] + pair[1]
            if pair in self.rank or merged in self.token_to_id:
                raise ValueError(f"duplicate merge {pair!r}")
            self.rank[pair] = len(self.rank)
            self.token_to_id[merged] = len(self.id_to_token)
            self.id_to_token.append(merged)
        self._memo: dict[str, tuple[int, ...]] = {}

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.merges == other.merges

    # -- encoding ------------------------------------------------------------

    def encode(self, text: str) -> list[int]:
        """Token ids for a text; a pure function of (text, merges)."""
        ids: list[int] = []
        for pretoken in pretokenize(text):
            cached = self._memo.get(pretoken)
            if cached is None:
                cached = tuple(self.token_to_id[tok]
                               for tok in self._merge(pretoken.encode("utf-8")))
                self._memo[pretoken] = cached
            ids.extend(cached)
        return ids

    def _merge(self, raw: bytes) -> list[bytes]:
        seq = [raw[i:i + 1] for i in range(len(raw))]
        while len(seq) > 1:
            best = None
            for pair in zip(seq, seq[1:]):
                r = self.rank.get(pair)
                if r is not None and (best is None or r < best):
                    best = r
            if best is None:
                break
            seq = _apply_merge(seq, self.merges[best])
        return seq

    def decode(self, ids) -> str:
        """Inverse of encode; special ids are skipped, unknown ids raise.

        Arbitrary id sequences (e.g. sampled from an untrained model) may not
        form valid UTF-8; invalid byte runs decode to replacement characters.
        """
        chunks = []
        for i in ids:
            if not 0 <= i < len(self.id_to_token):
                raise ValueError(f"unknown token id {i}")
            tok = self.id_to_token[i]
            if tok is not None:
                chunks.append(tok)
        return b"".join(chunks).decode("utf-8", errors="replace")

    # -- persistence -----------------------------------------------------------

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"merges {len(self.merges)}\n")
            for a, b in self.merges:
                fh.write(f"{a.hex()} {b.hex()}\n")
            fh.write(f"tokens {len(self.id_to_token)}\n")
            for i, tok in enumerate(self.id_to_token):
                name = f"special:{SPECIAL_TOKENS[i]}" if tok is None else tok.hex()
                fh.write(f"{i} {name}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="ascii") as fh:
            lines = fh.read().splitlines()
        header = lines[0].split()
        if header[0] != "merges":
            raise ValueError("not a vocabulary file")
        n = int(header[1])
        merges = []
        for line in lines[1:1 + n]:
            a, b = line.split()
            merges.append((bytes.fromhex(a), bytes.fromhex(b)))
        vocab = cls(tuple(merges))
        # the token table is implied by the merges; verify it matches the file
        count = int(lines[1 + n].split()[1])
        if count != vocab.size:
            raise ValueError("token table does not match merges")
        return vocab


def _apply_merge(seq: list[bytes], pair: tuple[bytes, bytes]) -> list[bytes]:
    """Left-to-right single pass replacing adjacent occurrences of ``pair``."""
    out = []
    i = 0
    while i < len(seq):
        if i + 1 < len(seq) and seq[i] == pair[0] and seq[i + 1] == pair[1]:
            out.append(pair[0] + pair[1])
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


def train_vocab(corpus, target_size: int) -> Vocabulary:
    """Greedy highest-frequency pair merging down to ``target_size`` ids.

    ``target_size`` must be at least 256 + the number of specials (that
    minimum yields a byte-only vocabulary).  Deterministic: retraining on the
    same corpus yields the identical merge list.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    floor = 256 + N_SPECIALS
    if target_size < floor:
        raise ValueError(f"target_size must be >= {floor}")

    seqs = []
    for text in corpus:
        for pretoken in pretokenize(text):
            raw = pretoken.encode("utf-8")
            seqs.append([raw[i:i + 1] for i in range(len(raw))])

    def pairs_of(seq):
        return zip(seq, seq[1:])

    pair_counts: Counter = Counter()
    pair_seqs: dict[tuple[bytes, bytes], set[int]] = {}
    for si, seq in enumerate(seqs):
        for pair in pairs_of(seq):
            pair_counts[pair] += 1
            pair_seqs.setdefault(pair, set()).add(si)

    merges: list[tuple[bytes, bytes]] = []
    while len(merges) < target_size - floor and pair_counts:
        top = max(pair_counts.values())
        best = min(pair for pair, count in pair_counts.items() if count == top)
        merges.append(best)
        for si in sorted(pair_seqs.get(best, ())):
            seq = seqs[si]
            for pair in pairs_of(seq):
                pair_counts[pair] -= 1
                if pair_counts[pair] == 0:
                    del pair_counts[pair]
                pair_seqs[pair].discard(si)
            seq = _apply_merge(seq, best)
            seqs[si] = seq
            for pair in pairs_of(seq):
                pair_counts[pair] += 1
                pair_seqs.setdefault(pair, set()).add(si)

    return Vocabulary(tuple(merges))
