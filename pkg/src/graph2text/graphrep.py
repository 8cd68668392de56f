"""Linearized sequences and token-level adjacency built from parsed graphs.

The pipeline is: graph -> unlabeled bipartite form (each labeled edge becomes
a node with one in- and one out-edge) -> linearization (depth-first symbol
sequence with an origin map back to bipartite nodes) -> token graph (subword
positions connected according to one of the rep1/rep2/rep3/complete schemes,
with a reverse twin for every edge).

Everything here is a pure, thread-safe transformation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .penman import (
    AmrGraph,
    TraversalNode,
    normalize_inverse_roles,
    render_traversal,
    traverse,
)

MODES = ("canon", "reconf", "random")
VARIANTS = ("nodes_and_edges", "nodes_only")
REPS = ("rep1", "rep2", "rep3", "complete")

DEFAULT = "default"
REVERSE = "reverse"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class UnlabeledGraph:
    """Bipartite unlabeled form: concept nodes plus one node per source edge.

    Node ids are ``n:<var>`` for concepts and ``e:<index>`` for roles, where
    ``<index>`` is the edge position in the source graph.
    """

    nodes: tuple[tuple[str, str], ...]  # (id, label)
    edges: tuple[tuple[str, str], ...]  # directed (src id, tgt id)

    def labels(self) -> dict[str, str]:
        return dict(self.nodes)


@dataclass(frozen=True)
class Linearization:
    """Symbol sequence plus a map from symbol index to bipartite node id."""

    symbols: tuple[str, ...]
    origin: tuple[str, ...]  # bipartite node id per symbol
    mode: str
    variant: str
    penman: str  # the traversal rendered as PENMAN text, for re-parsing


@dataclass(frozen=True)
class Tokenization:
    """Sequence positions per linearization symbol, plus trailing specials."""

    seq_len: int
    spans: tuple[tuple[int, ...], ...]
    special_positions: tuple[int, ...] = ()


@dataclass(frozen=True)
class TokenGraph:
    """Adjacency over sequence positions with named relations."""

    seq_len: int
    edges: tuple[tuple[int, int, str], ...]  # (src, tgt, relation), sorted, unique
    position_origin: tuple[str, ...]  # bipartite node id or "special"
    relations: tuple[str, ...]


def to_unlabeled(g: AmrGraph) -> UnlabeledGraph:
    """Insert one role node per edge: (u, r, v) becomes u -> r -> v."""
    nodes = [(f"n:{var}", concept) for var, concept in g.nodes.items()]
    edges = []
    for i, (src, role, tgt) in enumerate(g.edges):
        rid = f"e:{i}"
        nodes.append((rid, role))
        edges.append((f"n:{src}", rid))
        edges.append((rid, f"n:{tgt}"))
    return UnlabeledGraph(nodes=tuple(nodes), edges=tuple(edges))


def linearize(g: AmrGraph, mode: str = "canon", variant: str = "nodes_and_edges",
              seed: int = 0) -> Linearization:
    """Depth-first symbol sequence for a graph.

    ``canon`` replays stored edge order from the root; ``reconf`` keeps the
    root but explores incident edges in seeded random order and direction;
    ``random`` additionally starts from a seeded uniform node.  Reversed
    traversal emits ``-of``-suffixed roles.  Later mentions of a node emit
    its concept again, never its variable.
    """
    if mode not in MODES:
        raise ValueError(f"unknown linearization mode {mode!r}")
    if variant not in VARIANTS:
        raise ValueError(f"unknown linearization variant {variant!r}")

    if mode == "canon":
        tree = traverse(g)
    else:
        rng = random.Random(seed)
        start = g.root if mode == "reconf" else rng.choice(list(g.nodes))
        tree = traverse(g, start=start, rng=rng)

    symbols: list[str] = []
    origin: list[str] = []

    def emit(node: TraversalNode) -> None:
        symbols.append(g.nodes[node.var])
        origin.append(f"n:{node.var}")
        for edge_idx, surface, child in node.children:
            if variant == "nodes_and_edges":
                symbols.append(surface)
                origin.append(f"e:{edge_idx}")
            emit(child)

    emit(tree)
    return Linearization(
        symbols=tuple(symbols),
        origin=tuple(origin),
        mode=mode,
        variant=variant,
        penman=render_traversal(g, tree),
    )


def relation_table(variant: str, roles: tuple[str, ...] = ()) -> tuple[str, ...]:
    """Relation ids available to the graph convolution.

    ``nodes_and_edges`` uses the two structural relations.  ``nodes_only``
    types each edge by its (normalized) role: one id per observed role plus a
    reverse counterpart, plus ``unknown``, which also covers roles unseen at
    inference and structural edges (token chains, mention links) that carry
    no role.
    """
    if variant == "nodes_and_edges":
        return (DEFAULT, REVERSE)
    if variant == "nodes_only":
        table: list[str] = []
        for role in sorted(set(roles)):
            table.append(role)
            table.append(role + "-of")
        table.append(UNKNOWN)
        return tuple(table)
    raise ValueError(f"unknown variant {variant!r}")


def invert_relation(relation: str) -> str:
    if relation == DEFAULT:
        return REVERSE
    if relation == REVERSE:
        return DEFAULT
    if relation == UNKNOWN:
        return UNKNOWN
    if relation.endswith("-of"):
        return relation[:-3]
    return relation + "-of"


def tokenize_linearization(lin: Linearization, encode, n_special_tail: int = 0) -> Tokenization:
    """Tokenization from a per-symbol encoder.

    Each symbol is encoded independently so that subword merges never cross
    symbol boundaries and the origin map stays exact.
    """
    spans: list[tuple[int, ...]] = []
    pos = 0
    for symbol in lin.symbols:
        n = len(encode(symbol))
        if n == 0:
            raise ValueError(f"symbol {symbol!r} encodes to zero tokens")
        spans.append(tuple(range(pos, pos + n)))
        pos += n
    specials = tuple(range(pos, pos + n_special_tail))
    return Tokenization(seq_len=pos + n_special_tail, spans=tuple(spans),
                        special_positions=specials)


def symbol_tokenization(lin: Linearization, n_special_tail: int = 0) -> Tokenization:
    """One position per symbol (a word-level tokenization)."""
    return tokenize_linearization(lin, lambda s: [0], n_special_tail)


def build_token_graph(u: UnlabeledGraph, lin: Linearization, tok: Tokenization,
                      rep: str = "rep1",
                      relations: tuple[str, ...] | None = None) -> TokenGraph:
    """Connect sequence positions according to a subword representation.

    rep1 connects every source-node token to every target-node token; rep2
    connects last source token to first target token; rep3 connects first to
    first; rep2/rep3 additionally chain consecutive tokens within a mention
    (reading order).  ``complete`` connects every graph token to every other.
    All mentions of one reentrant node are mutually connected.  Every edge
    gets a reverse twin under the inverted relation.
    """
    if rep not in REPS:
        raise ValueError(f"unknown representation {rep!r}")
    if len(tok.spans) != len(lin.symbols):
        raise ValueError("tokenization does not cover the linearization")
    typed = lin.variant == "nodes_only"
    if relations is None:
        relations = relation_table(lin.variant)

    # mentions[nid] is the list of token spans of that bipartite node
    mentions: dict[str, list[tuple[int, ...]]] = {}
    for sym_idx, nid in enumerate(lin.origin):
        mentions.setdefault(nid, []).append(tok.spans[sym_idx])

    labels = u.labels()
    if typed:
        # recover (source concept, role, target concept) around each role node
        role_link: dict[str, list[str | None]] = {
            nid: [None, None] for nid, _ in u.nodes if nid.startswith("e:")
        }
        for src, tgt in u.edges:
            if tgt.startswith("e:"):
                role_link[tgt][0] = src
            else:
                role_link[src][1] = tgt
        macro_edges = []
        for rid, (src, tgt) in role_link.items():
            role = labels[rid]
            rel = role if role in relations else UNKNOWN
            macro_edges.append((src, tgt, rel))
    else:
        macro_edges = [(src, tgt, DEFAULT) for src, tgt in u.edges]

    structural = DEFAULT if not typed else UNKNOWN
    edges: set[tuple[int, int, str]] = set()

    def add(src: int, tgt: int, rel: str) -> None:
        edges.add((src, tgt, rel))
        edges.add((tgt, src, invert_relation(rel)))

    def positions(nid: str) -> list[int]:
        return [p for span in mentions.get(nid, ()) for p in span]

    if rep == "complete":
        graph_positions = sorted(p for nid in mentions for p in positions(nid))
        for p in graph_positions:
            for q in graph_positions:
                if p != q:
                    add(p, q, structural)
    else:
        for src_nid, tgt_nid, rel in macro_edges:
            src_mentions = mentions.get(src_nid, [])
            tgt_mentions = mentions.get(tgt_nid, [])
            if rep == "rep1":
                for p in positions(src_nid):
                    for q in positions(tgt_nid):
                        add(p, q, rel)
            elif rep == "rep2":
                for ms in src_mentions:
                    for mt in tgt_mentions:
                        add(ms[-1], mt[0], rel)
            else:  # rep3
                for ms in src_mentions:
                    for mt in tgt_mentions:
                        add(ms[0], mt[0], rel)
        if rep in ("rep2", "rep3"):
            for nid in mentions:
                for span in mentions[nid]:
                    for a, b in zip(span, span[1:]):
                        add(a, b, structural)

    # mentions of one node are one node: connect them across spans, both ways
    for nid, spans in mentions.items():
        if len(spans) > 1:
            for i, span_a in enumerate(spans):
                for span_b in spans[i + 1:]:
                    for p in span_a:
                        for q in span_b:
                            add(p, q, structural)
                            add(q, p, structural)

    position_origin = ["special"] * tok.seq_len
    for sym_idx, nid in enumerate(lin.origin):
        for p in tok.spans[sym_idx]:
            position_origin[p] = nid

    return TokenGraph(
        seq_len=tok.seq_len,
        edges=tuple(sorted(edges)),
        position_origin=tuple(position_origin),
        relations=relations,
    )


def token_graph_pipeline(g: AmrGraph, mode: str, variant: str, rep: str, encode,
                         seed: int = 0, n_special_tail: int = 0,
                         relations: tuple[str, ...] | None = None,
                         ) -> tuple[Linearization, Tokenization, TokenGraph]:
    """Full graph -> token graph path with inverse-role normalization.

    The linearization runs on the raw graph (so surface ``-of`` roles are
    preserved), while the bipartite structure is built on the normalized
    graph; edge indices are position-aligned between the two, which makes the
    token graph independent of traversal direction.
    """
    lin = linearize(g, mode=mode, variant=variant, seed=seed)
    u = to_unlabeled(normalize_inverse_roles(g))
    tok = tokenize_linearization(lin, encode, n_special_tail=n_special_tail)
    tg = build_token_graph(u, lin, tok, rep=rep, relations=relations)
    return lin, tok, tg


def _positions_by_origin(tg: TokenGraph) -> dict[str, list[int]]:
    groups: dict[str, list[int]] = {}
    for pos, nid in enumerate(tg.position_origin):
        groups.setdefault(nid, []).append(pos)
    return groups


def token_graphs_isomorphic(a: TokenGraph, b: TokenGraph) -> bool:
    """Exact origin-preserving isomorphism between token graphs of one graph.

    Positions are matched by (origin node, mention rank); the check succeeds
    only when the matched position sets carry identical edge sets, which
    requires per-node mention counts to agree.  Mention counts of reentrant
    nodes depend on the traversal (a re-referenced node is mentioned once per
    arriving edge), so across linearization modes this strict form is
    guaranteed only for trees; :func:`token_graphs_equivalent` checks the
    traversal-invariant quotient.
    """
    if a.seq_len != b.seq_len or a.relations != b.relations:
        return False
    groups_a, groups_b = _positions_by_origin(a), _positions_by_origin(b)
    if set(groups_a) != set(groups_b):
        return False
    mapping: dict[int, int] = {}
    for nid, pos_a in groups_a.items():
        pos_b = groups_b[nid]
        if len(pos_a) != len(pos_b):
            return False
        mapping.update(zip(pos_a, pos_b))
    remapped = {(mapping[s], mapping[t], rel) for s, t, rel in a.edges}
    return remapped == set(b.edges)


def token_graph_quotient(tg: TokenGraph) -> frozenset:
    """Relation-labeled adjacency over origin nodes, mentions collapsed.

    Same-origin pairs (mention links, intra-mention chains) are excluded:
    they reflect traversal-dependent mention multiplicity, not graph
    structure.
    """
    return frozenset(
        (tg.position_origin[s], tg.position_origin[t], rel)
        for s, t, rel in tg.edges
        if tg.position_origin[s] != tg.position_origin[t]
    )


def token_graphs_equivalent(a: TokenGraph, b: TokenGraph) -> bool:
    """Origin-level equality of two token graphs built from one source graph."""
    return (a.relations == b.relations
            and token_graph_quotient(a) == token_graph_quotient(b))


# --- stable text dump ---------------------------------------------------------

def dump_token_graph(tg: TokenGraph) -> str:
    """Line-oriented edge list: header ``seq_len N``, then ``src tgt relation``."""
    lines = [f"seq_len {tg.seq_len}"]
    lines.extend(f"{src} {tgt} {rel}" for src, tgt, rel in tg.edges)
    return "\n".join(lines) + "\n"


def load_token_graph(text: str) -> tuple[int, tuple[tuple[int, int, str], ...]]:
    """Parse a dump back into (seq_len, edges)."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or not lines[0].startswith("seq_len "):
        raise ValueError("missing 'seq_len N' header")
    seq_len = int(lines[0].split()[1])
    edges = []
    for line in lines[1:]:
        src, tgt, rel = line.split(maxsplit=2)
        edges.append((int(src), int(tgt), rel))
    return seq_len, tuple(edges)
