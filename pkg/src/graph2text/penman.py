"""Parsing, serialization, and measurement of rooted labeled graphs in PENMAN notation.

A graph is a root variable, an ordered map from variables to concept labels,
and an ordered list of (source, role, target) edges.  Constants (numbers,
quoted strings, bare minus signs) are stored as ordinary nodes whose concept
is the literal token; their synthetic ids start with ``#`` so they can never
collide with declared variables.

All functions here are pure and never mutate their inputs.
"""

from __future__ import annotations

import re
from collections import Counter, deque
from dataclasses import dataclass


class PenmanError(ValueError):
    """Malformed PENMAN input.  ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class AmrGraph:
    """Rooted, directed, edge-labeled graph.

    ``nodes`` maps variable id -> concept label (insertion order is source
    order).  ``edges`` is a tuple of (source, role, target) triples in source
    order; roles are strings of the form ``:<name>``, possibly ending in
    ``-of``.
    """

    root: str
    nodes: dict[str, str]
    edges: tuple[tuple[str, str, str], ...]

    def in_degrees(self) -> Counter:
        return Counter(tgt for _, _, tgt in self.edges)

    def out_edges(self, var: str) -> list[tuple[int, tuple[str, str, str]]]:
        return [(i, e) for i, e in enumerate(self.edges) if e[0] == var]

    def in_edges(self, var: str) -> list[tuple[int, tuple[str, str, str]]]:
        return [(i, e) for i, e in enumerate(self.edges) if e[2] == var]


def is_constant_id(var: str) -> bool:
    """Synthetic ids assigned to constant nodes start with ``#``."""
    return var.startswith("#")


def validate(g: AmrGraph) -> None:
    """Check the structural invariants; raise ``ValueError`` on violation."""
    if g.root not in g.nodes:
        raise ValueError(f"root {g.root!r} is not a node")
    for src, role, tgt in g.edges:
        if src not in g.nodes or tgt not in g.nodes:
            raise ValueError(f"edge ({src}, {role}, {tgt}) has an undeclared endpoint")
        if not role.startswith(":"):
            raise ValueError(f"role {role!r} must start with ':'")
        if is_constant_id(src):
            raise ValueError(f"constant node {src!r} cannot be an edge source")
    for var, indeg in g.in_degrees().items():
        if is_constant_id(var) and indeg > 1:
            raise ValueError(f"constant node {var!r} has in-degree {indeg}")
    if not _connected(g):
        raise ValueError("graph is not connected")


def _connected(g: AmrGraph) -> bool:
    if len(g.nodes) <= 1:
        return True
    adjacent: dict[str, list[str]] = {v: [] for v in g.nodes}
    for src, _, tgt in g.edges:
        adjacent[src].append(tgt)
        adjacent[tgt].append(src)
    seen = {g.root}
    queue = deque([g.root])
    while queue:
        for other in adjacent[queue.popleft()]:
            if other not in seen:
                seen.add(other)
                queue.append(other)
    return len(seen) == len(g.nodes)


# --- lexer ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<lp>\()
      | (?P<rp>\))
      | (?P<slash>/)
      | (?P<string>"(?:[^"\\]|\\.)*")
      | (?P<role>:[^\s()/]+)
      | (?P<atom>[^\s()/:"][^\s()/]*)
    """,
    re.VERBOSE,
)

# Bare tokens of this shape are treated as variable references; anything else
# unquoted (numbers, words, "-") is a constant.  Matches the usual AMR style
# of single-letter variables with an optional numeric suffix.
_VARIABLE_RE = re.compile(r"^[a-z][0-9]*$|^[a-z]{2}[0-9]+$")


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


def _lex(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise PenmanError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), _byte_offset(text, pos)))
        pos = m.end()
    return tokens


# --- parser ---------------------------------------------------------------


def parse_penman(text: str) -> AmrGraph:
    """Parse one PENMAN expression into an :class:`AmrGraph`.

    Reentrancies (bare references to a variable declared anywhere in the
    expression, before or after) resolve to the declared node.  Attribute
    values become constant nodes.  Raises :class:`PenmanError` with a byte
    offset for unbalanced parentheses, duplicate declarations, and references
    to undeclared variables.
    """
    tokens = _lex(text)
    if not tokens:
        raise PenmanError("empty input", 0)

    declared = set()
    for i in range(len(tokens) - 2):
        if tokens[i][0] == "lp" and tokens[i + 1][0] == "atom" and tokens[i + 2][0] == "slash":
            declared.add(tokens[i + 1][1])

    nodes: dict[str, str] = {}
    edges: list[tuple[str, str, str]] = []
    n_constants = 0
    cursor = 0

    def peek():
        return tokens[cursor] if cursor < len(tokens) else None

    def take(kind: str, what: str):
        nonlocal cursor
        tok = peek()
        if tok is None:
            raise PenmanError(f"expected {what}, got end of input", _byte_offset(text, len(text)))
        if tok[0] != kind:
            raise PenmanError(f"expected {what}, got {tok[1]!r}", tok[2])
        cursor += 1
        return tok

    def new_constant(literal: str) -> str:
        nonlocal n_constants
        cid = f"#{n_constants}"
        n_constants += 1
        nodes[cid] = literal
        return cid

    def parse_node() -> str:
        nonlocal cursor
        take("lp", "'('")
        var_tok = take("atom", "a variable")
        var = var_tok[1]
        if var in nodes:
            raise PenmanError(f"duplicate declaration of variable {var!r}", var_tok[2])
        take("slash", "'/'")
        concept = take("atom", "a concept")[1]
        nodes[var] = concept
        while True:
            tok = peek()
            if tok is None:
                raise PenmanError("unbalanced parentheses: missing ')'", _byte_offset(text, len(text)))
            if tok[0] == "rp":
                cursor += 1
                return var
            if tok[0] != "role":
                raise PenmanError(f"expected a role or ')', got {tok[1]!r}", tok[2])
            role = tok[1]
            cursor += 1
            nxt = peek()
            if nxt is None:
                raise PenmanError("role without a value", _byte_offset(text, len(text)))
            if nxt[0] == "lp":
                # reserve the slot so edge order follows the source text
                slot = len(edges)
                edges.append(None)
                child = parse_node()
                edges[slot] = (var, role, child)
            elif nxt[0] == "string":
                cursor += 1
                edges.append((var, role, new_constant(nxt[1])))
            elif nxt[0] == "atom":
                cursor += 1
                value = nxt[1]
                if value in declared:
                    edges.append((var, role, value))
                elif _VARIABLE_RE.match(value):
                    raise PenmanError(f"reference to undeclared variable {value!r}", nxt[2])
                else:
                    edges.append((var, role, new_constant(value)))
            else:
                raise PenmanError(f"expected a node, reference, or constant, got {nxt[1]!r}", nxt[2])

    root = parse_node()
    if cursor != len(tokens):
        tok = tokens[cursor]
        raise PenmanError(f"trailing input {tok[1]!r}", tok[2])
    graph = AmrGraph(root=root, nodes=nodes, edges=tuple(edges))
    validate(graph)
    return graph


# --- traversal and serialization -------------------------------------------


def invert_role(role: str) -> str:
    """Surface form of a role traversed against its direction."""
    if role.endswith("-of") and len(role) > len(":-of"):
        return role[:-3]
    return role + "-of"


@dataclass
class TraversalNode:
    """One mention of a graph node inside a depth-first traversal."""

    var: str
    first: bool
    # children only on first mentions: (edge index, surface role, sub-mention)
    children: list[tuple[int, str, "TraversalNode"]]


def traverse(g: AmrGraph, start: str | None = None, rng=None) -> TraversalNode:
    """Depth-first traversal covering every edge exactly once.

    With ``rng=None`` the traversal replays stored edge order: out-edges are
    taken at their source, so it reproduces the source text structure for any
    graph whose nodes are all forward-reachable from the root; in-edges are
    traversed (with inverted surface roles) only when their source cannot be
    reached forward.  With an ``rng``, incident edges are explored in random
    order and in either direction.
    """
    start = g.root if start is None else start
    forward_reachable = _forward_reachable(g, g.root) if rng is None else frozenset()
    traversed: set[int] = set()
    visited: set[str] = set()

    out_by_var: dict[str, list[int]] = {v: [] for v in g.nodes}
    in_by_var: dict[str, list[int]] = {v: [] for v in g.nodes}
    for i, (src, _, tgt) in enumerate(g.edges):
        out_by_var[src].append(i)
        in_by_var[tgt].append(i)

    def candidates(var: str) -> list[tuple[int, bool]]:
        outs = [(i, True) for i in out_by_var[var] if i not in traversed]
        ins = [(i, False) for i in in_by_var[var] if i not in traversed]
        if rng is None:
            ins = [(i, fwd) for i, fwd in ins if g.edges[i][0] not in forward_reachable]
            return outs + ins
        both = outs + ins
        rng.shuffle(both)
        return both

    def visit(var: str) -> TraversalNode:
        visited.add(var)
        node = TraversalNode(var=var, first=True, children=[])
        while True:
            cands = candidates(var)
            if not cands:
                return node
            idx, forward = cands[0]
            traversed.add(idx)
            src, role, tgt = g.edges[idx]
            surface = role if forward else invert_role(role)
            other = tgt if forward else src
            if other in visited:
                child = TraversalNode(var=other, first=False, children=[])
            else:
                child = visit(other)
            node.children.append((idx, surface, child))

    tree = visit(start)
    if len(traversed) != len(g.edges):
        raise ValueError("traversal did not cover every edge; graph is not connected")
    return tree


def _forward_reachable(g: AmrGraph, start: str) -> frozenset:
    out: dict[str, list[str]] = {v: [] for v in g.nodes}
    for src, _, tgt in g.edges:
        out[src].append(tgt)
    seen = {start}
    queue = deque([start])
    while queue:
        for nxt in out[queue.popleft()]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return frozenset(seen)


def render_traversal(g: AmrGraph, tree: TraversalNode) -> str:
    """PENMAN text for a traversal; later mentions render as bare variables."""

    def render(node: TraversalNode) -> str:
        if is_constant_id(node.var):
            return g.nodes[node.var]
        if not node.first:
            return node.var
        parts = [f"({node.var} / {g.nodes[node.var]}"]
        for _, surface, child in node.children:
            parts.append(f" {surface} {render(child)}")
        parts.append(")")
        return "".join(parts)

    return render(tree)


def serialize_penman(g: AmrGraph) -> str:
    """Depth-first serialization from the root using stored edge order.

    ``parse_penman(serialize_penman(g))`` is isomorphic to ``g`` whenever all
    nodes are forward-reachable from the root; otherwise some edges must be
    emitted with inverted ``-of`` roles and the round trip is isomorphic only
    after :func:`normalize_inverse_roles`.
    """
    validate(g)
    return render_traversal(g, traverse(g))


# --- normalization ----------------------------------------------------------


def normalize_inverse_roles(g: AmrGraph, exempt: tuple[str, ...] = ()) -> AmrGraph:
    """Replace every ``-of`` role by the reversed base edge.

    ``-of-of`` collapses to the bare role.  Roles listed in ``exempt`` are
    left untouched.  Edge list positions are preserved, so edge indices keep
    their meaning for downstream position maps.  Idempotent.
    """
    edges = []
    for src, role, tgt in g.edges:
        while role.endswith("-of") and role not in exempt and len(role) > len(":-of"):
            src, tgt = tgt, src
            role = role[:-3]
        edges.append((src, role, tgt))
    return AmrGraph(root=g.root, nodes=dict(g.nodes), edges=tuple(edges))


# --- measurement ------------------------------------------------------------


def graph_stats(g: AmrGraph) -> dict:
    """Size, diameter, and reentrancy count of a graph.

    Size is the node count of the unlabeled bipartite form (nodes plus edges
    converted to nodes); diameter is the longest shortest path over that form
    taken undirected; reentrancies are nodes with in-degree above one after
    inverse-role normalization.
    """
    gn = normalize_inverse_roles(g)
    n_nodes = len(gn.nodes)
    n_edges = len(gn.edges)
    size = n_nodes + n_edges

    index = {var: i for i, var in enumerate(gn.nodes)}
    total = n_nodes + n_edges
    adjacent: list[list[int]] = [[] for _ in range(total)]
    for i, (src, _, tgt) in enumerate(gn.edges):
        mid = n_nodes + i
        for a, b in ((index[src], mid), (mid, index[tgt])):
            adjacent[a].append(b)
            adjacent[b].append(a)

    diameter = 0
    for source in range(total):
        dist = [-1] * total
        dist[source] = 0
        queue = deque([source])
        while queue:
            cur = queue.popleft()
            for nxt in adjacent[cur]:
                if dist[nxt] < 0:
                    dist[nxt] = dist[cur] + 1
                    queue.append(nxt)
        diameter = max(diameter, max(dist))

    reentrancies = sum(1 for count in gn.in_degrees().values() if count > 1)
    return {"size": size, "diameter": diameter, "reentrancies": reentrancies}


# --- isomorphism ------------------------------------------------------------


def is_isomorphic(g1: AmrGraph, g2: AmrGraph, match_root: bool = False) -> bool:
    """Concept- and role-preserving graph isomorphism.

    Roots are ignored unless ``match_root`` is set: traversals may re-root a
    graph without changing its meaning.
    """
    if len(g1.nodes) != len(g2.nodes) or len(g1.edges) != len(g2.edges):
        return False
    if Counter(g1.nodes.values()) != Counter(g2.nodes.values()):
        return False
    if Counter(r for _, r, _ in g1.edges) != Counter(r for _, r, _ in g2.edges):
        return False

    def signature(g: AmrGraph):
        out_roles = {v: Counter() for v in g.nodes}
        in_roles = {v: Counter() for v in g.nodes}
        for src, role, tgt in g.edges:
            out_roles[src][role] += 1
            in_roles[tgt][role] += 1
        return {
            v: (g.nodes[v], tuple(sorted(out_roles[v].items())), tuple(sorted(in_roles[v].items())))
            for v in g.nodes
        }

    sig1, sig2 = signature(g1), signature(g2)
    if Counter(sig1.values()) != Counter(sig2.values()):
        return False

    pair_roles_2: dict[tuple[str, str], Counter] = {}
    for src, role, tgt in g2.edges:
        pair_roles_2.setdefault((src, tgt), Counter())[role] += 1
    pair_roles_1: dict[tuple[str, str], Counter] = {}
    for src, role, tgt in g1.edges:
        pair_roles_1.setdefault((src, tgt), Counter())[role] += 1

    candidates = {v1: [v2 for v2 in g2.nodes if sig2[v2] == sig1[v1]] for v1 in g1.nodes}
    if match_root:
        candidates[g1.root] = [v for v in candidates[g1.root] if v == g2.root]
    order = sorted(g1.nodes, key=lambda v: len(candidates[v]))

    neighbors_1: dict[str, set[str]] = {v: set() for v in g1.nodes}
    for src, _, tgt in g1.edges:
        neighbors_1[src].add(tgt)
        neighbors_1[tgt].add(src)

    mapping: dict[str, str] = {}
    used: set[str] = set()

    def consistent(v1: str, v2: str) -> bool:
        for n1 in neighbors_1[v1]:
            if n1 not in mapping:
                continue
            n2 = mapping[n1]
            if pair_roles_1.get((v1, n1), Counter()) != pair_roles_2.get((v2, n2), Counter()):
                return False
            if pair_roles_1.get((n1, v1), Counter()) != pair_roles_2.get((n2, v2), Counter()):
                return False
        return True

    def assign(i: int) -> bool:
        if i == len(order):
            return True
        v1 = order[i]
        for v2 in candidates[v1]:
            if v2 in used or not consistent(v1, v2):
                continue
            mapping[v1] = v2
            used.add(v2)
            if assign(i + 1):
                return True
            del mapping[v1]
            used.remove(v2)
        return False

    return assign(0)
