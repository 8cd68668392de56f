"""Seeded synthetic corpus: random rooted graphs plus a deterministic
realization grammar.

Graphs are built over a closed inventory (~40 concepts, 12 roles).  Concepts
never repeat within one graph, and reentrancy targets are restricted to nodes
whose pronoun class is unique in the graph, so the realization stays
injective: a reentrant node surfaces as a full noun phrase at its first
mention in realization order and as an unambiguous pronoun afterwards.  Word
order is a function of role identity alone (subject before the verb,
prepositional slots in a fixed order before the object), so generating the
sentence from a scrambled linearization requires knowing which nodes connect
where.
"""

from __future__ import annotations

import hashlib
import random

from .data import DatasetRecord
from .penman import AmrGraph, serialize_penman

VERBS = (
    ("want-01", "wants"), ("see-01", "sees"), ("chase-01", "chases"),
    ("find-01", "finds"), ("help-01", "helps"), ("give-01", "gives"),
    ("take-01", "takes"), ("love-01", "loves"), ("fear-01", "fears"),
    ("follow-01", "follows"),
)
FEMALE = ("girl", "woman", "queen", "teacher", "nurse")
MALE = ("boy", "man", "king", "farmer", "knight")
THINGS = ("dog", "cat", "ball", "book", "tree", "bird", "fish", "stone")
PLACES = ("market", "river", "garden")
TIMES = ("morning", "night", "evening")
MODIFIERS = ("small", "big", "red", "old", "young", "happy", "quick", "bright")

PRONOUN = {"female": "her", "male": "him", "thing": "it", "place": "there", "time": "then"}

# prepositional roles in realization order, with their target class
PP_ROLES = (
    (":time", "during", "time"),
    (":location", "near", "place"),
    (":source", "from", "place"),
    (":destination", "toward", "place"),
    (":instrument", "using", "thing"),
    (":accompanier", "alongside", "person"),
    (":beneficiary", "for", "person"),
)

ROLES = (":ARG0", ":ARG1", ":ARG2", ":mod", ":poss") + tuple(r for r, _, _ in PP_ROLES)


def concept_class(concept: str) -> str | None:
    if concept in FEMALE:
        return "female"
    if concept in MALE:
        return "male"
    if concept in THINGS:
        return "thing"
    if concept in PLACES:
        return "place"
    if concept in TIMES:
        return "time"
    return None


class _Builder:
    def __init__(self, rng: random.Random, max_nodes: int):
        self.rng = rng
        self.budget = max_nodes
        self.nodes: dict[str, str] = {}
        self.edges: list[tuple[str, str, str]] = []
        self.pools = {
            "verb": list(VERBS),
            "female": list(FEMALE),
            "male": list(MALE),
            "thing": list(THINGS),
            "place": list(PLACES),
            "time": list(TIMES),
            "mod": list(MODIFIERS),
        }

    def new_node(self, kind: str) -> str | None:
        pool = self.pools[kind]
        if not pool or self.budget <= 0:
            return None
        item = pool.pop(self.rng.randrange(len(pool)))
        concept = item[0] if kind == "verb" else item
        base = concept[0]
        var = base
        n = 2
        while var in self.nodes:
            var = f"{base}{n}"
            n += 1
        self.nodes[var] = concept
        self.budget -= 1
        return var

    def new_np_node(self, kind: str) -> str | None:
        if kind == "person":
            options = [k for k in ("female", "male") if self.pools[k]]
            if not options:
                return None
            kind = self.rng.choice(options)
        return self.new_node(kind)


def _build_np(b: _Builder, kind: str, depth: int) -> str | None:
    var = b.new_np_node(kind)
    if var is None:
        return None
    rng = b.rng
    if rng.random() < 0.3:
        mod = b.new_node("mod")
        if mod is not None:
            b.edges.append((var, ":mod", mod))
            if rng.random() < 0.25:
                mod2 = b.new_node("mod")
                if mod2 is not None:
                    b.edges.append((var, ":mod", mod2))
    if depth < 2 and rng.random() < 0.2:
        owner = _build_np(b, "person", depth + 1)
        if owner is not None:
            b.edges.append((var, ":poss", owner))
    return var


def _build_clause(b: _Builder, verb: str, depth: int) -> None:
    rng = b.rng
    subj_kind = "person" if rng.random() < 0.7 else "thing"
    subj = _build_np(b, subj_kind, depth) or _build_np(b, "thing", depth)
    if subj is not None:
        b.edges.append((verb, ":ARG0", subj))

    if depth < 2 and b.budget >= 3 and b.pools["verb"] and rng.random() < 0.25:
        nested = b.new_node("verb")
        if nested is not None:
            b.edges.append((verb, ":ARG1", nested))
            _build_clause(b, nested, depth + 1)
    else:
        obj = _build_np(b, "thing" if rng.random() < 0.7 else "person", depth)
        if obj is not None:
            b.edges.append((verb, ":ARG1", obj))

    if rng.random() < 0.2:
        extra = _build_np(b, "person", depth)
        if extra is not None:
            b.edges.append((verb, ":ARG2", extra))

    for role, _, kind in PP_ROLES:
        if b.budget <= 0:
            break
        if rng.random() < 0.13:
            target = _build_np(b, kind, depth)
            if target is not None:
                b.edges.append((verb, role, target))


def _inject_reentrancies(b: _Builder, rate: float) -> None:
    rng = b.rng
    class_counts: dict[str, int] = {}
    for var, concept in b.nodes.items():
        cls = concept_class(concept)
        if cls is not None:
            class_counts[cls] = class_counts.get(cls, 0) + 1

    unique_targets = [
        (var, concept_class(concept))
        for var, concept in b.nodes.items()
        if concept_class(concept) is not None and class_counts[concept_class(concept)] == 1
    ]
    if not unique_targets:
        return
    verbs = [v for v, c in b.nodes.items() if c.endswith("-01")]
    nouns = [v for v, c in b.nodes.items()
             if concept_class(c) in ("female", "male", "thing", "place")]

    for _ in range(3):
        if rng.random() >= rate:
            continue
        candidates = []
        for var, cls in unique_targets:
            existing = {(s, r) for s, r, t in b.edges}
            children = {(s, t) for s, r, t in b.edges}
            for verb in verbs:
                if (verb, var) in children:
                    continue
                if cls in ("female", "male"):
                    roles = [":ARG2", ":accompanier", ":beneficiary"]
                elif cls == "thing":
                    roles = [":instrument"]
                elif cls == "place":
                    roles = [":location", ":source", ":destination"]
                else:
                    roles = [":time"]
                for role in roles:
                    if (verb, role) not in existing:
                        candidates.append((verb, role, var))
            if cls in ("female", "male"):
                for noun in nouns:
                    if noun == var or (noun, var) in children:
                        continue
                    if (noun, ":poss") not in existing:
                        candidates.append((noun, ":poss", var))
        if candidates:
            b.edges.append(rng.choice(candidates))


def generate_graph(rng: random.Random, max_nodes: int = 8,
                   reentrancy_rate: float = 0.0) -> AmrGraph:
    """One random rooted graph; reentrancies only to pronoun-unique targets."""
    while True:
        b = _Builder(rng, max_nodes)
        root = b.new_node("verb")
        _build_clause(b, root, depth=0)
        if len(b.nodes) >= 3:
            break
    if reentrancy_rate > 0:
        _inject_reentrancies(b, reentrancy_rate)
    return AmrGraph(root=root, nodes=b.nodes, edges=tuple(b.edges))


# --- realization -------------------------------------------------------------------


def realize(g: AmrGraph) -> str:
    """Deterministic sentence for a graph; a pure function of the graph up to
    isomorphism (children are visited in sorted, role-keyed order)."""
    verb_word = dict(VERBS)
    children: dict[str, dict[str, list[str]]] = {v: {} for v in g.nodes}
    for src, role, tgt in g.edges:
        children[src].setdefault(role, []).append(tgt)

    realized: set[str] = set()
    words: list[str] = []

    def np_words(var: str) -> list[str]:
        concept = g.nodes[var]
        if var in realized:
            return [PRONOUN[concept_class(concept)]]
        realized.add(var)
        mods = sorted(g.nodes[m] for m in children[var].get(":mod", ()))
        out = ["the", *mods, concept]
        for owner in children[var].get(":poss", ()):
            out += ["of", *np_words(owner)]
        return out

    def clause_words(verb: str) -> list[str]:
        out: list[str] = []
        for subj in children[verb].get(":ARG0", ()):
            out += np_words(subj)
        out.append(verb_word[g.nodes[verb]])
        for role, prep, _ in PP_ROLES:
            for tgt in children[verb].get(role, ()):
                out += [prep, *np_words(tgt)]
        for obj in children[verb].get(":ARG1", ()):
            if g.nodes[obj] in verb_word:
                out += ["that", *clause_words(obj)]
            else:
                out += np_words(obj)
        for extra in children[verb].get(":ARG2", ()):
            out += ["to", *np_words(extra)]
        return out

    words = clause_words(g.root)
    return " ".join(words)


def canonical_key(g: AmrGraph) -> str:
    """Isomorphism key for generated graphs; relies on concept uniqueness."""
    concepts = list(g.nodes.values())
    if len(set(concepts)) != len(concepts):
        raise ValueError("canonical_key requires unique concepts per graph")
    label = {var: concept for var, concept in g.nodes.items()}
    edges = sorted((label[s], r, label[t]) for s, r, t in g.edges)
    return repr((label[g.root], edges))


def graph_hash(g: AmrGraph) -> str:
    return hashlib.sha256(canonical_key(g).encode("utf-8")).hexdigest()


def generate_corpus(n: int, seed: int = 0, max_nodes: int = 8,
                    reentrancy_rate: float = 0.0,
                    splits: tuple[float, float, float] = (0.8, 0.1, 0.1),
                    ) -> list[DatasetRecord]:
    """Generate ``n`` records with disjoint-by-graph-hash splits.

    Deterministic in (n, seed, max_nodes, reentrancy_rate): the same call
    yields a byte-identical corpus.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    rng = random.Random(seed)
    graphs: list[AmrGraph] = []
    seen: set[str] = set()
    attempts = 0
    while len(graphs) < n:
        attempts += 1
        if attempts > 200 * n + 1000:
            raise RuntimeError("inventory too small for the requested corpus size")
        g = generate_graph(rng, max_nodes=max_nodes, reentrancy_rate=reentrancy_rate)
        key = graph_hash(g)
        if key in seen:
            continue
        seen.add(key)
        graphs.append(g)

    n_train = round(n * splits[0])
    n_dev = round(n * splits[1])
    records = []
    for i, g in enumerate(graphs):
        split = "train" if i < n_train else ("dev" if i < n_train + n_dev else "test")
        records.append(DatasetRecord(amr=serialize_penman(g), text=realize(g), split=split))
    return records
