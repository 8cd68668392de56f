import pytest

from graph2text.penman import (
    PenmanError,
    graph_stats,
    is_isomorphic,
    normalize_inverse_roles,
    parse_penman,
    serialize_penman,
)

from conftest import random_graphs


class TestParse:
    def test_nested_possessive(self, nested_possessive):
        g = nested_possessive
        assert set(g.nodes) == {"s", "u", "s2", "a"}
        assert g.nodes == {"s": "subsidize-01", "u": "utility", "s2": "she", "a": "all"}
        assert g.root == "s"
        assert g.edges == (
            ("s", ":ARG1", "u"),
            ("u", ":poss", "s2"),
            ("u", ":mod", "a"),
        )

    def test_minimal_graph(self):
        g = parse_penman("(a / alpha)")
        assert g.root == "a"
        assert g.nodes == {"a": "alpha"}
        assert g.edges == ()

    def test_family_breakup_counts(self, family_breakup):
        # 10 declared variables plus the month constant; 11 edges as written
        g = family_breakup
        assert len(g.nodes) == 11
        assert len(g.edges) == 11
        reentrant = [v for v, c in g.in_degrees().items() if c > 1]
        assert reentrant == ["i"]

    def test_constants_become_nodes(self, family_breakup):
        constants = [v for v in family_breakup.nodes if v.startswith("#")]
        assert len(constants) == 1
        assert family_breakup.nodes[constants[0]] == "8"

    def test_edge_order_is_source_order(self, family_breakup):
        roles = [r for _, r, _ in family_breakup.edges]
        assert roles[:3] == [":ARG1", ":ARG3", ":ARG0-of"]

    @pytest.mark.parametrize("bad, fragment", [
        ("(a / alpha", "unbalanced"),
        ("(a / alpha))", "trailing"),
        ("(a / alpha :ARG0 b)", "undeclared variable"),
        ("(a / alpha :ARG0 (a / beta))", "duplicate declaration"),
    ])
    def test_errors_carry_byte_offsets(self, bad, fragment):
        with pytest.raises(PenmanError) as err:
            parse_penman(bad)
        assert fragment in str(err.value)
        assert err.value.offset >= 0

    def test_forward_reference_resolves(self):
        g = parse_penman("(a / alpha :ARG0 b :ARG1 (b / beta))")
        assert ("a", ":ARG0", "b") in g.edges
        assert len(g.nodes) == 2


class TestSerialize:
    def test_single_node(self):
        assert serialize_penman(parse_penman("(a / alpha)")) == "(a / alpha)"

    def test_round_trip_nested_possessive(self, nested_possessive_text, nested_possessive):
        text = serialize_penman(nested_possessive)
        assert is_isomorphic(parse_penman(text), nested_possessive, match_root=True)

    def test_round_trip_preserves_counts(self, family_breakup):
        again = parse_penman(serialize_penman(family_breakup))
        assert len(again.nodes) == 11
        assert len(again.edges) == 11
        assert is_isomorphic(again, family_breakup, match_root=True)

    def test_round_trip_random_graphs(self, graph_sample):
        for g in graph_sample:
            assert is_isomorphic(parse_penman(serialize_penman(g)), g, match_root=True)


class TestNormalize:
    def test_definition(self):
        g = parse_penman("(u / utility :poss-of (s / she))")
        gn = normalize_inverse_roles(g)
        assert gn.edges == (("s", ":poss", "u"),)

    def test_double_inverse_collapses(self):
        g = parse_penman("(u / utility :poss-of-of (s / she))")
        gn = normalize_inverse_roles(g)
        assert gn.edges == (("u", ":poss", "s"),)

    def test_reoriented_graph_matches_canonical(self, nested_possessive):
        # same meaning written from the leaf, with inverse roles
        alt = parse_penman(
            "(s2 / she :poss-of (u / utility :ARG1-of (s / subsidize-01) :mod (a / all)))")
        assert not is_isomorphic(alt, nested_possessive)
        assert is_isomorphic(normalize_inverse_roles(alt),
                             normalize_inverse_roles(nested_possessive))

    def test_idempotent_on_random_graphs(self, graph_sample):
        for g in graph_sample:
            once = normalize_inverse_roles(g)
            twice = normalize_inverse_roles(once)
            assert once.edges == twice.edges and once.nodes == twice.nodes

    def test_exempt_roles_kept(self):
        g = parse_penman("(c / cup :consist-of (g / glass))")
        gn = normalize_inverse_roles(g, exempt=(":consist-of",))
        assert gn.edges == (("c", ":consist-of", "g"),)

    def test_preserves_stats(self, graph_sample):
        for g in graph_sample[:30]:
            assert graph_stats(g) == graph_stats(normalize_inverse_roles(g))


class TestStats:
    def test_nested_possessive(self, nested_possessive):
        st = graph_stats(nested_possessive)
        assert st["size"] == 7  # 4 nodes + 3 edges
        assert st["reentrancies"] == 0
        assert st["diameter"] == 4

    def test_single_node(self):
        st = graph_stats(parse_penman("(a / alpha)"))
        assert st == {"size": 1, "diameter": 0, "reentrancies": 0}

    def test_family_breakup_reentrancy(self, family_breakup):
        # only "i" is referenced twice in the text; inverse-role normalization
        # additionally turns the two relative clauses into in-edges, so the
        # normalized graph has three nodes with in-degree > 1
        st = graph_stats(family_breakup)
        assert st["size"] == 22
        assert st["reentrancies"] == 3

    def test_reentrancy_invariant_under_serialization_order(self, graph_sample):
        from graph2text.graphrep import linearize
        for g in graph_sample[:25]:
            base = graph_stats(g)["reentrancies"]
            for seed in (0, 1):
                redone = parse_penman(linearize(g, mode="random", seed=seed).penman)
                assert graph_stats(redone)["reentrancies"] == base


class TestIsomorphism:
    def test_variable_renaming(self):
        a = parse_penman("(x / cat :ARG0 (y / dog))")
        b = parse_penman("(p / cat :ARG0 (q / dog))")
        assert is_isomorphic(a, b, match_root=True)

    def test_role_mismatch(self):
        a = parse_penman("(x / cat :ARG0 (y / dog))")
        b = parse_penman("(x / cat :ARG1 (y / dog))")
        assert not is_isomorphic(a, b)

    def test_root_sensitivity(self):
        a = parse_penman("(x / cat :ARG0 (y / dog))")
        b = parse_penman("(y / dog :ARG0-of (x / cat))")
        assert not is_isomorphic(a, b, match_root=True)
        assert is_isomorphic(normalize_inverse_roles(a), normalize_inverse_roles(b))

    def test_duplicate_concepts_need_structure(self):
        a = parse_penman("(p / person :ARG0-of (h / have-rel-role-91 :ARG1 (p2 / person)))")
        b = parse_penman("(p / person :ARG0-of (h / have-rel-role-91 :ARG2 (p2 / person)))")
        assert not is_isomorphic(a, b)

    def test_permuted_random_graphs(self):
        for g in random_graphs(20, seed=3):
            relabel = {v: f"z{i}" for i, v in enumerate(g.nodes)}
            from graph2text.penman import AmrGraph
            permuted = AmrGraph(
                root=relabel[g.root],
                nodes={relabel[v]: c for v, c in reversed(list(g.nodes.items()))},
                edges=tuple((relabel[s], r, relabel[t]) for s, r, t in reversed(g.edges)),
            )
            assert is_isomorphic(g, permuted, match_root=True)
