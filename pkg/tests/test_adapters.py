import numpy as np
import pytest

import graph2text.autodiff as ad
from graph2text.adapters import (
    AdapterConfig,
    adapt_forward,
    basis_weights,
    collate_conv,
    conv_arrays,
    gcn_conv,
    init_adapter_params,
    relation_weights,
    rgcn_conv,
    structadapt_forward,
)
from graph2text.autodiff import Tensor
from graph2text.graphrep import DEFAULT, REVERSE, TokenGraph

from helpers import (
    dense_gcn_reference,
    dense_rgcn_reference,
    finite_difference_check,
    random_token_graph,
)


def make_tg(n, edges):
    return TokenGraph(seq_len=n, edges=tuple(sorted(edges)),
                      position_origin=tuple(f"n:{i}" for i in range(n)),
                      relations=(DEFAULT, REVERSE))


def adapter_params(cfg, d, layers=1, seed=0, up_scale=0.0):
    params = init_adapter_params(cfg, d, layers, seed=seed)
    if up_scale:
        rng = np.random.default_rng(99)
        for name, p in params.items():
            if name.endswith("w_up"):
                p.data = rng.normal(0, up_scale, size=p.data.shape)
    return params


class TestAdaptForward:
    def test_zero_up_projection_is_identity(self):
        cfg = AdapterConfig(variant="adapt", hidden=4)
        params = adapter_params(cfg, d=8)
        h = Tensor(np.random.default_rng(0).normal(size=(2, 5, 8)))
        out = adapt_forward(params, "adapter.enc.0", h)
        np.testing.assert_array_equal(out.data, h.data)

    def test_output_width_independent_of_hidden(self):
        for m in (1, 3, 9):
            cfg = AdapterConfig(variant="adapt", hidden=m)
            params = adapter_params(cfg, d=8, up_scale=0.1)
            h = Tensor(np.random.default_rng(1).normal(size=(3, 8)))
            assert adapt_forward(params, "adapter.enc.0", h).shape == (3, 8)

    def test_gradient_check(self):
        cfg = AdapterConfig(variant="adapt", hidden=4)
        params = adapter_params(cfg, d=8, up_scale=0.1)
        rng = np.random.default_rng(2)
        h = Tensor(rng.normal(size=(3, 8)), requires_grad=True)
        tensors = [h] + [p for n, p in params.items() if n.startswith("adapter.enc.0")]
        w = rng.normal(size=(3, 8))
        err = finite_difference_check(
            lambda: ad.tensor_sum(ad.mul(adapt_forward(params, "adapter.enc.0", h), w)),
            tensors)
        assert err <= 1e-4


class TestGcnConv:
    def test_isolated_position_reduces_to_self(self):
        tg = make_tg(1, [])
        arrays = conv_arrays(tg, (DEFAULT, REVERSE)).gcn
        h = Tensor(np.array([[2.0, -1.0]]))
        w = Tensor(np.eye(2))
        out = gcn_conv(h, arrays, w)
        np.testing.assert_allclose(out.data, h.data)

    def test_single_edge_hand_values(self):
        # edge u -> v: d_v = 2 (in-degree 1 plus self), d_u = 1;
        # neighbor term 1/sqrt(d_v * d_u) = 1/sqrt(2), self term 1/d_v = 1/2
        tg = make_tg(2, [(0, 1, DEFAULT), (1, 0, REVERSE)])
        arrays = conv_arrays(tg, (DEFAULT, REVERSE)).gcn
        h = Tensor(np.ones((2, 3)))
        w = Tensor(np.eye(3))
        out = gcn_conv(h, arrays, w)
        np.testing.assert_allclose(out.data[1], (1 / np.sqrt(2) + 0.5) * np.ones(3))
        np.testing.assert_allclose(out.data[0], np.ones(3))  # self only, d=1

    def test_reverse_edges_ignored(self):
        with_rev = make_tg(2, [(0, 1, DEFAULT), (1, 0, REVERSE)])
        h = Tensor(np.random.default_rng(3).normal(size=(2, 3)))
        w = Tensor(np.random.default_rng(4).normal(size=(2, 3)))
        out_a = gcn_conv(h, conv_arrays(with_rev, (DEFAULT, REVERSE)).gcn, w)
        only_fwd = TokenGraph(seq_len=2, edges=((0, 1, DEFAULT),),
                              position_origin=("n:0", "n:1"),
                              relations=(DEFAULT, REVERSE))
        out_b = gcn_conv(h, conv_arrays(only_fwd, (DEFAULT, REVERSE)).gcn, w)
        np.testing.assert_allclose(out_a.data, out_b.data)

    @pytest.mark.parametrize("degree_mode", ["in_self", "total_self"])
    def test_matches_dense_oracle(self, degree_mode):
        rng = np.random.default_rng(5)
        for _ in range(30):
            n = int(rng.integers(1, 9))
            tg = random_token_graph(rng, n)
            h = rng.normal(size=(n, 4))
            w = rng.normal(size=(3, 4))
            arrays = conv_arrays(tg, (DEFAULT, REVERSE), gcn_degree=degree_mode).gcn
            out = gcn_conv(Tensor(h), arrays, Tensor(w))
            np.testing.assert_allclose(out.data, dense_gcn_reference(tg, h, w, degree_mode),
                                       atol=1e-10)

    def test_exhaustive_small_graphs(self):
        # every directed default-edge graph on 3 positions
        rng = np.random.default_rng(6)
        h = rng.normal(size=(3, 2))
        w = rng.normal(size=(2, 2))
        pairs = [(s, t) for s in range(3) for t in range(3) if s != t]
        for mask in range(2 ** len(pairs)):
            edges = set()
            for bit, (s, t) in enumerate(pairs):
                if mask >> bit & 1:
                    edges.add((s, t, DEFAULT))
                    edges.add((t, s, REVERSE))
            tg = make_tg(3, edges)
            arrays = conv_arrays(tg, (DEFAULT, REVERSE)).gcn
            out = gcn_conv(Tensor(h), arrays, Tensor(w))
            np.testing.assert_allclose(out.data, dense_gcn_reference(tg, h, w), atol=1e-12)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(7)
        n = 6
        tg = random_token_graph(rng, n)
        h = rng.normal(size=(n, 4))
        w = rng.normal(size=(3, 4))
        perm = rng.permutation(n)
        tg_p = TokenGraph(seq_len=n,
                          edges=tuple(sorted((int(perm[s]), int(perm[t]), rel)
                                             for s, t, rel in tg.edges)),
                          position_origin=tuple(f"n:{i}" for i in range(n)),
                          relations=tg.relations)
        out = gcn_conv(Tensor(h), conv_arrays(tg, tg.relations).gcn, Tensor(w)).data
        h_p = np.empty_like(h)
        h_p[perm] = h
        out_p = gcn_conv(Tensor(h_p), conv_arrays(tg_p, tg.relations).gcn, Tensor(w)).data
        np.testing.assert_allclose(out, out_p[perm], atol=1e-12)


class TestRgcnConv:
    def test_single_default_neighbor(self):
        tg = make_tg(2, [(0, 1, DEFAULT)])
        arrays = conv_arrays(tg, (DEFAULT, REVERSE)).rgcn
        rng = np.random.default_rng(8)
        h = Tensor(rng.normal(size=(2, 3)))
        weights = {DEFAULT: Tensor(rng.normal(size=(2, 3))),
                   REVERSE: Tensor(rng.normal(size=(2, 3)))}
        out = rgcn_conv(h, arrays, weights)
        np.testing.assert_allclose(out.data[1], weights[DEFAULT].data @ h.data[0])
        np.testing.assert_allclose(out.data[0], 0.0)  # no self term

    def test_mean_over_identical_neighbors(self):
        tg = make_tg(3, [(0, 2, DEFAULT), (1, 2, DEFAULT)])
        arrays = conv_arrays(tg, (DEFAULT, REVERSE)).rgcn
        rng = np.random.default_rng(9)
        row = rng.normal(size=3)
        h = Tensor(np.stack([row, row, rng.normal(size=3)]))
        weights = {DEFAULT: Tensor(rng.normal(size=(2, 3))),
                   REVERSE: Tensor(np.zeros((2, 3)))}
        out = rgcn_conv(h, arrays, weights)
        np.testing.assert_allclose(out.data[2], weights[DEFAULT].data @ row)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(30):
            n = int(rng.integers(2, 7))
            tg = random_token_graph(rng, n)
            h = rng.normal(size=(n, 4))
            weights_np = {DEFAULT: rng.normal(size=(3, 4)),
                          REVERSE: rng.normal(size=(3, 4))}
            arrays = conv_arrays(tg, (DEFAULT, REVERSE)).rgcn
            out = rgcn_conv(Tensor(h), arrays,
                            {k: Tensor(v) for k, v in weights_np.items()})
            np.testing.assert_allclose(out.data, dense_rgcn_reference(tg, h, weights_np),
                                       atol=1e-10)

    def test_zero_reverse_weight_equals_no_reverse_edges(self):
        rng = np.random.default_rng(11)
        tg = random_token_graph(rng, 5)
        h = Tensor(rng.normal(size=(5, 3)))
        w_default = rng.normal(size=(2, 3))
        weights = {DEFAULT: Tensor(w_default), REVERSE: Tensor(np.zeros((2, 3)))}
        out_full = rgcn_conv(h, conv_arrays(tg, tg.relations).rgcn, weights)
        stripped = TokenGraph(
            seq_len=5,
            edges=tuple(e for e in tg.edges if e[2] == DEFAULT),
            position_origin=tg.position_origin, relations=tg.relations)
        out_stripped = rgcn_conv(h, conv_arrays(stripped, tg.relations).rgcn, weights)
        np.testing.assert_allclose(out_full.data, out_stripped.data)

    def test_unknown_relation_rejected(self):
        tg = TokenGraph(seq_len=2, edges=((0, 1, "mystery"),),
                        position_origin=("n:0", "n:1"), relations=(DEFAULT, REVERSE))
        with pytest.raises(ValueError, match="unknown relation"):
            conv_arrays(tg, (DEFAULT, REVERSE))

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(13)
        n = 6
        tg = random_token_graph(rng, n)
        h = rng.normal(size=(n, 4))
        weights_np = {DEFAULT: rng.normal(size=(3, 4)), REVERSE: rng.normal(size=(3, 4))}
        perm = rng.permutation(n)
        tg_p = TokenGraph(seq_len=n,
                          edges=tuple(sorted((int(perm[s]), int(perm[t]), rel)
                                             for s, t, rel in tg.edges)),
                          position_origin=tg.position_origin, relations=tg.relations)
        weights = {k: Tensor(v) for k, v in weights_np.items()}
        out = rgcn_conv(Tensor(h), conv_arrays(tg, tg.relations).rgcn, weights).data
        h_p = np.empty_like(h)
        h_p[perm] = h
        out_p = rgcn_conv(Tensor(h_p), conv_arrays(tg_p, tg.relations).rgcn, weights).data
        np.testing.assert_allclose(out, out_p[perm], atol=1e-12)


class TestStructAdapt:
    def graph_batch(self, tg):
        return collate_conv([conv_arrays(tg, tg.relations)], row_stride=tg.seq_len)

    def test_zero_up_projection_is_identity(self):
        for variant in ("structadapt_gcn", "structadapt_rgcn"):
            cfg = AdapterConfig(variant=variant, hidden=4)
            params = adapter_params(cfg, d=6)
            tg = make_tg(3, [(0, 1, DEFAULT), (1, 0, REVERSE)])
            h = Tensor(np.random.default_rng(0).normal(size=(1, 3, 6)))
            out = structadapt_forward(params, "adapter.enc.0", cfg, h, self.graph_batch(tg))
            np.testing.assert_array_equal(out.data, h.data)

    def test_sensitive_to_adjacency_where_adapt_is_not(self):
        cfg = AdapterConfig(variant="structadapt_rgcn", hidden=4)
        params = adapter_params(cfg, d=6, up_scale=0.3)
        rng = np.random.default_rng(1)
        h = Tensor(rng.normal(size=(1, 4, 6)))
        tg_a = make_tg(4, [(0, 1, DEFAULT), (1, 0, REVERSE)])
        tg_b = make_tg(4, [(0, 2, DEFAULT), (2, 0, REVERSE)])
        out_a = structadapt_forward(params, "adapter.enc.0", cfg, h, self.graph_batch(tg_a))
        out_b = structadapt_forward(params, "adapter.enc.0", cfg, h, self.graph_batch(tg_b))
        assert np.abs(out_a.data - out_b.data).max() > 1e-6

        acfg = AdapterConfig(variant="adapt", hidden=4)
        aparams = adapter_params(acfg, d=6, up_scale=0.3)
        seq_a = adapt_forward(aparams, "adapter.enc.0", h)
        seq_b = adapt_forward(aparams, "adapter.enc.0", h)
        np.testing.assert_array_equal(seq_a.data, seq_b.data)

    def test_gradient_check_rgcn(self):
        cfg = AdapterConfig(variant="structadapt_rgcn", hidden=3)
        params = adapter_params(cfg, d=6, up_scale=0.2)
        rng = np.random.default_rng(2)
        tg = random_token_graph(rng, 5)
        batch = self.graph_batch(tg)
        h = Tensor(rng.normal(size=(1, 5, 6)), requires_grad=True)
        w = rng.normal(size=(1, 5, 6))
        tensors = [h] + [p for n, p in params.items() if n.startswith("adapter.enc.0")]
        err = finite_difference_check(
            lambda: ad.tensor_sum(ad.mul(
                structadapt_forward(params, "adapter.enc.0", cfg, h, batch), w)),
            tensors)
        assert err <= 1e-4


class TestBasisDecomposition:
    def test_single_basis_shares_one_matrix(self):
        coeff = Tensor(np.ones((3, 1)))
        mats = Tensor(np.random.default_rng(0).normal(size=(1, 2, 4)))
        w = basis_weights(coeff, mats)
        for r in range(3):
            np.testing.assert_allclose(w.data[r], mats.data[0])

    def test_identity_coefficients_recover_bases(self):
        mats_np = np.random.default_rng(1).normal(size=(3, 2, 4))
        w = basis_weights(Tensor(np.eye(3)), Tensor(mats_np))
        np.testing.assert_allclose(w.data, mats_np)

    def test_gradients_flow_to_coefficients_and_bases(self):
        rng = np.random.default_rng(2)
        coeff = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        mats = Tensor(rng.normal(size=(3, 2, 4)), requires_grad=True)
        w = rng.normal(size=(2, 2, 4))
        err = finite_difference_check(
            lambda: ad.tensor_sum(ad.mul(basis_weights(coeff, mats), w)), [coeff, mats])
        assert err <= 1e-4

    def test_relation_weights_uses_basis(self):
        cfg = AdapterConfig(variant="structadapt_rgcn", hidden=2, basis=2,
                            relations=(DEFAULT, REVERSE))
        params = init_adapter_params(cfg, d_model=4, layers=1, seed=0)
        weights = relation_weights(params, "adapter.enc.0", cfg)
        assert set(weights) == {DEFAULT, REVERSE}
        assert weights[DEFAULT].shape == (2, 4)


class TestCountParams:
    def test_no_adapters_fraction_zero(self):
        from graph2text.model import ModelBundle
        from graph2text.transformer import BackboneConfig
        bundle = ModelBundle.build(BackboneConfig(vocab_size=30, layers=2, d_model=8,
                                                  heads=2, ffn=16))
        counts = bundle.count("adapters_only")
        assert counts["trainable"] == 0 and counts["fraction"] == 0.0

    def test_finetune_all_fraction_one(self):
        from graph2text.model import ModelBundle
        from graph2text.transformer import BackboneConfig
        bundle = ModelBundle.build(BackboneConfig(vocab_size=30, layers=2, d_model=8,
                                                  heads=2, ffn=16))
        counts = bundle.count("finetune_all")
        assert counts["trainable"] == counts["total"] and counts["fraction"] == 1.0

    def test_adapt_closed_form(self):
        from graph2text.model import ModelBundle
        from graph2text.transformer import BackboneConfig
        d, m, layers = 64, 16, 2
        cfg = BackboneConfig(vocab_size=100, layers=layers, d_model=d, heads=4, ffn=128)
        bundle = ModelBundle.build(cfg, AdapterConfig(variant="adapt", hidden=m))
        counts = bundle.count("adapters_only")
        per_layer = 2 * d * m + 2 * d
        assert counts["trainable"] == 2 * layers * per_layer  # enc + dec stacks
        assert counts["fraction"] == counts["trainable"] / counts["total"]

    def test_adapt_and_gcn_have_identical_counts(self):
        from graph2text.model import ModelBundle
        from graph2text.transformer import BackboneConfig
        cfg = BackboneConfig(vocab_size=100, layers=2, d_model=32, heads=4, ffn=64)
        for m in (4, 16):
            a = ModelBundle.build(cfg, AdapterConfig(variant="adapt", hidden=m))
            g = ModelBundle.build(cfg, AdapterConfig(variant="structadapt_gcn", hidden=m))
            assert a.count("adapters_only") == g.count("adapters_only")


class TestAdapterConfig:
    def test_invalid_variant_rejected(self):
        with pytest.raises(ValueError):
            AdapterConfig(variant="mystery", hidden=4)

    def test_nonpositive_hidden_rejected(self):
        with pytest.raises(ValueError):
            AdapterConfig(variant="adapt", hidden=0)
