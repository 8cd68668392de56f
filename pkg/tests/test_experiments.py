import numpy as np
import pytest

from graph2text.bpe import train_vocab
from graph2text.data import split_records
from graph2text.experiments import (
    FINE_TUNE,
    Harness,
    ModelSpec,
    adapt_hidden_matching_rgcn,
    linearization_robustness,
    low_data,
    mean_sd,
    placement_ablation,
    rows_to_csv,
    schedule_low_data,
    single_side_hidden,
    sweep_hidden,
    write_text,
)
from graph2text.graphrep import linearize
from graph2text.model import ModelBundle
from graph2text.penman import parse_penman
from graph2text.synth import generate_corpus
from graph2text.training import TrainConfig
from graph2text.transformer import BackboneConfig, init_backbone


class TestParameterMatching:
    def test_rgcn_to_adapt_width(self):
        assert adapt_hidden_matching_rgcn(16) == 20
        assert adapt_hidden_matching_rgcn(32) == 40
        with pytest.raises(ValueError):
            adapt_hidden_matching_rgcn(10)

    def test_rgcn_adapt_counts_equal(self):
        from graph2text.adapters import AdapterConfig
        cfg = BackboneConfig(vocab_size=80, layers=2, d_model=32, heads=4, ffn=64)
        for m in (4, 16):
            rgcn = ModelBundle.build(cfg, AdapterConfig(variant="structadapt_rgcn", hidden=m))
            adapt = ModelBundle.build(
                cfg, AdapterConfig(variant="adapt", hidden=adapt_hidden_matching_rgcn(m)))
            assert (rgcn.count("adapters_only")["trainable"]
                    == adapt.count("adapters_only")["trainable"])

    def test_single_side_width(self):
        from graph2text.adapters import AdapterConfig
        cfg = BackboneConfig(vocab_size=80, layers=2, d_model=32, heads=4, ffn=64)
        m = 8
        both = ModelBundle.build(cfg, AdapterConfig(variant="adapt", hidden=m))
        enc_only = ModelBundle.build(
            cfg, AdapterConfig(variant="adapt", hidden=single_side_hidden(m), decoder=False))
        dec_only = ModelBundle.build(
            cfg, AdapterConfig(variant="adapt", hidden=single_side_hidden(m), encoder=False))
        counts = {b.count("adapters_only")["trainable"] for b in (both, enc_only, dec_only)}
        assert len(counts) == 1


class TestSchedules:
    def test_low_data_run_count(self):
        assert len(schedule_low_data([1000], samples=5, seeds=2)) == 10

    def test_low_data_multiple_sizes(self):
        plan = schedule_low_data([100, 200], samples=2, seeds=3)
        assert len(plan) == 12
        assert {p["size"] for p in plan} == {100, 200}

    def test_mean_sd(self):
        mean, sd = mean_sd([1.0, 3.0])
        assert mean == pytest.approx(2.0)
        assert sd == pytest.approx(np.std([1.0, 3.0], ddof=1))
        assert mean_sd([5.0]) == (5.0, 0.0)


class TestCsv:
    def test_floats_fixed_precision(self):
        text = rows_to_csv(["a", "b"], [["x", 1.23456789], ["y", 2.0]])
        assert text == "a,b\nx,1.2346\ny,2.0000\n"

    def test_write_read_bytes(self, tmp_path):
        path = tmp_path / "rows.csv"
        write_text(path, rows_to_csv(["h"], [["v"]]))
        assert path.read_bytes() == b"h\nv\n"


@pytest.fixture(scope="module")
def tiny_harness():
    records = generate_corpus(60, seed=13, max_nodes=5, reentrancy_rate=0.3)
    splits = split_records(records)
    corpus = [r.text for r in records]
    for r in records:
        corpus.extend(linearize(parse_penman(r.amr)).symbols)
    vocab = train_vocab(corpus, 420)
    cfg = BackboneConfig(vocab_size=vocab.size, layers=1, d_model=16, heads=2, ffn=24,
                         max_src_len=96, max_tgt_len=48)
    state = {k: p.data.copy() for k, p in init_backbone(cfg, seed=0).items()}
    base = TrainConfig(mode="adapters_only", batch_size=8, max_steps=10, patience=2,
                       max_epochs=2)
    return Harness(splits["train"], splits["dev"], vocab, cfg, state, base)


class TestHarnessRuns:
    def test_sweep_deterministic_csv(self, tiny_harness):
        header, rows_a = sweep_hidden(tiny_harness, dims=[4], seeds=(0,),
                                      variants=("adapt",))
        _, rows_b = sweep_hidden(tiny_harness, dims=[4], seeds=(0,),
                                 variants=("adapt",))
        assert rows_to_csv(header, rows_a) == rows_to_csv(header, rows_b)
        assert rows_a[0][0] == "adapt" and rows_a[0][1] == 4

    def test_low_data_row_shape(self, tiny_harness):
        header, rows = low_data(tiny_harness, sizes=[16], samples=2, seeds=1,
                                specs=(ModelSpec(name="adapt", variant="adapt", hidden=4),))
        assert header[0] == "spec"
        assert rows[0][1] == 16 and rows[0][2] == 2

    def test_low_data_size_validation(self, tiny_harness):
        with pytest.raises(ValueError):
            low_data(tiny_harness, sizes=[10_000], samples=1, seeds=1,
                     specs=(FINE_TUNE,))

    def test_robustness_deltas_vs_first_spec(self, tiny_harness):
        specs = (ModelSpec(name="adapt", variant="adapt", hidden=4),
                 ModelSpec(name="rgcn", variant="structadapt_rgcn", hidden=4))
        header, rows = linearization_robustness(tiny_harness, specs,
                                                modes=("canon",), seeds=(0,))
        assert header[-1] == "delta_vs_adapt"
        baseline_row = next(r for r in rows if r[0] == "adapt")
        assert baseline_row[-1] == pytest.approx(0.0)

    def test_placement_ablation_counts_equal(self, tiny_harness):
        header, rows = placement_ablation(tiny_harness, hidden=4, seeds=(0,))
        counts = {row[2] for row in rows}
        assert len(counts) == 1
        assert {row[0] for row in rows} == {
            "adapt-enc", "adapt-dec", "adapt-enc+dec",
            "structadapt_gcn-enc", "structadapt_gcn-enc+dec"}
