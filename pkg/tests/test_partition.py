import numpy as np
import pytest

from graphvault.errors import BudgetExceededError
from graphvault.models import backbone_forward, make_spec, rectifier_forward
from graphvault.partition import (DIRECTION, GraphStats, MemoryLedger,
                                  audit_no_leak, dense_adjacency_mb,
                                  infeasibility_report, run_partitioned,
                                  TapeEntry)


class TestChannel:
    def test_series_single_transfer(self, trained_all_topologies, sbm_graph):
        rep = run_partitioned(trained_all_topologies["series"], sbm_graph, [0, 1])
        assert len(rep.channel.transfers) == 1
        assert rep.channel.transfers[0].tag == "backbone_h2"

    def test_parallel_and_cascaded_transfer_all(self, trained_all_topologies,
                                                sbm_graph):
        for topo in ("parallel", "cascaded"):
            rep = run_partitioned(trained_all_topologies[topo], sbm_graph, [0])
            assert len(rep.channel.transfers) == 3

    def test_one_way_directions(self, trained_all_topologies, sbm_graph):
        for pm in trained_all_topologies.values():
            rep = run_partitioned(pm, sbm_graph, [0])
            assert rep.channel.directions() <= {DIRECTION}

    def test_byte_accounting_exact(self, trained_parallel, sbm_graph):
        rep = run_partitioned(trained_parallel, sbm_graph, [0])
        for t in rep.channel.transfers:
            assert t.n_bytes == t.shape[0] * t.shape[1] * 4
        assert rep.channel.total_bytes == sum(
            t.shape[0] * t.shape[1] * 4 for t in rep.channel.transfers)


class TestEquivalence:
    def test_bit_exact_vs_monolithic_all_topologies(self, trained_all_topologies,
                                                    sbm_graph):
        query = np.arange(sbm_graph.n_nodes)
        for topo, pm in trained_all_topologies.items():
            rep = run_partitioned(pm, sbm_graph, query)
            bb = backbone_forward(pm.backbone, sbm_graph.features, pm.sub_adj)
            logits = rectifier_forward(pm.rectifier, pm.plan, bb, pm.real_adj)
            np.testing.assert_array_equal(rep.labels, logits.argmax(axis=1),
                                          err_msg=topo)

    def test_query_subset(self, trained_parallel, sbm_graph):
        full = run_partitioned(trained_parallel, sbm_graph,
                               np.arange(sbm_graph.n_nodes))
        some = run_partitioned(trained_parallel, sbm_graph, [5, 17, 3])
        np.testing.assert_array_equal(some.labels, full.labels[[5, 17, 3]])

    def test_empty_query(self, trained_parallel, sbm_graph):
        rep = run_partitioned(trained_parallel, sbm_graph, [])
        assert rep.labels.size == 0

    def test_mlp_backbone_partition_bit_exact(self, sbm_graph):
        # the dense-baseline backbone also deploys behind the vault
        from graphvault.training import TrainConfig, train_partitioned
        from conftest import SUB_SPEC

        spec = make_spec("mlp", sbm_graph.n_features, sbm_graph.n_classes)
        pm = train_partitioned(sbm_graph, SUB_SPEC, spec, "parallel",
                               TrainConfig(epochs=30, seed=2))
        rep = run_partitioned(pm, sbm_graph, np.arange(sbm_graph.n_nodes))
        bb = backbone_forward(pm.backbone, sbm_graph.features, None)
        logits = rectifier_forward(pm.rectifier, pm.plan, bb, pm.real_adj)
        np.testing.assert_array_equal(rep.labels, logits.argmax(axis=1))
        assert audit_no_leak(rep)

    def test_invalid_query(self, trained_parallel, sbm_graph):
        with pytest.raises(ValueError):
            run_partitioned(trained_parallel, sbm_graph, [sbm_graph.n_nodes])


class TestLabelOnly:
    def test_audit_passes_on_normal_run(self, trained_all_topologies, sbm_graph):
        for pm in trained_all_topologies.values():
            rep = run_partitioned(pm, sbm_graph, [0, 1, 2])
            assert audit_no_leak(rep)

    def test_labels_are_integers(self, trained_parallel, sbm_graph):
        rep = run_partitioned(trained_parallel, sbm_graph, [0])
        assert np.issubdtype(rep.labels.dtype, np.integer)

    def test_no_vault_floats_on_tape(self, trained_parallel, sbm_graph):
        rep = run_partitioned(trained_parallel, sbm_graph, [0])
        for entry in rep.tape:
            if entry.origin == "vault":
                assert not np.issubdtype(np.dtype(entry.dtype), np.floating)

    def test_instrumented_leak_detected(self, trained_parallel, sbm_graph):
        def leak(tape, logits):
            tape.append(TapeEntry("leak", "vault", "rectifier_logits",
                                  str(logits.dtype), logits.shape))

        rep = run_partitioned(trained_parallel, sbm_graph, [0], _leak_hook=leak)
        assert not audit_no_leak(rep)

    def test_attacker_view_is_backbone_plus_labels(self, trained_parallel,
                                                   sbm_graph):
        rep = run_partitioned(trained_parallel, sbm_graph, [0])
        kinds = {(e.kind, e.origin) for e in rep.tape}
        assert kinds == {("embedding", "untrusted"), ("transfer", "untrusted"),
                         ("labels", "vault")}


class TestLedger:
    def test_categories_sum_to_current(self, trained_parallel, sbm_graph):
        rep = run_partitioned(trained_parallel, sbm_graph, [0])
        mem = rep.memory
        assert sum(mem.categories.values()) == mem.current
        assert mem.peak >= mem.current >= 0

    def test_resident_state_is_adjacency_and_params(self, trained_parallel,
                                                    sbm_graph):
        rep = run_partitioned(trained_parallel, sbm_graph, [0])
        assert rep.memory.categories["activations"] == 0
        assert rep.memory.categories["input features"] == 0
        assert rep.memory.categories["adjacency COO"] > 0
        assert rep.memory.categories["parameters"] > 0

    def test_peak_below_enclave_budget(self, trained_all_topologies, sbm_graph):
        for pm in trained_all_topologies.values():
            rep = run_partitioned(pm, sbm_graph, [0])
            assert rep.memory.peak < 96 * 2**20

    def test_budget_exceeded_raises(self, trained_parallel, sbm_graph):
        with pytest.raises(BudgetExceededError):
            run_partitioned(trained_parallel, sbm_graph, [0],
                            epc_budget_mb=0.0001)

    def test_over_free_rejected(self):
        ledger = MemoryLedger()
        ledger.alloc("parameters", 10)
        with pytest.raises(ValueError):
            ledger.free("parameters", 11)


class TestInfeasibility:
    def test_pubmed_dense_adjacency_published_value(self):
        assert dense_adjacency_mb(19717) == pytest.approx(8898.01, rel=1e-3)

    def test_pubmed_scale_exceeds_budget(self):
        rep = infeasibility_report(GraphStats(19717, 500, 3),
                                   make_spec("M1", 500, 3))
        assert rep.exceeds_budget
        assert rep.dense_adjacency_bytes / 2**20 == pytest.approx(8898.01, rel=1e-3)

    def test_cora_scale_full_model_exceeds_budget(self):
        rep = infeasibility_report(GraphStats(2708, 1433, 7),
                                   make_spec("M1", 1433, 7))
        assert rep.exceeds_budget
        assert rep.features_bytes == 2708 * 1433 * 4

    def test_empty_graph_parameters_only(self):
        spec = make_spec("M1", 1433, 7)
        rep = infeasibility_report(GraphStats(0, 0, 7), spec)
        assert rep.total_bytes == rep.parameter_bytes
        assert not rep.exceeds_budget

    def test_works_on_trained_model(self, trained_parallel, sbm_graph):
        rep = infeasibility_report(sbm_graph, trained_parallel.backbone)
        assert rep.total_bytes > 0


class TestRunReport:
    def test_json_round_trip_fields(self, trained_parallel, sbm_graph):
        import json

        rep = run_partitioned(trained_parallel, sbm_graph, [0, 1])
        d = json.loads(rep.to_json())
        assert set(d) == {"labels", "channel", "memory", "timing"}
        assert len(d["labels"]) == 2
        assert all(c["direction"] == DIRECTION for c in d["channel"])

    def test_timings_nonnegative(self, trained_parallel, sbm_graph):
        rep = run_partitioned(trained_parallel, sbm_graph, [0])
        t = rep.timing
        assert t.backbone_s >= 0 and t.transfer_s >= 0 and t.vault_s >= 0

    def test_transfer_cost_model(self, trained_parallel, sbm_graph):
        from graphvault.partition import CostModel

        cost = CostModel(per_call_s=1.0, per_byte_s=0.0)
        rep = run_partitioned(trained_parallel, sbm_graph, [0], cost=cost)
        assert rep.timing.transfer_s == pytest.approx(len(rep.channel.transfers))
