import numpy as np
import pytest

from graphvault.models import make_spec
from graphvault.substitute import SubstituteSpec
from graphvault.synth import sbm_generate
from graphvault.training import TrainConfig, train_backbone, train_original, \
    train_partitioned

# Standard desk-scale fixture: hard enough that the backbone is weak and
# the rectifier has room to help, small enough to train in seconds.
SBM_PARAMS = dict(n_per_class=50, n_classes=4, p_in=0.10, p_out=0.01,
                  feat_dim=8, feat_noise=1.2, seed=7)
SUB_SPEC = SubstituteSpec("knn", k=2, seed=3)
FIT_CFG = TrainConfig(epochs=150, seed=1)


@pytest.fixture(scope="session")
def sbm_graph():
    return sbm_generate(**SBM_PARAMS)


@pytest.fixture(scope="session")
def model_spec(sbm_graph):
    return make_spec("M1", sbm_graph.n_features, sbm_graph.n_classes)


@pytest.fixture(scope="session")
def trained_parallel(sbm_graph, model_spec):
    return train_partitioned(sbm_graph, SUB_SPEC, model_spec, "parallel", FIT_CFG)


@pytest.fixture(scope="session")
def trained_all_topologies(sbm_graph, model_spec, trained_parallel):
    out = {"parallel": trained_parallel}
    for topo in ("cascaded", "series"):
        out[topo] = train_partitioned(sbm_graph, SUB_SPEC, model_spec, topo, FIT_CFG)
    return out


@pytest.fixture(scope="session")
def trained_original(sbm_graph, model_spec):
    return train_original(sbm_graph, model_spec, FIT_CFG)


@pytest.fixture(scope="session")
def trained_mlp(sbm_graph):
    spec = make_spec("mlp", sbm_graph.n_features, sbm_graph.n_classes)
    model, _ = train_backbone(sbm_graph, SUB_SPEC, spec, FIT_CFG)
    return model


@pytest.fixture(scope="session")
def trained_system(sbm_graph, trained_parallel, trained_original, trained_mlp):
    from graphvault.attack import TrainedSystem
    return TrainedSystem(trained_parallel, trained_original, trained_mlp, sbm_graph)


def random_graph(n, d, n_classes, rng, edge_prob=0.2):
    """Small arbitrary valid graph for property tests."""
    from graphvault.graph import Graph, canonical_edges, empty_masks
    feats = rng.standard_normal((n, d)).astype(np.float32)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < edge_prob
    edges = canonical_edges(np.stack([iu[keep], ju[keep]], axis=1), n)
    labels = rng.integers(0, n_classes, n)
    return Graph(feats, edges, labels, n_classes, *empty_masks(n))
