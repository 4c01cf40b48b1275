"""Partitioned GNN inference with a sealed vault world.

A public backbone trained on a feature-derived substitute graph runs in
the open; a small rectifier holding the real edges runs inside a
memory-budgeted vault that only ever emits class labels. The attack
module measures how much edge information each deployment leaks.
"""

from .graph import Graph, NormalizedAdjacency, normalize
from .substitute import SubstituteSpec, build_substitute
from .synth import sbm_generate
from .container import read_container, write_container
from .models import (GcnModel, ModelSpec, PartitionedModel, make_spec,
                     backbone_forward, rectifier_forward)
from .training import (TrainConfig, EvalReport, make_split, train_backbone,
                       train_rectifier, train_partitioned, train_original,
                       evaluate, silhouette, export_embeddings)
from .partition import (run_partitioned, audit_no_leak, infeasibility_report,
                        MemoryLedger, RunReport, GraphStats)
from .attack import (PairSample, AttackReport, TrainedSystem, run_attack,
                     roc_auc, pair_distance, METRICS)

__version__ = "0.1.0"
