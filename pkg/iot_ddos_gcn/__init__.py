# -*- coding: utf-8 -*-

"""Top-level package for iot_ddos_gcn."""

import os
from logging.config import fileConfig


version_path = os.path.join(os.path.dirname(__file__), "VERSION.txt")
with open(version_path, "r") as version_file:
    __version__ = version_file.read().strip()


fileConfig(os.path.join(
    os.path.dirname(__file__),
    'logging_config.ini'),
    disable_existing_loggers=False,
)

# paths
from .traffic import (
    CauchyParams, NodeProfile, AttackScenario, scale_attack_params,
    sample_truncated_cauchy, fit_truncated_cauchy, generate_traffic,
    compute_rolling_features, make_horizon,
)
from .dataset import write_dataset, read_dataset, validate_traffic_table
from .router_tree import RouterTree, aggregate_router_features
from .topology import (
    EdgeSet, TopologySpec, build_distance_p2p, build_correlation_p2p,
    build_network_topology, build_hybrid, drop_edges, normalize_adjacency,
)
from .snapshots import GraphSnapshot, FeatureScaler, build_snapshots, build_base_edges
from .gcn import GcnModel, init_model, forward, backward
from .loss import LossConfig, class_weights_from_labels, weighted_bce_loss
from .optimizer import OptimizerState, optimizer_step
from .checkpoint import save_checkpoint, load_checkpoint
from .metrics import BinaryMetrics, binary_metrics, roc_auc
from .training import TrainConfig, split_scenarios, train, evaluate
from .aggregation import aggregate_groups
