from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import dataclasses
import functools
import logging
import time
from pathlib import Path

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import yaml
from tqdm import tqdm

from iot_ddos_gcn.checkpoint import save_checkpoint
from iot_ddos_gcn.dataset import read_dataset, write_dataset
from iot_ddos_gcn.gcn import GcnModel, init_model
from iot_ddos_gcn.iter_writer import SnapshotDumpWriter
from iot_ddos_gcn.optimizer import OptimizerState
from iot_ddos_gcn.router_tree import RouterTree
from iot_ddos_gcn.snapshots import FeatureScaler, build_base_edges, build_snapshots, node_locations
from iot_ddos_gcn.topology import (
    EDGE_MODES, NETWORK, P2P_KINDS, ROUTER_KINDS, TOPOLOGY_KINDS, UNDIRECTED, TopologySpec,
)
from iot_ddos_gcn.traffic import (
    FEATURE_COLUMNS, AttackScenario, CauchyParams, NodeProfile, generate_traffic, make_horizon,
)
from iot_ddos_gcn.training import TrainConfig, evaluate, split_scenarios, train
from iot_ddos_gcn.utils.seeding import (
    BENIGN_STREAM, CELL_STREAM, GROUP_STREAM, SCENARIO_STREAM, SPLIT_STREAM, derive_rng,
)


logger = logging.getLogger(__name__)


REQUIRED_KEYS = ('k_grid', 'l_grid', 'attacks', 'topologies')
SCENARIO_INDEX = 'scenarios.csv'
BENIGN_FILE = 'benign.csv'


class ConfigError(ValueError):
    """Invalid experiment configuration; `key` is the dotted path of the offending entry"""
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


@dataclass
class ActivityArchetype:
    period: float = 1440.0
    duty_cycle: float = 0.5
    phase: float = 0.0


@dataclass
class BenignConfig:
    x0: float = 5.0
    gamma: float = 2.0
    m: float = 100.0
    jitter: float = 0.2


@dataclass
class RouterConfig:
    parents: List[int] = field(default_factory=lambda: [-1])
    assignment: Union[str, Dict[int, int]] = 'balanced'


@dataclass
class GroupConfig:
    count: int = 10
    nodes_per_group: int = 50
    start_date: str = '2023-06-01'
    horizon_hours: float = 28.0
    lat_range: Tuple[float, float] = (40.70, 40.80)
    lng_range: Tuple[float, float] = (-74.02, -73.92)
    benign: BenignConfig = field(default_factory=BenignConfig)
    archetypes: List[ActivityArchetype] = field(default_factory=lambda: [
        ActivityArchetype(period=1440, duty_cycle=0.6, phase=420),
        ActivityArchetype(period=720, duty_cycle=0.5, phase=0),
        ActivityArchetype(period=240, duty_cycle=0.75, phase=60),
    ])
    phase_jitter: float = 30.0
    routers: RouterConfig = field(default_factory=RouterConfig)


@dataclass
class AttackGridConfig:
    start_times: List[str] = field(default_factory=lambda: ['02:00', '06:00', '12:00'])
    durations: List[float] = field(default_factory=lambda: [4.0, 8.0, 16.0])
    ratios: List[float] = field(default_factory=lambda: [0.5, 1.0])


@dataclass
class TopologyEntry:
    kind: str
    edge_mode: str = UNDIRECTED


@dataclass
class TrainingConfig:
    epochs: int = 100
    batch_size: int = 1024
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden: int = 1024
    dropout_rate: float = 0.4
    threshold: float = 0.5
    split: Tuple[float, float, float] = (0.6, 0.2, 0.2)

    def train_config(self, progress: bool = False) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
            hidden=self.hidden,
            dropout_rate=self.dropout_rate,
            threshold=self.threshold,
            progress=progress,
        )


@dataclass
class ExperimentConfig:
    k_grid: List[float]
    l_grid: List[float]
    attacks: AttackGridConfig
    topologies: List[TopologyEntry]
    seed: int = 0
    n: int = 4
    n_sweep: List[int] = field(default_factory=list)
    features: List[str] = field(default_factory=lambda: list(FEATURE_COLUMNS))
    groups: GroupConfig = field(default_factory=GroupConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


def _build_section(cls, data: Any, key: str, nested: Optional[Dict[str, Any]] = None):
    """Instantiates dataclass `cls` from a mapping, rejecting unknown keys"""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(key, f"expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    for name in data:
        if name not in names:
            raise ConfigError(f"{key}.{name}", "unknown key")
    kwargs = dict(data)
    for name, parser in (nested or {}).items():
        if name in kwargs:
            kwargs[name] = parser(kwargs[name], f"{key}.{name}")
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(key, str(e)) from e


def _non_empty_list(data: Any, key: str) -> list:
    if not isinstance(data, list) or len(data) == 0:
        raise ConfigError(key, "must be a non-empty list")
    if len(set(map(str, data))) != len(data):
        raise ConfigError(key, "contains duplicate entries")
    return data


def _number_list(data: Any, key: str, low: float, high: float = np.inf) -> List[float]:
    values = _non_empty_list(data, key)
    for i, value in enumerate(values):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}[{i}]", f"expected a number, got {value!r}")
        if not low <= value <= high:
            raise ConfigError(f"{key}[{i}]", f"{value} is outside [{low}, {high}]")
    return [float(v) for v in values]


def _parse_topologies(data: Any, key: str) -> List[TopologyEntry]:
    entries = []
    for i, item in enumerate(_non_empty_list(data, key)):
        entry = _build_section(TopologyEntry, item, f"{key}[{i}]")
        if entry.kind not in TOPOLOGY_KINDS:
            raise ConfigError(
                f"{key}[{i}].kind",
                f"unknown topology {entry.kind!r}, valid kinds: {', '.join(TOPOLOGY_KINDS)}"
            )
        if entry.edge_mode not in EDGE_MODES:
            raise ConfigError(
                f"{key}[{i}].edge_mode",
                f"unknown edge mode {entry.edge_mode!r}, valid modes: {', '.join(EDGE_MODES)}"
            )
        if entry.edge_mode != UNDIRECTED and entry.kind not in P2P_KINDS:
            raise ConfigError(f"{key}[{i}].edge_mode", f"{entry.kind} only supports undirected edges")
        entries.append(entry)
    return entries


def _parse_attacks(data: Any, key: str) -> AttackGridConfig:
    attacks = _build_section(AttackGridConfig, data, key)
    for i, start in enumerate(_non_empty_list(attacks.start_times, f"{key}.start_times")):
        try:
            offset = pd.Timedelta(f"{start}:00")
        except ValueError as e:
            raise ConfigError(f"{key}.start_times[{i}]", f"expected HH:MM, got {start!r}") from e
        if offset % pd.Timedelta(minutes=10) != pd.Timedelta(0):
            raise ConfigError(f"{key}.start_times[{i}]", "must lie on the 10-minute grid")
    attacks.durations = _number_list(attacks.durations, f"{key}.durations", 1e-9)
    attacks.ratios = _number_list(attacks.ratios, f"{key}.ratios", 1e-9, 1.0)
    return attacks


def _parse_groups(data: Any, key: str) -> GroupConfig:
    groups = _build_section(GroupConfig, data, key, nested={
        'benign': lambda d, k: _build_section(BenignConfig, d, k),
        'routers': lambda d, k: _build_section(RouterConfig, d, k),
        'archetypes': lambda d, k: [
            _build_section(ActivityArchetype, item, f"{k}[{i}]")
            for i, item in enumerate(_non_empty_list(d, k))
        ],
    })
    if groups.count < 1:
        raise ConfigError(f"{key}.count", "must be at least 1")
    if groups.nodes_per_group < 2:
        raise ConfigError(f"{key}.nodes_per_group", "must be at least 2")
    if groups.horizon_hours <= 0:
        raise ConfigError(f"{key}.horizon_hours", "must be positive")
    try:
        start = pd.Timestamp(groups.start_date)
    except ValueError as e:
        raise ConfigError(f"{key}.start_date", f"not a date: {groups.start_date!r}") from e
    if start != start.normalize():
        raise ConfigError(f"{key}.start_date", "must be a date without time of day")
    groups.lat_range = tuple(groups.lat_range)
    groups.lng_range = tuple(groups.lng_range)
    try:
        CauchyParams(groups.benign.x0, groups.benign.gamma, groups.benign.m)
    except ValueError as e:
        raise ConfigError(f"{key}.benign", str(e)) from e
    for i, archetype in enumerate(groups.archetypes):
        if not 0 < archetype.duty_cycle <= 1 or archetype.period <= 0:
            raise ConfigError(f"{key}.archetypes[{i}]", "needs period > 0 and duty_cycle in (0, 1]")
    try:
        build_router_tree(groups, range(groups.nodes_per_group))
    except ValueError as e:
        raise ConfigError(f"{key}.routers", str(e)) from e
    return groups


def _split_fractions(data: Any, key: str) -> Tuple[float, float, float]:
    """train / val / test fractions; equal fractions are allowed"""
    if not isinstance(data, (list, tuple)) or len(data) != 3:
        raise ConfigError(key, "must be three fractions summing to 1")
    for i, value in enumerate(data):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}[{i}]", f"expected a number, got {value!r}")
        if not (np.isfinite(value) and 0 < value <= 1):
            raise ConfigError(f"{key}[{i}]", f"{value} is outside (0, 1]")
    if abs(sum(data) - 1) > 1e-9:
        raise ConfigError(key, "must be three fractions summing to 1")
    return tuple(float(v) for v in data)


def _parse_training(data: Any, key: str) -> TrainingConfig:
    training = _build_section(TrainingConfig, data, key)
    training.split = _split_fractions(training.split, f"{key}.split")
    try:
        training.train_config()
    except ValueError as e:
        raise ConfigError(key, str(e)) from e
    if training.hidden < 1:
        raise ConfigError(f"{key}.hidden", "must be at least 1")
    if not 0 <= training.dropout_rate < 1:
        raise ConfigError(f"{key}.dropout_rate", "must be in [0, 1)")
    return training


def config_from_dict(data: Any) -> ExperimentConfig:
    """
    Validates a parsed config tree and builds the ExperimentConfig

    Raises ConfigError naming the first offending key.
    """
    if not isinstance(data, dict):
        raise ConfigError('<root>', "config must be a mapping")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in data:
        if key not in known:
            raise ConfigError(str(key), "unknown key")
    for key in REQUIRED_KEYS:
        if key not in data:
            raise ConfigError(key, "required key is missing")

    groups = _parse_groups(data.get('groups'), 'groups')
    config = ExperimentConfig(
        k_grid=_number_list(data['k_grid'], 'k_grid', 0.0),
        l_grid=_number_list(data['l_grid'], 'l_grid', 0.0, 1.0),
        attacks=_parse_attacks(data['attacks'], 'attacks'),
        topologies=_parse_topologies(data['topologies'], 'topologies'),
        seed=data.get('seed', 0),
        n=data.get('n', 4),
        n_sweep=data.get('n_sweep') or [],
        features=data.get('features', list(FEATURE_COLUMNS)),
        groups=groups,
        training=_parse_training(data.get('training'), 'training'),
    )

    if not isinstance(config.seed, int) or config.seed < 0:
        raise ConfigError('seed', f"must be a non-negative integer, got {config.seed!r}")
    max_n = groups.nodes_per_group - 1
    if not isinstance(config.n, int) or not 1 <= config.n <= max_n:
        raise ConfigError('n', f"must be an integer in [1, {max_n}], got {config.n!r}")
    if config.n_sweep:
        sweep = _number_list(config.n_sweep, 'n_sweep', 1, max_n)
        if any(v != int(v) for v in sweep):
            raise ConfigError('n_sweep', "must contain integers")
        config.n_sweep = [int(v) for v in sweep]
    features = _non_empty_list(config.features, 'features')
    unknown = [f for f in features if f not in FEATURE_COLUMNS]
    if unknown:
        raise ConfigError('features', f"unknown feature(s) {unknown}, valid: {', '.join(FEATURE_COLUMNS)}")
    return config


def load_config(path: Union[str, Path], seed: Optional[int] = None) -> ExperimentConfig:
    """
    Reads and validates a YAML experiment config

    Parameters
    ----------
    path: YAML file
    seed: overrides the master seed when given

    Returns
    -------
    ExperimentConfig
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file {path} does not exist")
    try:
        with open(path, 'r') as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError('<root>', f"cannot parse {path}: {e}") from e
    config = config_from_dict(data)
    if seed is not None:
        if seed < 0:
            raise ConfigError('seed', f"must be non-negative, got {seed}")
        config = dataclasses.replace(config, seed=seed)
    logger.info(f"Loaded config {path} (seed {config.seed})")
    return config


def build_router_tree(groups: GroupConfig, node_ids: Sequence[int]) -> RouterTree:
    if groups.routers.assignment == 'balanced':
        return RouterTree.balanced(groups.routers.parents, list(node_ids))
    if isinstance(groups.routers.assignment, dict):
        tree = RouterTree(groups.routers.parents, groups.routers.assignment)
        tree.check_nodes(list(node_ids))
        return tree
    raise ValueError(
        f"assignment must be 'balanced' or a node -> router mapping, got {groups.routers.assignment!r}"
    )


@dataclass
class NodeGroup:
    index: int
    profiles: List[NodeProfile]
    router_tree: RouterTree
    horizon: pd.DatetimeIndex
    benign: pd.DataFrame

    @property
    def node_ids(self) -> List[int]:
        return [profile.node_id for profile in self.profiles]


@dataclass
class ScenarioData:
    scenario: AttackScenario
    table: pd.DataFrame

    @property
    def k(self) -> float:
        return self.scenario.k

    @property
    def scenario_id(self) -> str:
        return self.scenario.scenario_id


def make_group(config: ExperimentConfig, group_index: int) -> NodeGroup:
    """
    Synthesizes the node profiles of one group and its benign reference traffic

    Positions are uniform in the configured box, benign parameters are the
    configured ones with per-node lognormal jitter, and each node follows one
    activity archetype with a jittered phase.
    """
    groups = config.groups
    rng = derive_rng(config.seed, GROUP_STREAM, group_index)
    n_nodes = groups.nodes_per_group

    lats = rng.uniform(*groups.lat_range, size=n_nodes)
    lngs = rng.uniform(*groups.lng_range, size=n_nodes)
    size_factor = rng.lognormal(0.0, groups.benign.jitter, size=n_nodes)
    scale_factor = rng.lognormal(0.0, groups.benign.jitter, size=n_nodes)
    archetype_index = rng.integers(len(groups.archetypes), size=n_nodes)
    phase_offset = rng.uniform(-groups.phase_jitter, groups.phase_jitter, size=n_nodes)

    profiles = []
    for node in range(n_nodes):
        archetype = groups.archetypes[archetype_index[node]]
        profiles.append(NodeProfile(
            node_id=node,
            lat=float(lats[node]),
            lng=float(lngs[node]),
            benign_params=CauchyParams(
                x0=groups.benign.x0 * size_factor[node],
                gamma=groups.benign.gamma * scale_factor[node],
                m=groups.benign.m * size_factor[node],
            ),
            activity_period=archetype.period,
            activity_duty_cycle=archetype.duty_cycle,
            activity_phase=float(archetype.phase + phase_offset[node]),
        ))

    horizon = make_horizon(groups.start_date, round(groups.horizon_hours * 6))
    benign = generate_traffic(profiles, None, horizon, derive_rng(config.seed, BENIGN_STREAM, group_index))
    router_tree = build_router_tree(groups, range(n_nodes))
    return NodeGroup(group_index, profiles, router_tree, horizon, benign)


def scenario_grid(config: ExperimentConfig) -> List[Tuple[str, float, float, float]]:
    """(start time, duration, ratio, k) tuples in generation order"""
    attacks = config.attacks
    return [
        (start, duration, ratio, k)
        for start in attacks.start_times
        for duration in attacks.durations
        for ratio in attacks.ratios
        for k in config.k_grid
    ]


def make_scenarios(config: ExperimentConfig, group: NodeGroup) -> List[ScenarioData]:
    """
    One attack scenario and its traffic per grid point

    Every k of one attack shape (start, duration, ratio) shares the attacker set
    and the traffic generator seed, so the datasets of one shape differ only in
    the attackers' intensity.
    """
    day = pd.Timestamp(config.groups.start_date)
    scenarios = []
    grid = scenario_grid(config)
    shapes = list(dict.fromkeys((start, duration, ratio) for start, duration, ratio, _ in grid))
    attackers = {}
    for shape_index, (start, duration, ratio) in enumerate(shapes):
        attackers[(start, duration, ratio)] = (shape_index, AttackScenario.draw(
            k=0.0,
            start_time=day + pd.Timedelta(f"{start}:00"),
            duration=duration,
            participation_ratio=ratio,
            node_ids=group.node_ids,
            rng=derive_rng(config.seed, SCENARIO_STREAM, group.index, shape_index, 'attackers'),
        ))

    seen = set()
    for start, duration, ratio, k in tqdm(grid, desc=f"group {group.index} scenarios", disable=len(grid) < 10):
        shape_index, drawn = attackers[(start, duration, ratio)]
        scenario = dataclasses.replace(drawn, k=k)
        if scenario.scenario_id in seen:
            raise ValueError(f"attack grid produces the scenario id {scenario.scenario_id} twice")
        seen.add(scenario.scenario_id)
        rng = derive_rng(config.seed, SCENARIO_STREAM, group.index, shape_index, 'traffic')
        table = generate_traffic(group.profiles, scenario, group.horizon, rng)
        scenarios.append(ScenarioData(scenario, table))
    return scenarios


def group_dir(data_dir: Union[str, Path], group_index: int) -> Path:
    return Path(data_dir) / f"group_{group_index:02d}"


def write_group(group: NodeGroup, scenarios: Sequence[ScenarioData], data_dir: Union[str, Path]) -> List[Path]:
    """
    Writes benign.csv, one dataset per scenario and the scenarios.csv index

    Returns
    -------
    written paths
    """
    out = group_dir(data_dir, group.index)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / BENIGN_FILE]
    write_dataset(group.benign, paths[0])

    index_rows = []
    for item in scenarios:
        path = out / f"{item.scenario_id}.csv"
        write_dataset(item.table, path)
        paths.append(path)
        index_rows.append({
            'scenario_id': item.scenario_id,
            'k': item.scenario.k,
            'start_time': item.scenario.start_time.strftime('%Y-%m-%d %H:%M:%S'),
            'duration': item.scenario.duration,
            'participation_ratio': item.scenario.participation_ratio,
            'attackers': ' '.join(str(n) for n in sorted(item.scenario.attacker_set)),
        })
    index_path = out / SCENARIO_INDEX
    pd.DataFrame(index_rows).to_csv(index_path, index=False)
    paths.append(index_path)
    return paths


@functools.lru_cache(maxsize=2)
def load_group_data(data_dir: str, group_index: int) -> Tuple[pd.DataFrame, List[ScenarioData]]:
    """
    Reads a generated group back: the benign table and every scenario

    Raises FileNotFoundError with a hint when the data was not generated.
    """
    directory = group_dir(data_dir, group_index)
    index_path = directory / SCENARIO_INDEX
    if not index_path.exists():
        raise FileNotFoundError(
            f"no generated data for group {group_index} in {directory}; run `iot_ddos_gcn generate` first"
        )
    index = pd.read_csv(index_path, dtype={'attackers': str}, keep_default_na=False)
    benign = read_dataset(directory / BENIGN_FILE)

    scenarios = []
    for row in index.itertuples(index=False):
        scenario = AttackScenario(
            k=float(row.k),
            start_time=pd.Timestamp(row.start_time),
            duration=float(row.duration),
            participation_ratio=float(row.participation_ratio),
            attacker_set=frozenset(int(n) for n in str(row.attackers).split()),
        )
        path = directory / f"{row.scenario_id}.csv"
        if not path.exists():
            raise FileNotFoundError(f"missing dataset {path}; run `iot_ddos_gcn generate` first")
        scenarios.append(ScenarioData(scenario, read_dataset(path)))
    return benign, scenarios


@dataclass(frozen=True, order=True)
class Cell:
    """One (group, topology, edge mode, loss, neighbors) training run; n is 0 for network topologies"""
    group: int
    topology: str
    edge_mode: str
    l: float
    n: int

    @property
    def cell_id(self) -> str:
        return f"g{self.group:02d}-{self.topology}-{self.edge_mode}-l{self.l:g}-n{self.n}"


def enumerate_cells(config: ExperimentConfig, groups: Optional[Sequence[int]] = None) -> List[Cell]:
    """
    group x topology entry x l x n, with the n-sweep applied to kinds that
    have a peer-to-peer component
    """
    if groups is None:
        groups = range(config.groups.count)
    n_values = sorted({config.n, *config.n_sweep})
    cells = set()
    for group in groups:
        for entry in config.topologies:
            entry_n = [0] if entry.kind == NETWORK else n_values
            for l in config.l_grid:
                for n in entry_n:
                    cells.add(Cell(group, entry.kind, entry.edge_mode, float(l), int(n)))
    return sorted(cells)


def parse_cell_selector(config: ExperimentConfig, selector: str) -> Cell:
    """
    Parses `group=0,topology=hybrid_correlation,edge_mode=undirected,l=0.3[,n=4]`
    """
    fields = {}
    for part in selector.split(','):
        if '=' not in part:
            raise ConfigError('cell', f"expected key=value, got {part!r}")
        key, value = part.split('=', 1)
        fields[key.strip()] = value.strip()

    unknown = set(fields) - {'group', 'topology', 'edge_mode', 'l', 'n'}
    if unknown:
        raise ConfigError('cell', f"unknown selector key(s) {sorted(unknown)}")
    for key in ('group', 'topology', 'l'):
        if key not in fields:
            raise ConfigError(f"cell.{key}", "missing from selector")

    kinds = sorted({entry.kind for entry in config.topologies})
    topology = fields['topology']
    if topology not in kinds:
        raise ConfigError('cell.topology', f"undefined topology {topology!r}, valid kinds: {', '.join(kinds)}")
    edge_mode = fields.get('edge_mode', UNDIRECTED)
    if TopologyEntry(topology, edge_mode) not in config.topologies:
        modes = [e.edge_mode for e in config.topologies if e.kind == topology]
        raise ConfigError('cell.edge_mode', f"{edge_mode!r} not configured for {topology}, valid: {', '.join(modes)}")
    try:
        group = int(fields['group'])
        l = float(fields['l'])
        n = 0 if topology == NETWORK else int(fields.get('n', config.n))
    except ValueError as e:
        raise ConfigError('cell', str(e)) from e
    if not 0 <= group < config.groups.count:
        raise ConfigError('cell.group', f"must be in [0, {config.groups.count - 1}], got {group}")
    if not 0 <= l <= 1:
        raise ConfigError('cell.l', f"must be in [0, 1], got {l}")
    if topology != NETWORK and not 1 <= n < config.groups.nodes_per_group:
        raise ConfigError('cell.n', f"must be in [1, {config.groups.nodes_per_group - 1}], got {n}")
    return Cell(group, topology, edge_mode, l, n)


def attack_shape(item: ScenarioData) -> Tuple[pd.Timestamp, float, float]:
    """Start, duration and participation ratio; shared by every k of one attack"""
    scenario = item.scenario
    return scenario.start_time, scenario.duration, scenario.participation_ratio


@dataclass
class CellResult:
    cell: Cell
    metrics: pd.DataFrame
    history: pd.DataFrame
    model: GcnModel
    scaler: FeatureScaler
    state: Optional[OptimizerState] = None
    elapsed: float = 0.0


def run_cell(
        config: ExperimentConfig,
        cell: Cell,
        data_dir: Union[str, Path],
        dump_path: Optional[Path] = None,
        progress: bool = False) -> CellResult:
    """
    Trains and evaluates one cell end-to-end

    The scenario split depends only on the group, so every cell of a group
    sees the same train/val/test scenarios. Whole attack shapes are split, so
    each k's test slice holds the same attacks at different intensities. Standardization statistics come
    from the training split; connection loss, initialization and batch order
    use generators derived from the cell id.

    Parameters
    ----------
    config: experiment config
    cell: cell to run
    data_dir: directory written by the generate step
    dump_path: write the test snapshots as a plain-text dump here
    progress: show a progress bar over epochs

    Returns
    -------
    CellResult with per-k test metrics and the training history
    """
    logger.info(f"Starting cell {cell.cell_id}")
    tic = time.perf_counter()

    benign, scenarios = load_group_data(str(data_dir), cell.group)
    train_s, val_s, test_s = split_scenarios(
        scenarios, config.training.split, derive_rng(config.seed, SPLIT_STREAM, cell.group),
        group=attack_shape,
    )
    logger.debug(f"split {len(train_s)}/{len(val_s)}/{len(test_s)} scenarios")

    scaler = FeatureScaler.fit([s.table for s in train_s], config.features)
    node_ids = sorted(int(n) for n in benign['NODE'].unique())
    spec = TopologySpec(
        kind=cell.topology,
        n=max(cell.n, 1),
        edge_mode=cell.edge_mode,
        router_tree=build_router_tree(config.groups, node_ids) if cell.topology in ROUTER_KINDS else None,
        loss_fraction=cell.l,
    )
    base_edges = build_base_edges(spec, node_locations(benign), benign)

    def snapshots_for(split: Sequence[ScenarioData], name: str):
        snapshots = []
        for i, item in enumerate(split):
            rng = derive_rng(config.seed, CELL_STREAM, cell.cell_id, f"loss-{name}", i)
            snapshots.extend(build_snapshots(
                item.table, spec, rng,
                base_edges=base_edges,
                scaler=scaler,
                features=config.features,
                k=item.k,
                scenario_id=item.scenario_id,
            ))
        return snapshots

    snapshots_train = snapshots_for(train_s, 'train')
    snapshots_val = snapshots_for(val_s, 'val')
    snapshots_test = snapshots_for(test_s, 'test')

    train_config = config.training.train_config(progress=progress)
    model = init_model(
        len(config.features), train_config.hidden,
        derive_rng(config.seed, CELL_STREAM, cell.cell_id, 'init'),
        dropout_rate=train_config.dropout_rate,
    )
    model, history, state = train(
        model, snapshots_train, snapshots_val, train_config,
        derive_rng(config.seed, CELL_STREAM, cell.cell_id, 'train'),
    )
    metrics = evaluate(model, snapshots_test, train_config.threshold, train_config.batch_size)
    metrics.insert(0, 'n', cell.n)
    metrics.insert(0, 'l', cell.l)
    metrics.insert(0, 'edge_mode', cell.edge_mode)
    metrics.insert(0, 'topology', cell.topology)
    metrics.insert(0, 'group', cell.group)

    if dump_path is not None:
        writer = SnapshotDumpWriter(dump_path, snapshots_test[:1])
        writer.add_chunk(snapshots_test[1:])
        logger.info(f"Wrote {writer.n_written} test snapshots to {dump_path}")

    toc = time.perf_counter()
    logger.info(f"Cell {cell.cell_id} Elapsed Time: {toc - tic}")
    return CellResult(cell, metrics, history, model, scaler, state=state, elapsed=toc - tic)


HISTORY_FILE = 'history.csv'
METRICS_FILE = 'metrics.csv'
CHECKPOINT_FILE = 'checkpoint.bin'


def write_cell_outputs(result: CellResult, cells_dir: Union[str, Path]) -> List[Path]:
    """
    Writes checkpoint.bin, history.csv and metrics.csv under cells_dir/<cell_id>

    Wall-clock times are left out of the files so reruns reproduce them byte for byte.
    """
    out = Path(cells_dir) / result.cell.cell_id
    out.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out / CHECKPOINT_FILE
    save_checkpoint(checkpoint_path, result.model, state=result.state, scaler=result.scaler)
    history_path = out / HISTORY_FILE
    result.history[['epoch', 'train_loss', 'val_f1']].to_csv(history_path, index=False, float_format='%.10g')
    metrics_path = out / METRICS_FILE
    result.metrics.to_csv(metrics_path, index=False, float_format='%.10g')
    return [checkpoint_path, history_path, metrics_path]
