from typing import FrozenSet, Iterable, Optional, Sequence, Union
import logging
import time

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import optimize, stats


logger = logging.getLogger(__name__)


TIME_STEP_MINUTES = 10
TIME_STEP = pd.Timedelta(minutes=TIME_STEP_MINUTES)
EPOCH = pd.Timestamp(0)

# column name -> trailing window length in minutes
ROLLING_WINDOWS = {
    'PACKET_30MIN_AVG': 30,
    'PACKET_1HR_AVG': 60,
    'PACKET_2HR_AVG': 120,
    'PACKET_4HR_AVG': 240,
}
FEATURE_COLUMNS = ['PACKET', *ROLLING_WINDOWS]
DATASET_COLUMNS = ['NODE', 'LAT', 'LNG', 'TIME', 'ACTIVE', *FEATURE_COLUMNS, 'LABEL']


@dataclass(frozen=True)
class CauchyParams:
    """
    Cauchy(x0, gamma) packet-volume distribution truncated to [0, m]

    x0: location (packets/interval)
    gamma: scale (packets/interval)
    m: maximum packet volume (packets/interval)
    """
    x0: float
    gamma: float
    m: float

    def __post_init__(self):
        if not np.isfinite([self.x0, self.gamma, self.m]).all():
            raise ValueError(f"Cauchy parameters must be finite, got {self}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.m <= 0:
            raise ValueError(f"m must be positive, got {self.m}")
        if self.x0 < 0:
            raise ValueError(f"x0 must be non-negative, got {self.x0}")

    def untruncated_cdf(self, x):
        return stats.cauchy.cdf(x, loc=self.x0, scale=self.gamma)

    def cdf_bounds(self):
        """(F(0), F(m)) of the untruncated distribution"""
        return float(self.untruncated_cdf(0.0)), float(self.untruncated_cdf(self.m))

    def cdf(self, x):
        """CDF of the truncated distribution"""
        lower, upper = self.cdf_bounds()
        x = np.clip(x, 0.0, self.m)
        return (self.untruncated_cdf(x) - lower) / (upper - lower)


@dataclass(frozen=True)
class NodeLocation:
    node_id: int
    lat: float
    lng: float


@dataclass(frozen=True)
class NodeProfile:
    """
    Benign behaviour of one IoT node

    The node is active during the first `activity_duty_cycle` fraction of each
    `activity_period` (minutes), shifted by `activity_phase` minutes.
    """
    node_id: int
    lat: float
    lng: float
    benign_params: CauchyParams
    activity_period: float = 1440.0
    activity_duty_cycle: float = 0.5
    activity_phase: float = 0.0

    def __post_init__(self):
        if not 0 < self.activity_duty_cycle <= 1:
            raise ValueError(
                f"activity_duty_cycle must be in (0, 1], got {self.activity_duty_cycle} "
                f"for node {self.node_id}"
            )
        if self.activity_period <= 0:
            raise ValueError(f"activity_period must be positive for node {self.node_id}")

    @property
    def location(self) -> NodeLocation:
        return NodeLocation(self.node_id, self.lat, self.lng)

    def is_active(self, times: pd.DatetimeIndex) -> np.ndarray:
        minutes = ((times - EPOCH) / pd.Timedelta(minutes=1)).to_numpy(dtype=float)
        position = np.mod(minutes - self.activity_phase, self.activity_period)
        return position < self.activity_duty_cycle * self.activity_period


@dataclass(frozen=True)
class AttackScenario:
    """
    One DDoS attack: attackers send (1+k)-scaled traffic and stay active
    during [start_time, start_time + duration hours)
    """
    k: float
    start_time: pd.Timestamp
    duration: float
    participation_ratio: float
    attacker_set: FrozenSet[int]

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"attack intensity k must be non-negative, got {self.k}")
        if self.duration <= 0:
            raise ValueError(f"attack duration must be positive, got {self.duration}")
        if not 0 < self.participation_ratio <= 1:
            raise ValueError(
                f"participation_ratio must be in (0, 1], got {self.participation_ratio}"
            )
        object.__setattr__(self, 'start_time', pd.Timestamp(self.start_time))
        object.__setattr__(self, 'attacker_set', frozenset(int(n) for n in self.attacker_set))

    @classmethod
    def draw(
            cls,
            k: float,
            start_time: Union[str, pd.Timestamp],
            duration: float,
            participation_ratio: float,
            node_ids: Sequence[int],
            rng: np.random.Generator):
        """Selects round(participation_ratio * N) attackers uniformly without replacement"""
        n_attackers = round(participation_ratio * len(node_ids))
        attackers = rng.choice(np.sort(np.asarray(node_ids)), size=n_attackers, replace=False)
        return cls(
            k=k,
            start_time=pd.Timestamp(start_time),
            duration=duration,
            participation_ratio=participation_ratio,
            attacker_set=frozenset(attackers.tolist()),
        )

    @property
    def end_time(self) -> pd.Timestamp:
        return self.start_time + pd.Timedelta(hours=self.duration)

    @property
    def scenario_id(self) -> str:
        return (
            f"start{self.start_time.strftime('%H%M')}_dur{self.duration:g}h"
            f"_ratio{self.participation_ratio:g}_k{self.k:g}"
        )

    def attack_window(self, times: pd.DatetimeIndex) -> np.ndarray:
        return np.asarray((times >= self.start_time) & (times < self.end_time))


def scale_attack_params(benign: CauchyParams, k: float) -> CauchyParams:
    """
    Attack distribution parameters: location, scale and maximum each scaled by (1 + k)
    """
    if k < 0:
        raise ValueError(f"attack intensity k must be non-negative, got {k}")
    factor = 1 + k
    return CauchyParams(x0=benign.x0 * factor, gamma=benign.gamma * factor, m=benign.m * factor)


def sample_truncated_cauchy(
        params: CauchyParams,
        rng: np.random.Generator,
        size: Optional[int] = None):
    """
    Draws i.i.d. packet volumes from the truncated Cauchy distribution by inverse CDF:
    u ~ Uniform(F(0), F(m)), x = x0 + gamma * tan(pi * (u - 1/2))

    Parameters
    ----------
    params: distribution parameters
    rng: numpy Generator
    size: number of draws, None for a single float

    Returns
    -------
    float or array of volumes in [0, m]
    """
    lower, upper = params.cdf_bounds()
    u = rng.uniform(lower, upper, size=size)
    x = stats.cauchy.ppf(u, loc=params.x0, scale=params.gamma)
    x = np.clip(x, 0.0, params.m)
    if size is None:
        return float(x)
    return x


def _truncated_cauchy_nll(theta, x, m):
    """Negative log-likelihood and gradient over (x0, log gamma)"""
    x0, log_gamma = theta
    gamma = np.exp(log_gamma)
    n = x.size

    z = (x - x0) / gamma
    a = (m - x0) / gamma
    b = -x0 / gamma
    mass = (np.arctan(a) - np.arctan(b)) / np.pi

    nll = n * np.log(np.pi * gamma) + np.sum(np.log1p(z * z)) + n * np.log(mass)

    dmass_dx0 = (-1 / (1 + a * a) + 1 / (1 + b * b)) / (np.pi * gamma)
    dmass_dlog_gamma = (-a / (1 + a * a) + b / (1 + b * b)) / np.pi
    grad_x0 = -np.sum(2 * z / (1 + z * z)) / gamma + n * dmass_dx0 / mass
    grad_log_gamma = n - np.sum(2 * z * z / (1 + z * z)) + n * dmass_dlog_gamma / mass

    return nll, np.array([grad_x0, grad_log_gamma])


def fit_truncated_cauchy(samples: Iterable[float]) -> CauchyParams:
    """
    Maximum-likelihood fit of a Cauchy distribution truncated to [0, max(samples)]

    Parameters
    ----------
    samples: observed packet volumes, all >= 0

    Returns
    -------
    CauchyParams with m = max(samples)
    """
    x = np.asarray(list(samples), dtype=float)
    if x.size == 0:
        raise ValueError("cannot fit a truncated Cauchy distribution to an empty sample")
    if not np.isfinite(x).all():
        raise ValueError("samples must be finite")
    if (x < 0).any():
        raise ValueError("packet volume samples must be non-negative")
    if np.all(x == x[0]):
        raise ValueError(
            f"all {x.size} samples equal {x[0]}; the scale parameter is degenerate"
        )

    m = float(x.max())
    q25, q50, q75 = np.percentile(x, [25, 50, 75])
    gamma_init = max((q75 - q25) / 2, m * 1e-6)
    theta_init = np.array([np.clip(q50, 0, m), np.log(gamma_init)])
    bounds = [(0.0, m), (np.log(m * 1e-9), np.log(m * 1e3))]

    result = optimize.minimize(
        _truncated_cauchy_nll,
        theta_init,
        args=(x, m),
        jac=True,
        method='L-BFGS-B',
        bounds=bounds,
    )
    if not result.success:
        logger.warning(f"truncated Cauchy fit did not converge: {result.message}")

    x0, log_gamma = result.x
    params = CauchyParams(x0=float(x0), gamma=float(np.exp(log_gamma)), m=m)
    logger.debug(f"fitted {params} on {x.size} samples")
    return params


def make_horizon(start: Union[str, pd.Timestamp], periods: int) -> pd.DatetimeIndex:
    """Regular 10-minute grid of `periods` timestamps starting at `start`"""
    start = pd.Timestamp(start)
    if start != start.floor(TIME_STEP):
        raise ValueError(f"horizon start {start} is not aligned to the 10-minute grid")
    return pd.date_range(start, periods=periods, freq=TIME_STEP)


def check_time_grid(times: pd.DatetimeIndex):
    """Raises ValueError unless times are aligned, strictly regular 10-minute steps"""
    times = pd.DatetimeIndex(times)
    if len(times) == 0:
        return
    misaligned = times[times != times.floor(TIME_STEP)]
    if len(misaligned) > 0:
        raise ValueError(f"timestamps not on the 10-minute grid: {list(misaligned[:3])}")
    if len(times) > 1 and not (np.diff(times.asi8) == np.diff(times.asi8)[0]).all():
        raise ValueError("timestamps are not evenly spaced")
    if len(times) > 1 and times[1] - times[0] != TIME_STEP:
        raise ValueError(f"timestamps are spaced {times[1] - times[0]}, expected {TIME_STEP}")


def rolling_window_average(packets: np.ndarray, window_minutes: int) -> np.ndarray:
    """
    Sum of packets over the trailing window (current slot included) divided by the
    number of slots in the window; slots before the trace start count as zero
    """
    slots = window_minutes // TIME_STEP_MINUTES
    packets = np.asarray(packets, dtype=float)
    sums = np.convolve(packets, np.ones(slots))[:len(packets)]
    return sums / slots


def compute_rolling_features(table: pd.DataFrame) -> pd.DataFrame:
    """
    Adds the rolling-average columns to a traffic table, per node in time order

    Parameters
    ----------
    table: DataFrame with at least NODE, TIME, PACKET

    Returns
    -------
    Copy of table sorted by (NODE, TIME) with the rolling-average columns filled in
    """
    table = table.sort_values(['NODE', 'TIME'], kind='stable').reset_index(drop=True)
    for column, window in ROLLING_WINDOWS.items():
        table[column] = table.groupby('NODE', sort=False)['PACKET'].transform(
            lambda packets: rolling_window_average(packets.to_numpy(), window)
        )
    return table


def generate_traffic(
        profiles: Sequence[NodeProfile],
        scenario: Optional[AttackScenario],
        horizon: pd.DatetimeIndex,
        rng: np.random.Generator) -> pd.DataFrame:
    """
    Synthesizes a traffic table for a group of nodes over a time horizon

    Each node is active following its periodic schedule, or forced active while
    it attacks. Active non-attacking slots draw from the node's benign truncated
    Cauchy distribution, attacking slots from the (1+k)-scaled distribution,
    inactive slots send 0 packets.

    Parameters
    ----------
    profiles: node profiles
    scenario: attack scenario or None for benign traffic
    horizon: regular 10-minute DatetimeIndex
    rng: numpy Generator

    Returns
    -------
    DataFrame with DATASET_COLUMNS, sorted by (NODE, TIME)
    """
    tic = time.perf_counter()
    horizon = pd.DatetimeIndex(horizon)
    check_time_grid(horizon)

    node_ids = [profile.node_id for profile in profiles]
    if len(set(node_ids)) != len(node_ids):
        raise ValueError("node_id values must be unique within a group")
    if scenario is not None:
        unknown = scenario.attacker_set - set(node_ids)
        if unknown:
            raise ValueError(f"attacker_set contains unknown node ids: {sorted(unknown)}")
        in_window = scenario.attack_window(horizon)
    else:
        in_window = np.zeros(len(horizon), dtype=bool)

    n_times = len(horizon)
    frames = []
    for profile in profiles:
        benign_draws = sample_truncated_cauchy(profile.benign_params, rng, size=n_times)
        if scenario is not None:
            attack_params = scale_attack_params(profile.benign_params, scenario.k)
            attack_draws = sample_truncated_cauchy(attack_params, rng, size=n_times)
            attacking = in_window & (profile.node_id in scenario.attacker_set)
        else:
            attack_draws = np.zeros(n_times)
            attacking = np.zeros(n_times, dtype=bool)

        active = profile.is_active(horizon) | attacking
        packet = np.where(attacking, attack_draws, np.where(active, benign_draws, 0.0))

        frames.append(pd.DataFrame({
            'NODE': np.full(n_times, profile.node_id, dtype=np.int64),
            'LAT': np.full(n_times, profile.lat, dtype=float),
            'LNG': np.full(n_times, profile.lng, dtype=float),
            'TIME': horizon,
            'ACTIVE': active.astype(np.int64),
            'PACKET': packet.astype(float),
            'LABEL': attacking.astype(np.int64),
        }))

    if frames:
        table = pd.concat(frames, ignore_index=True)
    else:
        table = pd.DataFrame({column: [] for column in ['NODE', 'LAT', 'LNG', 'TIME', 'ACTIVE', 'PACKET', 'LABEL']})
    table = compute_rolling_features(table)[DATASET_COLUMNS]

    toc = time.perf_counter()
    logger.debug(
        f"Generated {len(table)} rows for {len(profiles)} nodes "
        f"({'benign' if scenario is None else scenario.scenario_id}) in {toc - tic:.3f}s"
    )
    return table
