"""Experiment orchestration: flat key=value configs, seeded runs for every
learner and the alternating-optimization benchmark, deterministic CSV
metrics, per-seed aggregation, and final-window comparisons.

Determinism contract: (config, seed) fixes every byte of the metrics files.
Wall-clock timings therefore live in a separate *_timing.csv sidecar that is
excluded from that guarantee.
"""

from __future__ import annotations

import dataclasses
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from .agents import ALGORITHMS, AgentHyper, build_agent
from .ao import AoOptions, ao_solve
from .environment import BackscatterEnv, action_dim, state_dim
from .errors import ConfigError, InfeasibleProblem
from .link import EhParams
from .numerics import SeededRng
from .scenario import SystemConfig, noise_power_watts

RUN_KINDS = ALGORITHMS + ("ao",)

STEP_COLUMNS = ("episode", "step", "reward", "sum_rate", "ma_sum_rate",
                "omega_pow", "omega_eh", "status")
EPISODE_COLUMNS = ("episode", "reward_mean", "sum_rate_mean", "ma_sum_rate",
                   "omega_pow_count", "omega_eh_mean", "status")
AGGREGATE_COLUMNS = ("episode", "sum_rate_mean", "sum_rate_std",
                     "reward_mean", "reward_std")


@dataclass
class ExperimentConfig:
    """One experiment: a single algorithm swept over seeds.

    System and learner fields default to the reference operating point
    (M = N = 12, K = 2, P_s = 40 dBm, E = 5000, T = 10, buffer 1e5,
    batch 32, discount 0.99, learning rates 1e-3, decays 1e-5, xi 0.2).
    """

    algorithm: str = "sac"
    episodes: int = 5000
    steps: int = 10
    seeds: tuple = (0,)
    ma_window: int = 100
    w_bound_scale: float = 1.0
    # system
    m: int = 12
    n: int = 12
    k: int = 2
    ps_dbm: float = 40.0
    delta_d: float = 0.01
    bw_hz: float = 1e6
    nf_db: float = 10.0
    pathloss_c0_db: float = -30.0
    zeta: float = 2.0
    d0_m: float = 1.0
    carrier_hz: float = 3e9
    tag_radius_m: float = 2.0
    # harvester
    eh_a: float = 6400.0
    eh_b: float = 0.003
    eh_mnl: float = 0.024
    eh_pb: float = 1e-5
    eh_threshold_mode: str = "harvested"
    # learner
    gamma: float = 0.99
    tau: float = 1e-3
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    temperature_lr: float = 1e-3
    lr_decay: float = 1e-5
    decay_mode: str = "complement"
    buffer_capacity: int = 100000
    batch_size: int = 32
    sigma0: float = 0.1
    sigma_decay: float = 0.999
    xi_init: float = 0.2
    eps0: float = 1.0
    eps_min: float = 0.01
    eps_decay: float = 0.995
    target_sync: int = 1000
    l_ce: int = 16
    l_p: int = 5
    l_eh: int = 5
    power_floor_frac: float = 0.1

    def __post_init__(self):
        if self.algorithm not in RUN_KINDS:
            raise ConfigError(
                f"algorithm must be one of {RUN_KINDS}, got {self.algorithm!r}")
        if self.episodes < 1:
            raise ConfigError(f"episodes must be >= 1, got {self.episodes}")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.ma_window < 1:
            raise ConfigError(f"ma_window must be >= 1, got {self.ma_window}")

    def system_config(self):
        return SystemConfig(
            m=self.m, n=self.n, k=self.k,
            ps_watts=10.0 ** (self.ps_dbm / 10.0) / 1000.0,
            delta_d=self.delta_d,
            noise_watts=noise_power_watts(self.bw_hz, self.nf_db),
            pathloss_c0_db=self.pathloss_c0_db, d0_m=self.d0_m,
            zeta=self.zeta, carrier_hz=self.carrier_hz,
            tag_radius_m=self.tag_radius_m,
            eh=EhParams(a_nl=self.eh_a, b_nl=self.eh_b, m_nl=self.eh_mnl,
                        p_b_watts=self.eh_pb,
                        threshold_mode=self.eh_threshold_mode))

    def agent_hyper(self):
        return AgentHyper(
            gamma=self.gamma, tau=self.tau, actor_lr=self.actor_lr,
            critic_lr=self.critic_lr, temperature_lr=self.temperature_lr,
            lr_decay=self.lr_decay, decay_mode=self.decay_mode,
            buffer_capacity=self.buffer_capacity, batch_size=self.batch_size,
            sigma0=self.sigma0, sigma_decay=self.sigma_decay,
            xi_init=self.xi_init, eps0=self.eps0, eps_min=self.eps_min,
            eps_decay=self.eps_decay, target_sync=self.target_sync,
            l_ce=self.l_ce, l_p=self.l_p, l_eh=self.l_eh,
            power_floor_frac=self.power_floor_frac)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def parse_kv(text):
    """Flat key=value lines; # starts a comment; blank lines ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def config_from_pairs(pairs):
    """Typed ExperimentConfig from string pairs; unknown keys are errors."""
    kwargs = {}
    for key, value in pairs.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        kind = _FIELD_TYPES[key]
        try:
            if key == "seeds":
                kwargs[key] = tuple(int(s) for s in value.split(",") if s.strip())
            elif kind in ("int", int):
                kwargs[key] = int(value)
            elif kind in ("float", float):
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: cannot parse {value!r}") from exc
    return ExperimentConfig(**kwargs)


def parse_config(path):
    """Read a key=value file over the defaults."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return config_from_pairs(parse_kv(text))


# ------------------------------------------------------------------- metrics


def _fmt(value):
    """Shortest exact decimal for floats so files are byte-reproducible and
    every number round-trips."""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


class _CsvWriter:
    def __init__(self, path, columns):
        if os.path.exists(path):
            raise ConfigError(f"refusing to overwrite existing file {path}")
        self.path = path
        self._fh = open(path, "w", encoding="utf-8", newline="")
        self._fh.write(",".join(columns) + "\n")

    def row(self, values):
        self._fh.write(",".join(_fmt(v) for v in values) + "\n")

    def close(self):
        self._fh.close()


class _MovingAverage:
    """Trailing mean of the instantaneous sum rate over the last
    window * rows_per_episode step rows."""

    def __init__(self, window, rows_per_episode):
        self.limit = window * rows_per_episode
        self._values = []

    def push(self, value):
        self._values.append(value)
        tail = self._values[-self.limit:]
        return float(np.mean(tail))


def _out_paths(out_dir, algorithm, seed):
    base = os.path.join(out_dir, f"{algorithm}_seed{seed}")
    return base + "_steps.csv", base + "_episodes.csv", base + "_timing.csv"


def run_single(config, seed, out_dir):
    """One (algorithm, seed) run; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    steps_path, episodes_path, timing_path = _out_paths(out_dir,
                                                        config.algorithm, seed)
    steps_csv = _CsvWriter(steps_path, STEP_COLUMNS)
    episodes_csv = _CsvWriter(episodes_path, EPISODE_COLUMNS)
    timing_csv = _CsvWriter(timing_path, ("episode", "wall_ms"))
    try:
        if config.algorithm == "ao":
            _run_ao(config, seed, steps_csv, episodes_csv, timing_csv)
        else:
            _run_agent(config, seed, steps_csv, episodes_csv, timing_csv)
    finally:
        steps_csv.close()
        episodes_csv.close()
        timing_csv.close()
    return steps_path, episodes_path, timing_path


def _run_agent(config, seed, steps_csv, episodes_csv, timing_csv):
    system = config.system_config()
    env = BackscatterEnv(system, seed, steps_per_episode=config.steps,
                         w_bound_scale=config.w_bound_scale)
    hyper = config.agent_hyper()
    agent = build_agent(config.algorithm, env.state_dim, env.action_dim,
                        system, hyper, SeededRng(seed).derive("agent"))
    ma = _MovingAverage(config.ma_window, config.steps)
    for episode in range(config.episodes):
        t0 = time.perf_counter()
        agent.begin_episode(episode)
        state = env.reset(episode)
        rewards, rates, eh_pen = [], [], []
        pow_count = 0
        ma_value = 0.0
        for step in range(config.steps):
            action = agent.act(state, explore=True)
            if agent.kind == "discrete":
                w, alpha = agent.table.decode(action)
                out = env.step_physical(w, alpha)
            else:
                out = env.step(action)
            agent.observe(state, action, out.reward, out.state)
            ma_value = ma.push(out.sum_rate)
            steps_csv.row((episode, step, out.reward, out.sum_rate, ma_value,
                           out.omega_pow, out.omega_eh, "ok"))
            rewards.append(out.reward)
            rates.append(out.sum_rate)
            eh_pen.append(out.omega_eh)
            pow_count += int(out.omega_pow)
            state = out.state
        episodes_csv.row((episode, float(np.mean(rewards)),
                          float(np.mean(rates)), ma_value, pow_count,
                          float(np.mean(eh_pen)), "ok"))
        timing_csv.row((episode, f"{(time.perf_counter() - t0) * 1e3:.3f}"))


def _run_ao(config, seed, steps_csv, episodes_csv, timing_csv):
    """Benchmark lane: one solve per episode's channel draw; infeasible
    draws are flagged and scored zero, and the run continues."""
    system = config.system_config()
    env = BackscatterEnv(system, seed, steps_per_episode=config.steps)
    root = SeededRng(seed)
    options = AoOptions()
    ma = _MovingAverage(config.ma_window, 1)
    for episode in range(config.episodes):
        t0 = time.perf_counter()
        channels = env.scenario.channels(episode)
        try:
            result = ao_solve(channels, system, root.derive("ao", episode),
                              options)
            rate = result.objective
            status = "ok"
        except InfeasibleProblem:
            rate = 0.0
            status = "infeasible"
        ma_value = ma.push(rate)
        steps_csv.row((episode, 0, rate, rate, ma_value, 0.0, 0.0, status))
        episodes_csv.row((episode, rate, rate, ma_value, 0, 0.0, status))
        timing_csv.row((episode, f"{(time.perf_counter() - t0) * 1e3:.3f}"))


def _worker(args):
    config, seed, out_dir = args
    return run_single(config, seed, out_dir)


def max_workers():
    """Worker cap: BIBC_THREADS if set, else the CPU count."""
    raw = os.environ.get("BIBC_THREADS", "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError as exc:
            raise ConfigError(f"BIBC_THREADS must be an integer, got {raw!r}") from exc
        if value < 1:
            raise ConfigError(f"BIBC_THREADS must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


def run_experiment(config, out_dir):
    """All seeds of one experiment plus the cross-seed aggregate file.

    Seeds run as independent workers (process pool) when more than one
    worker is allowed; each run is deterministic in (config, seed).
    """
    tasks = [(config, seed, out_dir) for seed in config.seeds]
    workers = min(max_workers(), len(tasks))
    if workers <= 1 or len(tasks) == 1:
        paths = [_worker(t) for t in tasks]
    else:
        import concurrent.futures
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            paths = list(ex.map(_worker, tasks))
    aggregate = write_aggregate(config, out_dir)
    return {"runs": paths, "aggregate": aggregate}


def read_csv(path):
    """Parse one of our CSV files into a dict of column -> list."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ConfigError(f"{path} is empty")
    header = lines[0].split(",")
    cols = {name: [] for name in header}
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(header):
            raise ConfigError(f"{path}: malformed row {line!r}")
        for name, part in zip(header, parts):
            cols[name].append(part)
    return cols


def _numeric(column):
    return np.array([float(v) for v in column])


def write_aggregate(config, out_dir):
    """Per-episode mean and (population) std across seeds, from the
    episode-summary files."""
    per_seed = []
    for seed in config.seeds:
        _, episodes_path, _ = _out_paths(out_dir, config.algorithm, seed)
        cols = read_csv(episodes_path)
        per_seed.append((_numeric(cols["sum_rate_mean"]),
                         _numeric(cols["reward_mean"])))
    episodes = len(per_seed[0][0])
    for rates, _ in per_seed:
        if len(rates) != episodes:
            raise ConfigError("seed runs disagree on episode count")
    rates = np.stack([r for r, _ in per_seed])
    rewards = np.stack([w for _, w in per_seed])
    path = os.path.join(out_dir, f"{config.algorithm}_aggregate.csv")
    agg = _CsvWriter(path, AGGREGATE_COLUMNS)
    try:
        for e in range(episodes):
            agg.row((e, float(np.mean(rates[:, e])), float(np.std(rates[:, e])),
                     float(np.mean(rewards[:, e])), float(np.std(rewards[:, e]))))
    finally:
        agg.close()
    return path


# ------------------------------------------------------------------ summary


def final_window_mean(episodes_csv_path, window=500):
    """Mean episode sum rate over the last min(window, E) episodes."""
    cols = read_csv(episodes_csv_path)
    rates = _numeric(cols["sum_rate_mean"])
    return float(np.mean(rates[-min(window, len(rates)):]))


def summarize(paths, baseline, window=500):
    """Final-window average per algorithm and percentage gain vs baseline.

    paths are *_episodes.csv files; the algorithm is the filename prefix.
    Multiple seeds of one algorithm average together. Returns rows of
    (algorithm, final_mean, gain_percent) sorted by final mean descending.
    """
    groups = {}
    lengths = set()
    for path in paths:
        name = os.path.basename(path)
        if "_seed" not in name or not name.endswith("_episodes.csv"):
            raise ConfigError(
                f"{path}: expected a <algorithm>_seed<n>_episodes.csv file")
        algo = name.split("_seed", 1)[0]
        cols = read_csv(path)
        rates = _numeric(cols["sum_rate_mean"])
        lengths.add(len(rates))
        groups.setdefault(algo, []).append(
            float(np.mean(rates[-min(window, len(rates)):])))
    if len(lengths) > 1:
        raise ConfigError(
            f"episode counts differ across files: {sorted(lengths)}")
    if baseline not in groups:
        raise ConfigError(
            f"baseline {baseline!r} not among algorithms {sorted(groups)}")
    means = {algo: float(np.mean(vals)) for algo, vals in groups.items()}
    base = means[baseline]
    if base == 0:
        raise ConfigError("baseline final mean is zero; gains undefined")
    rows = [(algo, mean, (mean / base - 1.0) * 100.0)
            for algo, mean in means.items()]
    rows.sort(key=lambda r: r[1], reverse=True)
    return rows


def render_summary(rows, baseline):
    lines = [f"{'algorithm':<10} {'final_mean':>12} {'gain_vs_' + baseline:>14}"]
    for algo, mean, gain in rows:
        lines.append(f"{algo:<10} {mean:>12.4f} {gain:>+13.2f}%")
    return "\n".join(lines)
