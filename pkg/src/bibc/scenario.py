"""System geometry, large-scale fading, and per-episode channel realizations
for a multi-antenna backscatter link: an M-antenna carrier emitter, an
N-antenna reader, and K single-antenna tags."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .link import EhParams, eh_threshold
from .numerics import SeededRng, cgauss_sample


def noise_power_watts(bw_hz, nf_db):
    """Reader noise power for the given bandwidth and noise figure."""
    if bw_hz <= 0:
        raise ParameterError(f"bandwidth must be positive, got {bw_hz}")
    dbm = -147.0 + 10.0 * math.log10(bw_hz) + nf_db
    return 10.0 ** (dbm / 10.0) / 1000.0


@dataclass(frozen=True)
class SystemConfig:
    """Static system parameters shared by the simulator and the optimizers."""

    m: int = 12
    n: int = 12
    k: int = 2
    ps_watts: float = 10.0
    delta_d: float = 0.01
    noise_watts: float = noise_power_watts(1e6, 10.0)
    pathloss_c0_db: float = -30.0
    d0_m: float = 1.0
    zeta: float = 2.0
    carrier_hz: float = 3e9
    ce_pos: tuple = (3.0, 0.0, 0.0)
    reader_pos: tuple = (0.0, 8.0, 0.0)
    tag_center: tuple = (3.0, 8.0, 0.0)
    tag_radius_m: float = 2.0
    eh: EhParams = field(default_factory=EhParams)

    def __post_init__(self):
        if self.m < 1 or self.n < 1 or self.k < 1:
            raise ParameterError(
                f"antenna/tag counts must be positive, got m={self.m} n={self.n} k={self.k}"
            )
        if self.ps_watts <= 0:
            raise ParameterError(f"transmit power budget must be positive, got {self.ps_watts}")
        if self.noise_watts <= 0:
            raise ParameterError(f"noise power must be positive, got {self.noise_watts}")
        if not 0 <= self.delta_d:
            raise ParameterError(f"direct-link weight must be nonnegative, got {self.delta_d}")
        if self.d0_m <= 0 or self.tag_radius_m < 0:
            raise ParameterError("reference distance must be positive and tag radius nonnegative")

    @property
    def p_th(self):
        """Activation threshold implied by the harvester parameters."""
        return eh_threshold(self.eh)


def path_loss_linear(config, d_m):
    """Large-scale power gain at distance d: C0 (d/d0)^-zeta."""
    if d_m <= 0:
        raise ParameterError(f"distance must be positive, got {d_m}")
    c0 = 10.0 ** (config.pathloss_c0_db / 10.0)
    return c0 * (d_m / config.d0_m) ** (-config.zeta)


def place_tags(rng, k, center, radius):
    """Drop k tags uniformly over a disc (area-uniform radius via sqrt)."""
    center = np.asarray(center, dtype=float)
    u = rng.uniform(size=k)
    theta = rng.uniform(size=k) * 2.0 * math.pi
    r = radius * np.sqrt(u)
    pos = np.tile(center, (k, 1))
    pos[:, 0] += r * np.cos(theta)
    pos[:, 1] += r * np.sin(theta)
    return pos


@dataclass(frozen=True)
class Topology:
    """Fixed geometry of one experiment: tag positions and the large-scale
    gains of every link (direct, forward per tag, backward per tag)."""

    tag_pos: np.ndarray
    d_direct: float
    d_forward: np.ndarray
    d_backward: np.ndarray
    beta_direct: float
    beta_forward: np.ndarray
    beta_backward: np.ndarray


def build_topology(config, rng):
    """Place the tags and precompute all link distances and path losses."""
    tag_pos = place_tags(rng.derive("tag-placement"), config.k, config.tag_center,
                         config.tag_radius_m)
    ce = np.asarray(config.ce_pos, dtype=float)
    rd = np.asarray(config.reader_pos, dtype=float)
    d_direct = float(np.linalg.norm(ce - rd))
    d_forward = np.linalg.norm(tag_pos - ce, axis=1)
    d_backward = np.linalg.norm(tag_pos - rd, axis=1)
    return Topology(
        tag_pos=tag_pos,
        d_direct=d_direct,
        d_forward=d_forward,
        d_backward=d_backward,
        beta_direct=path_loss_linear(config, d_direct),
        beta_forward=np.array([path_loss_linear(config, d) for d in d_forward]),
        beta_backward=np.array([path_loss_linear(config, d) for d in d_backward]),
    )


@dataclass(frozen=True)
class ChannelRealization:
    """One block-fading draw: direct channel f0 (M, N), forward rows g_f (K, M),
    backward rows g_b (K, N), and the rank-one cascades f (K, M, N)."""

    f0: np.ndarray
    g_f: np.ndarray
    g_b: np.ndarray
    f: np.ndarray

    @staticmethod
    def from_links(f0, g_f, g_b):
        f = g_f[:, :, None] * g_b.conj()[:, None, :]
        return ChannelRealization(f0=f0, g_f=g_f, g_b=g_b, f=f)


def draw_channels(rng, config, topology):
    """Draw one realization: i.i.d. Rayleigh small-scale fading scaled by the
    square root of each link's large-scale gain.

    Draw order is fixed (direct, then forward tags ascending, then backward
    tags ascending) so a given stream always yields the same realization.
    """
    m, n, k = config.m, config.n, config.k
    f0 = cgauss_sample(rng, m * n, topology.beta_direct).reshape(m, n)
    g_f = np.stack([
        cgauss_sample(rng, m, topology.beta_forward[i]) for i in range(k)
    ])
    g_b = np.stack([
        cgauss_sample(rng, n, topology.beta_backward[i]) for i in range(k)
    ])
    return ChannelRealization.from_links(f0, g_f, g_b)


class Scenario:
    """Seeded world model: fixed topology, fresh channels each episode.

    channels(e) is deterministic in (seed, e); calling it twice returns the
    same realization, so training and evaluation can replay episodes.
    """

    def __init__(self, config, seed):
        self.config = config
        self._rng = SeededRng(seed)
        self.topology = build_topology(config, self._rng)

    def channels(self, episode):
        if episode < 0:
            raise ParameterError(f"episode index must be nonnegative, got {episode}")
        return draw_channels(self._rng.derive("channels", episode), self.config,
                             self.topology)

    def large_scale(self):
        """Per-link large-scale gains used to normalize observations."""
        t = self.topology
        return t.beta_direct, t.beta_forward, t.beta_backward
