"""Shared agent machinery: hyperparameter bundle and the FIFO replay buffer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError


@dataclass
class AgentHyper:
    """Training constants shared across learners; fields unused by a given
    agent are ignored by it."""

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
    debug: bool = False

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ParameterError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.buffer_capacity < 1 or self.batch_size < 1:
            raise ParameterError("buffer capacity and batch size must be positive")
        if self.batch_size > self.buffer_capacity:
            raise ParameterError("batch size cannot exceed buffer capacity")
        if not 0.0 <= self.eps_min <= self.eps0 <= 1.0:
            raise ParameterError("need 0 <= eps_min <= eps0 <= 1")
        if self.target_sync < 1:
            raise ParameterError("target_sync must be positive")
        if self.l_ce < 1 or self.l_p < 2 or self.l_eh < 2:
            raise ParameterError("need l_ce >= 1, l_p >= 2 and l_eh >= 2")


class ReplayBuffer:
    """Fixed-capacity FIFO of (s, a, r, s') with uniform sampling.

    Preallocated ring storage; once full, each push overwrites the oldest
    entry. Actions are float vectors or scalar indices depending on shape.
    """

    def __init__(self, capacity, state_dim, action_shape, action_dtype=float):
        if capacity < 1:
            raise ParameterError(f"capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self._s = np.zeros((capacity, state_dim))
        self._a = np.zeros((capacity,) + tuple(action_shape), dtype=action_dtype)
        self._r = np.zeros(capacity)
        self._s2 = np.zeros((capacity, state_dim))
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, s, a, r, s2):
        i = self._next
        self._s[i] = s
        self._a[i] = a
        self._r[i] = r
        self._s2[i] = s2
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, rng, batch_size):
        """Uniform without-replacement minibatch; None while undersized."""
        if self._size < batch_size:
            return None
        idx = rng.choice_without_replacement(self._size, batch_size)
        return (self._s[idx].copy(), self._a[idx].copy(), self._r[idx].copy(),
                self._s2[idx].copy())
