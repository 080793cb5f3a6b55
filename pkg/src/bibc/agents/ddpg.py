"""Deterministic policy-gradient learner over the continuous action box.

Actor: state -> tanh action. Critic: state in, action injected after the
first hidden layer, scalar value out. Both use tanh hidden activations and
carry target twins updated by Polyak averaging. Exploration adds Gaussian
noise whose scale decays per episode.
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from ..neural import (Adam, Head, Mlp, NetPair, hidden_for, load_params,
                      save_params)
from .common import ReplayBuffer


class DdpgAgent:
    kind = "continuous"

    def __init__(self, state_dim, action_dim, hyper, rng):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.hyper = hyper
        self._rng_explore = rng.derive("exploration")
        self._rng_replay = rng.derive("replay")
        actor = Mlp(state_dim, hidden_for(state_dim),
                    [Head(action_dim, "tanh", init_scale=1e-3)],
                    "tanh", rng.derive("net-init", 0))
        critic = Mlp(state_dim, hidden_for(state_dim + action_dim),
                     [Head(1, "linear")], "tanh",
                     rng.derive("net-init", 1), side_dim=action_dim)
        self.actor = NetPair(actor)
        self.critic = NetPair(critic)
        self.actor_opt = Adam(actor.params, hyper.actor_lr, decay=hyper.lr_decay,
                              decay_mode=hyper.decay_mode)
        self.critic_opt = Adam(critic.params, hyper.critic_lr, decay=hyper.lr_decay,
                               decay_mode=hyper.decay_mode)
        self.buffer = ReplayBuffer(hyper.buffer_capacity, state_dim, (action_dim,))
        self.sigma = hyper.sigma0

    # ------------------------------------------------------------ interaction

    def begin_episode(self, episode):
        """Set the exploration scale for this episode: sigma0 * decay^episode."""
        self.sigma = self.hyper.sigma0 * self.hyper.sigma_decay ** episode

    def act(self, state, explore=True):
        a = self.actor.online.forward(state)[0]
        if explore:
            a = a + self._rng_explore.normal(size=self.action_dim) * self.sigma
        return np.clip(a, -1.0, 1.0)

    def observe(self, s, a, r, s2):
        self.buffer.push(s, a, r, s2)
        batch = self.buffer.sample(self._rng_replay, self.hyper.batch_size)
        if batch is None:
            return None
        s, a, r, s2 = batch
        loss = self.critic_step(s, a, r, s2)
        self.actor_step(s)
        self.actor.soft(self.hyper.tau)
        self.critic.soft(self.hyper.tau)
        if self.hyper.debug:
            self._assert_finite()
        return loss

    # --------------------------------------------------------------- updates

    def critic_step(self, s, a, r, s2):
        """One squared-error step toward r + gamma * q_target(s', actor_target(s'))."""
        a2 = self.actor.target.forward(s2)[0]
        q2 = self.critic.target.forward(s2, side=a2)[0][:, 0]
        y = r + self.hyper.gamma * q2
        q = self.critic.online.forward(s, side=a, remember=True)[0][:, 0]
        batch = s.shape[0]
        loss = float(np.mean((y - q) ** 2))
        grads = self.critic.online.backward([(2.0 / batch) * (q - y)[:, None]])
        self.critic_opt.step(grads.params)
        return loss

    def actor_step(self, s, action_loss_grad=None):
        """Ascend the target critic's value of the actor's own actions.

        action_loss_grad(s, a) -> d loss / d a overrides the critic path
        (loss = -mean q by default).
        """
        a = self.actor.online.forward(s, remember=True)[0]
        batch = s.shape[0]
        if action_loss_grad is None:
            critic = self.critic.target
            critic.forward(s, side=a, remember=True)
            ga = critic.backward([np.full((batch, 1), -1.0 / batch)]).side_grad
        else:
            ga = action_loss_grad(s, a)
        grads = self.actor.online.backward([ga])
        self.actor_opt.step(grads.params)

    def _assert_finite(self):
        for p in self.actor.online.params + self.critic.online.params:
            if not np.all(np.isfinite(p)):
                raise ParameterError("non-finite parameter after update")

    # ------------------------------------------------------------ checkpoint

    def save(self, path):
        arrays = (self.actor.online.params + self.critic.online.params
                  + self.actor.target.params + self.critic.target.params)
        save_params(path, arrays)

    def load(self, path):
        arrays = load_params(path)
        n_a = len(self.actor.online.params)
        n_c = len(self.critic.online.params)
        if len(arrays) != 2 * (n_a + n_c):
            raise ParameterError(
                f"checkpoint holds {len(arrays)} arrays, expected {2 * (n_a + n_c)}")
        i = 0
        for net in (self.actor.online, self.critic.online,
                    self.actor.target, self.critic.target):
            n = len(net.params)
            net.set_params(arrays[i:i + n])
            i += n
