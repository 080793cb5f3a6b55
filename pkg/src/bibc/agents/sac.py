"""Soft actor-critic over the continuous action box.

Stochastic squashed-Gaussian policy (mean and log-std heads), twin
action-value critics with target twins, and a learned entropy temperature
driven toward a target entropy of minus the action dimension. ReLU hidden
activations throughout.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ParameterError
from ..neural import (Adam, Head, Mlp, NetPair, hidden_for, load_params,
                      save_params)
from .common import ReplayBuffer

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
#: initial log-std bias; keeps the freshly built policy concentrated near
#: tanh(mean) so the first actions start near zero like the other learners
LOG_STD_INIT = -2.0
#: keeps the tanh density correction finite at saturation
SQUASH_EPS = 1e-6
_LOG_2PI = math.log(2.0 * math.pi)


def squashed_logp(mean, log_std, pre):
    """Log density of a = tanh(pre) when pre ~ N(mean, exp(log_std)^2).

    Gaussian log density in pre-space minus the tanh change-of-variables
    term, summed over action dimensions. Shapes broadcast; the last axis is
    the action dimension.
    """
    std = np.exp(log_std)
    eps = (pre - mean) / std
    t = np.tanh(pre)
    base = -0.5 * (eps * eps + _LOG_2PI) - log_std
    corr = np.log1p(SQUASH_EPS - t * t)
    return np.sum(base - corr, axis=-1)


class SacAgent:
    kind = "continuous"

    def __init__(self, state_dim, action_dim, hyper, rng):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.hyper = hyper
        self.target_entropy = -float(action_dim)
        self._rng_explore = rng.derive("exploration")
        self._rng_replay = rng.derive("replay")
        self._rng_sample = rng.derive("policy-sample")
        width = hidden_for(state_dim)
        self.policy = Mlp(state_dim, width,
                          [Head(action_dim, "linear", init_scale=1e-3),
                           Head(action_dim, "linear", init_scale=1e-3,
                                bias_init=LOG_STD_INIT)],
                          "relu", rng.derive("net-init", 0))
        cw = hidden_for(state_dim + action_dim)
        self.q1 = NetPair(Mlp(state_dim + action_dim, cw, [Head(1, "linear")],
                              "relu", rng.derive("net-init", 1)))
        self.q2 = NetPair(Mlp(state_dim + action_dim, cw, [Head(1, "linear")],
                              "relu", rng.derive("net-init", 2)))
        self.policy_opt = Adam(self.policy.params, hyper.actor_lr,
                               decay=hyper.lr_decay, decay_mode=hyper.decay_mode)
        self.q1_opt = Adam(self.q1.online.params, hyper.critic_lr,
                           decay=hyper.lr_decay, decay_mode=hyper.decay_mode)
        self.q2_opt = Adam(self.q2.online.params, hyper.critic_lr,
                           decay=hyper.lr_decay, decay_mode=hyper.decay_mode)
        self.log_xi = math.log(hyper.xi_init)
        self.buffer = ReplayBuffer(hyper.buffer_capacity, state_dim, (action_dim,))

    @property
    def xi(self):
        return math.exp(self.log_xi)

    # ------------------------------------------------------------ interaction

    def begin_episode(self, episode):
        pass

    def _sample(self, states, rng, remember=False):
        """Reparameterized policy sample; returns everything the gradient
        chain needs: (mean, clipped log_std, clip mask, noise, pre, action)."""
        mean, ls_raw = self.policy.forward(states, remember=remember)
        mask = ((ls_raw > LOG_STD_MIN) & (ls_raw < LOG_STD_MAX)).astype(float)
        log_std = np.clip(ls_raw, LOG_STD_MIN, LOG_STD_MAX)
        std = np.exp(log_std)
        eps = rng.normal(size=mean.shape)
        pre = mean + std * eps
        return mean, log_std, mask, eps, pre, np.tanh(pre)

    def act(self, state, explore=True):
        mean, ls_raw = self.policy.forward(np.asarray(state, dtype=float))
        if not explore:
            return np.tanh(mean)
        std = np.exp(np.clip(ls_raw, LOG_STD_MIN, LOG_STD_MAX))
        pre = mean + std * self._rng_explore.normal(size=self.action_dim)
        return np.tanh(pre)

    def observe(self, s, a, r, s2):
        self.buffer.push(s, a, r, s2)
        batch = self.buffer.sample(self._rng_replay, self.hyper.batch_size)
        if batch is None:
            return None
        s, a, r, s2 = batch
        losses = self.critic_step(s, a, r, s2)
        self.policy_step(s)
        self.temperature_step(s)
        self.q1.soft(self.hyper.tau)
        self.q2.soft(self.hyper.tau)
        if self.hyper.debug:
            self._assert_finite()
        return losses

    # --------------------------------------------------------------- updates

    def compute_target(self, r, s2):
        """Entropy-regularized clipped-double-Q target with a fresh sample."""
        mean, log_std, _, _, pre, a2 = self._sample(s2, self._rng_sample)
        logp = squashed_logp(mean, log_std, pre)
        x2 = np.concatenate([s2, a2], axis=1)
        q1 = self.q1.target.forward(x2)[0][:, 0]
        q2 = self.q2.target.forward(x2)[0][:, 0]
        return r + self.hyper.gamma * (np.minimum(q1, q2) - self.xi * logp)

    def critic_step(self, s, a, r, s2):
        z = self.compute_target(r, s2)
        x = np.concatenate([s, a], axis=1)
        batch = s.shape[0]
        losses = []
        for pair, opt in ((self.q1, self.q1_opt), (self.q2, self.q2_opt)):
            q = pair.online.forward(x, remember=True)[0][:, 0]
            losses.append(float(np.mean((z - q) ** 2)))
            grads = pair.online.backward([(2.0 / batch) * (q - z)[:, None]])
            opt.step(grads.params)
        return tuple(losses)

    def policy_step(self, s):
        """Minimize mean(xi * log pi - min_j Q_j) through the reparameterized
        sample; critic gradients route per row to whichever critic attains
        the min."""
        mean, log_std, mask, eps, pre, a = self._sample(s, self._rng_sample,
                                                        remember=True)
        batch = s.shape[0]
        logp = squashed_logp(mean, log_std, pre)
        x = np.concatenate([s, a], axis=1)
        q1 = self.q1.online.forward(x, remember=True)[0][:, 0]
        q2 = self.q2.online.forward(x, remember=True)[0][:, 0]
        loss = float(np.mean(self.xi * logp - np.minimum(q1, q2)))
        first = (q1 <= q2).astype(float)[:, None]
        g1 = -first / batch
        g2 = -(1.0 - first) / batch
        ga = (self.q1.online.backward([g1]).x_grad
              + self.q2.online.backward([g2]).x_grad)[:, self.state_dim:]
        t = a
        std = np.exp(log_std)
        dlogp_dpre = 2.0 * t * (1.0 - t * t) / (1.0 - t * t + SQUASH_EPS)
        xi = self.xi
        gpre = (xi / batch) * dlogp_dpre + ga * (1.0 - t * t)
        gmean = gpre
        glog_std = (gpre * std * eps - xi / batch) * mask
        grads = self.policy.backward([gmean, glog_std])
        self.policy_opt.step(grads.params)
        return loss

    def temperature_step(self, s):
        """One gradient step on log xi toward the target entropy."""
        mean, log_std, _, _, pre, _ = self._sample(s, self._rng_sample)
        logp = squashed_logp(mean, log_std, pre)
        self.log_xi += self.hyper.temperature_lr * self.xi * float(
            np.mean(logp) + self.target_entropy)
        return self.xi

    def _assert_finite(self):
        params = (self.policy.params + self.q1.online.params
                  + self.q2.online.params)
        for p in params:
            if not np.all(np.isfinite(p)):
                raise ParameterError("non-finite parameter after update")
        if not math.isfinite(self.log_xi):
            raise ParameterError("non-finite temperature after update")

    # ------------------------------------------------------------ checkpoint

    def save(self, path):
        arrays = (self.policy.params + self.q1.online.params
                  + self.q2.online.params + self.q1.target.params
                  + self.q2.target.params + [np.array([self.log_xi])])
        save_params(path, arrays)

    def load(self, path):
        arrays = load_params(path)
        nets = (self.policy, self.q1.online, self.q2.online,
                self.q1.target, self.q2.target)
        expected = sum(len(n.params) for n in nets) + 1
        if len(arrays) != expected:
            raise ParameterError(
                f"checkpoint holds {len(arrays)} arrays, expected {expected}")
        i = 0
        for net in nets:
            n = len(net.params)
            net.set_params(arrays[i:i + n])
            i += n
        self.log_xi = float(arrays[i][0])
