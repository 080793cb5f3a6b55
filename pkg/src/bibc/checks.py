"""Self-verification: a fast property suite over the numerical core and a
slower audit of the alternating-optimization benchmark. Both return plain
results so callers (CLI, tests) decide how to render or gate on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .agents.dqn import build_codebook
from .ao import ao_solve, fp_lambda, sca_surrogate
from .environment import action_dim, state_dim
from .link import EhParams, eh_phi, eh_phi_inv, eh_threshold, mmse_combiners
from .link import effective_channels
from .neural import Head, Mlp
from .numerics import SeededRng, cgauss_sample
from .scenario import (SystemConfig, build_topology, draw_channels,
                       noise_power_watts)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _result(name, passed, detail):
    return CheckResult(name=name, passed=bool(passed), detail=detail)


def _guarded(name, fn):
    try:
        return fn()
    except Exception as exc:  # a crash is a failing check, not a crash of the suite
        return _result(name, False, f"raised {type(exc).__name__}: {exc}")


def fd_gradient(f, arrays, eps=1e-6):
    """Central finite differences of scalar f() with respect to each array,
    mutating entries in place and restoring them."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            old = arr[idx]
            arr[idx] = old + eps
            fp = f()
            arr[idx] = old - eps
            fm = f()
            arr[idx] = old
            g[idx] = (fp - fm) / (2.0 * eps)
            it.iternext()
        grads.append(g)
    return grads


def _grad_error(analytic, numeric):
    """Normalized worst-case disagreement between gradient lists."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(n))), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n))) / scale)
    return worst


def _check_network_gradients():
    """Backprop vs finite differences for every architecture in use."""
    rng = SeededRng(2024)
    cases = [
        ("tanh net, tanh head", dict(in_dim=7, hidden=(8, 8),
                                     heads=[Head(5, "tanh", init_scale=1e-3)],
                                     activation="tanh", side_dim=0)),
        ("tanh net, action side input", dict(in_dim=7, hidden=(8, 8),
                                             heads=[Head(1, "linear")],
                                             activation="tanh", side_dim=4)),
        ("relu net, two linear heads", dict(in_dim=6, hidden=(8, 8),
                                            heads=[Head(4, "linear", init_scale=1e-3),
                                                   Head(4, "linear", init_scale=1e-3)],
                                            activation="relu", side_dim=0)),
        ("relu net, wide linear head", dict(in_dim=6, hidden=(8, 8),
                                            heads=[Head(16, "linear")],
                                            activation="relu", side_dim=0)),
        ("relu net, value/advantage heads", dict(in_dim=6, hidden=(8, 8),
                                                 heads=[Head(1, "linear"),
                                                        Head(12, "linear")],
                                                 activation="relu", side_dim=0)),
    ]
    worst = 0.0
    for label, shape in cases:
        side_dim = shape.pop("side_dim")
        net = Mlp(rng=rng.derive(label), side_dim=side_dim, **shape)
        batch = 3
        x = rng.derive(label, 1).normal(size=(batch, net.in_dim))
        side = (rng.derive(label, 2).normal(size=(batch, side_dim))
                if side_dim else None)
        weights = [rng.derive(label, 3 + i).normal(size=(batch, h.dim))
                   for i, h in enumerate(net.heads)]

        def loss():
            outs = net.forward(x, side=side)
            return float(sum(np.sum(c * o) for c, o in zip(weights, outs)))

        net.forward(x, side=side, remember=True)
        grads = net.backward(weights)
        analytic = grads.params + [grads.x_grad]
        wiggled = net.params + [x]
        if side_dim:
            analytic.append(grads.side_grad)
            wiggled.append(side)
        numeric = fd_gradient(loss, wiggled)
        worst = max(worst, _grad_error(analytic, numeric))
    return _result("network gradients vs finite differences", worst < 1e-4,
                   f"worst normalized error {worst:.3e} (tolerance 1e-4)")


def _check_eh_roundtrip():
    eh = EhParams()
    worst = 0.0
    for frac in np.linspace(1e-4, 1.0 - 1e-4, 200):
        p = frac * eh.m_nl
        x = eh_phi_inv(p, eh)
        worst = max(worst, abs(eh_phi(x, eh) - p) / p)
    # sweep the invertible range: past ~6 mW the sigmoid saturates to its
    # ceiling within one float64 ulp and the inverse is ill-posed
    for x in np.linspace(1e-4, 5.5e-3, 200):
        p = eh_phi(x, eh)
        worst = max(worst, abs(eh_phi_inv(p, eh) - x) / x)
    return _result("harvester model roundtrip", worst < 1e-9,
                   f"worst relative error {worst:.3e} (tolerance 1e-9)")


def _desk_config(threshold_mode="incident"):
    return SystemConfig(m=4, n=4, k=2,
                        eh=EhParams(threshold_mode=threshold_mode))


def _random_instance(rng, config):
    topology = build_topology(config, rng)
    channels = draw_channels(rng.derive("draw"), config, topology)
    return channels


def _sinr_for_combiners(u_rows, v0, vt, alpha, config, k):
    """SINR of tag k for each row of u_rows (rows need not be normalized:
    the ratio is scale-invariant, but we normalize anyway)."""
    u_rows = u_rows / np.linalg.norm(u_rows, axis=1, keepdims=True)
    sig = alpha[k] * np.abs(u_rows.conj() @ vt[k]) ** 2
    den = (config.delta_d * np.abs(u_rows.conj() @ v0) ** 2
           + config.noise_watts)
    for i in range(len(alpha)):
        if i != k:
            den = den + alpha[i] * np.abs(u_rows.conj() @ vt[i]) ** 2
    return sig / den


def _check_mmse_optimality():
    config = _desk_config()
    rng = SeededRng(11)
    worst_margin = np.inf
    for inst in range(50):
        r = rng.derive("instance", inst)
        channels = _random_instance(r, config)
        w = cgauss_sample(r.derive("w"), config.m)
        w *= math.sqrt(config.ps_watts) / np.linalg.norm(w) * r.derive("p").uniform()
        alpha = r.derive("alpha").uniform(0.05, 0.95, size=config.k)
        u = mmse_combiners(channels, w, alpha, config)
        v0, vt = effective_channels(channels, w)
        rand_u = cgauss_sample(r.derive("u"), 1000 * config.n).reshape(1000,
                                                                       config.n)
        for k in range(config.k):
            best_rand = float(np.max(
                _sinr_for_combiners(rand_u, v0, vt, alpha, config, k)))
            mmse_val = float(_sinr_for_combiners(u[k][None, :], v0, vt, alpha,
                                                 config, k)[0])
            worst_margin = min(worst_margin,
                               (mmse_val - best_rand) / max(best_rand, 1e-30))
    return _result("closed-form combiner beats 1000 random combiners",
                   worst_margin >= -1e-9,
                   f"worst relative margin {worst_margin:.3e} over 50 instances")


def _check_fp_tightness():
    rng = SeededRng(12)
    worst = 0.0
    for _ in range(1000):
        v = rng.uniform(0.0, 10.0)
        s = rng.uniform(1e-6, 10.0)
        lam = fp_lambda(v, s)
        lhs = 1.0 + 2.0 * lam * math.sqrt(v) - lam ** 2 * s
        rhs = 1.0 + v / s
        worst = max(worst, abs(lhs - rhs) / rhs)
    return _result("ratio-transform tightness at the closed-form multiplier",
                   worst < 1e-9, f"worst relative error {worst:.3e}")


def _check_sca_tightness():
    config = _desk_config()
    rng = SeededRng(13)
    worst = 0.0
    for inst in range(10):
        r = rng.derive("instance", inst)
        channels = _random_instance(r, config)
        w = cgauss_sample(r.derive("w"), config.m)
        w *= math.sqrt(config.ps_watts / 2.0) / np.linalg.norm(w)
        alpha = r.derive("alpha").uniform(0.05, 0.95, size=config.k)
        u = mmse_combiners(channels, w, alpha, config)
        w_mat = np.outer(w, w.conj())
        surrogate = sca_surrogate(w_mat, w_mat, channels, u, alpha, config)
        v0, vt = effective_channels(channels, w)
        truth = 0.0
        for k in range(config.k):
            gamma = float(_sinr_for_combiners(u[k][None, :], v0, vt, alpha,
                                              config, k)[0])
            truth += math.log2(1.0 + gamma)
        worst = max(worst, abs(surrogate - truth) / max(abs(truth), 1e-12))
    return _result("surrogate equals the objective at the expansion point",
                   worst < 1e-9, f"worst relative error {worst:.3e}")


def _check_codebook():
    worst_norm = 0.0
    worst_mod = 0.0
    for m in (1, 4, 12):
        book = build_codebook(m, 16)
        worst_norm = max(worst_norm,
                         float(np.max(np.abs(np.linalg.norm(book, axis=1) - 1.0))))
        worst_mod = max(worst_mod,
                        float(np.max(np.abs(np.abs(book) - 1.0 / math.sqrt(m)))))
    ok = worst_norm < 1e-12 and worst_mod < 1e-12
    return _result("codebook rows unit norm with constant modulus", ok,
                   f"worst norm error {worst_norm:.3e}, modulus error {worst_mod:.3e}")


def _check_dimensions():
    config = SystemConfig(m=12, n=12, k=2)
    ds, da = state_dim(config), action_dim(config)
    ok = ds == 990 and da == 26
    return _result("state and action dimensions at the reference size", ok,
                   f"state {ds} (want 990), action {da} (want 26)")


def _check_noise():
    dbm = 10.0 * math.log10(noise_power_watts(1e6, 10.0) * 1000.0)
    ok = abs(dbm - (-77.0)) <= 0.01
    return _result("reader noise power", ok, f"{dbm:.4f} dBm (want -77 +- 0.01)")


def property_suite():
    """Fast self-checks of the numerical core (target < 1 minute)."""
    checks = (
        ("network gradients vs finite differences", _check_network_gradients),
        ("harvester model roundtrip", _check_eh_roundtrip),
        ("closed-form combiner beats 1000 random combiners", _check_mmse_optimality),
        ("ratio-transform tightness at the closed-form multiplier", _check_fp_tightness),
        ("surrogate equals the objective at the expansion point", _check_sca_tightness),
        ("codebook rows unit norm with constant modulus", _check_codebook),
        ("state and action dimensions at the reference size", _check_dimensions),
        ("reader noise power", _check_noise),
    )
    return [_guarded(name, fn) for name, fn in checks]


# ------------------------------------------------------------------ AO audit


def ao_audit(instances=20, seed=7):
    """Monotonicity, convergence, and feasibility of the benchmark solver on
    seeded desk-scale instances (target < 5 minutes)."""
    config = _desk_config()
    p_th = eh_threshold(config.eh)
    worst_drop = 0.0
    max_iters = 0
    all_converged = True
    worst_violation = 0.0
    for inst in range(instances):
        r = SeededRng(seed).derive("audit", inst)
        channels = _random_instance(r, config)
        result = ao_solve(channels, config, r.derive("ao"))
        history = result.state.history
        if len(history) >= 2:
            worst_drop = max(worst_drop,
                             float(np.max(-np.diff(np.asarray(history)))))
        max_iters = max(max_iters, result.iterations)
        all_converged = all_converged and result.converged
        state = result.state
        power = float(np.sum(np.abs(state.w) ** 2))
        worst_violation = max(worst_violation, power - config.ps_watts)
        worst_violation = max(worst_violation,
                              float(np.real(np.trace(state.w_mat)))
                              - config.ps_watts)
        eig_min = float(np.linalg.eigvalsh(
            0.5 * (state.w_mat + state.w_mat.conj().T))[0])
        worst_violation = max(worst_violation, -eig_min)
        p_in = np.abs(channels.g_f.conj() @ state.w) ** 2
        shortfall = p_th - (1.0 - state.alpha) * p_in
        worst_violation = max(worst_violation, float(np.max(shortfall)))
        worst_violation = max(worst_violation, float(np.max(
            np.abs(np.linalg.norm(state.u, axis=1) - 1.0))))
        worst_violation = max(worst_violation, float(np.max(state.alpha)) - 1.0)
        worst_violation = max(worst_violation, -float(np.min(state.alpha)))
    return [
        _result("objective history non-decreasing", worst_drop <= 1e-6,
                f"worst per-cycle drop {worst_drop:.3e} (tolerance 1e-6) "
                f"over {instances} instances"),
        _result("termination within the iteration budget",
                all_converged and max_iters <= 50,
                f"all converged: {all_converged}, max cycles {max_iters}"),
        _result("final solutions feasible", worst_violation <= 1e-9,
                f"worst constraint violation {worst_violation:.3e} "
                f"(tolerance 1e-9)"),
    ]
