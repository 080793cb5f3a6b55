"""Alternating-optimization benchmark: cycle closed-form receive combining,
successive convex approximation over the transmit covariance (projected
gradient ascent with Gaussian randomization for the rank-one extraction),
and fractional programming over the reflection coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleProblem, MatrixError, ParameterError
from .link import (BeamState, effective_channels, eh_threshold,
                   incident_powers, mmse_combiners, sum_rate)
from .numerics import cgauss_sample

_LN2 = math.log(2.0)


@dataclass
class AoOptions:
    """Solver knobs; defaults match the audited tolerances."""

    outer_tol: float = 1e-3
    max_outer: int = 50
    sca_tol: float = 1e-4
    inner_tol: float = 1e-6
    max_inner: int = 150
    n_random: int = 50
    random_rounds: int = 10
    eps_alpha: float = 1e-3
    dykstra_tol: float = 1e-10
    dykstra_max: int = 300
    fp_tol: float = 1e-6
    fp_max: int = 100


@dataclass
class AoState:
    """Iterate of the outer loop; history holds the objective after each
    full receive/transmit/reflection cycle."""

    w_mat: np.ndarray
    w: np.ndarray
    u: np.ndarray
    alpha: np.ndarray
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class AoResult:
    state: AoState
    iterations: int
    converged: bool

    @property
    def objective(self):
        return self.state.history[-1]


# ------------------------------------------------------------------- receive


def solve_receive(channels, w, alpha, config):
    """Optimal unit combiners for fixed beam and reflections (closed form)."""
    return mmse_combiners(channels, w, alpha, config)


# ------------------------------------------------------------------ transmit


def fp_lambda(v, s):
    """Auxiliary ratio variable: sqrt(V)/S."""
    if s <= 0:
        raise ParameterError(f"denominator must be positive, got {s}")
    if v < 0:
        raise ParameterError(f"numerator must be nonnegative, got {v}")
    return math.sqrt(v) / s


class _TransmitProblem:
    """Fixed-combiner transmit subproblem over the covariance W.

    Precomputes, per tag k, the effective transmit-side vectors g for the
    direct link and every tag, so the received powers are linear in W.
    """

    def __init__(self, channels, u, alpha, config):
        self.config = config
        self.alpha = np.asarray(alpha, dtype=float)
        k = self.alpha.shape[0]
        self.k = k
        self.noise = config.noise_watts
        # per combiner k: g0 = F0 u_k and g_i = F_i u_k for every tag i
        self.g0 = np.stack([channels.f0 @ u[j] for j in range(k)])
        self.g = np.stack([[channels.f[i] @ u[j] for i in range(k)]
                           for j in range(k)])
        self.m0 = np.stack([np.outer(self.g0[j], self.g0[j].conj())
                            for j in range(k)])
        self.mt = np.stack([[np.outer(self.g[j, i], self.g[j, i].conj())
                             for i in range(k)] for j in range(k)])
        # gradient matrices of the total power A_k and the interference D_k
        self.ma = np.stack([
            config.delta_d * self.m0[j]
            + sum(self.alpha[i] * self.mt[j, i] for i in range(k))
            for j in range(k)])
        self.md = np.stack([self.ma[j] - self.alpha[j] * self.mt[j, j]
                            for j in range(k)])

    def powers(self, w_mat):
        """(A_k, D_k) for every tag: total received power and interference
        plus noise, both affine in W."""
        a = np.real(np.einsum("kij,ji->k", self.ma, w_mat)) + self.noise
        d = np.real(np.einsum("kij,ji->k", self.md, w_mat)) + self.noise
        return a, d

    def objective(self, w_mat):
        """True rate objective in W-space: sum log2(A_k / D_k); -inf when a
        numerically indefinite iterate drives a power term nonpositive."""
        a, d = self.powers(w_mat)
        if np.any(a <= 0.0) or np.any(d <= 0.0):
            return -np.inf
        return float(np.sum(np.log2(a / d)))

    def surrogate(self, w_mat, w_prev):
        """Minorant of the objective, tight at w_prev: the interference log
        is replaced by its tangent at the expansion point."""
        a, d = self.powers(w_mat)
        _, d_prev = self.powers(w_prev)
        if np.any(a <= 0.0) or np.any(d_prev <= 0.0):
            return -np.inf
        val = np.log2(a) - np.log2(d_prev) - (d - d_prev) / (d_prev * _LN2)
        return float(np.sum(val))

    def surrogate_grad(self, w_mat, w_prev):
        a, _ = self.powers(w_mat)
        _, d_prev = self.powers(w_prev)
        grad = np.zeros_like(w_mat)
        for j in range(self.k):
            grad += self.ma[j] / (a[j] * _LN2) - self.md[j] / (d_prev[j] * _LN2)
        return 0.5 * (grad + grad.conj().T)


def sca_surrogate(w_mat, w_prev, channels, u, alpha, config):
    """Concave minorant of the transmit objective, tight at w_prev."""
    w_mat = np.asarray(w_mat)
    w_prev = np.asarray(w_prev)
    for mat in (w_mat, w_prev):
        if not np.allclose(mat, mat.conj().T, rtol=1e-10, atol=1e-12):
            raise MatrixError("covariance iterates must be Hermitian")
    return _TransmitProblem(channels, u, alpha, config).surrogate(w_mat, w_prev)


def transmit_objective(w_mat, channels, u, alpha, config):
    """True rate objective as a function of the transmit covariance."""
    return _TransmitProblem(channels, u, alpha, config).objective(np.asarray(w_mat))


def _project_trace(w_mat, budget):
    """Frobenius projection onto the half-space trace(W) <= budget."""
    excess = float(np.real(np.trace(w_mat))) - budget
    if excess <= 0:
        return w_mat
    m = w_mat.shape[0]
    return w_mat - (excess / m) * np.eye(m)


def _project_psd(w_mat):
    vals, vecs = np.linalg.eigh(0.5 * (w_mat + w_mat.conj().T))
    if vals[0] >= 0:
        return 0.5 * (w_mat + w_mat.conj().T)
    vals = np.maximum(vals, 0.0)
    out = (vecs * vals) @ vecs.conj().T
    return 0.5 * (out + out.conj().T)


def _project_spectrahedron(w_mat, budget):
    """Exact Frobenius projection onto {W PSD, trace(W) <= budget}.

    Eigenvalues are projected onto {x >= 0, sum x <= budget}: clip when the
    clipped sum fits, otherwise shift by the water line that lands the sum
    exactly on the budget.
    """
    sym = 0.5 * (w_mat + w_mat.conj().T)
    vals, vecs = np.linalg.eigh(sym)
    x = np.maximum(vals, 0.0)
    if float(x.sum()) > budget:
        desc = np.sort(vals)[::-1]
        css = np.cumsum(desc)
        idx = np.arange(1, len(desc) + 1)
        active = desc - (css - budget) / idx > 0
        rho = int(np.nonzero(active)[0][-1]) + 1
        theta = (css[rho - 1] - budget) / rho
        x = np.maximum(vals - theta, 0.0)
    elif vals[0] >= 0:
        return sym
    out = (vecs * x) @ vecs.conj().T
    return 0.5 * (out + out.conj().T)


def _project_halfspace(w_mat, h, c):
    """Projection onto {<H, W> >= c} for the rank-one sensing matrix H."""
    val = float(np.real(np.trace(h @ w_mat)))
    if val >= c:
        return w_mat
    return w_mat + ((c - val) / float(np.real(np.trace(h @ h)))) * h


def _project_feasible(w_mat, eh_mats, eh_rhs, budget, options):
    """Projection onto PSD, trace budget, and the harvesting half-spaces.

    The spectrahedron projection is exact; when it already satisfies the
    half-spaces (the common case) it is the answer, otherwise Dykstra
    alternates between the spectrahedron and the half-spaces.
    """
    def near_feasible(mat):
        return all(float(np.real(np.trace(h @ mat))) >= c * (1.0 - 1e-10)
                   for h, c in zip(eh_mats, eh_rhs))

    x = _project_spectrahedron(w_mat, budget)
    if near_feasible(x):
        return x
    # Dykstra over the half-spaces and the spectrahedron; the spectrahedron
    # goes last so every sweep ends PSD and inside the power budget
    projections = list(zip(eh_mats, eh_rhs)) + [(None, None)]
    x = w_mat
    corr = [np.zeros_like(w_mat) for _ in projections]
    for _ in range(options.dykstra_max):
        moved = 0.0
        for i, (h, c) in enumerate(projections):
            y = x + corr[i]
            if h is None:
                z = _project_spectrahedron(y, budget)
            else:
                z = _project_halfspace(y, h, c)
            corr[i] = y - z
            moved += float(np.linalg.norm(z - x))
            x = z
        if near_feasible(x) or moved < options.dykstra_tol:
            break
    return x


def _ascend_surrogate(problem, w_start, w_prev, eh_mats, eh_rhs, options):
    """Projected gradient ascent on the surrogate from a feasible start."""
    budget = problem.config.ps_watts
    w_mat = _project_feasible(w_start, eh_mats, eh_rhs, budget, options)
    value = problem.surrogate(w_mat, w_prev)
    step = None
    for _ in range(options.max_inner):
        grad = problem.surrogate_grad(w_mat, w_prev)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < 1e-14:
            break
        if step is None:
            step = budget / gnorm
        improved = False
        trial_step = step
        for _ in range(40):
            cand = _project_feasible(w_mat + trial_step * grad, eh_mats,
                                     eh_rhs, budget, options)
            cand_val = problem.surrogate(cand, w_prev)
            if cand_val > value:
                improved = True
                break
            trial_step *= 0.5
        if not improved:
            break
        gain = cand_val - value
        w_mat, value = cand, cand_val
        step = trial_step * 2.0
        if gain < options.inner_tol:
            break
    return w_mat, value


def _eh_feasible_w(w, eh_mats, eh_rhs):
    return all(float(np.real(w.conj() @ h @ w)) >= c * (1.0 - 1e-12)
               for h, c in zip(eh_mats, eh_rhs))


def solve_transmit(state, channels, config, rng, options=None):
    """SCA over the transmit covariance, then rank-one recovery.

    Raises InfeasibleProblem naming the first tag whose harvesting
    requirement exceeds what full transmit power can deliver.
    Returns (w_mat, w) with w never worse than state.w on the true
    objective (the previous beam stays in the candidate set when feasible).
    """
    options = options or AoOptions()
    alpha = state.alpha
    p_th = eh_threshold(config.eh)
    eh_mats = [np.outer(channels.g_f[i], channels.g_f[i].conj())
               for i in range(config.k)]
    eh_rhs = [p_th / (1.0 - alpha[i]) for i in range(config.k)]
    for i in range(config.k):
        gain = float(np.sum(np.abs(channels.g_f[i]) ** 2))
        if (1.0 - alpha[i]) * config.ps_watts * gain < p_th:
            raise InfeasibleProblem(
                f"tag {i}: full transmit power cannot meet the harvesting "
                f"threshold ({config.ps_watts * gain:.3e} W incident ceiling, "
                f"{p_th / (1.0 - alpha[i]):.3e} W required)", tag=i)
    problem = _TransmitProblem(channels, state.u, alpha, config)

    w_prev = np.outer(state.w, state.w.conj())
    w_mat = w_prev
    prev_obj = problem.objective(w_mat)
    for _ in range(30):
        w_mat, _ = _ascend_surrogate(problem, w_mat, w_prev, eh_mats, eh_rhs,
                                     options)
        obj = problem.objective(w_mat)
        w_prev = w_mat
        if abs(obj - prev_obj) < options.sca_tol:
            break
        prev_obj = obj

    # rank-one recovery: full-power Gaussian draws from W plus the dominant
    # eigenvector, screened for harvesting feasibility; the incumbent beam
    # (feasible except possibly at the very first cycle) backstops the set
    def rate_of(w):
        u = state.u
        return sum_rate(channels, BeamState(w=w, u=u, alpha=alpha), config)

    scale = math.sqrt(config.ps_watts)
    vals, vecs = np.linalg.eigh(0.5 * (w_mat + w_mat.conj().T))
    root = vecs * np.sqrt(np.maximum(vals, 0.0))
    candidates = [scale * vecs[:, -1]]
    if float(np.sum(np.abs(state.w) ** 2)) <= config.ps_watts * (1 + 1e-12) \
            and _eh_feasible_w(state.w, eh_mats, eh_rhs):
        candidates.append(state.w)
    best_w, best_rate = None, -np.inf
    for _ in range(options.random_rounds):
        for _ in range(options.n_random):
            x = root @ cgauss_sample(rng, config.m)
            norm = float(np.linalg.norm(x))
            if norm < 1e-300:
                continue
            candidates.append(scale * x / norm)
        for w in candidates:
            if _eh_feasible_w(w, eh_mats, eh_rhs):
                r = rate_of(w)
                if r > best_rate:
                    best_w, best_rate = w, r
        if best_w is not None:
            break
        candidates = []
    if best_w is None:
        raise InfeasibleProblem(
            "randomization found no harvesting-feasible beam", tag=None)
    return w_mat, best_w


# ---------------------------------------------------------------- reflection


def _reflection_terms(channels, w, u, config):
    """Per-tag constants of the reflection subproblem: signal gains c[k, i] =
    |u_k^H F_i^H w|^2 and the alpha-free floor d_k."""
    v0, vt = effective_channels(channels, w)
    k = vt.shape[0]
    proj = u.conj() @ vt.T
    c = np.abs(proj) ** 2
    direct = np.abs(u.conj() @ v0) ** 2
    d = config.delta_d * direct + config.noise_watts * np.sum(np.abs(u) ** 2,
                                                              axis=1)
    return c, d


def _fp_value(alpha, lam, c, d):
    """sum_k log2(1 + 2 lam_k sqrt(V_k) - lam_k^2 S_k); -inf outside the
    concave domain."""
    k = len(alpha)
    total = 0.0
    for j in range(k):
        s = d[j] + sum(alpha[i] * c[j, i] for i in range(k) if i != j)
        e = 1.0 + 2.0 * lam[j] * math.sqrt(alpha[j] * c[j, j]) - lam[j] ** 2 * s
        if e <= 1e-300:
            return -np.inf
        total += math.log2(e)
    return total


def solve_reflection(state, channels, config, options=None):
    """Fractional-programming update of the reflection coefficients.

    Alternates the closed-form ratio variables with projected gradient
    ascent over the per-tag box [eps, min(1 - eps, 1 - P_th / p_in)].
    Raises InfeasibleProblem when a tag's box is empty.
    """
    options = options or AoOptions()
    c, d = _reflection_terms(channels, state.w, state.u, config)
    k = config.k
    p_th = eh_threshold(config.eh)
    p_in = incident_powers(channels, state.w)
    lo = np.full(k, options.eps_alpha)
    hi = np.empty(k)
    for j in range(k):
        if p_in[j] <= 0 or 1.0 - p_th / p_in[j] < options.eps_alpha:
            raise InfeasibleProblem(
                f"tag {j}: incident power {p_in[j]:.3e} W cannot support "
                f"any reflection above {options.eps_alpha}", tag=j)
        hi[j] = min(1.0 - options.eps_alpha, 1.0 - p_th / p_in[j])
    alpha = np.clip(state.alpha.astype(float).copy(), lo, hi)

    def true_rate(a):
        s = np.array([d[j] + sum(a[i] * c[j, i] for i in range(k) if i != j)
                      for j in range(k)])
        return float(np.sum(np.log2(1.0 + a * np.diag(c) / s)))

    prev = true_rate(alpha)
    for _ in range(options.fp_max):
        lam = np.array([
            fp_lambda(alpha[j] * c[j, j],
                      d[j] + sum(alpha[i] * c[j, i] for i in range(k) if i != j))
            for j in range(k)])
        value = _fp_value(alpha, lam, c, d)
        step = None
        for _ in range(options.max_inner):
            grad = np.empty(k)
            for j in range(k):
                s_j = d[j] + sum(alpha[i] * c[j, i] for i in range(k) if i != j)
                e_j = (1.0 + 2.0 * lam[j] * math.sqrt(alpha[j] * c[j, j])
                       - lam[j] ** 2 * s_j)
                grad[j] = lam[j] * math.sqrt(c[j, j] / alpha[j]) / (e_j * _LN2)
                for t in range(k):
                    if t != j:
                        s_t = d[t] + sum(alpha[i] * c[t, i]
                                         for i in range(k) if i != t)
                        e_t = (1.0 + 2.0 * lam[t] * math.sqrt(alpha[t] * c[t, t])
                               - lam[t] ** 2 * s_t)
                        grad[j] -= lam[t] ** 2 * c[t, j] / (e_t * _LN2)
            gnorm = float(np.linalg.norm(grad))
            if gnorm < 1e-14:
                break
            if step is None:
                step = 0.25 / gnorm
            improved = False
            trial = step
            for _ in range(40):
                cand = np.clip(alpha + trial * grad, lo, hi)
                cand_val = _fp_value(cand, lam, c, d)
                if cand_val > value:
                    improved = True
                    break
                trial *= 0.5
            if not improved:
                break
            gain = cand_val - value
            alpha, value = cand, cand_val
            step = trial * 2.0
            if gain < options.inner_tol:
                break
        now = true_rate(alpha)
        if now - prev < options.fp_tol:
            prev = max(prev, now)
            break
        prev = now
    return alpha


# -------------------------------------------------------------- outer loop


def ao_solve(channels, config, rng, options=None):
    """Full benchmark solve on one channel realization.

    Starts from the uniform half-power beam with mid reflections, cycles
    receive -> transmit -> reflection, and stops when the normalized
    objective improvement drops below outer_tol or max_outer cycles pass.
    """
    options = options or AoOptions()
    m = config.m
    w = np.full(m, math.sqrt(config.ps_watts / (2 * m)), dtype=complex)
    alpha = np.full(config.k, 0.5)
    u = solve_receive(channels, w, alpha, config)
    state = AoState(w_mat=np.outer(w, w.conj()), w=w, u=u, alpha=alpha)
    converged = False
    iterations = 0
    for it in range(options.max_outer):
        iterations = it + 1
        state.u = solve_receive(channels, state.w, state.alpha, config)
        state.w_mat, state.w = solve_transmit(state, channels, config, rng,
                                              options)
        state.alpha = solve_reflection(state, channels, config, options)
        obj = sum_rate(channels,
                       BeamState(w=state.w, u=state.u, alpha=state.alpha),
                       config)
        state.history.append(obj)
        if len(state.history) >= 2:
            new, old = state.history[-1], state.history[-2]
            if (new - old) / max(abs(new), 1e-300) < options.outer_tol:
                converged = True
                break
    return AoResult(state=state, iterations=iterations, converged=converged)
