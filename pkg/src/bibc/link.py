"""Physical-layer figures of merit: incident power, per-tag SINR, sum rate, and
the nonlinear energy-harvesting model with its inverse."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError
from .numerics import herm_solve

#: floor on reflection coefficients so the open interval (0, 1) has an interior
ALPHA_MARGIN = 1e-3


@dataclass(frozen=True)
class EhParams:
    """Sigmoid harvester: steepness a_nl (1/W), center b_nl (W), saturation m_nl (W).

    p_b_watts is the activation requirement of the tag's rectifier.
    threshold_mode picks how it is enforced: "harvested" inverts the sigmoid
    so the requirement applies to harvested power, "incident" applies it
    directly to the power entering the harvesting branch.
    """

    a_nl: float = 6400.0
    b_nl: float = 0.003
    m_nl: float = 0.024
    p_b_watts: float = 1e-5
    threshold_mode: str = "harvested"

    def __post_init__(self):
        if self.a_nl <= 0:
            raise ParameterError(f"a_nl must be positive, got {self.a_nl}")
        if self.m_nl <= 0:
            raise ParameterError(f"m_nl must be positive, got {self.m_nl}")
        if not 0 < self.p_b_watts < self.m_nl:
            raise ParameterError(
                f"p_b_watts must lie in (0, m_nl) = (0, {self.m_nl}), got {self.p_b_watts}"
            )
        if self.threshold_mode not in ("harvested", "incident"):
            raise ParameterError(
                f"threshold_mode must be 'harvested' or 'incident', got {self.threshold_mode!r}"
            )


@dataclass(frozen=True)
class BeamState:
    """One joint decision: transmit beam w (M,), per-tag unit combiners u (K, N),
    and reflection coefficients alpha (K,)."""

    w: np.ndarray
    u: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=complex)
        u = np.atleast_2d(np.asarray(self.u, dtype=complex))
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "alpha", alpha)
        if u.shape[0] != alpha.shape[0]:
            raise ParameterError(
                f"{u.shape[0]} combiners but {alpha.shape[0]} reflection coefficients"
            )
        if not np.all(np.isfinite(w.view(float))):
            raise ParameterError("transmit beam has non-finite entries")
        norms = np.linalg.norm(u, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ParameterError("combiners must be unit norm within 1e-9")
        # alpha = 0 or 1 is allowed here (degenerate but well defined); the
        # optimizers keep their iterates strictly inside via ALPHA_MARGIN
        if np.any(alpha < 0.0) or np.any(alpha > 1.0):
            raise ParameterError("reflection coefficients must lie in [0, 1]")


def eh_phi(x_watts, eh):
    """Harvested power for incident power x."""
    if x_watts < 0:
        raise ParameterError(f"incident power must be nonnegative, got {x_watts}")
    return eh.m_nl / (1.0 + math.exp(-eh.a_nl * (x_watts - eh.b_nl)))


def eh_phi_inv(p_watts, eh):
    """Incident power needed to harvest p; inverse of eh_phi on (0, m_nl)."""
    if not 0 < p_watts < eh.m_nl:
        raise DomainError(
            f"harvested power must lie in (0, {eh.m_nl}), got {p_watts}"
        )
    return eh.b_nl - math.log((eh.m_nl - p_watts) / p_watts) / eh.a_nl


def eh_threshold(eh):
    """Power the harvesting branch must receive for the tag to activate."""
    if eh.threshold_mode == "incident":
        return eh.p_b_watts
    return eh_phi_inv(eh.p_b_watts, eh)


def eh_feasible(p_in, alpha, eh):
    """True iff the split (1-alpha)·p_in meets the activation threshold.

    The boundary counts as feasible (closed constraint).
    """
    return (1.0 - alpha) * p_in >= eh_threshold(eh)


def incident_power(g_fk, w):
    """Power arriving at one tag: |g_f,k^H w|^2."""
    g_fk = np.asarray(g_fk)
    w = np.asarray(w)
    if g_fk.shape != w.shape:
        raise ParameterError(
            f"forward channel shape {g_fk.shape} does not match beam shape {w.shape}"
        )
    return float(abs(np.vdot(g_fk, w)) ** 2)


def incident_powers(channels, w):
    """Incident power for every tag as a (K,) array."""
    return np.abs(channels.g_f.conj() @ w) ** 2


def effective_channels(channels, w):
    """Reader-side effective vectors F_i^H w: the direct leak (index 0 result)
    and one vector per tag."""
    v0 = channels.f0.conj().T @ w
    # cascade F_k = g_f g_b^H, so F_k^H w collapses to g_b scaled by (g_f^H w)
    scal = channels.g_f.conj() @ w
    vt = scal[:, None] * channels.g_b
    return v0, vt


def all_sinr(channels, beams, config):
    """Per-tag reader SINR as a (K,) array."""
    v0, vt = effective_channels(channels, beams.w)
    k = vt.shape[0]
    out = np.empty(k)
    # cross[k, i] = |u_k^H v_i|^2, direct[k] = |u_k^H v_0|^2
    proj = beams.u.conj() @ vt.T
    cross = np.abs(proj) ** 2
    direct = np.abs(beams.u.conj() @ v0) ** 2
    unorm = np.sum(np.abs(beams.u) ** 2, axis=1)
    for j in range(k):
        signal = beams.alpha[j] * cross[j, j]
        interference = config.delta_d * direct[j] + config.noise_watts * unorm[j]
        for i in range(k):
            if i != j:
                interference += beams.alpha[i] * cross[j, i]
        out[j] = signal / interference
    return out


def sinr(k, channels, beams, config):
    """SINR of tag k for the given beams."""
    return float(all_sinr(channels, beams, config)[k])


def sum_rate(channels, beams, config):
    """Total rate sum_k log2(1 + SINR_k) in bps/Hz."""
    return float(np.sum(np.log2(1.0 + all_sinr(channels, beams, config))))


def mmse_combiners(channels, w, alpha, config):
    """SINR-optimal unit combiners, one per tag: solve Q_k u = h_k, normalize.

    Q_k collects the direct leak, the other tags' reflections and noise; the
    solution maximizes the generalized Rayleigh quotient that defines SINR_k.
    """
    v0, vt = effective_channels(channels, w)
    k, n = vt.shape
    base = config.delta_d * np.outer(v0, v0.conj()) + config.noise_watts * np.eye(n)
    full = base + sum(
        alpha[i] * np.outer(vt[i], vt[i].conj()) for i in range(k)
    )
    out = np.empty((k, n), dtype=complex)
    for j in range(k):
        q = full - alpha[j] * np.outer(vt[j], vt[j].conj())
        x = herm_solve(q, vt[j])
        norm = np.linalg.norm(x)
        if norm < 1e-300:
            # effective channel vanished (w = 0 or orthogonal beam); any unit
            # combiner is equally useless, pick the first basis vector
            out[j] = 0.0
            out[j, 0] = 1.0
        else:
            out[j] = x / norm
    return out
