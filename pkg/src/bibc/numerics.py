"""Deterministic random streams and small complex-matrix helpers.

Everything downstream (channel draws, exploration noise, replay sampling,
randomized beam extraction) pulls its randomness through SeededRng so that a
(seed, stream) pair pins down every byte an experiment emits.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from .errors import MatrixError, ParameterError

_MASK64 = (1 << 64) - 1


def _splitmix64(x):
    """One splitmix64 round; plain-int arithmetic so it is platform independent."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _mix(*parts):
    """Hash a heterogeneous tuple (ints and strings) into one 64-bit stream id."""
    acc = 0x243F6A8885A308D3
    for part in parts:
        if isinstance(part, str):
            for byte in part.encode("utf-8"):
                acc = _splitmix64(acc ^ byte)
        else:
            acc = _splitmix64(acc ^ (int(part) & _MASK64))
    return acc


class SeededRng:
    """Counter-based random source; (seed, stream) determine the whole sequence.

    `derive` builds a child whose stream id hashes (parent stream, purpose,
    index).  Channel draws, minibatch sampling and exploration noise interleave
    arbitrarily at run time, so each purpose gets its own stream and none of
    them can alias.
    """

    def __init__(self, seed, stream=0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self.gen = np.random.Generator(np.random.Philox(key=key))

    def derive(self, purpose, index=0):
        return SeededRng(self.seed, _mix(self.stream, purpose, index))

    def normal(self, size=None):
        return self.gen.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def choice_without_replacement(self, n, count):
        return self.gen.choice(n, size=count, replace=False)


def cgauss_sample(rng, n, variance=1.0):
    """n i.i.d. circularly-symmetric complex Gaussians with the given per-sample
    variance (real and imaginary parts each carry half)."""
    if variance <= 0:
        raise ParameterError(f"variance must be positive, got {variance}")
    if n < 0:
        raise ParameterError(f"sample count must be nonnegative, got {n}")
    if n == 0:
        return np.zeros(0, dtype=complex)
    raw = rng.normal(2 * n)
    scale = math.sqrt(variance / 2.0)
    return scale * (raw[:n] + 1j * raw[n:])


def _require_square(a, name):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError(f"{name} must be a square matrix, got shape {a.shape}")
    return a


def _require_hermitian(a, name, rtol=1e-12):
    a = _require_square(a, name)
    scale = np.linalg.norm(a)
    if scale > 0 and np.linalg.norm(a - a.conj().T) > rtol * scale:
        raise MatrixError(f"{name} is not Hermitian within relative {rtol:g}")
    return a


def herm_solve(a, b):
    """Solve A x = b for Hermitian positive definite A via Cholesky."""
    a = _require_hermitian(a, "coefficient matrix")
    b = np.asarray(b)
    if b.shape[0] != a.shape[0]:
        raise ParameterError(
            f"right-hand side length {b.shape[0]} does not match matrix size {a.shape[0]}"
        )
    try:
        factor = scipy.linalg.cho_factor(a, lower=True)
    except np.linalg.LinAlgError as exc:
        raise MatrixError("matrix is not positive definite") from exc
    except ValueError as exc:
        raise ParameterError(f"bad matrix content: {exc}") from exc
    return scipy.linalg.cho_solve(factor, b)


def quad_form(u, a):
    """u^H A u as a real number; A is Hermitian so the imaginary part is noise."""
    a = _require_square(a, "matrix")
    u = np.asarray(u)
    if u.shape[0] != a.shape[0]:
        raise ParameterError(
            f"vector length {u.shape[0]} does not match matrix size {a.shape[0]}"
        )
    return float(np.real(np.vdot(u, a @ u)))


def psd_project(a):
    """Nearest positive-semidefinite matrix in Frobenius distance: clip the
    negative eigenvalues of a Hermitian input."""
    a = _require_hermitian(a, "matrix")
    vals, vecs = np.linalg.eigh(a)
    if vals.size and vals[0] >= 0.0:
        return a
    out = (vecs * np.maximum(vals, 0.0)) @ vecs.conj().T
    return 0.5 * (out + out.conj().T)
