"""Factorization and reproducible sampling.

Random numbers come from counter-based Philox streams: ``RngStream(seed, i)``
keys Philox with ``seed`` and puts ``i`` in the top word of the counter, so
distinct stream indices never overlap. Bulk replicate draws are split into
blocks of ``REPLICATES_PER_STREAM`` rows, block ``j`` drawn from stream
``i + j``; the result depends only on ``(seed, i, replicates)`` and not on
how blocks are scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import (
    CapacityError,
    IndependenceViolationError,
    InvalidArgumentError,
    NotPSDError,
)
from .field_models import FieldModel, FieldSample

DENSE_CAP = 8192
REPLICATES_PER_STREAM = 256

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    base_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.base_seed <= _MASK64:
            raise InvalidArgumentError("base_seed must be a 64-bit unsigned integer")
        if self.stream_index < 0:
            raise InvalidArgumentError("stream_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        bitgen = np.random.Philox(key=self.base_seed, counter=[0, 0, 0, self.stream_index])
        return np.random.Generator(bitgen)

    def advance(self, k: int) -> RngStream:
        return RngStream(self.base_seed, self.stream_index + k)


def streams_needed(replicates: int) -> int:
    return -(-replicates // REPLICATES_PER_STREAM)


@dataclass(frozen=True, eq=False)
class SamplerKernel:
    model: FieldModel
    factor_kind: str
    factor: object
    jitter_used: float
    noise_dim: int

    @property
    def size(self) -> int:
        return self.model.size

    def apply(self, z: np.ndarray) -> np.ndarray:
        """Map white noise rows ``z`` (``count x noise_dim``) to field rows."""
        z = np.atleast_2d(z)
        s = self.model.scale
        if self.factor_kind == "diagonal":
            return z * (s * self.factor)
        if self.factor_kind in ("cholesky-of-covariance", "stored-factor"):
            return s * (z @ self.factor.T)
        U = self.factor
        x, info = lapack.dtbtrs(U, z.T, uplo="U", trans="N")
        if info != 0:
            raise NotPSDError(f"banded solve failed (info={info})", pivot=info)
        return s * x.T


def factorize(model: FieldModel, dense_cap: int = DENSE_CAP) -> SamplerKernel:
    if model.kind == "diagonal":
        return SamplerKernel(model, "diagonal", np.sqrt(model.base_variances), 0.0, model.size)
    if model.kind == "factor":
        A = np.asarray(model.data, dtype=float)
        return SamplerKernel(model, "stored-factor", A, 0.0, A.shape[1])
    if model.kind == "precision":
        U, _ = model.precision_factor()
        return SamplerKernel(model, "sparse-factor-of-precision", U, 0.0, model.size)

    if model.size > dense_cap:
        raise CapacityError(f"dense factorization of size {model.size} exceeds cap {dense_cap}")
    C = np.asarray(model.data, dtype=float)
    base_max = float(np.max(np.diag(C)))
    L, jitter = _cholesky_with_jitter(C, base_max)
    return SamplerKernel(model, "cholesky-of-covariance", L, jitter * model.scale**2, model.size)


def _cholesky_with_jitter(C: np.ndarray, sigma_max_sq: float):
    # 0, then 1e-12 * sigma^2 growing x10 up to 1e-6 * sigma^2
    ref = sigma_max_sq if sigma_max_sq > 0 else 1.0
    schedule = [0.0] + [ref * 10.0**e for e in range(-12, -5)]
    info = 0
    for jitter in schedule:
        A = C + jitter * np.eye(len(C)) if jitter else C
        L, info = lapack.dpotrf(A, lower=1, clean=1)
        if info == 0:
            return L, jitter
        if info < 0:
            raise InvalidArgumentError(f"dpotrf argument error {info}")
    raise NotPSDError(
        f"covariance not positive semidefinite: pivot {info} fails after jitter {schedule[-1]:.3g}",
        pivot=info,
    )


def white_noise(kernel: SamplerKernel, rng: RngStream, count: int = 1) -> np.ndarray:
    return rng.generator().standard_normal((count, kernel.noise_dim))


def sample(kernel: SamplerKernel, rng: RngStream) -> FieldSample:
    values = kernel.apply(white_noise(kernel, rng))[0]
    return FieldSample(values, rng.base_seed, kernel.model.model_id, rng.stream_index)


def sample_blocks(kernel: SamplerKernel, rng: RngStream, replicates: int):
    """Yield ``(first_replicate, block)`` pairs covering ``replicates`` rows."""
    if replicates < 1:
        raise InvalidArgumentError("replicates must be >= 1")
    for j in range(streams_needed(replicates)):
        start = j * REPLICATES_PER_STREAM
        count = min(REPLICATES_PER_STREAM, replicates - start)
        z = white_noise(kernel, rng.advance(j), count)
        yield start, kernel.apply(z)


def sample_matrix(kernel: SamplerKernel, rng: RngStream, replicates: int) -> np.ndarray:
    out = np.empty((replicates, kernel.size))
    for start, block in sample_blocks(kernel, rng, replicates):
        out[start:start + len(block)] = block
    return out


def decompose_sample(gamma: float, bar: FieldSample, tilde: FieldSample) -> FieldSample:
    """Pointwise ``gamma * bar + sqrt(1 - gamma^2) * tilde``."""
    if not 0.0 <= gamma <= 1.0:
        raise InvalidArgumentError(f"gamma must lie in [0, 1], got {gamma}")
    if bar.size != tilde.size or bar.model_id != tilde.model_id:
        raise InvalidArgumentError("samples come from different models")
    if (bar.seed, bar.stream_index) == (tilde.seed, tilde.stream_index):
        raise IndependenceViolationError(
            f"both copies drawn from stream ({bar.seed}, {bar.stream_index})"
        )
    if gamma == 1.0:
        values = bar.values.copy()
    elif gamma == 0.0:
        values = tilde.values.copy()
    else:
        values = gamma * bar.values + math.sqrt(1.0 - gamma * gamma) * tilde.values
    return FieldSample(values, bar.seed, bar.model_id, bar.stream_index)


def empirical_covariance(samples) -> np.ndarray:
    """Unbiased sample covariance of a list of samples (or a replicate matrix)."""
    if isinstance(samples, np.ndarray):
        X = np.atleast_2d(samples)
    else:
        if len(samples) < 2:
            raise InvalidArgumentError("need at least 2 samples")
        lengths = {s.size for s in samples}
        if len(lengths) != 1:
            raise InvalidArgumentError("samples have unequal lengths")
        X = np.stack([s.values for s in samples])
    if X.shape[0] < 2:
        raise InvalidArgumentError("need at least 2 samples")
    D = X - X.mean(axis=0)
    return D.T @ D / (X.shape[0] - 1)
