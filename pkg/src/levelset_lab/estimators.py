"""Monte Carlo estimates of the expected supremum and the closed-form bounds around it."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcx

from .errors import DegenerateModelError, InvalidArgumentError
from .field_models import FieldModel
from .sampler import RngStream, SamplerKernel, sample_blocks, streams_needed

# two-sided 95% level of 2 exp(-z^2 / (2 sigma^2))
BORELL_LEVEL = 0.05
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GEstimate:
    mean: float
    stderr: float
    replicates: int
    borell_halfwidth: float
    subset_size: int
    base_seed: int = 0
    stream_start: int = 0
    streams_used: int = 0


@dataclass(frozen=True)
class BoundReport:
    bound_value: float
    a_n: float
    excess_sum: float


@dataclass(frozen=True)
class ConcentrationRow:
    z: float
    exceed_freq: float
    bound: float
    binom_sd: float
    replicates: int

    @property
    def ok(self) -> bool:
        return self.exceed_freq <= self.bound + 4.0 * self.binom_sd


def borell_halfwidth(sigma_sq: float) -> float:
    return math.sqrt(sigma_sq) * math.sqrt(2.0 * math.log(2.0 / BORELL_LEVEL))


def _as_subset(subset, size):
    if subset is None:
        return np.arange(size)
    idx = np.asarray(subset, dtype=int).ravel()
    if idx.size == 0:
        raise InvalidArgumentError("subset must be nonempty")
    if idx.min() < 0 or idx.max() >= size:
        raise InvalidArgumentError("subset index out of range")
    return idx


def sup_replicates(kernel: SamplerKernel, subsets, replicates: int, rng: RngStream) -> np.ndarray:
    """Per-replicate suprema, one column per subset, all on shared samples."""
    idxs = [_as_subset(s, kernel.size) for s in subsets]
    out = np.empty((replicates, len(idxs)))
    for start, block in sample_blocks(kernel, rng, replicates):
        stop = start + len(block)
        for j, idx in enumerate(idxs):
            out[start:stop, j] = block[:, idx].max(axis=1)
    return out


def summarize_maxima(maxima: np.ndarray, subset_size: int, sigma_sq: float,
                     rng: RngStream) -> GEstimate:
    r = len(maxima)
    if r < 2:
        raise InvalidArgumentError("need at least 2 replicates")
    return GEstimate(
        mean=float(np.mean(maxima)),
        stderr=float(np.std(maxima, ddof=1) / math.sqrt(r)),
        replicates=r,
        borell_halfwidth=borell_halfwidth(sigma_sq),
        subset_size=subset_size,
        base_seed=rng.base_seed,
        stream_start=rng.stream_index,
        streams_used=streams_needed(r),
    )


def estimate_g(kernel: SamplerKernel, subset, replicates: int, rng: RngStream) -> GEstimate:
    """Estimate ``E[max_{v in subset} eta_v]``; ``subset=None`` means the full index set."""
    if replicates < 2:
        raise InvalidArgumentError("need at least 2 replicates")
    idx = _as_subset(subset, kernel.size)
    maxima = sup_replicates(kernel, [idx], replicates, rng)[:, 0]
    return summarize_maxima(maxima, len(idx), kernel.model.sigma_max_sq, rng)


def analytic_g_pair(var_u: float, var_v: float, cov_uv: float) -> float:
    """Exact ``E max(X, Y)`` for a centered Gaussian pair."""
    if var_u < 0 or var_v < 0 or cov_uv * cov_uv > var_u * var_v * (1 + 1e-12):
        raise InvalidArgumentError("pair covariance is not positive semidefinite")
    d = max(var_u + var_v - 2.0 * cov_uv, 0.0)
    return math.sqrt(d / (2.0 * math.pi))


def gaussian_upper_tail(x: float) -> float:
    """``P(Z >= x)`` for a standard normal ``Z``."""
    return float(0.5 * erfc(x / math.sqrt(2.0)))


def expected_excess(sd: float, a: float) -> float:
    """``E (X - a)_+`` for ``X ~ N(0, sd^2)``."""
    if not sd > 0:
        raise InvalidArgumentError("sd must be positive")
    x = a / sd
    if x <= 0:
        return float(sd * _INV_SQRT_2PI * math.exp(-0.5 * x * x) - a * gaussian_upper_tail(x))
    # factor out exp(-x^2/2) so the tail stays representable
    bracket = _INV_SQRT_2PI - 0.5 * x * erfcx(x / math.sqrt(2.0))
    return float(sd * math.exp(-0.5 * x * x) * bracket)


def union_bound_g(model: FieldModel, subset_size: int) -> BoundReport:
    """Union bound with ``a_n = sqrt(2 sigma_n^2 log |S|)`` and worst-case variance."""
    if subset_size < 1:
        raise InvalidArgumentError("subset_size must be >= 1")
    s2 = model.sigma_max_sq
    if s2 <= 0:
        return BoundReport(0.0, 0.0, 0.0)
    a_n = math.sqrt(2.0 * s2 * math.log(subset_size))
    excess = subset_size * expected_excess(math.sqrt(s2), a_n)
    return BoundReport(a_n + excess, a_n, excess)


def union_bound_from_variances(variances, a_n: float | None = None) -> BoundReport:
    """Per-point form of the union bound; tighter when variances differ."""
    v = np.asarray(variances, dtype=float)
    if a_n is None:
        a_n = math.sqrt(2.0 * v.max() * math.log(len(v)))
    excess = sum(expected_excess(math.sqrt(x), a_n) for x in v if x > 0)
    return BoundReport(a_n + excess, a_n, excess)


def borell_tail_bound(z: float, sigma_sq: float) -> float:
    if z < 0:
        raise InvalidArgumentError("z must be nonnegative")
    if not sigma_sq > 0:
        raise InvalidArgumentError("sigma_sq must be positive")
    return 2.0 * math.exp(-z * z / (2.0 * sigma_sq))


def concentration_check(kernel: SamplerKernel, subset, replicates: int, rng: RngStream,
                        z_multiples=(1.0, 2.0, 3.0)) -> list[ConcentrationRow]:
    """Empirical ``P(|sup - g_hat| >= z)`` against the Gaussian concentration bound."""
    maxima = sup_replicates(kernel, [subset], replicates, rng)[:, 0]
    dev = np.abs(maxima - maxima.mean())
    s2 = kernel.model.sigma_max_sq
    rows = []
    for k in z_multiples:
        z = k * math.sqrt(s2)
        bound = borell_tail_bound(z, s2)
        p = min(bound, 1.0)
        rows.append(ConcentrationRow(
            z=z,
            exceed_freq=float(np.mean(dev >= z)),
            bound=bound,
            binom_sd=math.sqrt(p * (1.0 - p) / replicates),
            replicates=replicates,
        ))
    return rows


def nondegeneracy_ratio(gest: GEstimate, model: FieldModel) -> float:
    s2 = model.sigma_max_sq
    if s2 <= 0:
        raise DegenerateModelError(f"{model.name}: maximum variance is zero")
    if model.size == 1:
        return 0.0
    return gest.mean / math.sqrt(s2)


def extremality_ratio(gest: GEstimate, model: FieldModel) -> float:
    denom = model.effective_n * math.sqrt(2.0 * math.log(model.lam))
    if denom <= 0:
        raise DegenerateModelError(f"{model.name}: effective_n is zero")
    return gest.mean / denom
