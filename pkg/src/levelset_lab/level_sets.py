"""Level sets ``{v : eta_v >= alpha * g(V)}`` and the two-stage experiments built on them.

Stream layout for an experiment started at ``rng = (seed, s)``:

* streams ``[s, s + k0)`` estimate ``g(V)`` (``k0 = streams_needed(g_replicates)``);
* outer replicate ``r`` draws its first field copy from ``outer_stream_index(...)``
  and, for ratio runs, the next ``k_in`` streams feed the independent second copy.

The layout does not depend on ``alpha``, so runs at different ``alpha`` with the
same ``rng`` are paired on identical first copies.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateModelError,
    EmptyLevelSetError,
    IndependenceViolationError,
    InvalidArgumentError,
)
from .estimators import GEstimate, estimate_g, sup_replicates, summarize_maxima
from .field_models import FieldModel, FieldSample
from .sampler import RngStream, SamplerKernel, factorize, sample, streams_needed

DEFAULT_G_REPLICATES = 2000
NONDEGENERACY_FLOOR = 2.0


@dataclass(frozen=True)
class LevelSet:
    indices: np.ndarray
    threshold: float
    alpha: float
    source_seed: int
    source_stream: int = 0

    @property
    def size(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class RatioResult:
    alpha: float
    g_v_hat: GEstimate
    g_u_hat: GEstimate | None
    ratio: float
    levelset_size: int
    replicate_id: int
    seed: int
    stream_index: int
    degenerate: bool = False

    @property
    def empty(self) -> bool:
        return self.levelset_size == 0


@dataclass(frozen=True)
class CardinalityResult:
    alpha: float
    levelset_size: int
    exponent: float
    replicate_id: int
    seed: int
    stream_index: int
    g_v_hat: float
    degenerate: bool = False

    @property
    def empty(self) -> bool:
        return self.levelset_size == 0


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha}")


def extract_level_set(sample: FieldSample, alpha: float, g_v: float) -> LevelSet:
    _check_alpha(alpha)
    if not g_v > 0:
        raise DegenerateModelError(f"g(V) must be positive, got {g_v}")
    threshold = alpha * g_v
    idx = np.flatnonzero(sample.values >= threshold)
    return LevelSet(idx, threshold, alpha, sample.seed, sample.stream_index)


def high_point_set(sample: FieldSample, g_v: float, beta: float, effective_n: float) -> np.ndarray:
    """Indices with ``eta_v >= g(V) - beta * n``."""
    if not beta > 0:
        raise InvalidArgumentError("beta must be positive")
    return np.flatnonzero(sample.values >= g_v - beta * effective_n)


def conditional_g_estimate(kernel: SamplerKernel, levelset: LevelSet, replicates: int,
                           rng: RngStream) -> GEstimate:
    """Expected sup of a fresh field copy restricted to ``levelset``."""
    if levelset.size == 0:
        raise EmptyLevelSetError("cannot estimate g on an empty level set")
    if rng.base_seed == levelset.source_seed:
        lo, hi = rng.stream_index, rng.stream_index + streams_needed(replicates)
        if lo <= levelset.source_stream < hi:
            raise IndependenceViolationError(
                f"streams [{lo}, {hi}) include the level set's source stream "
                f"{levelset.source_stream}"
            )
    return estimate_g(kernel, levelset.indices, replicates, rng)


def outer_stream_index(rng: RngStream, g_replicates: int, replicate_id: int,
                       inner_replicates: int = 0) -> int:
    k_in = streams_needed(inner_replicates) if inner_replicates else 0
    return rng.stream_index + streams_needed(g_replicates) + replicate_id * (1 + k_in)


def _stage_zero(kernel, model, rng, g_replicates, g_v, floor):
    if g_v is None:
        g_v = estimate_g(kernel, None, g_replicates, rng)
    s2 = model.sigma_max_sq
    # a nonpositive g_hat leaves no threshold; every replicate is reported empty
    degenerate = s2 <= 0 or g_v.mean <= 0 or g_v.mean / math.sqrt(s2) < floor
    if degenerate:
        warnings.warn(
            f"{model.name}: g_hat/sigma below non-degeneracy floor {floor}; "
            "results are flagged degenerate",
            stacklevel=3,
        )
    return g_v, degenerate


def ratio_experiment(model: FieldModel, alpha: float, outer_replicates: int,
                     inner_replicates: int, rng: RngStream, *,
                     g_replicates: int = DEFAULT_G_REPLICATES, g_v: GEstimate | None = None,
                     floor: float = NONDEGENERACY_FLOOR, kernel: SamplerKernel | None = None,
                     workers: int = 1) -> list[RatioResult]:
    _check_alpha(alpha)
    if outer_replicates < 1 or inner_replicates < 2:
        raise InvalidArgumentError("need outer_replicates >= 1 and inner_replicates >= 2")
    kernel = kernel or factorize(model)
    g_v, degenerate = _stage_zero(kernel, model, rng, g_replicates, g_v, floor)

    def one(r):
        first = RngStream(rng.base_seed,
                          outer_stream_index(rng, g_replicates, r, inner_replicates))
        if g_v.mean <= 0:
            return RatioResult(alpha, g_v, None, math.nan, 0, r, rng.base_seed,
                               first.stream_index, degenerate)
        ls = extract_level_set(sample(kernel, first), alpha, g_v.mean)
        if ls.size == 0:
            return RatioResult(alpha, g_v, None, math.nan, 0, r, rng.base_seed,
                               first.stream_index, degenerate)
        g_u = conditional_g_estimate(kernel, ls, inner_replicates, first.advance(1))
        return RatioResult(alpha, g_v, g_u, g_u.mean / g_v.mean, ls.size, r,
                           rng.base_seed, first.stream_index, degenerate)

    return _map(one, range(outer_replicates), workers)


def cardinality_experiment(model: FieldModel, alpha: float, replicates: int, rng: RngStream, *,
                           g_replicates: int = DEFAULT_G_REPLICATES,
                           g_v: GEstimate | None = None, floor: float = NONDEGENERACY_FLOOR,
                           kernel: SamplerKernel | None = None,
                           workers: int = 1) -> list[CardinalityResult]:
    """Per replicate, ``log max(|U|, 1) / log |V|``."""
    _check_alpha(alpha)
    kernel = kernel or factorize(model)
    g_v, degenerate = _stage_zero(kernel, model, rng, g_replicates, g_v, floor)
    log_v = math.log(model.size)

    def one(r):
        first = RngStream(rng.base_seed, outer_stream_index(rng, g_replicates, r))
        size = 0
        if g_v.mean > 0:
            size = extract_level_set(sample(kernel, first), alpha, g_v.mean).size
        exponent = math.log(max(size, 1)) / log_v
        return CardinalityResult(alpha, size, exponent, r, rng.base_seed,
                                 first.stream_index, g_v.mean, degenerate)

    return _map(one, range(replicates), workers)


def high_point_experiment(model: FieldModel, beta: float, replicates: int, rng: RngStream, *,
                          g_replicates: int = DEFAULT_G_REPLICATES,
                          kernel: SamplerKernel | None = None) -> list[tuple[int, float]]:
    """``(|S|, log max(|S|,1) / n)`` per replicate for ``S = {eta >= g(V) - beta n}``."""
    kernel = kernel or factorize(model)
    g_v = estimate_g(kernel, None, g_replicates, rng)
    out = []
    for r in range(replicates):
        first = RngStream(rng.base_seed, outer_stream_index(rng, g_replicates, r))
        S = high_point_set(sample(kernel, first), g_v.mean, beta, model.effective_n)
        out.append((len(S), math.log(max(len(S), 1)) / model.effective_n))
    return out


def nested_sup_estimates(kernel: SamplerKernel, subsets, replicates: int, rng: RngStream):
    """``GEstimate`` per subset, all computed on the same replicates."""
    M = sup_replicates(kernel, subsets, replicates, rng)
    s2 = kernel.model.sigma_max_sq
    return [summarize_maxima(M[:, j], len(np.atleast_1d(s)), s2, rng)
            for j, s in enumerate(subsets)]


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
