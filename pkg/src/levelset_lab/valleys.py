"""Greedy epsilon-nets over correlation balls and multiple-valley certificates.

The ball around ``v`` is ``{u : corr(u, v) >= epsilon}``; it is one-sided, so
anti-correlated points lie outside each other's balls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateModelError, IndependenceViolationError, InvalidArgumentError
from .field_models import FieldModel, FieldSample, covariance_entry

VALLEY_GROWTH_THRESHOLD = 0.05


@dataclass(frozen=True)
class NetResult:
    centers: np.ndarray
    epsilon: float
    candidate_pool: np.ndarray
    growth_exponent: float


@dataclass(frozen=True)
class ValleyReport:
    centers: np.ndarray
    epsilon: float
    delta: float
    g_v_hat: float
    value_floor: float
    growth_exponent: float
    pool_size: int
    cond_a: bool
    cond_b: bool
    cond_c: bool

    @property
    def net_size(self) -> int:
        return len(self.centers)


def normalized_correlation(model: FieldModel, u, v) -> float:
    su = covariance_entry(model, u, u)
    sv = covariance_entry(model, v, v)
    if su <= 0 or sv <= 0:
        raise DegenerateModelError("normalized correlation needs positive variances")
    r = covariance_entry(model, u, v) / math.sqrt(su * sv)
    return min(1.0, max(-1.0, r))


def _correlations_with(model, pool, c):
    var = model.variances
    col = model.column(c)[pool]
    return np.clip(col / np.sqrt(var[pool] * var[c]), -1.0, 1.0)


def _growth(count, model):
    if count == 0 or model.effective_n <= 0:
        return 0.0
    return math.log(count) / model.effective_n


def _sweep_order(pool, order, values):
    pool = np.asarray(pool, dtype=int)
    if isinstance(order, str):
        if order == "index":
            return np.sort(pool)
        if order == "value":
            if values is None:
                raise InvalidArgumentError("order='value' needs sample values")
            vals = np.asarray(values)[pool]
            # descending value, ascending index on ties
            return pool[np.lexsort((pool, -vals))]
        raise InvalidArgumentError(f"unknown order rule {order!r}")
    seq = np.asarray(order, dtype=int)
    if sorted(seq.tolist()) != sorted(pool.tolist()):
        raise InvalidArgumentError("explicit order must be a permutation of the pool")
    return seq


def build_epsilon_net(model: FieldModel, pool, epsilon: float, order="index",
                      values=None) -> NetResult:
    """Maximal epsilon-net of ``pool`` by a greedy sweep in ``order``.

    A point becomes a center iff its correlation with every earlier center is
    strictly below ``epsilon``.
    """
    if not 0.0 < epsilon < 1.0:
        raise InvalidArgumentError(f"epsilon must lie in (0, 1), got {epsilon}")
    pool = np.asarray(pool, dtype=int)
    if pool.size == 0:
        raise InvalidArgumentError("pool must be nonempty")
    if np.any(model.variances[pool] <= 0):
        raise DegenerateModelError("pool contains zero-variance points")

    seq = _sweep_order(pool, order, values)
    covered = np.zeros(len(seq), dtype=bool)
    centers = []
    for i, v in enumerate(seq):
        if covered[i]:
            continue
        centers.append(int(v))
        covered |= _correlations_with(model, seq, int(v)) >= epsilon
    centers = np.array(centers, dtype=int)
    return NetResult(centers, epsilon, np.sort(pool), _growth(len(centers), model))


def verify_net(model: FieldModel, net: NetResult) -> bool:
    """Exhaustive packing and covering check of ``net``."""
    centers = np.asarray(net.centers, dtype=int)
    pool = np.asarray(net.candidate_pool, dtype=int)
    if centers.size == 0:
        return pool.size == 0
    if not np.all(np.isin(centers, pool)):
        return False
    if len(set(centers.tolist())) != len(centers):
        return False
    var = model.variances
    block = model.covariance_block(pool, centers)
    corr = block / np.sqrt(np.outer(var[pool], var[centers]))
    corr = np.clip(corr, -1.0, 1.0)
    row_of = {int(p): i for i, p in enumerate(pool)}
    rows = [row_of[int(c)] for c in centers]
    pair = corr[rows]
    np.fill_diagonal(pair, -np.inf)
    if np.any(pair >= net.epsilon):
        return False
    is_center = np.isin(pool, centers)
    covered = is_center | np.any(corr >= net.epsilon, axis=1)
    return bool(np.all(covered))


def find_multiple_valleys(model: FieldModel, sample: FieldSample, g_v: float, delta: float,
                          epsilon: float, *, order="value",
                          growth_threshold: float = VALLEY_GROWTH_THRESHOLD,
                          certificate: FieldSample | None = None) -> ValleyReport:
    """Net the high points ``{eta_v >= g_v - delta n}`` of ``sample`` and score the three conditions.

    With ``certificate`` given, the pool still comes from ``sample`` but the
    sweep order and condition (c) use the values of that independent copy.
    """
    if not g_v > 0:
        raise DegenerateModelError(f"g(V) must be positive, got {g_v}")
    if not delta > 0:
        raise InvalidArgumentError("delta must be positive")
    floor = g_v - delta * model.effective_n
    pool = np.flatnonzero(sample.values >= floor)
    if pool.size == 0:
        return ValleyReport(np.array([], dtype=int), epsilon, delta, g_v, floor, 0.0, 0,
                            False, False, False)
    if certificate is not None:
        if certificate.size != sample.size or certificate.model_id != sample.model_id:
            raise InvalidArgumentError("certificate comes from a different model")
        if (certificate.seed, certificate.stream_index) == (sample.seed, sample.stream_index):
            raise IndependenceViolationError("certificate reuses the pool sample's stream")
    values = (certificate or sample).values
    net = build_epsilon_net(model, pool, epsilon, order=order, values=values)
    c = net.centers
    if len(c) > 1:
        var = model.variances
        corr = model.covariance_block(c, c) / np.sqrt(np.outer(var[c], var[c]))
        np.fill_diagonal(corr, -np.inf)
        cond_b = bool(np.all(corr <= epsilon))
    else:
        cond_b = True
    cond_c = bool(np.all(values[c] >= floor))
    return ValleyReport(c, epsilon, delta, g_v, floor, net.growth_exponent, int(pool.size),
                        net.growth_exponent >= growth_threshold, cond_b, cond_c)


def mixture_coefficient(t, alpha):
    """``alpha t + sqrt(1 - alpha^2) sqrt(1 - t^2)``; vectorizes over arrays."""
    t_arr = np.asarray(t, dtype=float)
    a_arr = np.asarray(alpha, dtype=float)
    if np.any((t_arr < 0) | (t_arr > 1) | (a_arr < 0) | (a_arr > 1)):
        raise InvalidArgumentError("t and alpha must lie in [0, 1]")
    h = a_arr * t_arr + np.sqrt(1.0 - a_arr**2) * np.sqrt(1.0 - t_arr**2)
    return float(h) if h.ndim == 0 else h


def residual_variance_bound(model: FieldModel, center, u) -> tuple[float, float]:
    """Regress ``eta_u`` on ``eta_center``: returns ``(rho, var(eta_u - rho eta_center))``."""
    s_cc = covariance_entry(model, center, center)
    if s_cc <= 0:
        raise DegenerateModelError("center has zero variance")
    s_uu = covariance_entry(model, u, u)
    s_uc = covariance_entry(model, u, center)
    rho = s_uc / s_cc
    residual = max(s_uu - rho * rho * s_cc, 0.0)
    r = s_uc / math.sqrt(s_uu * s_cc) if s_uu > 0 else 0.0
    assert residual <= (1.0 - r * r) * s_uu + 1e-9 * max(1.0, s_uu)
    return rho, residual
