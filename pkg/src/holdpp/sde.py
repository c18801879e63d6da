"""Closed-form forward sampling and reverse-time Euler-Maruyama generation.

Phase states are arrays of shape ``(..., n, h)``: ``state[..., 0, :]`` is the
position (data) block and ``state[..., n-1, :]`` the last auxiliary block,
the only one that receives noise. Flattening the last two axes gives the
stacked ``n*h`` vector with blocks contiguous.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import linalg
from .dynamics import DriftSpec, build_drift, covariance_batch, covariance_sqrt_batch, initial_cov, propagator

ScoreFn = Callable[[np.ndarray, float], np.ndarray]


class DivergenceError(FloatingPointError):
    pass


@dataclass(frozen=True)
class ReverseConfig:
    steps: int = 250
    t_end: float = 5.0
    t_eps: float = 5e-3
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not 0 < self.t_eps < self.t_end:
            raise ValueError("need 0 < t_eps < t_end")


def sample_forward(spec: DriftSpec, x0, t, rng: np.random.Generator, alpha: float = 0.08):
    """Draw ``x_t`` given data positions ``x0`` (shape ``(h,)`` or ``(B, h)``).

    Auxiliary blocks start at ``N(0, alpha L^-1)``; that randomness is folded
    into the initial covariance so the mean only carries the data.

    Returns ``(state, eps_n, ell)`` where ``eps_n`` is the standard-normal
    noise of the last block and ``ell`` the ``(n, n)`` Cholesky entry, so that
    the conditional score of the last block is ``-eps_n / ell``.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    single = x0.ndim == 1
    x0 = np.atleast_2d(x0)
    B, h = x0.shape
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (B,))
    if np.any(t < 0):
        raise ValueError("t must be non-negative")

    P = propagator(spec, t)
    L = linalg.cholesky_from_factor(covariance_sqrt_batch(spec, t, initial_cov(spec, alpha)))

    mean = P[:, :, 0, None] * x0[:, None, :]
    eps = rng.standard_normal((B, spec.n, h))
    state = mean + np.einsum("bij,bjh->bih", L, eps)
    eps_n = eps[:, -1, :]
    ell = L[:, -1, -1]
    if single:
        return state[0], eps_n[0], float(ell[0])
    return state, eps_n, ell


def reverse_drift(spec: DriftSpec, state, score, t: float = 0.0) -> np.ndarray:
    """Drift of the time-reversed SDE, per unit of *decreasing* time.

    ``-F x + G G^T s``, with the score ``s`` of the last block placed in
    block ``n``. For ``n = 1`` this is ``xi x + 2 xi L^-1 s``.
    """
    state = np.asarray(state, dtype=np.float64)
    score = np.asarray(score, dtype=np.float64)
    if state.shape[-2] != spec.n:
        raise ValueError(f"state has {state.shape[-2]} blocks, spec has order {spec.n}")
    if score.shape != state.shape[:-2] + state.shape[-1:]:
        raise ValueError(f"score shape {score.shape} does not match state {state.shape}")
    F, GGT = build_drift(spec)
    out = -np.einsum("ij,...jh->...ih", F, state)
    out[..., -1, :] += GGT[-1, -1] * score
    return out


def prior_sample(spec: DriftSpec, shape, rng: np.random.Generator) -> np.ndarray:
    """Draw from the stationary distribution ``N(0, L^-1 I)``; ``shape = (count, h)``."""
    count, h = shape
    return math.sqrt(spec.l_inv) * rng.standard_normal((count, spec.n, h))


def em_reverse(
    spec: DriftSpec,
    score_fn: ScoreFn,
    cfg: ReverseConfig,
    rng: np.random.Generator,
    shape=(1, 1),
    *,
    init=None,
    record: bool = False,
):
    """Integrate the reverse SDE from ``cfg.t_end`` down to ``cfg.t_eps``.

    ``score_fn(state, t)`` returns the last-block score, shape ``(count, h)``.
    Returns the final state ``(count, n, h)``; with ``record=True`` also the
    position block at every grid time, shape ``(steps + 1, count, h)``, and the
    grid itself.
    """
    x = prior_sample(spec, shape, rng) if init is None else np.array(init, dtype=np.float64)
    dt = (cfg.t_end - cfg.t_eps) / cfg.steps
    noise_scale = math.sqrt(2.0 * spec.xi * spec.l_inv * dt)
    times = cfg.t_end - dt * np.arange(cfg.steps + 1)
    path = [x[..., 0, :].copy()] if record else None
    for k in range(cfg.steps):
        t = float(times[k])
        x = x + dt * reverse_drift(spec, x, score_fn(x, t), t)
        x[..., -1, :] += noise_scale * rng.standard_normal(x.shape[:-2] + x.shape[-1:])
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"reverse integration diverged at step {k} (t={t:.4g})")
        if record:
            path.append(x[..., 0, :].copy())
    if record:
        return x, np.stack(path), times
    return x


def gaussian_marginal(spec: DriftSpec, t: float, data_mean, data_var, alpha: float = 0.08):
    """Mean ``(n, h)`` and per-dimension covariance ``(h, n, n)`` of ``x_t``.

    Data are Gaussian with independent dimensions (``data_var`` per dimension),
    so each dimension is an independent ``n``-variate Gaussian.
    """
    data_mean = np.atleast_1d(np.asarray(data_mean, dtype=np.float64))
    data_var = np.broadcast_to(np.asarray(data_var, dtype=np.float64), data_mean.shape)
    P = propagator(spec, float(t))
    mean = P[:, 0, None] * data_mean[None, :]
    covs = np.stack(
        [covariance_batch(spec, P, initial_cov(spec, alpha, position_var=v)) for v in data_var]
    )
    return mean, covs


def gaussian_score_fn(spec: DriftSpec, data_mean, data_var, alpha: float = 0.08) -> ScoreFn:
    """Exact last-block score of the forward marginal when the data are Gaussian."""

    def score(state, t):
        mean, covs = gaussian_marginal(spec, t, data_mean, data_var, alpha)
        prec_last = np.linalg.inv(covs)[:, -1, :]  # (h, n)
        centred = state - mean
        return -np.einsum("hj,...jh->...h", prec_last, centred)

    return score
