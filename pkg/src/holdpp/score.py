"""Score network, denoising score-matching loss and Adam training loop.

The network is a plain tanh MLP written directly in numpy with a
hand-written backward pass. Its input is the flattened phase state plus
sinusoidal time features; its output is the ``h``-dimensional score of the
last block, the only block the diffusion matrix touches.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import DriftSpec
from .sde import sample_forward

log = logging.getLogger(__name__)

N_FREQ = 8
TIME_FEATURES = 2 * N_FREQ


class TrainingError(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    T: float = 5.0
    l_inv: float = 0.5
    alpha: float = 0.08
    batch: int = 256
    iters: int = 20_000
    lr: float = 2e-3
    lr_final: float = 5e-5
    t_eps: float = 5e-3
    seed: int = 0
    log_every: int = 100

    def __post_init__(self):
        for name in ("T", "l_inv", "alpha", "lr", "t_eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.batch < 1 or self.iters < 0:
            raise ValueError("batch must be >= 1 and iters >= 0")
        if not self.t_eps < self.T:
            raise ValueError("t_eps must be smaller than T")

    def learning_rate(self, step: int) -> float:
        """Cosine decay from ``lr`` to ``lr_final`` over ``iters`` steps."""
        if self.iters <= 1:
            return self.lr
        frac = step / (self.iters - 1)
        return self.lr_final + 0.5 * (self.lr - self.lr_final) * (1 + math.cos(math.pi * frac))


def time_features(t, T: float) -> np.ndarray:
    """``sin``/``cos`` of ``pi 2^k t / T`` for ``k = 0..7``; shape ``(..., 16)``."""
    t = np.asarray(t, dtype=np.float64)[..., None]
    arg = np.pi * (2.0 ** np.arange(N_FREQ)) * t / T
    return np.concatenate([np.sin(arg), np.cos(arg)], axis=-1)


@dataclass
class ScoreNet:
    """tanh MLP ``[n*h + 16] -> hidden... -> h``.

    ``weights[l]`` has shape ``(layer_dims[l], layer_dims[l+1])``.
    """

    n: int
    h: int
    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    T: float = 5.0

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if self.layer_dims[0] != self.n * self.h + TIME_FEATURES:
            raise ValueError(f"input width {self.layer_dims[0]} != n*h + {TIME_FEATURES}")
        if self.layer_dims[-1] != self.h:
            raise ValueError(f"output width {self.layer_dims[-1]} != h={self.h}")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("parameter list does not match layer_dims")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (self.layer_dims[l], self.layer_dims[l + 1]) or b.shape != (self.layer_dims[l + 1],):
                raise ValueError(f"layer {l} has wrong parameter shapes")

    @classmethod
    def create(cls, n: int, h: int, hidden=(128, 128, 128), seed: int = 0, T: float = 5.0) -> "ScoreNet":
        rng = np.random.default_rng(seed)
        dims = (n * h + TIME_FEATURES, *hidden, h)
        weights, biases = [], []
        for l in range(len(dims) - 1):
            fan_in, fan_out = dims[l], dims[l + 1]
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(n, h, dims, weights, biases, T)

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def with_flat(self, theta) -> "ScoreNet":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {theta.shape}")
        weights, biases, pos = [], [], 0
        for W, b in zip(self.weights, self.biases):
            weights.append(theta[pos : pos + W.size].reshape(W.shape).copy())
            pos += W.size
            biases.append(theta[pos : pos + b.size].copy())
            pos += b.size
        return replace(self, weights=weights, biases=biases)

    def copy(self) -> "ScoreNet":
        return self.with_flat(self.flat())

    def inputs(self, state, t) -> np.ndarray:
        state = np.asarray(state, dtype=np.float64)
        if state.shape[-2:] != (self.n, self.h):
            raise ValueError(f"state blocks {state.shape[-2:]} do not match net ({self.n}, {self.h})")
        lead = state.shape[:-2]
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), lead)
        return np.concatenate([state.reshape(lead + (self.n * self.h,)), time_features(t, self.T)], axis=-1)

    def _forward(self, z):
        acts = [z]
        last = len(self.weights) - 1
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = z @ W + b
            if l < last:
                z = np.tanh(z)
            acts.append(z)
        return acts

    def __call__(self, state, t) -> np.ndarray:
        return self._forward(self.inputs(state, t))[-1]

    def backward(self, acts, grad_out) -> list[np.ndarray]:
        """Parameter gradients (ordered like :meth:`params`) given ``dL/d output``."""
        grads = []
        g = grad_out
        for l in range(len(self.weights) - 1, -1, -1):
            a_in = acts[l]
            gW = a_in.reshape(-1, a_in.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            gb = g.reshape(-1, g.shape[-1]).sum(axis=0)
            grads[:0] = [gW, gb]
            if l > 0:
                g = (g @ self.weights[l].T) * (1.0 - acts[l] ** 2)
        return grads


def net_forward(net: ScoreNet, state, t) -> np.ndarray:
    return net(state, t)


def loss_terms(net: ScoreNet, state, t, eps_n, ell):
    """Mean of ``||eps_n + ell * s(x_t, t)||^2`` and its parameter gradients."""
    acts = net._forward(net.inputs(state, t))
    out = acts[-1]
    ell = np.asarray(ell, dtype=np.float64)[..., None]
    r = eps_n + ell * out
    B = r.shape[0]
    value = float(np.sum(r * r) / B)
    grads = net.backward(acts, 2.0 * r * ell / B)
    return value, grads


def loss(net: ScoreNet, spec: DriftSpec, batch_positions, cfg: TrainConfig, rng: np.random.Generator):
    """Draw ``t ~ U(t_eps, T)`` and ``x_t`` per sample, return ``(value, grads)``.

    ``eps_n``, ``ell`` and ``x_t`` are constants; gradients flow through the
    network only.
    """
    x0 = np.atleast_2d(np.asarray(batch_positions, dtype=np.float64))
    if x0.shape[0] == 0:
        raise ValueError("empty batch")
    t = rng.uniform(cfg.t_eps, cfg.T, size=x0.shape[0])
    state, eps_n, ell = sample_forward(spec, x0, t, rng, cfg.alpha)
    return loss_terms(net, state, t, eps_n, ell)


@dataclass
class Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def update(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float | None = None):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.step_count += 1
        lr = self.lr if lr is None else lr
        c1 = 1.0 - self.beta1**self.step_count
        c2 = 1.0 - self.beta2**self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train(net: ScoreNet, spec: DriftSpec, dataset, cfg: TrainConfig, callback=None):
    """Train a copy of ``net``; returns ``(trained_net, loss_trace)``.

    ``dataset`` is an array of positions ``(count, h)``. Minibatches are drawn
    with replacement from a generator seeded by ``cfg.seed``, so identical
    inputs give an identical loss trace.
    """
    points = np.asarray(dataset, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[1] != net.h:
        raise ValueError(f"dataset dimension {points.shape[1]} != net h={net.h}")
    if net.n != spec.n:
        raise ValueError(f"net order {net.n} != spec order {spec.n}")

    net = net.copy()
    if cfg.iters == 0:
        return net, []
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(cfg.lr)
    params = net.params()
    trace = []
    for it in range(cfg.iters):
        idx = rng.integers(0, points.shape[0], size=cfg.batch)
        value, grads = loss(net, spec, points[idx], cfg, rng)
        if not math.isfinite(value):
            raise TrainingError(f"non-finite loss at iteration {it}")
        opt.update(params, grads, cfg.learning_rate(it))
        trace.append(value)
        if cfg.log_every and (it + 1) % cfg.log_every == 0:
            recent = float(np.mean(trace[-cfg.log_every :]))
            log.info("iter %d loss %.5f", it + 1, recent)
            if callback is not None:
                callback(it + 1, recent)
    return net, trace


def score_fn(net: ScoreNet):
    """Adapter so a network can drive :func:`holdpp.sde.em_reverse`."""
    return lambda state, t: net(state, t)
