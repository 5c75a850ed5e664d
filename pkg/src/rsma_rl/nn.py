"""Dense policy/value network, diagonal-Gaussian head, Adam, checkpoints.

The policy is a Gaussian in unconstrained logit space: the network maps
the observation to the mean of the action logits, a state-independent
learnable log-std vector sets the spread, and the environment pushes
sampled logits through its Softmax.  A shared tanh trunk (two hidden
layers of 64 by default) feeds separate mean and value heads; a fully
separate value trunk is available behind a flag.

Checkpoints are a little-endian binary blob: magic + version + dims
header, then every parameter array followed by the Adam first/second
moment arrays, all float64, in the order reported by ``parameters()``.
"""

from __future__ import annotations

import struct

import numpy as np

from .autodiff import Tensor

LOG_2PI = float(np.log(2.0 * np.pi))

CKPT_MAGIC = b"RSMANN01"
CKPT_VERSION = 1


class TrainingDivergenceError(RuntimeError):
    """A non-finite loss, gradient or parameter was produced while training."""


def _init_layer(rng, n_in, n_out, scale=1.0):
    w = rng.standard_normal((n_in, n_out)) * (scale / np.sqrt(n_in))
    b = np.zeros(n_out)
    return w, b


class Mlp:
    """Feed-forward stack: tanh on every layer except the (linear) last one."""

    def __init__(self, sizes, rng, out_scale=1.0):
        self.sizes = list(sizes)
        self.weights = []
        self.biases = []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == len(sizes) - 2
            w, b = _init_layer(rng, n_in, n_out, out_scale if last else 1.0)
            self.weights.append(Tensor(w, requires_grad=True))
            self.biases.append(Tensor(b, requires_grad=True))

    def __call__(self, x: Tensor) -> Tensor:
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = x @ w + b
            if i < n_layers - 1:
                x = x.tanh()
        return x

    def forward_np(self, x: np.ndarray) -> np.ndarray:
        """Gradient-free forward pass (same op order as the Tensor path)."""
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = x @ w.data + b.data
            if i < n_layers - 1:
                x = np.tanh(x)
        return x

    def parameters(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b


class PolicyValueNet:
    """Trunk + mean head + value head + log-std, as one parameter set.

    ``forward`` consumes a batch (B, obs_dim) and returns Tensors
    (mean logits (B, act_dim), values (B,)); ``forward_np`` is the
    plain-numpy twin used during rollouts.  The mean head starts with
    small weights so the initial policy is near-uniform after Softmax.
    """

    def __init__(
        self,
        obs_dim: int,
        act_dim: int,
        hidden=(64, 64),
        log_std_init: float = -0.5,
        separate_value: bool = False,
        rng=None,
    ):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.hidden = tuple(hidden)
        self.separate_value = separate_value
        trunk_sizes = [obs_dim, *hidden]
        self.trunk = Mlp(trunk_sizes, rng)
        self.mean_head = Mlp([hidden[-1], act_dim], rng, out_scale=0.01)
        if separate_value:
            self.value_trunk = Mlp(trunk_sizes, rng)
        else:
            self.value_trunk = None
        self.value_head = Mlp([hidden[-1], 1], rng)
        self.log_std = Tensor(np.full(act_dim, log_std_init), requires_grad=True)

    def _trunk_out(self, x: Tensor) -> Tensor:
        # trunk layers all carry tanh (the Mlp leaves its last layer
        # linear, so apply it here)
        return self.trunk(x).tanh()

    def forward(self, obs: Tensor):
        h = self._trunk_out(obs)
        mean = self.mean_head(h)
        hv = self.value_trunk(obs).tanh() if self.separate_value else h
        value = self.value_head(hv)
        return mean, value.sum(axis=1)

    def forward_np(self, obs: np.ndarray):
        h = np.tanh(self.trunk.forward_np(obs))
        mean = self.mean_head.forward_np(h)
        if self.separate_value:
            h = np.tanh(self.value_trunk.forward_np(obs))
        value = self.value_head.forward_np(h)
        return mean, value.sum(axis=1)

    def policy_triplet(self, observation: np.ndarray, k: int):
        """(power logits, split logits, value) for one observation."""
        obs = np.asarray(observation, dtype=float).reshape(1, -1)
        if obs.shape[1] != self.obs_dim:
            raise ValueError(f"expected obs length {self.obs_dim}, got {obs.shape[1]}")
        mean, value = self.forward_np(obs)
        mean = mean[0]
        if self.act_dim == k:  # sdma: power logits only
            return mean, np.empty(0), float(value[0])
        return mean[: k + 1], mean[k + 1 :], float(value[0])

    def parameters(self):
        yield from self.trunk.parameters()
        yield from self.mean_head.parameters()
        if self.separate_value:
            yield from self.value_trunk.parameters()
        yield from self.value_head.parameters()
        yield self.log_std

    def sigma(self) -> np.ndarray:
        return np.exp(self.log_std.data)

    def assert_finite(self):
        for p in self.parameters():
            if not np.all(np.isfinite(p.data)):
                raise TrainingDivergenceError("non-finite network parameter")


# -- Gaussian policy density -------------------------------------------------


def gaussian_log_prob(mean, log_std, x) -> np.ndarray:
    """Diagonal-Gaussian log-density of ``x``, summed over the last axis."""
    mean = np.asarray(mean, dtype=float)
    log_std = np.asarray(log_std, dtype=float)
    if not np.all(np.isfinite(log_std)):
        raise ValueError("log_std must be finite")
    z = (np.asarray(x, dtype=float) - mean) * np.exp(-log_std)
    per_dim = -0.5 * (z * z) - log_std - 0.5 * LOG_2PI
    return per_dim.sum(axis=-1)

def gaussian_log_prob_t(mean: Tensor, log_std: Tensor, x: np.ndarray) -> Tensor:
    """Tensor version of :func:`gaussian_log_prob` (same op order)."""
    z = (Tensor(x) - mean) * (-log_std).exp()
    per_dim = -0.5 * z.square() - log_std - 0.5 * LOG_2PI
    return per_dim.sum(axis=1)


def gaussian_entropy(log_std) -> float:
    """Entropy of the diagonal Gaussian: sum(log_std) + d/2 * log(2*pi*e)."""
    log_std = np.asarray(log_std, dtype=float)
    return float(log_std.sum() + 0.5 * log_std.size * (LOG_2PI + 1.0))


def gaussian_entropy_t(log_std: Tensor) -> Tensor:
    return log_std.sum() + 0.5 * log_std.data.size * (LOG_2PI + 1.0)


# -- optimizer ----------------------------------------------------------------


class Adam:
    """Adam with bias correction; update = alpha * m_hat / (sqrt(v_hat) + eps)."""

    def __init__(self, params, alpha=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise TrainingDivergenceError("non-finite gradient")
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / (1.0 - self.beta1**self.t)
            v_hat = self.v[i] / (1.0 - self.beta2**self.t)
            p.data -= self.alpha * m_hat / (np.sqrt(v_hat) + self.eps)
            p.grad = None  # consumed; a fresh backward must repopulate
            if not np.all(np.isfinite(p.data)):
                raise TrainingDivergenceError("non-finite parameter after update")


# -- checkpoint i/o -----------------------------------------------------------


def save_checkpoint(path, net: PolicyValueNet, opt: Adam | None = None):
    """Write net (and optimizer moments) as a versioned little-endian blob."""
    arrays = [p.data for p in net.parameters()]
    if opt is not None:
        arrays += list(opt.m) + list(opt.v)
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<I", CKPT_VERSION))
        f.write(
            struct.pack(
                "<IIIBB",
                net.obs_dim,
                net.act_dim,
                len(net.hidden),
                1 if net.separate_value else 0,
                1 if opt is not None else 0,
            )
        )
        for h in net.hidden:
            f.write(struct.pack("<I", h))
        f.write(struct.pack("<Q", opt.t if opt is not None else 0))
        for arr in arrays:
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path, alpha=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
    """Rebuild (net, optimizer) from :func:`save_checkpoint` output."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != CKPT_MAGIC:
        raise ValueError(f"{path}: not a network checkpoint (bad magic)")
    off = 8
    (version,) = struct.unpack_from("<I", blob, off)
    off += 4
    if version != CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    obs_dim, act_dim, n_hidden, separate_value, has_opt = struct.unpack_from(
        "<IIIBB", blob, off
    )
    off += 14
    hidden = struct.unpack_from(f"<{n_hidden}I", blob, off)
    off += 4 * n_hidden
    (adam_t,) = struct.unpack_from("<Q", blob, off)
    off += 8

    net = PolicyValueNet(
        obs_dim, act_dim, hidden=hidden, separate_value=bool(separate_value)
    )
    params = list(net.parameters())

    def take(shape):
        nonlocal off
        n = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=off).reshape(shape)
        off += 8 * n
        return arr.astype(float)

    for p in params:
        p.data = take(p.data.shape)
    opt = Adam(params, alpha=alpha, beta1=beta1, beta2=beta2, eps=eps)
    if has_opt:
        opt.t = adam_t
        opt.m = [take(p.data.shape) for p in params]
        opt.v = [take(p.data.shape) for p in params]
    if off != len(blob):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    return net, opt
