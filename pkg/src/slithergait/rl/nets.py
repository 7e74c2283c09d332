"""Small fully-connected networks with hand-written backprop.

The policy is a 26 -> 200 -> 200 -> 8 ReLU MLP emitting the action mean, with
a separate identically-shaped value head (26 -> 200 -> 200 -> 1) and a global
learned log standard deviation per action dimension. Everything is float64
numpy; gradients are exact and checked against finite differences in the
tests, and all updates are deterministic for a fixed seed.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ValidationError

LOG_2PI = math.log(2.0 * math.pi)


class Mlp:
    """Plain ReLU MLP. Parameters are [(W, b)] with W of shape (out, in)."""

    def __init__(self, dims, rng: np.random.Generator, final_scale: float = 1.0):
        self.dims = list(dims)
        self.layers: list[tuple[np.ndarray, np.ndarray]] = []
        for i, (n_in, n_out) in enumerate(zip(dims[:-1], dims[1:])):
            last = i == len(dims) - 2
            scale = final_scale / math.sqrt(n_in) if last else math.sqrt(2.0 / n_in)
            w = rng.normal(0.0, 1.0, size=(n_out, n_in)) * scale
            b = np.zeros(n_out)
            self.layers.append((w, b))

    def forward(self, x: np.ndarray):
        """Returns (output (B, out), cache for backward)."""
        acts = [x]
        h = x
        for i, (w, b) in enumerate(self.layers):
            z = h @ w.T + b
            if i < len(self.layers) - 1:
                h = np.maximum(z, 0.0)
            else:
                h = z
            acts.append(h)
        return h, acts

    def backward(self, cache, grad_out: np.ndarray):
        """Gradients of a scalar loss given d(loss)/d(output).

        Returns ([(dW, db)] matching self.layers, d(loss)/d(input)).
        """
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.layers)
        g = grad_out
        for i in range(len(self.layers) - 1, -1, -1):
            w, _ = self.layers[i]
            h_in = cache[i]
            if i < len(self.layers) - 1:
                # cache[i+1] holds the post-ReLU activation
                g = g * (cache[i + 1] > 0.0)
            grads[i] = (g.T @ h_in, g.sum(axis=0))
            g = g @ w
        return grads, g


class PolicyNet:
    """Gaussian policy (mean MLP + global log-std) and a separate value head."""

    def __init__(
        self,
        obs_dim: int = 26,
        act_dim: int = 8,
        hidden: int = 200,
        rng: np.random.Generator | None = None,
        log_std_init: float = -0.5,
    ):
        rng = np.random.default_rng(rng)
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        # a small final policy layer keeps early actions near zero
        self.policy = Mlp([obs_dim, hidden, hidden, act_dim], rng, final_scale=0.01)
        self.value = Mlp([obs_dim, hidden, hidden, 1], rng, final_scale=1.0)
        self.log_std = np.full(act_dim, float(log_std_init))

    def forward(self, obs: np.ndarray):
        """Batched forward: (B, obs_dim) -> mean (B, act_dim), value (B,)."""
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        if obs.shape[1] != self.obs_dim:
            raise ValidationError(f"observation dimension {obs.shape[1]} != expected {self.obs_dim}")
        mean, _ = self.policy.forward(obs)
        value, _ = self.value.forward(obs)
        return mean, value[:, 0]

    def parameters(self) -> list[np.ndarray]:
        """Flat list of parameter arrays (policy, value, log_std), fixed order."""
        out = []
        for w, b in self.policy.layers:
            out.extend((w, b))
        for w, b in self.value.layers:
            out.extend((w, b))
        out.append(self.log_std)
        return out

    def set_parameters(self, arrays) -> None:
        current = self.parameters()
        if len(arrays) != len(current):
            raise ValidationError(f"expected {len(current)} parameter arrays, got {len(arrays)}")
        idx = 0
        new_policy = []
        for w, b in self.policy.layers:
            new_policy.append((arrays[idx].reshape(w.shape).copy(), arrays[idx + 1].reshape(b.shape).copy()))
            idx += 2
        self.policy.layers = new_policy
        new_value = []
        for w, b in self.value.layers:
            new_value.append((arrays[idx].reshape(w.shape).copy(), arrays[idx + 1].reshape(b.shape).copy()))
            idx += 2
        self.value.layers = new_value
        self.log_std = arrays[idx].reshape(self.log_std.shape).copy()

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, flat: np.ndarray) -> None:
        arrays = []
        offset = 0
        for p in self.parameters():
            arrays.append(flat[offset : offset + p.size].reshape(p.shape))
            offset += p.size
        self.set_parameters(arrays)

    def copy_parameters(self) -> list[np.ndarray]:
        return [p.copy() for p in self.parameters()]


def policy_forward(net: PolicyNet, obs) -> tuple[np.ndarray, float]:
    """Single-observation forward pass: (action mean, state value)."""
    obs = np.asarray(obs, dtype=float)
    if obs.ndim != 1:
        raise ValidationError(f"policy_forward expects a single observation, got shape {obs.shape}")
    mean, value = net.forward(obs[None, :])
    return mean[0], float(value[0])


def gaussian_log_prob(mean: np.ndarray, log_std: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Log density of a diagonal Gaussian, summed over action dimensions."""
    z = (actions - mean) / np.exp(log_std)
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(log_std) - 0.5 * LOG_2PI * mean.shape[-1]


def sample_action(mean, log_std, rng: np.random.Generator, bound: float = 1.5):
    """Draw one Gaussian action; returns (clipped action, raw sample, log_prob).

    The log probability is that of the raw (pre-clip) sample, which is also
    what PPO stores so importance ratios start at exactly 1.
    """
    mean = np.asarray(mean, dtype=float)
    log_std = np.asarray(log_std, dtype=float)
    raw = mean + np.exp(log_std) * rng.standard_normal(mean.shape)
    logp = float(gaussian_log_prob(mean, log_std, raw))
    return np.clip(raw, -bound, bound), raw, logp


class Adam:
    """Adaptive-moment gradient descent over a list of parameter arrays."""

    def __init__(self, lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        correct1 = 1.0 - self.beta1**self.t
        correct2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / correct1) / (np.sqrt(v / correct2) + self.eps)


def clip_grad_norm(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most max_norm."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total
