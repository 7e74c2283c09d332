"""Versioned binary policy checkpoints.

Layout (little-endian):

    bytes 0..3   magic b"SGL1"
    uint32       number of policy layer dims, then that many uint32 dims
    uint32       number of value layer dims, then that many uint32 dims
    float64[]    policy layers in order: W (row-major, out x in), b
    float64[]    value layers likewise
    float64[]    log_std (act_dim)
    float64[]    observation mean (obs_dim)
    float64[]    observation variance (obs_dim)
    float64      observation count

The normalization statistics are the frozen running stats used to
standardize observations at evaluation time.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from .env import RunningNorm
from .nets import Mlp, PolicyNet

MAGIC = b"SGL1"


def save_checkpoint(path, net: PolicyNet, obs_norm: RunningNorm) -> None:
    policy_dims = net.policy.dims
    value_dims = net.value.dims
    parts = [MAGIC]
    parts.append(struct.pack("<I", len(policy_dims)))
    parts.append(struct.pack(f"<{len(policy_dims)}I", *policy_dims))
    parts.append(struct.pack("<I", len(value_dims)))
    parts.append(struct.pack(f"<{len(value_dims)}I", *value_dims))
    for w, b in net.policy.layers + net.value.layers:
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(net.log_std, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(obs_norm.mean, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(obs_norm.var, dtype="<f8").tobytes())
    parts.append(struct.pack("<d", float(obs_norm.count)))
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.offset = 0
        self.source = source

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise ValidationError(f"{self.source}: truncated checkpoint")
        out = self.data[self.offset : self.offset + n]
        self.offset += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(float)


def load_checkpoint(path) -> tuple[PolicyNet, RunningNorm]:
    data = Path(path).read_bytes()
    r = _Reader(data, str(path))
    if r.take(4) != MAGIC:
        raise ValidationError(f"{path}: not a policy checkpoint (bad magic)")
    policy_dims = [r.u32() for _ in range(r.u32())]
    value_dims = [r.u32() for _ in range(r.u32())]
    if len(policy_dims) < 2 or len(value_dims) < 2 or policy_dims[0] != value_dims[0]:
        raise ValidationError(f"{path}: inconsistent layer dims {policy_dims} / {value_dims}")

    obs_dim = policy_dims[0]
    act_dim = policy_dims[-1]
    net = PolicyNet.__new__(PolicyNet)
    net.obs_dim = obs_dim
    net.act_dim = act_dim
    net.policy = _read_mlp(r, policy_dims)
    net.value = _read_mlp(r, value_dims)
    net.log_std = r.f64_array(act_dim)

    norm = RunningNorm(obs_dim)
    norm.mean = r.f64_array(obs_dim)
    norm.var = r.f64_array(obs_dim)
    norm.count = struct.unpack("<d", r.take(8))[0]
    if r.offset != len(data):
        raise ValidationError(f"{path}: {len(data) - r.offset} trailing bytes")
    return net, norm


def _read_mlp(r: _Reader, dims) -> Mlp:
    mlp = Mlp.__new__(Mlp)
    mlp.dims = list(dims)
    mlp.layers = []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        w = r.f64_array(n_out * n_in).reshape(n_out, n_in)
        b = r.f64_array(n_out)
        mlp.layers.append((w, b))
    return mlp
