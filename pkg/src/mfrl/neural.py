"""Small fully connected networks with hand-written backpropagation.

Networks are plain values: a list of weight matrices (``fan_in x fan_out``),
a list of bias vectors and the activation settings.  All functions return
new objects and never modify their arguments.  Inputs may be a single vector
or a batch of row vectors.

Checkpoint format (little-endian)::

    b"MLP1"
    uint32  n_layers, hidden activation code, output activation code
    float64 output scale, output offset
    uint32  layer sizes (n_layers + 1 values, input first)
    float64 for each layer: weights row-major (fan_in x fan_out), then biases

Activation codes: 0 identity, 1 tanh.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, NonFiniteGradient, ShapeMismatch

ACTIVATIONS = ("identity", "tanh")
_MAGIC = b"MLP1"


@dataclass(frozen=True, eq=False)
class MLPParams:
    weights: tuple
    biases: tuple
    hidden: str = "tanh"
    output: str = "identity"
    out_scale: float = 1.0
    out_offset: float = 0.0

    @property
    def sizes(self) -> tuple:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def arrays(self) -> list:
        return [*self.weights, *self.biases]

    def with_arrays(self, arrays) -> "MLPParams":
        n = len(self.weights)
        return replace(self, weights=tuple(arrays[:n]), biases=tuple(arrays[n:]))

    def copy(self) -> "MLPParams":
        return self.with_arrays([a.copy() for a in self.arrays()])


def init_mlp(
    sizes,
    rng: np.random.Generator,
    *,
    hidden: str = "tanh",
    output: str = "identity",
    out_scale: float = 1.0,
    out_offset: float = 0.0,
) -> MLPParams:
    """Weights and biases uniform in ``+-1/sqrt(fan_in)``."""
    if len(sizes) < 2:
        raise ValueError("need at least input and output sizes")
    if hidden not in ACTIVATIONS or output not in ACTIVATIONS:
        raise ValueError(f"activations must be in {ACTIVATIONS}")
    ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        ws.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        bs.append(rng.uniform(-bound, bound, size=fan_out))
    return MLPParams(tuple(ws), tuple(bs), hidden, output, float(out_scale), float(out_offset))


def _forward(params: MLPParams, x: np.ndarray):
    acts = [x]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        if i < last:
            h = np.tanh(z) if params.hidden == "tanh" else z
        else:
            h = np.tanh(z) if params.output == "tanh" else z
        acts.append(h)
    out = acts[-1]
    if params.output == "tanh":
        out = params.out_offset + params.out_scale * out
    return out, acts


def _as_batch(params: MLPParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.ndim != 2 or x2.shape[1] != params.weights[0].shape[0]:
        raise DimensionMismatch(f"network expects inputs of size {params.weights[0].shape[0]}, got shape {x.shape}")
    return x2, single


def mlp_forward(params: MLPParams, x) -> np.ndarray:
    x2, single = _as_batch(params, x)
    out, _ = _forward(params, x2)
    return out[0] if single else out


def mlp_backward(params: MLPParams, x, upstream) -> tuple[MLPParams, np.ndarray]:
    """Reverse-mode gradients of ``sum(upstream * mlp_forward(params, x))``.

    Returns the parameter gradients (packed as an :class:`MLPParams`) and the
    gradient with respect to the input, shaped like ``x``.  For a batch the
    parameter gradients are summed over rows.
    """
    x2, single = _as_batch(params, x)
    g = np.asarray(upstream, dtype=float)
    g = g[None, :] if g.ndim == 1 else g
    if g.shape != (x2.shape[0], params.weights[-1].shape[1]):
        raise DimensionMismatch(f"upstream gradient shape {np.shape(upstream)} does not match the output")
    _, acts = _forward(params, x2)
    n = len(params.weights)
    dws, dbs = [None] * n, [None] * n
    if params.output == "tanh":
        dz = g * params.out_scale * (1.0 - acts[-1] ** 2)
    else:
        dz = g
    for i in range(n - 1, -1, -1):
        dws[i] = acts[i].T @ dz
        dbs[i] = dz.sum(axis=0)
        dh = dz @ params.weights[i].T
        if i > 0:
            dz = dh * (1.0 - acts[i] ** 2) if params.hidden == "tanh" else dh
    grads = replace(params, weights=tuple(dws), biases=tuple(dbs))
    return grads, (dh[0] if single else dh)


def flatten(params: MLPParams) -> np.ndarray:
    """All parameters as one vector (weights first, then biases)."""
    return np.concatenate([a.ravel() for a in params.arrays()])


def unflatten(like: MLPParams, flat: np.ndarray) -> MLPParams:
    """Inverse of :func:`flatten` for a network shaped like ``like``."""
    arrays, pos = [], 0
    for a in like.arrays():
        arrays.append(flat[pos : pos + a.size].reshape(a.shape))
        pos += a.size
    if pos != flat.size:
        raise ShapeMismatch(f"flat vector has {flat.size} entries, network needs {pos}")
    return like.with_arrays(arrays)


def _same_shapes(a: MLPParams, b: MLPParams) -> bool:
    xs, ys = a.arrays(), b.arrays()
    return len(xs) == len(ys) and all(x.shape == y.shape for x, y in zip(xs, ys))


@dataclass(frozen=True, eq=False)
class AdamState:
    """Moment estimates stored as flat vectors in :func:`flatten` order."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: MLPParams, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    n = sum(a.size for a in params.arrays())
    return AdamState(np.zeros(n), np.zeros(n), 0, lr, beta1, beta2, eps)


def adam_update(params: MLPParams, grads: MLPParams, state: AdamState) -> tuple[MLPParams, AdamState]:
    """One bias-corrected Adam descent step."""
    if not _same_shapes(params, grads) or state.m.size != sum(a.size for a in params.arrays()):
        raise ShapeMismatch("gradient shapes do not match the parameters")
    g = flatten(grads)
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradient("gradient contains NaN or inf")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    m = b1 * state.m + (1.0 - b1) * g
    v = b2 * state.v + (1.0 - b2) * (g * g)
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    p = flatten(params) - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return unflatten(params, p), replace(state, m=m, v=v, step=t)


def soft_update(target: MLPParams, source: MLPParams, tau: float) -> MLPParams:
    """``tau * source + (1 - tau) * target``, parameter by parameter."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if not _same_shapes(target, source):
        raise ShapeMismatch("target and source networks differ in shape")
    return unflatten(target, tau * flatten(source) + (1.0 - tau) * flatten(target))


def save_mlp(path, params: MLPParams) -> None:
    sizes = params.sizes
    codes = (ACTIVATIONS.index(params.hidden), ACTIVATIONS.index(params.output))
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<3I", len(params.weights), *codes))
        fh.write(struct.pack("<2d", params.out_scale, params.out_offset))
        fh.write(struct.pack(f"<{len(sizes)}I", *sizes))
        for w, b in zip(params.weights, params.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_mlp(path) -> MLPParams:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a network checkpoint")
    n_layers, hidden, output = struct.unpack_from("<3I", data, 4)
    scale, offset = struct.unpack_from("<2d", data, 16)
    sizes = struct.unpack_from(f"<{n_layers + 1}I", data, 32)
    pos = 32 + 4 * (n_layers + 1)
    ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = np.frombuffer(data, dtype="<f8", count=fan_in * fan_out, offset=pos).reshape(fan_in, fan_out)
        pos += 8 * fan_in * fan_out
        b = np.frombuffer(data, dtype="<f8", count=fan_out, offset=pos)
        pos += 8 * fan_out
        ws.append(w.astype(float))
        bs.append(b.astype(float))
    return MLPParams(tuple(ws), tuple(bs), ACTIVATIONS[hidden], ACTIVATIONS[output], scale, offset)


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if denom == 0.0 else float(np.linalg.norm(a - b) / denom)


_FD_CHUNK = 512


def _stacked_loss(params: MLPParams, rows: np.ndarray, x, upstream) -> np.ndarray:
    """``sum(upstream * forward)`` for every network whose flat parameters are a row of ``rows``."""
    arrays, pos = [], 0
    for a in params.arrays():
        arrays.append(rows[:, pos : pos + a.size].reshape((len(rows),) + a.shape))
        pos += a.size
    n = len(params.weights)
    h = np.broadcast_to(np.atleast_2d(x), (len(rows),) + np.atleast_2d(x).shape)
    for i in range(n):
        z = np.matmul(h, arrays[i]) + arrays[n + i][:, None, :]
        act = params.hidden if i < n - 1 else params.output
        h = np.tanh(z) if act == "tanh" else z
    if params.output == "tanh":
        h = params.out_offset + params.out_scale * h
    return np.sum(np.atleast_2d(upstream)[None] * h, axis=(1, 2))


def gradient_check(params: MLPParams, x, upstream, step: float = 1e-5) -> float:
    """Largest relative error between :func:`mlp_backward` and central differences.

    The checked scalar is ``sum(upstream * mlp_forward(params, x))``.  The error
    of each parameter array and of the input gradient is
    ``|g - fd| / (|g| + |fd|)`` in the Euclidean norm; the maximum is returned.
    """
    upstream = np.asarray(upstream, dtype=float)
    x = np.asarray(x, dtype=float)

    def loss(p, inp):
        return float(np.sum(upstream * mlp_forward(p, inp)))

    grads, gx = mlp_backward(params, x, upstream)
    flat = flatten(params)
    fd = np.empty_like(flat)
    # perturb one coordinate per row and evaluate the rows as a stack of networks
    for start in range(0, flat.size, _FD_CHUNK):
        idx = np.arange(start, min(start + _FD_CHUNK, flat.size))
        rows = np.repeat(flat[None, :], len(idx), axis=0)
        rows[np.arange(len(idx)), idx] += step
        up = _stacked_loss(params, rows, x, upstream)
        rows[np.arange(len(idx)), idx] -= 2 * step
        down = _stacked_loss(params, rows, x, upstream)
        fd[idx] = (up - down) / (2 * step)
    fd_params = unflatten(params, fd)
    errors = [_relative(g, f) for g, f in zip(grads.arrays(), fd_params.arrays())]
    fdx = np.empty_like(x)
    xf, fdxf = x.reshape(-1).copy(), fdx.reshape(-1)
    for i in range(xf.size):
        old = xf[i]
        xf[i] = old + step
        up = loss(params, xf.reshape(x.shape))
        xf[i] = old - step
        down = loss(params, xf.reshape(x.shape))
        xf[i] = old
        fdxf[i] = (up - down) / (2 * step)
    errors.append(_relative(gx, fdx))
    return max(errors)
