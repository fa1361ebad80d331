"""Parameters, forward pass and manual backward pass of the block-wise 1D-CNN.

Activations are laid out ``(batch, length, channels)``; conv kernels are
``(kernel, in_channels, out_channels)``; flattening is length-major.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arch import CnnArch, param_shapes, same_padding, shape_trace

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


@dataclass
class CnnModel:
    arch: CnnArch
    params: dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        expected = param_shapes(self.arch)
        if list(self.params) != [n for n, _ in expected]:
            raise ValueError("parameter names do not match the architecture")
        for name, shape in expected:
            if self.params[name].shape != shape:
                raise ValueError(f"{name}: shape {self.params[name].shape}, expected {shape}")

    @property
    def n_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def copy(self, dtype=None) -> "CnnModel":
        return CnnModel(self.arch, {k: np.array(v, dtype=dtype or v.dtype) for k, v in self.params.items()})

    def predict_proba(self, X) -> np.ndarray:
        return forward(self, X, "infer")

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params.values()]).astype(np.float32)

    @classmethod
    def from_flat(cls, arch: CnnArch, flat: np.ndarray) -> "CnnModel":
        params, pos = {}, 0
        for name, shape in param_shapes(arch):
            n = int(np.prod(shape))
            if pos + n > flat.size:
                raise ValueError("flat parameter vector too short for architecture")
            params[name] = np.array(flat[pos : pos + n], dtype=np.float32).reshape(shape)
            pos += n
        if pos != flat.size:
            raise ValueError("flat parameter vector too long for architecture")
        return cls(arch, params)


def init_model(arch: CnnArch, seed: int = 0) -> CnnModel:
    """He-uniform conv and dense weights, zero biases, identity batch-norm."""
    shape_trace(arch)
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(arch):
        if name.endswith(".w"):
            fan_in = int(np.prod(shape[:-1]))
            limit = np.sqrt(6.0 / fan_in)
            params[name] = rng.uniform(-limit, limit, size=shape).astype(np.float32)
        elif name.endswith((".gamma", ".var")):
            params[name] = np.ones(shape, dtype=np.float32)
        else:
            params[name] = np.zeros(shape, dtype=np.float32)
    return CnnModel(arch, params)


def _conv_index(length_out, kernel, stride):
    return (np.arange(length_out) * stride)[:, None] + np.arange(kernel)[None, :]


def _conv_forward(x, w, b, stride, padding):
    n, length, c_in = x.shape
    k = w.shape[0]
    if padding == "same":
        lpad, rpad = same_padding(length, k, stride)
        x = np.pad(x, ((0, 0), (lpad, rpad), (0, 0)))
    else:
        lpad = 0
    l_out = (x.shape[1] - k) // stride + 1
    idx = _conv_index(l_out, k, stride)
    cols = x[:, idx, :].reshape(n * l_out, k * c_in)
    y = cols @ w.reshape(k * c_in, -1) + b
    return y.reshape(n, l_out, -1), (cols, idx, x.shape, lpad, length)


def _conv_backward(dy, w, cache):
    cols, idx, padded_shape, lpad, length = cache
    n, l_out, c_out = dy.shape
    k, c_in, _ = w.shape
    dy2 = dy.reshape(n * l_out, c_out)
    dw = (cols.T @ dy2).reshape(w.shape)
    db = dy2.sum(axis=0)
    dcols = (dy2 @ w.reshape(k * c_in, c_out).T).reshape(n, l_out, k, c_in)
    dxp = np.zeros(padded_shape, dtype=dy.dtype)
    for j in range(k):
        # positions idx[:, j] are distinct for a fixed tap, so += does not drop updates
        dxp[:, idx[:, j], :] += dcols[:, :, j, :]
    return dxp[:, lpad : lpad + length, :], dw, db


def _pool_forward(x, kind, size):
    n, length, c = x.shape
    l_out = length // size
    win = x[:, : l_out * size, :].reshape(n, l_out, size, c)
    if kind == "max":
        arg = win.argmax(axis=2)
        y = np.take_along_axis(win, arg[:, :, None, :], axis=2)[:, :, 0, :]
        return y, (kind, size, length, arg)
    return win.mean(axis=2), (kind, size, length, None)


def _pool_backward(dy, cache):
    kind, size, length, arg = cache
    n, l_out, c = dy.shape
    if kind == "max":
        dwin = np.zeros((n, l_out, size, c), dtype=dy.dtype)
        np.put_along_axis(dwin, arg[:, :, None, :], dy[:, :, None, :], axis=2)
    else:
        dwin = np.repeat(dy[:, :, None, :] / size, size, axis=2)
    dx = np.zeros((n, length, c), dtype=dy.dtype)
    dx[:, : l_out * size, :] = dwin.reshape(n, l_out * size, c)
    return dx


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _as_input(model, X):
    X = np.asarray(X)
    if X.ndim == 3:
        X = X[:, :, 0]
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != model.arch.input_len:
        raise ValueError(f"batch width {X.shape[1]} != input_len {model.arch.input_len}")
    dtype = model.params["dense.w"].dtype
    return X.astype(dtype, copy=False)[:, :, None]


def forward_logits(model: CnnModel, X, *, train=False, rng=None, dropout=True,
                   update_stats=False):
    """Logits and the cache needed by :func:`backward`.

    In train mode batch-norm uses batch statistics (and optionally updates
    the running averages in place) and dropout is applied when ``dropout``.
    """
    p = model.params
    h = _as_input(model, X)
    caches = []
    for i, blk in enumerate(model.arch.blocks):
        h, conv_cache = _conv_forward(h, p[f"conv{i}.w"], p[f"conv{i}.b"], blk.stride, blk.padding)
        gamma, beta = p[f"bn{i}.gamma"], p[f"bn{i}.beta"]
        if train:
            mu = h.mean(axis=(0, 1))
            var = h.var(axis=(0, 1))
            if update_stats:
                m = p[f"bn{i}.mean"]
                v = p[f"bn{i}.var"]
                m *= BN_MOMENTUM
                m += (1 - BN_MOMENTUM) * mu.astype(m.dtype)
                v *= BN_MOMENTUM
                v += (1 - BN_MOMENTUM) * var.astype(v.dtype)
        else:
            mu, var = p[f"bn{i}.mean"], p[f"bn{i}.var"]
        inv = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (h - mu) * inv
        h = gamma * xhat + beta
        relu_mask = h > 0
        h = h * relu_mask
        pool_cache = None
        if blk.pool is not None:
            h, pool_cache = _pool_forward(h, blk.pool, blk.pool_size)
        drop_mask = None
        if train and dropout and blk.dropout > 0:
            keep = 1.0 - blk.dropout
            drop_mask = (rng.random(h.shape) < keep).astype(h.dtype) / keep
            h = h * drop_mask
        caches.append((conv_cache, xhat, inv, relu_mask, pool_cache, drop_mask))
    flat = h.reshape(h.shape[0], -1)
    logits = flat @ p["dense.w"] + p["dense.b"]
    return logits, (caches, flat, h.shape, train)


def forward(model: CnnModel, X, mode: str = "infer", rng=None) -> np.ndarray:
    """Class probabilities; ``mode`` is ``"infer"`` or ``"train"``."""
    if mode not in ("infer", "train"):
        raise ValueError(f"mode must be 'infer' or 'train', got {mode!r}")
    train = mode == "train"
    if train and rng is None:
        rng = np.random.default_rng()
    logits, _ = forward_logits(model, X, train=train, rng=rng)
    return _softmax(logits.astype(np.float64))


def activation_pattern(model: CnnModel, X) -> bytes:
    """Fingerprint of ReLU on/off states and max-pool winners in train mode (no dropout)."""
    _, (caches, *_rest) = forward_logits(model, X, train=True, dropout=False)
    parts = []
    for _, _, _, relu_mask, pool_cache, _ in caches:
        parts.append(np.packbits(relu_mask).tobytes())
        if pool_cache is not None and pool_cache[3] is not None:
            parts.append(pool_cache[3].astype(np.int8).tobytes())
    return b"".join(parts)


def backward(model: CnnModel, cache, dlogits) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss given its gradient w.r.t. the logits.

    Batch-norm is differentiated through the batch statistics (train-mode
    cache). Running-average entries get zero gradient.
    """
    p = model.params
    caches, flat, pre_flat_shape, train = cache
    grads = {name: np.zeros_like(v) for name, v in p.items()}
    grads["dense.w"] = flat.T @ dlogits
    grads["dense.b"] = dlogits.sum(axis=0)
    dh = (dlogits @ p["dense.w"].T).reshape(pre_flat_shape)
    for i in reversed(range(len(model.arch.blocks))):
        conv_cache, xhat, inv, relu_mask, pool_cache, drop_mask = caches[i]
        if drop_mask is not None:
            dh = dh * drop_mask
        if pool_cache is not None:
            dh = _pool_backward(dh, pool_cache)
        dh = dh * relu_mask
        gamma = p[f"bn{i}.gamma"]
        grads[f"bn{i}.gamma"] = (dh * xhat).sum(axis=(0, 1))
        grads[f"bn{i}.beta"] = dh.sum(axis=(0, 1))
        dxhat = dh * gamma
        if train:
            m = dxhat.shape[0] * dxhat.shape[1]
            dh = (inv / m) * (m * dxhat - dxhat.sum(axis=(0, 1)) - xhat * (dxhat * xhat).sum(axis=(0, 1)))
        else:
            dh = dxhat * inv
        dh, dw, db = _conv_backward(dh, p[f"conv{i}.w"], conv_cache)
        grads[f"conv{i}.w"] = dw
        grads[f"conv{i}.b"] = db
    return grads


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    eps = np.finfo(np.float64).tiny
    return float(-np.log(np.maximum(probs[np.arange(labels.size), labels], eps)).mean())


def loss_and_grads(model: CnnModel, X, labels, rng=None, dropout=True, update_stats=False):
    """Mean categorical cross-entropy over the batch and its parameter gradients."""
    logits, cache = forward_logits(model, X, train=True, rng=rng, dropout=dropout,
                                   update_stats=update_stats)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = labels.size
    loss = float(-logp[np.arange(n), labels].mean())
    d = np.exp(logp)
    d[np.arange(n), labels] -= 1.0
    d /= n
    return loss, backward(model, cache, d.astype(logits.dtype))


TRAINABLE_SUFFIXES = (".w", ".b", ".gamma", ".beta")


def trainable(name: str) -> bool:
    return name.endswith(TRAINABLE_SUFFIXES)
