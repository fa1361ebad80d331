from __future__ import annotations

import numpy as np

from .arch import CnnArch
from .model import activation_pattern, init_model, loss_and_grads, trainable


def _loss(model, X, y):
    loss, _ = loss_and_grads(model, X, y, dropout=False)
    return loss


def gradient_check(arch: CnnArch, seed: int = 0, eps: float = 1e-3, n_rows: int = 8) -> float:
    """Largest relative error between backprop and central differences.

    The numeric side is the fourth-order central stencil
    ``(-f(+2h) + 8 f(+h) - 8 f(-h) + f(-2h)) / 12h`` with ``h = eps``.
    Runs in float64 with dropout off and batch-norm on batch statistics.
    Batch-norm parameters are perturbed away from their identity init so
    their gradients are exercised. When a perturbation flips a ReLU or a
    max-pool winner the difference quotient straddles a kink; that entry
    is re-measured with a step ten times smaller, down to ``eps * 1e-4``.
    """
    if n_rows > 8:
        raise ValueError("gradient_check uses at most 8 rows")
    rng = np.random.default_rng(seed)
    model = init_model(arch, seed).copy(dtype=np.float64)
    for name, v in model.params.items():
        if name.endswith((".gamma", ".beta", ".b")):
            v += rng.uniform(-0.5, 0.5, size=v.shape)
    X = rng.normal(size=(n_rows, arch.input_len))
    y = rng.integers(0, arch.n_classes, size=n_rows)
    _, grads = loss_and_grads(model, X, y, dropout=False)
    base_pattern = activation_pattern(model, X)

    worst = 0.0
    for name, param in model.params.items():
        if not trainable(name):
            continue
        flat = param.reshape(-1)
        gflat = grads[name].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            step = eps
            while True:
                losses, same = [], True
                for k in (2, 1, -1, -2):
                    flat[j] = orig + k * step
                    losses.append(_loss(model, X, y))
                    same = same and activation_pattern(model, X) == base_pattern
                flat[j] = orig
                if same or step < eps * 1e-4:
                    break
                step /= 10.0
            f2, f1, b1, b2 = losses
            numeric = (-f2 + 8.0 * f1 - 8.0 * b1 + b2) / (12.0 * step)
            analytic = gflat[j]
            denom = max(abs(numeric), abs(analytic), 1e-8)
            worst = max(worst, abs(numeric - analytic) / denom)
    return worst
