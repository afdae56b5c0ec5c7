"""Feed-forward network trained with mini-batch Adam and early stopping.

One network with H output units covers the whole forecast horizon. All math is
double precision numpy; parameters live in a flat list of (W, b) pairs.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

import numpy as np


class DivergedError(RuntimeError):
    """Training produced a non-finite loss or parameter."""


def init_params(
    n_in: int, hidden_layers: int, hidden_size: int, n_out: int, rng: np.random.Generator
) -> List[Tuple[np.ndarray, np.ndarray]]:
    sizes = [n_in] + [hidden_size] * hidden_layers + [n_out]
    params = []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        scale = np.sqrt(2.0 / fan_in)
        params.append((rng.normal(0.0, scale, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return params


def forward(
    params: List[Tuple[np.ndarray, np.ndarray]],
    X: np.ndarray,
    dropout: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, List[dict]]:
    """Forward pass; returns output and per-layer caches for backprop.

    Dropout uses inverted scaling on hidden activations and only fires when an
    rng is supplied (training mode).
    """
    a = X
    caches: List[dict] = []
    last = len(params) - 1
    for li, (W, b) in enumerate(params):
        z = a @ W + b
        cache = {"a_in": a, "z": z}
        if li < last:
            h = np.maximum(z, 0.0)
            if dropout > 0.0 and rng is not None:
                keep = rng.random(h.shape) >= dropout
                h = h * keep / (1.0 - dropout)
                cache["drop_scale"] = keep / (1.0 - dropout)
            a = h
        else:
            a = z
        caches.append(cache)
    return a, caches


def loss_and_grads(
    params: List[Tuple[np.ndarray, np.ndarray]],
    X: np.ndarray,
    Y: np.ndarray,
    dropout: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, List[Tuple[np.ndarray, np.ndarray]]]:
    """Mean squared error over the batch and analytic gradients."""
    out, caches = forward(params, X, dropout, rng)
    diff = out - Y
    n = X.shape[0] * Y.shape[1]
    loss = float(np.sum(diff * diff) / n)

    grads: List[Tuple[np.ndarray, np.ndarray]] = [None] * len(params)  # type: ignore[list-item]
    delta = 2.0 * diff / n
    for li in range(len(params) - 1, -1, -1):
        W, _ = params[li]
        cache = caches[li]
        gW = cache["a_in"].T @ delta
        gb = delta.sum(axis=0)
        grads[li] = (gW, gb)
        if li > 0:
            delta = delta @ W.T
            if "drop_scale" in caches[li - 1]:
                delta = delta * caches[li - 1]["drop_scale"]
            delta = delta * (caches[li - 1]["z"] > 0.0)
    return loss, grads


def mse(params: List[Tuple[np.ndarray, np.ndarray]], X: np.ndarray, Y: np.ndarray) -> float:
    out, _ = forward(params, X)
    return float(np.mean((out - Y) ** 2))


def train_mlp(
    X_train: np.ndarray,
    Y_train: np.ndarray,
    X_val: np.ndarray,
    Y_val: np.ndarray,
    hidden_layers: int,
    hidden_size: int,
    learning_rate: float,
    dropout: float,
    seed: int,
    epochs: int = 200,
    batch_size: int = 64,
    patience: int = 20,
) -> Dict:
    """Adam training with early stopping on validation loss. Returns the best
    parameters (by val loss) plus both loss curves."""
    rng = np.random.default_rng(seed)
    params = init_params(X_train.shape[1], hidden_layers, hidden_size, Y_train.shape[1], rng)

    m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    n = X_train.shape[0]
    best_val = np.inf
    best_params = [(W.copy(), b.copy()) for W, b in params]
    best_epoch = 0
    train_curve: List[float] = []
    val_curve: List[float] = []
    stopped_at: Optional[int] = None

    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            loss, grads = loss_and_grads(params, X_train[idx], Y_train[idx], dropout, rng)
            if not np.isfinite(loss):
                raise DivergedError(f"non-finite training loss at epoch {epoch}")
            step += 1
            new_params = []
            for (W, b), (gW, gb), (mW, mb), (vW, vb) in zip(params, grads, m, v):
                mW[:] = beta1 * mW + (1 - beta1) * gW
                mb[:] = beta1 * mb + (1 - beta1) * gb
                vW[:] = beta2 * vW + (1 - beta2) * gW * gW
                vb[:] = beta2 * vb + (1 - beta2) * gb * gb
                bias1 = 1 - beta1**step
                bias2 = 1 - beta2**step
                W = W - learning_rate * (mW / bias1) / (np.sqrt(vW / bias2) + eps)
                b = b - learning_rate * (mb / bias1) / (np.sqrt(vb / bias2) + eps)
                new_params.append((W, b))
            params = new_params
            if any(not np.isfinite(W).all() or not np.isfinite(b).all() for W, b in params):
                raise DivergedError(f"non-finite parameters at epoch {epoch}")

        train_curve.append(mse(params, X_train, Y_train))
        val_loss = mse(params, X_val, Y_val)
        val_curve.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_params = [(W.copy(), b.copy()) for W, b in params]
            best_epoch = epoch
        elif epoch - best_epoch >= patience:
            stopped_at = epoch
            break

    return {
        "params": best_params,
        "train_curve": train_curve,
        "val_curve": val_curve,
        "early_stop_epoch": stopped_at,
    }


def gradient_check(
    params: List[Tuple[np.ndarray, np.ndarray]],
    X: np.ndarray,
    Y: np.ndarray,
    h: float = 1e-5,
    max_entries_per_array: int = 20,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central finite-difference
    gradients over a sampled parameter subset. Dropout stays off."""
    _, grads = loss_and_grads(params, X, Y)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for li, (W, b) in enumerate(params):
        for arr, grad in ((W, grads[li][0]), (b, grads[li][1])):
            flat = arr.reshape(-1)
            gflat = grad.reshape(-1)
            k = min(max_entries_per_array, flat.size)
            for j in rng.choice(flat.size, size=k, replace=False):
                orig = flat[j]
                flat[j] = orig + h
                up, _ = loss_and_grads(params, X, Y)
                flat[j] = orig - h
                down, _ = loss_and_grads(params, X, Y)
                flat[j] = orig
                fd = (up - down) / (2 * h)
                denom = max(abs(fd) + abs(gflat[j]), 1e-8)
                worst = max(worst, abs(fd - gflat[j]) / denom)
    return worst


def predict_mlp(params: List[Tuple[np.ndarray, np.ndarray]], X: np.ndarray) -> np.ndarray:
    out, _ = forward(params, X)
    return out
