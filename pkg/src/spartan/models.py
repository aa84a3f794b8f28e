"""Desk-scale models with hand-written backward passes.

Parameters live in one flat float64 vector described by a ``ParamLayout``;
weight matrices are stored (out_features, in_features) under PyTorch-style
names (``fc.weight``, ``fc1.bias``, ...), so pruning group specs can refer
to tensors by name.

Losses are averaged over the mini-batch. Sample reductions are plain matrix
products over the batch axis in a fixed order, so results are deterministic
for a given BLAS build.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .masking import LayerSpec, ParamLayout

__all__ = ["ARCHITECTURES", "LOSSES", "ModelSpec", "Model", "build_model"]

ARCHITECTURES = ("linear_regression", "logistic_regression", "mlp_1hidden")
LOSSES = ("mse", "cross_entropy")

_DEFAULT_LOSS = {
    "linear_regression": "mse",
    "logistic_regression": "cross_entropy",
    "mlp_1hidden": "cross_entropy",
}


@dataclass(frozen=True)
class ModelSpec:
    architecture: str
    input_dim: int
    output_dim: int = 1
    hidden_dim: int = 32
    loss: Optional[str] = None

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}")
        if self.input_dim < 1 or self.output_dim < 1 or self.hidden_dim < 1:
            raise ValueError("model dimensions must be positive")
        if self.loss is not None and self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.architecture == "logistic_regression" and self.resolved_loss != "cross_entropy":
            raise ValueError("logistic_regression uses the cross_entropy loss")
        if self.resolved_loss == "cross_entropy" and self.output_dim < 2:
            raise ValueError("cross_entropy needs output_dim >= 2 (one logit per class)")

    @property
    def resolved_loss(self) -> str:
        return self.loss or _DEFAULT_LOSS[self.architecture]

    @property
    def layer_names(self) -> list[str]:
        return ["fc1", "fc2"] if self.architecture == "mlp_1hidden" else ["fc"]

    def layers(self) -> list[LayerSpec]:
        if self.architecture == "mlp_1hidden":
            return [
                LayerSpec("fc1", self.input_dim, self.hidden_dim),
                LayerSpec("fc2", self.hidden_dim, self.output_dim),
            ]
        return [LayerSpec("fc", self.input_dim, self.output_dim)]

    def layout(self) -> ParamLayout:
        entries = []
        for layer in self.layers():
            entries.append((f"{layer.name}.weight", (layer.out_dim, layer.in_dim)))
            entries.append((f"{layer.name}.bias", (layer.out_dim,)))
        return ParamLayout(entries)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class Model:
    """Loss, gradient and evaluation for one ``ModelSpec``."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.layout = spec.layout()

    @property
    def size(self) -> int:
        return self.layout.size

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        """Weights ~ N(0, 1/fan_in), biases zero."""
        parts = {}
        for layer in self.spec.layers():
            std = 1.0 / np.sqrt(layer.in_dim)
            parts[f"{layer.name}.weight"] = rng.standard_normal((layer.out_dim, layer.in_dim)) * std
            parts[f"{layer.name}.bias"] = np.zeros(layer.out_dim)
        return self.layout.pack(parts)

    def _forward(self, theta: np.ndarray, X: np.ndarray):
        p = self.layout.unpack(theta)
        if self.spec.architecture == "mlp_1hidden":
            h = np.tanh(X @ p["fc1.weight"].T + p["fc1.bias"])
            return h @ p["fc2.weight"].T + p["fc2.bias"], (p, h)
        return X @ p["fc.weight"].T + p["fc.bias"], (p, None)

    def predict(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        return self._forward(theta, np.asarray(X, dtype=np.float64))[0]

    def _targets(self, y: np.ndarray, n_out: int) -> np.ndarray:
        if self.spec.resolved_loss == "cross_entropy":
            return np.asarray(y, dtype=np.int64).reshape(-1)
        y = np.asarray(y, dtype=np.float64)
        return y.reshape(-1, n_out)

    def loss(self, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
        return self.loss_and_grad(theta, X, y, need_grad=False)[0]

    def loss_and_grad(
        self, theta: np.ndarray, X: np.ndarray, y: np.ndarray, need_grad: bool = True
    ) -> tuple[float, Optional[np.ndarray]]:
        """Mean loss over the batch and its gradient w.r.t. the flat parameters.

        mse: 0.5 * mean_i ||f(x_i) - y_i||^2.  cross_entropy: mean_i -log softmax(f(x_i))[y_i].
        """
        X = np.asarray(X, dtype=np.float64)
        with np.errstate(over="ignore", invalid="ignore"):
            return self._loss_and_grad(theta, X, y, need_grad)

    def _loss_and_grad(self, theta, X, y, need_grad):
        n = X.shape[0]
        out, (p, h) = self._forward(theta, X)
        t = self._targets(y, out.shape[1])
        if self.spec.resolved_loss == "mse":
            r = out - t
            loss = 0.5 * float(np.sum(r * r)) / n
            d_out = r / n
        else:
            shifted = out - out.max(axis=1, keepdims=True)
            log_z = np.log(np.sum(np.exp(shifted), axis=1))
            loss = float(np.mean(log_z - shifted[np.arange(n), t]))
            d_out = _softmax(out)
            d_out[np.arange(n), t] -= 1.0
            d_out /= n
        if not need_grad:
            return loss, None
        grads = {}
        if self.spec.architecture == "mlp_1hidden":
            grads["fc2.weight"] = d_out.T @ h
            grads["fc2.bias"] = d_out.sum(axis=0)
            d_pre = (d_out @ p["fc2.weight"]) * (1.0 - h * h)
            grads["fc1.weight"] = d_pre.T @ X
            grads["fc1.bias"] = d_pre.sum(axis=0)
        else:
            grads["fc.weight"] = d_out.T @ X
            grads["fc.bias"] = d_out.sum(axis=0)
        return loss, self.layout.pack(grads)

    def eval_metric(self, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
        """MSE (mean over samples and outputs) for regression, accuracy for classification."""
        out = self.predict(theta, X)
        t = self._targets(y, out.shape[1])
        if self.spec.resolved_loss == "mse":
            return float(np.mean((out - t) ** 2))
        return float(np.mean(np.argmax(out, axis=1) == t))

    @property
    def eval_metric_name(self) -> str:
        return "mse" if self.spec.resolved_loss == "mse" else "accuracy"


def build_model(spec: ModelSpec) -> Model:
    return Model(spec)
