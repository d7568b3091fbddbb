"""Split execution engine: run one model as a client half and a server half.

The client owns layers [0, cut) and the server layers [cut, L). A training
step moves one batch through client_forward -> server_step -> client_backward.
Every per-layer float operation is the same code path as the unsplit model
(segment_forward/segment_backward), so training a model split at any cut
produces bit-identical parameters to training it whole.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn


@dataclass(frozen=True)
class CutPoint:
    """Split boundary: the first layer_index layers belong to the client."""
    layer_index: int


@dataclass
class SmashedBatch:
    """Cut-layer activations plus what the client needs for its backward."""
    activations: np.ndarray
    labels: np.ndarray
    client_acts: list[np.ndarray]
    client_aux: dict[int, object]

    @property
    def batch_size(self) -> int:
        return self.activations.shape[0]


@dataclass
class SplitModel:
    """One model held as two flat parameter vectors."""
    spec: nn.ModelSpec
    cut: CutPoint
    client_params: np.ndarray
    server_params: np.ndarray

    @property
    def client_layers(self) -> tuple[nn.Layer, ...]:
        return self.spec.layers[:self.cut.layer_index]

    @property
    def server_layers(self) -> tuple[nn.Layer, ...]:
        return self.spec.layers[self.cut.layer_index:]

    @property
    def cut_shape(self) -> tuple[int, ...]:
        return self.spec.shapes[self.cut.layer_index]


def split_offset(spec: nn.ModelSpec, cut: CutPoint) -> int:
    """Index in the flat parameter vector where the server portion starts."""
    if not 1 <= cut.layer_index <= len(spec.layers) - 1:
        raise ValueError(
            f"cut layer_index {cut.layer_index} outside [1, {len(spec.layers) - 1}]")
    return nn.segment_param_count(spec.layers[:cut.layer_index])


def split_at(spec: nn.ModelSpec, params: np.ndarray, cut: CutPoint) -> SplitModel:
    """Partition a flat parameter vector at the cut. Copies both halves."""
    if params.shape != (nn.param_count(spec),):
        raise nn.ShapeError(
            f"params shape {params.shape} does not match model ({nn.param_count(spec)},)")
    off = split_offset(spec, cut)
    return SplitModel(spec, cut, params[:off].copy(), params[off:].copy())


def full_params(model: SplitModel) -> np.ndarray:
    """Concatenate the halves back into one vector."""
    return np.concatenate([model.client_params, model.server_params])


def client_forward(model: SplitModel, batch: np.ndarray,
                   labels: np.ndarray) -> SmashedBatch:
    """Client half forward; returns the smashed batch sent to the server."""
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != len(model.spec.input_shape) + 1 \
            or tuple(batch.shape[1:]) != model.spec.input_shape:
        raise nn.ShapeError(
            f"batch shape {batch.shape} does not match input shape {model.spec.input_shape}")
    if batch.shape[0] == 0:
        raise nn.ShapeError("empty batch")
    labels = np.asarray(labels)
    if labels.shape != (batch.shape[0],):
        raise nn.ShapeError(
            f"labels shape {labels.shape} does not match batch size {batch.shape[0]}")
    tensors = nn.unflatten_segment(model.client_layers, model.client_params)
    acts, aux = nn.segment_forward(model.client_layers, tensors, batch)
    return SmashedBatch(acts[-1], labels, acts, aux)


def server_step(model: SplitModel, smashed: SmashedBatch, lr: float):
    """Finish the forward, take the loss, update server params.

    Returns (cut_grad, server_params, loss). cut_grad is the loss gradient at
    the cut activations, evaluated at the pre-update server parameters.
    """
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    expect = (smashed.batch_size,) + model.cut_shape
    if tuple(smashed.activations.shape) != expect:
        raise nn.ShapeError(
            f"smashed activations {smashed.activations.shape} do not match cut shape {expect}")
    labels = nn._check_labels(smashed.labels, model.spec.num_classes, smashed.batch_size)
    tensors = nn.unflatten_segment(model.server_layers, model.server_params)
    acts, aux = nn.segment_forward(model.server_layers, tensors, smashed.activations)
    loss, dlogits = nn.softmax_cross_entropy(acts[-1], labels)
    grads, cut_grad = nn.segment_backward(model.server_layers, tensors, acts, aux, dlogits)
    if lr > 0:
        model.server_params = model.server_params - lr * nn.flatten_tensors(grads)
    return cut_grad, model.server_params, loss


def client_backward(model: SplitModel, smashed: SmashedBatch,
                    cut_grad: np.ndarray, lr: float) -> np.ndarray:
    """Backward through the client half using the server's cut gradient."""
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    if cut_grad.shape != smashed.activations.shape:
        raise nn.ShapeError(
            f"cut gradient shape {cut_grad.shape} does not match "
            f"activations {smashed.activations.shape}")
    tensors = nn.unflatten_segment(model.client_layers, model.client_params)
    grads, _ = nn.segment_backward(model.client_layers, tensors,
                                   smashed.client_acts, smashed.client_aux, cut_grad)
    if lr > 0:
        model.client_params = model.client_params - lr * nn.flatten_tensors(grads)
    return model.client_params


def split_train_step(model: SplitModel, batch: np.ndarray, labels: np.ndarray,
                     lr: float) -> float:
    """One full split training step on one batch. Returns the loss."""
    smashed = client_forward(model, batch, labels)
    cut_grad, _, loss = server_step(model, smashed, lr)
    client_backward(model, smashed, cut_grad, lr)
    return loss
