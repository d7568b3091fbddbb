"""Model presets used by the experiment runner and the demos.

Both presets expose three cut presets v1/v2/v3, ordered so that the client
portion grows: v1 leaves almost everything on the server, v3 keeps almost
everything on the client.
"""
from __future__ import annotations

from .nn import Conv2d, Dense, Flatten, MaxPool2d, ModelSpec, ReLU


def mlp_spec(in_dim: int = 8, hidden: tuple[int, ...] = (32, 32, 16),
             num_classes: int = 4) -> ModelSpec:
    """Fully connected net: in_dim -> 32 -> 32 -> 16 -> num_classes.

    Cuts sit after each hidden ReLU: v1 after the first block, v2 after the
    second, v3 after the third.
    """
    layers = []
    cuts = {}
    prev = in_dim
    for i, width in enumerate(hidden):
        layers.append(Dense(prev, width))
        layers.append(ReLU())
        cuts[f"v{i + 1}"] = len(layers)
        prev = width
    layers.append(Dense(prev, num_classes))
    return ModelSpec(tuple(layers), (in_dim,), num_classes, cuts)


def cnn_spec(input_shape: tuple[int, int, int] = (1, 8, 8),
             num_classes: int = 4) -> ModelSpec:
    """Small convnet: two conv/pool blocks, then a dense head.

    v1 cuts after the first conv block, v2 after the second, v3 after the
    penultimate dense layer.
    """
    c, h, w = input_shape
    layers = (
        Conv2d(c, 4, kernel=3, stride=1, padding=1),
        ReLU(),
        MaxPool2d(2),
        Conv2d(4, 8, kernel=3, stride=1, padding=1),
        ReLU(),
        MaxPool2d(2),
        Flatten(),
        Dense(8 * (h // 4) * (w // 4), 16),
        ReLU(),
        Dense(16, num_classes),
    )
    cuts = {"v1": 3, "v2": 6, "v3": 9}
    return ModelSpec(layers, input_shape, num_classes, cuts)


def build_model(name: str, in_dim: int, num_classes: int) -> ModelSpec:
    """Resolve a preset name; for the cnn, in_dim must be a square image size."""
    if name == "mlp":
        return mlp_spec(in_dim=in_dim, num_classes=num_classes)
    if name == "cnn":
        side = round(in_dim ** 0.5)
        if side * side != in_dim or side % 4:
            raise ValueError(
                f"cnn needs a square input dimension divisible into (1, s, s) "
                f"with s a multiple of 4, got {in_dim}")
        return cnn_spec((1, side, side), num_classes)
    raise ValueError(f"unknown model preset {name!r}")
