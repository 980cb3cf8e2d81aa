"""Network architectures: three small classifiers, the perturbation
generator, and the discriminator.

Architectures are declarative layer lists interpreted by
:func:`forward_network`, so checkpoints can rebuild a network from its
descriptor alone.  The three classifier families are deliberately different
(conv-heavy, conv-light, dense-only) so that cross-model transfer is a
meaningful question even at this scale.

The generator is an encoder-decoder (three down convolutions, three up
transposed convolutions) whose final tanh output is scaled by eps/255, which
bounds the perturbation's max-norm by construction.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigError, ShapeError
from .rng import RngStream

CLASSIFIER_ARCH_IDS = ("classifier_a", "classifier_b", "classifier_c")


# ---------------------------------------------------------------------------
# layer specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Conv:
    out_channels: int
    kernel: int = 3
    stride: int = 1
    padding: int = 1


@dataclass(frozen=True)
class ConvT:
    out_channels: int
    kernel: int = 3
    stride: int = 1
    padding: int = 1
    output_padding: int = 0


@dataclass(frozen=True)
class Dense:
    out_features: int


@dataclass(frozen=True)
class Relu:
    pass


@dataclass(frozen=True)
class Tanh:
    pass


@dataclass(frozen=True)
class Sigmoid:
    pass


@dataclass(frozen=True)
class InstanceNorm:
    pass


@dataclass(frozen=True)
class Scale:
    """Fixed scalar gain (not learned)."""

    factor: float = 1.0


@dataclass(frozen=True)
class Flatten:
    pass


_LAYER_TYPES = {
    "conv": Conv,
    "conv_t": ConvT,
    "dense": Dense,
    "relu": Relu,
    "tanh": Tanh,
    "sigmoid": Sigmoid,
    "instance_norm": InstanceNorm,
    "scale": Scale,
    "flatten": Flatten,
}
_LAYER_NAMES = {cls: name for name, cls in _LAYER_TYPES.items()}


@dataclass(frozen=True)
class ArchDescriptor:
    """What a network is: its kind, input shape, and layer stack."""

    kind: str
    input_shape: Tuple[int, int, int]  # (C, H, W)
    class_count: int
    layers: Tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        items = []
        for layer in self.layers:
            d = {"type": _LAYER_NAMES[type(layer)]}
            d.update({k: getattr(layer, k) for k in layer.__dataclass_fields__})
            items.append(d)
        return {
            "kind": self.kind,
            "input_shape": list(self.input_shape),
            "class_count": self.class_count,
            "layers": items,
        }

    @staticmethod
    def from_dict(d: dict) -> "ArchDescriptor":
        layers = []
        for item in d["layers"]:
            item = dict(item)
            cls = _LAYER_TYPES[item.pop("type")]
            layers.append(cls(**item))
        return ArchDescriptor(
            kind=d["kind"],
            input_shape=tuple(d["input_shape"]),
            class_count=int(d["class_count"]),
            layers=tuple(layers),
        )


@dataclass
class NetworkParams:
    """Named, ordered parameter tensors plus the architecture they belong to."""

    arch: ArchDescriptor
    params: Dict[str, Tensor]
    init_seed: int

    def tensors(self) -> List[Tensor]:
        return list(self.params.values())

    def num_params(self) -> int:
        return sum(t.size for t in self.params.values())

    def zero_grads(self) -> None:
        for t in self.params.values():
            t.grad = None


@contextmanager
def frozen(*nets: "NetworkParams"):
    """Temporarily stop recording gradients for these networks' parameters.

    Forward passes still work; backward simply treats the parameters as
    constants, which skips their (unneeded) gradient kernels.
    """
    tensors = [t for net in nets for t in net.params.values()]
    saved = [t.requires_grad for t in tensors]
    for t in tensors:
        t.requires_grad = False
    try:
        yield
    finally:
        for t, flag in zip(tensors, saved):
            t.requires_grad = flag


# ---------------------------------------------------------------------------
# shape inference and initialization
# ---------------------------------------------------------------------------

def _conv_out(h: int, k: int, s: int, p: int) -> int:
    return (h + 2 * p - k) // s + 1


def _infer_shapes(arch: ArchDescriptor) -> List[tuple]:
    """Shape after each layer, starting from (C, H, W); dense stages are (n,)."""
    shape: tuple = arch.input_shape
    out = []
    for layer in arch.layers:
        if isinstance(layer, Conv):
            c, h, w = shape
            shape = (layer.out_channels,
                     _conv_out(h, layer.kernel, layer.stride, layer.padding),
                     _conv_out(w, layer.kernel, layer.stride, layer.padding))
        elif isinstance(layer, ConvT):
            c, h, w = shape
            shape = (layer.out_channels,
                     (h - 1) * layer.stride - 2 * layer.padding + layer.kernel + layer.output_padding,
                     (w - 1) * layer.stride - 2 * layer.padding + layer.kernel + layer.output_padding)
        elif isinstance(layer, Flatten):
            shape = (int(np.prod(shape)),)
        elif isinstance(layer, Dense):
            if len(shape) != 1:
                raise ConfigError("dense layer requires flattened input")
            shape = (layer.out_features,)
        # activations / norms keep the shape
        if any(s <= 0 for s in shape):
            raise ConfigError(f"architecture produces non-positive extent {shape}")
        out.append(shape)
    return out


def init_params(arch: ArchDescriptor, seed: int) -> NetworkParams:
    """He-initialized parameters for every weighted layer, in layer order."""
    rng = RngStream(seed)
    shapes = _infer_shapes(arch)
    params: Dict[str, Tensor] = {}
    cur = arch.input_shape
    for i, layer in enumerate(arch.layers):
        if isinstance(layer, Conv):
            c_in = cur[0]
            std = np.sqrt(2.0 / (c_in * layer.kernel * layer.kernel))
            w = rng.normal((layer.out_channels, c_in, layer.kernel, layer.kernel), 0.0, std)
            params[f"{i}.weight"] = Tensor(w, requires_grad=True)
            params[f"{i}.bias"] = Tensor(np.zeros(layer.out_channels), requires_grad=True)
        elif isinstance(layer, ConvT):
            c_in = cur[0]
            std = np.sqrt(2.0 / (c_in * layer.kernel * layer.kernel))
            w = rng.normal((c_in, layer.out_channels, layer.kernel, layer.kernel), 0.0, std)
            params[f"{i}.weight"] = Tensor(w, requires_grad=True)
            params[f"{i}.bias"] = Tensor(np.zeros(layer.out_channels), requires_grad=True)
        elif isinstance(layer, Dense):
            n_in = cur[0]
            std = np.sqrt(2.0 / n_in)
            w = rng.normal((n_in, layer.out_features), 0.0, std)
            params[f"{i}.weight"] = Tensor(w, requires_grad=True)
            params[f"{i}.bias"] = Tensor(np.zeros(layer.out_features), requires_grad=True)
        cur = shapes[i]
    return NetworkParams(arch=arch, params=params, init_seed=int(seed))


def forward_network(net: NetworkParams, x: Tensor) -> Tensor:
    """Run the layer stack; input (B, C, H, W) must match the descriptor."""
    expect = net.arch.input_shape
    if x.ndim != 4 or tuple(x.shape[1:]) != tuple(expect):
        raise ShapeError(f"input shape {x.shape} does not match arch input {expect}")
    h = x
    for i, layer in enumerate(net.arch.layers):
        if isinstance(layer, Conv):
            w = net.params[f"{i}.weight"]
            b = net.params[f"{i}.bias"]
            h = ag.conv2d(h, w, stride=layer.stride, padding=layer.padding)
            h = ag.add(h, ag.reshape(b, (1, -1, 1, 1)))
        elif isinstance(layer, ConvT):
            w = net.params[f"{i}.weight"]
            b = net.params[f"{i}.bias"]
            h = ag.conv2d_transpose(h, w, stride=layer.stride, padding=layer.padding,
                                    output_padding=layer.output_padding)
            h = ag.add(h, ag.reshape(b, (1, -1, 1, 1)))
        elif isinstance(layer, Dense):
            w = net.params[f"{i}.weight"]
            b = net.params[f"{i}.bias"]
            h = ag.add(ag.matmul(h, w), b)
        elif isinstance(layer, Flatten):
            h = ag.reshape(h, (h.shape[0], -1))
        elif isinstance(layer, Relu):
            h = ag.relu(h)
        elif isinstance(layer, Tanh):
            h = ag.tanh(h)
        elif isinstance(layer, Sigmoid):
            h = ag.sigmoid(h)
        elif isinstance(layer, InstanceNorm):
            h = ag.instance_norm(h)
        elif isinstance(layer, Scale):
            h = ag.mul(h, layer.factor)
        else:  # pragma: no cover
            raise ConfigError(f"unknown layer {layer!r}")
    return h


# ---------------------------------------------------------------------------
# the zoo
# ---------------------------------------------------------------------------

def classifier_arch(arch_id: str, input_shape, class_count: int) -> ArchDescriptor:
    c, h, w = input_shape
    if arch_id == "classifier_a":
        # conv-heavy; also the costliest forward pass of the three
        layers = (Conv(16, 3, 2, 1), Relu(), Conv(32, 3, 2, 1), Relu(),
                  Flatten(), Dense(192), Relu(), Dense(class_count))
    elif arch_id == "classifier_b":
        layers = (Conv(8, 3, 2, 1), Relu(), Conv(16, 3, 2, 1), Relu(),
                  Conv(16, 3, 1, 1), Relu(), Flatten(), Dense(class_count))
    elif arch_id == "classifier_c":
        layers = (Flatten(), Dense(96), Relu(), Dense(96), Relu(), Dense(class_count))
    else:
        raise ConfigError(f"unknown classifier architecture: {arch_id!r}")
    return ArchDescriptor(kind=arch_id, input_shape=tuple(input_shape),
                          class_count=int(class_count), layers=layers)


def build_classifier(arch_id: str, input_shape, class_count: int, seed: int) -> NetworkParams:
    if class_count < 2:
        raise ConfigError("classifiers need at least two classes")
    return init_params(classifier_arch(arch_id, input_shape, class_count), seed)


def generator_arch(input_shape) -> ArchDescriptor:
    c, h, w = input_shape
    if h % 4 or w % 4:
        raise ConfigError("generator requires H and W divisible by 4")
    # the pre-tanh gain brings saturation within reach of the short
    # small-learning-rate schedules used at this scale
    layers = (
        Conv(4, 3, 1, 1), InstanceNorm(), Relu(),
        Conv(8, 3, 2, 1), InstanceNorm(), Relu(),
        Conv(8, 3, 2, 1), InstanceNorm(), Relu(),
        ConvT(8, 3, 2, 1, 1), Relu(),
        ConvT(4, 3, 2, 1, 1), Relu(),
        ConvT(c, 3, 1, 1, 0), Scale(4.0), Tanh(),
    )
    return ArchDescriptor(kind="generator", input_shape=tuple(input_shape),
                          class_count=0, layers=layers)


def build_generator(input_shape, seed: int) -> NetworkParams:
    return init_params(generator_arch(input_shape), seed)


def discriminator_arch(input_shape) -> ArchDescriptor:
    layers = (Conv(8, 3, 2, 1), Relu(), Conv(16, 3, 2, 1), Relu(),
              Flatten(), Dense(1), Sigmoid())
    return ArchDescriptor(kind="discriminator", input_shape=tuple(input_shape),
                          class_count=0, layers=layers)


def build_discriminator(input_shape, seed: int) -> NetworkParams:
    return init_params(discriminator_arch(input_shape), seed)


def build_network(arch: ArchDescriptor, seed: int) -> NetworkParams:
    """Re-instantiate any descriptor (used when loading checkpoints)."""
    return init_params(arch, seed)


# ---------------------------------------------------------------------------
# forward wrappers
# ---------------------------------------------------------------------------

def classifier_logits(net: NetworkParams, x: Tensor) -> Tensor:
    if net.arch.kind not in CLASSIFIER_ARCH_IDS:
        raise ConfigError(f"{net.arch.kind!r} is not a classifier")
    return forward_network(net, x)


def predict_labels(net: NetworkParams, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Argmax class predictions, computed without graph recording."""
    out = np.empty(x.shape[0], dtype=np.int64)
    with ag.no_grad():
        for lo in range(0, x.shape[0], batch_size):
            logits = classifier_logits(net, Tensor(x[lo:lo + batch_size]))
            out[lo:lo + batch_size] = np.argmax(logits.data, axis=1)
    return out


def generate_perturbation(g_net: NetworkParams, x: Tensor, epsilon: float) -> Tensor:
    """G(x) scaled to the max-norm budget: |output| <= epsilon / 255 elementwise.

    `epsilon` is quoted on the 0-255 pixel scale.
    """
    if g_net.arch.kind != "generator":
        raise ConfigError(f"{g_net.arch.kind!r} is not a generator")
    raw = forward_network(g_net, x)
    return ag.mul(raw, float(epsilon) / 255.0)


def discriminator_score(d_net: NetworkParams, x: Tensor) -> Tensor:
    """Per-sample realism score in (0, 1), clamped away from {0, 1} for log safety."""
    if d_net.arch.kind != "discriminator":
        raise ConfigError(f"{d_net.arch.kind!r} is not a discriminator")
    out = forward_network(d_net, x)
    return ag.clamp(ag.reshape(out, (x.shape[0],)), 1e-12, 1.0 - 1e-12)
