"""Network weight containers, the model JSON format, convolution flattening,
and per-sample activation traces.

A network is a chain of dense weight matrices; ``layers[k]`` has shape
``(width_k, width_{k+1})`` with the input counting as layer 0, and a sample
propagates as ``z = a @ W + b`` with ReLU between layers and a linear head.
Biases ride along for forward passes only; connectivity analysis elsewhere in
the package looks at the weight matrices alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .serialize import dumps_canonical

MODEL_FORMAT = "json-v1"


class ModelFormatError(ValueError):
    """Model file does not parse into a valid network."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def _as_matrix(arr, name: str) -> np.ndarray:
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D weight matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name}: contains non-finite values")
    return _frozen(a)


@dataclass(frozen=True)
class NetworkSpec:
    """Weights (and optional biases) of a feed-forward ReLU network.

    Adjacent shapes must chain: columns of layer ``k`` equal rows of layer
    ``k+1``. Arrays are copied and frozen on construction, so instances are
    immutable and safe to share across threads.
    """

    layers: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if len(self.layers) == 0:
            raise ValueError("network needs at least one weight matrix")
        layers = tuple(_as_matrix(w, f"layer {k + 1}") for k, w in enumerate(self.layers))
        for k in range(1, len(layers)):
            want, got = layers[k - 1].shape[1], layers[k].shape[0]
            if got != want:
                raise ValueError(
                    f"layer {k + 1}: has {got} rows but layer {k} has {want} columns"
                )
        object.__setattr__(self, "layers", layers)
        if self.biases is not None:
            if len(self.biases) != len(layers):
                raise ValueError("biases: need one vector per layer")
            biases = []
            for k, b in enumerate(self.biases):
                b = np.asarray(b, dtype=np.float64)
                if b.shape != (layers[k].shape[1],):
                    raise ValueError(
                        f"bias {k + 1}: shape {b.shape} does not match layer width "
                        f"{layers[k].shape[1]}"
                    )
                if not np.isfinite(b).all():
                    raise ValueError(f"bias {k + 1}: contains non-finite values")
                biases.append(_frozen(b))
            object.__setattr__(self, "biases", tuple(biases))

    @property
    def d(self) -> int:
        """Input dimension."""
        return self.layers[0].shape[0]

    @property
    def depth(self) -> int:
        """Number of weight matrices; the last one feeds the output units."""
        return len(self.layers)

    @property
    def widths(self) -> tuple[int, ...]:
        """Unit counts per layer, inputs first, outputs last."""
        return (self.d,) + tuple(w.shape[1] for w in self.layers)

    @property
    def n_outputs(self) -> int:
        return self.layers[-1].shape[1]


@dataclass(frozen=True)
class ActivationTrace:
    """Pre- and post-ReLU activations of one sample.

    ``pre[k]`` holds the linear responses of layer ``k+1`` and
    ``post[k] = max(pre[k], 0)``. The network output is the final linear
    response (the head is not rectified when predicting).
    """

    x: np.ndarray
    pre: tuple[np.ndarray, ...]
    post: tuple[np.ndarray, ...]

    @property
    def output(self) -> np.ndarray:
        return self.pre[-1]


def forward_activations(net: NetworkSpec, x) -> ActivationTrace:
    """Run one sample through ``net`` and record every layer's activations."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.d,):
        raise ValueError(f"sample has shape {x.shape}, expected ({net.d},)")
    pre, post = [], []
    a = x
    for k, w in enumerate(net.layers):
        z = a @ w
        if net.biases is not None:
            z = z + net.biases[k]
        r = np.maximum(z, 0.0)
        pre.append(_frozen(z))
        post.append(_frozen(r))
        a = r
    return ActivationTrace(_frozen(x), tuple(pre), tuple(post))


def predict(net: NetworkSpec, X) -> np.ndarray:
    """Batch forward pass; returns an ``(n, n_outputs)`` array."""
    a = np.asarray(X, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != net.d:
        raise ValueError(f"inputs have shape {a.shape}, expected (n, {net.d})")
    last = net.depth - 1
    for k, w in enumerate(net.layers):
        a = a @ w
        if net.biases is not None:
            a = a + net.biases[k]
        if k < last:
            a = np.maximum(a, 0.0)
    return a


def local_weights(net: NetworkSpec, trace: ActivationTrace) -> NetworkSpec:
    """Per-sample edge strengths: ``|W[i, j]| * max(source_i, 0)``.

    The source of layer 1 is the raw input, so negative input features kill
    their rows, as does any dead (non-positive) hidden unit. The result is a
    nonnegative network meant to be fed to the filtration builder, which
    normalizes by the global maximum entry.
    """
    if trace.x.shape != (net.d,) or len(trace.pre) != net.depth:
        raise ValueError("trace does not match the network's architecture")
    for k, z in enumerate(trace.pre):
        if z.shape != (net.layers[k].shape[1],):
            raise ValueError(f"trace layer {k + 1} width {z.shape} mismatches network")
    sources = [np.maximum(trace.x, 0.0)]
    sources += [trace.post[k] for k in range(net.depth - 1)]
    scaled = tuple(np.abs(w) * src[:, None] for w, src in zip(net.layers, sources))
    return NetworkSpec(scaled)


def flatten_conv(kernel, input_shape, stride: int = 1) -> np.ndarray:
    """Expand a convolution kernel into an equivalent dense weight matrix.

    For a kernel of shape ``(c_out, c_in, kh, kw)`` applied to inputs of shape
    ``(c_in, H, W)`` with the given stride (no padding, no dilation), returns
    the ``(c_in*H*W, c_out*H_out*W_out)`` matrix such that
    ``x.reshape(-1) @ m`` equals the flattened convolution output. Both sides
    use row-major (channel, row, column) flattening.
    """
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 4:
        raise ValueError(f"kernel must be 4-D, got shape {k.shape}")
    c_out, c_in, kh, kw = k.shape
    try:
        c, h, w = (int(v) for v in input_shape)
    except (TypeError, ValueError):
        raise ValueError(f"input_shape must be (channels, height, width), got {input_shape!r}")
    if min(c, h, w, c_out, c_in, kh, kw) < 1:
        raise ValueError("kernel and input dimensions must be positive")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if c != c_in:
        raise ValueError(f"kernel expects {c_in} input channels, input has {c}")
    if kh > h or kw > w:
        raise ValueError(f"kernel {kh}x{kw} larger than input {h}x{w}")
    h_out = (h - kh) // stride + 1
    w_out = (w - kw) // stride + 1
    m = np.zeros((c * h * w, c_out * h_out * w_out))
    for o in range(c_out):
        for i in range(h_out):
            for j in range(w_out):
                col = (o * h_out + i) * w_out + j
                for ch in range(c_in):
                    for a in range(kh):
                        row = (ch * h + i * stride + a) * w + j * stride
                        m[row : row + kw, col] = k[o, ch, a, :]
    return m


def save_network(net: NetworkSpec, path, meta: dict | None = None) -> None:
    """Write a network to the canonical JSON model format."""
    obj = {
        "format": MODEL_FORMAT,
        "layers": [
            {"rows": w.shape[0], "cols": w.shape[1], "data": w.reshape(-1).tolist()}
            for w in net.layers
        ],
    }
    if net.biases is not None:
        obj["biases"] = [b.tolist() for b in net.biases]
    if meta:
        obj["meta"] = meta
    Path(path).write_text(dumps_canonical(obj) + "\n")


def load_network(path) -> NetworkSpec:
    """Read a model JSON file, validating shapes and finiteness.

    Raises ModelFormatError for malformed files and ValueError (naming the
    offending layer) for dimension mismatches or non-finite entries.
    """
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{path}: expected a JSON object at the top level")
    fmt = obj.get("format")
    if fmt != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: unsupported format {fmt!r}")
    raw_layers = obj.get("layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise ModelFormatError(f"{path}: 'layers' must be a non-empty list")
    layers = []
    for k, entry in enumerate(raw_layers):
        if not isinstance(entry, dict):
            raise ModelFormatError(f"layer {k + 1}: expected an object")
        try:
            rows, cols = int(entry["rows"]), int(entry["cols"])
            data = entry["data"]
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(f"layer {k + 1}: missing or invalid rows/cols/data") from e
        if not isinstance(data, list) or len(data) != rows * cols:
            raise ModelFormatError(
                f"layer {k + 1}: data length {len(data) if isinstance(data, list) else '?'} "
                f"!= rows*cols = {rows * cols}"
            )
        layers.append(np.asarray(data, dtype=np.float64).reshape(rows, cols))
    biases = obj.get("biases")
    if biases is not None:
        if not isinstance(biases, list) or len(biases) != len(layers):
            raise ModelFormatError(f"{path}: 'biases' must list one vector per layer")
        biases = tuple(np.asarray(b, dtype=np.float64) for b in biases)
    return NetworkSpec(tuple(layers), biases)
