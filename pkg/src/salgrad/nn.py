"""Minimal convolutional network engine in numpy.

Supports the two things the rest of the toolkit needs: training a small
classifier by softmax cross-entropy, and back-propagating an arbitrary
output-layer error vector all the way to the input pixels.  Everything
runs in double precision so gradients survive finite-difference checks.

Layers are stateless: ``forward`` returns ``(output, cache)`` and
``backward`` consumes the cache, so a trained :class:`Network` can be
shared across threads without interior mutation.
"""

import io
import json
import struct

import numpy as np

CHECKPOINT_MAGIC = b"SGNW"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Raised when a checkpoint file is corrupt or has the wrong version."""


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss becomes non-finite or explodes."""


# Cross-entropy over a handful of classes starts near log(num_classes);
# anything past this bound means the optimizer has blown up.
LOSS_EXPLOSION_LIMIT = 1e6


class Conv2D:
    """Stride-1 style 2D convolution over H x W x C tensors (NHWC batches).

    Weights have shape (kh, kw, c_in, c_out); zero padding.
    """

    def __init__(self, kernel_size, in_channels, out_channels, stride=1, pad=None):
        self.kernel_size = int(kernel_size)
        self.in_channels = int(in_channels)
        self.out_channels = int(out_channels)
        self.stride = int(stride)
        self.pad = self.kernel_size // 2 if pad is None else int(pad)
        self.weight = np.zeros(
            (self.kernel_size, self.kernel_size, in_channels, out_channels)
        )
        self.bias = np.zeros(out_channels)

    def init_params(self, rng):
        fan_in = self.kernel_size * self.kernel_size * self.in_channels
        self.weight = rng.normal(0.0, np.sqrt(2.0 / fan_in), self.weight.shape)
        self.bias = np.zeros(self.out_channels)

    @property
    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def out_shape(self, in_shape):
        h, w, c = in_shape
        if c != self.in_channels:
            raise ValueError(f"expected {self.in_channels} channels, got {c}")
        k, s, p = self.kernel_size, self.stride, self.pad
        return ((h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1, self.out_channels)

    def _im2col(self, x):
        n, h, w, c = x.shape
        k, s, p = self.kernel_size, self.stride, self.pad
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
        ho = (h + 2 * p - k) // s + 1
        wo = (w + 2 * p - k) // s + 1
        cols = np.empty((n, ho, wo, k * k * c))
        for i in range(k):
            for j in range(k):
                patch = xp[:, i : i + ho * s : s, j : j + wo * s : s, :]
                cols[..., (i * k + j) * c : (i * k + j + 1) * c] = patch
        return cols, ho, wo

    def forward(self, x):
        cols, ho, wo = self._im2col(x)
        wmat = self.weight.reshape(-1, self.out_channels)
        y = cols @ wmat + self.bias
        return y, (cols, x.shape)

    def backward(self, dy, cache):
        cols, x_shape = cache
        n, h, w, c = x_shape
        k, s, p = self.kernel_size, self.stride, self.pad
        ho, wo = dy.shape[1], dy.shape[2]

        wmat = self.weight.reshape(-1, self.out_channels)
        dcols = dy @ wmat.T
        dweight = (cols.reshape(-1, wmat.shape[0]).T @ dy.reshape(-1, self.out_channels))
        dweight = dweight.reshape(self.weight.shape)
        dbias = dy.sum(axis=(0, 1, 2))

        dxp = np.zeros((n, h + 2 * p, w + 2 * p, c))
        for i in range(k):
            for j in range(k):
                dxp[:, i : i + ho * s : s, j : j + wo * s : s, :] += dcols[
                    ..., (i * k + j) * c : (i * k + j + 1) * c
                ]
        dx = dxp[:, p : p + h, p : p + w, :]
        return dx, {"weight": dweight, "bias": dbias}

    def descriptor(self):
        return {
            "type": "conv",
            "kernel_size": self.kernel_size,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "stride": self.stride,
            "pad": self.pad,
        }


class ReLU:
    params = {}

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, dy, mask):
        return dy * mask, {}

    def descriptor(self):
        return {"type": "relu"}


class MaxPool2D:
    """Non-overlapping max pooling; ties broken by first index."""

    params = {}

    def __init__(self, window=2):
        self.window = int(window)

    def out_shape(self, in_shape):
        h, w, c = in_shape
        if h % self.window or w % self.window:
            raise ValueError(
                f"pool window {self.window} does not divide input {h}x{w}"
            )
        return (h // self.window, w // self.window, c)

    def forward(self, x):
        n, h, w, c = x.shape
        k = self.window
        if h % k or w % k:
            raise ValueError(f"pool window {k} does not divide input {h}x{w}")
        tiles = (
            x.reshape(n, h // k, k, w // k, k, c)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(n, h // k, w // k, c, k * k)
        )
        idx = np.argmax(tiles, axis=-1)  # argmax takes the first maximum
        y = np.take_along_axis(tiles, idx[..., None], axis=-1)[..., 0]
        return y, (idx, x.shape)

    def backward(self, dy, cache):
        idx, x_shape = cache
        n, h, w, c = x_shape
        k = self.window
        dtiles = np.zeros((n, h // k, w // k, c, k * k))
        np.put_along_axis(dtiles, idx[..., None], dy[..., None], axis=-1)
        dx = (
            dtiles.reshape(n, h // k, w // k, c, k, k)
            .transpose(0, 1, 4, 2, 5, 3)
            .reshape(n, h, w, c)
        )
        return dx, {}

    def descriptor(self):
        return {"type": "maxpool", "window": self.window}


class Flatten:
    params = {}

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, x_shape):
        return dy.reshape(x_shape), {}

    def descriptor(self):
        return {"type": "flatten"}


class Dense:
    def __init__(self, in_features, out_features):
        self.in_features = int(in_features)
        self.out_features = int(out_features)
        self.weight = np.zeros((in_features, out_features))
        self.bias = np.zeros(out_features)

    def init_params(self, rng):
        self.weight = rng.normal(
            0.0, np.sqrt(2.0 / self.in_features), self.weight.shape
        )
        self.bias = np.zeros(self.out_features)

    @property
    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def out_shape(self, in_shape):
        if in_shape != (self.in_features,):
            raise ValueError(
                f"dense layer expects {self.in_features} inputs, got {in_shape}"
            )
        return (self.out_features,)

    def forward(self, x):
        return x @ self.weight + self.bias, x

    def backward(self, dy, x):
        dx = dy @ self.weight.T
        return dx, {"weight": x.T @ dy, "bias": dy.sum(axis=0)}

    def descriptor(self):
        return {
            "type": "dense",
            "in_features": self.in_features,
            "out_features": self.out_features,
        }


_LAYER_TYPES = {
    "conv": lambda d: Conv2D(
        d["kernel_size"], d["in_channels"], d["out_channels"], d["stride"], d["pad"]
    ),
    "relu": lambda d: ReLU(),
    "maxpool": lambda d: MaxPool2D(d["window"]),
    "flatten": lambda d: Flatten(),
    "dense": lambda d: Dense(d["in_features"], d["out_features"]),
}


class Network:
    """An ordered stack of layers producing pre-softmax logits.

    ``input_shape`` is (H, W, C); the last layer must emit ``num_classes``
    values.  ``class_names`` optionally maps class index to a name.
    """

    def __init__(self, layers, input_shape, num_classes, class_names=None):
        self.layers = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.num_classes = int(num_classes)
        self.class_names = dict(class_names) if class_names else None

        shape = self.input_shape
        for layer in self.layers:
            shape = layer.out_shape(shape)
        if shape != (self.num_classes,):
            raise ValueError(
                f"network output shape {shape} does not match num_classes={num_classes}"
            )

    # -- forward / backward ------------------------------------------------

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.input_shape:
            raise ValueError(
                f"input shape {x.shape} does not match network input {self.input_shape}"
            )
        if not np.all(np.isfinite(x)):
            raise ValueError("input contains non-finite values")
        return x

    def forward_batch(self, x):
        """Run a batch of shape (N,) + input_shape; returns (logits, caches)."""
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def forward(self, x):
        """Pre-softmax logits for a single image."""
        x = self._check_input(x)
        logits, _ = self.forward_batch(x[None])
        return logits[0]

    def backward_to_input(self, x, e):
        """Gradient of ``e . logits`` with respect to the input pixels.

        ``e`` is the output-layer error vector (length ``num_classes``).
        """
        x = self._check_input(x)
        e = np.asarray(e, dtype=np.float64)
        if e.shape != (self.num_classes,):
            raise ValueError(
                f"error vector length {e.shape} does not match {self.num_classes} classes"
            )
        _, caches = self.forward_batch(x[None])
        grad = e[None]
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            grad, _ = layer.backward(grad, cache)
        return grad[0]

    def predict(self, x):
        """Class label for a single image; ties broken by lowest index."""
        return int(np.argmax(self.forward(x)))

    # -- training ----------------------------------------------------------

    def train(self, images, labels, epochs, learning_rate, batch_size=16, seed=0):
        """Mini-batch SGD on softmax cross-entropy. Returns per-epoch mean loss.

        Mutates the network parameters in place.  Raises
        :class:`TrainingDivergedError` if the loss goes non-finite.
        """
        images = np.asarray(images, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if len(images) == 0:
            raise ValueError("training dataset is empty")
        if images.shape[1:] != self.input_shape:
            raise ValueError(
                f"sample shape {images.shape[1:]} does not match network input"
            )
        if labels.min() < 0 or labels.max() >= self.num_classes:
            raise ValueError("labels out of range")

        rng = np.random.default_rng(seed)
        history = []
        n = len(images)
        for _ in range(int(epochs)):
            order = rng.permutation(n)
            losses = []
            for start in range(0, n, batch_size):
                batch = order[start : start + batch_size]
                x, y = images[batch], labels[batch]
                logits, caches = self.forward_batch(x)

                shifted = logits - logits.max(axis=1, keepdims=True)
                log_z = np.log(np.exp(shifted).sum(axis=1))
                loss = float(np.mean(log_z - shifted[np.arange(len(y)), y]))
                if not np.isfinite(loss) or loss > LOSS_EXPLOSION_LIMIT:
                    raise TrainingDivergedError(f"training loss diverged ({loss})")
                losses.append(loss)

                probs = np.exp(shifted - log_z[:, None])
                dlogits = probs
                dlogits[np.arange(len(y)), y] -= 1.0
                dlogits /= len(y)

                grad = dlogits
                param_grads = []
                for layer, cache in zip(reversed(self.layers), reversed(caches)):
                    grad, g = layer.backward(grad, cache)
                    param_grads.append(g)
                for layer, g in zip(reversed(self.layers), param_grads):
                    for name, dval in g.items():
                        layer.params[name] -= learning_rate * dval
            history.append(float(np.mean(losses)))
        return history

    def accuracy(self, images, labels):
        logits, _ = self.forward_batch(np.asarray(images, dtype=np.float64))
        return float(np.mean(np.argmax(logits, axis=1) == np.asarray(labels)))

    # -- serialization -----------------------------------------------------

    def flat_params(self):
        parts = []
        for layer in self.layers:
            for name in sorted(layer.params):
                parts.append(layer.params[name].ravel())
        if not parts:
            return np.empty(0)
        return np.concatenate(parts)

    def set_flat_params(self, flat):
        offset = 0
        for layer in self.layers:
            for name in sorted(layer.params):
                p = layer.params[name]
                layer.params[name][...] = flat[offset : offset + p.size].reshape(p.shape)
                offset += p.size
        if offset != flat.size:
            raise ValueError(f"parameter count mismatch: {flat.size} vs {offset}")

    def save(self, path):
        topo = {
            "input_shape": list(self.input_shape),
            "num_classes": self.num_classes,
            "class_names": self.class_names,
            "layers": [layer.descriptor() for layer in self.layers],
        }
        topo_bytes = json.dumps(topo, sort_keys=True).encode()
        flat = self.flat_params()
        with open(path, "wb") as f:
            f.write(CHECKPOINT_MAGIC)
            f.write(struct.pack("<I", CHECKPOINT_VERSION))
            f.write(struct.pack("<I", len(topo_bytes)))
            f.write(topo_bytes)
            f.write(struct.pack("<Q", flat.size))
            f.write(flat.astype("<f8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            data = f.read()
        buf = io.BytesIO(data)

        def read(n, what):
            chunk = buf.read(n)
            if len(chunk) != n:
                raise CheckpointError(f"checkpoint truncated while reading {what}")
            return chunk

        if read(4, "magic") != CHECKPOINT_MAGIC:
            raise CheckpointError("not a network checkpoint (bad magic bytes)")
        (version,) = struct.unpack("<I", read(4, "version"))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
            )
        (topo_len,) = struct.unpack("<I", read(4, "topology length"))
        try:
            topo = json.loads(read(topo_len, "topology"))
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"corrupt topology block: {exc}") from exc
        (n_params,) = struct.unpack("<Q", read(8, "parameter count"))
        flat = np.frombuffer(read(8 * n_params, "parameters"), dtype="<f8").copy()
        if buf.read(1):
            raise CheckpointError("trailing bytes after parameter block")

        try:
            layers = [_LAYER_TYPES[d["type"]](d) for d in topo["layers"]]
            class_names = topo.get("class_names")
            if class_names is not None:
                class_names = {int(k): v for k, v in class_names.items()}
            net = cls(layers, topo["input_shape"], topo["num_classes"], class_names)
        except (KeyError, TypeError) as exc:
            raise CheckpointError(f"corrupt topology block: {exc}") from exc
        net.set_flat_params(flat)
        return net


def desk_scale_net(input_size=64, num_classes=4, seed=0):
    """The default small architecture: two conv/relu/pool blocks plus a
    dense readout.  Input is ``input_size`` x ``input_size`` x 3."""
    if input_size % 4:
        raise ValueError("input_size must be divisible by 4 for the two pools")
    rng = np.random.default_rng(seed)
    feat = (input_size // 4) ** 2 * 32
    layers = [
        Conv2D(3, 3, 16),
        ReLU(),
        MaxPool2D(2),
        Conv2D(3, 16, 32),
        ReLU(),
        MaxPool2D(2),
        Flatten(),
        Dense(feat, num_classes),
    ]
    for layer in layers:
        if hasattr(layer, "init_params"):
            layer.init_params(rng)
    return Network(layers, (input_size, input_size, 3), num_classes)
