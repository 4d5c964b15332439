"""Dense feedforward networks with manual backpropagation and MC-dropout.

This is the only learning substrate in the package: it backs the student
Q-network (with a dueling head), its target copy, the dropout twin used for
student uncertainty, and the softmax teacher-imitation model. No autodiff
framework is used; gradients are derived by hand and verified against finite
differences by ``gradient_check``.

Dropout follows the inverted convention: during a stochastic pass each kept
unit is scaled by ``1 / (1 - rate)``, so a deterministic pass is just the
plain matrix chain with no rescaling.

RNG contract (relied on by reproducibility tests): every network owns one
seeded generator. During a stochastic pass, dropout masks are drawn layer by
layer in forward order; each dropout layer draws a single uniform matrix of
shape ``(batch, input_dim)`` filled row by row, where ``batch`` is 1 for a
single forward and ``n_passes`` for ``mc_forward`` (row i belongs to pass i).
Layers with ``dropout_rate == 0`` draw nothing. For a dueling head the value
stream draws before the advantage stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import struct

import numpy as np

RELU, LINEAR, SOFTMAX = "relu", "linear", "softmax"
_ACTIVATION_CODES = {RELU: 0, LINEAR: 1, SOFTMAX: 2}
_DUELING_VALUE_CODE, _DUELING_ADVANTAGE_CODE = 3, 4
_SNAPSHOT_MAGIC = b"ADVNET1"

ADAM_BETA1, ADAM_BETA2, ADAM_EPS = 0.9, 0.999, 1e-8


class StructureError(ValueError):
    """Architecture mismatch: bad dimensions, incompatible copy, bad head."""


class InvalidInputError(ValueError):
    """Non-finite or otherwise unusable network input."""


class TrainingDivergence(RuntimeError):
    """Loss became non-finite. ``batch_index`` points at the offending row."""

    def __init__(self, message: str, batch_index: int):
        super().__init__(message)
        self.batch_index = batch_index


def _he_uniform(fan_in: int, shape, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def _xavier_uniform(fan_in: int, fan_out: int, shape, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class DenseLayer:
    """One fully connected layer; ``dropout_rate`` applies to its input."""

    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.activation not in _ACTIVATION_CODES:
            raise StructureError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise StructureError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    @property
    def in_dim(self) -> int:
        return self.w.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w.shape[0]

    @classmethod
    def create(cls, in_dim: int, out_dim: int, activation: str,
               dropout_rate: float, rng: np.random.Generator) -> "DenseLayer":
        # He-uniform for relu, Xavier-uniform otherwise.
        if activation == RELU:
            w = _he_uniform(in_dim, (out_dim, in_dim), rng)
        else:
            w = _xavier_uniform(in_dim, out_dim, (out_dim, in_dim), rng)
        return cls(w=w, b=np.zeros(out_dim), activation=activation, dropout_rate=dropout_rate)


@dataclass
class DuelingHead:
    """State-value plus mean-centered advantages: Q = V + A - mean(A)."""

    value: DenseLayer      # (1, hidden)
    advantage: DenseLayer  # (actions, hidden)


@dataclass
class Minibatch:
    """Paired training inputs/targets; targets are full output vectors."""

    inputs: np.ndarray   # (batch, in_dim)
    targets: np.ndarray  # (batch, out_dim)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if len(self.inputs) != len(self.targets) or len(self.inputs) == 0:
            raise StructureError("inputs and targets must have equal nonzero length")

    def __len__(self) -> int:
        return len(self.inputs)


def _apply_activation(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == RELU:
        return np.maximum(z, 0.0)
    if activation == SOFTMAX:
        shifted = z - z.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)
    return z


class Network:
    """Feedforward net: relu hidden stack plus a linear/softmax/dueling head.

    ``hidden_dropout`` is placed on the input of every layer after the first,
    i.e. each hidden activation vector is dropped exactly once; the raw input
    is never dropped.
    """

    def __init__(self, input_dim: int, hidden: list[int] | tuple[int, ...],
                 output_dim: int, head: str = LINEAR,
                 hidden_dropout: float = 0.0, seed: int = 0):
        if head not in (LINEAR, SOFTMAX, "dueling"):
            raise StructureError(f"unknown head {head!r}")
        if not hidden:
            raise StructureError("at least one hidden layer required")
        self.input_dim = int(input_dim)
        self.output_dim = int(output_dim)
        self.rng = np.random.default_rng(seed)
        self.layers: list[DenseLayer] = []
        self.head: DuelingHead | None = None

        prev = self.input_dim
        for i, size in enumerate(hidden):
            rate = 0.0 if i == 0 else hidden_dropout
            self.layers.append(DenseLayer.create(prev, size, RELU, rate, self.rng))
            prev = size
        if head == "dueling":
            self.head = DuelingHead(
                value=DenseLayer.create(prev, 1, LINEAR, hidden_dropout, self.rng),
                advantage=DenseLayer.create(prev, output_dim, LINEAR, hidden_dropout, self.rng),
            )
        else:
            self.layers.append(DenseLayer.create(prev, output_dim, head, hidden_dropout, self.rng))
        self._reset_optimizer()

    def _reset_optimizer(self):
        self._adam_m = [np.zeros_like(p) for p in self.parameters()]
        self._adam_v = [np.zeros_like(p) for p in self.parameters()]
        self._adam_t = 0

    @classmethod
    def from_parts(cls, layers: list[DenseLayer], head: DuelingHead | None,
                   seed: int = 0) -> "Network":
        """Assemble a network from explicit layers (snapshot loading, Q-table
        encodings). Dimension chaining is validated."""
        net = cls.__new__(cls)
        if not layers:
            raise StructureError("network needs at least one layer")
        net.layers = layers
        net.head = head
        net.input_dim = layers[0].in_dim
        net.output_dim = head.advantage.out_dim if head is not None else layers[-1].out_dim
        prev = layers[0].in_dim
        for layer in layers:
            if layer.in_dim != prev:
                raise StructureError("layer dimensions do not chain")
            prev = layer.out_dim
        if head is not None:
            if head.value.in_dim != prev or head.advantage.in_dim != prev or head.value.out_dim != 1:
                raise StructureError("dueling head dimensions do not chain")
        interior = layers if head is not None else layers[:-1]
        if any(layer.activation == SOFTMAX for layer in interior):
            raise StructureError("softmax is only valid on the output layer")
        net.rng = np.random.default_rng(seed)
        net._reset_optimizer()
        return net

    # ------------------------------------------------------------------ shape

    @property
    def head_kind(self) -> str:
        if self.head is not None:
            return "dueling"
        return self.layers[-1].activation  # linear or softmax

    def signature(self) -> tuple:
        """Architecture fingerprint used to validate copies and snapshots."""
        sig = [(l.in_dim, l.out_dim, l.activation, l.dropout_rate) for l in self.layers]
        if self.head is not None:
            for stream in (self.head.value, self.head.advantage):
                sig.append((stream.in_dim, stream.out_dim, "dueling", stream.dropout_rate))
        return tuple(sig)

    def parameters(self) -> list[np.ndarray]:
        params = []
        streams = [self.head.value, self.head.advantage] if self.head is not None else []
        for layer in self.layers + streams:
            params.append(layer.w)
            params.append(layer.b)
        return params

    # ---------------------------------------------------------------- forward

    def _dropout_mask(self, batch: int, layer: DenseLayer,
                      rng: np.random.Generator) -> np.ndarray | None:
        """Scaled keep-mask, or None when the layer draws nothing."""
        if layer.dropout_rate == 0.0:
            return None
        keep = rng.random((batch, layer.in_dim)) >= layer.dropout_rate
        return keep / (1.0 - layer.dropout_rate)

    def _run(self, x: np.ndarray, stochastic: bool, rng: np.random.Generator | None,
             want_cache: bool):
        """Batched forward shared by every public entry point.

        Routing all passes (including single-input ones, as batch 1) through
        the same matrix path keeps results bit-stable across call styles.
        """
        rng = rng if rng is not None else self.rng
        cache = [] if want_cache else None
        a = x
        for layer in self.layers:
            mask = self._dropout_mask(len(a), layer, rng) if stochastic else None
            inp = a * mask if mask is not None else a
            z = inp @ layer.w.T + layer.b
            out = _apply_activation(z, layer.activation)
            if want_cache:
                cache.append((layer, inp, mask, z))
            a = out
        if self.head is not None:
            h = a
            mask_v = self._dropout_mask(len(h), self.head.value, rng) if stochastic else None
            inp_v = h * mask_v if mask_v is not None else h
            v = inp_v @ self.head.value.w.T + self.head.value.b
            mask_a = self._dropout_mask(len(h), self.head.advantage, rng) if stochastic else None
            inp_a = h * mask_a if mask_a is not None else h
            adv = inp_a @ self.head.advantage.w.T + self.head.advantage.b
            a = v + adv - adv.mean(axis=1, keepdims=True)
            if want_cache:
                cache.append(("dueling", inp_v, mask_v, inp_a, mask_a))
        return a, cache

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise StructureError(
                f"input shape {x.shape} does not match input_dim {self.input_dim}")
        if not np.isfinite(x).all():
            raise InvalidInputError("non-finite network input")
        return x

    def forward(self, x: np.ndarray, mode: str = "deterministic",
                rng: np.random.Generator | None = None) -> np.ndarray:
        """One pass over a single input vector.

        ``mode="deterministic"`` ignores dropout entirely; ``"stochastic"``
        samples a fresh mask per dropout layer.
        """
        if mode not in ("deterministic", "stochastic"):
            raise ValueError(f"unknown mode {mode!r}")
        x = self._check_input(x)
        out, _ = self._run(x[None, :], mode == "stochastic", rng, want_cache=False)
        return out[0]

    def forward_batch(self, xs: np.ndarray) -> np.ndarray:
        """Deterministic pass over a (batch, input_dim) matrix."""
        return self._run(np.asarray(xs, dtype=float), False, None, want_cache=False)[0]

    def mc_forward(self, x: np.ndarray, n_passes: int,
                   rng: np.random.Generator | None = None) -> np.ndarray:
        """Stacked stochastic passes: row i of the result is pass i.

        All passes share one batched matrix product per layer; the mask
        matrix for each dropout layer covers every pass at once, drawn in
        the row-major order documented in the module docstring.
        """
        if n_passes < 1:
            raise ValueError("n_passes must be >= 1")
        x = self._check_input(x)
        tiled = np.tile(x, (n_passes, 1))
        out, _ = self._run(tiled, True, rng, want_cache=False)
        return out

    # ----------------------------------------------------------------- train

    def _loss_and_grad(self, out: np.ndarray, targets: np.ndarray, loss: str):
        """Mean loss over the batch plus dL/d(pre-activation of the head).

        mse: mean over batch and output dims of squared error (linear head).
        cross_entropy: mean over batch of -sum(target * log p) (softmax head).
        For softmax the returned gradient is already w.r.t. the logits.
        """
        batch = len(out)
        if loss == "mse":
            diff = out - targets
            per_sample = (diff * diff).mean(axis=1)
            return per_sample.mean(), 2.0 * diff / diff.size, per_sample
        if loss == "cross_entropy":
            logp = np.log(np.clip(out, 1e-300, None))
            per_sample = -(targets * logp).sum(axis=1)
            return per_sample.mean(), (out - targets) / batch, per_sample
        raise ValueError(f"unknown loss {loss!r}")

    def _backprop(self, cache: list, d_out: np.ndarray) -> list[np.ndarray]:
        """Gradients in ``parameters()`` order given dL/d(head pre-activation)."""
        grads_layers: list[tuple[np.ndarray, np.ndarray]] = []
        grads_streams: list[tuple[np.ndarray, np.ndarray]] = []
        g = d_out
        if self.head is not None:
            tag, inp_v, mask_v, inp_a, mask_a = cache[-1]
            assert tag == "dueling"
            # Q = v + a - mean(a): dv sums over actions, da is mean-centered.
            dv = g.sum(axis=1, keepdims=True)
            da = g - g.mean(axis=1, keepdims=True)
            grads_streams = [
                (dv.T @ inp_v, dv.sum(axis=0)),
                (da.T @ inp_a, da.sum(axis=0)),
            ]
            gh_v = dv @ self.head.value.w
            gh_a = da @ self.head.advantage.w
            if mask_v is not None:
                gh_v = gh_v * mask_v
            if mask_a is not None:
                gh_a = gh_a * mask_a
            g = gh_v + gh_a
            cache = cache[:-1]
        for layer, inp, mask, z in reversed(cache):
            # relu layers need dz = g * relu'(z); for linear g is already
            # dL/dz and for a softmax output g arrives w.r.t. the logits.
            if layer.activation == RELU:
                g = g * (z > 0.0)
            dw = g.T @ inp
            db = g.sum(axis=0)
            grads_layers.append((dw, db))
            g = g @ layer.w
            if mask is not None:
                g = g * mask
        grads_layers.reverse()
        flat: list[np.ndarray] = []
        for dw, db in grads_layers + grads_streams:
            flat.append(dw)
            flat.append(db)
        return flat

    def _check_loss_head(self, loss: str):
        kind = self.head_kind
        if loss == "cross_entropy" and kind != SOFTMAX:
            raise StructureError("cross_entropy requires a softmax head")
        if loss == "mse" and kind == SOFTMAX:
            raise StructureError("mse is not defined for a softmax head here")

    def train_step(self, batch: Minibatch, loss: str, learning_rate: float,
                   rng: np.random.Generator | None = None) -> float:
        """One Adam step on the batch; returns the pre-step mean loss.

        Dropout is active during the training forward pass.
        """
        self._check_loss_head(loss)
        if batch.inputs.shape[1] != self.input_dim or batch.targets.shape[1] != self.output_dim:
            raise StructureError("batch dimensions do not match network")
        out, cache = self._run(batch.inputs, True, rng, want_cache=True)
        loss_val, d_out, per_sample = self._loss_and_grad(out, batch.targets, loss)
        if not np.isfinite(loss_val):
            bad = int(np.flatnonzero(~np.isfinite(per_sample))[0])
            raise TrainingDivergence(f"non-finite loss at batch index {bad}", bad)
        grads = self._backprop(cache, d_out)
        self._adam_t += 1
        t = self._adam_t
        for i, (p, g) in enumerate(zip(self.parameters(), grads)):
            self._adam_m[i] = ADAM_BETA1 * self._adam_m[i] + (1 - ADAM_BETA1) * g
            self._adam_v[i] = ADAM_BETA2 * self._adam_v[i] + (1 - ADAM_BETA2) * g * g
            m_hat = self._adam_m[i] / (1 - ADAM_BETA1 ** t)
            v_hat = self._adam_v[i] / (1 - ADAM_BETA2 ** t)
            p -= learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        return float(loss_val)

    def gradient_check(self, batch: Minibatch, loss: str) -> float:
        """Max relative error between analytic and central-difference grads.

        Dropout is disabled on both routes so the comparison is deterministic.
        """
        self._check_loss_head(loss)
        out, cache = self._run(batch.inputs, False, None, want_cache=True)
        _, d_out, _ = self._loss_and_grad(out, batch.targets, loss)
        analytic = self._backprop(cache, d_out)

        step = 1e-5
        worst = 0.0
        for p, g in zip(self.parameters(), analytic):
            flat_p = p.ravel()
            flat_g = g.ravel()
            for i in range(flat_p.size):
                orig = flat_p[i]
                flat_p[i] = orig + step
                up, _, _ = self._loss_and_grad(
                    self._run(batch.inputs, False, None, want_cache=False)[0],
                    batch.targets, loss)
                flat_p[i] = orig - step
                down, _, _ = self._loss_and_grad(
                    self._run(batch.inputs, False, None, want_cache=False)[0],
                    batch.targets, loss)
                flat_p[i] = orig
                numeric = (up - down) / (2 * step)
                denom = max(abs(flat_g[i]) + abs(numeric), 1e-8)
                worst = max(worst, abs(flat_g[i] - numeric) / denom)
        return worst


def copy_params(src: Network, dst: Network) -> None:
    """Copy all weights/biases from src to dst; dst optimizer state untouched."""
    if src.signature() != dst.signature():
        raise StructureError("cannot copy parameters between different architectures")
    for p_src, p_dst in zip(src.parameters(), dst.parameters()):
        np.copyto(p_dst, p_src)


# ------------------------------------------------------------------ snapshot
#
# Flat little-endian binary: magic "ADVNET1", uint32 layer count, then per
# layer uint32 in_dim, uint32 out_dim, uint32 activation code, float32
# dropout rate; then per layer row-major float64 weights followed by biases.
# A dueling head is stored as two trailing layers with codes 3 (value) and
# 4 (advantage).


def _snapshot_entries(net: Network) -> list[tuple[DenseLayer, int]]:
    entries = [(l, _ACTIVATION_CODES[l.activation]) for l in net.layers]
    if net.head is not None:
        entries.append((net.head.value, _DUELING_VALUE_CODE))
        entries.append((net.head.advantage, _DUELING_ADVANTAGE_CODE))
    return entries


def save_network(net: Network, path: str) -> None:
    entries = _snapshot_entries(net)
    with open(path, "wb") as fh:
        fh.write(_SNAPSHOT_MAGIC)
        fh.write(struct.pack("<I", len(entries)))
        for layer, code in entries:
            fh.write(struct.pack("<IIIf", layer.in_dim, layer.out_dim, code,
                                 layer.dropout_rate))
        for layer, _ in entries:
            fh.write(np.ascontiguousarray(layer.w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(layer.b, dtype="<f8").tobytes())


def load_network(path: str, seed: int = 0) -> Network:
    with open(path, "rb") as fh:
        magic = fh.read(len(_SNAPSHOT_MAGIC))
        if magic != _SNAPSHOT_MAGIC:
            raise StructureError(f"bad snapshot magic in {path!r}")
        (count,) = struct.unpack("<I", fh.read(4))
        if count == 0:
            raise StructureError("snapshot has no layers")
        headers = [struct.unpack("<IIIf", fh.read(16)) for _ in range(count)]
        blobs = []
        for in_dim, out_dim, _, _ in headers:
            w = np.frombuffer(fh.read(8 * in_dim * out_dim), dtype="<f8").reshape(out_dim, in_dim)
            b = np.frombuffer(fh.read(8 * out_dim), dtype="<f8")
            blobs.append((w.copy(), b.copy()))

    code_to_name = {v: k for k, v in _ACTIVATION_CODES.items()}
    codes = [h[2] for h in headers]
    dueling = count >= 3 and codes[-2:] == [_DUELING_VALUE_CODE, _DUELING_ADVANTAGE_CODE]

    def build(idx: int, activation: str) -> DenseLayer:
        w, b = blobs[idx]
        return DenseLayer(w=w, b=b, activation=activation,
                          dropout_rate=float(headers[idx][3]))

    head = None
    body_count = count
    if dueling:
        body_count = count - 2
        head = DuelingHead(value=build(count - 2, LINEAR),
                           advantage=build(count - 1, LINEAR))
    layers = []
    for i in range(body_count):
        name = code_to_name.get(codes[i])
        if name is None:
            raise StructureError(f"unknown activation code {codes[i]} in snapshot")
        layers.append(build(i, name))
    return Network.from_parts(layers, head, seed=seed)
