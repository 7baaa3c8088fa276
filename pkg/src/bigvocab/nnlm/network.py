"""Recurrent language model: embedding, LSTM, highway stack, output layer.

All arithmetic is plain numpy with hand-written backpropagation. The
parameter dtype is float32 by default; a float64 network is used for
gradient checks and for exact lattice scoring.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..corpus import BOS, EOS, UNK
from .outputs import (BlackOutOutput, HierarchicalSoftmaxOutput, NCEOutput, Partition, SoftmaxOutput,
                      build_hsoftmax_partition)
from .sampling import noise_distribution

_logger = logging.getLogger(__name__)

OUTPUT_KINDS = ("softmax", "hsoftmax", "nce", "blackout")
LARGE_VOCABULARY = 100_000


class NetworkError(ValueError):
    pass


@dataclass
class NetworkConfig:
    embedding_dim: int = 500
    hidden_dim: int = 1500
    num_highway_layers: int = 4
    bottleneck_dim: Optional[int] = None
    output_kind: str = "softmax"
    dropout_rate: float = 0.2
    sequence_length: int = 25
    batch_sequences: Optional[int] = None
    carry_state: bool = False
    noise_beta: float = 0.5
    num_noise: int = 500
    unit_kind: str = "word"

    def validate(self, vocab_size: int):
        for name in ("embedding_dim", "hidden_dim", "sequence_length"):
            if getattr(self, name) <= 0:
                raise NetworkError("%s must be positive" % name)
        if self.num_highway_layers < 0:
            raise NetworkError("num_highway_layers must be >= 0")
        if self.bottleneck_dim is not None and self.bottleneck_dim <= 0:
            raise NetworkError("bottleneck_dim must be positive")
        if self.output_kind not in OUTPUT_KINDS:
            raise NetworkError("output_kind must be one of %s" % ", ".join(OUTPUT_KINDS))
        if not 0.0 <= self.dropout_rate < 1.0:
            raise NetworkError("dropout_rate must lie in [0, 1)")
        if not 0.0 < self.noise_beta <= 1.0 or self.num_noise < 1:
            raise NetworkError("noise_beta must lie in (0, 1] and num_noise be >= 1")
        if vocab_size < 1:
            raise NetworkError("empty vocabulary")

    def resolved_batch_sequences(self) -> int:
        if self.batch_sequences:
            return self.batch_sequences
        return 32 if self.unit_kind == "class" else 24

    def resolved_bottleneck(self, vocab_size: int) -> Optional[int]:
        if self.bottleneck_dim is None and vocab_size > LARGE_VOCABULARY:
            return 500
        return self.bottleneck_dim

    def to_dict(self) -> dict:
        return asdict(self)


class NNLMVocabulary:
    """Output units (a shortlist plus ``</s>`` and ``<unk>``) and input units (plus ``<s>``).

    Words outside the shortlist are out-of-shortlist (OOS): they share the
    ``<unk>`` output and are scored with a unigram distribution over the
    OOS words.
    """

    def __init__(self, units, counts, oos_counts=None):
        units = [u for u in units if u not in (BOS, EOS, UNK)]
        self.units = units + [EOS, UNK]
        self.index = {u: i for i, u in enumerate(self.units)}
        self.counts = np.array([counts.get(u, 0) for u in self.units], dtype=np.float64)
        self.oos_counts = dict(oos_counts or {})
        total = sum(self.oos_counts.values())
        self.oos_logprob = {w: math.log(c / total) for w, c in self.oos_counts.items() if c > 0}

    @property
    def size(self) -> int:
        return len(self.units)

    @property
    def input_size(self) -> int:
        return len(self.units) + 1

    @property
    def bos_id(self) -> int:
        return len(self.units)

    @property
    def eos_id(self) -> int:
        return self.index[EOS]

    @property
    def unk_id(self) -> int:
        return self.index[UNK]

    def id(self, unit: str) -> int:
        if unit == BOS:
            return self.bos_id
        return self.index.get(unit, self.unk_id)

    def __contains__(self, unit):
        return unit in self.index

    @classmethod
    def from_counts(cls, counts: dict, shortlist_size: Optional[int] = None, eos_count: int = 0):
        ranked = sorted((w for w in counts if w not in (BOS, EOS, UNK)), key=lambda w: (-counts[w], w))
        keep = ranked if shortlist_size is None else ranked[:shortlist_size]
        oos = {w: counts[w] for w in ranked[len(keep):]}
        out_counts = {w: counts[w] for w in keep}
        out_counts[EOS] = eos_count
        out_counts[UNK] = sum(oos.values()) + counts.get(UNK, 0)
        return cls(keep, out_counts, oos)

    @classmethod
    def from_corpus(cls, corpus, shortlist_size: Optional[int] = None):
        counts = {}
        for sentence in corpus:
            for w in sentence:
                counts[w] = counts.get(w, 0) + 1
        return cls.from_counts(counts, shortlist_size, eos_count=len(corpus))

    def to_dict(self) -> dict:
        return {"units": self.units, "counts": self.counts.tolist(), "oos_counts": self.oos_counts}

    @classmethod
    def from_dict(cls, d):
        return cls(d["units"], dict(zip(d["units"], d["counts"])), d.get("oos_counts"))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _glorot(rng, fan_in, fan_out, shape, dtype):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Network:
    """Parameters plus forward and backward passes.

    Parameter names: ``embedding``, ``lstm.W`` [E, 4H], ``lstm.U`` [H, 4H],
    ``lstm.b`` [4H] (gate order input, forget, output, candidate),
    ``highway<i>.W``/``.b`` (transform) and ``.Wg``/``.bg`` (gate),
    ``bottleneck.W``/``.b``, and the output layer's parameters.
    """

    def __init__(self, config: NetworkConfig, vocab: NNLMVocabulary, params: dict,
                 partition: Optional[Partition] = None):
        self.config = config
        self.vocab = vocab
        self.params = params
        self.dtype = params["embedding"].dtype
        self.partition = partition
        self.output = self._make_output()

    def _make_output(self):
        kind, v = self.config.output_kind, self.vocab.size
        if kind == "softmax":
            return SoftmaxOutput(v)
        if kind == "hsoftmax":
            if self.partition is None:
                self.partition = build_hsoftmax_partition(self.vocab.units, self.vocab.counts)
            return HierarchicalSoftmaxOutput(self.partition)
        log_q = np.log(noise_distribution(self.vocab.counts, self.config.noise_beta))
        cls = NCEOutput if kind == "nce" else BlackOutOutput
        return cls(v, log_q, self.config.num_noise)

    @property
    def hidden_dim(self):
        return self.params["lstm.U"].shape[0]

    @property
    def feature_dim(self):
        return self.params["output.W"].shape[0]

    def num_highway(self):
        return sum(1 for k in self.params if k.startswith("highway") and k.endswith(".Wg"))

    def astype(self, dtype) -> "Network":
        params = {k: v.astype(dtype) for k, v in self.params.items()}
        return Network(self.config, self.vocab, params, self.partition)

    def copy(self) -> "Network":
        return Network(self.config, self.vocab, {k: v.copy() for k, v in self.params.items()}, self.partition)

    # forward / backward

    def zero_state(self, batch: int):
        h = np.zeros((batch, self.hidden_dim), dtype=self.dtype)
        return h, h.copy()

    def _dropout(self, x, rng, cache_list):
        rate = self.config.dropout_rate
        if rng is None or rate == 0.0:
            cache_list.append(None)
            return x
        mask = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
        cache_list.append(mask)
        return x * mask

    def lstm_step(self, x, h, c):
        """One LSTM step on already-embedded input; returns (h, c, cache)."""
        p = self.params
        H = self.hidden_dim
        z = x @ p["lstm.W"] + h @ p["lstm.U"] + p["lstm.b"]
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        o = _sigmoid(z[:, 2 * H:3 * H])
        g = np.tanh(z[:, 3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        return o * tc, c_new, (i, f, o, g, tc)

    def features_from_hidden(self, h, rng=None, masks=None):
        """Highway stack and optional bottleneck applied to LSTM outputs [N, H]."""
        p = self.params
        masks = [] if masks is None else masks
        caches = []
        x = h
        for layer in range(self.num_highway()):
            pre = "highway%d." % layer
            t = np.tanh(x @ p[pre + "W"] + p[pre + "b"])
            g = _sigmoid(x @ p[pre + "Wg"] + p[pre + "bg"])
            y = g * t + (1.0 - g) * x
            caches.append((x, t, g))
            x = self._dropout(y, rng, masks)
        bottleneck = None
        if "bottleneck.W" in p:
            inp = x
            x = np.tanh(inp @ p["bottleneck.W"] + p["bottleneck.b"])
            bottleneck = (inp, x)
            x = self._dropout(x, rng, masks)
        return x, (caches, bottleneck, masks)

    def forward(self, inputs, state=None, rng=None):
        """Run the network over ``inputs`` [B, T] of input ids.

        Recurrent state is reset to zero wherever the input is ``<s>``
        unless the config carries state across sentences. ``rng`` enables
        dropout. Returns ``(features [B*T, D], new_state, cache)``.
        """
        inputs = np.asarray(inputs)
        if inputs.ndim != 2:
            raise NetworkError("inputs must be a [batch, steps] id matrix")
        if inputs.size and (inputs.min() < 0 or inputs.max() >= self.vocab.input_size):
            raise NetworkError("input id outside [0, %d)" % self.vocab.input_size)
        B, T = inputs.shape
        h, c = self.zero_state(B) if state is None else state
        emb_masks, lstm_masks = [], []
        x_all = self.params["embedding"][inputs]  # [B, T, E]
        x_all = self._dropout(x_all, rng, emb_masks)
        if self.config.carry_state:
            keep = np.ones((B, T, 1), dtype=self.dtype)
        else:
            keep = (inputs != self.vocab.bos_id).astype(self.dtype)[:, :, None]
        steps = []
        hs = np.empty((B, T, self.hidden_dim), dtype=self.dtype)
        for t in range(T):
            h_in, c_in = h * keep[:, t], c * keep[:, t]
            h, c, gates = self.lstm_step(x_all[:, t], h_in, c_in)
            steps.append((h_in, c_in, c, gates))
            hs[:, t] = h
        hd = self._dropout(hs.reshape(B * T, -1), rng, lstm_masks)
        feats, fcache = self.features_from_hidden(hd, rng)
        cache = (inputs, x_all, keep, steps, emb_masks, lstm_masks, fcache)
        return feats, (h, c), cache

    def backward(self, dfeat, cache):
        """Gradients of all non-output parameters given dLoss/dfeatures."""
        p = self.params
        inputs, x_all, keep, steps, emb_masks, lstm_masks, (hw_caches, bottleneck, masks) = cache
        B, T = inputs.shape
        H = self.hidden_dim
        grads = {}
        dx = dfeat
        mask_iter = list(masks)
        if bottleneck is not None:
            m = mask_iter.pop()
            if m is not None:
                dx = dx * m
            inp, out = bottleneck
            dz = dx * (1.0 - out ** 2)
            grads["bottleneck.W"] = inp.T @ dz
            grads["bottleneck.b"] = dz.sum(axis=0)
            dx = dz @ p["bottleneck.W"].T
        for layer in reversed(range(len(hw_caches))):
            m = mask_iter.pop()
            if m is not None:
                dx = dx * m
            pre = "highway%d." % layer
            x, t, g = hw_caches[layer]
            dt = dx * g * (1.0 - t ** 2)
            dg = dx * (t - x) * g * (1.0 - g)
            grads[pre + "W"] = x.T @ dt
            grads[pre + "b"] = dt.sum(axis=0)
            grads[pre + "Wg"] = x.T @ dg
            grads[pre + "bg"] = dg.sum(axis=0)
            dx = dx * (1.0 - g) + dt @ p[pre + "W"].T + dg @ p[pre + "Wg"].T
        if lstm_masks[0] is not None:
            dx = dx * lstm_masks[0]
        dhs = dx.reshape(B, T, H)
        gW = np.zeros_like(p["lstm.W"])
        gU = np.zeros_like(p["lstm.U"])
        gb = np.zeros_like(p["lstm.b"])
        dxs = np.empty_like(x_all)
        dh_next = np.zeros((B, H), dtype=self.dtype)
        dc_next = np.zeros((B, H), dtype=self.dtype)
        for t in reversed(range(T)):
            h_in, c_in, c, (i, f, o, g, tc) = steps[t]
            dh = dhs[:, t] + dh_next
            do = dh * tc
            dc = dc_next + dh * o * (1.0 - tc ** 2)
            di = dc * g
            dg_ = dc * i
            df = dc * c_in
            dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg_ * (1 - g ** 2)], axis=1)
            gW += x_all[:, t].T @ dz
            gU += h_in.T @ dz
            gb += dz.sum(axis=0)
            dxs[:, t] = dz @ p["lstm.W"].T
            dh_next = (dz @ p["lstm.U"].T) * keep[:, t]
            dc_next = dc * f * keep[:, t]
        grads["lstm.W"], grads["lstm.U"], grads["lstm.b"] = gW, gU, gb
        if emb_masks[0] is not None:
            dxs = dxs * emb_masks[0]
        gE = np.zeros_like(p["embedding"])
        np.add.at(gE, inputs.ravel(), dxs.reshape(B * T, -1))
        grads["embedding"] = gE
        return grads

    def loss_and_grads(self, inputs, targets, weights=None, state=None, rng=None, noise=None):
        """Weighted summed loss over a batch and gradients of every parameter."""
        feats, new_state, cache = self.forward(inputs, state, rng)
        targets = np.asarray(targets).ravel()
        weights = np.ones(len(targets), dtype=self.dtype) if weights is None \
            else np.asarray(weights, dtype=self.dtype).ravel()
        loss, dfeat, grads = self.output.loss(self.params, feats, targets, weights, noise)
        grads.update(self.backward(dfeat.astype(self.dtype), cache))
        return loss, {k: g.astype(self.dtype) for k, g in grads.items()}, new_state

    def log_probs(self, inputs, state=None):
        """Normalized natural-log output distributions [B, T, V], no dropout."""
        feats, new_state, _ = self.forward(inputs, state)
        B, T = np.asarray(inputs).shape
        return self.output.log_probs(self.params, feats).reshape(B, T, -1), new_state


def init_network(config: NetworkConfig, vocab: NNLMVocabulary, seed: int = 0, dtype=np.float32,
                 partition: Optional[Partition] = None) -> Network:
    """Fan-based uniform weights, zero biases, forget-gate bias one.

    Sampled output layers start their bias at the log unigram
    distribution of the output units (zero counts floored at half a
    count).
    """
    v = vocab.size
    config.validate(v)
    rng = np.random.default_rng(seed)
    E, H = config.embedding_dim, config.hidden_dim
    params = {"embedding": _glorot(rng, vocab.input_size, E, (vocab.input_size, E), dtype)}
    params["lstm.W"] = np.concatenate([_glorot(rng, E, H, (E, H), dtype) for _ in range(4)], axis=1)
    params["lstm.U"] = np.concatenate([_glorot(rng, H, H, (H, H), dtype) for _ in range(4)], axis=1)
    b = np.zeros(4 * H, dtype=dtype)
    b[H:2 * H] = 1.0
    params["lstm.b"] = b
    for layer in range(config.num_highway_layers):
        pre = "highway%d." % layer
        params[pre + "W"] = _glorot(rng, H, H, (H, H), dtype)
        params[pre + "b"] = np.zeros(H, dtype=dtype)
        params[pre + "Wg"] = _glorot(rng, H, H, (H, H), dtype)
        params[pre + "bg"] = np.zeros(H, dtype=dtype)
    dim = H
    bottleneck = config.resolved_bottleneck(v)
    if bottleneck:
        params["bottleneck.W"] = _glorot(rng, H, bottleneck, (H, bottleneck), dtype)
        params["bottleneck.b"] = np.zeros(bottleneck, dtype=dtype)
        dim = bottleneck
    net = Network(config, vocab, params, partition)
    for name, shape in net.output.param_shapes(dim).items():
        if len(shape) == 2:
            params[name] = _glorot(rng, shape[0], shape[1], shape, dtype)
        else:
            params[name] = np.zeros(shape, dtype=dtype)
    if config.output_kind in ("nce", "blackout"):
        counts = np.maximum(vocab.counts, 0.5)
        nonzero = vocab.counts > 0
        total = vocab.counts[nonzero].sum() if nonzero.any() else counts.sum()
        params["output.b"] = np.log(counts / total).astype(dtype)
    return net
