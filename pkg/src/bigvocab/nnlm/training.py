"""Adagrad training with truncated backpropagation through time.

Each source corpus (identified by its tag) is turned into its own set of
parallel token streams every epoch, and every mini-batch holds data
from one tag only. That keeps corpus weighting exact: a batch's
gradient is scaled by its tag's weight, and a tag with weight zero
leaves the parameters and the Adagrad state untouched.
"""

import logging
import math
import time
import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..corpus import BOS, EOS, TokenizedCorpus
from .network import Network
from .sampling import NoiseSampler

_logger = logging.getLogger(__name__)

WEIGHTING_MODES = ("uniform", "sampling", "update_weight")
DEFAULT_SAMPLING_FRACTION = 0.2
DEFAULT_UPDATE_WEIGHT = 0.4
UPDATE_WEIGHT_LR_FACTOR = 1.25


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainingConfig:
    learning_rate: float = 0.1
    epsilon: float = 1e-10
    max_epochs: int = 20
    patience: int = 3
    max_seconds: Optional[float] = None
    weighting: str = "uniform"
    # tag -> fraction (sampling) or gradient factor (update_weight); tags
    # named in ``downweighted_tags`` get the default value unless listed
    tag_values: dict = field(default_factory=dict)
    downweighted_tags: tuple = ("web",)
    seed: int = 0
    trainable: Optional[tuple] = None

    def effective_learning_rate(self) -> float:
        if self.weighting == "update_weight":
            return self.learning_rate * UPDATE_WEIGHT_LR_FACTOR
        return self.learning_rate

    def tag_value(self, tag: str) -> float:
        if tag in self.tag_values:
            return float(self.tag_values[tag])
        if tag in self.downweighted_tags:
            return DEFAULT_SAMPLING_FRACTION if self.weighting == "sampling" else DEFAULT_UPDATE_WEIGHT
        return 1.0


class Adagrad:
    """theta <- theta - lr * g / (sqrt(sum g^2) + eps)."""

    def __init__(self, params: dict, learning_rate: float, epsilon: float = 1e-10, names=None):
        self.learning_rate = learning_rate
        self.epsilon = epsilon
        self.names = list(params) if names is None else list(names)
        self.accumulators = {k: np.zeros_like(params[k]) for k in self.names}

    def update(self, params: dict, grads: dict):
        for k in self.names:
            g = grads[k]
            acc = self.accumulators[k]
            acc += g * g
            params[k] -= (self.learning_rate * g / (np.sqrt(acc) + self.epsilon)).astype(params[k].dtype)


def _tag_seed(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def sentence_stream(network: Network, sentences):
    """Input and target id arrays for ``<s> w1..wn`` -> ``w1..wn </s>``."""
    vocab = network.vocab
    inputs, targets = [], []
    for s in sentences:
        ids = [vocab.id(w) for w in s]
        inputs.append(vocab.bos_id)
        inputs.extend(ids)
        targets.extend(ids)
        targets.append(vocab.eos_id)
    return np.array(inputs, dtype=np.int64), np.array(targets, dtype=np.int64)


def make_batches(inputs, targets, batch_sequences: int, sequence_length: int):
    """Cut a stream into ``batch_sequences`` parallel rows and T-step windows.

    Padding (input ``<s>``-free filler with weight 0) fills the last
    window. Yields ``(inputs, targets, mask)`` each [B, T].
    """
    n = len(inputs)
    if n == 0:
        return []
    rows = min(batch_sequences, n)
    per_row = math.ceil(n / rows)
    steps = math.ceil(per_row / sequence_length) * sequence_length
    shape = (rows, steps)
    pad_in = np.zeros(rows * steps, dtype=np.int64)
    pad_tg = np.zeros(rows * steps, dtype=np.int64)
    mask = np.zeros(rows * steps, dtype=bool)
    # row r holds stream[r*per_row:(r+1)*per_row]
    for r in range(rows):
        seg = slice(r * per_row, min((r + 1) * per_row, n))
        length = seg.stop - seg.start
        if length <= 0:
            continue
        pad_in[r * steps:r * steps + length] = inputs[seg]
        pad_tg[r * steps:r * steps + length] = targets[seg]
        mask[r * steps:r * steps + length] = True
    pad_in, pad_tg, mask = pad_in.reshape(shape), pad_tg.reshape(shape), mask.reshape(shape)
    return [(pad_in[:, t:t + sequence_length], pad_tg[:, t:t + sequence_length], mask[:, t:t + sequence_length])
            for t in range(0, steps, sequence_length)]


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_ppl: float
    tokens: int
    seconds: float


@dataclass
class TrainingResult:
    network: Network
    history: list
    best_epoch: int
    optimizer: Adagrad


def _epoch_batches(network: Network, corpus: TokenizedCorpus, config: TrainingConfig, epoch: int):
    """Deterministic list of (tag, index, batch) for one epoch."""
    B = network.config.resolved_batch_sequences()
    T = network.config.sequence_length
    per_tag = []
    for tag_index, tag in enumerate(corpus.tags()):
        sentences = list(corpus.subset(tag).sentences)
        rng = np.random.default_rng([config.seed, epoch, _tag_seed(tag)])
        order = rng.permutation(len(sentences))
        if config.weighting == "sampling":
            keep = int(round(config.tag_value(tag) * len(sentences)))
            order = order[:keep]
        inputs, targets = sentence_stream(network, [sentences[i] for i in order])
        batches = make_batches(inputs, targets, B, T)
        per_tag.append((tag, batches))
    # interleave proportionally to each tag's number of batches
    schedule = []
    for tag, batches in per_tag:
        k = len(batches)
        for i, batch in enumerate(batches):
            schedule.append(((i + 0.5) / k, tag, i, batch))
    schedule.sort(key=lambda item: (item[0], item[1]))
    return [(tag, i, batch) for _, tag, i, batch in schedule]


def train(network: Network, corpus: TokenizedCorpus, dev: TokenizedCorpus,
          config: Optional[TrainingConfig] = None, callback=None) -> TrainingResult:
    """Train in place; returns the parameters with the best dev perplexity.

    Stops after ``patience`` epochs without dev improvement, after
    ``max_epochs`` or when ``max_seconds`` of wall clock have passed.
    """
    from .scoring import NNLMScorer

    config = config or TrainingConfig()
    if config.weighting not in WEIGHTING_MODES:
        raise TrainingError("weighting must be one of %s" % ", ".join(WEIGHTING_MODES))
    if len(dev) == 0:
        raise TrainingError("a development corpus is required")
    names = list(network.params) if config.trainable is None else list(config.trainable)
    unknown = [n for n in names if n not in network.params]
    if unknown:
        raise TrainingError("unknown parameters: %s" % ", ".join(unknown))
    opt = Adagrad(network.params, config.effective_learning_rate(), config.epsilon, names)
    sampler = None
    if network.config.output_kind in ("nce", "blackout"):
        sampler = NoiseSampler(network.vocab.counts, network.config.noise_beta, network.config.num_noise)
    start = time.monotonic()
    history = []
    best_ppl, best_epoch, best_params = math.inf, 0, None
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        t0 = time.monotonic()
        states = {}
        total_loss, total_tokens = 0.0, 0
        for tag, index, (inputs, targets, mask) in _epoch_batches(network, corpus, config, epoch):
            weight = config.tag_value(tag) if config.weighting == "update_weight" else 1.0
            rng = np.random.default_rng([config.seed, epoch, _tag_seed(tag), index])
            noise = sampler.sample(rng) if sampler is not None else None
            ntok = int(mask.sum())
            token_weights = mask.astype(network.dtype) * (weight / max(ntok, 1))
            loss, grads, state = network.loss_and_grads(inputs, targets, token_weights, states.get(tag), rng, noise)
            if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingError("non-finite loss or gradient in epoch %d, corpus %r, batch %d"
                                    % (epoch, tag, index))
            states[tag] = state
            if weight != 0.0:
                opt.update(network.params, grads)
            total_loss += loss * ntok / weight if weight else 0.0
            total_tokens += ntok if weight else 0
            if config.max_seconds is not None and time.monotonic() - start > config.max_seconds:
                break
        for k, v in network.params.items():
            if not np.all(np.isfinite(v)):
                raise TrainingError("parameter %s became non-finite in epoch %d" % (k, epoch))
        dev_ppl = NNLMScorer(network).perplexity(dev)
        record = EpochRecord(epoch, total_loss / max(total_tokens, 1), dev_ppl, total_tokens,
                             time.monotonic() - t0)
        history.append(record)
        _logger.info("epoch %d: train loss %.4f, dev ppl %.3f (%.1fs)", epoch, record.train_loss, dev_ppl,
                     record.seconds)
        if callback is not None:
            callback(record)
        if dev_ppl < best_ppl:
            best_ppl, best_epoch = dev_ppl, epoch
            best_params = {k: v.copy() for k, v in network.params.items()}
            stale = 0
        else:
            stale += 1
        if stale >= config.patience:
            break
        if config.max_seconds is not None and time.monotonic() - start > config.max_seconds:
            _logger.info("wall clock limit reached")
            break
    if best_params is not None:
        for k, v in best_params.items():
            network.params[k][...] = v
    return TrainingResult(network, history, best_epoch, opt)
