"""Linear interpolation of language models with EM-estimated weights."""

import logging
import math
from typing import Sequence

import numpy as np

from ..corpus import BOS, CorpusError, TokenizedCorpus
from .evaluate import OOV_POLICIES

_logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-99


class MixtureModel:
    """P(w|h) = sum_k weight_k P_k(w|h).

    The unit vocabulary is the intersection of the components'
    vocabularies; anything else scores as ``<unk>``.
    """

    def __init__(self, components: Sequence, weights, history=None):
        weights = np.asarray(weights, dtype=np.float64)
        if len(components) == 0 or weights.shape != (len(components),):
            raise ValueError("need one weight per component")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must lie on the simplex, got %s" % weights)
        kinds = {getattr(c, "unit_kind", "word") for c in components}
        if len(kinds) > 1:
            raise ValueError("cannot mix unit kinds %s" % sorted(kinds))
        self.components = list(components)
        self.weights = weights
        self.unit_kind = kinds.pop()
        self.order = max(getattr(c, "order", 1) for c in components)
        self.units = frozenset.intersection(*(frozenset(c.units) for c in components))
        self.history = list(history or [])

    def map_token(self, word: str) -> str:
        if word == BOS or word in self.units:
            return word
        return "<unk>"

    def logprob(self, word: str, history: Sequence[str] = ()) -> float:
        word = self.map_token(word)
        history = [self.map_token(w) for w in history]
        p = sum(lam * 10.0 ** c.logprob(word, history) for lam, c in zip(self.weights, self.components))
        return math.log10(max(p, PROB_FLOOR))

    def sentence_logprobs(self, sentence: Sequence[str]) -> list:
        sentence = [self.map_token(w) for w in sentence]
        probs = np.array([c.sentence_logprobs(sentence) for c in self.components])
        mixed = self.weights @ (10.0 ** probs)
        return list(np.log10(np.maximum(mixed, PROB_FLOOR)))


def component_probabilities(components: Sequence, dev: TokenizedCorpus, oov_policy: str = "exclude"):
    """Matrix of P_k for every scored dev event, shape (events, components)."""
    if oov_policy not in OOV_POLICIES:
        raise ValueError("oov_policy must be one of %s" % ", ".join(OOV_POLICIES))
    units = frozenset.intersection(*(frozenset(c.units) for c in components))
    cols = []
    mask = []
    for sentence in dev:
        mapped = [w if w in units else "<unk>" for w in sentence]
        cols.append(np.array([c.sentence_logprobs(mapped) for c in components]).T)
        if oov_policy == "exclude":
            mask.extend(w in units for w in sentence)
        else:
            mask.extend([True] * len(sentence))
        mask.append(True)
    if not cols:
        raise CorpusError("empty development corpus")
    probs = 10.0 ** np.vstack(cols)[np.asarray(mask)]
    if probs.size == 0:
        raise CorpusError("no scored development events")
    if np.any(probs < PROB_FLOOR):
        _logger.warning("%d zero probabilities floored at %g", int((probs < PROB_FLOOR).sum()), PROB_FLOOR)
        probs = np.maximum(probs, PROB_FLOOR)
    return probs


def em_weights(probs: np.ndarray, init_weights=None, tolerance: float = 1e-7, max_iterations: int = 1000):
    """EM for interpolation weights given per-event component probabilities.

    Returns ``(weights, loglik_history)``; the log-likelihood (natural
    log, summed over events) is recorded before the first update and
    after each one. Iteration stops when the improvement drops below
    ``tolerance``.
    """
    probs = np.asarray(probs, dtype=np.float64)
    k = probs.shape[1]
    lam = np.full(k, 1.0 / k) if init_weights is None else np.asarray(init_weights, dtype=np.float64)
    if lam.shape != (k,) or np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-9:
        raise ValueError("initial weights must lie on the simplex")
    mixed = probs @ lam
    history = [float(np.log(mixed).sum())]
    for _ in range(max_iterations):
        post = probs * lam / mixed[:, None]
        lam = post.mean(axis=0)
        lam /= lam.sum()
        mixed = probs @ lam
        history.append(float(np.log(mixed).sum()))
        if history[-1] - history[-2] < tolerance:
            break
    return lam, history


def mixture_em(components: Sequence, dev: TokenizedCorpus, init_weights=None, tolerance: float = 1e-7,
               max_iterations: int = 1000, oov_policy: str = "exclude") -> MixtureModel:
    probs = component_probabilities(components, dev, oov_policy)
    weights, history = em_weights(probs, init_weights, tolerance, max_iterations)
    _logger.info("EM: %d iterations, weights %s", len(history) - 1, np.round(weights, 4))
    return MixtureModel(components, weights, history)
