"""Exactly normalized evaluation of a trained network.

Sampled output layers are only a training device: scoring always uses
the full softmax (or the two-level softmax) so probabilities sum to one.
Scoring runs on a float64 copy of the parameters.
"""

import math
from typing import Optional, Sequence

import numpy as np

from ..corpus import BOS, EOS, UNK, CorpusError
from .network import Network

_LN10 = math.log(10.0)


class OOSError(KeyError):
    pass


class NNLMScorer:
    """Scores unit sequences with a network, handling out-of-shortlist words.

    An out-of-shortlist word gets P(<unk> | h) * p_uni(w | OOS). With a
    class map, words are scored through their classes and the class
    membership probability is added.
    """

    def __init__(self, network: Network, classmap=None):
        self.network = network.astype(np.float64)
        if self.network.config.output_kind in ("nce", "blackout"):
            # evaluation uses an explicit softmax over the same weights
            from .outputs import SoftmaxOutput
            self.network.output = SoftmaxOutput(self.network.vocab.size)
        self.vocab = network.vocab
        self.classmap = classmap
        self.unit_kind = network.config.unit_kind if classmap is None else "word"
        self.order = math.inf
        if classmap is None:
            self.units = frozenset(self.vocab.units) | frozenset(self.vocab.oos_logprob)
        else:
            self.units = frozenset(classmap.words()) | {EOS, UNK}

    # unit mapping

    def _unit(self, word: str) -> str:
        if self.classmap is None or word in (BOS, EOS, UNK):
            return word
        if word not in self.classmap:
            return UNK
        return self.classmap.class_label(word)

    def _extra(self, word: str) -> float:
        """Natural-log term added to the network probability of ``word``'s unit."""
        if self.classmap is not None:
            if word in (EOS, UNK) or word not in self.classmap:
                return 0.0
            return self.classmap.logprob(word)
        if word in self.vocab.index:
            return 0.0
        try:
            return self.vocab.oos_logprob[word]
        except KeyError:
            raise OOSError("word %r is outside the shortlist and has no unigram probability" % word) from None

    def unit_logprob(self, logprobs_row, word: str) -> float:
        """Natural-log probability of ``word`` given an output distribution row."""
        unit = self._unit(word)
        return float(logprobs_row[self.vocab.id(unit)]) + self._extra(word)

    # incremental interface

    def initial_state(self, batch: int = 1):
        """State and output distribution after reading ``<s>``."""
        return self.step(self.network.zero_state(batch), [BOS] * batch)

    def step(self, state, words: Sequence[str]):
        """Feed one unit per row; returns ``(new_state, logprobs [B, V])``."""
        ids = np.array([[self.vocab.id(self._unit(w))] for w in words], dtype=np.int64)
        logprobs, new_state = self.network.log_probs(ids, state)
        return new_state, logprobs[:, 0, :]

    @staticmethod
    def select_state(state, rows):
        h, c = state
        return h[rows], c[rows]

    @staticmethod
    def stack_states(states):
        return np.vstack([s[0] for s in states]), np.vstack([s[1] for s in states])

    # whole sequences

    def sequence_logprobs(self, sequences: Sequence[Sequence[str]], batch_size: int = 64):
        """Natural-log probability of every token and the final ``</s>``."""
        out = []
        for start in range(0, len(sequences), batch_size):
            chunk = [list(s) for s in sequences[start:start + batch_size]]
            width = max(len(s) for s in chunk) + 1
            ids = np.full((len(chunk), width), self.vocab.eos_id, dtype=np.int64)
            for r, s in enumerate(chunk):
                ids[r, 0] = self.vocab.bos_id
                for t, w in enumerate(s):
                    ids[r, t + 1] = self.vocab.id(self._unit(w))
            logprobs, _ = self.network.log_probs(ids)
            for r, s in enumerate(chunk):
                words = s + [EOS]
                out.append([self.unit_logprob(logprobs[r, t], w) for t, w in enumerate(words)])
        return out

    def sentence_logprobs(self, sentence: Sequence[str]) -> list:
        """log10 per token, matching the n-gram model protocol."""
        sentence = [w if w in self.units else UNK for w in sentence]
        return [lp / _LN10 for lp in self.sequence_logprobs([sentence])[0]]

    def perplexity(self, corpus) -> float:
        total, n = 0.0, 0
        sentences = [[w if w in self.units else UNK for w in s] for s in corpus]
        for row in self.sequence_logprobs(sentences):
            total += sum(row)
            n += len(row)
        if n == 0:
            raise CorpusError("perplexity is undefined: no scored events")
        return math.exp(-total / n)


def score_tokens(network_or_scorer, tokens: Sequence[str]) -> list:
    """Per-token log10 probabilities of a sentence, ``</s>`` included."""
    scorer = network_or_scorer if isinstance(network_or_scorer, NNLMScorer) else NNLMScorer(network_or_scorer)
    return [lp / _LN10 for lp in scorer.sequence_logprobs([list(tokens)])[0]]
