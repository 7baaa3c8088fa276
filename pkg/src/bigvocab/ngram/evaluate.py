"""Perplexity evaluation with explicit out-of-vocabulary handling."""

import math
from dataclasses import dataclass

import numpy as np

from ..corpus import CorpusError, TokenizedCorpus

OOV_POLICIES = ("exclude", "as_unk")


@dataclass(frozen=True)
class PerplexityResult:
    unit_kind: str
    num_events: int
    logprob: float  # total log10 probability
    ppl: float
    num_oov: int = 0

    def tsv(self) -> str:
        return "%s\t%d\t%.6f\t%.6f" % (self.unit_kind, self.num_events, self.logprob, self.ppl)


def scored_logprobs(model, corpus: TokenizedCorpus, oov_policy: str = "exclude"):
    """Per-event log10 probabilities and a mask of the events that count.

    Every sentence contributes one event per token plus ``</s>``. Under
    ``exclude`` an out-of-vocabulary token is not scored (it still acts
    as ``<unk>`` in later contexts); under ``as_unk`` it is scored as
    ``<unk>``.
    """
    if oov_policy not in OOV_POLICIES:
        raise ValueError("oov_policy must be one of %s" % ", ".join(OOV_POLICIES))
    logprobs, mask = [], []
    for sentence in corpus:
        logprobs.extend(model.sentence_logprobs(sentence))
        if oov_policy == "exclude":
            mask.extend(w in model.units for w in sentence)
        else:
            mask.extend([True] * len(sentence))
        mask.append(True)
    return np.asarray(logprobs, dtype=np.float64), np.asarray(mask, dtype=bool)


def perplexity(model, corpus: TokenizedCorpus, oov_policy: str = "exclude") -> PerplexityResult:
    """10^(-(1/N) sum log10 P) over scored events, ``</s>`` included."""
    logprobs, mask = scored_logprobs(model, corpus, oov_policy)
    n = int(mask.sum())
    if n == 0:
        raise CorpusError("perplexity is undefined: no scored events")
    total = float(logprobs[mask].sum())
    ppl = 10.0 ** (-total / n) if math.isfinite(total) else math.inf
    return PerplexityResult(getattr(model, "unit_kind", "word"), n, total, ppl, int((~mask).sum()))
