"""Class n-gram models: class-sequence probability times class membership."""

import math
from typing import Sequence

from ..clustering.classmap import ClassMap, ClassMapError
from ..corpus import BOS, EOS, SPECIAL_TOKENS, UNK, CountTable
from .model import NGramModel, train_witten_bell

_LN10 = math.log(10.0)


def class_counts(counts: CountTable, classmap: ClassMap) -> CountTable:
    """Map every counted k-gram to its class k-gram and sum."""
    missing = sorted({w for (w,) in counts.ngrams(1) if w not in SPECIAL_TOKENS and w not in classmap})
    if missing:
        raise ClassMapError("words missing from the class map: %s" % ", ".join(missing[:20]))
    label = {w: classmap.class_label(w) for w in classmap.words()}
    label.update({s: s for s in SPECIAL_TOKENS})
    table = CountTable(counts.order)
    for k in range(1, counts.order + 1):
        for g, c in counts.ngrams(k).items():
            table.add(tuple(label[w] for w in g), c)
    return table


class ClassNGramModel:
    """P(w|h) = P(c(w) | c(h)) P(w | c(w)), all in log10."""

    unit_kind = "word"

    def __init__(self, sequence_model: NGramModel, classmap: ClassMap):
        self.sequence_model = sequence_model
        self.classmap = classmap
        self.order = sequence_model.order
        self.units = frozenset(classmap.words()) | {EOS, UNK}
        self._label = {w: classmap.class_label(w) for w in self.units}

    def map_token(self, word: str) -> str:
        if word == BOS or word in self.units:
            return word
        return UNK

    def membership_logprob(self, word: str) -> float:
        """log10 P(word | class of word)."""
        return self.classmap.logprob(word) / _LN10

    def logprob(self, word: str, history: Sequence[str] = ()) -> float:
        word = self.map_token(word)
        hist = [BOS if w == BOS else self._label[self.map_token(w)] for w in history]
        return self.sequence_model.logprob(self._label[word], hist) + self.membership_logprob(word)

    def prob(self, word: str, history: Sequence[str] = ()) -> float:
        return 10.0 ** self.logprob(word, history)

    def sentence_logprobs(self, sentence: Sequence[str]) -> list:
        words = [self.map_token(w) for w in sentence] + [EOS]
        classes = [self._label[w] for w in words]
        seq = self.sequence_model.sentence_logprobs(classes[:-1])
        return [lp + self.membership_logprob(w) for lp, w in zip(seq, words)]


def train_class_ngram(counts: CountTable, classmap: ClassMap, order: int, cutoffs=None) -> ClassNGramModel:
    """Class model with a Witten-Bell class-sequence component.

    The class vocabulary holds the class of every mapped word plus
    ``</s>`` and ``<unk>``; empty classes are not predictable.
    """
    table = class_counts(counts, classmap)
    classes = {classmap.class_label(w) for w in classmap.words()}
    seq = train_witten_bell(table, order, cutoffs=cutoffs, vocab=classes, unit_kind="class")
    return ClassNGramModel(seq, classmap)
