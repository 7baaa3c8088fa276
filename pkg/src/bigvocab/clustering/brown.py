"""Greedy agglomerative clustering restricted to a working set of classes."""

import logging

import numpy as np

from ..corpus import SPECIAL_TOKENS, CountTable
from .classmap import ClassMap, ClassMapError
from .exchange import ExchangeStatistics

_logger = logging.getLogger(__name__)


def brown_train(counts: CountTable, num_classes: int) -> ClassMap:
    """Cluster words by greedy merging with ``num_classes`` active classes.

    The ``num_classes`` most frequent words start as singleton classes.
    Every remaining word, in descending frequency order, enters the
    statistics and is merged into the class that loses the least class
    bigram likelihood. Bigrams with words that have not entered yet are
    ignored until both ends are present. Equal losses go to the lowest
    class index.
    """
    if num_classes < 2:
        raise ClassMapError("Brown clustering needs at least 2 classes")
    words = sorted((w for (w,) in counts.ngrams(1) if w not in SPECIAL_TOKENS),
                   key=lambda w: (-counts[(w,)], w))
    if num_classes > len(words):
        raise ClassMapError("num_classes %d exceeds vocabulary size %d" % (num_classes, len(words)))
    seed = {w: i for i, w in enumerate(words[:num_classes])}
    # start with the remaining words parked in class 0, then unassign them
    start = dict(seed)
    start.update({w: 0 for w in words[num_classes:]})
    stats = ExchangeStatistics(counts, ClassMap(start, num_classes, {}))
    for w in words[num_classes:]:
        stats.word_class[stats.index[w]] = -1
    stats._rebuild()
    candidates = np.arange(num_classes)
    for n, w in enumerate(words[num_classes:], start=1):
        i = stats.index[w]
        succ, pred = stats.neighbour_classes(i)
        g = stats.gains(i, succ, pred, candidates, introduce=True)
        b = int(np.argmax(g))
        stats.add(i, b, introduce=True)
        if n % 1000 == 0:
            _logger.info("brown: merged %d of %d words", n, len(words) - num_classes)
    return stats.to_classmap()
