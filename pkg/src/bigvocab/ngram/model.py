"""Back-off n-gram models estimated by interpolated smoothing.

Models are stored the way ARPA files store them: a log10 probability for
every kept k-gram and a log10 back-off weight for every kept k-gram that
serves as a context. Queries walk from the longest matching context down
to the unigram, collecting back-off weights on the way.
"""

import logging
import math
from typing import Iterable, Optional, Sequence

from ..corpus import BOS, EOS, UNK, CountTable

_logger = logging.getLogger(__name__)

LOG10_ZERO = -99.0
UNIT_KINDS = ("word", "class", "subword")


class NGramError(ValueError):
    pass


class NGramModel:
    """Immutable back-off n-gram model over a fixed unit vocabulary.

    ``units`` is the set of predictable tokens: every regular unit plus
    ``</s>`` and ``<unk>``. ``<s>`` is a context-only token.
    """

    def __init__(self, order: int, probs, bows, units: Iterable[str], unit_kind: str = "word"):
        if unit_kind not in UNIT_KINDS:
            raise NGramError("unknown unit kind %r" % unit_kind)
        self.order = order
        self.unit_kind = unit_kind
        self._probs = [dict(p) for p in probs]
        self._bows = [dict(b) for b in bows]
        units = set(units)
        units.discard(BOS)
        units.update((EOS, UNK))
        self.units = frozenset(units)
        missing = [w for w in self.units if (w,) not in self._probs[0]]
        if missing:
            raise NGramError("units without unigram probability: %s" % ", ".join(sorted(missing)[:10]))

    def ngrams(self, k: int) -> dict:
        """Stored k-grams mapped to log10 probability."""
        return self._probs[k - 1]

    def backoffs(self, k: int) -> dict:
        """Stored k-gram contexts mapped to log10 back-off weight."""
        return self._bows[k - 1]

    def num_ngrams(self, k: int) -> int:
        return len(self._probs[k - 1])

    def histories(self):
        """Contexts with a stored back-off weight, shortest first."""
        yield ()
        for table in self._bows[:self.order - 1]:
            yield from table

    def map_token(self, word: str) -> str:
        if word == BOS or word in self.units:
            return word
        return UNK

    def _query(self, ngram: tuple) -> float:
        lp = 0.0
        for start in range(len(ngram)):
            g = ngram[start:]
            p = self._probs[len(g) - 1].get(g)
            if p is not None:
                return lp + p
            lp += self._bows[len(g) - 2].get(g[:-1], 0.0)
        return LOG10_ZERO

    def logprob(self, word: str, history: Sequence[str] = ()) -> float:
        """log10 P(word | history); out-of-vocabulary tokens map to ``<unk>``."""
        history = tuple(self.map_token(w) for w in history[max(0, len(history) - self.order + 1):]) \
            if self.order > 1 else ()
        return self._query(history + (self.map_token(word),))

    def prob(self, word: str, history: Sequence[str] = ()) -> float:
        return 10.0 ** self.logprob(word, history)

    def sentence_logprobs(self, sentence: Sequence[str]) -> list:
        """log10 probability of each token and of the closing ``</s>``."""
        tokens = [BOS] + [self.map_token(w) for w in sentence] + [EOS]
        n = self.order
        return [self._query(tuple(tokens[max(0, i - n + 1):i + 1])) for i in range(1, len(tokens))]

    def __eq__(self, other):
        return isinstance(other, NGramModel) and self.order == other.order \
            and self.units == other.units and self._probs == other._probs and self._bows == other._bows


def kn_discounts(count_of_counts) -> tuple:
    """Modified Kneser-Ney discounts (D1, D2, D3+) from n1..n4.

    Returns ``None`` when the statistics cannot support three discounts
    (a zero count-of-count or a discount outside (0, c]).
    """
    n1, n2, n3, n4 = count_of_counts
    if min(n1, n2, n3, n4) <= 0:
        return None
    y = n1 / (n1 + 2.0 * n2)
    d = (1.0 - 2.0 * y * n2 / n1, 2.0 - 3.0 * y * n3 / n2, 3.0 - 4.0 * y * n4 / n3)
    if not all(0.0 < di <= i + 1 for i, di in enumerate(d)):
        return None
    return d


def kn_modified_counts(counts: CountTable, order: int) -> list:
    """Per-order counts used by Kneser-Ney.

    The highest order keeps raw counts. Lower orders use the number of
    distinct left contexts, except k-grams starting with ``<s>``, which
    can have no left context and keep their raw counts.
    """
    levels = []
    for k in range(1, order + 1):
        table = counts.ngrams(k)
        if k == order:
            levels.append({g: c for g, c in table.items() if g != (BOS,)})
            continue
        cont = {}
        for g in counts.ngrams(k + 1):
            tail = g[1:]
            cont[tail] = cont.get(tail, 0) + 1
        levels.append({g: (c if g[0] == BOS else cont.get(g, 0))
                       for g, c in table.items() if g != (BOS,)})
    return levels


def _group_by_history(level: dict) -> dict:
    groups = {}
    for g, c in level.items():
        if c > 0:
            groups.setdefault(g[:-1], []).append((g[-1], c))
    return groups


def _kn_level(level: dict, k: int, fixed=None):
    """Discounted mass and interpolation weight per history for one order."""
    if fixed is not None:
        discounts = tuple(fixed)
    else:
        coc = [0, 0, 0, 0]
        for c in level.values():
            if 1 <= c <= 4:
                coc[c - 1] += 1
        discounts = kn_discounts(coc)
        if discounts is None:
            _logger.warning("order %d: degenerate count-of-counts %s, using discount 0.5", k, coc)
            discounts = (0.5, 0.5, 0.5)
    out = {}
    for h, items in _group_by_history(level).items():
        total = float(sum(c for _, c in items))
        removed = 0.0
        mass = {}
        for w, c in items:
            d = discounts[min(c, 3) - 1]
            removed += d
            mass[w] = (c - d) / total
        out[h] = (mass, removed / total)
    return out, discounts


def _wb_level(level: dict):
    out = {}
    for h, items in _group_by_history(level).items():
        total = float(sum(c for _, c in items))
        types = len(items)
        out[h] = ({w: c / (total + types) for w, c in items}, types / (total + types))
    return out


def _resolve_units(counts: CountTable, vocab) -> set:
    units = {w for (w,) in counts.ngrams(1)}
    if vocab is not None:
        units.update(vocab)
    units.discard(BOS)
    units.update((EOS, UNK))
    return units


def _resolve_cutoffs(cutoffs, order) -> list:
    if cutoffs is None:
        return [1] * order
    if isinstance(cutoffs, int):
        return [1] + [cutoffs] * (order - 1)
    cutoffs = list(cutoffs)
    if len(cutoffs) < order:
        cutoffs += [cutoffs[-1] if cutoffs else 1] * (order - len(cutoffs))
    return [max(1, int(c)) for c in cutoffs[:order]]


def build_interpolated(levels, counts: CountTable, order: int, units, cutoffs,
                       unit_kind: str = "word") -> NGramModel:
    """Convert interpolated estimates to back-off form.

    ``levels[k-1]`` maps each order-k history to ``(mass, gamma)``, where
    ``mass[w]`` is the discounted relative frequency of ``w`` after the
    history and ``gamma`` the weight given to the next lower order. The
    unigram level interpolates with the uniform distribution over
    ``units``. A k-gram with raw count below ``cutoffs[k-1]``, or whose
    context was cut, is not stored; its probability comes from backing
    off. Back-off weights renormalize each context exactly, so every
    stored context sums to one over ``units``.
    """
    units = sorted(units)
    probs = [dict() for _ in range(order)]
    bows = [dict() for _ in range(order)]
    model = NGramModel.__new__(NGramModel)
    model.order, model._probs, model._bows = order, probs, bows

    # unigrams: every unit gets a probability
    mass, gamma = levels[0].get((), ({}, 1.0))
    uniform = 1.0 / len(units)
    for w in units:
        p = mass.get(w, 0.0) + gamma * uniform
        probs[0][(w,)] = math.log10(p) if p > 0 else LOG10_ZERO
    if order > 1 and counts[(BOS,)] > 0:
        probs[0][(BOS,)] = LOG10_ZERO

    for k in range(2, order + 1):
        raw = counts.ngrams(k)
        kept_by_history = {}
        for h, (mass, gamma) in levels[k - 1].items():
            if h not in probs[k - 2]:
                continue
            kept = []
            for w, m in mass.items():
                if raw.get(h + (w,), 0) < cutoffs[k - 1]:
                    continue
                lower = 10.0 ** model._query(h[1:] + (w,))
                p = m + gamma * lower
                probs[k - 1][h + (w,)] = math.log10(p)
                kept.append((p, lower))
            if kept:
                kept_by_history[h] = kept
        # back-off weights of the order k-1 contexts
        for h, kept in kept_by_history.items():
            num = 1.0 - sum(p for p, _ in kept)
            den = 1.0 - sum(lo for _, lo in kept)
            if num <= 0.0 or den <= 0.0:
                bows[k - 2][h] = LOG10_ZERO
            else:
                bows[k - 2][h] = math.log10(num / den)
    return NGramModel(order, probs, bows, units, unit_kind)


def _check_counts(counts: CountTable, order: int):
    if order < 1:
        raise NGramError("order must be >= 1, got %d" % order)
    if counts.order < order:
        raise NGramError("count table has order %d, model needs %d" % (counts.order, order))
    if order > 1 and counts[(BOS,)] == 0 and counts.ngrams(2):
        raise NGramError("count table lacks <s> context counts")


def train_kn(counts: CountTable, order: int, cutoffs=None, vocab: Optional[Iterable[str]] = None,
             unit_kind: str = "word", discounts=None) -> NGramModel:
    """Interpolated modified Kneser-Ney model.

    ``cutoffs`` is either one threshold applied to orders >= 2 or a
    per-order list (the unigram entry is ignored). ``vocab`` adds units
    that have no training count. ``discounts`` optionally fixes
    ``(D1, D2, D3+)`` for every order instead of estimating them.
    """
    _check_counts(counts, order)
    levels = []
    for k, level in enumerate(kn_modified_counts(counts, order), start=1):
        est, d = _kn_level(level, k, discounts)
        _logger.debug("order %d discounts %s", k, d)
        levels.append(est)
    return build_interpolated(levels, counts, order, _resolve_units(counts, vocab),
                              _resolve_cutoffs(cutoffs, order), unit_kind)


def train_witten_bell(counts: CountTable, order: int, cutoffs=None,
                      vocab: Optional[Iterable[str]] = None, unit_kind: str = "word") -> NGramModel:
    """Interpolated Witten-Bell model on raw counts at every order.

    P(w|h) = (c(hw) + T(h) P(w|h')) / (c(h) + T(h)) where T(h) is the
    number of distinct units seen after h.
    """
    _check_counts(counts, order)
    levels = []
    for k in range(1, order + 1):
        level = {g: c for g, c in counts.ngrams(k).items() if g != (BOS,)}
        levels.append(_wb_level(level))
    return build_interpolated(levels, counts, order, _resolve_units(counts, vocab),
                              _resolve_cutoffs(cutoffs, order), unit_kind)
