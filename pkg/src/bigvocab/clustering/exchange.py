"""Class-bigram statistics and the exchange algorithm."""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..corpus import BOS, EOS, SPECIAL_TOKENS, UNK, CountTable
from .classmap import ClassMap, ClassMapError

_logger = logging.getLogger(__name__)


def xlogx(x):
    """Elementwise x*log(x) with 0*log(0) = 0."""
    x = np.asarray(x, dtype=np.float64)
    pos = x > 0
    return np.where(pos, x * np.log(np.where(pos, x, 1.0)), 0.0)


def _csr(rows, cols, vals, n):
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(ptr, rows + 1, 1)
    return np.cumsum(ptr), cols, vals


class ExchangeStatistics:
    """Cached word and class bigram counts for the class-bigram objective.

    The objective is the natural-log likelihood
    ``sum_t log P(c_t | c_{t-1}) + log P(w_t | c_t)`` under ML estimates,
    which expands to::

        sum_{c,d} f(N(c,d)) - sum_c f(N(c,.)) - sum_c f(N(.,c)) + sum_w f(N(w))

    with ``f(x) = x log x``. Only rows and columns of the classes touched by
    a move change, so a candidate move costs O(N_C) per class the word is
    adjacent to.
    """

    def __init__(self, counts: CountTable, classmap: ClassMap):
        if counts.order < 2:
            raise ClassMapError("exchange statistics need bigram counts")
        tokens = set(w for (w,) in counts.ngrams(1)) | set(classmap.words())
        tokens.update(SPECIAL_TOKENS)
        missing = sorted(w for w in tokens if w not in classmap)
        if missing:
            raise ClassMapError("words without a class: %s" % ", ".join(missing[:20]))
        self.words = sorted(tokens)
        self.index = {w: i for i, w in enumerate(self.words)}
        n = len(self.words)
        self.num_regular = classmap.num_classes
        self.num_classes = classmap.total_classes
        self.word_class = np.array([classmap.class_of(w) for w in self.words], dtype=np.int64)
        self.movable = np.array([w not in SPECIAL_TOKENS for w in self.words])
        self._logprob_source = classmap

        bigrams = counts.ngrams(2)
        rows = np.fromiter((self.index[u] for u, _ in bigrams), dtype=np.int64, count=len(bigrams))
        cols = np.fromiter((self.index[v] for _, v in bigrams), dtype=np.int64, count=len(bigrams))
        vals = np.fromiter(bigrams.values(), dtype=np.float64, count=len(bigrams))
        is_self = rows == cols
        self.self_count = np.zeros(n)
        np.add.at(self.self_count, rows[is_self], vals[is_self])
        off = ~is_self
        self.succ_ptr, self.succ_idx, self.succ_cnt = _csr(rows[off], cols[off], vals[off], n)
        self.pred_ptr, self.pred_idx, self.pred_cnt = _csr(cols[off], rows[off], vals[off], n)
        self.left_count = np.zeros(n)
        np.add.at(self.left_count, rows, vals)
        self.right_count = np.zeros(n)
        np.add.at(self.right_count, cols, vals)
        self.word_term = float(xlogx(self.right_count).sum())
        self._rebuild()

    def _rebuild(self):
        k = self.num_classes
        self.class_bigram = np.zeros((k, k))
        for w in range(len(self.words)):
            a = self.word_class[w]
            if a < 0:
                continue
            lo, hi = self.succ_ptr[w], self.succ_ptr[w + 1]
            cls = self.word_class[self.succ_idx[lo:hi]]
            keep = cls >= 0
            np.add.at(self.class_bigram[a], cls[keep], self.succ_cnt[lo:hi][keep])
            self.class_bigram[a, a] += self.self_count[w]
        self.class_left = self.class_bigram.sum(axis=1)
        self.class_right = self.class_bigram.sum(axis=0)

    def objective(self) -> float:
        """Class-bigram log likelihood (natural log); -inf if inconsistent."""
        if np.any((self.class_bigram > 0) & (self.class_left[:, None] <= 0)):
            return -np.inf
        assigned = self.word_class >= 0
        word_term = self.word_term if assigned.all() else self._partial_word_term()
        return float(xlogx(self.class_bigram).sum() - xlogx(self.class_left).sum()
                     - xlogx(self.class_right).sum() + word_term)

    def _partial_word_term(self):
        # target counts restricted to bigrams between assigned words
        n = np.zeros(len(self.words))
        assigned = self.word_class >= 0
        for w in np.flatnonzero(assigned):
            lo, hi = self.pred_ptr[w], self.pred_ptr[w + 1]
            keep = assigned[self.pred_idx[lo:hi]]
            n[w] = self.pred_cnt[lo:hi][keep].sum() + self.self_count[w]
        return float(xlogx(n).sum())

    def neighbour_classes(self, w: int):
        """Per-class successor and predecessor counts of word ``w``.

        Self loops and unassigned neighbours are left out.
        """
        k = self.num_classes
        lo, hi = self.succ_ptr[w], self.succ_ptr[w + 1]
        cls = self.word_class[self.succ_idx[lo:hi]]
        keep = cls >= 0
        succ = np.bincount(cls[keep], weights=self.succ_cnt[lo:hi][keep], minlength=k)
        lo, hi = self.pred_ptr[w], self.pred_ptr[w + 1]
        cls = self.word_class[self.pred_idx[lo:hi]]
        keep = cls >= 0
        pred = np.bincount(cls[keep], weights=self.pred_cnt[lo:hi][keep], minlength=k)
        return succ, pred

    def remove(self, w: int):
        """Take word ``w`` out of its class, leaving it unassigned.

        Its bigrams stay in the statistics (they now hang off no class on
        the side of ``w``); :meth:`add` puts them back.
        """
        a = self.word_class[w]
        succ, pred = self.neighbour_classes(w)
        self.class_bigram[a, :] -= succ
        self.class_bigram[:, a] -= pred
        self.class_bigram[a, a] -= self.self_count[w]
        self.class_left[a] -= succ.sum() + self.self_count[w]
        self.class_right[a] -= pred.sum() + self.self_count[w]
        self.word_class[w] = -1
        return succ, pred

    def add(self, w: int, b: int, introduce: bool = False, neighbours=None):
        """Put the unassigned word ``w`` into class ``b``.

        With ``introduce`` the word's bigrams with assigned words are new to
        the statistics, so neighbouring classes' marginals grow as well.
        ``neighbours`` may pass the (succ, pred) pair returned by
        :meth:`remove` to skip recomputing it.
        """
        succ, pred = self.neighbour_classes(w) if neighbours is None else neighbours
        self.class_bigram[b, :] += succ
        self.class_bigram[:, b] += pred
        self.class_bigram[b, b] += self.self_count[w]
        if introduce:
            self.class_left += pred
            self.class_right += succ
        self.class_left[b] += succ.sum() + self.self_count[w]
        self.class_right[b] += pred.sum() + self.self_count[w]
        self.word_class[w] = b

    def move(self, w: int, b: int):
        self.remove(w)
        self.add(w, b)

    def gains(self, w: int, succ, pred, candidates=None, introduce: bool = False):
        """Objective change of inserting the unassigned word ``w`` into each class.

        ``succ`` and ``pred`` come from :meth:`neighbour_classes`. Only the
        differences between candidates are meaningful in ``introduce`` mode.
        """
        candidates = np.arange(self.num_classes) if candidates is None else np.asarray(candidates)
        m = self.class_bigram
        s_cls = np.flatnonzero(succ)
        p_cls = np.flatnonzero(pred)
        rows = m[candidates[:, None], s_cls]
        cols = m[p_cls[:, None], candidates]
        diag = m[candidates, candidates]
        sb = succ[candidates]
        pb = pred[candidates]
        self_n = self.self_count[w]
        left = self.class_left[candidates]
        right = self.class_right[candidates]
        if introduce:
            left = left + pb
            right = right + sb
        nl = succ.sum() + self_n
        nr = pred.sum() + self_n
        # every x log x term of the update, evaluated in one vectorised call
        parts = [rows + succ[s_cls], rows, cols + pred[p_cls][:, None], cols,
                 diag + sb + pb + self_n, diag + sb, diag + pb, diag, left + nl, left, right + nr, right]
        flat = xlogx(np.concatenate([x.ravel() for x in parts]))
        t, pos = [], 0
        for x in parts:
            t.append(flat[pos:pos + x.size].reshape(x.shape))
            pos += x.size
        row_gain = (t[0] - t[1]).sum(axis=1)
        col_gain = (t[2] - t[3]).sum(axis=0)
        # the diagonal cell was counted once in each sum above
        diag_fix = t[4] - t[5] - t[6] + t[7]
        marg = (t[8] - t[9]) + (t[10] - t[11])
        return row_gain + col_gain + diag_fix - marg

    def to_classmap(self) -> ClassMap:
        assignment = {w: int(self.word_class[i]) for i, w in enumerate(self.words)
                      if w not in SPECIAL_TOKENS}
        counts = {w: float(self.right_count[i]) for i, w in enumerate(self.words)}
        return ClassMap.from_counts(assignment, self.num_regular, counts)

    def check_consistency(self, atol: float = 1e-9) -> bool:
        cached = (self.class_bigram.copy(), self.class_left.copy(), self.class_right.copy())
        self._rebuild()
        ok = all(np.allclose(a, b, atol=atol) for a, b in
                 zip(cached, (self.class_bigram, self.class_left, self.class_right)))
        self.class_bigram, self.class_left, self.class_right = cached
        return ok


def exchange_objective(stats: ExchangeStatistics) -> float:
    """Class-bigram log likelihood (natural log) of the cached statistics."""
    return stats.objective()


def class_bigram_objective(counts: CountTable, classmap: ClassMap) -> float:
    return ExchangeStatistics(counts, classmap).objective()


def _best_candidate(stats, w, succ, pred, candidates, num_threads, introduce=False):
    if num_threads <= 1 or len(candidates) < 2 * num_threads:
        g = stats.gains(w, succ, pred, candidates, introduce)
    else:
        chunks = np.array_split(candidates, num_threads)
        with ThreadPoolExecutor(num_threads) as pool:
            parts = pool.map(lambda c: stats.gains(w, succ, pred, c, introduce), chunks)
            g = np.concatenate(list(parts))
    return g


def exchange_train(counts: CountTable, init: ClassMap, max_iterations: int = 100,
                   num_threads: int = 1, tolerance: float = 1e-9,
                   callback=None) -> ClassMap:
    """Optimise a clustering by moving single words between classes.

    Words are visited in descending frequency order. Each word moves to the
    class with the largest objective gain if that gain exceeds
    ``tolerance``; a move that would empty a class is not taken. Training
    stops after a sweep without moves or after ``max_iterations`` sweeps.
    ``callback(iteration, moves, objective)`` is called after every sweep.
    """
    if init.num_classes < 2:
        raise ClassMapError("exchange needs at least 2 classes")
    stats = ExchangeStatistics(counts, init)
    candidates = np.arange(stats.num_regular)
    freq = stats.right_count
    order = sorted(np.flatnonzero(stats.movable), key=lambda i: (-freq[i], stats.words[i]))
    sizes = np.bincount(stats.word_class, minlength=stats.num_classes)
    objective = stats.objective()
    _logger.info("exchange: %d words, %d classes, initial objective %.4f",
                 len(order), stats.num_regular, objective)
    for iteration in range(1, max_iterations + 1):
        moves = 0
        for w in order:
            a = stats.word_class[w]
            if sizes[a] <= 1:
                continue
            succ, pred = stats.remove(w)
            g = _best_candidate(stats, w, succ, pred, candidates, num_threads)
            b = int(np.argmax(g))
            if g[b] - g[a] > tolerance:
                stats.add(w, b, neighbours=(succ, pred))
                sizes[a] -= 1
                sizes[b] += 1
                moves += 1
            else:
                stats.add(w, a, neighbours=(succ, pred))
        objective = stats.objective()
        _logger.info("exchange iteration %d: %d moves, objective %.4f", iteration, moves, objective)
        if callback is not None:
            callback(iteration, moves, objective)
        if moves == 0:
            break
    return stats.to_classmap()
