"""Unsupervised morph segmentation with a two-part MDL cost.

The cost of a lexicon with morph counts c(m) is

    prior = sum_m (|m| + 1) log(|S| + 1) + log C(N - 1, M - 1)
    data  = -alpha * [sum_m c(m) log c(m) + B log B - T log T]

with |S| the character inventory size, N the morph token count, M the
number of morph types, B the number of word tokens (each word ends with
a boundary event) and T = N + B. Training greedily splits words in two,
recursively, and keeps a new analysis only if it lowers the cost.
Splits are shared: a piece used by several words is analysed once.
"""

import logging
import math
import random
from typing import Iterable, Mapping, Optional, Sequence

_logger = logging.getLogger(__name__)

MARKER = "+"


class SegmentationError(ValueError):
    """Raised for malformed morph sequences; ``position`` is the first bad token."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


def _xlogx(x):
    return x * math.log(x) if x > 0 else 0.0


class MorphLexicon:
    """Morph counts plus the bookkeeping needed for O(1) cost updates."""

    def __init__(self, alpha: float, inventory: Iterable[str], morphs: Optional[Mapping[str, int]] = None,
                 num_word_tokens: int = 0):
        if alpha <= 0:
            raise ValueError("alpha must be positive, got %r" % alpha)
        self.alpha = float(alpha)
        self.inventory = frozenset(inventory)
        self.num_word_tokens = num_word_tokens
        self.counts = {}
        self.analyses = {}
        self._tokens = 0
        self._xlogx = 0.0
        self._lengths = 0
        for m, c in (morphs or {}).items():
            self.add(m, c)

    # bookkeeping

    def add(self, morph: str, count: int = 1):
        old = self.counts.get(morph, 0)
        new = old + count
        if new < 0:
            raise ValueError("negative count for morph %r" % morph)
        if old == 0 and new > 0:
            self._lengths += len(morph) + 1
        elif old > 0 and new == 0:
            self._lengths -= len(morph) + 1
        if new == 0:
            self.counts.pop(morph, None)
        else:
            self.counts[morph] = new
        self._tokens += count
        self._xlogx += _xlogx(new) - _xlogx(old)

    def remove(self, morph: str, count: int = 1):
        self.add(morph, -count)

    def resync(self):
        """Recompute the running sums exactly, discarding rounding drift."""
        self._tokens = sum(self.counts.values())
        self._xlogx = math.fsum(_xlogx(c) for c in self.counts.values())
        self._lengths = sum(len(m) + 1 for m in self.counts)

    def __len__(self):
        return len(self.counts)

    def __contains__(self, morph):
        return morph in self.counts

    @property
    def num_tokens(self) -> int:
        return self._tokens

    def lexicon_code_cost(self) -> float:
        """Cost of spelling out every morph type, end marker included."""
        return self._lengths * math.log(len(self.inventory) + 1)

    def frequency_cost(self) -> float:
        """log C(N - 1, M - 1): choosing M positive counts summing to N."""
        n, m = self._tokens, len(self.counts)
        if m == 0:
            return 0.0
        return math.lgamma(n) - math.lgamma(m) - math.lgamma(n - m + 1)

    def prior_cost(self) -> float:
        return self.lexicon_code_cost() + self.frequency_cost()

    def data_cost(self) -> float:
        b = self.num_word_tokens
        total = self._tokens + b
        return -self.alpha * (self._xlogx + _xlogx(b) - _xlogx(total))

    def cost(self) -> float:
        if not self.counts:
            raise ValueError("cost of an empty lexicon is undefined")
        return self.prior_cost() + self.data_cost()

    # segmentation

    def logprob(self, morph: str) -> float:
        return math.log(self.counts[morph] / self._tokens)

    def max_morph_length(self) -> int:
        return max(map(len, self.counts), default=1)

    def fallback_logprob(self) -> float:
        """Score of a single-character morph missing from the lexicon."""
        return math.log(min(self.counts.values()) / self._tokens) - math.log(10.0)

    def segment(self, word: str) -> list:
        """Stored training analysis if there is one, otherwise Viterbi."""
        if word in self.analyses:
            return list(self.analyses[word])
        return viterbi_segment(self, word)

    # files

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as f:
            for m, c in sorted(self.counts.items(), key=lambda mc: (-mc[1], mc[0])):
                f.write("%d\t%s\n" % (c, m))

    def save_analyses(self, path: str):
        with open(path, "w", encoding="utf-8") as f:
            for w in sorted(self.analyses):
                f.write("%s\t%s\n" % (w, " ".join(self.analyses[w])))

    @classmethod
    def load(cls, path: str, alpha: float = 1.0, analyses_path: Optional[str] = None) -> "MorphLexicon":
        counts = {}
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) != 2 or not fields[0].isdigit() or not fields[1]:
                    raise ValueError("%s line %d: expected count<TAB>morph" % (path, lineno))
                counts[fields[1]] = counts.get(fields[1], 0) + int(fields[0])
        inventory = {ch for m in counts for ch in m}
        lex = cls(alpha, inventory, counts)
        if analyses_path:
            with open(analyses_path, encoding="utf-8") as f:
                for line in f:
                    line = line.rstrip("\n")
                    if line:
                        word, morphs = line.split("\t")
                        lex.analyses[word] = morphs.split(" ")
        return lex


def morfessor_cost(lexicon: MorphLexicon) -> float:
    """Total two-part cost in nats of the lexicon's current counts."""
    return lexicon.cost()


def cost_of_segmentation(segmented: Mapping[str, Sequence[str]], word_counts: Mapping[str, int],
                         alpha: float, inventory: Optional[Iterable[str]] = None) -> float:
    """Cost of a full analysis ``word -> morphs`` of a word list."""
    inventory = set(inventory or ()) | {ch for w in word_counts for ch in w}
    lex = MorphLexicon(alpha, inventory, num_word_tokens=sum(word_counts.values()))
    for w, c in word_counts.items():
        for m in segmented[w]:
            lex.add(m, c)
    return lex.cost()


class _SplitTree:
    """Binary split structure shared by all words.

    Every construction (a word or a piece of one) is a node holding its
    usage count and a split point (0 for a leaf morph). Counts flow down
    to the leaves, which are the lexicon morphs, so re-analysing a piece
    changes every word that uses it. All changes are journaled so that a
    rejected re-analysis can be rolled back exactly.
    """

    def __init__(self, lex: MorphLexicon):
        self.lex = lex
        self.nodes = {}
        self.journal = []

    def add(self, s: str, count: int, split: int = 0):
        """Add ``count`` uses of ``s``; a new node gets ``split``."""
        old = self.nodes.get(s)
        total, i = (old if old is not None else (0, split))
        total += count
        self.journal.append((s, old))
        if total == 0:
            del self.nodes[s]
        else:
            self.nodes[s] = (total, i)
        if i:
            self.add(s[:i], count)
            self.add(s[i:], count)
        else:
            self.journal.append((None, (s, count)))
            self.lex.add(s, count)

    def rollback(self, mark: int):
        while len(self.journal) > mark:
            key, old = self.journal.pop()
            if key is None:
                self.lex.remove(*old)
            elif old is None:
                self.nodes.pop(key, None)
            else:
                self.nodes[key] = old

    def resplit(self, s: str):
        """Choose the cheapest binary split of ``s`` and recurse into the halves."""
        count = self.nodes[s][0]
        self.add(s, -count)  # drop the current analysis of s
        self.add(s, count)   # s as a single morph
        best_cost, best_i = self.lex.cost(), 0
        self.add(s, -count)
        for i in range(1, len(s)):
            self.add(s[:i], count)
            self.add(s[i:], count)
            c = self.lex.cost()
            if c < best_cost:
                best_cost, best_i = c, i
            self.add(s[:i], -count)
            self.add(s[i:], -count)
        self.add(s, count, split=best_i)
        if best_i:
            self.resplit(s[:best_i])
            self.resplit(s[best_i:])

    def leaves(self, s: str) -> list:
        i = self.nodes[s][1]
        if not i:
            return [s]
        return self.leaves(s[:i]) + self.leaves(s[i:])


def train_morfessor(wordlist: Mapping[str, int], alpha: float, seed: int = 0, token_based: bool = False,
                    inventory: Optional[Iterable[str]] = None, max_epochs: int = 50,
                    threshold: float = 1e-3, history: Optional[list] = None) -> MorphLexicon:
    """Greedy MDL training starting from whole words.

    Words are visited in a seeded random order each epoch; training stops
    when an epoch lowers the cost by less than ``threshold`` (relative).
    With ``token_based`` every word weighs its corpus count, otherwise
    each type counts once. ``history`` receives the cost before training
    and after every epoch.
    """
    words = sorted(w for w, c in wordlist.items() if c > 0)
    if not words:
        raise ValueError("empty word list")
    if any(not w for w in words):
        raise ValueError("empty word in word list")
    weight = {w: (int(wordlist[w]) if token_based else 1) for w in words}
    chars = set(inventory or ()) | {ch for w in words for ch in w}
    lex = MorphLexicon(alpha, chars, num_word_tokens=sum(weight.values()))
    tree = _SplitTree(lex)
    for w in words:
        tree.add(w, weight[w])
    tree.journal.clear()
    cost = lex.cost()
    if history is not None:
        history.append(cost)
    rng = random.Random(seed)
    for epoch in range(max_epochs):
        order = list(words)
        rng.shuffle(order)
        changed = 0
        for w in order:
            before = lex.cost()
            tree.resplit(w)
            if lex.cost() < before - 1e-9:
                changed += 1
            else:
                tree.rollback(0)
            tree.journal.clear()
        lex.resync()
        new_cost = lex.cost()
        if history is not None:
            history.append(new_cost)
        _logger.info("epoch %d: cost %.2f, %d morphs, %d words changed", epoch + 1, new_cost, len(lex), changed)
        improvement = (cost - new_cost) / abs(cost) if cost else 0.0
        cost = new_cost
        if improvement < threshold:
            break
    lex.analyses = {w: tree.leaves(w) for w in words}
    return lex


def viterbi_segment(lexicon: MorphLexicon, word: str) -> list:
    """Most probable segmentation of ``word`` into lexicon morphs.

    Characters that are not themselves morphs may always stand alone,
    at the fallback score, so every word has a segmentation. Ties go to
    the segmentation found first scanning split points left to right.
    """
    if not word:
        raise ValueError("cannot segment an empty word")
    n = len(word)
    maxlen = lexicon.max_morph_length()
    fallback = lexicon.fallback_logprob() if lexicon.counts else 0.0
    best = [-math.inf] * (n + 1)
    back = [0] * (n + 1)
    best[0] = 0.0
    for end in range(1, n + 1):
        for start in range(max(0, end - maxlen), end):
            piece = word[start:end]
            if piece in lexicon.counts:
                score = best[start] + lexicon.logprob(piece)
            elif end - start == 1:
                score = best[start] + fallback
            else:
                continue
            if score > best[end]:
                best[end], back[end] = score, start
    out = []
    end = n
    while end > 0:
        out.append(word[back[end]:end])
        end = back[end]
    return out[::-1]


def mark_boundaries(segments: Sequence[Sequence[str]]) -> list:
    """Flatten per-word morph lists, marking word-internal boundaries with '+'."""
    tokens = []
    for morphs in segments:
        if not morphs:
            raise SegmentationError("word with no morphs")
        last = len(morphs) - 1
        for i, m in enumerate(morphs):
            if not m or m.startswith(MARKER) or m.endswith(MARKER):
                raise SegmentationError("invalid morph %r" % m)
            tokens.append((MARKER if i > 0 else "") + m + (MARKER if i < last else ""))
    return tokens


def boundary_flags(token: str):
    """``(continues_left, continues_right, surface)`` of a marked morph."""
    left = token.startswith(MARKER)
    right = token.endswith(MARKER)
    surface = token[1 if left else 0:len(token) - (1 if right else 0)]
    return left, right, surface


def _first_violation(tokens: Sequence[str]):
    open_right = False
    for i, tok in enumerate(tokens):
        left, right, surface = boundary_flags(tok)
        if not surface:
            return i, "empty morph %r" % tok
        if left != open_right:
            return i, ("%r continues a finished word" % tok) if left else ("%r follows an open morph" % tok)
        open_right = right
    if open_right:
        return len(tokens) - 1, "sequence ends inside a word"
    return None


def legal_sequence(tokens: Sequence[str]) -> bool:
    """True iff a token starts with '+' exactly when its predecessor ends with '+'."""
    return _first_violation(tokens) is None


def join_morphs(tokens: Sequence[str]) -> list:
    """Join marked morphs back into words."""
    bad = _first_violation(tokens)
    if bad is not None:
        raise SegmentationError("illegal morph sequence at position %d: %s" % bad, bad[0])
    words, current = [], ""
    for tok in tokens:
        left, right, surface = boundary_flags(tok)
        current += surface
        if not right:
            words.append(current)
            current = ""
    return words


def segment_line(lexicon: MorphLexicon, line: str) -> str:
    """Replace every word of a text line by its marked morphs."""
    words = line.split()
    return " ".join(mark_boundaries([lexicon.segment(w) for w in words]))


def word_counts(corpus) -> dict:
    counts = {}
    for sentence in corpus:
        for w in sentence:
            counts[w] = counts.get(w, 0) + 1
    return counts
