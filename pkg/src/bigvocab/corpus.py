"""Text ingestion, vocabularies, n-gram counting and OOV accounting."""

import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

_logger = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
SPECIAL_TOKENS = (BOS, EOS, UNK)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class TokenizedCorpus:
    """Sentences of tokens, each implicitly wrapped in <s> ... </s>.

    Tokens are kept as strings; ``ids`` maps them through a vocabulary.
    ``source_tags`` holds one tag per sentence so that corpora from
    several files can be weighted separately.
    """

    sentences: tuple
    source_tags: tuple = ()

    def __post_init__(self):
        if self.source_tags and len(self.source_tags) != len(self.sentences):
            raise CorpusError("one source tag per sentence is required")
        if not self.source_tags:
            object.__setattr__(self, "source_tags", ("",) * len(self.sentences))

    def __len__(self):
        return len(self.sentences)

    def __iter__(self) -> Iterator[tuple]:
        return iter(self.sentences)

    @property
    def source_tag(self) -> str:
        tags = set(self.source_tags)
        if len(tags) > 1:
            raise CorpusError("corpus mixes several source tags: %s" % sorted(tags))
        return tags.pop() if tags else ""

    def tags(self) -> list:
        return sorted(set(self.source_tags))

    def num_tokens(self, include_eos: bool = False) -> int:
        n = sum(len(s) for s in self.sentences)
        return n + len(self.sentences) if include_eos else n

    def subset(self, tag: str) -> "TokenizedCorpus":
        keep = [i for i, t in enumerate(self.source_tags) if t == tag]
        return TokenizedCorpus(tuple(self.sentences[i] for i in keep),
                               tuple(self.source_tags[i] for i in keep))

    def concatenate(self, other: "TokenizedCorpus") -> "TokenizedCorpus":
        return TokenizedCorpus(self.sentences + other.sentences,
                               self.source_tags + other.source_tags)

    def with_boundaries(self) -> Iterator[list]:
        for sentence in self.sentences:
            yield [BOS, *sentence, EOS]

    def map_oov(self, vocab: "Vocabulary") -> "TokenizedCorpus":
        mapped = tuple(tuple(w if w in vocab else UNK for w in s)
                       for s in self.sentences)
        return TokenizedCorpus(mapped, self.source_tags)

    def ids(self, vocab: "Vocabulary") -> list:
        """Id arrays for every sentence, including <s> and </s>."""
        return [np.array([vocab.id(w) for w in s], dtype=np.int64)
                for s in self.with_boundaries()]

    def detokenize(self) -> str:
        return "".join(" ".join(s) + "\n" for s in self.sentences)


def tokenize_line(line: str, lowercase: bool = False) -> tuple:
    # ASCII whitespace only; str.split() would also break on NBSP etc.
    if lowercase:
        line = line.lower()
    return tuple(t for t in line.replace("\t", " ").replace("\r", " ")
                 .replace("\f", " ").replace("\v", " ").split(" ") if t)


def read_sentences(path: str, lowercase: bool = False) -> list:
    sentences = []
    try:
        handle = open(path, "rb")
    except OSError as e:
        raise OSError("cannot read corpus file %s: %s" % (path, e.strerror)) from e
    with handle:
        for lineno, raw in enumerate(handle, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise UnicodeDecodeError(
                    e.encoding, e.object, e.start, e.end,
                    "%s line %d: %s" % (path, lineno, e.reason)) from None
            tokens = tokenize_line(line.rstrip("\n"), lowercase)
            if tokens:
                sentences.append(tokens)
    return sentences


def load_corpus(paths: Sequence[str], vocab: Optional["Vocabulary"] = None,
                tags: Optional[Sequence[str]] = None,
                lowercase: bool = False) -> TokenizedCorpus:
    """Read one-sentence-per-line UTF-8 files into a corpus.

    Empty lines are skipped. Each file gets its own source tag, by default
    the file name without extension. With ``vocab``, out-of-vocabulary
    tokens become ``<unk>``.
    """
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    if tags is not None and len(tags) != len(paths):
        raise CorpusError("expected %d source tags, got %d" % (len(paths), len(tags)))
    sentences = []
    source_tags = []
    for i, path in enumerate(paths):
        tag = tags[i] if tags is not None else os.path.splitext(os.path.basename(path))[0]
        file_sentences = read_sentences(path, lowercase)
        if vocab is not None:
            file_sentences = [tuple(w if w in vocab else UNK for w in s)
                              for s in file_sentences]
        sentences.extend(file_sentences)
        source_tags.extend([tag] * len(file_sentences))
    return TokenizedCorpus(tuple(sentences), tuple(source_tags))


def corpus_from_text(text: str, tag: str = "", vocab: Optional["Vocabulary"] = None) -> TokenizedCorpus:
    sentences = [tokenize_line(line) for line in text.splitlines()]
    sentences = [s for s in sentences if s]
    if vocab is not None:
        sentences = [tuple(w if w in vocab else UNK for w in s) for s in sentences]
    return TokenizedCorpus(tuple(sentences), (tag,) * len(sentences))


class Vocabulary:
    """Token to id mapping with corpus counts.

    Regular tokens take ids ``[0, num_words)`` sorted by descending count,
    ties broken lexicographically, so any shortlist of size K is exactly the
    id range ``[0, K)``. The special tokens follow in the order
    ``</s>``, ``<unk>``, ``<s>``.
    """

    def __init__(self, counts: dict, shortlist_size: Optional[int] = None,
                 special_counts: Optional[dict] = None):
        words = sorted((w for w in counts if w not in SPECIAL_TOKENS),
                       key=lambda w: (-counts[w], w))
        self._words = words + [EOS, UNK, BOS]
        self._ids = {w: i for i, w in enumerate(self._words)}
        special_counts = dict(special_counts or {})
        for s in SPECIAL_TOKENS:
            special_counts.setdefault(s, counts.get(s, 0))
        self._counts = np.array([counts[w] for w in words]
                                + [special_counts[EOS], special_counts[UNK],
                                   special_counts[BOS]], dtype=np.int64)
        if np.any(self._counts < 0):
            raise CorpusError("counts must be non-negative")
        if shortlist_size is not None and not 0 < shortlist_size <= len(words):
            raise CorpusError("shortlist size %d outside [1, %d]" % (shortlist_size, len(words)))
        self.shortlist_size = shortlist_size

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Vocabulary":
        """Vocabulary of the given words with unit counts."""
        return cls({w: 1 for w in words})

    def __len__(self):
        return len(self._words)

    def __contains__(self, word):
        return word in self._ids

    def __iter__(self):
        return iter(self._words)

    def __eq__(self, other):
        return (isinstance(other, Vocabulary) and self._words == other._words
                and np.array_equal(self._counts, other._counts))

    def __repr__(self):
        return "Vocabulary(%d words)" % self.num_words

    @property
    def num_words(self) -> int:
        """Number of regular (non-special) entries."""
        return len(self._words) - len(SPECIAL_TOKENS)

    @property
    def bos_id(self):
        return self._ids[BOS]

    @property
    def eos_id(self):
        return self._ids[EOS]

    @property
    def unk_id(self):
        return self._ids[UNK]

    def id(self, word: str) -> int:
        return self._ids.get(word, self._ids[UNK])

    def word(self, index: int) -> str:
        return self._words[index]

    def count(self, word: str) -> int:
        return int(self._counts[self._ids[word]])

    @property
    def counts(self) -> np.ndarray:
        return self._counts.copy()

    def words(self) -> list:
        """Regular tokens in id order (most frequent first)."""
        return self._words[:self.num_words]

    def shortlist(self) -> list:
        k = self.shortlist_size or self.num_words
        return self._words[:k]

    def truncated(self, max_size: int) -> "Vocabulary":
        keep = self.words()[:max_size]
        return Vocabulary({w: self.count(w) for w in keep},
                          special_counts={s: self.count(s) for s in SPECIAL_TOKENS})

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as f:
            for w in self.words():
                f.write("%s\t%d\n" % (w, self.count(w)))

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        counts = {}
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) != 2:
                    raise CorpusError("%s line %d: expected token<TAB>count" % (path, lineno))
                counts[fields[0]] = int(fields[1])
        return cls(counts)


def build_vocabulary(corpus: TokenizedCorpus, min_count: int = 1,
                     max_size: Optional[int] = None,
                     shortlist_size: Optional[int] = None) -> Vocabulary:
    """Vocabulary of tokens occurring at least ``min_count`` times.

    With ``max_size`` only the most frequent entries are kept. The ``</s>``
    and ``<s>`` counts are the number of sentences.
    """
    if min_count < 1:
        raise CorpusError("min_count must be >= 1, got %d" % min_count)
    if max_size is not None and max_size < 1:
        raise CorpusError("max_size must be >= 1, got %d" % max_size)
    counts = Counter()
    for sentence in corpus:
        counts.update(sentence)
    kept = {w: c for w, c in counts.items() if c >= min_count and w not in SPECIAL_TOKENS}
    if max_size is not None and len(kept) > max_size:
        ranked = sorted(kept, key=lambda w: (-kept[w], w))[:max_size]
        kept = {w: kept[w] for w in ranked}
    n = len(corpus)
    return Vocabulary(kept, shortlist_size=shortlist_size,
                      special_counts={BOS: n, EOS: n, UNK: counts.get(UNK, 0)})


class CountTable:
    """N-gram counts up to a fixed order, keyed by token tuples.

    ``<s>`` is counted as a context-only unigram (one per sentence) when
    the order is at least two, so that every stored k-gram's prefix is
    stored too. It never occurs as a predicted token.
    """

    def __init__(self, order: int):
        if order < 1:
            raise CorpusError("n-gram order must be >= 1, got %d" % order)
        self.order = order
        self._counts = [dict() for _ in range(order)]

    def __getitem__(self, ngram) -> int:
        ngram = tuple(ngram)
        if not 1 <= len(ngram) <= self.order:
            return 0
        return self._counts[len(ngram) - 1].get(ngram, 0)

    def __contains__(self, ngram):
        return self[ngram] > 0

    def __eq__(self, other):
        return isinstance(other, CountTable) and self.order == other.order \
            and self._counts == other._counts

    def add(self, ngram: tuple, count: int = 1):
        table = self._counts[len(ngram) - 1]
        table[ngram] = table.get(ngram, 0) + count

    def ngrams(self, k: int) -> dict:
        """Mapping of stored k-grams to counts (do not modify)."""
        return self._counts[k - 1]

    def items(self):
        for table in self._counts:
            yield from table.items()

    def unigram_total(self) -> int:
        """Number of predicted tokens, </s> included and <s> excluded."""
        return sum(c for (w,), c in self._counts[0].items() if w != BOS)

    def vocabulary_tokens(self) -> list:
        return [w for (w,) in self._counts[0]]

    def merge(self, other: "CountTable") -> "CountTable":
        if other.order != self.order:
            raise CorpusError("cannot merge count tables of different order")
        merged = CountTable(self.order)
        for table in (self, other):
            for ngram, c in table.items():
                merged.add(ngram, c)
        return merged

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as f:
            for table in self._counts:
                for ngram in sorted(table):
                    f.write("%s\t%d\n" % (" ".join(ngram), table[ngram]))

    @classmethod
    def load(cls, path: str) -> "CountTable":
        entries = []
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if line:
                    tokens, count = line.rsplit("\t", 1)
                    entries.append((tuple(tokens.split(" ")), int(count)))
        table = cls(max((len(g) for g, _ in entries), default=1))
        for ngram, c in entries:
            table.add(ngram, c)
        return table


def count_ngrams(corpus: TokenizedCorpus, order: int) -> CountTable:
    """Count all k-grams (k <= order) of the <s>/</s>-wrapped sentences."""
    table = CountTable(order)
    counts = table._counts
    for sentence in corpus.with_boundaries():
        n = len(sentence)
        start = 0 if order >= 2 else 1
        for i in range(start, n):
            for k in range(1, order + 1):
                if i + k > n:
                    break
                ngram = tuple(sentence[i:i + k])
                d = counts[k - 1]
                d[ngram] = d.get(ngram, 0) + 1
    return table


def oov_rate(vocab, corpus: TokenizedCorpus) -> float:
    """Fraction of evaluation tokens missing from ``vocab``.

    Sentence boundary tokens are not counted. ``vocab`` may be a
    :class:`Vocabulary` or any container of tokens.
    """
    total = 0
    missing = 0
    for sentence in corpus:
        for w in sentence:
            if w in SPECIAL_TOKENS:
                continue
            total += 1
            if w not in vocab:
                missing += 1
    if total == 0:
        raise CorpusError("OOV rate is undefined for an empty corpus")
    return missing / total
