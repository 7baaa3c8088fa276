"""Word-to-class assignments with within-class unigram probabilities."""

import math
from typing import Iterable, Mapping, Optional

from ..corpus import BOS, EOS, SPECIAL_TOKENS, UNK, Vocabulary


class ClassMapError(ValueError):
    pass


def class_token(class_id: int) -> str:
    return "CLASS-%05d" % class_id


class ClassMap:
    """Assignment of words to ``num_classes`` regular classes.

    The sentence boundary and unknown-word tokens always sit in singleton
    reserved classes with ids ``num_classes``, ``num_classes + 1`` and
    ``num_classes + 2`` (``<s>``, ``</s>``, ``<unk>``). Membership
    probabilities are natural-log ML unigram estimates within a class.
    """

    def __init__(self, assignment: Mapping[str, int], num_classes: int,
                 membership_logprob: Mapping[str, float]):
        if num_classes < 1:
            raise ClassMapError("num_classes must be >= 1")
        self.num_classes = num_classes
        self._assignment = {}
        for w, c in assignment.items():
            if w in SPECIAL_TOKENS:
                continue
            if not 0 <= c < num_classes:
                raise ClassMapError("class id %d of %r outside [0, %d)" % (c, w, num_classes))
            self._assignment[w] = int(c)
        for i, s in enumerate(SPECIAL_TOKENS):
            self._assignment[s] = num_classes + i
        self._logprob = {w: float(membership_logprob.get(w, 0.0)) for w in self._assignment}
        for s in SPECIAL_TOKENS:
            self._logprob[s] = 0.0

    @classmethod
    def from_counts(cls, assignment: Mapping[str, int], num_classes: int,
                    counts: Mapping[str, int]) -> "ClassMap":
        """Build a class map whose membership term is the ML unigram."""
        totals = {}
        sizes = {}
        for w, c in assignment.items():
            if w in SPECIAL_TOKENS:
                continue
            totals[c] = totals.get(c, 0) + counts.get(w, 0)
            sizes[c] = sizes.get(c, 0) + 1
        logprob = {}
        for w, c in assignment.items():
            if w in SPECIAL_TOKENS:
                continue
            if totals[c] > 0:
                n = counts.get(w, 0)
                logprob[w] = math.log(n / totals[c]) if n > 0 else -math.inf
            else:
                # no counts at all in this class: spread uniformly
                logprob[w] = -math.log(sizes[c])
        return cls(assignment, num_classes, logprob)

    @property
    def total_classes(self) -> int:
        return self.num_classes + len(SPECIAL_TOKENS)

    def __contains__(self, word):
        return word in self._assignment

    def __len__(self):
        return len(self._assignment)

    def __eq__(self, other):
        return isinstance(other, ClassMap) and self.num_classes == other.num_classes \
            and self._assignment == other._assignment

    def words(self) -> list:
        return [w for w in self._assignment if w not in SPECIAL_TOKENS]

    def class_of(self, word: str) -> int:
        try:
            return self._assignment[word]
        except KeyError:
            raise ClassMapError("word %r has no class" % word) from None

    def class_label(self, word: str) -> str:
        """Token naming the class of ``word`` in a class-sequence model."""
        if word in SPECIAL_TOKENS:
            return word
        return class_token(self.class_of(word))

    def logprob(self, word: str) -> float:
        return self._logprob[word]

    def assignment(self) -> dict:
        return {w: c for w, c in self._assignment.items() if w not in SPECIAL_TOKENS}

    def members(self) -> dict:
        groups = {}
        for w, c in self._assignment.items():
            groups.setdefault(c, []).append(w)
        return groups

    def class_sizes(self) -> list:
        sizes = [0] * self.num_classes
        for w, c in self._assignment.items():
            if c < self.num_classes:
                sizes[c] += 1
        return sizes

    def relabel(self, permutation) -> "ClassMap":
        """Class map with regular class ``c`` renamed ``permutation[c]``."""
        return ClassMap({w: permutation[c] for w, c in self.assignment().items()},
                        self.num_classes, self._logprob)

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as f:
            for w, c in sorted(self._assignment.items(), key=lambda wc: (wc[1], wc[0])):
                lp = self._logprob[w]
                f.write("%d\t%s\t%s\n" % (c, w, repr(lp / math.log(10)) if lp > -math.inf else "-inf"))

    @classmethod
    def load(cls, path: str, vocab: Optional[Vocabulary] = None) -> "ClassMap":
        """Read ``class_id<TAB>word<TAB>log10 P(w|class)`` lines.

        With ``vocab``, every word must be in the vocabulary; offenders are
        reported together.
        """
        assignment = {}
        logprob = {}
        reserved = {}
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) not in (2, 3):
                    raise ClassMapError("%s line %d: expected class<TAB>word<TAB>log10prob"
                                        % (path, lineno))
                c, w = int(fields[0]), fields[1]
                if w in SPECIAL_TOKENS:
                    reserved[w] = c
                    continue
                assignment[w] = c
                if len(fields) == 3:
                    logprob[w] = float(fields[2]) * math.log(10)
        if vocab is not None:
            missing = sorted(w for w in assignment if w not in vocab)
            if missing:
                raise ClassMapError("words missing from vocabulary: %s" % ", ".join(missing))
        num_classes = reserved.get(BOS, max(assignment.values(), default=-1) + 1)
        if not logprob and vocab is not None:
            return cls.from_counts(assignment, num_classes, {w: vocab.count(w) for w in assignment})
        return cls(assignment, num_classes, logprob)


def _class_ranked_words(words: Iterable[str], counts: Mapping[str, int]) -> list:
    return sorted(words, key=lambda w: (-counts.get(w, 0), w))


def init_classes(vocab: Vocabulary, num_classes: int, strategy: str = "frequency_mod",
                 source=None) -> ClassMap:
    """Initial clustering for the exchange algorithm.

    ``frequency_mod`` puts the i-th most frequent word in class
    ``i mod num_classes``. ``from_file`` reads a class map file (``source``
    is the path) and ``from_classmap`` copies an existing
    :class:`ClassMap`. A source with more classes than requested is folded
    by ranking its classes by total count and applying the same modulo
    rule at class level, which keeps source classes intact.
    """
    if num_classes < 2:
        raise ClassMapError("num_classes must be >= 2, got %d" % num_classes)
    if num_classes > vocab.num_words:
        raise ClassMapError("num_classes %d exceeds vocabulary size %d"
                            % (num_classes, vocab.num_words))
    counts = {w: vocab.count(w) for w in vocab.words()}
    if strategy == "frequency_mod":
        assignment = {w: i % num_classes for i, w in enumerate(vocab.words())}
        return ClassMap.from_counts(assignment, num_classes, counts)
    if strategy == "from_file":
        source = ClassMap.load(source, vocab)
    elif strategy != "from_classmap":
        raise ClassMapError("unknown initialization strategy %r" % strategy)
    if source is None:
        raise ClassMapError("strategy %r needs a source class map" % strategy)
    missing = sorted(w for w in source.words() if w not in vocab)
    if missing:
        raise ClassMapError("words missing from vocabulary: %s" % ", ".join(missing))
    src = source.assignment()
    uncovered = [w for w in vocab.words() if w not in src]
    used = sorted(set(src.values()))
    if len(used) <= num_classes and not uncovered and max(used) < num_classes:
        return ClassMap.from_counts(src, num_classes, counts)
    totals = {}
    for w, c in src.items():
        totals[c] = totals.get(c, 0) + counts.get(w, 0)
    ranked = sorted(totals, key=lambda c: (-totals[c], c))
    fold = {c: i % num_classes for i, c in enumerate(ranked)}
    assignment = {w: fold[c] for w, c in src.items()}
    # words the source does not cover continue the modulo sequence
    for i, w in enumerate(_class_ranked_words(uncovered, counts)):
        assignment[w] = (len(ranked) + i) % num_classes
    return ClassMap.from_counts(assignment, num_classes, counts)
