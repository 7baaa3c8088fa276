"""Rule-based merging of colloquial word forms with their standard forms."""

import logging
import re
from collections import deque
from dataclasses import dataclass

from ..corpus import SPECIAL_TOKENS
from .classmap import ClassMap, ClassMapError

_logger = logging.getLogger(__name__)


class RuleSyntaxError(ClassMapError):
    pass


@dataclass(frozen=True)
class Rule:
    """String rewrite ``pattern -> replacement``.

    ``^`` and ``$`` anchor the pattern to the start or end of the word; an
    unanchored pattern may apply at any position.
    """

    pattern: str
    replacement: str
    at_start: bool = False
    at_end: bool = False

    @classmethod
    def parse(cls, text: str, index: int = 0) -> "Rule":
        fields = text.split("\t")
        if len(fields) != 2:
            raise RuleSyntaxError("rule %d: expected pattern<TAB>replacement, got %r" % (index, text))
        pattern, replacement = fields
        at_start = pattern.startswith("^")
        at_end = pattern.endswith("$")
        core = pattern[1 if at_start else 0:len(pattern) - (1 if at_end else 0)]
        if not core:
            raise RuleSyntaxError("rule %d: empty pattern" % index)
        if "^" in core or "$" in core or any(c.isspace() for c in core + replacement):
            raise RuleSyntaxError("rule %d: anchors only at the ends, no whitespace" % index)
        return cls(core, replacement, at_start, at_end)

    def positions(self, word: str):
        if self.at_start and self.at_end:
            return [0] if word == self.pattern else []
        if self.at_start:
            return [0] if word.startswith(self.pattern) else []
        if self.at_end:
            return [len(word) - len(self.pattern)] if word.endswith(self.pattern) else []
        return [m.start() for m in re.finditer("(?=%s)" % re.escape(self.pattern), word)]

    def apply(self, word: str):
        """Every word obtained by rewriting one occurrence of the pattern."""
        n = len(self.pattern)
        return [word[:i] + self.replacement + word[i + n:] for i in self.positions(word)]


class RuleSet:
    def __init__(self, rules):
        self.rules = list(rules)

    def __len__(self):
        return len(self.rules)

    @classmethod
    def parse(cls, text: str) -> "RuleSet":
        rules = []
        for line in text.splitlines():
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            rules.append(Rule.parse(line, len(rules)))
        return cls(rules)

    @classmethod
    def load(cls, path: str) -> "RuleSet":
        with open(path, encoding="utf-8") as f:
            return cls.parse(f.read())

    def reductions(self, word: str, max_steps: int = 3, limit: int = 1000) -> set:
        """Forms reachable from ``word`` by 1 to ``max_steps`` rule applications."""
        seen = {word}
        found = set()
        queue = deque([(word, 0)])
        while queue and len(found) < limit:
            form, depth = queue.popleft()
            if depth == max_steps:
                continue
            for rule in self.rules:
                for new in rule.apply(form):
                    if new and new not in seen:
                        seen.add(new)
                        found.add(new)
                        queue.append((new, depth + 1))
        return found


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the lexicographically smaller root for determinism
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def rules_merge(standard_vocab, colloquial_vocab, rules: RuleSet, max_steps: int = 3) -> ClassMap:
    """Group colloquial forms with the standard words they reduce from.

    Each standard word is compared with the colloquial vocabulary through
    the forms its rules generate. Matches join the standard word's class;
    a colloquial form matched by two standard words joins both into one
    class, so every word ends up in exactly one class. Unmatched words are
    singletons. Class ids follow descending class frequency.
    """
    counts = {}
    for vocab in (standard_vocab, colloquial_vocab):
        for w in vocab.words():
            counts[w] = max(counts.get(w, 0), vocab.count(w))
    colloquial = set(colloquial_vocab.words())
    uf = _UnionFind()
    for w in counts:
        uf.find(w)
    merges = 0
    for std in standard_vocab.words():
        for form in rules.reductions(std, max_steps):
            if form in colloquial:
                uf.union(std, form)
                merges += 1
    groups = {}
    for w in counts:
        groups.setdefault(uf.find(w), []).append(w)
    ranked = sorted(groups.values(), key=lambda g: (-sum(counts[w] for w in g), min(g)))
    assignment = {w: i for i, g in enumerate(ranked) for w in g if w not in SPECIAL_TOKENS}
    _logger.info("rules: %d merges, %d classes from %d words", merges, len(ranked), len(counts))
    return ClassMap.from_counts(assignment, max(len(ranked), 1), counts)
