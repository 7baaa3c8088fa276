"""Independent reference computations used as test oracles.

Nothing here imports the code paths it checks; each function recomputes
its quantity directly from the definition.
"""

import itertools
import math
from collections import Counter

import numpy as np

BOS, EOS = "<s>", "</s>"


def class_bigram_loglik(sentences, class_of):
    """Class-bigram log likelihood summed token by token.

    ``class_of`` maps each word (and <s>, </s>) to a class label.
    """
    pair = Counter()
    hist = Counter()
    cls_target = Counter()
    word_target = Counter()
    for s in sentences:
        tokens = [BOS] + list(s) + [EOS]
        for u, w in zip(tokens, tokens[1:]):
            cu, cw = class_of[u], class_of[w]
            pair[cu, cw] += 1
            hist[cu] += 1
            cls_target[cw] += 1
            word_target[w] += 1
    total = 0.0
    for s in sentences:
        tokens = [BOS] + list(s) + [EOS]
        for u, w in zip(tokens, tokens[1:]):
            cu, cw = class_of[u], class_of[w]
            total += math.log(pair[cu, cw] / hist[cu]) + math.log(word_target[w] / cls_target[cw])
    return total


def set_partitions(items, k):
    """All partitions of ``items`` into exactly ``k`` non-empty labelled-canonical blocks."""
    items = list(items)
    n = len(items)

    def rec(i, labels, used):
        if i == n:
            if used == k:
                yield dict(zip(items, labels))
            return
        for c in range(min(used + 1, k)):
            yield from rec(i + 1, labels + [c], max(used, c + 1))

    yield from rec(0, [], 0)


def all_assignments(items, k):
    for labels in itertools.product(range(k), repeat=len(items)):
        yield dict(zip(items, labels))


def reference_kmeans(points, k, seed, max_iterations):
    """Plain-loop Lloyd with the same k-means++ and re-seeding protocol."""
    points = [list(map(float, p)) for p in points]
    n = len(points)
    rng = np.random.default_rng(seed)

    def d2(a, b):
        return sum((x - y) ** 2 for x, y in zip(a, b))

    chosen = [int(rng.integers(n))]
    dist = [d2(p, points[chosen[0]]) for p in points]
    for _ in range(1, k):
        total = sum(dist)
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=np.array(dist) / total))
        chosen.append(idx)
        dist = [min(dist[i], d2(points[i], points[idx])) for i in range(n)]
    centres = [list(points[i]) for i in chosen]
    labels = None
    for _ in range(max_iterations):
        own = []
        new = []
        for p in points:
            ds = [d2(p, c) for c in centres]
            j = min(range(k), key=lambda c: (ds[c], c))
            new.append(j)
            own.append(ds[j])
        sizes = Counter(new)
        for c in range(k):
            if sizes[c] == 0:
                best, far = None, -1.0
                for i in range(n):
                    if sizes[new[i]] > 1 and own[i] > far:
                        best, far = i, own[i]
                sizes[new[best]] -= 1
                new[best] = c
                sizes[c] = 1
        for c in range(k):
            members = [points[i] for i in range(n) if new[i] == c]
            centres[c] = [sum(col) / len(members) for col in zip(*members)]
        done = labels == new
        labels = new
        if done:
            break
    return sum(d2(points[i], centres[labels[i]]) for i in range(n)), labels


def padded(sentences):
    for s in sentences:
        yield [BOS] + list(s) + [EOS]


def kn_oracle(sentences, order):
    """Interpolated modified Kneser-Ney computed recursively from raw text.

    Returns ``prob(word, history)`` and the unit list. The recursion is
    the textbook interpolated form; no back-off weights are involved.
    """
    raw = [Counter() for _ in range(order)]
    for toks in padded(sentences):
        for i in range(len(toks)):
            for k in range(1, order + 1):
                if i + k <= len(toks):
                    raw[k - 1][tuple(toks[i:i + k])] += 1
    units = sorted({g[0] for g in raw[0]} - {BOS} | {EOS, "<unk>"})
    mod = []
    for k in range(1, order + 1):
        if k == order:
            level = {g: c for g, c in raw[k - 1].items() if g != (BOS,)}
        else:
            left = Counter(g[1:] for g in raw[k])
            level = {g: (c if g[0] == BOS else left[g]) for g, c in raw[k - 1].items() if g != (BOS,)}
        mod.append(level)
    discounts = []
    for level in mod:
        n = [sum(1 for c in level.values() if c == i) for i in (1, 2, 3, 4)]
        d = None
        if min(n) > 0:
            y = n[0] / (n[0] + 2 * n[1])
            d = [1 - 2 * y * n[1] / n[0], 2 - 3 * y * n[2] / n[1], 3 - 4 * y * n[3] / n[2]]
            if not all(0 < d[i] <= i + 1 for i in range(3)):
                d = None
        discounts.append(d or [0.5, 0.5, 0.5])

    def prob(word, history):
        history = tuple(history)[-(order - 1):] if order > 1 else ()
        k = len(history) + 1
        level, d = mod[k - 1], discounts[k - 1]
        follow = {g[-1]: c for g, c in level.items() if g[:-1] == history}
        lower = 1.0 / len(units) if k == 1 else prob(word, history[1:])
        total = sum(follow.values())
        if total == 0:
            return lower
        gamma = sum(d[min(c, 3) - 1] for c in follow.values()) / total
        c = follow.get(word, 0)
        return (c - d[min(c, 3) - 1]) / total + gamma * lower if c else gamma * lower

    return prob, units


class StrictArpa:
    """Minimal ARPA reader that validates the line grammar exactly."""

    def __init__(self, text):
        import re
        lines = text.split("\n")
        i = lines.index("\\data\\")
        counts = {}
        i += 1
        while lines[i].startswith("ngram "):
            m = re.fullmatch(r"ngram ([1-9]\d*)=(\d+)", lines[i])
            assert m, lines[i]
            counts[int(m.group(1))] = int(m.group(2))
            i += 1
        self.order = max(counts)
        self.prob, self.bow = {}, {}
        number = r"-?\d+(\.\d+)?"
        for k in range(1, self.order + 1):
            assert lines[i] == "", repr(lines[i])
            assert lines[i + 1] == "\\%d-grams:" % k
            i += 2
            for _ in range(counts[k]):
                fields = lines[i].split("\t")
                assert re.fullmatch(number, fields[0]), lines[i]
                tokens = tuple(fields[1].split(" "))
                assert len(tokens) == k and all(tokens)
                if k < self.order:
                    assert len(fields) == 3 and re.fullmatch(number, fields[2]), lines[i]
                    self.bow[tokens] = float(fields[2])
                else:
                    assert len(fields) == 2, lines[i]
                self.prob[tokens] = float(fields[0])
                i += 1
        assert lines[i] == "" and lines[i + 1] == "\\end\\" and lines[i + 2:] in ([], [""])

    def logprob(self, word, history):
        g = tuple(history)[-(self.order - 1):] + (word,) if self.order > 1 else (word,)
        total = 0.0
        while g not in self.prob:
            total += self.bow.get(g[:-1], 0.0)
            g = g[1:]
        return total + self.prob[g]
