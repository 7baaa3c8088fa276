"""Synthetic data generators shared by the test-suite."""

import numpy as np

from bigvocab.corpus import TokenizedCorpus


def zipf_corpus(num_sentences, vocab_size, seed=0, exponent=1.1, max_len=12):
    rng = np.random.default_rng(seed)
    ranks = np.arange(1, vocab_size + 1)
    p = ranks ** -exponent
    p /= p.sum()
    words = ["w%d" % i for i in range(vocab_size)]
    sentences = []
    for _ in range(num_sentences):
        n = int(rng.integers(1, max_len + 1))
        sentences.append(tuple(words[i] for i in rng.choice(vocab_size, size=n, p=p)))
    return TokenizedCorpus(tuple(sentences))


def text_corpus(*lines, tag=""):
    return TokenizedCorpus(tuple(tuple(line.split()) for line in lines), (tag,) * len(lines))


def class_markov_corpus(num_tokens, num_classes=20, words_per_class=10, seed=0,
                        rare_fraction=0.0, rare_words_per_class=0):
    """Sentences generated by a sparse class-bigram chain.

    Each class emits a few head words with Zipfian weights. Optionally a
    share ``rare_fraction`` of emissions comes from a large pool of rare
    per-class words, which makes word n-grams sparse while class n-grams
    stay well estimated.
    """
    rng = np.random.default_rng(seed)
    succ = {c: rng.choice(num_classes, size=3, replace=False) for c in range(num_classes)}
    head = {c: ["c%dw%d" % (c, j) for j in range(words_per_class)] for c in range(num_classes)}
    hw = 1.0 / np.arange(1, words_per_class + 1)
    hw /= hw.sum()
    sentences = []
    total = 0
    while total < num_tokens:
        n = int(rng.integers(4, 14))
        c = int(rng.integers(num_classes))
        sentence = []
        for _ in range(n):
            if rare_words_per_class and rng.random() < rare_fraction:
                w = "c%dr%d" % (c, rng.integers(rare_words_per_class))
            else:
                w = head[c][rng.choice(words_per_class, p=hw)]
            sentence.append(w)
            c = int(succ[c][rng.choice(3, p=[0.7, 0.2, 0.1])])
        sentences.append(tuple(sentence))
        total += n
    return TokenizedCorpus(tuple(sentences))


def agglutinative_wordlist(num_types, seed=0, num_stems=None, alphabet="aeioukltsnmrvhjp"):
    """Word types built from random stems and a small suffix inventory."""
    rng = np.random.default_rng(seed)
    letters = list(alphabet)

    def piece(lo, hi):
        return "".join(rng.choice(letters, size=int(rng.integers(lo, hi + 1))))

    num_stems = num_stems or max(10, num_types // 6)
    stems = sorted({piece(3, 6) for _ in range(num_stems)})
    suffixes = sorted({piece(1, 3) for _ in range(25)})
    words = {}
    attempts = 0
    while len(words) < num_types and attempts < 50 * num_types:
        attempts += 1
        w = str(rng.choice(stems)) + "".join(rng.choice(suffixes, size=int(rng.integers(0, 4))))
        words[w] = words.get(w, 0) + int(rng.integers(1, 5))
    return words


def random_lattice(num_nodes, units, seed=0, extra_links=None, max_paths=1000, null_fraction=0.0):
    """Random acyclic lattice with a spine ``0 -> 1 -> ... -> N-1`` plus forward skips.

    Node times strictly increase and acoustic scores are proportional to
    link duration, as in a real lattice. Extra links are added only while
    the path count stays within ``max_paths``.
    """
    from bigvocab.lattice import Lattice, Link

    rng = np.random.default_rng(seed)
    times = np.cumsum(rng.integers(1, 4, size=num_nodes)).astype(float)
    nodes = {i: float(times[i]) for i in range(num_nodes)}
    links = []

    def new_link(s, e):
        unit = None if rng.random() < null_fraction else str(units[rng.integers(len(units))])
        acoustic = -(times[e] - times[s]) * float(rng.uniform(0.5, 1.5))
        links.append(Link(len(links), s, e, unit, acoustic, -float(rng.uniform(0, 3))))

    for i in range(num_nodes - 1):
        new_link(i, i + 1)
    extra = 2 * num_nodes if extra_links is None else extra_links
    for _ in range(extra):
        s = int(rng.integers(0, num_nodes - 1))
        e = int(rng.integers(s + 1, min(s + 4, num_nodes - 1) + 1))
        new_link(s, e)
        if Lattice(nodes, links).num_paths() > max_paths:
            links.pop()
    return Lattice(nodes, links)
