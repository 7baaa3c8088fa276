"""k-means clustering of externally trained word embeddings."""

import logging

import numpy as np

from ..corpus import SPECIAL_TOKENS
from .classmap import ClassMap, ClassMapError

_logger = logging.getLogger(__name__)


class EmbeddingTable:
    """Word vectors of a common dimension."""

    def __init__(self, words, vectors):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or len(words) != vectors.shape[0]:
            raise ClassMapError("expected one vector per word")
        if not np.all(np.isfinite(vectors)):
            raise ClassMapError("embeddings contain non-finite values")
        self.words = list(words)
        self.vectors = vectors
        self.index = {w: i for i, w in enumerate(self.words)}

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    def __getitem__(self, word):
        return self.vectors[self.index[word]]

    @classmethod
    def load(cls, path):
        """Read the text format: ``word v1 ... vd`` per line.

        A leading ``count dim`` header line, as written by word2vec, is
        skipped.
        """
        words, rows = [], []
        dim = None
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                fields = line.split()
                if not fields:
                    continue
                if lineno == 1 and len(fields) == 2 and all(x.isdigit() for x in fields):
                    continue
                vec = [float(x) for x in fields[1:]]
                if dim is None:
                    dim = len(vec)
                elif len(vec) != dim:
                    raise ClassMapError("%s line %d: expected %d values, got %d"
                                        % (path, lineno, dim, len(vec)))
                words.append(fields[0])
                rows.append(vec)
        return cls(words, np.array(rows).reshape(len(rows), dim or 0))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for w, v in zip(self.words, self.vectors):
                f.write(w + " " + " ".join(repr(float(x)) for x in v) + "\n")


def kmeans_plusplus(points, k, rng):
    """k-means++ seeding; returns indices of the chosen points."""
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a centre
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        chosen.append(idx)
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return chosen


def _sq_distances(points, centres):
    d2 = (points ** 2).sum(axis=1)[:, None] - 2.0 * points @ centres.T + (centres ** 2).sum(axis=1)[None, :]
    return np.maximum(d2, 0.0)


def lloyd(points, centres, max_iterations, history=None):
    """Lloyd iterations with singleton re-seeding of empty clusters.

    An empty cluster takes over the point farthest from its current centre
    (lowest index on ties) among clusters with more than one member.
    Returns ``(labels, centres, inertia)``.
    """
    centres = centres.copy()
    k = len(centres)
    labels = None
    for _ in range(max_iterations):
        d2 = _sq_distances(points, centres)
        new_labels = d2.argmin(axis=1)
        sizes = np.bincount(new_labels, minlength=k)
        for c in np.flatnonzero(sizes == 0):
            own = d2[np.arange(len(points)), new_labels]
            donor = sizes[new_labels] > 1
            far = np.where(donor, own, -1.0)
            p = int(np.argmax(far))
            sizes[new_labels[p]] -= 1
            new_labels[p] = c
            sizes[c] = 1
        for c in range(k):
            centres[c] = points[new_labels == c].mean(axis=0)
        inertia = float(((points - centres[new_labels]) ** 2).sum())
        if history is not None:
            history.append(inertia)
        converged = labels is not None and np.array_equal(labels, new_labels)
        labels = new_labels
        if converged:
            break
    inertia = float(((points - centres[labels]) ** 2).sum())
    return labels, centres, inertia


def kmeans_cluster(embeddings: EmbeddingTable, num_classes: int, counts, seed: int = 0,
                   max_iterations: int = 100, words=None, history=None) -> ClassMap:
    """Cluster words by the k-means objective over their embeddings.

    ``counts`` maps words to corpus counts for the membership term.
    ``words`` restricts clustering to a vocabulary; each of them must have
    an embedding.
    """
    if words is None:
        words = [w for w in embeddings.words if w not in SPECIAL_TOKENS]
    missing = [w for w in words if w not in embeddings]
    if missing:
        raise ClassMapError("words without embeddings: %s" % ", ".join(missing[:20]))
    if num_classes < 1 or num_classes > len(words):
        raise ClassMapError("num_classes %d outside [1, %d]" % (num_classes, len(words)))
    points = np.stack([embeddings[w] for w in words])
    rng = np.random.default_rng(seed)
    init = points[kmeans_plusplus(points, num_classes, rng)]
    labels, _, inertia = lloyd(points, init, max_iterations, history=history)
    _logger.info("k-means: %d words, %d classes, inertia %.4f", len(words), num_classes, inertia)
    return ClassMap.from_counts({w: int(c) for w, c in zip(words, labels)}, num_classes, counts)
