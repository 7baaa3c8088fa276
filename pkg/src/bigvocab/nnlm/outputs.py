"""Output layers: full softmax, two-level softmax, NCE and BlackOut.

Every layer maps features X [N, D] to a loss on targets [N] with
per-token weights [N]. ``loss`` returns ``(loss, dX, grads)`` where the
loss is the weighted sum over tokens; ``log_probs`` returns the exactly
normalized natural-log distribution used at evaluation time.
"""

import logging
import math

import numpy as np

_logger = logging.getLogger(__name__)

SCORE_CLAMP = 50.0


def log_softmax(scores, axis=-1):
    m = scores.max(axis=axis, keepdims=True)
    shifted = scores - m
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def softmax_nll(scores, targets, weights=None):
    """Cross entropy of softmax(scores) on targets, summed with weights.

    Returns ``(loss, dscores)``.
    """
    n = len(targets)
    weights = np.ones(n, dtype=scores.dtype) if weights is None else weights
    lp = log_softmax(scores)
    rows = np.arange(n)
    loss = -float((weights * lp[rows, targets]).sum())
    d = np.exp(lp)
    d[rows, targets] -= 1.0
    d *= weights[:, None]
    return loss, d


def _scatter_columns(shape, cols, values, dtype):
    """Sum ``values[..., d]`` into a [V, D] array at rows ``cols``."""
    out = np.zeros(shape, dtype=dtype)
    np.add.at(out, cols.ravel(), values.reshape(-1, shape[1]))
    return out


class SoftmaxOutput:
    kind = "softmax"

    def __init__(self, vocab_size):
        self.vocab_size = vocab_size

    def param_shapes(self, dim):
        return {"output.W": (dim, self.vocab_size), "output.b": (self.vocab_size,)}

    def scores(self, params, X):
        return X @ params["output.W"] + params["output.b"]

    def log_probs(self, params, X):
        return log_softmax(self.scores(params, X))

    def loss(self, params, X, targets, weights, noise=None):
        loss, ds = softmax_nll(self.scores(params, X), targets, weights)
        grads = {"output.W": X.T @ ds, "output.b": ds.sum(axis=0)}
        return loss, ds @ params["output.W"].T, grads


class Partition:
    """Two-level grouping of output ids for the hierarchical softmax."""

    def __init__(self, groups):
        groups = [np.asarray(g, dtype=np.int64) for g in groups if len(g)]
        if not groups:
            raise ValueError("empty partition")
        self.groups = groups
        size = sum(len(g) for g in groups)
        self.group_of = np.empty(size, dtype=np.int64)
        self.position = np.empty(size, dtype=np.int64)
        flat = np.concatenate(groups)
        if sorted(flat.tolist()) != list(range(size)):
            raise ValueError("partition must cover ids 0..N-1 exactly once")
        width = max(len(g) for g in groups)
        self.columns = np.zeros((len(groups), width), dtype=np.int64)
        self.mask = np.zeros((len(groups), width), dtype=bool)
        for gi, g in enumerate(groups):
            self.group_of[g] = gi
            self.position[g] = np.arange(len(g))
            self.columns[gi, :len(g)] = g
            self.mask[gi, :len(g)] = True

    @property
    def num_groups(self):
        return len(self.groups)

    def __len__(self):
        return len(self.group_of)

    def to_lists(self):
        return [g.tolist() for g in self.groups]


def build_hsoftmax_partition(units, counts=None, classmap=None, group_size=None) -> Partition:
    """Split output ids into groups of ceil(sqrt(N)) consecutive ids.

    Ids are ordered by class (then frequency) when a class map is given,
    otherwise by descending frequency, so each group is a frequency bin.
    ``units`` lists the unit strings by id; ``counts`` their frequencies.
    """
    n = len(units)
    counts = np.zeros(n) if counts is None else np.asarray(counts, dtype=np.float64)
    if classmap is not None:
        def cls(u):
            return classmap.class_of(u) if u in classmap else -1
        order = sorted(range(n), key=lambda i: (cls(units[i]), -counts[i], i))
    else:
        order = sorted(range(n), key=lambda i: (-counts[i], i))
    size = group_size or math.ceil(math.sqrt(n))
    return Partition([order[i:i + size] for i in range(0, n, size)])


class HierarchicalSoftmaxOutput:
    """P(w) = P(group(w)) P(w | group(w)); only the target group is scored in training."""

    kind = "hsoftmax"

    def __init__(self, partition: Partition):
        self.partition = partition
        self.vocab_size = len(partition)

    def param_shapes(self, dim):
        g, v = self.partition.num_groups, self.vocab_size
        return {"group.W": (dim, g), "group.b": (g,), "output.W": (dim, v), "output.b": (v,)}

    def log_probs(self, params, X):
        lg = log_softmax(X @ params["group.W"] + params["group.b"])
        word = X @ params["output.W"] + params["output.b"]
        out = np.empty_like(word)
        for gi, cols in enumerate(self.partition.groups):
            out[:, cols] = log_softmax(word[:, cols]) + lg[:, gi:gi + 1]
        return out

    def loss(self, params, X, targets, weights, noise=None):
        part = self.partition
        n, d = X.shape
        gt = part.group_of[targets]
        pos = part.position[targets]
        loss_g, dg = softmax_nll(X @ params["group.W"] + params["group.b"], gt, weights)
        cols = part.columns[gt]
        mask = part.mask[gt]
        w_sel = params["output.W"].T[cols]  # [N, S, D]
        ws = np.einsum("nd,nsd->ns", X, w_sel) + params["output.b"][cols]
        ws = np.where(mask, ws, -np.inf)
        lp = log_softmax(ws)
        rows = np.arange(n)
        loss_w = -float((weights * lp[rows, pos]).sum())
        dws = np.exp(lp)
        dws[rows, pos] -= 1.0
        dws *= weights[:, None]
        dws[~mask] = 0.0
        dX = dg @ params["group.W"].T + np.einsum("ns,nsd->nd", dws, w_sel)
        v = self.vocab_size
        grads = {
            "group.W": X.T @ dg,
            "group.b": dg.sum(axis=0),
            "output.W": _scatter_columns((v, d), cols, dws[:, :, None] * X[:, None, :], X.dtype).T,
            "output.b": np.bincount(cols.ravel(), weights=dws.ravel(), minlength=v).astype(X.dtype),
        }
        return loss_g + loss_w, dX, grads


def _clamp(scores):
    over = np.abs(scores) > SCORE_CLAMP
    if over.any():
        _logger.warning("clamping %d scores to +-%g", int(over.sum()), SCORE_CLAMP)
        scores = np.clip(scores, -SCORE_CLAMP, SCORE_CLAMP)
    return scores, ~over


class _SampledOutput(SoftmaxOutput):
    """Shared plumbing: unnormalized scores for targets and shared noise ids."""

    def __init__(self, vocab_size, log_q, num_noise):
        super().__init__(vocab_size)
        self.log_q = np.asarray(log_q, dtype=np.float64)
        self.num_noise = num_noise

    def _sampled_scores(self, params, X, targets, noise):
        W, b = params["output.W"], params["output.b"]
        s_t = np.einsum("nd,dn->n", X, W[:, targets]) + b[targets]
        s_n = X @ W[:, noise] + b[noise]
        return s_t, s_n

    def _backprop(self, params, X, targets, noise, ds_t, ds_n):
        W = params["output.W"]
        v, d = self.vocab_size, X.shape[1]
        dX = ds_t[:, None] * W[:, targets].T + ds_n @ W[:, noise].T
        gW = _scatter_columns((v, d), targets, ds_t[:, None] * X, X.dtype)
        np.add.at(gW, noise, (X.T @ ds_n).T)
        gb = np.bincount(targets, weights=ds_t, minlength=v) + np.bincount(noise, weights=ds_n.sum(axis=0),
                                                                          minlength=v)
        return dX, {"output.W": gW.T, "output.b": gb.astype(X.dtype)}


class NCEOutput(_SampledOutput):
    """Binary classification of data versus k noise words, normalizer fixed at one."""

    kind = "nce"

    def loss(self, params, X, targets, weights, noise):
        k = len(noise)
        s_t, s_n = self._sampled_scores(params, X, targets, noise)
        s_t, live_t = _clamp(s_t)
        s_n, live_n = _clamp(s_n)
        a_t = s_t - (math.log(k) + self.log_q[targets]).astype(X.dtype)
        a_n = s_n - (math.log(k) + self.log_q[noise]).astype(X.dtype)[None, :]
        # log sigmoid(a) = -logaddexp(0, -a)
        loss = float((weights * (np.logaddexp(0, -a_t) + np.logaddexp(0, a_n).sum(axis=1))).sum())
        sig_t = 1.0 / (1.0 + np.exp(-a_t))
        sig_n = 1.0 / (1.0 + np.exp(-a_n))
        ds_t = -weights * (1.0 - sig_t) * live_t
        ds_n = weights[:, None] * sig_n * live_n
        dX, grads = self._backprop(params, X, targets, noise, ds_t, ds_n)
        return loss, dX, grads


def classifier_probability(score, k, q):
    """P(C=1 | w) for an NCE model with score log p(w)."""
    p = math.exp(score)
    return p / (p + k * q)


class BlackOutOutput(_SampledOutput):
    """Weighted softmax over the target and the noise set."""

    kind = "blackout"

    def set_probabilities(self, params, X, targets, noise):
        """Sampled-set probabilities: column 0 the target, then the noise ids.

        Noise ids are deduplicated; a noise id equal to a row's target is
        masked out of that row.
        """
        noise = np.unique(noise)
        s_t, s_n = self._sampled_scores(params, X, targets, noise)
        u = np.concatenate([(s_t - self.log_q[targets])[:, None], s_n - self.log_q[noise][None, :]], axis=1)
        mask = np.concatenate([np.ones((len(targets), 1), dtype=bool), noise[None, :] != targets[:, None]], axis=1)
        u = np.where(mask, u.astype(X.dtype), -np.inf)
        return np.exp(log_softmax(u)), mask, noise

    def loss(self, params, X, targets, weights, noise):
        p, mask, noise = self.set_probabilities(params, X, targets, noise)
        noise_mask = mask.copy()
        noise_mask[:, 0] = False
        with np.errstate(divide="ignore"):
            loss_rows = -np.log(p[:, 0]) - np.where(noise_mask, np.log1p(-p), 0.0).sum(axis=1)
        loss = float((weights * loss_rows).sum())
        ratio = np.where(noise_mask, p / np.where(noise_mask, 1.0 - p, 1.0), 0.0)
        du = p * (1.0 - ratio.sum(axis=1, keepdims=True)) + ratio
        du[:, 0] -= 1.0
        du = np.where(mask, du, 0.0) * weights[:, None]
        dX, grads = self._backprop(params, X, targets, noise, du[:, 0], du[:, 1:])
        return loss, dX, grads
