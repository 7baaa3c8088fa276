"""Lattice rescoring by token passing, and an exhaustive path-enumeration oracle.

A token is a partial path: its score so far, the last ``n`` units, the
language-model contexts needed to score the next unit and a back-pointer.
Nodes are processed in topological order. When a node is reached, its
incoming tokens are recombined (best token per ``n``-unit history),
capped at the ``c`` best and beam pruned; the survivors then advance
their language-model contexts in one batched call per model before
being extended along the outgoing links.

Link scores combine as ``acoustic_scale * a + lm_scale * lm`` with
``lm = lam * log P_nn + (1 - lam) * log P_ngram``; all internal scores
are natural logarithms.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..corpus import BOS, EOS
from ..subword import SegmentationError, join_morphs
from .slf import Lattice, LatticeError

_logger = logging.getLogger(__name__)
_LN10 = math.log(10.0)

DEFAULT_MAX_PATHS = 10 ** 6


@dataclass
class PruningConfig:
    recombination_order: float = 22
    cardinality: float = 62
    beam: float = 650.0  # natural log window on the interpolated total score
    lm_interpolation: float = 0.5  # weight of the neural model
    lm_scale: float = 1.0
    acoustic_scale: float = 1.0

    def __post_init__(self):
        if self.recombination_order < 1:
            raise ValueError("recombination order must be >= 1")
        if self.cardinality < 1:
            raise ValueError("cardinality must be >= 1")
        if not self.beam > 0:
            raise ValueError("beam must be positive")
        if not 0.0 <= self.lm_interpolation <= 1.0:
            raise ValueError("lm_interpolation must lie in [0, 1]")

    @classmethod
    def disabled(cls, **kw) -> "PruningConfig":
        """No recombination beyond identical histories, no cap, no beam (unless overridden)."""
        values = dict(recombination_order=math.inf, cardinality=math.inf, beam=math.inf)
        values.update(kw)
        return cls(**values)


# language-model adapters: per-token contexts, batched advance, unit scoring


class _NGramStream:
    def __init__(self, model):
        self.model = model
        self.keep = max(int(getattr(model, "order", 1)) - 1, 0)

    def initial(self):
        return (BOS,)[-self.keep:] if self.keep else ()

    def advance(self, contexts, units):
        if not self.keep:
            return [()] * len(units)
        return [(ctx + (u,))[-self.keep:] for ctx, u in zip(contexts, units)]

    def logprob(self, context, unit):
        return self.model.logprob(unit, context) * _LN10

    def sequences(self, sequences):
        return [[lp * _LN10 for lp in self.model.sentence_logprobs(list(s))] for s in sequences]


class _NNLMStream:
    """Contexts are ``(h, c, logprobs)`` rows of a :class:`NNLMScorer`."""

    def __init__(self, scorer):
        self.scorer = scorer
        state, lp = scorer.initial_state(1)
        self._initial = (state[0][0], state[1][0], lp[0])

    def initial(self):
        return self._initial

    def advance(self, contexts, units):
        h = np.stack([c[0] for c in contexts])
        c = np.stack([c[1] for c in contexts])
        (h2, c2), lp = self.scorer.step((h, c), list(units))
        return [(h2[i], c2[i], lp[i]) for i in range(len(units))]

    def logprob(self, context, unit):
        return self.scorer.unit_logprob(context[2], unit)

    def sequences(self, sequences):
        return self.scorer.sequence_logprobs([list(s) for s in sequences])


def _as_nnlm_scorer(model):
    from ..nnlm import Network, NNLMScorer

    if isinstance(model, Network):
        return NNLMScorer(model)
    return model


class LatticeScorer:
    """Interpolated language-model scoring shared by the decoder and the oracle."""

    def __init__(self, nn_model=None, ngram_model=None, pruning: Optional[PruningConfig] = None):
        self.pruning = pruning or PruningConfig()
        lam = self.pruning.lm_interpolation
        self.streams = []
        if lam > 0:
            if nn_model is None:
                raise ValueError("lm_interpolation %.3g needs a neural model" % lam)
            self.streams.append((lam, _NNLMStream(_as_nnlm_scorer(nn_model))))
        if lam < 1:
            if ngram_model is None:
                raise ValueError("lm_interpolation %.3g needs an n-gram model" % lam)
            self.streams.append((1.0 - lam, _NGramStream(ngram_model)))
        self.models = [s.scorer if isinstance(s, _NNLMStream) else s.model for _, s in self.streams]

    def check_unit_kind(self, lattice: Lattice):
        for model in self.models:
            kind = getattr(model, "unit_kind", None)
            if kind is not None and kind != lattice.unit_kind:
                raise LatticeError("lattice has %s units but a model scores %s units" % (lattice.unit_kind, kind))

    def initial(self):
        return tuple(s.initial() for _, s in self.streams)

    def advance(self, contexts, units):
        per_stream = [s.advance([c[i] for c in contexts], units) for i, (_, s) in enumerate(self.streams)]
        return list(zip(*per_stream))

    def lm(self, contexts, unit) -> float:
        return sum(w * s.logprob(c, unit) for (w, s), c in zip(self.streams, contexts))

    def sequence_lm(self, sequences) -> list:
        """Per-unit interpolated LM scores (``</s>`` last) for whole sequences."""
        rows = [[0.0] * (len(s) + 1) for s in sequences]
        for w, s in self.streams:
            for row, scores in zip(rows, s.sequences(sequences)):
                for i, v in enumerate(scores):
                    row[i] += w * v
        return rows

    def link_score(self, link, lm: float) -> float:
        return self.pruning.acoustic_scale * link.acoustic + self.pruning.lm_scale * lm


@dataclass
class PathResult:
    """A complete path with natural-log scores."""

    units: tuple
    links: tuple
    score: float
    lm_scores: tuple = ()  # per link, interpolated LM (0 for null links)
    eos_lm: float = 0.0
    fallback: bool = False
    link_lm: dict = field(default_factory=dict)  # best-token LM score per reached link

    @property
    def total_log10(self) -> float:
        return self.score / _LN10


class _Token:
    __slots__ = ("score", "history", "contexts", "parent", "link", "lm")

    def __init__(self, score, history, contexts, parent, link, lm):
        self.score = score
        self.history = history
        self.contexts = contexts  # None until the node it reached is expanded
        self.parent = parent
        self.link = link
        self.lm = lm

    def sort_key(self):
        return (-self.score, len(self.history), self.history)


def _trim(history, n):
    return history if n == math.inf or len(history) <= n else history[len(history) - int(n):]


def _time_reference(times):
    """Sorted unique times and a lookup from time to index."""
    unique = sorted(set(times))
    return unique, {t: i for i, t in enumerate(unique)}


def _decode(lattice: Lattice, scorer: LatticeScorer, pruning: PruningConfig):
    n, c, beam = pruning.recombination_order, pruning.cardinality, pruning.beam
    unique_times, time_index = _time_reference(lattice.nodes.values())
    # best token score per time slice, over finalized and pending tokens
    best_at_time = np.full(len(unique_times), -np.inf)
    pending = {node: [] for node in lattice.nodes}
    link_lm = {}

    def offer(node, token):
        pending[node].append(token)
        i = time_index[lattice.nodes[node]]
        if token.score > best_at_time[i]:
            best_at_time[i] = token.score

    offer(lattice.start, _Token(0.0, (), scorer.initial(), None, None, 0.0))
    for node in lattice.order:
        tokens = pending.pop(node)
        if not tokens:
            continue
        # recombination: keep the best token per truncated history
        best = {}
        for tok in tokens:
            kept = best.get(tok.history)
            if kept is None or tok.sort_key() < kept.sort_key():
                best[tok.history] = tok
        tokens = sorted(best.values(), key=_Token.sort_key)
        if c != math.inf:
            tokens = tokens[:int(c)]
        if beam != math.inf:
            ref = best_at_time[time_index[lattice.nodes[node]]:].max()
            tokens = [t for t in tokens if t.score >= ref - beam]
        if not tokens:
            continue
        # one batched context update for every token that consumed a unit
        advancing = [t for t in tokens if t.contexts is None and t.link.unit is not None]
        if advancing:
            new = scorer.advance([t.parent.contexts for t in advancing], [t.link.unit for t in advancing])
            for t, ctx in zip(advancing, new):
                t.contexts = ctx
        for t in tokens:
            if t.contexts is None:  # reached over a null link
                t.contexts = t.parent.contexts
        if node == lattice.end:
            finals = []
            for t in tokens:
                eos = scorer.lm(t.contexts, EOS)
                finals.append((t.score + pruning.lm_scale * eos, eos, t))
            finals.sort(key=lambda item: (-item[0],) + item[2].sort_key()[1:])
            return finals[0], link_lm
        for t in tokens:
            for link in lattice.out_links[node]:
                lm = 0.0 if link.unit is None else scorer.lm(t.contexts, link.unit)
                score = t.score + scorer.link_score(link, lm)
                history = t.history if link.unit is None else _trim(t.history + (link.unit,), n)
                offer(link.end, _Token(score, history, None, t, link, lm))
                if link.id not in link_lm or score > link_lm[link.id][0]:
                    link_lm[link.id] = (score, lm)
    return None, link_lm


def rescore(lattice: Lattice, nn_model=None, ngram_model=None, pruning: Optional[PruningConfig] = None,
            scorer: Optional[LatticeScorer] = None) -> PathResult:
    """Best path under the interpolated language models.

    If pruning removes every token before the end node, the lattice is
    decoded again with the beam disabled and a warning is logged.
    """
    pruning = pruning or PruningConfig()
    scorer = scorer or LatticeScorer(nn_model, ngram_model, pruning)
    scorer.check_unit_kind(lattice)
    found, link_lm = _decode(lattice, scorer, pruning)
    fallback = False
    if found is None:
        _logger.warning("beam %.3g removed every hypothesis; decoding again without the beam", pruning.beam)
        relaxed = PruningConfig(pruning.recombination_order, pruning.cardinality, math.inf,
                                pruning.lm_interpolation, pruning.lm_scale, pruning.acoustic_scale)
        found, link_lm = _decode(lattice, scorer, relaxed)
        fallback = True
    score, eos, tok = found
    links, lms = [], []
    while tok.link is not None:
        links.append(tok.link)
        lms.append(tok.lm)
        tok = tok.parent
    links.reverse()
    lms.reverse()
    units = tuple(l.unit for l in links if l.unit is not None)
    return PathResult(units, tuple(l.id for l in links), score, tuple(lms), eos, fallback,
                      {k: v[1] for k, v in link_lm.items()})


def nbest_exhaustive(lattice: Lattice, scorer: LatticeScorer, n: int,
                     max_paths: int = DEFAULT_MAX_PATHS) -> list:
    """Exact top-``n`` paths by enumerating every path.

    Ties are broken by the unit sequence, then by the link ids.
    """
    scorer.check_unit_kind(lattice)
    total = lattice.num_paths()
    if total > max_paths:
        raise LatticeError("lattice has %d paths, more than the limit of %d; use the pruned decoder"
                           % (total, max_paths))
    paths = list(lattice.paths())
    sequences = [tuple(l.unit for l in p if l.unit is not None) for p in paths]
    # score each distinct unit sequence once
    distinct = sorted(set(sequences))
    lm_rows = dict(zip(distinct, scorer.sequence_lm(distinct)))
    results = []
    for path, units in zip(paths, sequences):
        row = lm_rows[units]
        lms, k = [], 0
        for link in path:
            if link.unit is None:
                lms.append(0.0)
            else:
                lms.append(row[k])
                k += 1
        score = sum(scorer.link_score(l, lm) for l, lm in zip(path, lms)) + scorer.pruning.lm_scale * row[-1]
        results.append(PathResult(units, tuple(l.id for l in path), score, tuple(lms), row[-1]))
    results.sort(key=lambda r: (-r.score, r.units, r.links))
    return results[:n]


def join_output(units: Sequence[str], unit_kind: str) -> str:
    """Transcript of a best path; subword units are joined into words."""
    if unit_kind == "subword":
        try:
            return " ".join(join_morphs(list(units)))
        except SegmentationError as exc:
            raise LatticeError("illegal subword path: %s" % exc) from None
    return " ".join(units)
