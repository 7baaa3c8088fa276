import logging
import math

import numpy as np
import pytest

from bigvocab.corpus import BOS, EOS, count_ngrams
from bigvocab.lattice import (Lattice, LatticeError, LatticeScorer, Link, PruningConfig, join_output,
                              nbest_exhaustive, parse_slf, rescore, write_slf)
from bigvocab.ngram import train_kn
from bigvocab.nnlm import NetworkConfig, NNLMScorer, NNLMVocabulary, init_network
from helpers import random_lattice, text_corpus, zipf_corpus

UNITS = ["a", "b", "c", "d", "e"]

DIAMOND = """N=4 L=4
I=0 t=0
I=1 t=1
I=2 t=1
I=3 t=2
J=0 S=0 E=1 W=a a=-1 l=0
J=1 S=0 E=2 W=b a=-2 l=0
J=2 S=1 E=3 W=c a=-1 l=0
J=3 S=2 E=3 W=c a=-1 l=0
"""


@pytest.fixture(scope="module")
def ngram():
    corpus = zipf_corpus(300, 5, seed=3)
    corpus = type(corpus)(tuple(tuple(UNITS[int(w[1:])] for w in s) for s in corpus.sentences))
    return train_kn(count_ngrams(corpus, 3), 3)


@pytest.fixture(scope="module")
def nnlm():
    vocab = NNLMVocabulary.from_counts({u: 10 - i for i, u in enumerate(UNITS)}, eos_count=5)
    cfg = NetworkConfig(embedding_dim=6, hidden_dim=8, num_highway_layers=1, dropout_rate=0.0)
    net = init_network(cfg, vocab, seed=7, dtype=np.float64)
    for k in net.params:
        net.params[k] *= 4.0  # sharpen the random model so paths differ clearly
    return NNLMScorer(net)


def linear_lattice(units, acoustic):
    nodes = {i: float(i) for i in range(len(units) + 1)}
    links = [Link(i, i, i + 1, u, a, 0.0) for i, (u, a) in enumerate(zip(units, acoustic))]
    return Lattice(nodes, links)


class TestSLF:
    def test_single_link(self):
        lat = parse_slf("N=2 L=1\nI=0 t=0\nI=1 t=1.5\nJ=0 S=0 E=1 W=hello a=-1 l=-2\n")
        assert lat.num_paths() == 1 and lat.unit_kind == "word"
        assert [l.unit for l in next(lat.paths())] == ["hello"]
        assert (lat.start, lat.end) == (0, 1)

    def test_diamond(self):
        lat = parse_slf(DIAMOND)
        assert sorted(tuple(l.unit for l in p) for p in lat.paths()) == [("a", "c"), ("b", "c")]

    def test_missing_node_reported_at_line(self):
        text = DIAMOND.replace("J=3 S=2 E=3", "J=3 S=2 E=9")
        with pytest.raises(LatticeError, match="line 9: link 3 references missing node 9"):
            parse_slf(text)

    def test_duplicate_ids(self):
        with pytest.raises(LatticeError) as exc:
            parse_slf(DIAMOND.replace("I=2 t=1", "I=1 t=1"))
        assert exc.value.line == 4
        with pytest.raises(LatticeError) as exc:
            parse_slf(DIAMOND.replace("J=3 S=2", "J=2 S=2"))
        assert exc.value.line == 9

    def test_cycle(self):
        text = "N=4 L=4\nI=0 t=0\nI=1 t=1\nI=2 t=2\nI=3 t=3\n" \
               "J=0 S=0 E=1 W=a\nJ=1 S=1 E=2 W=b\nJ=2 S=2 E=1 W=c\nJ=3 S=2 E=3 W=d\n"
        with pytest.raises(LatticeError, match="cycle") as exc:
            parse_slf(text)
        assert exc.value.line in (7, 8)

    def test_dangling_node(self):
        text = DIAMOND.replace("N=4 L=4", "N=5 L=4") + "I=4 t=3\n"
        with pytest.raises(LatticeError, match="dangling node 4") as exc:
            parse_slf(text)
        assert exc.value.line == 10

    def test_header_counts(self):
        with pytest.raises(LatticeError, match="line 1"):
            parse_slf(DIAMOND.replace("L=4", "L=5"))
        with pytest.raises(LatticeError, match="missing N= L= header"):
            parse_slf("")
        with pytest.raises(LatticeError, match="line 6: bad value for a"):
            parse_slf(DIAMOND.replace("a=-1 l=0\nJ=1", "a=x l=0\nJ=1"))

    def test_log_base(self):
        lat = parse_slf("base=10\n" + DIAMOND)
        assert lat.link_by_id[0].acoustic == pytest.approx(-math.log(10))
        assert parse_slf(DIAMOND).link_by_id[0].acoustic == -1.0

    def test_round_trip(self):
        lat = random_lattice(12, UNITS, seed=1, null_fraction=0.1)
        again = parse_slf(write_slf(lat))
        assert again.nodes == lat.nodes
        for a, b in zip(sorted(lat.links, key=lambda l: l.id), sorted(again.links, key=lambda l: l.id)):
            assert (a.id, a.start, a.end, a.unit) == (b.id, b.start, b.end, b.unit)
            assert b.acoustic == pytest.approx(a.acoustic, abs=1e-9)
            assert b.lm == pytest.approx(a.lm, abs=1e-9)

    def test_null_links(self):
        lat = parse_slf(DIAMOND.replace("W=b", "W=!NULL"))
        assert sorted(tuple(str(l.unit) for l in p) for p in lat.paths()) == [("None", "c"), ("a", "c")]

    def test_subword_legality(self):
        text = "# unit_kind=subword\nN=3 L=2\nI=0 t=0\nI=1 t=1\nI=2 t=2\nJ=0 S=0 E=1 W=talo+\nJ=1 S=1 E=2 W=+ssa\n"
        assert parse_slf(text).unit_kind == "subword"
        with pytest.raises(LatticeError, match="line 7"):
            parse_slf(text.replace("+ssa", "ssa"))
        with pytest.raises(LatticeError, match="ends inside a word"):
            parse_slf(text.replace("+ssa", "+ssa+"))
        with pytest.raises(LatticeError, match="expected 'word'"):
            parse_slf(text, unit_kind="word")


class TestDecoder:
    def test_linear_lattice(self, ngram):
        lat = linear_lattice(["a", "b", "c"], [-1.0, -2.0, -0.5])
        result = rescore(lat, ngram_model=ngram, pruning=PruningConfig(lm_interpolation=0.0))
        lm = [ngram.logprob("a", [BOS]), ngram.logprob("b", [BOS, "a"]), ngram.logprob("c", ["a", "b"]),
              ngram.logprob(EOS, ["b", "c"])]
        assert result.units == ("a", "b", "c")
        assert result.score == pytest.approx(-3.5 + math.log(10) * sum(lm), abs=1e-9)
        np.testing.assert_allclose(result.lm_scores, np.array(lm[:3]) * math.log(10), atol=1e-12)
        assert result.total_log10 == pytest.approx(result.score / math.log(10))

    def test_interpolation_endpoints(self, ngram, nnlm):
        lat = random_lattice(10, UNITS, seed=2)
        both0 = rescore(lat, nnlm, ngram, PruningConfig.disabled(lm_interpolation=0.0))
        only_ngram = rescore(lat, None, ngram, PruningConfig.disabled(lm_interpolation=0.0))
        assert both0.score == pytest.approx(only_ngram.score, abs=1e-12) and both0.units == only_ngram.units
        both1 = rescore(lat, nnlm, ngram, PruningConfig.disabled(lm_interpolation=1.0))
        only_nn = rescore(lat, nnlm, None, PruningConfig.disabled(lm_interpolation=1.0))
        assert both1.score == pytest.approx(only_nn.score, abs=1e-12) and both1.units == only_nn.units

    def test_missing_model(self, ngram):
        with pytest.raises(ValueError, match="neural"):
            LatticeScorer(None, ngram, PruningConfig())

    def test_unit_mismatch(self, ngram):
        lat = parse_slf("# unit_kind=subword\nN=2 L=1\nI=0 t=0\nI=1 t=1\nJ=0 S=0 E=1 W=a\n")
        with pytest.raises(LatticeError, match="subword units"):
            rescore(lat, ngram_model=ngram, pruning=PruningConfig(lm_interpolation=0.0))

    def test_unpruned_equals_exhaustive(self, ngram, nnlm):
        pruning = PruningConfig.disabled()
        scorer = LatticeScorer(nnlm, ngram, pruning)
        for seed in range(25):
            lat = random_lattice(8 + seed % 12, UNITS, seed=seed, null_fraction=0.1)
            best = rescore(lat, pruning=pruning, scorer=scorer)
            oracle = nbest_exhaustive(lat, scorer, 1)[0]
            assert best.score == pytest.approx(oracle.score, abs=1e-6)
            assert best.units == oracle.units

    def test_recombination_lossless_for_ngram(self, ngram):
        for seed in range(20):
            lat = random_lattice(15, UNITS, seed=100 + seed)
            pruning = PruningConfig(recombination_order=ngram.order - 1, cardinality=math.inf, beam=math.inf,
                                    lm_interpolation=0.0)
            scorer = LatticeScorer(None, ngram, pruning)
            assert rescore(lat, pruning=pruning, scorer=scorer).score == \
                pytest.approx(nbest_exhaustive(lat, scorer, 1)[0].score, abs=1e-9)

    GRIDS = {"recombination_order": [1, 2, 3, math.inf], "cardinality": [1, 2, 4, math.inf],
             "beam": [0.5, 2.0, 8.0, math.inf]}

    def _sweep(self, lat, nn, ngram, lam, name):
        return [rescore(lat, nn, ngram, PruningConfig.disabled(lm_interpolation=lam, **{name: v})).score
                for v in self.GRIDS[name]]

    def test_monotone_with_markov_scorer(self, ngram):
        for seed in range(15):
            lat = random_lattice(14, UNITS, seed=200 + seed)
            oracle = nbest_exhaustive(lat, LatticeScorer(None, ngram, PruningConfig.disabled(lm_interpolation=0.0)),
                                      1)[0].score
            for name in self.GRIDS:
                scores = self._sweep(lat, None, ngram, 0.0, name)
                assert all(b >= a - 1e-9 for a, b in zip(scores, scores[1:])), (seed, name, scores)
                assert scores[-1] == pytest.approx(oracle, abs=1e-9)

    def test_beam_monotone_with_network(self, ngram, nnlm):
        for seed in range(10):
            lat = random_lattice(14, UNITS, seed=300 + seed)
            scores = self._sweep(lat, nnlm, ngram, 0.5, "beam")
            assert all(b >= a - 1e-9 for a, b in zip(scores, scores[1:])), (seed, scores)

    def test_pruned_never_beats_oracle(self, ngram, nnlm):
        for seed in range(10):
            lat = random_lattice(14, UNITS, seed=400 + seed)
            oracle = nbest_exhaustive(lat, LatticeScorer(nnlm, ngram, PruningConfig.disabled()), 1)[0].score
            for name in self.GRIDS:
                scores = self._sweep(lat, nnlm, ngram, 0.5, name)
                assert max(scores) <= oracle + 1e-6
                assert scores[-1] == pytest.approx(oracle, abs=1e-6)

    def test_past_tokens_do_not_prune_future(self, ngram):
        # a cheap early node must not prune the (much lower) score at the end
        lat = parse_slf("N=3 L=2\nI=0 t=0\nI=1 t=1\nI=2 t=2\nJ=0 S=0 E=1 W=a a=-1\nJ=1 S=1 E=2 W=b a=-1000\n")
        result = rescore(lat, ngram_model=ngram, pruning=PruningConfig(beam=10.0, lm_interpolation=0.0))
        assert result.units == ("a", "b") and not result.fallback

    def test_future_tokens_prune(self, ngram):
        text = "N=4 L=4\nI=0 t=0\nI=1 t=5\nI=2 t=3\nI=3 t=6\n" \
               "J=0 S=0 E=1 W=a a=-1\nJ=1 S=0 E=2 W=b a=-1000\nJ=2 S=1 E=3 W=c a=-1\nJ=3 S=2 E=3 W=d a=-1\n"
        result = rescore(parse_slf(text), ngram_model=ngram, pruning=PruningConfig(beam=10.0, lm_interpolation=0.0))
        assert result.units == ("a", "c")
        assert 3 not in result.link_lm and 2 in result.link_lm

    def test_fallback_when_beam_empties_end(self, ngram, caplog):
        text = "N=3 L=2\nI=0 t=0\nI=1 t=10\nI=2 t=5\nJ=0 S=0 E=1 W=a a=-1\nJ=1 S=1 E=2 W=b a=-1000\n"
        with caplog.at_level(logging.WARNING):
            result = rescore(parse_slf(text), ngram_model=ngram,
                             pruning=PruningConfig(beam=10.0, lm_interpolation=0.0))
        assert result.fallback and result.units == ("a", "b")
        assert "beam" in caplog.text

    def test_one_network_call_per_node(self, ngram, nnlm):
        calls = []

        class Counting:
            unit_kind = nnlm.unit_kind

            def initial_state(self, batch):
                return nnlm.initial_state(batch)

            def step(self, state, words):
                calls.append(len(words))
                return nnlm.step(state, words)

            def unit_logprob(self, row, word):
                return nnlm.unit_logprob(row, word)

        lat = random_lattice(15, UNITS, seed=9)
        rescore(lat, Counting(), ngram, PruningConfig.disabled())
        assert len(calls) <= len(lat.nodes) - 1
        assert max(calls) > 1

    def test_cardinality_tie_break(self, ngram):
        # equal scores: the shorter history survives c=1
        text = "N=3 L=3\nI=0 t=0\nI=1 t=1\nI=2 t=2\n" \
               "J=0 S=0 E=1 W=a a=0\nJ=1 S=0 E=1 W=!NULL a=0\nJ=2 S=1 E=2 W=!NULL a=0\n"
        lat = parse_slf(text)
        uniform = train_kn(count_ngrams(text_corpus("a"), 1), 1)
        result = rescore(lat, ngram_model=uniform, pruning=PruningConfig(cardinality=1, lm_interpolation=0.0,
                                                                          recombination_order=5))
        # the null path is shorter but pays no LM cost for "a", so it also scores higher
        assert result.units == ()


class TestNBest:
    def test_diamond_order(self, ngram):
        lat = parse_slf(DIAMOND.replace("W=b a=-2", "W=a a=%r" % math.log(0.4)).replace(
            "J=0 S=0 E=1 W=a a=-1", "J=0 S=0 E=1 W=a a=%r" % math.log(0.6)))
        uniform = train_kn(count_ngrams(text_corpus("a c"), 1), 1)
        scorer = LatticeScorer(None, uniform, PruningConfig(lm_interpolation=0.0))
        ranked = nbest_exhaustive(lat, scorer, 5)
        assert len(ranked) == 2
        assert ranked[0].links == (0, 2) and ranked[1].links == (1, 3)
        assert ranked[0].score - ranked[1].score == pytest.approx(math.log(0.6 / 0.4))

    def test_ties_lexicographic(self):
        lat = parse_slf(DIAMOND.replace("a=-2", "a=-1"))
        uniform = train_kn(count_ngrams(text_corpus("a b c"), 1), 1)
        ranked = nbest_exhaustive(lat, LatticeScorer(None, uniform, PruningConfig(lm_interpolation=0.0)), 2)
        assert [r.units for r in ranked] == [("a", "c"), ("b", "c")]

    def test_path_bound(self, ngram):
        lat = random_lattice(20, UNITS, seed=0, max_paths=500)
        with pytest.raises(LatticeError, match="pruned decoder"):
            nbest_exhaustive(lat, LatticeScorer(None, ngram, PruningConfig(lm_interpolation=0.0)), 1,
                             max_paths=lat.num_paths() - 1)

    def test_random_top1_matches_decoder(self, ngram, nnlm):
        lat = random_lattice(20, UNITS, seed=42)
        scorer = LatticeScorer(nnlm, ngram, PruningConfig.disabled())
        top = nbest_exhaustive(lat, scorer, 3)
        assert top[0].score >= top[1].score >= top[2].score
        assert rescore(lat, pruning=PruningConfig.disabled(), scorer=scorer).units == top[0].units


class TestJoinOutput:
    def test_subword(self):
        assert join_output(["luento+", "+kalvo+", "+ja"], "subword") == "luentokalvoja"

    def test_word_identity(self):
        assert join_output(["a", "b"], "word") == "a b"

    def test_empty_path(self, ngram):
        lat = Lattice({0: 0.0}, [])
        result = rescore(lat, ngram_model=ngram, pruning=PruningConfig(lm_interpolation=0.0))
        assert result.units == () and join_output(result.units, "word") == ""
        assert result.score == pytest.approx(ngram.logprob(EOS, [BOS]) * math.log(10))

    def test_illegal(self):
        with pytest.raises(LatticeError, match="illegal"):
            join_output(["talo+"], "subword")
