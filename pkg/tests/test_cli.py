import os

import numpy as np
import pytest

from bigvocab import cli
from bigvocab.clustering import ClassMap
from bigvocab.corpus import count_ngrams, load_corpus
from bigvocab.lattice import LatticeScorer, PruningConfig, parse_slf, read_slf, rescore, write_slf
from bigvocab.ngram import export_arpa, load_arpa, mixture_em, perplexity, train_kn, train_witten_bell
from bigvocab.nnlm import NetworkConfig, NNLMScorer, NNLMVocabulary, init_network, load_checkpoint, save_checkpoint
from bigvocab.subword import join_morphs
from helpers import agglutinative_wordlist, class_markov_corpus, random_lattice, zipf_corpus

UNITS = ["a", "b", "c", "d", "e"]


def write_corpus(path, corpus):
    with open(path, "w", encoding="utf-8") as f:
        for s in corpus.sentences:
            f.write(" ".join(s) + "\n")
    return str(path)


def listing(root):
    return sorted(os.path.relpath(os.path.join(d, f), root) for d, _, files in os.walk(root) for f in files)


def read_manifest(out_dir):
    with open(os.path.join(out_dir, "manifest.tsv"), encoding="utf-8") as f:
        return dict(line.rstrip("\n").split("\t", 1) for line in f)


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    train = class_markov_corpus(4000, num_classes=8, words_per_class=5, seed=1)
    dev = class_markov_corpus(800, num_classes=8, words_per_class=5, seed=2)
    return {"root": root, "train": write_corpus(root / "train.txt", train),
            "dev": write_corpus(root / "dev.txt", dev)}


@pytest.fixture(scope="module")
def lattice_models(tmp_path_factory):
    """A unit n-gram ARPA file, a network checkpoint and five lattice files over UNITS."""
    root = tmp_path_factory.mktemp("lattices")
    corpus = zipf_corpus(300, 5, seed=3)
    corpus = type(corpus)(tuple(tuple(UNITS[int(w[1:])] for w in s) for s in corpus.sentences))
    arpa = str(root / "units.arpa")
    export_arpa(train_kn(count_ngrams(corpus, 3), 3), arpa)
    vocab = NNLMVocabulary.from_counts({u: 10 - i for i, u in enumerate(UNITS)}, eos_count=5)
    net = init_network(NetworkConfig(embedding_dim=6, hidden_dim=8, num_highway_layers=1, dropout_rate=0.0),
                       vocab, seed=7, dtype=np.float64)
    for k in net.params:
        net.params[k] *= 4
    ckpt = str(root / "net.bvnn")
    save_checkpoint(net, ckpt)
    lattices = []
    for seed in range(5):
        path = root / ("lat%d.slf" % seed)
        path.write_text(write_slf(random_lattice(7, UNITS, seed=seed)))
        lattices.append(str(path))
    return {"arpa": arpa, "nnlm": ckpt, "lattices": lattices}


class TestErrors:
    def test_unknown_flag_exits_2_with_usage(self, capsys):
        assert cli.main(["perplexity", "--no-such-flag"]) == 2
        err = capsys.readouterr().err
        assert "usage:" in err

    def test_unknown_subcommand(self, capsys):
        assert cli.main(["frobnicate"]) == 2

    def test_empty_sweep_values_is_argument_error(self, data, tmp_path, capsys):
        argv = ["sweep", "--parameter", "cutoffs", "--values", "--train", data["train"], "--dev", data["dev"],
                "--out-dir", str(tmp_path / "o")]
        assert cli.main(argv) == 2

    def test_sweep_missing_inputs_is_argument_error(self, tmp_path, capsys):
        assert cli.main(["sweep", "--parameter", "alpha", "--values", "1", "--out-dir", str(tmp_path)]) == 2
        assert "needs --train --dev" in capsys.readouterr().err

    def test_missing_input_file_is_argument_error(self, tmp_path, capsys):
        argv = ["perplexity", "--model", str(tmp_path / "nope.arpa"), "--corpus", str(tmp_path / "dev.txt")]
        assert cli.main(argv) == 2
        assert "not found" in capsys.readouterr().err

    def test_runtime_failure_exits_1_with_one_line(self, data, tmp_path, capsys):
        bad = tmp_path / "bad.arpa"
        bad.write_text("\\data\\\nngram 1=zzz\n")
        assert cli.main(["perplexity", "--model", str(bad), "--corpus", data["dev"]]) == 1
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1 and err[0].startswith("bigvocab perplexity: error:")

    def test_mixture_without_weights_fails(self, data, tmp_path, capsys):
        out = tmp_path / "m"
        assert cli.main(["train-ngram", "--train", data["train"], "--order", "2", "--out-dir", str(out)]) == 0
        model = str(out / "model.arpa")
        assert cli.main(["perplexity", "--model", model, model, "--corpus", data["dev"]]) == 1


class TestNGramCommands:
    def test_perplexity_prints_one_tsv_line(self, data, tmp_path, capsys):
        out = tmp_path / "lm"
        assert cli.main(["train-ngram", "--train", data["train"], "--order", "3", "--out-dir", str(out)]) == 0
        capsys.readouterr()
        assert cli.main(["perplexity", "--model", str(out / "model.arpa"), "--corpus", data["dev"],
                         "--oov", "exclude"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 1
        kind, n, logprob, ppl = lines[0].split("\t")
        expected = perplexity(train_kn(count_ngrams(load_corpus([data["train"]]), 3), 3),
                              load_corpus([data["dev"]]), "exclude")
        assert kind == "word" and int(n) == expected.num_events
        np.testing.assert_allclose(float(ppl), expected.ppl, rtol=1e-5)

    def test_witten_bell_and_export_arpa_agree(self, data, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["train-ngram", "--train", data["train"], "--order", "2", "--smoothing", "wb",
                         "--out-dir", str(a)]) == 0
        assert cli.main(["export-arpa", "--counts", str(a / "counts.txt"), "--smoothing", "wb",
                         "--out-dir", str(b)]) == 0
        with open(a / "model.arpa") as fa, open(b / "model.arpa") as fb:
            assert fa.read() == fb.read()
        direct = train_witten_bell(count_ngrams(load_corpus([data["train"]]), 2), 2)
        loaded = load_arpa(str(b / "model.arpa"))
        dev = load_corpus([data["dev"]])
        np.testing.assert_allclose(perplexity(loaded, dev).ppl, perplexity(direct, dev).ppl, rtol=1e-5)

    def test_class_model_through_cli(self, data, tmp_path, capsys):
        clu, lm = tmp_path / "clu", tmp_path / "lm"
        assert cli.main(["cluster", "--train", data["train"], "--classes", "8", "--out-dir", str(clu)]) == 0
        assert cli.main(["train-ngram", "--train", data["train"], "--order", "3", "--classmap",
                         str(clu / "classes.txt"), "--out-dir", str(lm)]) == 0
        capsys.readouterr()
        assert cli.main(["perplexity", "--model", str(lm / "model.arpa"), "--classmap", str(lm / "classes.txt"),
                         "--corpus", data["dev"]]) == 0
        ppl = float(capsys.readouterr().out.split("\t")[3])
        assert np.isfinite(ppl) and ppl > 1


class TestCluster:
    def test_exchange_writes_classmap(self, data, tmp_path):
        out = tmp_path / "c"
        assert cli.main(["cluster", "--method", "exchange", "--classes", "5", "--init", "frequency_mod",
                         "--train", data["train"], "--out-dir", str(out)]) == 0
        classmap = ClassMap.load(str(out / "classes.txt"))
        assert classmap.num_classes == 5
        assert len(classmap.words()) == 40
        manifest = read_manifest(out)
        assert manifest["command"] == "cluster"
        assert manifest["output:classes.txt"] == cli.file_hash(str(out / "classes.txt"))
        assert manifest["input:" + data["train"]].startswith("sha256:")

    def test_brown(self, data, tmp_path):
        out = tmp_path / "b"
        assert cli.main(["cluster", "--method", "brown", "--classes", "8", "--train", data["train"],
                         "--out-dir", str(out)]) == 0
        assert ClassMap.load(str(out / "classes.txt")).num_classes == 8

    def test_reproducible_manifest_and_confined_writes(self, data, tmp_path):
        root = tmp_path / "runs"
        root.mkdir()
        before = set(listing(str(tmp_path)))
        for name in ("one", "two"):
            assert cli.main(["cluster", "--classes", "6", "--train", data["train"],
                             "--out-dir", str(root / name)]) == 0
        assert (root / "one" / "manifest.tsv").read_text() == (root / "two" / "manifest.tsv").read_text()
        created = set(listing(str(tmp_path))) - before
        assert all(p.startswith(os.path.join("runs", "one")) or p.startswith(os.path.join("runs", "two"))
                   for p in created)


class TestConfig:
    def test_include_and_override(self, data, tmp_path):
        (tmp_path / "sub").mkdir()
        (tmp_path / "sub" / "common.cfg").write_text("# shared settings\nclasses = 4\nmax_iterations = 5\n")
        (tmp_path / "run.cfg").write_text("include sub/common.cfg\ntrain = %s\nmethod = exchange\n" % data["train"])
        out = tmp_path / "o"
        assert cli.main(["--config", str(tmp_path / "run.cfg"), "cluster", "--out-dir", str(out)]) == 0
        assert ClassMap.load(str(out / "classes.txt")).num_classes == 4
        out2 = tmp_path / "o2"
        assert cli.main(["--config", str(tmp_path / "run.cfg"), "cluster", "--classes", "3",
                         "--out-dir", str(out2)]) == 0
        assert ClassMap.load(str(out2 / "classes.txt")).num_classes == 3

    def test_unknown_key_is_argument_error(self, tmp_path, capsys):
        (tmp_path / "bad.cfg").write_text("colour = blue\n")
        assert cli.main(["--config", str(tmp_path / "bad.cfg"), "cluster", "--train", "x",
                         "--out-dir", str(tmp_path)]) == 2
        assert "unknown config key" in capsys.readouterr().err

    def test_recursive_include(self, tmp_path):
        (tmp_path / "a.cfg").write_text("include a.cfg\n")
        with pytest.raises(cli.ConfigError):
            cli.read_config(str(tmp_path / "a.cfg"))

    def test_malformed_line(self, tmp_path):
        (tmp_path / "a.cfg").write_text("classes 4\n")
        with pytest.raises(cli.ConfigError, match="line 1"):
            cli.read_config(str(tmp_path / "a.cfg"))


@pytest.fixture(scope="module")
def words_file(tmp_path_factory):
    words = agglutinative_wordlist(1000, seed=5)
    path = tmp_path_factory.mktemp("seg") / "words.txt"
    with open(path, "w") as f:
        for w, c in sorted(words.items()):
            for _ in range(c):
                f.write(w + "\n")
    return str(path)


class TestSegmentation:
    def test_train_and_apply_round_trip(self, words_file, tmp_path):
        lex, seg = tmp_path / "lex", tmp_path / "seg"
        assert cli.main(["segment-train", "--train", words_file, "--alpha", "0.5", "--out-dir", str(lex)]) == 0
        assert cli.main(["segment-apply", "--lexicon", str(lex / "lexicon.txt"), "--analyses",
                         str(lex / "analyses.txt"), "--alpha", "0.5", "--input", words_file,
                         "--out-dir", str(seg)]) == 0
        original = open(words_file).read().split("\n")
        segmented = open(seg / "segmented.txt").read().split("\n")
        assert len(original) == len(segmented)
        for a, b in zip(original[:200], segmented[:200]):
            assert join_morphs(b.split()) == a.split()

    def test_alpha_sweep_lexicon_grows(self, words_file, tmp_path, capsys):
        dev = tmp_path / "dev.txt"
        dev.write_text("\n".join(open(words_file).read().split("\n")[::7]) + "\n")
        out = tmp_path / "sweep"
        assert cli.main(["sweep", "--parameter", "alpha", "--values", "0.05", "0.2", "0.5", "1.0",
                         "--train", words_file, "--dev", str(dev), "--out-dir", str(out)]) == 0
        rows = [l.split("\t") for l in (out / "sweep.tsv").read_text().splitlines()[1:]]
        assert [r[0] for r in rows] == ["0.05", "0.2", "0.5", "1.0"]
        sizes = [int(r[2].split()[0]) for r in rows]
        assert all(a < b for a, b in zip(sizes, sizes[1:]))
        assert sum(r[3] == "*" for r in rows) == 1


class TestSweep:
    def test_cutoff_sweep_marks_best(self, data, tmp_path, capsys):
        out = tmp_path / "s"
        assert cli.main(["sweep", "--parameter", "cutoffs", "--values", "0", "1", "3", "--order", "3",
                         "--train", data["train"], "--dev", data["dev"], "--out-dir", str(out)]) == 0
        rows = [l.split("\t") for l in (out / "sweep.tsv").read_text().splitlines()[1:]]
        assert len(rows) == 3
        ppls = [float(r[1]) for r in rows]
        assert rows[int(np.argmin(ppls))][3] == "*"
        counts = count_ngrams(load_corpus([data["train"]]), 3)
        dev = load_corpus([data["dev"]])
        np.testing.assert_allclose(ppls[1], perplexity(train_kn(counts, 3, cutoffs=1), dev).ppl, rtol=1e-6)

    def test_lambda_sweep_matches_individual_runs(self, lattice_models, tmp_path):
        out = tmp_path / "lam"
        assert cli.main(["sweep", "--parameter", "lambda", "--values", "0", "0.5", "1",
                         "--lattice", *lattice_models["lattices"], "--nnlm", lattice_models["nnlm"],
                         "--ngram", lattice_models["arpa"], "--out-dir", str(out)]) == 0
        lines = (out / "sweep.tsv").read_text().splitlines()
        assert "metric=total_log10" in lines[0]
        rows = [l.split("\t") for l in lines[1:]]
        assert [r[0] for r in rows] == ["0", "0.5", "1"]
        ngram = load_arpa(lattice_models["arpa"])
        nn = NNLMScorer(load_checkpoint(lattice_models["nnlm"], dtype=np.float64)[0])
        lattices = [read_slf(p) for p in lattice_models["lattices"]]
        for lam, row in zip((0.0, 0.5, 1.0), rows):
            pruning = PruningConfig(lm_interpolation=lam)
            scorer = LatticeScorer(nn, ngram, pruning)
            total = sum(rescore(lat, pruning=pruning, scorer=scorer).total_log10 for lat in lattices)
            np.testing.assert_allclose(float(row[1]), total, atol=1e-5)
        best = int(np.argmax([float(r[1]) for r in rows]))
        assert rows[best][3] == "*"

    def test_lambda_sweep_with_reference_reports_wer(self, lattice_models, tmp_path):
        ref = tmp_path / "ref.txt"
        ref.write_text("a b c\n" * len(lattice_models["lattices"]))
        out = tmp_path / "wer"
        assert cli.main(["sweep", "--parameter", "lambda", "--values", "0", "1", "--reference", str(ref),
                         "--lattice", *lattice_models["lattices"], "--nnlm", lattice_models["nnlm"],
                         "--ngram", lattice_models["arpa"], "--out-dir", str(out)]) == 0
        rows = [l.split("\t") for l in (out / "sweep.tsv").read_text().splitlines()[1:]]
        assert all(0.0 <= float(r[1]) for r in rows)

    def test_mixture_grid_agrees_with_em(self, data, tmp_path):
        train = load_corpus([data["train"]])
        other = zipf_corpus(400, 40, seed=9)
        other = type(other)(tuple(tuple("c%dw%d" % (int(w[1:]) % 8, int(w[1:]) % 5) for w in s)
                                  for s in other.sentences))
        m1, m2 = str(tmp_path / "m1.arpa"), str(tmp_path / "m2.arpa")
        export_arpa(train_kn(count_ngrams(train, 2), 2), m1)
        export_arpa(train_kn(count_ngrams(other, 2), 2), m2)
        values = ["%.2f" % (0.05 * k) for k in range(1, 20)]
        out = tmp_path / "mix"
        assert cli.main(["sweep", "--parameter", "mixture_weight", "--values", *values, "--model", m1, m2,
                         "--dev", data["dev"], "--out-dir", str(out)]) == 0
        rows = [l.split("\t") for l in (out / "sweep.tsv").read_text().splitlines()[1:]]
        best = float(next(r[0] for r in rows if r[3] == "*"))
        em = mixture_em([load_arpa(m1), load_arpa(m2)], load_corpus([data["dev"]]))
        assert abs(best - em.weights[0]) <= 0.05


class TestNetworkAndLattices:
    def test_train_nnlm_and_score(self, data, tmp_path, capsys):
        out = tmp_path / "nn"
        assert cli.main(["train-nnlm", "--train", data["train"], "--dev", data["dev"], "--embedding-dim", "8",
                         "--hidden-dim", "8", "--highway-layers", "0", "--dropout", "0", "--max-epochs", "2",
                         "--batch-sequences", "8", "--sequence-length", "10", "--out-dir", str(out)]) == 0
        history = (out / "history.tsv").read_text().splitlines()
        assert history[0].startswith("epoch") and len(history) == 3
        capsys.readouterr()
        assert cli.main(["perplexity", "--model", str(out / "model.bvnn"), "--corpus", data["dev"]]) == 0
        kind, n, _, ppl = capsys.readouterr().out.strip().split("\t")
        assert kind == "word" and float(ppl) < 41

    def test_rescore_writes_transcripts_and_lattices(self, lattice_models, tmp_path):
        out = tmp_path / "r"
        assert cli.main(["rescore", "--lattice", *lattice_models["lattices"], "--nnlm", lattice_models["nnlm"],
                         "--ngram", lattice_models["arpa"], "--emit-lattices", "--out-dir", str(out)]) == 0
        transcripts = (out / "transcripts.txt").read_text().splitlines()
        assert len(transcripts) == len(lattice_models["lattices"])
        scores = (out / "scores.tsv").read_text().splitlines()
        assert scores[0].split("\t")[0] == "lat0"
        rescored = parse_slf((out / "lat0.rescored.slf").read_text())
        assert len(rescored.links) == len(read_slf(lattice_models["lattices"][0]).links)

    def test_nbest_file(self, lattice_models, tmp_path):
        out = tmp_path / "nb"
        assert cli.main(["nbest", "--lattice", lattice_models["lattices"][0], "--n", "3", "--lm-interpolation",
                         "0", "--ngram", lattice_models["arpa"], "--out-dir", str(out)]) == 0
        rows = [l.split("\t") for l in (out / "lat0.nbest").read_text().splitlines()]
        assert [r[0] for r in rows] == ["1", "2", "3"]
        scores = [float(r[1]) for r in rows]
        assert scores == sorted(scores, reverse=True)

    def test_rescore_without_needed_model_fails(self, lattice_models, tmp_path, capsys):
        assert cli.main(["rescore", "--lattice", lattice_models["lattices"][0], "--ngram", lattice_models["arpa"],
                         "--out-dir", str(tmp_path / "x")]) == 1
        assert "needs a neural model" in capsys.readouterr().err
