"""Command line front end.

Every subcommand that produces files writes them into ``--out-dir``
together with ``manifest.tsv``: ``key<TAB>value`` lines naming the
command, its arguments, library versions and a SHA-256 hash for every
input and output file.

Options can also come from a flat configuration file (``--config``):
``key = value`` lines, ``#`` comments and ``include <path>`` lines
(relative to the including file). Keys are option names with dashes or
underscores; command line flags override the file.
"""

import argparse
import hashlib
import json
import logging
import math
import os
import platform
import sys

import numpy as np

from . import __version__
from .clustering import (ClassMap, EmbeddingTable, RuleSet, brown_train, exchange_train, init_classes,
                         kmeans_cluster, rules_merge)
from .corpus import UNK, CountTable, TokenizedCorpus, build_vocabulary, count_ngrams, load_corpus
from .lattice import LatticeScorer, PruningConfig, join_output, nbest_exhaustive, read_slf, rescore, write_slf
from .ngram import (OOV_POLICIES, ClassNGramModel, MixtureModel, export_arpa, load_arpa, mixture_em, perplexity,
                    train_class_ngram, train_kn, train_witten_bell)
from .nnlm import (OUTPUT_KINDS, NetworkConfig, NNLMScorer, NNLMVocabulary, TrainingConfig, init_network,
                   load_checkpoint, save_checkpoint, train)
from .nnlm.checkpoint import MAGIC
from .subword import MorphLexicon, segment_line, train_morfessor, word_counts

_logger = logging.getLogger("bigvocab")

SWEEP_PARAMETERS = ("cutoffs", "lambda", "acoustic_scale", "alpha", "mixture_weight")


class ConfigError(ValueError):
    pass


# configuration files


def read_config(path: str, _seen=None) -> list:
    """``(key, value)`` pairs in file order, includes expanded in place."""
    seen = set() if _seen is None else _seen
    real = os.path.realpath(path)
    if real in seen:
        raise ConfigError("%s is included recursively" % path)
    seen.add(real)
    pairs = []
    try:
        f = open(path, encoding="utf-8")
    except OSError as e:
        raise ConfigError("cannot read config %s: %s" % (path, e.strerror)) from None
    with f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("include ") or line.startswith("include\t"):
                target = line.split(None, 1)[1].strip()
                pairs.extend(read_config(os.path.join(os.path.dirname(path), target), seen))
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise ConfigError("%s line %d: expected key = value" % (path, lineno))
            pairs.append((key.strip().replace("_", "-"), value.strip()))
    seen.discard(real)
    return pairs


def config_argv(pairs, parser: argparse.ArgumentParser) -> list:
    """Turn config pairs into option tokens understood by ``parser``."""
    options = {}
    for action in parser._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                options[opt[2:]] = action
    argv = []
    for key, value in pairs:
        action = options.get(key)
        if action is None:
            raise ConfigError("unknown config key %r for this command" % key)
        flag = "--" + key
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(flag)
            elif value.lower() not in ("0", "false", "no", "off"):
                raise ConfigError("config key %r expects true or false, got %r" % (key, value))
        elif action.nargs in ("+", "*") or isinstance(action, argparse._AppendAction):
            items = value.replace(",", " ").split()
            if isinstance(action, argparse._AppendAction):
                for item in items:
                    argv.extend([flag, item])
            else:
                argv.append(flag)
                argv.extend(items)
        else:
            argv.extend([flag, value])
    return argv


# manifest


def file_hash(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return "sha256:" + h.hexdigest()


class Run:
    """Tracks inputs and outputs of one subcommand and writes the manifest."""

    def __init__(self, args, out_dir: str):
        self.args = args
        self.out_dir = out_dir
        self.inputs = []
        self.outputs = []
        os.makedirs(out_dir, exist_ok=True)

    def input(self, path: str) -> str:
        if path and path not in self.inputs:
            self.inputs.append(path)
        return path

    def output(self, name: str) -> str:
        """Path for an artifact named ``name`` inside the output directory."""
        if os.path.isabs(name) or os.path.normpath(name).startswith(".."):
            raise ValueError("artifact %r would be written outside the output directory" % name)
        self.outputs.append(name)
        return os.path.join(self.out_dir, name)

    def write_manifest(self):
        settings = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func", "config", "out_dir")}
        lines = [("command", self.args.command), ("version", __version__),
                 ("python", platform.python_version()), ("numpy", np.__version__),
                 ("seed", str(getattr(self.args, "seed", "none"))),
                 ("arguments", json.dumps(settings, sort_keys=True, default=str))]
        for path in self.inputs:
            lines.append(("input:" + path, file_hash(path)))
        for name in self.outputs:
            lines.append(("output:" + name, file_hash(os.path.join(self.out_dir, name))))
        with open(os.path.join(self.out_dir, "manifest.tsv"), "w", encoding="utf-8") as f:
            for k, v in lines:
                f.write("%s\t%s\n" % (k, v))


# shared loaders


def _corpus(run, paths, tags=None):
    for p in paths:
        if run is not None:
            run.input(p)
    return load_corpus(paths, tags=tags)


def _is_checkpoint(path: str) -> bool:
    with open(path, "rb") as f:
        return f.read(4) == MAGIC


def load_model(path: str, classmap_path=None, unit_kind=None, run=None):
    """ARPA model, class model (ARPA over classes plus a class map) or network checkpoint."""
    if run is not None:
        run.input(path)
        run.input(classmap_path)
    classmap = ClassMap.load(classmap_path) if classmap_path else None
    if _is_checkpoint(path):
        network, _ = load_checkpoint(path, dtype=np.float64)
        if network.config.unit_kind == "class" and classmap is None:
            raise ValueError("%s models class units; pass its class map" % path)
        return NNLMScorer(network, classmap if network.config.unit_kind == "class" else None)
    model = load_arpa(path, None if classmap is not None else unit_kind)
    if classmap is not None:
        return ClassNGramModel(model, classmap)
    return model


def _cutoffs(text):
    if text is None:
        return None
    parts = [int(p) for p in text.replace(",", " ").split()]
    return parts[0] if len(parts) == 1 else parts


def _train_ngram(counts, order, smoothing, cutoffs, unit_kind):
    trainer = train_kn if smoothing == "kn" else train_witten_bell
    return trainer(counts, order, cutoffs=cutoffs, unit_kind=unit_kind)


def _pruning(args, **overrides):
    values = dict(recombination_order=args.recombination_order, cardinality=args.cardinality, beam=args.beam,
                  lm_interpolation=args.lm_interpolation, lm_scale=args.lm_scale,
                  acoustic_scale=args.acoustic_scale)
    values.update(overrides)
    return PruningConfig(**values)


def _lattice_models(args, run):
    nn = load_model(args.nnlm, args.nnlm_classmap, run=run) if args.nnlm else None
    ng = load_model(args.ngram, args.ngram_classmap, args.unit_kind, run=run) if args.ngram else None
    return nn, ng


def _lattice_name(path):
    return os.path.splitext(os.path.basename(path))[0]


def _read_lattices(args, run):
    return [(p, read_slf(run.input(p), args.unit_kind)) for p in args.lattice]


def edit_distance(ref, hyp) -> int:
    row = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, start=1):
        prev, row[0] = row[0], i
        for j, h in enumerate(hyp, start=1):
            prev, row[j] = row[j], min(row[j] + 1, row[j - 1] + 1, prev + (r != h))
    return row[-1]


# subcommands


def cmd_cluster(args):
    run = Run(args, args.out_dir)
    corpus = _corpus(run, args.train)
    vocab = build_vocabulary(corpus, min_count=args.min_count)
    if args.method == "exchange":
        init = init_classes(vocab, args.classes, args.init, run.input(args.init_classmap))
        classmap = exchange_train(count_ngrams(corpus.map_oov(vocab), 2), init, max_iterations=args.max_iterations)
    elif args.method == "brown":
        classmap = brown_train(count_ngrams(corpus.map_oov(vocab), 2), args.classes)
    elif args.method == "kmeans":
        if not args.embeddings:
            raise ValueError("--method kmeans needs --embeddings")
        table = EmbeddingTable.load(run.input(args.embeddings))
        words = [w for w in vocab.words() if w in table.index]
        classmap = kmeans_cluster(table, args.classes, {w: vocab.count(w) for w in words}, seed=args.seed,
                                  max_iterations=args.max_iterations, words=words)
    else:
        if not (args.rules and args.colloquial):
            raise ValueError("--method rules needs --rules and --colloquial")
        colloquial = build_vocabulary(_corpus(run, args.colloquial), min_count=args.min_count)
        classmap = rules_merge(vocab, colloquial, RuleSet.load(run.input(args.rules)))
    classmap.save(run.output("classes.txt"))
    vocab.save(run.output("vocab.txt"))
    run.write_manifest()
    _logger.info("wrote %d classes over %d words", classmap.num_classes, len(classmap.words()))


def cmd_train_ngram(args):
    run = Run(args, args.out_dir)
    corpus = _corpus(run, args.train)
    counts = count_ngrams(corpus, args.order)
    if args.classmap:
        classmap = ClassMap.load(run.input(args.classmap))
        model = train_class_ngram(counts, classmap, args.order, cutoffs=_cutoffs(args.cutoffs))
        export_arpa(model.sequence_model, run.output("model.arpa"))
        classmap.save(run.output("classes.txt"))
    else:
        model = _train_ngram(counts, args.order, args.smoothing, _cutoffs(args.cutoffs), args.unit_kind)
        export_arpa(model, run.output("model.arpa"))
    counts.save(run.output("counts.txt"))
    run.write_manifest()


def cmd_export_arpa(args):
    run = Run(args, args.out_dir)
    counts = CountTable.load(run.input(args.counts))
    order = args.order or counts.order
    export_arpa(_train_ngram(counts, order, args.smoothing, _cutoffs(args.cutoffs), args.unit_kind),
                run.output("model.arpa"))
    run.write_manifest()


def cmd_segment_train(args):
    run = Run(args, args.out_dir)
    counts = word_counts(_corpus(run, args.train))
    lexicon = train_morfessor(counts, args.alpha, seed=args.seed, token_based=args.token_based,
                              max_epochs=args.max_epochs)
    lexicon.save(run.output("lexicon.txt"))
    lexicon.save_analyses(run.output("analyses.txt"))
    run.write_manifest()
    _logger.info("lexicon of %d morphs, cost %.2f", len(lexicon), lexicon.cost())


def cmd_segment_apply(args):
    run = Run(args, args.out_dir)
    lexicon = MorphLexicon.load(run.input(args.lexicon), args.alpha, run.input(args.analyses))
    with open(run.input(args.input), encoding="utf-8") as src, \
            open(run.output("segmented.txt"), "w", encoding="utf-8") as dst:
        for line in src:
            dst.write(segment_line(lexicon, line) + "\n")
    run.write_manifest()


def _to_classes(corpus, classmap):
    sentences = tuple(tuple(classmap.class_label(w) if w in classmap else UNK for w in s) for s in corpus.sentences)
    return TokenizedCorpus(sentences, corpus.source_tags)


def cmd_train_nnlm(args):
    run = Run(args, args.out_dir)
    corpus = _corpus(run, args.train)
    dev = _corpus(run, [args.dev])
    classmap = None
    if args.classmap:
        classmap = ClassMap.load(run.input(args.classmap))
        corpus, dev = _to_classes(corpus, classmap), _to_classes(dev, classmap)
    config = NetworkConfig(
        embedding_dim=args.embedding_dim, hidden_dim=args.hidden_dim, num_highway_layers=args.highway_layers,
        bottleneck_dim=args.bottleneck_dim, output_kind=args.output, dropout_rate=args.dropout,
        sequence_length=args.sequence_length, batch_sequences=args.batch_sequences, carry_state=args.carry_state,
        noise_beta=args.noise_beta, num_noise=args.num_noise,
        unit_kind="class" if classmap is not None else args.unit_kind)
    vocab = NNLMVocabulary.from_corpus(corpus, args.shortlist)
    network = init_network(config, vocab, seed=args.seed)
    tag_values = {}
    for item in args.tag_value or []:
        tag, sep, value = item.partition("=")
        if not sep:
            raise ValueError("--tag-value expects tag=value, got %r" % item)
        tag_values[tag] = float(value)
    tconfig = TrainingConfig(learning_rate=args.learning_rate, max_epochs=args.max_epochs, patience=args.patience,
                             max_seconds=args.max_seconds, weighting=args.weighting, tag_values=tag_values,
                             seed=args.seed)
    result = train(network, corpus, dev, tconfig)
    save_checkpoint(result.network, run.output("model.bvnn"), extra={"best_epoch": result.best_epoch})
    with open(run.output("history.tsv"), "w", encoding="utf-8") as f:
        f.write("epoch\ttrain_loss\tdev_ppl\ttokens\n")
        for r in result.history:
            f.write("%d\t%.6f\t%.6f\t%d\n" % (r.epoch, r.train_loss, r.dev_ppl, r.tokens))
    run.write_manifest()


def cmd_perplexity(args):
    run = Run(args, args.out_dir) if args.out_dir else None
    classmaps = list(args.classmap or [])
    if classmaps and len(classmaps) != len(args.model):
        raise ValueError("give one --classmap per --model (use '-' for none)")
    classmaps = classmaps or [None] * len(args.model)
    models = [load_model(m, None if c in (None, "-") else c, args.unit_kind, run)
              for m, c in zip(args.model, classmaps)]
    if len(models) == 1:
        model = models[0]
    elif args.weights:
        model = MixtureModel(models, [float(w) for w in args.weights])
    elif args.em_dev:
        model = mixture_em(models, _corpus(run, [args.em_dev]), oov_policy=args.oov)
        _logger.info("EM weights: %s", " ".join("%.4f" % w for w in model.weights))
    else:
        raise ValueError("several models need --weights or --em-dev")
    result = perplexity(model, _corpus(run, [args.corpus]), args.oov)
    print(result.tsv())
    if run is not None:
        with open(run.output("perplexity.tsv"), "w", encoding="utf-8") as f:
            f.write(result.tsv() + "\n")
        run.write_manifest()


def cmd_rescore(args):
    run = Run(args, args.out_dir)
    nn, ng = _lattice_models(args, run)
    pruning = _pruning(args)
    scorer = LatticeScorer(nn, ng, pruning)
    with open(run.output("transcripts.txt"), "w", encoding="utf-8") as out, \
            open(run.output("scores.tsv"), "w", encoding="utf-8") as scores:
        for path, lattice in _read_lattices(args, run):
            result = rescore(lattice, pruning=pruning, scorer=scorer)
            out.write(join_output(result.units, lattice.unit_kind) + "\n")
            scores.write("%s\t%.6f\t%d\n" % (_lattice_name(path), result.total_log10, int(result.fallback)))
            if args.emit_lattices:
                with open(run.output(_lattice_name(path) + ".rescored.slf"), "w", encoding="utf-8") as f:
                    f.write(write_slf(lattice, result.link_lm))
    run.write_manifest()


def cmd_nbest(args):
    run = Run(args, args.out_dir)
    nn, ng = _lattice_models(args, run)
    pruning = _pruning(args)
    scorer = LatticeScorer(nn, ng, pruning)
    for path, lattice in _read_lattices(args, run):
        ranked = nbest_exhaustive(lattice, scorer, args.n, max_paths=args.max_paths)
        with open(run.output(_lattice_name(path) + ".nbest"), "w", encoding="utf-8") as f:
            for rank, r in enumerate(ranked, start=1):
                f.write("%d\t%.6f\t%s\n" % (rank, r.total_log10, join_output(r.units, lattice.unit_kind)))
    run.write_manifest()


def _format_value(v):
    return "%g" % v if isinstance(v, float) else str(v)


def cmd_sweep(args):
    if not args.values:
        raise argparse.ArgumentTypeError("--values needs at least one value")
    run = Run(args, args.out_dir)
    rows = []
    higher_is_better = False
    if args.parameter == "cutoffs":
        counts = count_ngrams(_corpus(run, args.train), args.order)
        dev = _corpus(run, [args.dev])
        metric = "dev_ppl"
        for v in args.values:
            model = _train_ngram(counts, args.order, args.smoothing, _cutoffs(v), args.unit_kind or "word")
            result = perplexity(model, dev, args.oov)
            rows.append((v, result.ppl, "%d ngrams" % sum(model.num_ngrams(k) for k in range(1, args.order + 1))))
    elif args.parameter == "mixture_weight":
        if len(args.model) != 2:
            raise ValueError("mixture_weight sweeps need exactly two --model files")
        models = [load_model(m, None, args.unit_kind, run) for m in args.model]
        dev = _corpus(run, [args.dev])
        metric = "dev_ppl"
        for v in args.values:
            w = float(v)
            rows.append((v, perplexity(MixtureModel(models, [w, 1.0 - w]), dev, args.oov).ppl, ""))
    elif args.parameter == "alpha":
        counts = word_counts(_corpus(run, args.train))
        dev_words = [w for s in _corpus(run, [args.dev]) for w in s]
        metric = "dev_word_ppl"
        for v in args.values:
            lexicon = train_morfessor(counts, float(v), seed=args.seed)
            total = 0.0
            for w in dev_words:
                total += sum(lexicon.logprob(m) if m in lexicon.counts else lexicon.fallback_logprob()
                             for m in lexicon.segment(w))
            rows.append((v, math.exp(-total / max(len(dev_words), 1)), "%d morphs" % len(lexicon)))
    else:
        nn, ng = _lattice_models(args, run)
        lattices = _read_lattices(args, run)
        references = None
        if args.reference:
            references = [line.split() for line in open(run.input(args.reference), encoding="utf-8")]
            if len(references) != len(lattices):
                raise ValueError("%d references for %d lattices" % (len(references), len(lattices)))
        key = "lm_interpolation" if args.parameter == "lambda" else "acoustic_scale"
        metric = "wer" if references else "total_log10"
        higher_is_better = references is None
        for v in args.values:
            pruning = _pruning(args, **{key: float(v)})
            scorer = LatticeScorer(nn, ng, pruning)
            results = [(lat, rescore(lat, pruning=pruning, scorer=scorer)) for _, lat in lattices]
            if references:
                errors = sum(edit_distance(ref, join_output(r.units, lat.unit_kind).split())
                             for ref, (lat, r) in zip(references, results))
                rows.append((v, errors / max(sum(len(r) for r in references), 1), "%d errors" % errors))
            else:
                rows.append((v, sum(r.total_log10 for _, r in results), ""))
    scores = [r[1] for r in rows]
    best = int(np.argmax(scores) if higher_is_better else np.argmin(scores))
    lines = ["# parameter=%s metric=%s %s is better" % (args.parameter, metric,
                                                       "higher" if higher_is_better else "lower")]
    for i, (v, score, detail) in enumerate(rows):
        lines.append("%s\t%.6f\t%s\t%s" % (v, score, detail, "*" if i == best else ""))
    with open(run.output("sweep.tsv"), "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    run.write_manifest()


# argument parsing


def _positive_int_or_inf(text):
    if text.lower() in ("inf", "infinity", "none"):
        return math.inf
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1 or 'inf'")
    return value


def _beam(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("beam must be positive")
    return value


def _add_out_dir(p, required=True):
    p.add_argument("--out-dir", required=required, help="directory for all artifacts and the manifest")


def _add_lattice_options(p):
    p.add_argument("--lattice", nargs="+", required=True, help="SLF lattice files")
    p.add_argument("--nnlm", help="network checkpoint")
    p.add_argument("--nnlm-classmap", help="class map for a class-unit network")
    p.add_argument("--ngram", help="ARPA model")
    p.add_argument("--ngram-classmap", help="class map turning the ARPA model into a class model")
    p.add_argument("--unit-kind", choices=("word", "subword"), default=None)
    p.add_argument("--recombination-order", type=_positive_int_or_inf, default=22)
    p.add_argument("--cardinality", type=_positive_int_or_inf, default=62)
    p.add_argument("--beam", type=_beam, default=650.0, help="natural-log window; 'inf' disables")
    p.add_argument("--lm-interpolation", type=float, default=0.5, help="weight of the network (lambda)")
    p.add_argument("--lm-scale", type=float, default=1.0)
    p.add_argument("--acoustic-scale", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bigvocab", description="Language modeling for very large vocabularies.")
    parser.add_argument("--config", help="flat key = value option file (supports include lines)")
    parser.add_argument("--log-level", default="info", choices=("debug", "info", "warning", "error"))
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("cluster", help="cluster words into classes")
    p.add_argument("--train", nargs="+", required=True)
    p.add_argument("--method", choices=("exchange", "brown", "kmeans", "rules"), default="exchange")
    p.add_argument("--classes", type=int, default=1000)
    p.add_argument("--init", choices=("frequency_mod", "from_file"), default="frequency_mod")
    p.add_argument("--init-classmap", help="class map for --init from_file")
    p.add_argument("--embeddings", help="text embedding file for --method kmeans")
    p.add_argument("--rules", help="rule file for --method rules")
    p.add_argument("--colloquial", nargs="+", help="colloquial corpus for --method rules")
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    _add_out_dir(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("train-ngram", help="estimate a back-off n-gram model")
    p.add_argument("--train", nargs="+", required=True)
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--smoothing", choices=("kn", "wb"), default="kn")
    p.add_argument("--cutoffs", help="one count threshold for orders >= 2, or one per order")
    p.add_argument("--classmap", help="train a class n-gram over this class map")
    p.add_argument("--unit-kind", choices=("word", "class", "subword"), default="word")
    _add_out_dir(p)
    p.set_defaults(func=cmd_train_ngram)

    p = sub.add_parser("export-arpa", help="smooth a saved count table and write ARPA")
    p.add_argument("--counts", required=True)
    p.add_argument("--order", type=int)
    p.add_argument("--smoothing", choices=("kn", "wb"), default="kn")
    p.add_argument("--cutoffs")
    p.add_argument("--unit-kind", choices=("word", "class", "subword"), default="word")
    _add_out_dir(p)
    p.set_defaults(func=cmd_export_arpa)

    p = sub.add_parser("segment-train", help="learn a morph lexicon")
    p.add_argument("--train", nargs="+", required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--token-based", action="store_true")
    p.add_argument("--max-epochs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    _add_out_dir(p)
    p.set_defaults(func=cmd_segment_train)

    p = sub.add_parser("segment-apply", help="segment text with a morph lexicon")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--analyses")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--input", required=True)
    _add_out_dir(p)
    p.set_defaults(func=cmd_segment_apply)

    p = sub.add_parser("train-nnlm", help="train a recurrent network language model")
    p.add_argument("--train", nargs="+", required=True, help="one file per source; the file name is its tag")
    p.add_argument("--dev", required=True)
    p.add_argument("--classmap", help="train on class units")
    p.add_argument("--unit-kind", choices=("word", "subword"), default="word")
    p.add_argument("--shortlist", type=int, help="number of most frequent words modeled directly")
    defaults = NetworkConfig()
    p.add_argument("--embedding-dim", type=int, default=defaults.embedding_dim)
    p.add_argument("--hidden-dim", type=int, default=defaults.hidden_dim)
    p.add_argument("--highway-layers", type=int, default=defaults.num_highway_layers)
    p.add_argument("--bottleneck-dim", type=int, default=None)
    p.add_argument("--output", choices=OUTPUT_KINDS, default=defaults.output_kind)
    p.add_argument("--dropout", type=float, default=defaults.dropout_rate)
    p.add_argument("--sequence-length", type=int, default=defaults.sequence_length)
    p.add_argument("--batch-sequences", type=int, default=None)
    p.add_argument("--carry-state", action="store_true")
    p.add_argument("--noise-beta", type=float, default=defaults.noise_beta)
    p.add_argument("--num-noise", type=int, default=defaults.num_noise)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--max-epochs", type=int, default=20)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--max-seconds", type=float)
    p.add_argument("--weighting", choices=("uniform", "sampling", "update_weight"), default="uniform")
    p.add_argument("--tag-value", action="append", help="tag=value; sampling fraction or update weight")
    p.add_argument("--seed", type=int, default=0)
    _add_out_dir(p)
    p.set_defaults(func=cmd_train_nnlm)

    p = sub.add_parser("perplexity", help="evaluate a model on a corpus")
    p.add_argument("--model", nargs="+", required=True, help="ARPA files or network checkpoints")
    p.add_argument("--classmap", nargs="+", help="class map per model ('-' for none)")
    p.add_argument("--weights", nargs="+", help="mixture weights, one per model")
    p.add_argument("--em-dev", help="estimate mixture weights by EM on this corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--oov", choices=OOV_POLICIES, default="exclude")
    p.add_argument("--unit-kind", choices=("word", "class", "subword"), default=None)
    _add_out_dir(p, required=False)
    p.set_defaults(func=cmd_perplexity)

    p = sub.add_parser("rescore", help="rescore lattices by token passing")
    _add_lattice_options(p)
    p.add_argument("--emit-lattices", action="store_true", help="also write rescored SLF files")
    _add_out_dir(p)
    p.set_defaults(func=cmd_rescore)

    p = sub.add_parser("nbest", help="exact n-best lists by path enumeration")
    _add_lattice_options(p)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--max-paths", type=int, default=10 ** 6)
    _add_out_dir(p)
    p.set_defaults(func=cmd_nbest)

    p = sub.add_parser("sweep", help="evaluate one parameter over a list of values")
    p.add_argument("--parameter", choices=SWEEP_PARAMETERS, required=True)
    p.add_argument("--values", nargs="+", required=True)
    p.add_argument("--train", nargs="+")
    p.add_argument("--dev")
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--smoothing", choices=("kn", "wb"), default="kn")
    p.add_argument("--oov", choices=OOV_POLICIES, default="exclude")
    p.add_argument("--model", nargs="+")
    p.add_argument("--reference", help="one reference transcript per lattice, for word error rates")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lattice", nargs="+")
    p.add_argument("--nnlm")
    p.add_argument("--nnlm-classmap")
    p.add_argument("--ngram")
    p.add_argument("--ngram-classmap")
    p.add_argument("--unit-kind", choices=("word", "subword"), default=None)
    p.add_argument("--recombination-order", type=_positive_int_or_inf, default=22)
    p.add_argument("--cardinality", type=_positive_int_or_inf, default=62)
    p.add_argument("--beam", type=_beam, default=650.0)
    p.add_argument("--lm-interpolation", type=float, default=0.5)
    p.add_argument("--lm-scale", type=float, default=1.0)
    p.add_argument("--acoustic-scale", type=float, default=1.0)
    _add_out_dir(p)
    p.set_defaults(func=cmd_sweep)
    return parser


# options whose values name existing input files
_INPUT_OPTIONS = ("train", "dev", "corpus", "model", "lattice", "counts", "lexicon", "analyses", "input", "classmap",
                  "init_classmap", "embeddings", "rules", "colloquial", "em_dev", "nnlm", "nnlm_classmap", "ngram",
                  "ngram_classmap", "reference")


def _missing_inputs(args) -> list:
    missing = []
    for name in _INPUT_OPTIONS:
        value = getattr(args, name, None)
        for path in (value if isinstance(value, list) else [value]):
            if path and path != "-" and not os.path.isfile(path):
                missing.append(path)
    return missing


_SWEEP_NEEDS = {"cutoffs": ("train", "dev"), "mixture_weight": ("model", "dev"), "alpha": ("train", "dev"),
                "lambda": ("lattice",), "acoustic_scale": ("lattice",)}


def parse_args(argv):
    parser = build_parser()
    globals_parser = argparse.ArgumentParser(add_help=False)
    globals_parser.add_argument("--config")
    globals_parser.add_argument("--log-level")
    known, rest = globals_parser.parse_known_args(argv)
    commands = parser._subparsers._group_actions[0].choices
    if known.config and rest and rest[0] in commands:
        try:
            extra = config_argv(read_config(known.config), commands[rest[0]])
        except ConfigError as exc:
            parser.error(str(exc))
        # config options go first so explicit flags win
        head = argv[:len(argv) - len(rest) + 1]
        argv = head + extra + rest[1:]
    args = parser.parse_args(argv)
    if args.command == "sweep":
        missing = [n for n in _SWEEP_NEEDS[args.parameter] if not getattr(args, n)]
        if missing:
            parser.error("sweep over %s needs --%s" % (args.parameter, " --".join(missing)))
    missing = _missing_inputs(args)
    if missing:
        parser.error("input file not found: %s" % missing[0])
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, args.log_level.upper()), format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except argparse.ArgumentTypeError as exc:
        print("bigvocab %s: error: %s" % (args.command, exc), file=sys.stderr)
        return 2
    except Exception as exc:  # single-line diagnostic, traceback only in debug mode
        _logger.debug("failure", exc_info=True)
        message = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print("bigvocab %s: error: %s" % (args.command, message), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
