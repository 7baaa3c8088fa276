"""ARPA back-off model files."""

import logging
import re

from ..corpus import BOS
from .model import LOG10_ZERO, UNIT_KINDS, NGramError, NGramModel

_logger = logging.getLogger(__name__)

_NGRAM_COUNT = re.compile(r"^ngram (\d+)=(\d+)$")
_SECTION = re.compile(r"^\\(\d+)-grams:$")


def _fmt(x: float) -> str:
    if x <= LOG10_ZERO:
        return "-99"
    return "%.8f" % x


def export_arpa(model: NGramModel, path: str):
    """Write ``model`` in ARPA format.

    Entries are ``log10prob<TAB>tokens[<TAB>log10backoff]``; back-off
    weights appear on every k-gram below the top order. A comment line
    before ``\\data\\`` records the unit kind.
    """
    with open(path, "w", encoding="utf-8") as f:
        f.write("# unit_kind=%s\n\n" % model.unit_kind)
        f.write("\\data\\\n")
        for k in range(1, model.order + 1):
            f.write("ngram %d=%d\n" % (k, model.num_ngrams(k)))
        for k in range(1, model.order + 1):
            f.write("\n\\%d-grams:\n" % k)
            bows = model.backoffs(k) if k < model.order else None
            for g in sorted(model.ngrams(k)):
                line = _fmt(model.ngrams(k)[g]) + "\t" + " ".join(g)
                if bows is not None:
                    line += "\t" + _fmt(bows.get(g, 0.0))
                f.write(line + "\n")
        f.write("\n\\end\\\n")


def load_arpa(path: str, unit_kind: str = None) -> NGramModel:
    """Read an ARPA file written by :func:`export_arpa` or other toolkits."""
    declared = {}
    probs, bows = [], []
    section = None
    kind = None
    seen_data = False
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            if not seen_data:
                if line == "\\data\\":
                    seen_data = True
                elif line.startswith("# unit_kind="):
                    kind = line.split("=", 1)[1]
                continue
            if line == "\\end\\":
                section = "end"
                break
            m = _NGRAM_COUNT.match(line)
            if m and section is None:
                declared[int(m.group(1))] = int(m.group(2))
                continue
            m = _SECTION.match(line)
            if m:
                section = int(m.group(1))
                if section != len(probs) + 1:
                    raise NGramError("%s line %d: unexpected section %s" % (path, lineno, line))
                probs.append({})
                bows.append({})
                continue
            if not isinstance(section, int):
                raise NGramError("%s line %d: entry outside an n-gram section" % (path, lineno))
            fields = line.split()
            if len(fields) not in (section + 1, section + 2):
                raise NGramError("%s line %d: malformed %d-gram entry" % (path, lineno, section))
            g = tuple(fields[1:section + 1])
            probs[-1][g] = float(fields[0])
            if len(fields) == section + 2:
                bows[-1][g] = float(fields[-1])
    if not seen_data or section != "end":
        raise NGramError("%s: missing \\data\\ or \\end\\ marker" % path)
    for k, n in declared.items():
        if k > len(probs) or len(probs[k - 1]) != n:
            raise NGramError("%s: %d-gram count mismatch" % (path, k))
    units = [w for (w,) in probs[0] if w != BOS]
    kind = unit_kind or kind or "word"
    if kind not in UNIT_KINDS:
        raise NGramError("%s: unknown unit kind %r" % (path, kind))
    return NGramModel(len(probs), probs, bows, units, kind)
