"""Word and subword lattices in a subset of the HTK standard lattice format.

Accepted grammar (one record per line, fields are ``key=value``)::

    # unit_kind=subword          optional comment naming the unit kind
    VERSION=1.0                  optional header fields (VERSION, UTTERANCE,
    base=10                      base, lmscale, wdpenalty) are accepted
    N=<nodes> L=<links>
    I=<id> t=<time>
    J=<id> S=<start> E=<end> W=<unit> a=<acoustic> l=<lm>

Scores are logarithms in ``base`` (natural log when absent) and are
stored internally as natural logs; a missing ``a=`` or ``l=`` reads as 0. ``W=!NULL`` marks a link that carries
no unit.
"""

import heapq
import math
from dataclasses import dataclass
from typing import Optional

from ..subword import boundary_flags

NULL_UNIT = "!NULL"
LATTICE_UNIT_KINDS = ("word", "subword", "class")
_HEADER_KEYS = {"VERSION", "UTTERANCE", "base", "lmscale", "wdpenalty", "N", "L"}


class LatticeError(ValueError):
    def __init__(self, message, line: Optional[int] = None):
        super().__init__(message if line is None else "line %d: %s" % (line, message))
        self.line = line


@dataclass(frozen=True)
class Link:
    id: int
    start: int
    end: int
    unit: Optional[str]  # None for a null link
    acoustic: float
    lm: float


class Lattice:
    """Acyclic graph with one start and one end node, validated on construction.

    ``nodes`` maps node id to time; ``links`` is a list of :class:`Link`.
    ``lines`` optionally maps ``("node", id)`` / ``("link", id)`` to the
    source line so that validation errors can point at the input.
    """

    def __init__(self, nodes: dict, links: list, unit_kind: str = "word", lines: Optional[dict] = None):
        if unit_kind not in LATTICE_UNIT_KINDS:
            raise LatticeError("unknown unit kind %r" % unit_kind)
        self.nodes = dict(nodes)
        self.links = list(links)
        self.unit_kind = unit_kind
        self._lines = lines or {}
        self.out_links = {n: [] for n in self.nodes}
        self.in_links = {n: [] for n in self.nodes}
        self.link_by_id = {}
        for link in self.links:
            where = self._line("link", link.id)
            if link.id in self.link_by_id:
                raise LatticeError("duplicate link id %d" % link.id, where)
            for end in (link.start, link.end):
                if end not in self.nodes:
                    raise LatticeError("link %d references missing node %d" % (link.id, end), where)
            self.link_by_id[link.id] = link
            self.out_links[link.start].append(link)
            self.in_links[link.end].append(link)
        if not self.nodes:
            raise LatticeError("lattice has no nodes")
        self.order = self._topological_order()
        self.start = self._unique_endpoint(self.in_links, "start")
        self.end = self._unique_endpoint(self.out_links, "end")
        self._check_reachability()
        if unit_kind == "subword":
            self._check_morph_legality()

    def _line(self, kind, key):
        return self._lines.get((kind, key))

    def _unique_endpoint(self, adjacency, name):
        candidates = sorted(n for n, links in adjacency.items() if not links)
        if not candidates:
            raise LatticeError("no %s node (every node has %s links)"
                               % (name, "incoming" if name == "start" else "outgoing"))
        if len(candidates) > 1:
            n = candidates[1]
            raise LatticeError("dangling node %d: more than one candidate %s node" % (n, name),
                               self._line("node", n))
        return candidates[0]

    def _topological_order(self):
        """Kahn's algorithm, ties broken by (time, id)."""
        indegree = {n: len(self.in_links[n]) for n in self.nodes}
        heap = [(self.nodes[n], n) for n, d in indegree.items() if d == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            _, n = heapq.heappop(heap)
            order.append(n)
            for link in self.out_links[n]:
                indegree[link.end] -= 1
                if indegree[link.end] == 0:
                    heapq.heappush(heap, (self.nodes[link.end], link.end))
        if len(order) != len(self.nodes):
            # every unprocessed node has an unprocessed predecessor, so
            # walking backwards must close a cycle
            remaining = set(self.nodes) - set(order)
            n, seen, walk = min(remaining), {}, []
            while n not in seen:
                seen[n] = len(walk)
                link = min((l for l in self.in_links[n] if l.start in remaining), key=lambda l: l.id)
                walk.append(link)
                n = link.start
            stuck = min(walk[seen[n]:], key=lambda l: l.id)
            raise LatticeError("cycle detected through link %d" % stuck.id, self._line("link", stuck.id))
        return order

    def _check_reachability(self):
        def closure(seed, adjacency, step):
            seen, stack = {seed}, [seed]
            while stack:
                for link in adjacency[stack.pop()]:
                    nxt = step(link)
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            return seen

        forward = closure(self.start, self.out_links, lambda l: l.end)
        backward = closure(self.end, self.in_links, lambda l: l.start)
        for n in sorted(self.nodes):
            if n not in forward or n not in backward:
                raise LatticeError("dangling node %d is not on any start-to-end path" % n, self._line("node", n))

    def _check_morph_legality(self):
        """Every full path must be a legal marked-morph sequence.

        Propagates the set of "inside a word" flags that can reach each
        node; since every node lies on a full path, any conflict is an
        illegal path.
        """
        states = {n: set() for n in self.nodes}
        states[self.start].add(False)
        for n in self.order:
            for link in self.out_links[n]:
                if link.unit is None:
                    states[link.end] |= states[n]
                    continue
                left, right, surface = boundary_flags(link.unit)
                if not surface or any(left != inside for inside in states[n]):
                    raise LatticeError("link %d with unit %r makes an illegal morph sequence" % (link.id, link.unit),
                                       self._line("link", link.id))
                states[link.end].add(right)
        if True in states[self.end]:
            raise LatticeError("a path ends inside a word")

    # queries

    def num_paths(self) -> int:
        counts = {n: 0 for n in self.nodes}
        counts[self.start] = 1
        for n in self.order:
            for link in self.out_links[n]:
                counts[link.end] += counts[n]
        return counts[self.end]

    def paths(self):
        """Yield every start-to-end path as a tuple of links."""
        stack = [(self.start, ())]
        while stack:
            node, path = stack.pop()
            if node == self.end:
                yield path
                continue
            for link in reversed(self.out_links[node]):
                stack.append((link.end, path + (link,)))

    def with_lm_scores(self, lm_scores: dict) -> "Lattice":
        """Copy with ``lm`` replaced for the links in ``lm_scores`` (natural log)."""
        links = [Link(l.id, l.start, l.end, l.unit, l.acoustic, lm_scores.get(l.id, l.lm)) for l in self.links]
        return Lattice(self.nodes, links, self.unit_kind)


def _fields(line: str, lineno: int) -> dict:
    out = {}
    for item in line.split():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise LatticeError("expected key=value, got %r" % item, lineno)
        if key in out:
            raise LatticeError("field %s given twice" % key, lineno)
        out[key] = value
    return out


def _number(fields, key, lineno, kind=float, default=None):
    if key not in fields:
        if default is not None:
            return default
        raise LatticeError("missing field %s=" % key, lineno)
    try:
        return kind(fields[key])
    except ValueError:
        raise LatticeError("bad value for %s: %r" % (key, fields[key]), lineno) from None


def parse_slf(text: str, unit_kind: Optional[str] = None) -> Lattice:
    """Parse and validate a lattice; errors carry the offending line number."""
    declared_kind = None
    header = {}
    header_line = None
    nodes, links, lines = {}, [], {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key.strip() == "unit_kind":
                declared_kind = value.strip()
            continue
        fields = _fields(line, lineno)
        if "I" in fields:
            if header_line is None:
                raise LatticeError("node before the N= L= header", lineno)
            nid = _number(fields, "I", lineno, int)
            if nid in nodes:
                raise LatticeError("duplicate node id %d" % nid, lineno)
            nodes[nid] = _number(fields, "t", lineno)
            lines[("node", nid)] = lineno
        elif "J" in fields:
            if header_line is None:
                raise LatticeError("link before the N= L= header", lineno)
            lid = _number(fields, "J", lineno, int)
            if ("link", lid) in lines:
                raise LatticeError("duplicate link id %d" % lid, lineno)
            if "W" not in fields:
                raise LatticeError("missing field W=", lineno)
            scale = header["scale"]
            unit = None if fields["W"] == NULL_UNIT else fields["W"]
            links.append(Link(lid, _number(fields, "S", lineno, int), _number(fields, "E", lineno, int), unit,
                              _number(fields, "a", lineno, default=0.0) * scale,
                              _number(fields, "l", lineno, default=0.0) * scale))
            lines[("link", lid)] = lineno
        else:
            unknown = sorted(set(fields) - _HEADER_KEYS)
            if unknown:
                raise LatticeError("unknown header field %s" % unknown[0], lineno)
            if header_line is not None and ("N" in fields or "L" in fields):
                raise LatticeError("repeated N= L= header", lineno)
            if "base" in fields:
                base = _number(fields, "base", lineno)
                if base <= 1.0:
                    raise LatticeError("log base must exceed 1, got %g" % base, lineno)
                header["base"] = base
            if "N" in fields or "L" in fields:
                header_line = lineno
                header["N"] = _number(fields, "N", lineno, int)
                header["L"] = _number(fields, "L", lineno, int)
                header["scale"] = math.log(header.get("base", math.e))
    if header_line is None:
        raise LatticeError("missing N= L= header")
    if len(nodes) != header["N"]:
        raise LatticeError("header declares %d nodes, found %d" % (header["N"], len(nodes)), header_line)
    if len(links) != header["L"]:
        raise LatticeError("header declares %d links, found %d" % (header["L"], len(links)), header_line)
    if unit_kind is not None and declared_kind is not None and unit_kind != declared_kind:
        raise LatticeError("lattice declares unit kind %r, expected %r" % (declared_kind, unit_kind))
    return Lattice(nodes, links, unit_kind or declared_kind or "word", lines)


def read_slf(path: str, unit_kind: Optional[str] = None) -> Lattice:
    with open(path, encoding="utf-8") as f:
        text = f.read()
    try:
        return parse_slf(text, unit_kind)
    except LatticeError as exc:
        raise LatticeError("%s: %s" % (path, exc)) from None


def write_slf(lattice: Lattice, lm_scores: Optional[dict] = None) -> str:
    """Serialize with log10 scores; ``lm_scores`` overrides per-link LM scores (natural log)."""
    lm_scores = lm_scores or {}
    to10 = 1.0 / math.log(10.0)
    out = ["# unit_kind=%s" % lattice.unit_kind, "VERSION=1.0", "base=10",
           "N=%d L=%d" % (len(lattice.nodes), len(lattice.links))]
    for n in sorted(lattice.nodes):
        out.append("I=%d t=%.12g" % (n, lattice.nodes[n]))
    for link in sorted(lattice.links, key=lambda l: l.id):
        lm = lm_scores.get(link.id, link.lm)
        out.append("J=%d S=%d E=%d W=%s a=%.12g l=%.12g" % (
            link.id, link.start, link.end, NULL_UNIT if link.unit is None else link.unit,
            link.acoustic * to10, lm * to10))
    return "\n".join(out) + "\n"
