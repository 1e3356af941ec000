"""Reading and writing the line-oriented model format.

::

    automaton fig1
    clocks x
    events a b c
    location l0 initial
    location l1 invariant x<=3 cost 2
    edge l0 -> l1 on fault
    edge l1 -> l2 on a when x<=2 reset x cost 1

Observer files add ``granularity 1/m`` to the header and an ``observe a,b``
clause to locations.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .core import (FAULT, RELATIONS, TAU, TRUE, Atom, Edge, Guard, TAError,
                   TimedAutomaton, fmt, fmt_location)


class ModelError(TAError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


_IDENT = r"[A-Za-z0-9_][A-Za-z0-9_.']*"
_ATOM = re.compile(rf"^\s*({_IDENT})\s*(<=|>=|==|=|<|>)\s*(\d+(?:/\d+)?)\s*$")
_LOC_KEYS = ("initial", "invariant", "cost", "final", "repeated", "observe")
_EDGE_KEYS = ("when", "reset", "cost")


@dataclass
class ParsedModel:
    automaton: TimedAutomaton
    observe: dict = field(default_factory=dict)
    granularity: Fraction | None = None


def parse_guard(text: str, clocks=None, line: int | None = None) -> Guard:
    text = text.strip()
    if re.search(r"\||\bor\b", text):
        raise ModelError(f"disjunction is not allowed (constraints must be convex): {text!r}", line)
    if not text or text.lower() == "true":
        return TRUE
    atoms = []
    for part in re.split(r"\band\b|&&|&", text):
        m = _ATOM.match(part)
        if not m:
            raise ModelError(f"cannot read constraint {part.strip()!r}", line)
        clock, op, const = m.groups()
        if clocks is not None and clock not in clocks:
            raise ModelError(f"unknown clock {clock!r}", line)
        atoms.append(Atom(clock, op, Fraction(const)))
    return Guard(tuple(atoms))


def _clauses(text: str, keys, line) -> dict[str, str]:
    """Split ``text`` at the given keywords: ``{keyword: argument}``."""
    pat = re.compile(r"\b(" + "|".join(keys) + r")\b")
    found = list(pat.finditer(text))
    if found and text[:found[0].start()].strip():
        raise ModelError(f"unexpected {text[:found[0].start()].strip()!r}", line)
    if not found and text.strip():
        raise ModelError(f"unexpected {text.strip()!r}", line)
    out = {}
    for i, m in enumerate(found):
        end = found[i + 1].start() if i + 1 < len(found) else len(text)
        key = m.group(1)
        if key in out:
            raise ModelError(f"repeated clause {key!r}", line)
        out[key] = text[m.end():end].strip()
    return out


def _names(text: str) -> list[str]:
    return [t for t in re.split(r"[\s,]+", text.strip()) if t]


def parse_model(text: str) -> ParsedModel:
    name = None
    clocks: list[str] = []
    events: list[str] = []
    granularity = None
    locations: list[str] = []
    initial = None
    invariants, costs, observe = {}, {}, {}
    final, repeated = set(), set()
    edge_lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if head in ("automaton", "observer"):
            name = rest or "A"
        elif head == "clocks":
            clocks += _names(rest)
        elif head == "events":
            for a in _names(rest):
                if a in (TAU, FAULT):
                    raise ModelError(f"{a!r} is reserved and cannot be declared as an event", lineno)
                events.append(a)
        elif head == "granularity":
            try:
                granularity = Fraction(rest)
            except (ValueError, ZeroDivisionError):
                raise ModelError(f"bad granularity {rest!r}", lineno) from None
            if granularity <= 0 or granularity.numerator != 1:
                raise ModelError("granularity must be of the form 1/m", lineno)
        elif head == "location":
            lname, _, opts = rest.partition(" ")
            if not re.fullmatch(_IDENT, lname or ""):
                raise ModelError(f"bad location name {lname!r}", lineno)
            if lname in locations:
                raise ModelError(f"location {lname!r} declared twice", lineno)
            locations.append(lname)
            cl = _clauses(" " + opts, _LOC_KEYS, lineno)
            if "initial" in cl:
                if cl["initial"]:
                    raise ModelError(f"unexpected {cl['initial']!r}", lineno)
                if initial is not None:
                    raise ModelError("two initial locations", lineno)
                initial = lname
            if "invariant" in cl:
                g = parse_guard(cl["invariant"], set(clocks), lineno)
                if not g.is_upper_bound():
                    raise ModelError(f"invariant must use only < and <=: {cl['invariant']!r}", lineno)
                invariants[lname] = g
            if "cost" in cl:
                costs[lname] = _int(cl["cost"], lineno)
            for flag, bag in (("final", final), ("repeated", repeated)):
                if flag in cl:
                    if cl[flag]:
                        raise ModelError(f"unexpected {cl[flag]!r}", lineno)
                    bag.add(lname)
            if "observe" in cl:
                obs = _names(cl["observe"])
                for a in obs:
                    if a not in events:
                        raise ModelError(f"observe: unknown event {a!r}", lineno)
                observe[lname] = frozenset(obs)
        elif head == "edge":
            edge_lines.append((lineno, rest))
        else:
            raise ModelError(f"unknown declaration {head!r}", lineno)

    if not locations:
        raise ModelError("no locations declared")
    if initial is None:
        initial = locations[0]
    edges = []
    for lineno, rest in edge_lines:
        m = re.match(rf"^({_IDENT})\s*->\s*({_IDENT})\s+on\s+({_IDENT})(.*)$", rest)
        if not m:
            raise ModelError("expected 'edge SRC -> DST on LABEL ...'", lineno)
        src, dst, label, opts = m.groups()
        for l in (src, dst):
            if l not in locations:
                raise ModelError(f"unknown location {l!r}", lineno)
        if label not in events and label not in (TAU, FAULT):
            raise ModelError(f"unknown event {label!r}", lineno)
        cl = _clauses(opts, _EDGE_KEYS, lineno)
        guard = parse_guard(cl.get("when", ""), set(clocks), lineno)
        resets = _names(cl.get("reset", ""))
        for x in resets:
            if x not in clocks:
                raise ModelError(f"unknown clock {x!r}", lineno)
        cost = _int(cl["cost"], lineno) if "cost" in cl else 0
        edges.append(Edge(src, dst, label, guard, frozenset(resets), cost))
    try:
        A = TimedAutomaton(
            name=name or "A", locations=tuple(locations), initial=initial,
            clocks=tuple(clocks), events=frozenset(events), edges=tuple(edges),
            invariants=invariants, final=frozenset(final) if final else None,
            repeated=frozenset(repeated), location_costs=costs)
    except TAError as exc:
        raise ModelError(str(exc)) from exc
    return ParsedModel(A, observe, granularity)


def _int(text: str, line: int) -> int:
    try:
        k = int(text)
    except ValueError:
        raise ModelError(f"expected a nonnegative integer, got {text!r}", line) from None
    if k < 0:
        raise ModelError("costs must be nonnegative", line)
    return k


def parse_ta(text: str) -> TimedAutomaton:
    return parse_model(text).automaton


def load_ta(path) -> TimedAutomaton:
    return parse_ta(Path(path).read_text(encoding="utf-8"))


def _flat(loc) -> str:
    if isinstance(loc, tuple):
        return ".".join(_flat(p) for p in loc)
    if isinstance(loc, frozenset):
        return "S" + "".join(sorted(map(str, loc)))
    return str(loc)


def serialize_ta(A: TimedAutomaton, observe=None, granularity=None) -> str:
    lines = [f"automaton {A.name}"]
    if granularity is not None and Fraction(granularity) != 1:
        lines.append(f"granularity {fmt(Fraction(granularity))}")
    if A.clocks:
        lines.append("clocks " + " ".join(A.clocks))
    if A.events:
        lines.append("events " + " ".join(sorted(A.events)))
    for l in A.locations:
        parts = [f"location {_flat(l)}"]
        if l == A.initial:
            parts.append("initial")
        if A.invariant(l):
            parts.append(f"invariant {A.invariant(l)}")
        if A.cost_of(l):
            parts.append(f"cost {A.cost_of(l)}")
        if A.final is not None and l in A.final:
            parts.append("final")
        if l in A.repeated:
            parts.append("repeated")
        if observe is not None and observe.get(l):
            parts.append("observe " + ",".join(sorted(observe[l])))
        lines.append(" ".join(parts))
    for e in A.edges:
        parts = [f"edge {_flat(e.source)} -> {_flat(e.target)} on {e.label}"]
        if e.guard:
            parts.append(f"when {e.guard}")
        if e.reset:
            parts.append("reset " + ",".join(sorted(e.reset)))
        if e.cost:
            parts.append(f"cost {e.cost}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def ta_to_dot(A: TimedAutomaton, observe=None) -> str:
    """Graphviz rendering; invariants, costs and observed sets go in node labels."""
    def q(s):
        return '"' + str(s).replace('"', r'\"') + '"'

    lines = [f"digraph {q(A.name)} {{", "  rankdir=LR;", "  node [shape=ellipse];"]
    for l in A.locations:
        parts = [fmt_location(l)]
        if A.invariant(l):
            parts.append(str(A.invariant(l)))
        if A.cost_of(l):
            parts.append(f"cost {A.cost_of(l)}")
        if observe is not None:
            parts.append("{" + ",".join(sorted(observe.get(l, ()))) + "}")
        extra = ", peripheries=2" if l == A.initial else ""
        lines.append(f"  {q(fmt_location(l))} [label={q(' | '.join(parts))}{extra}];")
    for e in A.edges:
        lab = [e.label]
        if e.guard:
            lab.append(str(e.guard))
        if e.reset:
            lab.append("{" + ",".join(sorted(e.reset)) + "}:=0")
        if e.cost:
            lab.append(f"cost {e.cost}")
        style = ", style=dashed" if e.label in (TAU, FAULT) else ""
        lines.append(f"  {q(fmt_location(e.source))} -> {q(fmt_location(e.target))} "
                     f"[label={q(', '.join(lab))}{style}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


__all__ = ["ta_to_dot", "ModelError", "ParsedModel", "parse_model", "parse_ta", "load_ta",
           "serialize_ta", "parse_guard", "RELATIONS", "fmt_location"]
