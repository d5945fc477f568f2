"""The implication diagram between the echo-state, memory and forgetting properties.

Nodes are ``(property, level)`` pairs; ``level`` is ``None`` for the
properties that have no uniformity grading (ESP, FMP, UAP). An edge fires
when its condition holds for the system and every antecedent node is
supported; a supported antecedent with a failing consequent is a violation.

Declared non-implications can never be violated by data. They are recorded
as witnessed when the antecedent holds and the consequent fails.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .properties import FORGETTING, LEVEL_RANK, PROPERTIES, PropertyVerdict

CONDITIONS = ("always", "state_compact", "state_and_input_compact", "input_metrizable", "shift_invariant")
LEVELS = ("pointwise", "state_uniform", "uniform")
UNGRADED = ("ESP", "FMP", "UAP")

Node = tuple  # (property, level or None)


class MalformedDiagramError(ValueError):
    pass


def node_name(node: Node) -> str:
    prop, level = node
    return prop if level is None else f"{prop}[{level}]"


@dataclass(frozen=True)
class Edge:
    sources: tuple  # tuple of nodes, read as a conjunction
    target: Node
    condition: str
    kind: str  # blue, green, proposition, equivalence, definitional
    provenance: str

    def label(self) -> str:
        lhs = " & ".join(node_name(n) for n in self.sources)
        return f"{lhs} => {node_name(self.target)}"

    def to_dict(self) -> dict:
        return {
            "from": [node_name(n) for n in self.sources],
            "to": node_name(self.target),
            "condition": self.condition,
            "kind": self.kind,
            "provenance": self.provenance,
        }


@dataclass(frozen=True)
class NonImplication:
    source: Node
    target: Node
    witness_system: str
    provenance: str

    def label(self) -> str:
        return f"{node_name(self.source)} =/=> {node_name(self.target)}"

    def to_dict(self) -> dict:
        return {
            "from": node_name(self.source),
            "to": node_name(self.target),
            "witness_system": self.witness_system,
            "provenance": self.provenance,
        }


@dataclass(frozen=True)
class EquivalenceClass:
    """Nodes the edges make mutually equivalent under ``condition``; cycles among them are intended."""

    nodes: frozenset
    condition: str
    note: str

    def to_dict(self) -> dict:
        return {"nodes": sorted(node_name(n) for n in self.nodes), "condition": self.condition, "note": self.note}


@dataclass
class ImplicationDiagram:
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    non_implications: list = field(default_factory=list)
    equivalences: list = field(default_factory=list)

    def validate(self) -> None:
        known = set(self.nodes)
        for n in known:
            _check_node(n)
        for e in self.edges:
            if e.condition not in CONDITIONS:
                raise MalformedDiagramError(f"edge {e.label()}: unknown condition {e.condition!r}")
            if not e.provenance:
                raise MalformedDiagramError(f"edge {e.label()} has no provenance")
            for n in e.sources + (e.target,):
                if n not in known:
                    raise MalformedDiagramError(f"edge {e.label()} references unknown node {node_name(n)}")
        for ni in self.non_implications:
            for n in (ni.source, ni.target):
                if n not in known:
                    raise MalformedDiagramError(f"non-implication references unknown node {node_name(n)}")
        self._check_cycles()

    def _check_cycles(self) -> None:
        # contract declared classes, drop paired equivalence edges, and require a DAG
        parent = {n: n for n in self.nodes}

        def find(n):
            while parent[n] != n:
                n = parent[n]
            return n

        for cls in self.equivalences:
            for n in cls.nodes:
                if n not in parent:
                    raise MalformedDiagramError(f"equivalence references unknown node {node_name(n)}")
            ordered = sorted(cls.nodes, key=node_name)
            for n in ordered[1:]:
                a, b = find(ordered[0]), find(n)
                if a != b:
                    parent[b] = a
        rep = {n: find(n) for n in self.nodes}
        graph = {}
        for e in self.edges:
            # a conjunction does not make any single antecedent equivalent to the target
            if e.kind == "equivalence" or len(e.sources) > 1:
                continue
            for src in e.sources:
                a, b = rep[src], rep[e.target]
                if a != b:
                    graph.setdefault(a, set()).add(b)
        state = {}

        def visit(n):
            state[n] = 1
            for m in sorted(graph.get(n, ()), key=node_name):
                if state.get(m) == 1:
                    raise MalformedDiagramError(f"undeclared cycle through {node_name(m)}")
                if m not in state:
                    visit(m)
            state[n] = 2

        for n in sorted(graph, key=node_name):
            if n not in state:
                visit(n)

    def edges_of_kind(self, kind: str) -> list:
        return [e for e in self.edges if e.kind == kind]

    def to_dict(self) -> dict:
        return {
            "nodes": [node_name(n) for n in self.nodes],
            "edges": [e.to_dict() for e in self.edges],
            "non_implications": [ni.to_dict() for ni in self.non_implications],
            "equivalences": [c.to_dict() for c in self.equivalences],
        }


def _check_node(n) -> None:
    if not (isinstance(n, tuple) and len(n) == 2):
        raise MalformedDiagramError(f"node must be a (property, level) pair, got {n!r}")
    prop, level = n
    if prop not in PROPERTIES:
        raise MalformedDiagramError(f"unknown property {prop!r}")
    if prop in UNGRADED:
        if level is not None:
            raise MalformedDiagramError(f"{prop} has no uniformity levels")
    elif level not in LEVELS:
        raise MalformedDiagramError(f"unknown level {level!r} for {prop}")


def standard_diagram() -> ImplicationDiagram:
    ESP, FMP, UAP = ("ESP", None), ("FMP", None), ("UAP", None)
    nodes = [ESP, FMP, UAP] + [(p, lv) for p in FORGETTING + ("STEADY",) for lv in LEVELS]
    E = []

    def edge(src, dst, cond, kind, prov):
        src = src if isinstance(src, list) else [src]
        E.append(Edge(tuple(src), dst, cond, kind, prov))

    # compactness theorem
    edge(ESP, FMP, "state_compact", "blue",
         "compactness theorem: a compact state space turns the ESP into the FMP")
    edge(ESP, ("sSFP", "state_uniform"), "state_compact", "blue",
         "pullback forgetting lemma, part (i): ESP on a compact state space forces state-uniform pullback forgetting")
    edge(("sIFP", "state_uniform"), ESP, "state_compact", "blue",
         "uniqueness lemma: state-uniform pullback forgetting of reachable states leaves at most one solution per input")
    edge(ESP, ("sSFP", "uniform"), "state_and_input_compact", "green",
         "pullback forgetting lemma, part (ii): with the input space also compact the forgetting is uniform")
    edge([ESP, FMP], ("sIFP", "state_uniform"), "input_metrizable", "proposition",
         "closing proposition: ESP together with the FMP over a metrizable input space gives state-uniform sIFP")
    # uniform attraction is ESP plus uniform SFP
    edge(UAP, ESP, "always", "equivalence", "uniform attraction equivalence")
    edge(UAP, ("SFP", "uniform"), "always", "equivalence", "uniform attraction equivalence")
    edge([ESP, ("SFP", "uniform")], UAP, "always", "equivalence", "uniform attraction equivalence")

    for p in FORGETTING + ("STEADY",):
        edge((p, "uniform"), (p, "state_uniform"), "always", "definitional", "uniform implies state-uniform")
        edge((p, "state_uniform"), (p, "pointwise"), "always", "definitional", "state-uniform implies pointwise")
    for lv in LEVELS:
        edge(("SFP", lv), ("IFP", lv), "always", "definitional", "reachable states are states")
        edge(("sSFP", lv), ("sIFP", lv), "always", "definitional", "reachable states are states")
        edge(("IFP", lv), ("STEADY", lv), "always", "equivalence", "steady-state property is the IFP")
        edge(("STEADY", lv), ("IFP", lv), "always", "equivalence", "steady-state property is the IFP")
    for a, b in (("SFP", "sSFP"), ("IFP", "sIFP")):
        prov = "uniform over shifted inputs, forward and pullback forgetting coincide"
        edge((a, "uniform"), (b, "uniform"), "shift_invariant", "equivalence", prov)
        edge((b, "uniform"), (a, "uniform"), "shift_invariant", "equivalence", prov)

    non = [
        NonImplication((p, "pointwise"), ESP, "circle_square",
                       "circle counterexample: every pair of states is forgotten, yet solutions are not unique")
        for p in FORGETTING
    ]
    eq = [
        EquivalenceClass(frozenset({ESP, ("sSFP", "state_uniform"), ("sIFP", "state_uniform")}), "state_compact",
                         "the state-compact lemmas and the definitional arrow close a loop"),
        EquivalenceClass(frozenset({ESP, ("sSFP", "uniform"), ("sIFP", "uniform")}), "state_and_input_compact",
                         "with compact inputs the uniform pullback levels join the same loop"),
    ]
    d = ImplicationDiagram(nodes, E, non, eq)
    d.validate()
    return d


# -- checking -----------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    edge: Edge
    antecedents: tuple  # verdict dicts
    consequent: dict
    witness: Optional[dict]

    def to_dict(self) -> dict:
        return {
            "edge": self.edge.to_dict(),
            "antecedent_verdicts": list(self.antecedents),
            "consequent_verdict": self.consequent,
            "witness": self.witness,
        }


@dataclass(frozen=True)
class WitnessedNonImplication:
    non_implication: NonImplication
    antecedent_level: str
    consequent_level: str
    witness: Optional[dict]

    def to_dict(self) -> dict:
        return {
            "non_implication": self.non_implication.to_dict(),
            "antecedent_level": self.antecedent_level,
            "consequent_level": self.consequent_level,
            "witness": self.witness,
        }


@dataclass(frozen=True)
class DiagramCheck:
    violations: list
    witnessed: list

    @property
    def consistent(self) -> bool:
        return not self.violations


def condition_met(condition: str, flags: dict) -> bool:
    if condition == "always":
        return True
    if condition == "state_and_input_compact":
        return bool(flags.get("state_compact")) and bool(flags.get("input_compact"))
    if condition in CONDITIONS:
        return bool(flags.get(condition))
    raise MalformedDiagramError(f"unknown condition {condition!r}")


def _verdict_map(verdicts: Iterable[PropertyVerdict]) -> dict:
    out = {}
    for v in verdicts:
        if v.property in out:
            raise ValueError(f"two verdicts for {v.property}")
        out[v.property] = v
    return out


def _node_status(vmap: dict, node: Node) -> Optional[bool]:
    """True if the node holds, False if it fails, None when there is no usable verdict."""
    prop, level = node
    v = vmap.get(prop)
    if v is None or not v.applicable:
        return None
    return v.holds_at(level or "pointwise")


def _summary(v: PropertyVerdict, node: Node) -> dict:
    return {"node": node_name(node), "property": v.property, "level": v.level}


def check_diagram(verdicts: Iterable[PropertyVerdict], flags: dict,
                  diagram: Optional[ImplicationDiagram] = None) -> DiagramCheck:
    """Edges whose condition holds and whose antecedents hold must have a holding consequent."""
    diagram = diagram or standard_diagram()
    diagram.validate()
    vmap = _verdict_map(verdicts)
    violations = []
    for e in diagram.edges:
        if not condition_met(e.condition, flags):
            continue
        status = [_node_status(vmap, n) for n in e.sources]
        target = _node_status(vmap, e.target)
        if any(s is None for s in status) or target is None:
            continue
        if all(status) and not target:
            tv = vmap[e.target[0]]
            violations.append(Violation(
                e,
                tuple(_summary(vmap[n[0]], n) for n in e.sources),
                _summary(tv, e.target),
                tv.evidence.get("witness"),
            ))
    witnessed = []
    for ni in diagram.non_implications:
        s, t = _node_status(vmap, ni.source), _node_status(vmap, ni.target)
        if s and t is False:
            tv = vmap[ni.target[0]]
            witnessed.append(WitnessedNonImplication(
                ni, vmap[ni.source[0]].level, tv.level, tv.evidence.get("witness")))
    return DiagramCheck(violations, witnessed)


def format_diagram(diagram: Optional[ImplicationDiagram] = None) -> str:
    """Plain-text listing; the snapshot test pins this output."""
    diagram = diagram or standard_diagram()
    lines = []
    for kind in ("blue", "green", "proposition", "equivalence", "definitional"):
        group = diagram.edges_of_kind(kind)
        if not group:
            continue
        lines.append(f"[{kind}]")
        for e in group:
            lines.append(f"  {e.label():<44} if {e.condition:<24} -- {e.provenance}")
    for cls in diagram.equivalences:
        lines.append("[equivalence class]")
        members = " <=> ".join(sorted(node_name(n) for n in cls.nodes))
        lines.append(f"  {members}  if {cls.condition} -- {cls.note}")
    lines.append("[non-implication]")
    for ni in diagram.non_implications:
        lines.append(f"  {ni.label():<44} witness {ni.witness_system:<17} -- {ni.provenance}")
    return "\n".join(lines) + "\n"
