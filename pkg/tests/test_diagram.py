from pathlib import Path

import pytest

from echoprop.diagram import (
    Edge,
    ImplicationDiagram,
    MalformedDiagramError,
    check_diagram,
    format_diagram,
    standard_diagram,
)
from echoprop.properties import PropertyVerdict

SNAPSHOT = Path(__file__).parent / "snapshots" / "diagram.txt"
COMPACT = {"state_compact": True, "input_compact": True, "input_metrizable": True, "shift_invariant": True}


def V(prop, level, **evidence):
    return PropertyVerdict(prop, level, evidence)


def test_snapshot():
    assert format_diagram() == SNAPSHOT.read_text()


def test_edge_groups():
    d = standard_diagram()
    blue = {e.label() for e in d.edges_of_kind("blue")}
    assert blue == {"ESP => FMP", "ESP => sSFP[state_uniform]", "sIFP[state_uniform] => ESP"}
    assert all(e.condition == "state_compact" for e in d.edges_of_kind("blue"))
    green = d.edges_of_kind("green")
    assert [e.label() for e in green] == ["ESP => sSFP[uniform]"]
    assert green[0].condition == "state_and_input_compact"
    prop = d.edges_of_kind("proposition")
    assert [e.label() for e in prop] == ["ESP & FMP => sIFP[state_uniform]"]
    assert prop[0].condition == "input_metrizable"
    assert all(e.provenance for e in d.edges)
    assert {ni.label() for ni in d.non_implications} == {
        f"{p}[pointwise] =/=> ESP" for p in ("SFP", "IFP", "sSFP", "sIFP")
    }


def test_synthetic_single_violation():
    verdicts = [V("ESP", "uniform"), V("sSFP", "pointwise", witness={"n": 3})]
    check = check_diagram(verdicts, {"state_compact": True})
    assert len(check.violations) == 1
    v = check.violations[0]
    assert v.edge.label() == "ESP => sSFP[state_uniform]"
    assert v.witness == {"n": 3}
    assert not check.consistent


def test_condition_gating():
    verdicts = [V("ESP", "uniform"), V("sSFP", "pointwise")]
    assert check_diagram(verdicts, {}).consistent
    both = check_diagram(verdicts, {"state_compact": True, "input_compact": True})
    assert {v.edge.label() for v in both.violations} == {"ESP => sSFP[state_uniform]", "ESP => sSFP[uniform]"}


def test_conjunction_edge():
    base = [V("ESP", "uniform"), V("sIFP", "pointwise")]
    assert check_diagram(base, {"input_metrizable": True}).consistent
    check = check_diagram(base + [V("FMP", "uniform")], {"input_metrizable": True})
    assert [v.edge.label() for v in check.violations] == ["ESP & FMP => sIFP[state_uniform]"]


def test_not_applicable_and_missing_skip_edges():
    verdicts = [V("ESP", "refuted"), V("FMP", "not_applicable"), V("UAP", "uniform")]
    check = check_diagram(verdicts, COMPACT)
    assert [v.edge.label() for v in check.violations] == ["UAP => ESP"]


def test_witnessed_non_implication():
    verdicts = [V("ESP", "refuted", witness={"diameter": 0.5}), V("SFP", "pointwise")]
    check = check_diagram(verdicts, COMPACT)
    assert check.consistent
    assert [w.non_implication.label() for w in check.witnessed] == ["SFP[pointwise] =/=> ESP"]
    assert check.witnessed[0].witness == {"diameter": 0.5}


def test_all_supported_is_consistent():
    verdicts = [V(p, "uniform") for p in ("ESP", "FMP", "SFP", "IFP", "sSFP", "sIFP", "UAP", "STEADY")]
    check = check_diagram(verdicts, COMPACT)
    assert check.consistent and not check.witnessed


def test_empty_verdicts():
    check = check_diagram([], COMPACT)
    assert check.violations == [] and check.witnessed == []


def test_duplicate_verdicts_rejected():
    with pytest.raises(ValueError):
        check_diagram([V("ESP", "uniform"), V("ESP", "refuted")], COMPACT)


def test_malformed_diagram():
    bad = ImplicationDiagram(nodes=[("ESP", None)],
                             edges=[Edge((("ESP", None),), ("FMP", None), "always", "x", "p")])
    with pytest.raises(MalformedDiagramError):
        check_diagram([], {}, bad)
    with pytest.raises(MalformedDiagramError):
        ImplicationDiagram(nodes=[("ESP", "uniform")]).validate()
    with pytest.raises(MalformedDiagramError):
        ImplicationDiagram(nodes=[("SFP", "often")]).validate()
    no_prov = ImplicationDiagram(nodes=[("ESP", None), ("FMP", None)],
                                 edges=[Edge((("ESP", None),), ("FMP", None), "always", "x", "")])
    with pytest.raises(MalformedDiagramError):
        no_prov.validate()
    odd = ImplicationDiagram(nodes=[("ESP", None), ("FMP", None)],
                             edges=[Edge((("ESP", None),), ("FMP", None), "sometimes", "x", "p")])
    with pytest.raises(MalformedDiagramError):
        odd.validate()


def test_acyclic_apart_from_declared_equivalences():
    d = standard_diagram()
    d.validate()
    assert [c.condition for c in d.equivalences] == ["state_compact", "state_and_input_compact"]
    # dropping the declaration exposes the loop through the compact-state lemmas
    loose = ImplicationDiagram(d.nodes, d.edges, d.non_implications, [])
    with pytest.raises(MalformedDiagramError, match="cycle"):
        loose.validate()
