"""Run the testers for one system and input process and write a JSON report.

Report schema (version 1), keys sorted on output::

    schema_version   1
    version          package version
    backend          kernel backend used ("cython" or "python")
    system           {"id", "flags", "description"}
    process          {"id", "kind", "seed", "shift_invariant"}
    config           TestConfig fields
    verdicts         [{"property", "level", "statistical", "evidence"}]
    crosschecks      [{"item", "target", "level", "discrepancy", "identity_gap"}]
    violations       [{"edge", "antecedent_verdicts", "consequent_verdict", "witness"}]
    non_implications [{"non_implication", "antecedent_level", "consequent_level", "witness"}]
    truncation       {"pullback_horizon", "product_metric_tail", "echo_depth", "echo_tail"}

Witnesses carry what is needed to replay them: the window literal, its
process index (or the adversarial corner), the states and the seed.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, kernels
from . import properties as props
from .config import TestConfig
from .diagram import DiagramCheck, check_diagram, standard_diagram
from .sequences import truncation_bound
from .systems import InputProcess, SystemSpec, to_unit_interval

SCHEMA_VERSION = 1


@dataclass
class AnalysisReport:
    system: SystemSpec
    process: InputProcess
    config: TestConfig
    verdicts: list = field(default_factory=list)
    crosschecks: list = field(default_factory=list)
    check: DiagramCheck = field(default_factory=lambda: DiagramCheck([], []))

    @property
    def consistent(self) -> bool:
        return self.check.consistent

    def verdict(self, prop: str) -> Optional[props.PropertyVerdict]:
        return next((v for v in self.verdicts if v.property == prop), None)

    def flags(self) -> dict:
        f = self.system.flags()
        f["shift_invariant"] = self.process.shift_invariant
        return f

    def to_dict(self) -> dict:
        cfg = self.config
        depth = 2 * cfg.n_max
        return {
            "schema_version": SCHEMA_VERSION,
            "version": __version__,
            "backend": kernels.BACKEND,
            "system": {
                "id": self.system.name,
                "flags": self.flags(),
                "metric": self.system.metric,
                "description": self.system.description,
            },
            "process": {
                "id": self.process.name,
                "kind": self.process.kind,
                "seed": self.process.seed,
                "shift_invariant": self.process.shift_invariant,
            },
            "config": cfg.as_dict(),
            "verdicts": [_annotate(self.system, v.to_dict()) for v in self.verdicts],
            "crosschecks": list(self.crosschecks),
            "violations": [v.to_dict() for v in self.check.violations],
            "non_implications": [w.to_dict() for w in self.check.witnessed],
            "truncation": {
                "pullback_horizon": cfg.n_max,
                "product_metric_tail": truncation_bound(cfg.n_max),
                "echo_depth": depth,
                "echo_tail": truncation_bound(depth),
            },
        }


def _annotate(spec: SystemSpec, verdict: dict) -> dict:
    # circle states are stored in the centered chart; also show them in [0, 1)
    w = verdict["evidence"].get("witness")
    if w and spec.metric == "circle" and "states" in w:
        # chart value -2**-k is the grid point 1 - 2**-k, which rounds to 1.0 in [0, 1) once k > 53
        w = dict(w, states_unit_interval=[to_unit_interval(np.asarray(s)).tolist() for s in w["states"]],
                 grid_exponents=[_grid_exponent(s[0]) for s in w["states"]])
        verdict = dict(verdict, evidence=dict(verdict["evidence"], witness=w))
    return verdict


def _grid_exponent(x: float) -> Optional[int]:
    if not x < 0.0:
        return None
    m, e = math.frexp(-x)
    return 1 - e if m == 0.5 else None


DEPENDENCIES = {"FMP": ("ESP",), "UAP": ("ESP", "SFP"), "STEADY": ("IFP",)}


def _closure(requested: Sequence[str]) -> list:
    need = set()
    stack = list(requested)
    while stack:
        p = stack.pop()
        if p not in props.PROPERTIES:
            raise ValueError(f"unknown property {p!r}; choose from {', '.join(props.PROPERTIES)}")
        if p not in need:
            need.add(p)
            stack.extend(DEPENDENCIES.get(p, ()))
    return [p for p in props.PROPERTIES if p in need]


def analyze(
    spec: SystemSpec,
    proc: InputProcess,
    cfg: TestConfig,
    properties: Optional[Sequence[str]] = None,
    workers: int = 1,
    crosscheck: bool = False,
) -> AnalysisReport:
    """All requested verdicts, the diagram check and (optionally) the alternative-form cross-checks.

    ESP and SFP run first since other testers reuse them; the rest go to a
    thread pool. Results are assembled in a fixed order, so ``workers`` does
    not change the report.
    """
    requested = list(properties) if properties is not None else list(props.PROPERTIES)
    wanted = _closure(requested)
    out = {}
    if "ESP" in wanted:
        out["ESP"] = props.test_esp(spec, proc, cfg)
    if "SFP" in wanted:
        out["SFP"] = props.test_forgetting(spec, "SFP", proc, cfg)

    def run(p):
        if p in props.FORGETTING:
            return props.test_forgetting(spec, p, proc, cfg)
        if p == "FMP":
            return props.test_fmp(spec, proc, cfg, esp=out["ESP"])
        if p == "UAP":
            return props.test_uniform_attracting(spec, proc, cfg, esp=out["ESP"], sfp=out["SFP"])
        raise AssertionError(p)

    rest = [p for p in wanted if p not in out and p != "STEADY"]
    items = list(props.LEMMA_TARGET) if crosscheck and "ESP" in out else []

    def run_item(item):
        c = props.lemma4_check(spec, proc, cfg, item, esp=out["ESP"])
        return {"item": item, "target": c.verdict.property, "level": c.verdict.level,
                "discrepancy": c.discrepancy, "identity_gap": c.identity_gap}

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(run, p) for p in rest]
            cfuts = [pool.submit(run_item, i) for i in items]
            results = [f.result() for f in futs]
            crosschecks = [f.result() for f in cfuts]
    else:
        results = [run(p) for p in rest]
        crosschecks = [run_item(i) for i in items]
    out.update(zip(rest, results))
    if "STEADY" in wanted:
        out["STEADY"] = props.test_steady_state(spec, proc, cfg, ifp=out["IFP"])

    verdicts = [out[p] for p in props.PROPERTIES if p in requested]
    report = AnalysisReport(spec, proc, cfg, verdicts, crosschecks)
    report.check = check_diagram(verdicts, report.flags(), standard_diagram())
    return report


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def report_json(report: AnalysisReport) -> str:
    return json.dumps(_clean(report.to_dict()), sort_keys=True, indent=2) + "\n"


def emit_report(report: AnalysisReport, path) -> None:
    path = Path(path)
    try:
        path.write_text(report_json(report))
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc


def summary_lines(report: AnalysisReport) -> list:
    lines = [f"system {report.system.name}  process {report.process.name}  seed {report.config.seed}"]
    for v in report.verdicts:
        lines.append(f"  {v.property:<7} {v.level}")
    for c in report.crosschecks:
        lines.append(f"  item ({c['item']}) -> {c['target']:<5} {c['level']}  discrepancy {c['discrepancy']:.2e}")
    lines.append(f"  diagram violations: {len(report.check.violations)}")
    for v in report.check.violations:
        lines.append(f"    {v.edge.label()}")
    for w in report.check.witnessed:
        lines.append(f"  non-implication witnessed: {w.non_implication.label()}")
    return lines
