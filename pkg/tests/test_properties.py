import numpy as np
import pytest

from echoprop import properties as props
from echoprop.config import TestConfig
from echoprop.sequences import window_from_literal
from echoprop.flows import pullback_flow, forward_flow
from echoprop.systems import catalog_get, resolve_process


def test_config_validation():
    with pytest.raises(ValueError):
        TestConfig(n_max=10, tail_window=11)
    with pytest.raises(ValueError):
        TestConfig(tol=0.0)
    cfg = TestConfig(n_max=50, tail_window=5)
    assert cfg.tail() == [46, 47, 48, 49, 50]
    assert cfg.pointwise_horizon() == 200 and cfg.pointwise_horizon(1100) == 1100


def test_verdict_validation_and_helpers():
    v = props.PropertyVerdict("SFP", "state_uniform")
    assert v.supported and v.holds_at("pointwise") and not v.holds_at("uniform")
    assert not props.PropertyVerdict("ESP", "refuted").supported
    with pytest.raises(ValueError):
        props.PropertyVerdict("XYZ", "uniform")
    with pytest.raises(ValueError):
        props.PropertyVerdict("ESP", "mostly")


def test_forgetting_unknown_variant(affine, iid, small_cfg):
    with pytest.raises(ValueError):
        props.test_forgetting(affine, "QFP", iid(affine), small_cfg)


@pytest.mark.parametrize("variant", props.FORGETTING)
def test_affine_forgetting_uniform_with_contraction_envelope(variant, affine, iid, small_cfg):
    v = props.test_forgetting(affine, variant, iid(affine), small_cfg)
    assert v.level == "uniform"
    ev = v.evidence
    assert ev["envelope_pointwise"] <= ev["envelope_state_uniform"] <= ev["envelope_uniform"]
    for n, value in ev["envelope_curve"]:
        assert value <= 0.5 ** n * 4 + 1e-12


def test_rotation_refuted_with_witness(iid, small_cfg):
    spec = catalog_get("rotation(0.3)")
    proc = iid(spec)
    for variant in props.FORGETTING:
        v = props.test_forgetting(spec, variant, proc, small_cfg)
        assert v.level == "refuted"
        w = v.evidence["witness"]
        assert w["breaks"] == "pointwise" and w["distance"] >= small_cfg.tol
    esp = props.test_esp(spec, proc, small_cfg)
    assert esp.level == "refuted" and esp.evidence["persistent"]
    assert props.test_uniform_attracting(spec, proc, small_cfg).level == "refuted"
    assert props.test_steady_state(spec, proc, small_cfg).level == "refuted"


def test_esp_witness_replays(iid, small_cfg):
    spec = catalog_get("rotation(0.3)")
    v = props.test_esp(spec, iid(spec), small_cfg)
    w = v.evidence["witness"]
    window = window_from_literal(w["window"]["literal"])
    a = pullback_flow(spec, w["states"][0], window, w["n"])
    b = pullback_flow(spec, w["states"][1], window, w["n"])
    assert spec.distance(a[None], b[None])[0] == pytest.approx(w["diameter"], abs=1e-15)


def test_forgetting_witness_replays(iid, small_cfg):
    spec = catalog_get("doubling")
    v = props.test_forgetting(spec, "SFP", iid(spec), small_cfg)
    w = v.evidence["witness"]
    window = window_from_literal(w["window"]["literal"])
    a = forward_flow(spec, w["states"][0], window, w["n"])
    b = forward_flow(spec, w["states"][1], window, w["n"])
    assert spec.distance(a[None], b[None])[0] == pytest.approx(w["distance"], abs=1e-15)


def test_constant_system_everything_uniform(small_cfg):
    spec = catalog_get("constant")
    proc = resolve_process("iid", spec)
    esp = props.test_esp(spec, proc, small_cfg)
    assert esp.level == "uniform"
    assert all(d == 0.0 for n, d in esp.evidence["diameter_curve"])
    fmp = props.test_fmp(spec, proc, small_cfg, esp)
    assert fmp.level == "uniform"
    assert all(d == 0.0 for n, d in fmp.evidence["delta_curve"])
    for item in props.LEMMA_TARGET:
        c = props.lemma4_check(spec, proc, small_cfg, item, esp)
        assert c.verdict.level == "uniform" and c.discrepancy == 0.0


def test_fmp_not_applicable_without_esp(circle, small_cfg):
    proc = resolve_process("constant", circle)
    v = props.test_fmp(circle, proc, small_cfg)
    assert v.level == "not_applicable" and not v.applicable
    c = props.crosscheck_lemma4(circle, proc, small_cfg, "iii")
    assert c.level == "not_applicable"


def test_fmp_affine_delta_below_closed_form(iid, small_cfg):
    spec = catalog_get("affine(0.5,1)")
    v = props.test_fmp(spec, iid(spec), small_cfg)
    assert v.level == "uniform"
    # |H(u') - H(u)| over inputs in [-1, 1] differing before time -n+1 is at most 2 * 0.5**n / 0.5
    for n, d in v.evidence["delta_curve"]:
        assert d <= 4 * 0.5 ** n + 1e-15


def test_fmp_tanh_below_tol_by_150(iid):
    spec = catalog_get("tanh_esn(0.9)")
    cfg = TestConfig(n_max=150, input_samples=4, state_samples=8, fmp_perturbations=2)
    v = props.test_fmp(spec, iid(spec), cfg)
    assert v.level == "uniform"
    diam = 2 * np.sqrt(16)
    for n, d in v.evidence["delta_curve"]:
        assert d <= 0.9 ** n * diam / (1 - 0.9) + 1e-12


def test_decay_slope():
    n = np.arange(1, 40)
    assert props.decay_slope(n, 3.0 * 0.7 ** n) == pytest.approx(np.log(0.7), abs=1e-9)
    assert props.decay_slope([1, 2], [1.0, 0.5]) is None


def test_uap_affine_and_probe(affine, iid, small_cfg):
    v = props.test_uniform_attracting(affine, iid(affine), small_cfg)
    assert v.level == "uniform"
    assert v.evidence["reduced_form_ok"]


def test_steady_state_is_ifp_alias(affine, iid, small_cfg):
    ifp = props.test_forgetting(affine, "IFP", iid(affine), small_cfg)
    steady = props.test_steady_state(affine, iid(affine), small_cfg, ifp=ifp)
    assert steady.property == "STEADY"
    assert (steady.level, steady.evidence, steady.statistical) == (ifp.level, ifp.evidence, ifp.statistical)


def test_circle_levels(circle, small_cfg):
    proc = resolve_process("constant", circle)
    sfp = props.test_forgetting(circle, "SFP", proc, small_cfg)
    assert sfp.level == "pointwise"
    assert sfp.evidence["witness"]["breaks"] == "state_uniform"
    esp = props.test_esp(circle, proc, small_cfg)
    assert esp.level == "refuted" and esp.evidence["min_tail_diameter"] >= 0.4


def test_affine_item_iv_matches_contraction(affine, iid, small_cfg):
    # d(psi_n(x, T^n u), H(tau u)) = 0.5**n |x - H(u truncated at -n)|
    proc = iid(affine)
    c = props.lemma4_check(affine, proc, small_cfg, "iv")
    assert c.verdict.level == "uniform"
    assert c.discrepancy < 1e-9


def test_affine_item_iv_constant_input_form(affine):
    # with a constant input the echo state does not depend on the truncation time
    cfg = TestConfig(n_max=60, tail_window=10, state_samples=8, input_samples=2, lemma_pasts=2)
    proc = resolve_process("constant(0.4)", affine)
    h = 0.4 / 0.5
    from echoprop.sequences import InputWindow
    w = InputWindow.from_arrays(np.full(60, 0.4))
    for x in (-2.0, -0.3, 1.7):
        for n in (1, 10, 40):
            got = abs(pullback_flow(affine, [x], w, n)[0] - h)
            assert got == pytest.approx(0.5 ** n * abs(x - h), abs=1e-9)
    assert props.lemma4_check(affine, proc, cfg, "iv").verdict.level == "uniform"


def test_lemma_unknown_item(affine, iid, small_cfg):
    with pytest.raises(ValueError):
        props.lemma4_check(affine, iid(affine), small_cfg, "v")


def test_shift_diagonal_envelopes(affine, iid, small_cfg):
    # for a shift-invariant process the forward and pullback uniform envelopes agree up to sampling
    proc = iid(affine)
    fw = dict(map(tuple, props.test_forgetting(affine, "SFP", proc, small_cfg).evidence["envelope_curve"]))
    pb = dict(map(tuple, props.test_forgetting(affine, "sSFP", proc, small_cfg).evidence["envelope_curve"]))
    for n in fw:
        assert fw[n] == pytest.approx(pb[n], rel=1e-9, abs=1e-300)


def test_pullback_cache_is_transparent(affine, small_cfg):
    from echoprop import flows
    from echoprop.sequences import InputWindow
    rng = np.random.default_rng(0)
    X = affine.sample_states(rng, 5)
    w = InputWindow.from_arrays(rng.uniform(-1, 1, 30))
    props.clear_cache()
    a = props.pullback_images(affine, X, w, [3, 30])
    b = props.pullback_images(affine, X, w, [3, 30])
    assert a is b
    assert np.array_equal(a, flows.pullback_images(affine, X, w, [3, 30]))
