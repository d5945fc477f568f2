"""Empirical testers for echo-state, fading-memory and forgetting properties.

Every verdict is statistical: a refutation carries a replayable witness, a
supported level only says that no sampled case broke it. Levels, weakest
first: ``pointwise``, ``state_uniform``, ``uniform``.

How a level is decided for one family of divergence curves (one curve set
per input window, sup taken over the state pool):

* the tail of a window is the max of ``sup_pairs d_n`` over the last
  ``tail_window`` values of ``n`` up to a horizon;
* ``state_uniform``: every sampled window's tail at ``n_max`` is below
  ``tol`` (one horizon serves the whole state pool, hard states included);
* ``uniform``: the same, with the adversarial corner windows added;
* ``pointwise``: windows whose tail at ``n_max`` fails are re-run to the
  pointwise horizon and must pass there.
"""

from __future__ import annotations

import hashlib
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import TestConfig
from . import flows
from .flows import (
    Diameter,
    as_states,
    echo_states,
    sample_reachable,
    set_diameter,
    shared_trajectory,
    state_pool,
)
from .sequences import InputWindow, window_to_literal
from .systems import InputProcess, SystemSpec, generate_window

LEVEL_RANK = {"not_applicable": -1, "refuted": 0, "pointwise": 1, "state_uniform": 2, "uniform": 3}
PROPERTIES = ("ESP", "FMP", "SFP", "IFP", "sSFP", "sIFP", "UAP", "STEADY")
FORGETTING = ("SFP", "IFP", "sSFP", "sIFP")
FMP_NOISE_FLOOR = 1e-11


@dataclass
class PropertyVerdict:
    property: str
    level: str
    evidence: dict = field(default_factory=dict)
    statistical: bool = True

    def __post_init__(self):
        if self.property not in PROPERTIES:
            raise ValueError(f"unknown property {self.property!r}")
        if self.level not in LEVEL_RANK:
            raise ValueError(f"unknown level {self.level!r}")

    @property
    def supported(self) -> bool:
        return LEVEL_RANK[self.level] > 0

    @property
    def applicable(self) -> bool:
        return self.level != "not_applicable"

    def holds_at(self, level: str) -> bool:
        return LEVEL_RANK[self.level] >= LEVEL_RANK[level]

    def to_dict(self) -> dict:
        return {
            "property": self.property,
            "level": self.level,
            "statistical": self.statistical,
            "evidence": self.evidence,
        }


# -- shared machinery ------------------------------------------------------------

_PULLBACK_CACHE: "OrderedDict[tuple, tuple]" = OrderedDict()
_PULLBACK_CACHE_SIZE = 96
_cache_lock = threading.Lock()


def pullback_images(spec: SystemSpec, X0, w: InputWindow, depths) -> np.ndarray:
    """Memoized :func:`flows.pullback_images`, keyed on the input rows actually consumed.

    The ESP, the pullback forgetting testers and the Lemma item (iv) all sweep the
    same pool over the same recent inputs.
    """
    X0 = as_states(spec, X0)
    depths = [int(n) for n in depths]
    if not depths or max(depths) > w.past_horizon:
        return flows.pullback_images(spec, X0, w, depths)
    rows = w.block(-max(depths) + 1, 0)
    h = hashlib.blake2b(digest_size=16)
    for arr in (X0, rows, np.asarray(depths, dtype=np.int64)):
        h.update(np.ascontiguousarray(arr).tobytes())
        h.update(str(arr.shape).encode())
    key = (id(spec), h.digest())
    with _cache_lock:
        hit = _PULLBACK_CACHE.get(key)
        if hit is not None and hit[0] is spec:
            _PULLBACK_CACHE.move_to_end(key)
            return hit[1]
    out = flows.pullback_images(spec, X0, w, depths)
    out.flags.writeable = False
    with _cache_lock:
        _PULLBACK_CACHE[key] = (spec, out)  # holding spec keeps its id from being reused
        while len(_PULLBACK_CACHE) > _PULLBACK_CACHE_SIZE:
            _PULLBACK_CACHE.popitem(last=False)
    return out


def clear_cache() -> None:
    with _cache_lock:
        _PULLBACK_CACHE.clear()

@dataclass
class _Tail:
    sup: float
    n: int
    i: int
    j: int
    curve: dict = field(default_factory=dict)


def evidence_ladder(n_max: int, tail: list[int]) -> list[int]:
    pts = set(range(1, min(32, n_max) + 1))
    k = 1
    while k <= n_max:
        pts.add(k)
        k *= 2
    step = max(1, n_max // 10)
    pts.update(range(step, n_max + 1, step))
    pts.update(tail)
    return sorted(p for p in pts if 1 <= p <= n_max)


def _windows(proc: InputProcess, cfg: TestConfig, B: int, H: int, offset: int = 0):
    sampled = [generate_window(proc, B, H, index=offset + k) for k in range(cfg.input_samples)]
    return sampled, proc.adversarial_windows(B, H)


def _window_ref(proc: InputProcess, k: int, n_sampled: int, w: InputWindow, offset: int = 0) -> dict:
    ref = {"process": proc.name, "seed": proc.seed}
    if k < n_sampled:
        ref.update(index=offset + k, adversarial=False)
    else:
        ref.update(index=None, adversarial=True, corner=k - n_sampled)
    ref["literal"] = window_to_literal(w)
    return ref


def _diam_rows(spec: SystemSpec, images: np.ndarray) -> list[Diameter]:
    return [set_diameter(spec, images[s]) for s in range(images.shape[0])]


class _CurveSet:
    """Per-window sup-over-pool curves, evaluated at requested horizons on demand."""

    def __init__(self, spec, cfg, pool, window_fn, n_sampled, n_adv, images_fn, curve_ns):
        self.spec, self.cfg, self.pool = spec, cfg, pool
        self.window_fn = window_fn  # (k, horizon) -> InputWindow
        self.images_fn = images_fn  # (window, ns) -> (len(ns), M, d)
        self.n_sampled, self.n_adv = n_sampled, n_adv
        self.curve_ns = curve_ns
        self._cache = {}

    def tail(self, k: int, horizon: int, with_curve: bool = False) -> _Tail:
        key = (0 if self.spec.input_independent else k, horizon, with_curve)
        if key in self._cache:
            return self._cache[key]
        tail_ns = self.cfg.tail(horizon)
        ns = sorted(set(tail_ns) | (set(self.curve_ns) if with_curve else set()))
        w = self.window_fn(k, horizon)
        images = self.images_fn(w, ns)
        diams = dict(zip(ns, _diam_rows(self.spec, images)))
        best_n = max(tail_ns, key=lambda n: (diams[n].value, -n))
        dbest = diams[best_n]
        out = _Tail(dbest.value, best_n, dbest.i, dbest.j,
                    {n: diams[n].value for n in self.curve_ns if n in diams} if with_curve else {})
        self._cache[key] = out
        return out


def _classify(cs: _CurveSet, horizon_cap: int) -> tuple[str, dict, Optional[dict]]:
    """Level, evidence and witness locator for a curve set."""
    cfg = cs.cfg
    total = cs.n_sampled + cs.n_adv
    fixed = [cs.tail(k, cfg.n_max, with_curve=True) for k in range(total)]
    effective = []
    cap_tails = {}
    for k, t in enumerate(fixed):
        if t.sup < cfg.tol:
            effective.append(t.sup)
        else:
            cap_tails[k] = cs.tail(k, horizon_cap)
            effective.append(min(t.sup, cap_tails[k].sup))
    env_pw = float(max(effective, default=0.0))
    env_su = max(env_pw, float(max((t.sup for t in fixed[:cs.n_sampled]), default=0.0)))
    env_u = max(env_su, float(max((t.sup for t in fixed), default=0.0)))
    pointwise = env_pw < cfg.tol
    state_uniform = env_su < cfg.tol
    uniform = env_u < cfg.tol
    level = "uniform" if uniform else "state_uniform" if state_uniform else "pointwise" if pointwise else "refuted"

    curve = {}
    for t in fixed:
        for n, v in t.curve.items():
            curve[n] = max(curve.get(n, 0.0), v)
    evidence = {
        "horizon": cfg.n_max,
        "pointwise_horizon": horizon_cap,
        "tail_window": cfg.tail_window,
        "tol": cfg.tol,
        "pool_size": int(cs.pool.shape[0]),
        "windows": cs.n_sampled,
        "adversarial_windows": cs.n_adv,
        "levels": {"pointwise": pointwise, "state_uniform": state_uniform, "uniform": uniform},
        # cumulative, so the envelopes are ordered and each one decides its level
        "envelope_pointwise": env_pw,
        "envelope_state_uniform": env_su,
        "envelope_uniform": env_u,
        "envelope_curve": [[int(n), float(curve[n])] for n in sorted(curve)],
    }

    witness = None
    if not pointwise:
        k = max(cap_tails, key=lambda q: (min(fixed[q].sup, cap_tails[q].sup), -q))
        t = cap_tails[k] if cap_tails[k].sup <= fixed[k].sup else fixed[k]
        h = horizon_cap if t is cap_tails[k] else cfg.n_max
        witness = {"breaks": "pointwise", "k": k, "horizon": h, "tail": t}
    elif not uniform:
        pool_range = range(cs.n_sampled) if not state_uniform else range(cs.n_sampled, total)
        k = max(pool_range, key=lambda q: (fixed[q].sup, -q))
        witness = {"breaks": "uniform" if state_uniform else "state_uniform", "k": k,
                   "horizon": cfg.n_max, "tail": fixed[k]}
    return level, evidence, witness


def _witness_dict(cs: _CurveSet, loc: dict, proc: InputProcess, offset: int = 0) -> dict:
    t: _Tail = loc["tail"]
    w = cs.window_fn(loc["k"], loc["horizon"])
    return {
        "breaks": loc["breaks"],
        "n": int(t.n),
        "horizon": int(loc["horizon"]),
        "distance": float(t.sup),
        "pair_indices": [int(t.i), int(t.j)],
        "states": [cs.pool[t.i].tolist(), cs.pool[t.j].tolist()],
        "window": _window_ref(proc, loc["k"], cs.n_sampled, w, offset),
        "seed": cs.cfg.seed,
    }


def _pool_for(spec, variant, proc, cfg):
    if variant in ("SFP", "sSFP"):
        return state_pool(spec, cfg), {"pool": "sampled+hard"}
    reach = sample_reachable(spec, proc, cfg.burn_in, cfg.state_samples, seed=cfg.seed)
    return reach.states, {"pool": "reachable-approximate", "burn_in": cfg.burn_in}


def _forgetting_curves(spec, variant, proc, cfg, pool) -> _CurveSet:
    pullback = variant.startswith("s")
    sampled_cache = {}

    def window_fn(k, horizon):
        key = (k, horizon)
        if key not in sampled_cache:
            B, H = (horizon, 0) if pullback else (0, horizon)
            if k < cfg.input_samples:
                sampled_cache[key] = generate_window(proc, B, H, index=k)
            else:
                sampled_cache[key] = proc.adversarial_windows(B, H)[k - cfg.input_samples]
        return sampled_cache[key]

    if pullback:
        # the sampled pool is shared with the ESP sweep; the reachable pool is not
        pullback_fn = pullback_images if variant == "sSFP" else flows.pullback_images

        def images_fn(w, ns):
            return pullback_fn(spec, pool, w, ns)
    else:
        def images_fn(w, ns):
            traj = shared_trajectory(spec, pool, w.block(1, max(ns)))
            return np.ascontiguousarray(np.transpose(traj[:, ns], (1, 0, 2)))

    n_adv = len(proc.adversarial_windows(0, 0))
    ladder = evidence_ladder(cfg.n_max, cfg.tail())
    return _CurveSet(spec, cfg, pool, window_fn, cfg.input_samples, n_adv, images_fn, ladder)


# -- testers ---------------------------------------------------------------------

def test_forgetting(spec: SystemSpec, variant: str, proc: InputProcess, cfg: TestConfig,
                    pool: Optional[np.ndarray] = None) -> PropertyVerdict:
    """SFP / IFP (forward flow) and sSFP / sIFP (pullback flow) at the strongest supported level."""
    if variant not in FORGETTING:
        raise ValueError(f"unknown forgetting variant {variant!r}")
    if pool is None:
        pool, pool_info = _pool_for(spec, variant, proc, cfg)
    else:
        pool_info = {"pool": "given"}
    pool = as_states(spec, pool)
    cs = _forgetting_curves(spec, variant, proc, cfg, pool)
    level, evidence, loc = _classify(cs, cfg.pointwise_horizon(spec.slow_horizon))
    evidence.update(pool_info)
    evidence["flow"] = "pullback" if variant.startswith("s") else "forward"
    evidence["hard_states"] = int(len(spec.hard_states)) if variant in ("SFP", "sSFP") else 0
    if loc is not None:
        evidence["witness"] = _witness_dict(cs, loc, proc)
    return PropertyVerdict(variant, level, evidence)


test_forgetting.__test__ = False


def test_esp(spec: SystemSpec, proc: InputProcess, cfg: TestConfig) -> PropertyVerdict:
    """Pullback images of the state pool must collapse by ``n_max`` for every sampled window."""
    pool = state_pool(spec, cfg)
    tail_ns = cfg.tail()
    ladder = evidence_ladder(cfg.n_max, tail_ns)
    sampled, adv = _windows(proc, cfg, cfg.n_max, 0)
    windows = sampled + adv
    curve = {}
    finals, persistent, tails = [], [], []
    cached = None
    for k, w in enumerate(windows):
        if spec.input_independent and cached is not None:
            diams = cached
        else:
            images = pullback_images(spec, pool, w, ladder)
            diams = dict(zip(ladder, _diam_rows(spec, images)))
            cached = diams
        for n in ladder:
            curve[n] = max(curve.get(n, 0.0), diams[n].value)
        finals.append(diams[cfg.n_max])
        tails.append(min(diams[n].value for n in tail_ns))
        persistent.append(tails[-1] >= cfg.tol)
    supported = all(d.value < cfg.tol for d in finals)
    evidence = {
        "horizon": cfg.n_max,
        "tail_window": cfg.tail_window,
        "tol": cfg.tol,
        "pool_size": int(pool.shape[0]),
        "windows": len(sampled),
        "adversarial_windows": len(adv),
        "max_final_diameter": float(max(d.value for d in finals)),
        "min_tail_diameter": float(min(tails)),
        "diameter_curve": [[int(n), float(curve[n])] for n in sorted(curve)],
        "convention": "supported ESP is reported at level uniform",
    }
    if supported:
        return PropertyVerdict("ESP", "uniform", evidence)
    k = max(range(len(windows)), key=lambda q: (finals[q].value, -q))
    d = finals[k]
    evidence["persistent"] = bool(persistent[k])
    evidence["witness"] = {
        "breaks": "ESP",
        "n": cfg.n_max,
        "diameter": float(d.value),
        "persistent_tail_min": float(tails[k]),
        "pair_indices": [d.i, d.j],
        "states": [pool[d.i].tolist(), pool[d.j].tolist()],
        "window": _window_ref(proc, k, len(sampled), windows[k]),
        "seed": cfg.seed,
    }
    return PropertyVerdict("ESP", "refuted", evidence)


test_esp.__test__ = False


def fmp_ladder(n_max: int, tail: list[int]) -> list[int]:
    step = max(1, n_max // 25)
    pts = set(range(1, min(32, n_max) + 1)) | set(range(step, n_max + 1, step)) | set(tail)
    return sorted(p for p in pts if 1 <= p <= n_max)


def fmp_deltas(spec: SystemSpec, proc: InputProcess, cfg: TestConfig):
    """``delta(n) = max d(H(gamma^n(u', u)), H(u))`` over sampled ``u`` and perturbations ``u'``.

    Returns (ladder, delta per ladder point, per-point argmax locator).
    """
    depth = 2 * cfg.n_max
    x0 = state_pool(spec, cfg)[:1]
    ladder = fmp_ladder(cfg.n_max, cfg.tail())
    bases, _ = _windows(proc, cfg, depth, 0)
    perts = [generate_window(proc, depth, 0, index=500_000 + j) for j in range(cfg.fmp_perturbations)]
    perts += proc.adversarial_windows(depth, 0)
    delta = np.zeros(len(ladder))
    where = [None] * len(ladder)
    P = np.array([p.past for p in perts])
    # perturbation pasts with their oldest n entries dropped, shared by every base window
    truncated = [echo_states(spec, P[:, n:], x0) for n in ladder]
    for i, u in enumerate(bases):
        h_base = echo_states(spec, u.past[None], x0)[0]
        H = np.concatenate([
            flows.run_batch(spec, truncated[a], np.broadcast_to(u.past[depth - n:], (len(perts), n, u.input_dim)))
            for a, n in enumerate(ladder)
        ])
        d = spec.distance(H, h_base[None]).reshape(len(ladder), len(perts))
        for a in range(len(ladder)):
            j = int(np.argmax(d[a]))
            if d[a, j] > delta[a] or where[a] is None:
                if d[a, j] >= delta[a]:
                    delta[a] = d[a, j]
                    where[a] = (i, j)
    return ladder, delta, where, bases, perts


def decay_slope(ladder, delta, floor: float = FMP_NOISE_FLOOR) -> Optional[float]:
    """Least-squares slope of ``ln delta(n)`` over points above the noise floor."""
    n = np.asarray(ladder, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    keep = delta > floor
    if keep.sum() < 3:
        return None
    return float(np.polyfit(n[keep], np.log(delta[keep]), 1)[0])


def test_fmp(spec: SystemSpec, proc: InputProcess, cfg: TestConfig,
             esp: Optional[PropertyVerdict] = None) -> PropertyVerdict:
    """Product-topology continuity of the echo-state map, probed with ``gamma^n`` perturbations."""
    esp = esp or test_esp(spec, proc, cfg)
    if not esp.supported:
        return PropertyVerdict("FMP", "not_applicable", {"reason": "ESP not supported"})
    ladder, delta, where, bases, perts = fmp_deltas(spec, proc, cfg)
    tail = set(cfg.tail())
    tail_max = float(max(d for n, d in zip(ladder, delta) if n in tail))
    evidence = {
        "horizon": cfg.n_max,
        "echo_depth": 2 * cfg.n_max,
        "tol": cfg.tol,
        "windows": len(bases),
        "perturbations": len(perts),
        "delta_curve": [[int(n), float(d)] for n, d in zip(ladder, delta)],
        "tail_max": tail_max,
        "decay_slope": decay_slope(ladder, delta),
        "noise_floor": FMP_NOISE_FLOOR,
    }
    if tail_max < cfg.tol:
        return PropertyVerdict("FMP", "uniform", evidence)
    a = max((q for q, n in enumerate(ladder) if n in tail), key=lambda q: delta[q])
    i, j = where[a]
    evidence["witness"] = {
        "breaks": "FMP",
        "n": int(ladder[a]),
        "delta": float(delta[a]),
        "window": _window_ref(proc, i, len(bases), bases[i]),
        "perturbation": window_to_literal(perts[j]),
        "seed": cfg.seed,
    }
    return PropertyVerdict("FMP", "refuted", evidence)


test_fmp.__test__ = False


def test_uniform_attracting(spec: SystemSpec, proc: InputProcess, cfg: TestConfig,
                            esp: Optional[PropertyVerdict] = None,
                            sfp: Optional[PropertyVerdict] = None) -> PropertyVerdict:
    """Uniform attraction holds exactly when the ESP and the uniform SFP both hold."""
    esp = esp or test_esp(spec, proc, cfg)
    sfp = sfp or test_forgetting(spec, "SFP", proc, cfg)
    evidence = {"esp_level": esp.level, "sfp_level": sfp.level}
    if esp.supported:
        pool = state_pool(spec, cfg)
        x0 = pool[:1]
        probe = 0.0
        sampled, adv = _windows(proc, cfg, cfg.n_max, cfg.n_max)
        for w in sampled + adv:
            h = echo_states(spec, w.past[None], x0)
            traj = shared_trajectory(spec, np.concatenate([h, pool]), w.block(1, cfg.n_max))
            ns = cfg.tail()
            d = spec.distance(traj[1:, ns].reshape(-1, spec.state_dim),
                              np.repeat(traj[:1, ns], len(pool), axis=0).reshape(-1, spec.state_dim))
            probe = max(probe, float(d.max()))
            if spec.input_independent:
                break
        evidence["reduced_form_tail"] = probe
        evidence["reduced_form_ok"] = probe < cfg.tol
    ok = esp.supported and sfp.level == "uniform"
    return PropertyVerdict("UAP", "uniform" if ok else "refuted", evidence)


test_uniform_attracting.__test__ = False


def test_steady_state(spec: SystemSpec, proc: InputProcess, cfg: TestConfig,
                      ifp: Optional[PropertyVerdict] = None) -> PropertyVerdict:
    """The unique steady-state property is the IFP under another name."""
    ifp = ifp or test_forgetting(spec, "IFP", proc, cfg)
    return PropertyVerdict("STEADY", ifp.level, dict(ifp.evidence), ifp.statistical)


test_steady_state.__test__ = False


# -- alternative characterizations under the ESP ------------------------------------

LEMMA_TARGET = {"i": "IFP", "ii": "sIFP", "iii": "SFP", "iv": "sSFP"}


@dataclass
class LemmaCheck:
    verdict: PropertyVerdict
    discrepancy: float
    identity_gap: float


def crosscheck_lemma4(spec: SystemSpec, proc: InputProcess, cfg: TestConfig, item: str,
                      esp: Optional[PropertyVerdict] = None) -> PropertyVerdict:
    """Level of the property in ``LEMMA_TARGET[item]`` computed through the echo-state map.

    Items: (i) ``H(tau sigma^n u)`` over pasts sharing a future; (ii) ``H(gamma^n(u', u))``
    over pasts ``u'``; (iii) ``d(psi_n(x, u), H(tau sigma^n u))``; (iv)
    ``d(psi_n(x, T^n u), H(tau u))``. Evidence also carries the gap between each
    formulation and its flow-based companion.
    """
    return lemma4_check(spec, proc, cfg, item, esp).verdict


crosscheck_lemma4.__test__ = False


def lemma4_check(spec: SystemSpec, proc: InputProcess, cfg: TestConfig, item: str,
                 esp: Optional[PropertyVerdict] = None) -> LemmaCheck:
    if item not in LEMMA_TARGET:
        raise ValueError(f"unknown Lemma item {item!r}")
    target = LEMMA_TARGET[item]
    esp = esp or test_esp(spec, proc, cfg)
    if not esp.supported:
        v = PropertyVerdict(target, "not_applicable", {"reason": "ESP not supported", "item": item})
        return LemmaCheck(v, 0.0, 0.0)

    depth = 2 * cfg.n_max
    pool = state_pool(spec, cfg)
    x0 = pool[:1]
    m = spec.input_dim
    pasts = [generate_window(proc, depth, 0, index=700_000 + j).past for j in range(cfg.lemma_pasts)]
    pasts += [w.past for w in proc.adversarial_windows(depth, 0)]
    P = np.array(pasts)
    h_pasts = echo_states(spec, P, x0)
    gaps = {"discrepancy": 0.0, "identity": 0.0}
    n_adv = len(proc.adversarial_windows(0, 0))
    windows = {}

    def window_fn(k, horizon):
        key = (k, horizon)
        if key not in windows:
            B = depth + horizon if item == "iv" else depth
            H = horizon if item in ("i", "iii") else 0
            if k < cfg.input_samples:
                windows[key] = generate_window(proc, B, H, index=k)
            else:
                windows[key] = proc.adversarial_windows(B, H)[k - cfg.input_samples]
        return windows[key]

    def record(lemma_states, lemma_ref, direct_states, direct_ref):
        # lemma_*: (S, M, d) states and (S, M, d) or (S, 1, d) references
        S, M, d = lemma_states.shape
        lv = spec.distance(lemma_states.reshape(-1, d), np.broadcast_to(lemma_ref, (S, M, d)).reshape(-1, d))
        dv = spec.distance(direct_states.reshape(-1, d), np.broadcast_to(direct_ref, (S, M, d)).reshape(-1, d))
        gaps["discrepancy"] = max(gaps["discrepancy"], float(np.max(np.abs(lv - dv))) if lv.size else 0.0)
        return lv.reshape(S, M)

    truncated = {}

    def _grafted(n, recent):
        # H of each past with its oldest n entries dropped, then fed ``recent``;
        # the truncated echo states do not depend on the window, so keep them
        if n not in truncated:
            truncated[n] = echo_states(spec, P[:, n:], x0)
        base = truncated[n]
        return flows.run_batch(spec, base, np.broadcast_to(recent, (len(base),) + recent.shape))

    def images_fn(w, ns):
        S = len(ns)
        if item == "i":
            # pasts grafted before the shared future u_1..u_n
            lemma = np.stack([_grafted(n, w.future[:n]) for n in ns])
            traj = shared_trajectory(spec, h_pasts, w.block(1, max(ns)))
            direct = np.transpose(traj[:, ns], (1, 0, 2))
            gaps["identity"] = max(gaps["identity"], float(spec.distance(
                lemma.reshape(-1, lemma.shape[2]), direct.reshape(-1, direct.shape[2])).max()))
            record(lemma, lemma[:, :1], direct, direct[:, :1])
            return lemma
        if item == "ii":
            lemma = np.stack([_grafted(n, w.past[depth - n:]) for n in ns])
            direct = flows.pullback_images(spec, h_pasts, w, ns)
            gaps["identity"] = max(gaps["identity"], float(spec.distance(
                lemma.reshape(-1, lemma.shape[2]), direct.reshape(-1, direct.shape[2])).max()))
            record(lemma, lemma[:, :1], direct, direct[:, :1])
            return lemma
        if item == "iii":
            h0 = echo_states(spec, w.past[None], x0)
            batch = np.empty((S, depth, m))
            for a, n in enumerate(ns):
                batch[a, : depth - n] = w.past[n:]
                batch[a, depth - n:] = w.future[:n]
            h_shift = echo_states(spec, batch, x0)  # H(tau sigma^n u), (S, d)
            traj = shared_trajectory(spec, np.concatenate([h0, pool]), w.block(1, max(ns)))
            flows_ = np.transpose(traj[1:, ns], (1, 0, 2))
            companion = np.transpose(traj[:1, ns], (1, 0, 2))
            gaps["identity"] = max(gaps["identity"], float(spec.distance(h_shift, companion[:, 0]).max()))
            lv = record(flows_, h_shift[:, None], flows_, companion)
            return _with_reference(flows_, h_shift, lv)
        # item iv
        h0 = echo_states(spec, w.past[-depth:][None], x0)
        batch = np.empty((S, depth, m))
        B = w.past_horizon
        for a, n in enumerate(ns):
            batch[a] = w.past[B - n - depth: B - n]
        h_back = echo_states(spec, batch, x0)  # H of the input truncated at time -n
        flows_ = pullback_images(spec, pool, w, ns)
        companion = np.stack([flows.pullback_images(spec, h_back[a:a + 1], w, [n])[0] for a, n in enumerate(ns)])
        gaps["identity"] = max(gaps["identity"], float(spec.distance(
            np.repeat(h0, S, axis=0), companion[:, 0]).max()))
        lv = record(flows_, np.repeat(h0[None], S, axis=0), flows_, companion)
        return _with_reference(flows_, np.repeat(h0, S, axis=0), lv)

    curve_pool = P if item in ("i", "ii") else pool
    ladder = evidence_ladder(cfg.n_max, cfg.tail())
    cs = _CurveSet(spec, cfg, curve_pool, window_fn, cfg.input_samples, n_adv, images_fn, ladder)
    if item in ("iii", "iv"):
        cs = _ReferenceCurveSet(cs)
    level, evidence, loc = _classify(cs, cfg.pointwise_horizon(spec.slow_horizon))
    evidence.update({"item": item, "target": target, "echo_depth": depth,
                     "discrepancy": gaps["discrepancy"], "identity_gap": gaps["identity"]})
    if loc is not None:
        evidence["witness"] = {"breaks": loc["breaks"], "n": int(loc["tail"].n),
                               "distance": float(loc["tail"].sup),
                               "window": _window_ref(proc, loc["k"], cfg.input_samples,
                                                     window_fn(loc["k"], loc["horizon"]))}
    v = PropertyVerdict(target, level, evidence)
    return LemmaCheck(v, gaps["discrepancy"], gaps["identity"])


def _with_reference(states, refs, dist):
    """Pack per-n states with their reference so the curve set can measure sup distance to it."""
    return {"states": states, "refs": refs, "dist": dist}


class _ReferenceCurveSet(_CurveSet):
    """Curve set whose per-n value is the sup distance to a reference state, not a diameter."""

    def __init__(self, base: _CurveSet):
        self.__dict__.update(base.__dict__)
        self._cache = {}

    def tail(self, k: int, horizon: int, with_curve: bool = False) -> _Tail:
        key = (0 if self.spec.input_independent else k, horizon, with_curve)
        if key in self._cache:
            return self._cache[key]
        tail_ns = self.cfg.tail(horizon)
        ns = sorted(set(tail_ns) | (set(self.curve_ns) if with_curve else set()))
        packed = self.images_fn(self.window_fn(k, horizon), ns)
        dist = packed["dist"]
        sups = dist.max(axis=1)
        idx = dist.argmax(axis=1)
        pos = {n: a for a, n in enumerate(ns)}
        best_n = max(tail_ns, key=lambda n: (sups[pos[n]], -n))
        a = pos[best_n]
        out = _Tail(float(sups[a]), best_n, int(idx[a]), -1,
                    {n: float(sups[pos[n]]) for n in self.curve_ns if n in pos} if with_curve else {})
        self._cache[key] = out
        return out
