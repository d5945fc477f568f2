"""Driven state-space systems and input processes with known behaviour.

Every catalog system is backed by a kernel family (see ``echoprop.kernels``),
so flows run through the compiled loop when it is available. States on the
circle use the centered chart ``[-1/2, 1/2)`` with the quotient metric; a
point ``x`` of ``[0, 1)`` is ``x`` if ``x < 1/2`` and ``x - 1`` otherwise.
Near the glued point that keeps full floating-point precision, which the
``1 - 2**-k`` hard states of ``circle_square`` need.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .sequences import HorizonError, InputWindow, window_from_literal

CIRCLE_GRID_DEPTH = 1000

_FAMILY_CODES = {
    "constant": kernels.CONSTANT,
    "affine": kernels.AFFINE,
    "tanh_esn": kernels.TANH_ESN,
    "circle_square": kernels.CIRCLE_SQUARE,
    "rotation": kernels.ROTATION,
    "doubling": kernels.DOUBLING,
}
_METRIC_CODES = {"euclidean": kernels.EUCLIDEAN, "circle": kernels.CIRCLE}


class UnknownSystemError(KeyError):
    pass


def seeded_rng(seed: int, *stream) -> np.random.Generator:
    """Independent generator for ``(seed, stream...)``; streams are ints or short strings."""
    keys = [int(seed) & 0xFFFFFFFF]
    for s in stream:
        if isinstance(s, str):
            keys.append(int.from_bytes(s.encode()[:8].ljust(8, b"\0"), "little") & 0xFFFFFFFF)
        else:
            keys.append(int(s) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(keys))


def to_unit_interval(theta) -> np.ndarray:
    """Circle chart value to its representative in ``[0, 1)``."""
    theta = np.asarray(theta, dtype=np.float64)
    return np.where(theta < 0.0, theta + 1.0, theta)


def from_unit_interval(x) -> np.ndarray:
    """Representative in ``[0, 1)`` to the centered chart. Precision near 1 is lost."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0.5, x - 1.0, x)


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """A driven state map ``f(x, u)`` plus what the testers need to probe it.

    ``state_map`` is batched: it maps (B, d) states and (B, m) inputs to
    (B, d). Compactness flags are declared, never inferred.
    """

    name: str
    state_dim: int
    input_dim: int
    state_map: Callable[[np.ndarray, np.ndarray], np.ndarray]
    metric: str
    sample_states: Callable[[np.random.Generator, int], np.ndarray]
    contains: Callable[[np.ndarray], np.ndarray]
    hard_states: np.ndarray = field(default_factory=lambda: np.empty((0, 1)))
    state_compact: bool = True
    input_compact: bool = True
    input_metrizable: bool = True
    input_independent: bool = False
    input_box: Optional[tuple] = (-1.0, 1.0)
    family: Optional[str] = None
    params: tuple = ()
    W: Optional[np.ndarray] = None
    Win: Optional[np.ndarray] = None
    slow_horizon: int = 0
    echo_oracle: Optional[Callable[[InputWindow], np.ndarray]] = None
    divergence_oracle: Optional[Callable[[int, float], float]] = None
    divergence_is_bound: bool = False
    description: str = ""

    @property
    def metric_code(self) -> int:
        return _METRIC_CODES[self.metric]

    @property
    def is_circle(self) -> bool:
        return self.metric == "circle"

    def kernel_args(self):
        """(family code, params, W, Win) for the kernels, or None for plain callables."""
        if self.family is None:
            return None
        W = self.W if self.W is not None else np.zeros((1, 1))
        Win = self.Win if self.Win is not None else np.zeros((1, 1))
        return _FAMILY_CODES[self.family], np.asarray(self.params, dtype=np.float64), W, Win

    def distance(self, X, Y) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
        X, Y = np.broadcast_arrays(X, Y)
        return kernels.distances(self.metric_code, np.ascontiguousarray(X), np.ascontiguousarray(Y))

    def flags(self) -> dict:
        return {
            "state_compact": self.state_compact,
            "input_compact": self.input_compact,
            "input_metrizable": self.input_metrizable,
        }

    def __repr__(self):
        return f"SystemSpec({self.name!r})"


# -- catalog -----------------------------------------------------------------

def _box_sampler(lo, hi, dim):
    def sample(rng, n):
        return rng.uniform(lo, hi, size=(n, dim))
    return sample


def _box_contains(lo, hi):
    def contains(X):
        X = np.atleast_2d(X)
        return np.all((X >= lo) & (X <= hi), axis=1)
    return contains


def _circle_sampler(rng, n):
    return rng.uniform(-0.5, 0.5, size=(n, 1))


def _circle_contains(X):
    X = np.atleast_2d(X)
    return np.all((X >= -0.5) & (X < 0.5), axis=1)


def _family_map(family, params, W=None, Win=None):
    code = _FAMILY_CODES[family]
    p = np.asarray(params, dtype=np.float64)
    W_ = W if W is not None else np.zeros((1, 1))
    Win_ = Win if Win is not None else np.zeros((1, 1))

    def f(X, U):
        return kernels.step(code, p, W_, Win_, np.asarray(X, dtype=np.float64),
                            np.asarray(U, dtype=np.float64))
    return f


def constant(c: float = 0.5) -> SystemSpec:
    c = float(c)
    lo, hi = min(-1.0, c), max(1.0, c)
    return SystemSpec(
        name=f"constant({c:g})",
        state_dim=1,
        input_dim=1,
        state_map=_family_map("constant", [c]),
        metric="euclidean",
        sample_states=_box_sampler(lo, hi, 1),
        contains=_box_contains(lo, hi),
        hard_states=np.array([[lo], [hi]]),
        input_independent=True,
        family="constant",
        params=(c,),
        echo_oracle=lambda w: np.array([c]),
        divergence_oracle=lambda n, d0: 0.0 if n >= 1 else d0,
        description="f(x, u) = c on a box containing c",
    )


def affine(a: float = 0.5, b: float = 1.0, radius: Optional[float] = None) -> SystemSpec:
    """``f(x, u) = clip(a x + b u)`` on ``[-R, R]``; ``R`` defaults to the invariant radius."""
    a, b = float(a), float(b)
    if radius is None:
        radius = abs(b) / (1.0 - abs(a)) if abs(a) < 1.0 else 2.0
    R = float(radius)

    def echo(w: InputWindow) -> np.ndarray:
        u = w.past[::-1, 0]
        return np.array([b * float(np.sum(a ** np.arange(len(u)) * u))])

    return SystemSpec(
        name=f"affine({a:g},{b:g})",
        state_dim=1,
        input_dim=1,
        state_map=_family_map("affine", [a, b, R]),
        metric="euclidean",
        sample_states=_box_sampler(-R, R, 1),
        contains=_box_contains(-R, R),
        hard_states=np.array([[-R], [R]]),
        family="affine",
        params=(a, b, R),
        echo_oracle=echo if abs(a) < 1.0 else None,
        divergence_oracle=(lambda n, d0: abs(a) ** n * d0) if abs(a) * R + abs(b) <= R * (1 + 1e-12) else None,
        description=f"f(x, u) = {a:g} x + {b:g} u clamped to [-{R:g}, {R:g}]",
    )


def tanh_esn(norm: float = 0.9, dim: int = 16, seed: int = 0, input_scale: float = 1.0) -> SystemSpec:
    """``f(x, u) = tanh(W x + Win u)`` with a seeded ``W`` rescaled to spectral norm ``norm``."""
    dim = int(dim)
    rng = seeded_rng(int(seed), "tanh_esn")
    W = rng.standard_normal((dim, dim))
    W *= float(norm) / np.linalg.norm(W, 2)
    Win = rng.uniform(-input_scale, input_scale, size=(dim, 1))
    W = np.ascontiguousarray(W)
    Win = np.ascontiguousarray(Win)
    corners = np.array([np.ones(dim), -np.ones(dim), np.r_[np.ones(dim // 2), -np.ones(dim - dim // 2)]])
    return SystemSpec(
        name=f"tanh_esn({norm:g})",
        state_dim=dim,
        input_dim=1,
        state_map=_family_map("tanh_esn", [], W, Win),
        metric="euclidean",
        sample_states=_box_sampler(-1.0, 1.0, dim),
        contains=_box_contains(-1.0, 1.0),
        hard_states=corners,
        family="tanh_esn",
        params=(float(norm), dim, int(seed)),
        W=W,
        Win=Win,
        divergence_oracle=lambda n, d0: float(norm) ** n * d0,
        divergence_is_bound=True,
        description=f"{dim}-unit tanh reservoir, ||W||_2 = {norm:g}",
    )


def circle_square() -> SystemSpec:
    """Input-independent ``g(x) = x**2`` on ``[0, 1]`` with the endpoints glued."""
    k = np.arange(1, CIRCLE_GRID_DEPTH + 1)
    # chart value of 1 - 2**-k
    grid = -np.ldexp(1.0, -k).reshape(-1, 1)
    return SystemSpec(
        name="circle_square",
        state_dim=1,
        input_dim=1,
        state_map=_family_map("circle_square", []),
        metric="circle",
        sample_states=_circle_sampler,
        contains=_circle_contains,
        hard_states=grid,
        input_independent=True,
        family="circle_square",
        slow_horizon=CIRCLE_GRID_DEPTH + 100,
        description="x -> x^2 on the circle [0, 1]/{0 ~ 1}",
    )


def circle_square_inverse(theta) -> np.ndarray:
    """Inverse of the circle-square map in chart coordinates."""
    theta = np.asarray(theta, dtype=np.float64)
    out = np.empty_like(theta)
    neg = theta < 0.0
    # 1 + theta = x**2 with x in [1/2, 1): chart value sqrt(1 + theta) - 1
    out[neg] = theta[neg] / (np.sqrt(1.0 + theta[neg]) + 1.0)
    pos = ~neg
    root = np.sqrt(theta[pos])
    out[pos] = np.where(root < 0.5, root, root - 1.0)
    return out


def rotation(alpha: float = 0.3) -> SystemSpec:
    alpha = float(alpha)
    return SystemSpec(
        name=f"rotation({alpha:g})",
        state_dim=1,
        input_dim=1,
        state_map=_family_map("rotation", [alpha]),
        metric="circle",
        sample_states=_circle_sampler,
        contains=_circle_contains,
        input_independent=True,
        family="rotation",
        params=(alpha,),
        divergence_oracle=lambda n, d0: d0,
        description=f"x -> x + {alpha:g} mod 1",
    )


def doubling() -> SystemSpec:
    return SystemSpec(
        name="doubling",
        state_dim=1,
        input_dim=1,
        state_map=_family_map("doubling", []),
        metric="circle",
        sample_states=_circle_sampler,
        contains=_circle_contains,
        input_independent=True,
        family="doubling",
        description="x -> 2x mod 1",
    )


_REGISTRY = {
    "constant": constant,
    "affine": affine,
    "tanh_esn": tanh_esn,
    "circle_square": circle_square,
    "rotation": rotation,
    "doubling": doubling,
}

DEFAULT_CATALOG = (
    "constant",
    "affine(0.5,1)",
    "tanh_esn(0.9)",
    "rotation(0.3)",
    "doubling",
    "circle_square",
)

_CALL = re.compile(r"^\s*([A-Za-z_][\w\-]*)\s*(?:\((.*)\))?\s*$")


def parse_call(text: str) -> tuple[str, list[float]]:
    """``'affine(0.5, 1)'`` -> ``('affine', [0.5, 1.0])``."""
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"cannot parse {text!r}")
    name, args = m.group(1), m.group(2)
    values = [float(a) for a in args.split(",")] if args and args.strip() else []
    return name, values


def catalog_names() -> list[str]:
    return sorted(_REGISTRY)


def catalog_get(name: str) -> SystemSpec:
    """Build a registered system from ``'family'`` or ``'family(args...)'``."""
    try:
        family, args = parse_call(name)
    except ValueError as exc:
        raise UnknownSystemError(name) from exc
    if family not in _REGISTRY:
        raise UnknownSystemError(f"unknown system {name!r}; known: {', '.join(catalog_names())}")
    if family == "tanh_esn" and len(args) >= 2:
        args[1] = int(args[1])
    try:
        return _REGISTRY[family](*args)
    except TypeError as exc:
        raise UnknownSystemError(f"bad arguments for {family}: {args}") from exc


def system_from_config(cfg: dict) -> SystemSpec:
    """Build a system from a config dict (see README for the schema)."""
    family = cfg["family"]
    if family not in _REGISTRY:
        raise UnknownSystemError(f"unknown family {family!r}")
    params = cfg.get("params", {})
    base = _REGISTRY[family](**params) if isinstance(params, dict) else _REGISTRY[family](*params)
    overrides = {}
    for key in ("state_compact", "input_compact", "input_metrizable"):
        if key in cfg:
            overrides[key] = bool(cfg[key])
    if "name" in cfg:
        overrides["name"] = str(cfg["name"])
    if "metric" in cfg:
        if cfg["metric"] not in _METRIC_CODES:
            raise ValueError(f"unknown metric {cfg['metric']!r}")
        overrides["metric"] = cfg["metric"]
    if "hard_states" in cfg:
        hs = np.asarray(cfg["hard_states"], dtype=np.float64).reshape(-1, base.state_dim)
        overrides["hard_states"] = hs
    for key, want in (("state_dim", base.state_dim), ("input_dim", base.input_dim)):
        if key in cfg and int(cfg[key]) != want:
            raise ValueError(f"{key}={cfg[key]} does not match family {family} ({want})")
    return _replace(base, **overrides)


def _replace(spec: SystemSpec, **kw) -> SystemSpec:
    from dataclasses import replace
    return replace(spec, **kw)


def resolve_system(ref: str) -> SystemSpec:
    """A catalog name or a path to a JSON system config."""
    path = Path(ref)
    if path.suffix == ".json" or path.exists():
        try:
            cfg = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UnknownSystemError(f"cannot read system config {path}: {exc}") from exc
        return system_from_config(cfg)
    return catalog_get(ref)


def check_system(spec: SystemSpec, seed: int = 0, samples: int = 256) -> list[str]:
    """Sampled checks that the map keeps the state set and the metric is a metric."""
    rng = seeded_rng(seed, "check")
    problems = []
    X = spec.sample_states(rng, samples)
    if len(spec.hard_states):
        X = np.concatenate([X, spec.hard_states])
    lo, hi = spec.input_box or (-1.0, 1.0)
    U = rng.uniform(lo, hi, size=(len(X), spec.input_dim))
    if not np.all(spec.contains(X)):
        problems.append("sampler produced states outside the declared set")
    Y = spec.state_map(X, U)
    if not np.all(np.isfinite(Y)):
        problems.append("state map produced non-finite values")
    elif not np.all(spec.contains(Y)):
        problems.append("state map leaves the declared state set")
    A, B, C = X[rng.permutation(len(X))], X[rng.permutation(len(X))], X
    dab, dbc, dac = spec.distance(A, B), spec.distance(B, C), spec.distance(A, C)
    if np.any(dab < 0) or np.any(np.abs(dab - spec.distance(B, A)) > 1e-12):
        problems.append("metric is negative or asymmetric")
    if np.any(dac > dab + dbc + 1e-12):
        problems.append("metric violates the triangle inequality")
    if np.any(spec.distance(X, X) != 0.0):
        problems.append("metric is nonzero on the diagonal")
    return problems


# -- input processes ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InputProcess:
    """Source of input windows.

    ``kind`` is one of ``iid`` (uniform on ``[low, high]^m``), ``constant``,
    ``explicit`` (a fixed window literal) or ``observed`` (``omega(phi^t(p))``
    for an invertible map ``phi`` on a manifold).
    """

    kind: str
    input_dim: int = 1
    low: float = -1.0
    high: float = 1.0
    value: Sequence[float] = (0.0,)
    window: Optional[InputWindow] = None
    phi: Optional[Callable[[float], float]] = None
    phi_inv: Optional[Callable[[float], float]] = None
    omega: Optional[Callable[[float], np.ndarray]] = None
    start: Optional[float] = None
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("iid", "constant", "explicit", "observed"):
            raise ValueError(f"unknown process kind {self.kind!r}")
        if self.kind == "explicit" and self.window is None:
            raise ValueError("explicit process needs a window")
        if self.kind == "observed" and (self.phi is None or self.phi_inv is None):
            raise ValueError("observed process needs phi and phi_inv")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    @property
    def shift_invariant(self) -> bool:
        return self.kind in ("iid", "constant", "observed")

    @property
    def box(self) -> Optional[tuple]:
        return (self.low, self.high) if self.kind == "iid" else None

    def with_seed(self, seed: int) -> "InputProcess":
        from dataclasses import replace
        return replace(self, seed=int(seed))

    def adversarial_windows(self, B: int, H: int) -> list[InputWindow]:
        """Constant windows at the corners of the input box (iid processes only)."""
        if self.kind != "iid":
            return []
        out = []
        for v in (self.low, self.high):
            full = np.full((B + H, self.input_dim), float(v))
            out.append(InputWindow(full[:B], full[B:]))
        return out


def generate_window(p: InputProcess, B: int, H: int, index: int = 0) -> InputWindow:
    """Window with past horizon ``B`` and future horizon ``H``; deterministic in ``(p, B, H, index)``."""
    if B < 0 or H < 0:
        raise ValueError("horizons must be nonnegative")
    m = p.input_dim
    if p.kind == "iid":
        # past drawn backward from time 0, future forward from time 1: a longer
        # window extends a shorter one with the same index
        past = seeded_rng(p.seed, "past", index).uniform(p.low, p.high, size=(B, m))[::-1]
        future = seeded_rng(p.seed, "future", index).uniform(p.low, p.high, size=(H, m))
        full = np.concatenate([past, future])
    elif p.kind == "constant":
        value = np.broadcast_to(np.asarray(p.value, dtype=np.float64), (m,))
        full = np.tile(value, (B + H, 1))
    elif p.kind == "explicit":
        w = p.window
        if B > w.past_horizon or H > w.future_horizon:
            raise HorizonError(
                f"explicit window has B={w.past_horizon}, H={w.future_horizon}; asked for B={B}, H={H}"
            )
        full = w.block(-B + 1, H)
    else:
        full = _observed_block(p, B, H, index)
    return InputWindow(full[:B], full[B:])


def _observed_block(p: InputProcess, B: int, H: int, index: int) -> np.ndarray:
    if index == 0 and p.start is not None:
        point = float(p.start)
    else:
        point = float(seeded_rng(p.seed, "orbit", index).uniform(0.0, 1.0))
    omega = p.omega or (lambda q: np.array([q]))
    points = {0: point}
    q = point
    for t in range(0, -B, -1):
        points[t] = q
        q = p.phi_inv(q)
    q = point
    for t in range(1, H + 1):
        q = p.phi(q)
        points[t] = q
    rows = [np.atleast_1d(omega(points[t])) for t in range(-B + 1, H + 1)]
    return np.array(rows, dtype=np.float64).reshape(-1, p.input_dim)


def rotation_orbit(rho: float, start: float = 0.0, seed: int = 0) -> InputProcess:
    """Inputs observed along an orbit of ``theta -> theta + rho mod 1`` with identity observation."""
    rho = float(rho)
    return InputProcess(
        kind="observed",
        phi=lambda q: (q + rho) % 1.0,
        phi_inv=lambda q: (q - rho) % 1.0,
        omega=lambda q: np.array([q]),
        start=start,
        low=0.0,
        high=1.0,
        seed=seed,
        name=f"rotation_orbit({rho:g})",
    )


def resolve_process(ref: str, spec: Optional[SystemSpec] = None, seed: int = 0) -> InputProcess:
    """``iid``, ``iid(lo,hi)``, ``constant``, ``constant(c)`` or ``rotation_orbit(rho)``."""
    name, args = parse_call(ref)
    m = spec.input_dim if spec is not None else 1
    lo, hi = (spec.input_box if spec is not None and spec.input_box else (-1.0, 1.0))
    if name == "iid":
        if len(args) == 2:
            lo, hi = args
        elif args:
            raise ValueError("iid takes (low, high)")
        return InputProcess(kind="iid", input_dim=m, low=lo, high=hi, seed=seed,
                            name=f"iid({lo:g},{hi:g})")
    if name == "constant":
        c = args[0] if args else 0.0
        return InputProcess(kind="constant", input_dim=m, value=(c,), low=c, high=c, seed=seed,
                            name=f"constant({c:g})")
    if name == "rotation_orbit":
        if not args:
            raise ValueError("rotation_orbit needs rho")
        return rotation_orbit(args[0], *(args[1:2]), seed=seed)
    raise ValueError(f"unknown process {ref!r}")


def explicit_process(w: InputWindow, seed: int = 0, name: str = "explicit") -> InputProcess:
    return InputProcess(kind="explicit", input_dim=w.input_dim, window=w, seed=seed, name=name)


def load_explicit_process(path, seed: int = 0) -> InputProcess:
    lit = json.loads(Path(path).read_text())
    return explicit_process(window_from_literal(lit), seed=seed, name=f"explicit({Path(path).name})")
