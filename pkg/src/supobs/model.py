"""Benchmark plant, parameter sets and bounded signal generation.

The plant family implemented here is a two-state sampled-data system with a
scalar slope-restricted nonlinearity in the loop and full-state measurement,

    x+ = A(p) x + G(p) phi(H x) + B(p) (u + v),        y = C x + w,

where phi(s) = s + sin(s) acts componentwise and every coefficient matrix is
affine in a scalar parameter p confined to a known interval.  Process noise v
enters through the input channel, measurement noise w is additive on the
output, and both are norm bounded.  All generators in this module are
deterministic given explicit seeds; nothing reads global random state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np


class ConfigurationError(ValueError):
    """A model, scenario, gain schedule or certificate is internally inconsistent."""


def signal_norm(x: np.ndarray, kind: str = "two") -> float:
    """Norm used for signals and error traces: ``"two"`` (default) or ``"inf"``."""
    x = np.asarray(x, dtype=float)
    if kind == "two":
        return float(np.sqrt(np.sum(x * x)))
    if kind == "inf":
        return float(np.max(np.abs(x))) if x.size else 0.0
    raise ConfigurationError(f"unknown norm kind {kind!r}")


def sector_nonlinearity(v):
    """Componentwise v + sin(v).

    The derivative 1 + cos(v) lies in [0, 2] everywhere, so the map is
    non-decreasing with slope bounded by 2 in every component.
    """
    v = np.asarray(v, dtype=float)
    return v + np.sin(v)


@dataclass(frozen=True)
class NoiseBounds:
    """Norm bounds for the input, process-noise and measurement-noise channels."""

    delta_u: float = 0.0
    delta_v: float = 0.0
    delta_w: float = 0.0

    def __post_init__(self):
        for name in ("delta_u", "delta_v", "delta_w"):
            if not np.isfinite(getattr(self, name)) or getattr(self, name) < 0.0:
                raise ConfigurationError(f"{name} must be a finite non-negative number")


class ParameterBox:
    """Compact parameter set with exact interval bookkeeping.

    Boxes are stored by their per-axis bounds so that intersections and
    containment checks are exact (plain max/min on the endpoints, no rounding
    through a center/radius representation).  ``norm_kind`` selects the
    membership geometry: ``"inf"`` treats the set as an axis-aligned box,
    ``"two"`` as a Euclidean ball (uniform radius required).
    """

    __slots__ = ("lower", "upper", "norm_kind")

    def __init__(self, lower, upper, norm_kind: str = "inf"):
        lower = np.atleast_1d(np.array(lower, dtype=float, copy=True))
        upper = np.atleast_1d(np.array(upper, dtype=float, copy=True))
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ConfigurationError("box bounds must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ConfigurationError("box bounds must be finite")
        if np.any(lower > upper):
            raise ConfigurationError("box lower bounds exceed upper bounds")
        if norm_kind not in ("inf", "two"):
            raise ConfigurationError(f"unknown norm kind {norm_kind!r}")
        if norm_kind == "two":
            widths = upper - lower
            if widths.size and not np.allclose(widths, widths[0], rtol=0.0, atol=1e-12):
                raise ConfigurationError("a two-norm ball needs a uniform radius")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "norm_kind", norm_kind)

    def __setattr__(self, name, value):
        raise AttributeError("ParameterBox is immutable")

    def __repr__(self):
        return f"ParameterBox(lower={self.lower!r}, upper={self.upper!r}, norm_kind={self.norm_kind!r})"

    def __eq__(self, other):
        if not isinstance(other, ParameterBox):
            return NotImplemented
        return (
            self.norm_kind == other.norm_kind
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    @classmethod
    def from_center(cls, center, radius, norm_kind: str = "inf") -> "ParameterBox":
        center = np.atleast_1d(np.asarray(center, dtype=float))
        radius = np.broadcast_to(np.asarray(radius, dtype=float), center.shape)
        if np.any(radius < 0.0):
            raise ConfigurationError("radius must be non-negative")
        return cls(center - radius, center + radius, norm_kind)

    @classmethod
    def from_interval(cls, lower: float, upper: float) -> "ParameterBox":
        return cls([lower], [upper], "inf")

    @property
    def n_p(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def radius(self) -> np.ndarray:
        """Per-axis half-widths."""
        return 0.5 * (self.upper - self.lower)

    def contains(self, point, tol: float = 0.0) -> bool:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.shape != self.lower.shape:
            raise ValueError("point dimension does not match the box")
        if self.norm_kind == "two":
            r = float(np.max(self.radius)) if self.n_p else 0.0
            return float(np.linalg.norm(point - self.center)) <= r + tol
        return bool(np.all(point >= self.lower - tol) and np.all(point <= self.upper + tol))

    def vertices(self) -> np.ndarray:
        """All 2^n_p corner points (rows), in lexicographic (lower-first) order."""
        if self.norm_kind != "inf":
            raise ConfigurationError("vertices are only defined for inf-norm boxes")
        combos = itertools.product(*[(lo, hi) for lo, hi in zip(self.lower, self.upper)])
        return np.array(list(combos), dtype=float)

    def intersect(self, other: "ParameterBox") -> "ParameterBox":
        """Exact box intersection (inf-norm boxes only)."""
        if self.norm_kind != "inf" or other.norm_kind != "inf":
            raise ConfigurationError("intersection is only defined for inf-norm boxes")
        if self.n_p != other.n_p:
            raise ConfigurationError("boxes have different dimensions")
        lower = np.maximum(self.lower, other.lower)
        upper = np.minimum(self.upper, other.upper)
        if np.any(lower > upper):
            raise ValueError("boxes do not intersect")
        return ParameterBox(lower, upper, "inf")


@dataclass(frozen=True)
class PlantConfig:
    """Coefficients of the benchmark plant family.

    ``lipschitz`` lists the slope bound of each nonlinearity channel (this
    family has exactly one) and ``parameter_interval`` is the a-priori
    interval known to contain the true parameter.
    """

    sampling_time: float = 0.01
    lipschitz: tuple[float, ...] = (2.0,)
    parameter_interval: tuple[float, float] = (1.0, 50.0)

    n_x = 2
    n_u = 1
    n_y = 2
    n_v = 1
    n_w = 2
    n_p = 1

    def __post_init__(self):
        object.__setattr__(self, "lipschitz", tuple(float(l) for l in self.lipschitz))
        object.__setattr__(
            self, "parameter_interval", tuple(float(v) for v in self.parameter_interval)
        )
        if not (np.isfinite(self.sampling_time) and self.sampling_time > 0.0):
            raise ConfigurationError("sampling_time must be positive")
        if len(self.lipschitz) != 1:
            raise ConfigurationError("this plant family has a single nonlinearity channel")
        if any(l <= 0.0 for l in self.lipschitz):
            raise ConfigurationError("slope bounds must be positive")
        lo, hi = self.parameter_interval
        if not lo < hi:
            raise ConfigurationError("parameter_interval must satisfy lower < upper")

    @property
    def n_phi(self) -> int:
        return len(self.lipschitz)

    def a_matrix(self, p) -> np.ndarray:
        ts = self.sampling_time
        p = float(np.asarray(p).reshape(-1)[0])
        return np.array([[1.0, ts], [0.0, 1.0]]) - (p * ts) * np.array(
            [[0.5, 0.5], [1.0, 1.0]]
        )

    def g_matrix(self, p) -> np.ndarray:
        ts = self.sampling_time
        p = float(np.asarray(p).reshape(-1)[0])
        return p * np.array([[0.5 * ts], [ts]])

    def b_matrix(self, p) -> np.ndarray:
        ts = self.sampling_time
        p = float(np.asarray(p).reshape(-1)[0])
        return np.array([[ts], [ts]]) + p * np.array([[ts], [-ts]])

    @property
    def h_matrix(self) -> np.ndarray:
        return np.array([[1.0, 1.0]])

    @property
    def c_matrix(self) -> np.ndarray:
        return np.eye(2)

    @property
    def slope_matrix(self) -> np.ndarray:
        """Diagonal matrix of the per-channel slope bounds."""
        return np.diag(self.lipschitz)

    def parameter_box(self) -> ParameterBox:
        return ParameterBox.from_interval(*self.parameter_interval)


@dataclass(frozen=True)
class SystemModel:
    """Generic discrete-time plant: ``x+ = step(x, p, u, v)``, ``y = output(x, p, u, w)``."""

    n_x: int
    n_u: int
    n_y: int
    n_v: int
    n_w: int
    n_p: int
    step: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    output: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def benchmark_plant(config: PlantConfig) -> SystemModel:
    """Instantiate the benchmark plant as a generic :class:`SystemModel`."""
    c = config.c_matrix
    h = config.h_matrix

    def step(x, p, u, v):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        a = config.a_matrix(p)
        g = config.g_matrix(p)
        b = config.b_matrix(p)
        return a @ x + g @ sector_nonlinearity(h @ x) + b @ (u + v)

    def output(x, p, u, w):
        return c @ np.asarray(x, dtype=float) + np.asarray(w, dtype=float)

    return SystemModel(
        n_x=config.n_x,
        n_u=config.n_u,
        n_y=config.n_y,
        n_v=config.n_v,
        n_w=config.n_w,
        n_p=config.n_p,
        step=step,
        output=output,
    )


def bounded_noise_sequence(
    bound: float,
    length: int,
    dim: int,
    seed,
    dist: str = "uniform_ball",
) -> np.ndarray:
    """Sequence of vectors with two-norm at most ``bound``; deterministic given ``seed``.

    ``dist="uniform_ball"`` draws uniformly from the ball of radius ``bound``;
    ``dist="zero"`` returns zeros regardless of the seed.
    """
    if not np.isfinite(bound) or bound < 0.0:
        raise ConfigurationError("noise bound must be a finite non-negative number")
    if length < 0 or dim < 1:
        raise ConfigurationError("length must be >= 0 and dim >= 1")
    if dist == "zero" or bound == 0.0:
        return np.zeros((length, dim))
    if dist != "uniform_ball":
        raise ConfigurationError(f"unknown noise distribution {dist!r}")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((length, dim))
    norms = np.sqrt(np.sum(directions * directions, axis=1))
    norms[norms == 0.0] = 1.0
    radii = bound * rng.random(length) ** (1.0 / dim)
    return directions * (radii / norms)[:, None]


@dataclass(frozen=True)
class InputComponent:
    """One sinusoid of the excitation input: amplitude * sin(frequency * t + phase)."""

    amplitude: float
    frequency: float
    phase: float = 0.0


@dataclass(frozen=True)
class InputSpec:
    """Multi-sine input used to excite the parameter-dependent channels.

    The sum of component amplitudes must not exceed ``budget``, the declared
    bound on the input magnitude.  Frequencies are in rad/s; time is formed as
    ``k * sampling_time``.
    """

    components: tuple[InputComponent, ...] = (InputComponent(1.0, 1.0, 0.0),)
    budget: float = 1.0
    sampling_time: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if self.budget < 0.0 or not np.isfinite(self.budget):
            raise ConfigurationError("input budget must be a finite non-negative number")
        if self.sampling_time <= 0.0:
            raise ConfigurationError("sampling_time must be positive")
        total = sum(abs(c.amplitude) for c in self.components)
        if total > self.budget + 1e-12:
            raise ConfigurationError(
                f"input amplitudes sum to {total}, exceeding the declared budget {self.budget}"
            )


def pe_input(spec: InputSpec, k: int) -> np.ndarray:
    """Excitation input at step ``k``: the multi-sine declared by ``spec``."""
    t = k * spec.sampling_time
    u = 0.0
    for comp in spec.components:
        u += comp.amplitude * np.sin(comp.frequency * t + comp.phase)
    return np.array([u])
