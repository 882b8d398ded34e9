"""Parameter sampling: static cell-center grids and contracting zoom boxes."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import ConfigurationError, ParameterBox


def equidistant_samples(interval, n: int) -> np.ndarray:
    """``n`` cell-center samples of a closed interval.

    Sample i (0-based) sits at ``lower + span/(2n) + i*span/n``, so the
    distance from any point of the interval to the nearest sample never
    exceeds ``span/(2n)``.
    """
    lower, upper = (float(interval[0]), float(interval[1]))
    if n < 1:
        raise ConfigurationError("need at least one sample per axis")
    if not lower < upper:
        raise ConfigurationError("interval must satisfy lower < upper")
    span = upper - lower
    return lower + span / (2 * n) + np.arange(n) * (span / n)


def grid_samples(box: ParameterBox, n_per_axis: int) -> np.ndarray:
    """Cartesian cell-center grid over an inf-norm box, ``n_per_axis**n_p`` rows.

    The covering radius of the grid is at most ``max(box.radius)/n_per_axis``
    in the inf norm.  Degenerate (zero-width) axes collapse onto their single
    admissible coordinate.
    """
    if n_per_axis < 1:
        raise ConfigurationError("need at least one sample per axis")
    if box.norm_kind != "inf":
        raise ConfigurationError("grid sampling requires an inf-norm box")
    axes = []
    for lo, hi in zip(box.lower, box.upper):
        if lo == hi:
            axes.append(np.full(n_per_axis, lo))
        else:
            axes.append(equidistant_samples((lo, hi), n_per_axis))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def covering_radius(box: ParameterBox, samples: np.ndarray, probes: int = 10_000) -> float:
    """Largest distance from a deterministic probe grid of the box to its nearest sample.

    Lower-bounds the true covering radius, and is within one probe-grid
    spacing of it.  Distances use the box's norm.
    """
    if probes < 1:
        raise ConfigurationError("need at least one probe point")
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[1] != box.n_p:
        raise ValueError("sample dimension does not match the box")
    d = box.n_p
    q = max(2, int(np.ceil(probes ** (1.0 / d))))
    axes = [np.linspace(lo, hi, q) for lo, hi in zip(box.lower, box.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    worst = 0.0
    chunk = 1 << 16
    for start in range(0, points.shape[0], chunk):
        block = points[start : start + chunk]
        diff = np.abs(block[:, None, :] - samples[None, :, :])
        if box.norm_kind == "inf":
            dists = diff.max(axis=2)
        else:
            dists = np.sqrt(np.sum(diff * diff, axis=2))
        worst = max(worst, float(dists.min(axis=1).max()))
    return worst


@dataclass(frozen=True)
class SamplingState:
    """Current stage of the sampling policy.

    ``radius`` is the nominal contraction radius of the stage (it follows the
    exact recursion radius_{m+1} = zoom_factor * radius_m); the actual ``box``
    may be narrower where the zoom ball was clipped against the previous box.
    """

    stage: int
    box: ParameterBox
    radius: float
    samples: np.ndarray
    n_per_axis: int
    zoom_factor: float
    noise_inflation: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.zoom_factor < 1.0:
            raise ConfigurationError("zoom_factor must lie in (0, 1)")
        if self.noise_inflation < 0.0:
            raise ConfigurationError("noise_inflation must be non-negative")
        if self.box.norm_kind != "inf":
            raise ConfigurationError("the sampling policy requires an inf-norm box")

    @classmethod
    def initial(
        cls,
        box: ParameterBox,
        n_per_axis: int,
        zoom_factor: float = 0.8,
        noise_inflation: float = 0.0,
    ) -> "SamplingState":
        samples = grid_samples(box, n_per_axis)
        radius = float(np.max(box.radius))
        return cls(
            stage=0,
            box=box,
            radius=radius,
            samples=samples,
            n_per_axis=n_per_axis,
            zoom_factor=zoom_factor,
            noise_inflation=noise_inflation,
        )

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]


def zoom(state: SamplingState, selected_sample) -> SamplingState:
    """Contract the sampled set around ``selected_sample`` and resample.

    The next box is the intersection of the current box with the ball of
    radius ``zoom_factor * radius + noise_inflation`` centered at the selected
    sample, so successive boxes are nested by construction.  Deterministic:
    identical inputs produce identical successor states.
    """
    selected = np.atleast_1d(np.asarray(selected_sample, dtype=float))
    tol = 1e-9 * max(1.0, state.radius)
    if not state.box.contains(selected, tol=tol):
        raise ValueError("selected sample lies outside the current box")
    new_radius = state.zoom_factor * state.radius
    ball = ParameterBox.from_center(selected, new_radius + state.noise_inflation)
    new_box = ball.intersect(state.box)
    samples = grid_samples(new_box, state.n_per_axis)
    return replace(
        state,
        stage=state.stage + 1,
        box=new_box,
        radius=new_radius,
        samples=samples,
    )
