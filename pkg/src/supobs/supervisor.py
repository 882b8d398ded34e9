"""Observer scoring and selection.

Each observer carries a monitoring value: an exponentially discounted sum of
its squared output-error norms, updated in place as

    value+ = forgetting * value + ||error||^2        (normal step)
    value+ = ||error||^2                             (reset step)

The supervisor picks the observer with the smallest monitoring value; ties go
to the lowest index.  Indices are 1-based throughout (they appear in traces
and reports).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .model import ConfigurationError
from .observer import ObserverBank


def squared_norms(errors, norm_kind: str = "two") -> np.ndarray:
    """Row-wise squared norms of an error stack.

    1-d input is treated as one scalar error per observer.  The two-norm path
    sums squares directly (no square root), which is the exact quantity the
    monitoring recursion accumulates.
    """
    errors = np.asarray(errors, dtype=float)
    if errors.ndim == 1:
        return errors * errors
    if norm_kind == "two":
        return np.sum(errors * errors, axis=1)
    if norm_kind == "inf":
        peak = np.max(np.abs(errors), axis=1)
        return peak * peak
    raise ConfigurationError(f"unknown norm kind {norm_kind!r}")


@dataclass(frozen=True)
class MonitoringState:
    """Per-observer monitoring values plus the discount factor."""

    values: np.ndarray
    forgetting: float
    step: int = 0
    last_reset: int | None = None
    norm_kind: str = "two"

    def __post_init__(self):
        values = np.atleast_1d(np.array(self.values, dtype=float, copy=True))
        if values.ndim != 1 or values.size < 1:
            raise ConfigurationError("monitoring needs at least one observer")
        if np.any(values < 0.0):
            raise ConfigurationError("monitoring values must be non-negative")
        if not 0.0 <= self.forgetting < 1.0:
            raise ConfigurationError("forgetting factor must lie in [0, 1)")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def initial(cls, n_observers: int, forgetting: float, norm_kind: str = "two"):
        return cls(values=np.zeros(n_observers), forgetting=forgetting, norm_kind=norm_kind)

    @property
    def n_observers(self) -> int:
        return self.values.size


def update_monitoring(
    state: MonitoringState, output_errors, at_reset: bool = False
) -> MonitoringState:
    """Advance the monitoring recursion by one step.

    ``output_errors`` holds one output-error vector per observer (or one
    scalar per observer).  A reset step discards the discounted history and
    restarts from the current squared error.
    """
    sq = squared_norms(output_errors, state.norm_kind)
    if sq.size != state.n_observers:
        raise ValueError("output_errors must provide one entry per observer")
    if at_reset:
        values = sq
        last_reset = state.step
    else:
        values = state.forgetting * state.values + sq
        last_reset = state.last_reset
    return replace(state, values=values, step=state.step + 1, last_reset=last_reset)


def select_observer(state: MonitoringState) -> int:
    """1-based index of the smallest monitoring value; ties go to the lowest index."""
    return int(np.argmin(state.values)) + 1


@dataclass(frozen=True)
class Selection:
    """The supervisor's choice at one step: index plus the chosen observer's values."""

    index: int
    parameter_estimate: np.ndarray
    state_estimate: np.ndarray


def produce_estimates(bank: ObserverBank, index: int) -> Selection:
    """Copy the selected observer's parameter sample and state (1-based index)."""
    if not 1 <= index <= bank.n_observers:
        raise ValueError("index must be a valid 1-based observer index")
    return Selection(
        index=index,
        parameter_estimate=np.array(bank.parameters[index - 1], copy=True),
        state_estimate=np.array(bank.states[index - 1], copy=True),
    )


@dataclass(frozen=True)
class PEAudit:
    """Windowed output-error energies versus a user-calibrated excitation floor."""

    window: int
    window_ends: np.ndarray          # time index k of each window [k-window, k-1]
    energies: np.ndarray             # (n_windows, n_observers)
    thresholds: np.ndarray           # (n_observers,)
    flagged: tuple[tuple[int, int], ...]  # (observer 1-based, window end k)

    @property
    def ok(self) -> bool:
        return not self.flagged


def pe_audit(
    output_error_history,
    window: int,
    floor: Callable[[float], float],
    parameter_error_norms: Sequence[float],
) -> PEAudit:
    """Flag windows whose output-error energy falls below ``floor(||p_error||)``.

    ``output_error_history`` is (T, N) of squared error norms, or (T, N, n_y)
    of raw error vectors.  This is a diagnostic for excitation quality, not a
    gate: the floor is supplied by the caller, who knows the true parameter.
    """
    history = np.asarray(output_error_history, dtype=float)
    if history.ndim == 3:
        history = np.sum(history * history, axis=2)
    if history.ndim != 2:
        raise ValueError("history must be (T, N) energies or (T, N, n_y) vectors")
    n_steps, n_obs = history.shape
    if window < 1:
        raise ValueError("window must be at least one step")
    if window > n_steps:
        raise ValueError("window is longer than the recorded history")
    errors = np.asarray(parameter_error_norms, dtype=float)
    if errors.shape != (n_obs,):
        raise ValueError("parameter_error_norms must provide one norm per observer")

    csum = np.vstack([np.zeros((1, n_obs)), np.cumsum(history, axis=0)])
    energies = csum[window:] - csum[:-window]
    window_ends = np.arange(window, n_steps + 1)
    thresholds = np.array([float(floor(r)) for r in errors])
    flagged = [
        (i + 1, int(window_ends[row]))
        for row, i in zip(*np.where(energies < thresholds[None, :]))
    ]
    return PEAudit(
        window=window,
        window_ends=window_ends,
        energies=energies,
        thresholds=thresholds,
        flagged=tuple(flagged),
    )
