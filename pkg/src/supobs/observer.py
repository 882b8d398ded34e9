"""Bank of parameter-scheduled observers for the benchmark plant.

Each observer runs the plant model at its own parameter sample with output
injection both outside and inside the loop nonlinearity:

    xh+ = A(ph) xh + G(ph) phi(H xh + K(ph) e) + B(ph) u + L(ph) e,
    yh  = C xh,          e = C xh - y.

Gains are affine in the scheduled parameter, so resampling the parameter set
only re-evaluates two matrix pencils and never re-solves a design problem.
Observer indices exposed by this package are 1-based, matching the selection
indices logged in traces and reports.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import ConfigurationError, PlantConfig, sector_nonlinearity


@dataclass(frozen=True)
class GainSchedule:
    """Affine observer gains: ``L(p) = l0 + p*l1`` and ``K(p) = k0 + p*k1``."""

    l0: np.ndarray
    l1: np.ndarray
    k0: np.ndarray
    k1: np.ndarray

    def __post_init__(self):
        for name in ("l0", "l1", "k0", "k1"):
            mat = np.array(getattr(self, name), dtype=float, copy=True)
            if mat.ndim != 2:
                raise ConfigurationError(f"{name} must be a matrix")
            if not np.all(np.isfinite(mat)):
                raise ConfigurationError(f"{name} has non-finite entries")
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)
        if self.l0.shape != self.l1.shape or self.k0.shape != self.k1.shape:
            raise ConfigurationError("gain pencil shapes are inconsistent")
        if self.l0.shape[1] != self.k0.shape[1]:
            raise ConfigurationError("L and K must share the measurement dimension")

    def l_gain(self, p) -> np.ndarray:
        return self.l0 + float(np.asarray(p).reshape(-1)[0]) * self.l1

    def k_gain(self, p) -> np.ndarray:
        return self.k0 + float(np.asarray(p).reshape(-1)[0]) * self.k1


def observer_step(x_hat, p_hat, u, y, schedule: GainSchedule, plant: PlantConfig):
    """Advance one observer a single step.

    Returns ``(next_state, output_estimate)``; the innovation is
    ``C x_hat - y`` (observer output minus measurement).
    """
    x_hat = np.asarray(x_hat, dtype=float)
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    p = float(np.asarray(p_hat).reshape(-1)[0])
    y_hat = plant.c_matrix @ x_hat
    innovation = y_hat - y
    z = plant.h_matrix @ x_hat + schedule.k_gain(p) @ innovation
    x_next = (
        plant.a_matrix(p) @ x_hat
        + plant.g_matrix(p) @ sector_nonlinearity(z)
        + plant.b_matrix(p) @ u
        + schedule.l_gain(p) @ innovation
    )
    return x_next, y_hat


@dataclass(frozen=True)
class ObserverBank:
    """N observers sharing one gain schedule, one row of state per observer."""

    states: np.ndarray      # (N, n_x)
    parameters: np.ndarray  # (N, n_p)
    schedule: GainSchedule

    def __post_init__(self):
        states = np.atleast_2d(np.array(self.states, dtype=float, copy=True))
        parameters = np.atleast_2d(np.array(self.parameters, dtype=float, copy=True))
        if states.shape[0] != parameters.shape[0]:
            raise ConfigurationError("states and parameters must have one row per observer")
        states.setflags(write=False)
        parameters.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "parameters", parameters)

    @property
    def n_observers(self) -> int:
        return self.states.shape[0]

    def output_errors(self, y, plant: PlantConfig) -> np.ndarray:
        """Per-observer output errors ``C x_i - y`` without advancing the bank."""
        y = np.asarray(y, dtype=float)
        errors = np.empty((self.n_observers, plant.n_y))
        for i in range(self.n_observers):
            errors[i] = plant.c_matrix @ self.states[i] - y
        return errors


def bank_step(bank: ObserverBank, u, y, plant: PlantConfig):
    """Advance every observer one step.

    Returns ``(advanced_bank, output_errors)`` where row i of the errors is
    the i-th observer's output error at the *current* step.  Observers are
    independent: the result is identical to stepping them one at a time.
    """
    n = bank.n_observers
    next_states = np.empty_like(bank.states)
    errors = np.empty((n, plant.n_y))
    for i in range(n):
        x_next, y_hat = observer_step(
            bank.states[i], bank.parameters[i], u, y, bank.schedule, plant
        )
        next_states[i] = x_next
        errors[i] = y_hat - y
    return replace(bank, states=next_states), errors


def reinitialize_bank(
    bank: ObserverBank, new_parameters, carry_state_from: int
) -> ObserverBank:
    """Re-seed the bank after resampling.

    Every observer adopts the parameters in ``new_parameters`` and starts from
    the state of observer ``carry_state_from`` (1-based), which keeps the
    post-resampling transient small.
    """
    params = np.atleast_2d(np.asarray(new_parameters, dtype=float))
    if params.shape[0] != bank.n_observers:
        raise ValueError("new_parameters must provide one row per observer")
    if not 1 <= carry_state_from <= bank.n_observers:
        raise ValueError("carry_state_from must be a valid 1-based observer index")
    carried = np.tile(bank.states[carry_state_from - 1], (bank.n_observers, 1))
    return replace(bank, states=carried, parameters=params)
