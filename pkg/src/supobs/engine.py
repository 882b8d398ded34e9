"""Closed-loop simulation of plant, observer bank and supervisor.

One run advances the true plant under a multi-sine input and bounded noise,
steps every observer on the measured data, updates the monitoring values and
logs the supervisor's selection at each step.  The static policy keeps one
fixed parameter grid; the dynamic policy additionally contracts and resamples
the parameter box every ``zoom_period`` steps (resetting the monitoring
values), which tightens the achievable parameter error for the same number of
observers.

Runs are bit-for-bit reproducible from the scenario configuration: noise is
derived from the scenario seed, and no step reads wall-clock time or global
random state.

Trace CSV columns (one row per step, floats carry 17 significant digits):

    k, t, x[0..], y[0..], u[0..], pi, p_hat[0..], x_hat[0..],
    err_x_norm, err_p_norm, stage, delta_m, zoom, mu[0..N-1]
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lmi import Certificate
from .model import (
    ConfigurationError,
    InputComponent,
    InputSpec,
    NoiseBounds,
    PlantConfig,
    benchmark_plant,
    bounded_noise_sequence,
    pe_input,
    signal_norm,
)
from .observer import ObserverBank, bank_step, reinitialize_bank
from .sampling import SamplingState, zoom
from .supervisor import (
    MonitoringState,
    produce_estimates,
    select_observer,
    squared_norms,
    update_monitoring,
)

POLICIES = ("static", "dynamic")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a run needs; all times are in steps, not seconds."""

    policy: str
    n_observers: int
    forgetting: float
    true_parameter: float
    horizon: int = 6000
    plant: PlantConfig = field(default_factory=PlantConfig)
    input: InputSpec = field(default_factory=InputSpec)
    delta_v: float = 0.0
    delta_w: float = 0.0
    noise_dist: str = "uniform_ball"
    seed: int = 0
    zoom_period: int = 0
    zoom_factor: float = 0.8
    noise_inflation: float = 0.0
    initial_state: tuple[float, ...] = (0.0, 0.0)
    observer_initial_state: tuple[float, ...] = (0.0, 0.0)
    state_guard: float = 1e6
    margin: float | None = None
    trailing_fraction: float = 0.1
    signal_norm_kind: str = "two"

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ConfigurationError(f"policy must be one of {POLICIES}")
        if self.n_observers < 1:
            raise ConfigurationError("n_observers must be at least 1")
        if not 0.0 <= self.forgetting < 1.0:
            raise ConfigurationError("forgetting factor must lie in [0, 1)")
        if self.horizon < 0:
            raise ConfigurationError("horizon must be non-negative")
        if self.policy == "dynamic":
            if self.zoom_period < 1:
                raise ConfigurationError("dynamic policy requires zoom_period >= 1")
            if not 0.0 < self.zoom_factor < 1.0:
                raise ConfigurationError("zoom_factor must lie in (0, 1)")
        if self.noise_inflation < 0.0:
            raise ConfigurationError("noise_inflation must be non-negative")
        if self.delta_v < 0.0 or self.delta_w < 0.0:
            raise ConfigurationError("noise bounds must be non-negative")
        if self.state_guard <= 0.0:
            raise ConfigurationError("state_guard must be positive")
        if self.seed < 0:
            raise ConfigurationError("seed must be a non-negative integer")
        if not 0.0 < self.trailing_fraction <= 1.0:
            raise ConfigurationError("trailing_fraction must lie in (0, 1]")
        box = self.plant.parameter_box()
        if not box.contains(np.array([self.true_parameter])):
            raise ConfigurationError("true_parameter lies outside the parameter interval")
        object.__setattr__(self, "initial_state", tuple(float(v) for v in self.initial_state))
        object.__setattr__(
            self,
            "observer_initial_state",
            tuple(float(v) for v in self.observer_initial_state),
        )
        if len(self.initial_state) != self.plant.n_x:
            raise ConfigurationError("initial_state has the wrong dimension")
        if len(self.observer_initial_state) != self.plant.n_x:
            raise ConfigurationError("observer_initial_state has the wrong dimension")
        n_axis = round(self.n_observers ** (1.0 / self.plant.n_p))
        if n_axis**self.plant.n_p != self.n_observers:
            raise ConfigurationError(
                "n_observers must be a per-axis count raised to the parameter dimension"
            )

    @property
    def n_per_axis(self) -> int:
        return round(self.n_observers ** (1.0 / self.plant.n_p))

    @property
    def noise_bounds(self) -> NoiseBounds:
        return NoiseBounds(
            delta_u=self.input.budget, delta_v=self.delta_v, delta_w=self.delta_w
        )

    @property
    def resolved_margin(self) -> float:
        """Metrics margin: explicit value, or half the initial grid spacing."""
        if self.margin is not None:
            return float(self.margin)
        lo, hi = self.plant.parameter_interval
        return (hi - lo) / (2 * self.n_observers)


_SCENARIO_REQUIRED = ("policy", "n_observers", "forgetting", "true_parameter")
_SCENARIO_OPTIONAL = (
    "horizon",
    "seed",
    "model",
    "input",
    "noise",
    "zoom",
    "initial_state",
    "observer_initial_state",
    "state_guard",
    "margin",
    "trailing_fraction",
    "signal_norm",
)


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Build a scenario from its JSON dict form; unknown fields are rejected."""
    if not isinstance(data, dict):
        raise ConfigurationError("scenario must be a JSON object")
    for key in _SCENARIO_REQUIRED:
        if key not in data:
            raise ConfigurationError(f"scenario is missing required field {key!r}")
    for key in data:
        if key not in _SCENARIO_REQUIRED + _SCENARIO_OPTIONAL:
            raise ConfigurationError(f"scenario has unknown field {key!r}")

    model = data.get("model", {})
    for key in model:
        if key not in ("sampling_time", "lipschitz", "parameter_interval"):
            raise ConfigurationError(f"scenario model section has unknown field {key!r}")
    plant = PlantConfig(
        sampling_time=model.get("sampling_time", 0.01),
        lipschitz=tuple(model.get("lipschitz", (2.0,))),
        parameter_interval=tuple(model.get("parameter_interval", (1.0, 50.0))),
    )

    input_data = data.get("input", {})
    for key in input_data:
        if key not in ("components", "budget"):
            raise ConfigurationError(f"scenario input section has unknown field {key!r}")
    components = tuple(
        InputComponent(
            amplitude=float(c["amplitude"]),
            frequency=float(c["frequency"]),
            phase=float(c.get("phase", 0.0)),
        )
        for c in input_data.get("components", ({"amplitude": 1.0, "frequency": 1.0},))
    )
    spec = InputSpec(
        components=components,
        budget=float(input_data.get("budget", 1.0)),
        sampling_time=plant.sampling_time,
    )

    noise = data.get("noise", {})
    for key in noise:
        if key not in ("delta_v", "delta_w", "dist"):
            raise ConfigurationError(f"scenario noise section has unknown field {key!r}")

    zoom_section = data.get("zoom", {})
    for key in zoom_section:
        if key not in ("period", "factor", "noise_inflation"):
            raise ConfigurationError(f"scenario zoom section has unknown field {key!r}")

    return ScenarioConfig(
        policy=data["policy"],
        n_observers=int(data["n_observers"]),
        forgetting=float(data["forgetting"]),
        horizon=int(data.get("horizon", 6000)),
        true_parameter=float(data["true_parameter"]),
        plant=plant,
        input=spec,
        delta_v=float(noise.get("delta_v", 0.0)),
        delta_w=float(noise.get("delta_w", 0.0)),
        noise_dist=noise.get("dist", "uniform_ball"),
        seed=int(data.get("seed", 0)),
        zoom_period=int(zoom_section.get("period", 0)),
        zoom_factor=float(zoom_section.get("factor", 0.8)),
        noise_inflation=float(zoom_section.get("noise_inflation", 0.0)),
        initial_state=tuple(data.get("initial_state", (0.0, 0.0))),
        observer_initial_state=tuple(data.get("observer_initial_state", (0.0, 0.0))),
        state_guard=float(data.get("state_guard", 1e6)),
        margin=None if data.get("margin") is None else float(data["margin"]),
        trailing_fraction=float(data.get("trailing_fraction", 0.1)),
        signal_norm_kind=data.get("signal_norm", "two"),
    )


def load_scenario(path) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"scenario file is not valid JSON: {exc}") from exc
    return scenario_from_dict(data)


@dataclass(frozen=True)
class StageRecord:
    """One sampling stage: when it started and what set it sampled."""

    stage: int
    start_step: int
    radius: float
    lower: np.ndarray
    upper: np.ndarray
    samples: np.ndarray


@dataclass
class SimulationTrace:
    """Time-indexed record of one run; arrays hold one row per logged step."""

    policy: str
    sampling_time: float
    true_parameter: float
    n_observers: int
    k: np.ndarray
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    pi: np.ndarray
    p_hat: np.ndarray
    x_hat: np.ndarray
    err_x_norm: np.ndarray
    err_p_norm: np.ndarray
    stage: np.ndarray
    delta_m: np.ndarray
    zoom: np.ndarray
    mu: np.ndarray
    output_error_sq: np.ndarray
    stage_records: tuple[StageRecord, ...]
    forgetting: float
    aborted: bool = False
    abort_step: int | None = None
    abort_message: str | None = None

    @property
    def n_rows(self) -> int:
        return self.k.size

    @property
    def t(self) -> np.ndarray:
        return self.k * self.sampling_time

    def zoom_steps(self) -> np.ndarray:
        return self.k[self.zoom == 1]

    def column_names(self) -> list[str]:
        names = ["k", "t"]
        names += [f"x[{i}]" for i in range(self.x.shape[1])]
        names += [f"y[{i}]" for i in range(self.y.shape[1])]
        names += [f"u[{i}]" for i in range(self.u.shape[1])]
        names.append("pi")
        names += [f"p_hat[{i}]" for i in range(self.p_hat.shape[1])]
        names += [f"x_hat[{i}]" for i in range(self.x_hat.shape[1])]
        names += ["err_x_norm", "err_p_norm", "stage", "delta_m", "zoom"]
        names += [f"mu[{i}]" for i in range(self.mu.shape[1])]
        return names

    def to_csv(self, target) -> None:
        """Write the trace; floats use 17 significant digits for exact round-trips."""
        if hasattr(target, "write"):
            self._write_csv(target)
        else:
            with open(target, "w", newline="") as handle:
                self._write_csv(handle)

    def _write_csv(self, handle) -> None:
        def fmt(value: float) -> str:
            return format(float(value), ".17g")

        handle.write(",".join(self.column_names()) + "\n")
        t = self.t
        for row in range(self.n_rows):
            cells = [str(int(self.k[row])), fmt(t[row])]
            cells += [fmt(v) for v in self.x[row]]
            cells += [fmt(v) for v in self.y[row]]
            cells += [fmt(v) for v in self.u[row]]
            cells.append(str(int(self.pi[row])))
            cells += [fmt(v) for v in self.p_hat[row]]
            cells += [fmt(v) for v in self.x_hat[row]]
            cells.append(fmt(self.err_x_norm[row]))
            cells.append(fmt(self.err_p_norm[row]))
            cells.append(str(int(self.stage[row])))
            cells.append(fmt(self.delta_m[row]))
            cells.append(str(int(self.zoom[row])))
            cells += [fmt(v) for v in self.mu[row]]
            handle.write(",".join(cells) + "\n")
        if self.aborted:
            message = (self.abort_message or "aborted").replace(",", ";")
            cells = ["ABORTED", message] + [""] * (len(self.column_names()) - 2)
            handle.write(",".join(cells) + "\n")

    def to_csv_text(self) -> str:
        buffer = io.StringIO()
        self._write_csv(buffer)
        return buffer.getvalue()


def run_static(config: ScenarioConfig, certificate: Certificate) -> SimulationTrace:
    """Run the fixed-grid policy; the parameter samples never change."""
    if config.policy != "static":
        raise ConfigurationError("run_static requires a scenario with policy='static'")
    return _run(config, certificate)


def run_dynamic(config: ScenarioConfig, certificate: Certificate) -> SimulationTrace:
    """Run the contracting policy: zoom, resample and reset every ``zoom_period`` steps."""
    if config.policy != "dynamic":
        raise ConfigurationError("run_dynamic requires a scenario with policy='dynamic'")
    return _run(config, certificate)


def run_scenario(config: ScenarioConfig, certificate: Certificate) -> SimulationTrace:
    return _run(config, certificate)


def _run(config: ScenarioConfig, certificate: Certificate) -> SimulationTrace:
    plant = config.plant
    system = benchmark_plant(plant)
    horizon = config.horizon
    n_obs = config.n_observers
    p_true = np.array([config.true_parameter])

    u_seq = np.array([pe_input(config.input, k) for k in range(horizon + 1)])
    seed_v, seed_w = np.random.SeedSequence(config.seed).spawn(2)
    v_seq = bounded_noise_sequence(
        config.delta_v, horizon + 1, plant.n_v, seed_v, config.noise_dist
    )
    w_seq = bounded_noise_sequence(
        config.delta_w, horizon + 1, plant.n_w, seed_w, config.noise_dist
    )

    sampling = SamplingState.initial(
        plant.parameter_box(),
        n_per_axis=config.n_per_axis,
        zoom_factor=config.zoom_factor if config.policy == "dynamic" else 0.8,
        noise_inflation=config.noise_inflation,
    )
    bank = ObserverBank(
        states=np.tile(np.asarray(config.observer_initial_state, dtype=float), (n_obs, 1)),
        parameters=sampling.samples,
        schedule=certificate.schedule,
    )
    monitoring = MonitoringState.initial(n_obs, config.forgetting, config.signal_norm_kind)
    stage_records = [_stage_record(sampling, start_step=0)]

    rows = horizon + 1
    k_log = np.arange(rows)
    x_log = np.empty((rows, plant.n_x))
    y_log = np.empty((rows, plant.n_y))
    pi_log = np.empty(rows, dtype=int)
    p_hat_log = np.empty((rows, plant.n_p))
    x_hat_log = np.empty((rows, plant.n_x))
    err_x_log = np.empty(rows)
    err_p_log = np.empty(rows)
    stage_log = np.empty(rows, dtype=int)
    delta_log = np.empty(rows)
    zoom_log = np.zeros(rows, dtype=int)
    mu_log = np.empty((rows, n_obs))
    err_sq_log = np.empty((rows, n_obs))

    x = np.asarray(config.initial_state, dtype=float)
    aborted = False
    abort_step = None
    abort_message = None
    logged = 0

    for k in range(horizon + 1):
        norm_x = signal_norm(x, config.signal_norm_kind)
        if not np.isfinite(norm_x) or norm_x > config.state_guard:
            aborted = True
            abort_step = k
            abort_message = (
                f"state guard breached at k={k}: ||x|| = {norm_x:.6g} "
                f"exceeds {config.state_guard:.6g}"
            )
            break

        y = system.output(x, p_true, u_seq[k], w_seq[k])
        pi = select_observer(monitoring)
        selection = produce_estimates(bank, pi)

        x_log[k] = x
        y_log[k] = y
        pi_log[k] = pi
        p_hat_log[k] = selection.parameter_estimate
        x_hat_log[k] = selection.state_estimate
        err_x_log[k] = signal_norm(selection.state_estimate - x, config.signal_norm_kind)
        err_p_log[k] = signal_norm(selection.parameter_estimate - p_true, config.signal_norm_kind)
        mu_log[k] = monitoring.values

        at_reset = False
        if config.policy == "dynamic" and k > 0 and k % config.zoom_period == 0:
            sampling = zoom(sampling, selection.parameter_estimate)
            bank = reinitialize_bank(bank, sampling.samples, carry_state_from=pi)
            stage_records.append(_stage_record(sampling, start_step=k))
            zoom_log[k] = 1
            at_reset = True

        stage_log[k] = sampling.stage
        delta_log[k] = sampling.radius
        logged = k + 1

        if k < horizon:
            bank, errors = bank_step(bank, u_seq[k], y, plant)
            err_sq_log[k] = squared_norms(errors, config.signal_norm_kind)
            monitoring = update_monitoring(monitoring, errors, at_reset)
            x = system.step(x, p_true, u_seq[k], v_seq[k])
        else:
            err_sq_log[k] = squared_norms(bank.output_errors(y, plant), config.signal_norm_kind)

    return SimulationTrace(
        policy=config.policy,
        sampling_time=plant.sampling_time,
        true_parameter=config.true_parameter,
        n_observers=n_obs,
        k=k_log[:logged],
        x=x_log[:logged],
        y=y_log[:logged],
        u=u_seq[:logged],
        pi=pi_log[:logged],
        p_hat=p_hat_log[:logged],
        x_hat=x_hat_log[:logged],
        err_x_norm=err_x_log[:logged],
        err_p_norm=err_p_log[:logged],
        stage=stage_log[:logged],
        delta_m=delta_log[:logged],
        zoom=zoom_log[:logged],
        mu=mu_log[:logged],
        output_error_sq=err_sq_log[:logged],
        stage_records=tuple(stage_records),
        forgetting=config.forgetting,
        aborted=aborted,
        abort_step=abort_step,
        abort_message=abort_message,
    )


def _stage_record(sampling: SamplingState, start_step: int) -> StageRecord:
    return StageRecord(
        stage=sampling.stage,
        start_step=start_step,
        radius=sampling.radius,
        lower=sampling.box.lower.copy(),
        upper=sampling.box.upper.copy(),
        samples=np.array(sampling.samples, copy=True),
    )


def convergence_metrics(
    trace: SimulationTrace, margin: float, trailing_fraction: float = 0.1
) -> dict:
    """Summary metrics of one trace.

    ``entry_time`` is the first step after which the parameter error stays
    within ``margin`` for the rest of the horizon (``None`` if that never
    happens).  The trailing maxima over the final ``trailing_fraction`` of the
    horizon stand in for the asymptotic error bounds.
    """
    if trace.n_rows == 0:
        return {
            "margin": float(margin),
            "entry_time": None,
            "trailing_fraction": trailing_fraction,
            "trailing_max_err_p": None,
            "trailing_max_err_x": None,
            "stages": [],
            "aborted": trace.aborted,
            "abort_step": trace.abort_step,
            "horizon": None,
        }
    exceed = trace.err_p_norm > margin
    if exceed[-1]:
        entry_time = None
    elif not exceed.any():
        entry_time = 0
    else:
        entry_time = int(np.nonzero(exceed)[0][-1] + 1)

    window = max(1, int(round(trailing_fraction * trace.n_rows)))
    trailing_p = float(np.max(trace.err_p_norm[-window:]))
    trailing_x = float(np.max(trace.err_x_norm[-window:]))

    stages = []
    for value in np.unique(trace.stage):
        mask = trace.stage == value
        rows = np.nonzero(mask)[0]
        stages.append(
            {
                "stage": int(value),
                "first_k": int(trace.k[rows[0]]),
                "last_k": int(trace.k[rows[-1]]),
                "radius": float(trace.delta_m[rows[-1]]),
                "final_err_p": float(trace.err_p_norm[rows[-1]]),
                "max_err_p": float(np.max(trace.err_p_norm[rows])),
            }
        )

    return {
        "margin": float(margin),
        "entry_time": entry_time,
        "trailing_fraction": trailing_fraction,
        "trailing_window": window,
        "trailing_max_err_p": trailing_p,
        "trailing_max_err_x": trailing_x,
        "stages": stages,
        "aborted": trace.aborted,
        "abort_step": trace.abort_step,
        "horizon": int(trace.k[-1]),
    }
