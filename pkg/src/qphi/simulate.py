"""Forward synthesis of reset sweeps from model parameters.

A drive waveform is sampled on a fixed grid, flux is accumulated by the
trapezoid rule, and the emitted current is memductance(flux) times voltage.
The step that crosses the reset flux caps the charge increment so the
cumulative charge lands exactly on the reset charge; afterwards the current
is zero (plus optional measurement noise). Because the device law lives in
the charge-flux domain, the final charge does not depend on the waveform
shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, memductance
from .traces import CycleSet, SweepTrace
from .transform import cumulative_trapezoid
from .variability import ParameterStats, sample_parameters

WAVEFORM_KINDS = ("ramp", "sine", "pwl")


@dataclass(frozen=True)
class Waveform:
    """Drive waveform: a voltage ramp, a sine, or a piecewise-linear profile.

    ``rate`` (V/s) applies to ramps, ``amplitude``/``frequency`` to sines,
    ``breakpoints`` (time-sorted (t, v) pairs) to piecewise-linear profiles.
    """

    kind: str
    duration: float
    rate: float | None = None
    amplitude: float | None = None
    frequency: float | None = None
    breakpoints: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        if self.kind not in WAVEFORM_KINDS:
            raise ValueError(f"unknown waveform kind {self.kind!r}; expected one of {WAVEFORM_KINDS}")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.kind == "ramp" and self.rate is None:
            raise ValueError("ramp waveform needs a rate in V/s")
        if self.kind == "sine" and (self.amplitude is None or self.frequency is None):
            raise ValueError("sine waveform needs amplitude and frequency")
        if self.kind == "pwl":
            if len(self.breakpoints) < 2:
                raise ValueError("piecewise waveform needs at least 2 breakpoints")
            times = [t for t, _ in self.breakpoints]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError("piecewise breakpoints must be strictly time-sorted")

    def peak_voltage(self) -> float:
        if self.kind == "ramp":
            return abs(self.rate) * self.duration
        if self.kind == "sine":
            return abs(self.amplitude)
        return max(abs(v) for _, v in self.breakpoints)

    def voltage_at(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "ramp":
            return self.rate * t
        if self.kind == "sine":
            return self.amplitude * np.sin(2.0 * np.pi * self.frequency * t)
        times = np.array([p[0] for p in self.breakpoints])
        volts = np.array([p[1] for p in self.breakpoints])
        return np.interp(t, times, volts)


@dataclass(frozen=True)
class SimConfig:
    """Timestep, measurement noise and randomness for trace synthesis.

    ``dt=None`` picks the step automatically so the sweep accumulates about
    ``flux_steps`` flux increments up to the reset flux (each increment then
    stays far below the phi_rst/100 bound). ``noise_sigma_q`` scales additive
    Gaussian current noise so the induced charge noise at the sweep end has
    that standard deviation relative to q_rst. ``stop_phi_factor`` truncates
    the sweep once the flux exceeds that multiple of phi_rst, which keeps
    ensemble members with small reset fluxes from dragging long tails.
    """

    dt: float | None = None
    noise_sigma_q: float = 0.0
    seed: int = 0
    flux_steps: int = 2000
    stop_phi_factor: float | None = None

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.noise_sigma_q < 0:
            raise ValueError("noise_sigma_q must be nonnegative")
        if self.flux_steps < 200:
            raise ValueError("flux_steps must be >= 200 (per-step flux must stay below phi_rst/100)")
        if self.stop_phi_factor is not None and self.stop_phi_factor <= 1.0:
            raise ValueError("stop_phi_factor must exceed 1 to keep the plateau observable")


def generate_waveform(w: Waveform, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Sample the waveform at t = 0, dt, 2dt, ..., duration (endpoint included)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    steps = int(np.floor(w.duration / dt + 1e-9))
    t = np.arange(steps + 1) * dt
    if t[-1] < w.duration - 1e-9 * dt:
        t = np.append(t, w.duration)
    return t, w.voltage_at(t)


def _auto_dt(w: Waveform, params: ModelParams, flux_steps: int) -> float:
    peak = w.peak_voltage()
    if peak <= 0:
        return w.duration / max(flux_steps, 4)
    return min(params.phi_rst / (flux_steps * peak), w.duration / 8.0)


def simulate_reset_trace(w: Waveform, params: ModelParams,
                         config: SimConfig = SimConfig(),
                         rng: np.random.Generator | None = None,
                         cycle_id: int = 0) -> SweepTrace:
    """Synthesize one reset sweep under the given drive waveform.

    The waveform must be unipolar (nonnegative voltage) and the timestep
    small enough that each pre-reset flux increment stays under phi_rst/100.
    Noiseless output is deterministic; noisy output is deterministic per seed.
    """
    dt = config.dt if config.dt is not None else _auto_dt(w, params, config.flux_steps)
    t, v = generate_waveform(w, dt)
    if np.any(v < 0):
        raise ValueError("reset simulation requires a nonnegative (unipolar) drive voltage")

    phi = cumulative_trapezoid(v, t)

    if config.stop_phi_factor is not None:
        beyond = np.nonzero(phi >= config.stop_phi_factor * params.phi_rst)[0]
        if beyond.size:
            stop = max(int(beyond[0]) + 1, 4)
            t, v, phi = t[:stop], v[:stop], phi[:stop]

    crossing = np.nonzero(phi >= params.phi_rst)[0]
    pre_end = int(crossing[0]) if crossing.size else len(phi) - 1
    increments = np.diff(phi[: pre_end + 1])
    if increments.size and float(np.max(increments)) >= params.phi_rst / 100.0:
        raise ValueError(
            f"dt={dt:g} too coarse: max pre-reset flux increment "
            f"{float(np.max(increments)):g} Vs is not below phi_rst/100"
        )

    current = memductance(phi, params) * v
    if crossing.size:
        k = int(crossing[0])
        if k > 0:
            q_before = float(cumulative_trapezoid(current[: k + 1], t[: k + 1])[k - 1])
            step = t[k] - t[k - 1]
            # cap the crossing step so cumulative charge lands exactly on q_rst
            current[k] = max(0.0, 2.0 * (params.q_rst - q_before) / step - current[k - 1])
        current[k + 1:] = 0.0

    if config.noise_sigma_q > 0:
        if rng is None:
            rng = np.random.default_rng(config.seed)
        span = float(t[-1] - t[0])
        dt_med = float(np.median(np.diff(t)))
        sigma_i = config.noise_sigma_q * params.q_rst / np.sqrt(max(span * dt_med, 1e-300))
        current = current + rng.normal(0.0, sigma_i, size=current.size)

    return SweepTrace(t=t, v=v, i=current, cycle_id=cycle_id)


def simulate_ensemble(stats: ParameterStats, count: int, w: Waveform,
                      config: SimConfig = SimConfig()) -> CycleSet:
    """Sample ``count`` parameter triples and simulate one sweep per cycle.

    Cycle ids are sequential and every cycle derives its noise from its own
    seed-sequence child, so the set is reproducible independent of ordering.
    """
    ensemble = sample_parameters(stats, count, seed=config.seed)
    traces = []
    for record in ensemble.records:
        rng = None
        if config.noise_sigma_q > 0:
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=config.seed, spawn_key=(record.cycle_id, 1))
            )
        trace = simulate_reset_trace(
            w, record.params, config=config, rng=rng, cycle_id=record.cycle_id
        )
        traces.append(trace)
    return CycleSet(traces=traces, source=f"montecarlo seed={config.seed} count={count}")


def scaled_config(config: SimConfig, **overrides) -> SimConfig:
    """Return a copy of ``config`` with fields replaced."""
    return replace(config, **overrides)
