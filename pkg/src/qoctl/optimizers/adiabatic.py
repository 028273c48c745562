"""Frequency-swept inversion pulses.

A drive of fixed amplitude is swept through resonance slowly enough that the
state stays locked to an instantaneous eigenstate of

    H_eff(t) = Delta_i(t) sz/2 + w sx/2,   Delta_i(t) = 2 pi [delta_i - nu(t)]

carrying |0> to |1> for every offset delta_i the sweep crosses.  Because only
the ratio of sweep rate to gap matters, the inversion tolerates sizable drive
miscalibration, which is what makes these pulses attractive despite their
length.

The generated sequence samples nu at segment midpoints and stores one
detuning column Delta_i per configured offset plus a final constant drive
column, all in rad/s.  sweep_condition extracts the 2-channel view for one
offset; sweep_system builds the matching zero-drift 1-qubit system.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..model import ControlChannel, ControlSequence, ControlSystem
from ..problems import ControlProblem
from ..systems import SIGMA_X, SIGMA_Z
from .common import TERMINATION_GOAL, TERMINATION_MAX_ITER, RunState

PROFILES = ("linear", "tanh")
OFF_RESONANCE_FACTOR = 10.0


@dataclass(frozen=True)
class AdiabaticConfig:
    """Sweep description; frequencies in Hz, converted to rad/s on emission."""

    detunings_hz: tuple[float, ...] = (0.0,)
    amplitude_hz: float = 1.0
    nu_start_hz: float = -20.0
    nu_end_hz: float = 20.0
    total_time: float = 50.0
    n_segments: int = 2000
    profile: str = "linear"
    tanh_steepness: float = 2.0
    fidelity_goal: float = 0.99

    def __post_init__(self):
        object.__setattr__(self, "detunings_hz", tuple(float(d) for d in self.detunings_hz))
        if not self.detunings_hz:
            raise ValidationError("at least one detuning is required")
        if self.amplitude_hz <= 0:
            raise ValidationError("amplitude_hz must be positive")
        if self.total_time <= 0 or self.n_segments < 1:
            raise ValidationError("total_time and n_segments must be positive")
        if self.profile not in PROFILES:
            raise ValidationError(f"profile must be one of {PROFILES}")
        if self.tanh_steepness <= 0:
            raise ValidationError("tanh_steepness must be positive")
        if not 0.0 < self.fidelity_goal <= 1.0:
            raise ValidationError("fidelity_goal must lie in (0, 1]")
        lo = min(self.nu_start_hz, self.nu_end_hz)
        hi = max(self.nu_start_hz, self.nu_end_hz)
        for d in self.detunings_hz:
            if not lo < d < hi:
                raise ValidationError(
                    f"sweep range ({lo}, {hi}) Hz must straddle every detuning; {d} Hz is outside"
                )


def sweep_profile(
    profile: str,
    nu_start_hz: float,
    nu_end_hz: float,
    t,
    total_time: float,
    tanh_steepness: float = 2.0,
):
    """Instantaneous frequency nu(t) in Hz; exact at both endpoints."""
    if profile not in PROFILES:
        raise ValidationError(f"profile must be one of {PROFILES}")
    if total_time <= 0:
        raise ValidationError("total_time must be positive")
    frac = np.asarray(t, dtype=float) / total_time
    if profile == "linear":
        shape = frac
    else:
        shape = 0.5 * (1.0 + np.tanh(tanh_steepness * (2.0 * frac - 1.0)) / np.tanh(tanh_steepness))
    return nu_start_hz + (nu_end_hz - nu_start_hz) * shape


def adiabatic_sweep(config: AdiabaticConfig) -> ControlSequence:
    """Midpoint-sampled sweep: columns [Delta_1 .. Delta_k, w] in rad/s."""
    cfg = config
    nu0 = sweep_profile(
        cfg.profile, cfg.nu_start_hz, cfg.nu_end_hz, 0.0, cfg.total_time, cfg.tanh_steepness
    )
    for d in cfg.detunings_hz:
        if abs(d - nu0) < OFF_RESONANCE_FACTOR * cfg.amplitude_hz:
            warnings.warn(
                f"sweep starts only {abs(d - nu0):g} Hz from detuning {d:g} Hz; "
                f"expected at least {OFF_RESONANCE_FACTOR * cfg.amplitude_hz:g} Hz "
                "for the state to begin in an instantaneous eigenstate",
                stacklevel=2,
            )
    n = cfg.n_segments
    tau = cfg.total_time / n
    midpoints = (np.arange(n) + 0.5) * tau
    nus = sweep_profile(
        cfg.profile, cfg.nu_start_hz, cfg.nu_end_hz, midpoints, cfg.total_time, cfg.tanh_steepness
    )
    amps = np.empty((n, len(cfg.detunings_hz) + 1))
    for i, d in enumerate(cfg.detunings_hz):
        amps[:, i] = 2.0 * np.pi * (d - nus)
    amps[:, -1] = 2.0 * np.pi * cfg.amplitude_hz
    return ControlSequence(np.full(n, tau), amps)


def sweep_condition(
    sequence: ControlSequence, detuning_index: int, amplitude_scale: float = 1.0
) -> ControlSequence:
    """2-channel view [Delta_i, scale * w] of a multi-offset sweep."""
    k = sequence.n_channels - 1
    if not 0 <= detuning_index < k:
        raise IndexError(f"detuning_index {detuning_index} out of range for {k} offsets")
    cols = np.column_stack(
        [sequence.amplitudes[:, detuning_index], amplitude_scale * sequence.amplitudes[:, -1]]
    )
    return ControlSequence(sequence.durations, cols)


def sweep_system(config: AdiabaticConfig) -> ControlSystem:
    """Zero-drift 1-qubit system with sz/2 and sx/2 channels sized to the sweep."""
    ends = (config.nu_start_hz, config.nu_end_hz)
    delta_bound = 2.0 * np.pi * max(abs(d - nu) for d in config.detunings_hz for nu in ends)
    return ControlSystem(
        np.zeros((2, 2), dtype=np.complex128),
        (
            ControlChannel(SIGMA_Z / 2.0, delta_bound, "z"),
            ControlChannel(SIGMA_X / 2.0, 2.0 * np.pi * config.amplitude_hz, "x"),
        ),
    )


def adiabatic_run(problem: ControlProblem, config: AdiabaticConfig | None = None):
    """Emit the sweep and evaluate it once against the problem (no iteration)."""
    cfg = config if config is not None else AdiabaticConfig()
    sweep = adiabatic_sweep(cfg)
    if problem.system.n_channels != sweep.n_channels:
        raise ValidationError(
            f"system has {problem.system.n_channels} channels but the sweep emits "
            f"{sweep.n_channels} (one per detuning plus the drive)"
        )
    state = RunState(problem)
    state.set_initial(sweep)
    status = TERMINATION_GOAL if state.fbar >= cfg.fidelity_goal else TERMINATION_MAX_ITER
    return state.finalize(status)
