"""Closed-loop bang-bang transfer to a drift eigenstate."""

import numpy as np
import pytest

from conftest import KET0, KET1, KET_PLUS, KET_MINUS, NO_PENALTY

from qoctl import (
    ControlProblem,
    GateTarget,
    QuantumChannel,
    QuantumState,
    StateTarget,
    standard_gate,
)
from qoctl.errors import ApplicabilityError, CapabilityError, ValidationError
from qoctl.optimizers import (
    LyapunovConfig,
    lyapunov_control_law,
    lyapunov_run,
    lyapunov_v,
)


def transfer(system, initial, final=KET0, kind="uhlmann"):
    return ControlProblem(
        system=system,
        target=StateTarget(initial, final, kind=kind),
        penalty=NO_PENALTY,
    )


class TestCandidateFunction:
    def test_zero_at_the_target(self):
        assert lyapunov_v(np.outer(KET0, KET0.conj()), KET0) == pytest.approx(0.0)

    def test_one_at_an_orthogonal_state(self):
        assert lyapunov_v(np.outer(KET1, KET1.conj()), KET0) == pytest.approx(1.0)

    def test_half_at_the_maximally_mixed_state(self):
        assert lyapunov_v(0.5 * np.eye(2), KET0) == pytest.approx(0.5)

    def test_accepts_quantum_states(self):
        assert lyapunov_v(QuantumState(vector=KET_PLUS), KET0) == pytest.approx(0.5)


class TestControlLaw:
    def test_plus_state_drives_y_channel_negative(self, qubit):
        # v_y = -i<rho|[P, sigma_y/2]> = +1/2 at rho = |+><+|, so the law
        # saturates the y channel at -bound; the x component vanishes
        problem = transfer(qubit, KET_PLUS)
        amps = lyapunov_control_law(problem, np.outer(KET_PLUS, KET_PLUS.conj()))
        assert amps[0] == pytest.approx(0.0)
        assert amps[1] == pytest.approx(-qubit.max_amplitudes[1])

    def test_sign_flips_with_the_state(self, qubit):
        problem = transfer(qubit, KET_PLUS)
        amps = lyapunov_control_law(problem, np.outer(KET_MINUS, KET_MINUS.conj()))
        assert amps[1] == pytest.approx(+qubit.max_amplitudes[1])

    def test_target_is_a_fixed_point(self, qubit):
        problem = transfer(qubit, KET_PLUS)
        amps = lyapunov_control_law(problem, np.outer(KET0, KET0.conj()))
        assert np.array_equal(amps, np.zeros(2))

    def test_gate_targets_are_rejected(self, qubit):
        problem = ControlProblem(
            system=qubit,
            target=GateTarget(standard_gate("hadamard")),
            penalty=NO_PENALTY,
        )
        with pytest.raises(CapabilityError):
            lyapunov_control_law(problem, 0.5 * np.eye(2))


class TestLyapunovRun:
    def test_plus_to_zero_transfer(self, detuned_qubit):
        problem = transfer(detuned_qubit, KET_PLUS)
        result = lyapunov_run(problem, LyapunovConfig(seed=0))
        assert result.termination == "goal-reached"
        assert result.final_fidelity >= 0.99
        assert result.metadata["kick_steps"] == []

    def test_candidate_function_descends_along_the_trace(self, detuned_qubit):
        problem = transfer(detuned_qubit, KET_PLUS)
        cfg = LyapunovConfig(seed=0)
        result = lyapunov_run(problem, cfg)
        v_trace = 1.0 - result.fidelity_trace
        # piecewise-constant integration leaves O(dt) slack per step
        slack = 2e-2 * cfg.dt * np.max(detuned_qubit.max_amplitudes)
        assert np.all(np.diff(v_trace) <= slack)

    def test_orthogonal_start_needs_a_kick(self, detuned_qubit):
        # |1> is an unstable fixed point of the law: every v_m vanishes there,
        # so progress requires the seeded kick
        problem = transfer(detuned_qubit, KET1)
        result = lyapunov_run(problem, LyapunovConfig(seed=3))
        assert len(result.metadata["kick_steps"]) >= 1
        assert result.termination == "goal-reached"
        assert result.final_fidelity >= 0.99

    def test_starting_at_the_target_emits_no_drive(self, detuned_qubit):
        problem = transfer(detuned_qubit, KET0)
        result = lyapunov_run(problem, LyapunovConfig(seed=0))
        assert result.termination == "goal-reached"
        assert result.iterations_used == 1
        assert result.sequence.n_segments == 0

    def test_emitted_sequence_is_the_realized_trajectory(self, detuned_qubit):
        problem = transfer(detuned_qubit, KET_PLUS)
        cfg = LyapunovConfig(seed=0)
        result = lyapunov_run(problem, cfg)
        assert result.sequence.n_segments == result.iterations_used - 1
        assert np.allclose(result.sequence.durations, cfg.dt)
        bounds = detuned_qubit.max_amplitudes
        on = np.abs(result.sequence.amplitudes) > 0
        assert np.all(
            np.isin(
                np.round(np.abs(result.sequence.amplitudes[on]) / bounds[1], 12), 1.0
            )
        )

    def test_same_seed_reproduces_the_kicks(self, detuned_qubit):
        problem = transfer(detuned_qubit, KET1)
        cfg = LyapunovConfig(seed=5)
        a = lyapunov_run(problem, cfg)
        b = lyapunov_run(problem, cfg)
        assert a.metadata["kick_steps"] == b.metadata["kick_steps"]
        assert np.array_equal(a.sequence.amplitudes, b.sequence.amplitudes)

    def test_non_eigenstate_target_is_rejected(self, detuned_qubit):
        problem = transfer(detuned_qubit, KET0, final=KET_PLUS)
        with pytest.raises(ApplicabilityError):
            lyapunov_run(problem, LyapunovConfig())

    def test_mixed_target_is_rejected(self, detuned_qubit):
        problem = ControlProblem(
            system=detuned_qubit,
            target=StateTarget(KET_PLUS, 0.5 * np.eye(2), kind="uhlmann"),
            penalty=NO_PENALTY,
        )
        with pytest.raises(CapabilityError):
            lyapunov_run(problem, LyapunovConfig())

    def test_interleaved_channels_are_rejected(self, detuned_qubit):
        kraus = QuantumChannel(
            kraus_operators=(
                np.sqrt(0.5) * np.eye(2),
                np.sqrt(0.5) * np.diag([1.0, -1.0]),
            ),
            insert_after_segment=0,
        )
        problem = ControlProblem(
            system=detuned_qubit,
            target=StateTarget(KET_PLUS, KET0, kind="trace"),
            penalty=NO_PENALTY,
            channels=(kraus,),
        )
        with pytest.raises(CapabilityError):
            lyapunov_run(problem, LyapunovConfig())


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(dt=0.0),
        dict(max_time=0.0),
        dict(dead_band_fraction=-1.0),
        dict(kick_fraction=-0.1),
        dict(max_kicks=-1),
        dict(fidelity_goal=0.0),
    ],
)
def test_rejects_bad_config(kwargs):
    with pytest.raises(ValidationError):
        LyapunovConfig(**kwargs)
