"""GRAPE: gradient correctness against finite differences, end-to-end runs.

The gradient here is first-order in the segment duration (it drops the
commutator corrections of the exact derivative), so finite-difference
agreement is checked on short sequences where that truncation error is
far below the tolerance.  Long-time behaviour is covered by the
end-to-end optimization tests instead.
"""

import numpy as np
import pytest

from conftest import KET0, KET1, NO_PENALTY

from qoctl import (
    ControlProblem,
    ControlSequence,
    GateTarget,
    QuantumChannel,
    SpinSystemSpec,
    StateTarget,
    build_spin_system,
    standard_gate,
)
from qoctl.errors import CapabilityError, ValidationError
from qoctl.problems import (
    EnsembleDistribution,
    ensemble_performance,
    penalty_gradient,
    penalty_value,
)
from qoctl.optimizers import GrapeConfig, grape_gradient, grape_run
from qoctl.optimizers.common import random_initial_sequence


def short_time_instance(seed):
    """Random problem/sequence pair in the regime where the first-order
    gradient is accurate: durations of a few ms against O(1 Hz) generators."""
    rng = np.random.default_rng(seed)
    det = rng.uniform(-0.3, 0.3)
    system = build_spin_system(SpinSystemSpec(n_qubits=1, detunings_hz=(det,)))
    n_seg = int(rng.integers(4, 13))
    total_time = rng.uniform(0.001, 0.005)
    amps = rng.uniform(-1.0, 1.0, size=(n_seg, 2)) * 0.15 * system.max_amplitudes[None, :]
    sequence = ControlSequence.equal_durations(total_time, amps)
    if seed % 3 == 0:
        target = StateTarget(KET0, KET1, kind="trace")
    else:
        target = GateTarget(standard_gate("hadamard"))
    if seed % 5 == 0:
        ensemble = EnsembleDistribution(
            scales=(0.9, 1.0, 1.1), probabilities=(0.25, 0.5, 0.25)
        )
    else:
        ensemble = EnsembleDistribution.single()
    problem = ControlProblem(
        system=system, target=target, ensemble=ensemble, penalty=NO_PENALTY
    )
    return problem, sequence


def fd_gradient(objective, sequence, eps=1e-6):
    amps = sequence.amplitudes
    g = np.zeros_like(amps)
    for n in range(amps.shape[0]):
        for m in range(amps.shape[1]):
            up = amps.copy()
            up[n, m] += eps
            down = amps.copy()
            down[n, m] -= eps
            g[n, m] = (
                objective(sequence.with_amplitudes(up))
                - objective(sequence.with_amplitudes(down))
            ) / (2.0 * eps)
    return g


def fidelity_fd(problem, sequence, eps=1e-6):
    return fd_gradient(
        lambda s: ensemble_performance(problem, s).mean, sequence, eps
    )


class TestGradientOracle:
    @pytest.mark.parametrize("seed", range(12))
    def test_matches_central_differences(self, seed):
        problem, sequence = short_time_instance(seed)
        factor = 2.0 if problem.is_gate else 1.0
        analytic = factor * sequence.durations[:, None] * grape_gradient(problem, sequence)
        fd = fidelity_fd(problem, sequence)
        rel = np.linalg.norm(analytic - fd) / np.linalg.norm(fd)
        assert rel <= 1e-3

    def test_truncation_error_shrinks_with_duration(self):
        # the neglected term is O(tau * ||H||): halving the total time should
        # roughly halve the finite-difference disagreement
        rng = np.random.default_rng(7)
        system = build_spin_system(SpinSystemSpec(n_qubits=1, detunings_hz=(0.2,)))
        amps = rng.uniform(-1.0, 1.0, size=(6, 2)) * 0.5 * system.max_amplitudes[None, :]
        problem = ControlProblem(
            system=system,
            target=GateTarget(standard_gate("hadamard")),
            penalty=NO_PENALTY,
        )

        def rel_error(total_time):
            seq = ControlSequence.equal_durations(total_time, amps)
            analytic = 2.0 * seq.durations[:, None] * grape_gradient(problem, seq)
            fd = fidelity_fd(problem, seq)
            return np.linalg.norm(analytic - fd) / np.linalg.norm(fd)

        coarse, fine = rel_error(0.2), rel_error(0.1)
        assert fine < coarse
        assert coarse / fine > 1.5

    def test_ensemble_gradient_is_weighted_scaled_sum(self):
        problem, sequence = short_time_instance(3)
        dist = EnsembleDistribution(scales=(0.8, 1.0, 1.2), probabilities=(0.3, 0.4, 0.3))
        ens = ControlProblem(
            system=problem.system, target=problem.target, ensemble=dist, penalty=NO_PENALTY
        )
        total = grape_gradient(ens, sequence)
        parts = sum(
            p * s * grape_gradient(problem, sequence.scaled(s))
            for s, p in zip(dist.scales, dist.probabilities)
        )
        assert np.allclose(total, parts, atol=1e-14)

    def test_gradient_vanishes_at_exact_gate_optimum(self, hadamard_problem):
        # at U_{1:N} = e^{i phi} U_F the trace in the gradient formula becomes
        # proportional to Tr(A_m), so every entry is identically zero
        amps = np.array([[0.0, np.pi / 2.0], [np.pi, 0.0]])
        seq = ControlSequence.equal_durations(2.0, amps)
        perf = ensemble_performance(hadamard_problem, seq)
        assert perf.mean == pytest.approx(1.0, abs=1e-12)
        g = grape_gradient(hadamard_problem, seq)
        assert np.max(np.abs(g)) < 1e-12


class TestPenalizedObjective:
    def test_penalty_term_enters_update_direction(self, qubit):
        # the ascent direction for Phi = fbar - P is factor*tau*g - dP/domega;
        # verify against finite differences of the penalized objective
        from qoctl import PenaltyConfig

        penalty = PenaltyConfig(weight=0.7, soft_fraction=0.5)
        problem = ControlProblem(
            system=qubit,
            target=GateTarget(standard_gate("hadamard")),
            penalty=penalty,
        )
        rng = np.random.default_rng(11)
        amps = rng.uniform(-1.0, 1.0, size=(5, 2)) * 0.9 * qubit.max_amplitudes[None, :]
        seq = ControlSequence.equal_durations(0.004, amps)

        analytic = 2.0 * seq.durations[:, None] * grape_gradient(problem, seq)
        analytic -= penalty_gradient(seq, qubit, penalty)

        def phi(s):
            return ensemble_performance(problem, s).mean - penalty_value(
                s, qubit, penalty
            )

        fd = fd_gradient(phi, seq)
        rel = np.linalg.norm(analytic - fd) / np.linalg.norm(fd)
        assert rel <= 1e-3


class TestGrapeRun:
    def test_first_order_reaches_hadamard_goal(self, hadamard_problem):
        cfg = GrapeConfig(n_segments=20, mode="first-order", fidelity_goal=0.999, seed=0)
        result = grape_run(hadamard_problem, cfg)
        assert result.termination == "goal-reached"
        assert result.final_fidelity >= 0.999
        assert result.iterations_used <= 2000

    def test_quasi_newton_reaches_hadamard_goal(self, hadamard_problem):
        cfg = GrapeConfig(n_segments=20, mode="quasi-newton", fidelity_goal=0.999, seed=0)
        result = grape_run(hadamard_problem, cfg)
        assert result.termination == "goal-reached"
        assert result.final_fidelity >= 0.999

    def test_state_transfer_reaches_goal(self, flip_problem):
        cfg = GrapeConfig(n_segments=10, mode="first-order", fidelity_goal=0.999, seed=2)
        result = grape_run(flip_problem, cfg)
        assert result.termination == "goal-reached"
        assert result.final_fidelity >= 0.999

    def test_already_optimal_start_stops_immediately(self, hadamard_problem):
        amps = np.array([[0.0, np.pi / 2.0], [np.pi, 0.0]])
        exact = ControlSequence.equal_durations(2.0, amps)
        cfg = GrapeConfig(n_segments=2, total_time=2.0, fidelity_goal=0.999)
        result = grape_run(hadamard_problem, cfg, initial_sequence=exact)
        assert result.termination == "goal-reached"
        assert result.iterations_used == 1
        assert np.array_equal(result.sequence.amplitudes, amps)

    def test_trace_starts_at_initial_evaluation(self, hadamard_problem):
        rng = np.random.default_rng(5)
        initial = random_initial_sequence(hadamard_problem.system, 8, 1.0, rng)
        f0 = ensemble_performance(hadamard_problem, initial).mean
        cfg = GrapeConfig(n_segments=8, max_iterations=3, fidelity_goal=1.0)
        result = grape_run(hadamard_problem, cfg, initial_sequence=initial)
        assert result.fidelity_trace[0] == pytest.approx(f0, abs=1e-15)
        assert result.iterations_used == len(result.fidelity_trace)

    def test_zero_budget_reports_max_iter(self, hadamard_problem):
        cfg = GrapeConfig(n_segments=6, max_iterations=0, fidelity_goal=0.999, seed=1)
        result = grape_run(hadamard_problem, cfg)
        assert result.termination == "max-iter"
        assert result.iterations_used == 1  # the initial evaluation only

    def test_vanishing_step_stalls(self, hadamard_problem):
        cfg = GrapeConfig(
            n_segments=6,
            mode="first-order",
            step=1e-30,
            stall_window=4,
            max_iterations=100,
            fidelity_goal=0.999,
            seed=3,
        )
        result = grape_run(hadamard_problem, cfg)
        assert result.termination == "stalled"
        assert result.iterations_used <= 10

    def test_same_seed_reproduces_run(self, hadamard_problem):
        cfg = GrapeConfig(n_segments=12, fidelity_goal=0.999, seed=42)
        a = grape_run(hadamard_problem, cfg)
        b = grape_run(hadamard_problem, cfg)
        assert np.array_equal(a.fidelity_trace, b.fidelity_trace)
        assert np.array_equal(a.objective_trace, b.objective_trace)
        assert np.array_equal(a.sequence.amplitudes, b.sequence.amplitudes)

    def test_final_fidelity_matches_emitted_sequence(self, hadamard_problem):
        cfg = GrapeConfig(n_segments=10, max_iterations=40, fidelity_goal=1.0, seed=9)
        result = grape_run(hadamard_problem, cfg)
        again = ensemble_performance(hadamard_problem, result.sequence).mean
        assert result.final_fidelity == pytest.approx(again, abs=1e-15)

    def test_reported_best_dominates_trace(self, hadamard_problem):
        cfg = GrapeConfig(n_segments=10, max_iterations=30, fidelity_goal=1.0, seed=4)
        result = grape_run(hadamard_problem, cfg)
        assert result.final_objective >= np.max(result.objective_trace) - 1e-12


class TestValidationAndCapability:
    def test_rejects_unknown_mode(self):
        with pytest.raises(ValidationError):
            GrapeConfig(mode="newton")

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_segments=0),
            dict(total_time=0.0),
            dict(step=-1.0),
            dict(memory=0),
            dict(stall_window=0),
            dict(max_iterations=-1),
            dict(fidelity_goal=0.0),
            dict(fidelity_goal=1.5),
        ],
    )
    def test_rejects_bad_config(self, kwargs):
        with pytest.raises(ValidationError):
            GrapeConfig(**kwargs)

    def test_rejects_interleaved_channels(self, qubit):
        kraus = QuantumChannel(
            kraus_operators=(
                np.sqrt(0.9) * np.eye(2),
                np.sqrt(0.1) * np.diag([1.0, -1.0]),
            ),
            insert_after_segment=0,
        )
        problem = ControlProblem(
            system=qubit,
            target=StateTarget(KET0, KET1, kind="trace"),
            penalty=NO_PENALTY,
            channels=(kraus,),
        )
        with pytest.raises(CapabilityError):
            grape_run(problem, GrapeConfig(n_segments=4))

    def test_rejects_non_trace_state_kind(self, qubit):
        problem = ControlProblem(
            system=qubit,
            target=StateTarget(KET0, KET1, kind="uhlmann"),
            penalty=NO_PENALTY,
        )
        seq = ControlSequence.equal_durations(1.0, np.zeros((3, 2)))
        with pytest.raises(CapabilityError):
            grape_gradient(problem, seq)
