"""Evolution engines, convergence, pulse decomposition, adiabatic projection."""
import numpy as np
import pytest

from nia_sim import evolve, model, smallmat
from nia_sim.evolve import EvolutionConfig
from nia_sim.model import (FrequencyConvention, NoiseSpec, SingleQubitSchedule,
                           SpectatorSchedule, TwoQubitSchedule, realize_noise)

ANG = FrequencyConvention.ANGULAR_DIRECT

ZERO = np.array([1.0, 0.0], dtype=complex)
PLUS = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
PAIR01 = np.array([0.0, 1.0, 0.0, 0.0], dtype=complex)


def single(j0=4000.0, total_time=5e-4):
    return SingleQubitSchedule(j0=j0, total_time=total_time, convention=ANG)


def fig3_noise(seed=1, index=0):
    spec = NoiseSpec(amplitude=4000.0, omega0=1.0, omega_cut=5000.0, seed=seed,
                     convention=ANG)
    return realize_noise(spec, index)


class _FrozenSchedule(SingleQubitSchedule):
    """Sweep coefficients pinned at t = 0 (constant J0 sz)."""

    def ab(self, t):
        return np.zeros_like(np.asarray(t, dtype=float)), \
            np.ones_like(np.asarray(t, dtype=float))

    def ab_dot(self, t):
        return 0.0, 0.0


class TestEvolveStepwise:
    def test_constant_hamiltonian_keeps_populations(self):
        s = _FrozenSchedule(j0=4000.0, total_time=5e-4, convention=ANG)
        traj = evolve.evolve_stepwise(s, None, EvolutionConfig(dt=1e-6), ZERO)
        np.testing.assert_allclose(traj.pop0, 1.0, atol=1e-10)
        np.testing.assert_allclose(traj.pop1, 0.0, atol=1e-10)

    def test_fig3b_non_adiabatic_endpoint(self):
        traj = evolve.evolve_stepwise(single(), None, EvolutionConfig(dt=1e-6), ZERO)
        assert abs(traj.pop0[-1] - 0.5) > 0.05
        assert np.abs(traj.im_coherence).max() > 0.1
        assert traj.fidelity_e0[-1] < 0.95

    def test_record_grid_and_final_time(self):
        s = single()
        traj = evolve.evolve_stepwise(s, None, EvolutionConfig(dt=1e-6, store_every=10),
                                      ZERO)
        assert traj.times[0] == 0.0
        assert traj.times[-1] == pytest.approx(s.total_time, abs=1e-15)
        np.testing.assert_allclose(np.diff(traj.times)[:-1], 1e-5, rtol=1e-9)

    def test_truncated_last_step_lands_on_t(self):
        s = single(total_time=5.05e-4)
        traj = evolve.evolve_stepwise(s, None, EvolutionConfig(dt=1e-6), ZERO)
        assert traj.times[-1] == pytest.approx(s.total_time, abs=1e-15)

    def test_unnormalized_initial_rejected(self):
        with pytest.raises(ValueError):
            evolve.evolve_stepwise(single(), None, EvolutionConfig(dt=1e-6),
                                   np.array([1.0, 1.0]))

    def test_norm_preserved_without_renormalization(self):
        s = single(total_time=1e-2)  # 10^4 steps
        cfg = EvolutionConfig(dt=1e-6, renormalize=False, store_every=10000)
        traj = evolve.evolve_stepwise(s, None, cfg, ZERO)
        norm_sq = traj.pop0[-1] + traj.pop1[-1]
        assert abs(norm_sq - 1.0) < 1e-10

    def test_metadata_records_run_parameters(self):
        noise = fig3_noise(seed=9, index=4)
        traj = evolve.evolve_stepwise(single(), noise, EvolutionConfig(dt=1e-6), ZERO)
        assert traj.meta["seed"] == 9
        assert traj.meta["realization_index"] == 4
        assert traj.meta["dt"] == 1e-6
        assert traj.meta["system"] == "single"

    def test_two_qubit_block_invariance(self):
        s = TwoQubitSchedule(j0=100.0, total_time=0.01, convention=ANG)
        initial = np.array([0.3, 0.8, 0.1, 0.5], dtype=complex)
        initial /= np.linalg.norm(initial)
        cfg = EvolutionConfig(dt=1e-5, renormalize=False, store_every=1000)
        build = evolve._hamiltonian_builder(s)
        state = initial.copy()
        starts, durations = evolve._plan_steps(s.total_time, cfg.dt)
        for k in range(len(starts)):
            u = smallmat.expm_unitary(build(starts[k] + 0.5 * durations[k], 0.0),
                                      durations[k])
            state = u @ state
        phase0 = s.j0_rad * 0.0  # |00> and |11> sit at eigenvalue zero
        assert abs(abs(state[0]) - abs(initial[0])) < 1e-10
        assert abs(abs(state[3]) - abs(initial[3])) < 1e-10
        assert abs(state[0] - initial[0] * np.exp(-1.0j * phase0)) < 1e-9


class TestEvolveOracle:
    def test_larmor_closed_form(self):
        # Constant sz, initial |+>: Im(alpha beta*) = -sin(2 J0 t)/2.
        s = _FrozenSchedule(j0=500.0, total_time=2e-3, convention=ANG)
        traj = evolve.evolve_oracle(s, None, EvolutionConfig(dt=1e-6), PLUS)
        expected = -0.5 * np.sin(2.0 * s.j0_rad * traj.times)
        np.testing.assert_allclose(traj.im_coherence, expected, atol=1e-8)

    def test_matches_stepwise_noise_free(self):
        s = single()
        cfg = EvolutionConfig(dt=1e-6)
        a = evolve.final_state_stepwise(s, None, cfg, ZERO)
        b = evolve.final_state_oracle(s, None, cfg, ZERO)
        assert abs(1.0 - abs(np.vdot(a, b)) ** 2) < 1e-6

    def test_matches_stepwise_noisy_held(self):
        s = single()
        noise = fig3_noise()
        cfg = EvolutionConfig(dt=1e-6)
        a = evolve.final_state_stepwise(s, noise, cfg, ZERO)
        b = evolve.final_state_oracle(s, noise, cfg, ZERO, noise_sampling="hold")
        assert abs(1.0 - abs(np.vdot(a, b)) ** 2) < 1e-4

    def test_bad_sampling_mode(self):
        with pytest.raises(ValueError):
            evolve.evolve_oracle(single(), None, EvolutionConfig(dt=1e-6), ZERO,
                                 noise_sampling="nearest")


class TestConvergence:
    def test_stepwise_second_order(self):
        s = single()
        ref = evolve.final_state_oracle(s, None, EvolutionConfig(dt=2.5e-7), ZERO)
        errs = []
        for dt in (4e-6, 2e-6, 1e-6):
            final = evolve.final_state_stepwise(s, None, EvolutionConfig(dt=dt), ZERO)
            errs.append(np.linalg.norm(final - ref * np.vdot(ref, final)
                                       / abs(np.vdot(ref, final))))
        orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
        for order in orders:
            assert 1.8 <= order <= 2.2


class TestPulseDecomposition:
    def test_requires_two_level(self):
        s = TwoQubitSchedule(j0=100.0, total_time=0.01, convention=ANG)
        with pytest.raises(evolve.UnsupportedScheduleError):
            evolve.decompose_pulse(s, None, EvolutionConfig(dt=1e-5))

    def test_pure_x_drive(self):
        class PureX(SingleQubitSchedule):
            def ab(self, t):
                x = np.asarray(t) / self.total_time
                return x, np.zeros_like(x)

            def ab_dot(self, t):
                return 1.0 / self.total_time, 0.0

        s = PureX(j0=1000.0, total_time=1e-4, convention=ANG)
        steps = evolve.decompose_pulse(s, None, EvolutionConfig(dt=1e-5))
        for k, step in enumerate(steps):
            assert step.z_angle == pytest.approx(0.0, abs=1e-12)
            assert step.xy_phase == pytest.approx(0.0, abs=1e-9)
            mid = (k + 0.5) * 1e-5
            assert step.xy_amplitude == pytest.approx(s.j0_rad * mid / s.total_time,
                                                      rel=1e-9)

    def test_pure_z_drive(self):
        s = _FrozenSchedule(j0=1000.0, total_time=1e-4, convention=ANG)
        steps = evolve.decompose_pulse(s, None, EvolutionConfig(dt=1e-5))
        total_z = sum(step.z_angle for step in steps)
        for step in steps:
            assert step.xy_amplitude == pytest.approx(0.0, abs=1e-9)
        assert total_z == pytest.approx(s.j0_rad * s.total_time, rel=1e-9)

    def test_per_step_faithfulness(self):
        s = single()
        noise = fig3_noise()
        cfg = EvolutionConfig(dt=1e-6)
        steps = evolve.decompose_pulse(s, noise, cfg)
        starts, durations = evolve._plan_steps(s.total_time, cfg.dt)
        mids = starts + 0.5 * durations
        c_mid = model.noise_values(noise, mids)
        prefixes = evolve.prefix_propagators(steps)
        direct = np.eye(2, dtype=complex)
        for k in (0, 1, 9, 99, 499):
            direct = np.eye(2, dtype=complex)
            for j in range(k + 1):
                direct = smallmat.expm_unitary(
                    model.h_single(s, mids[j], c_mid[j]), durations[j]) @ direct
            diff = prefixes[k] - direct
            inf = 1.0 - abs(np.trace(prefixes[k].conj().T @ direct) / 2.0) ** 2
            assert inf < 1e-10

    def test_whole_run_reconstruction(self):
        s = single()
        noise = fig3_noise()
        cfg = EvolutionConfig(dt=1e-6)
        steps = evolve.decompose_pulse(s, noise, cfg)
        u = evolve.reconstruct_propagator(steps)
        final_direct = evolve.final_state_stepwise(
            s, noise, EvolutionConfig(dt=1e-6, renormalize=False), ZERO)
        final_pulse = u @ ZERO
        assert abs(1.0 - abs(np.vdot(final_pulse, final_direct)) ** 2) < 1e-6


class TestProjectAdiabatic:
    def test_initial_state(self):
        s = single()
        h = model.h_single(s, 0.0)
        out = evolve.project_adiabatic(ZERO, h, np.zeros(2))
        # |0> is the upper eigenlevel of J0 sz (ascending index 1).
        assert abs(out.coeffs[1]) == pytest.approx(1.0, abs=1e-12)
        assert abs(out.coeffs[0]) == pytest.approx(0.0, abs=1e-12)

    def test_constant_hamiltonian_stationary_magnitudes(self):
        s = _FrozenSchedule(j0=3000.0, total_time=1e-3, convention=ANG)
        cfg = EvolutionConfig(dt=1e-6, store_every=100)
        traj = evolve.evolve_stepwise(s, None, cfg, PLUS)
        phases = evolve.accumulate_phases(s, None, traj.times)
        h = model.h_single(s, 0.0)
        mags = []
        # Reconstruct states by direct propagation to each record time.
        state = PLUS.copy()
        u = smallmat.expm_unitary(h, 1e-4)
        for i, t in enumerate(traj.times):
            out = evolve.project_adiabatic(state, h, phases[i])
            mags.append(np.abs(out.coeffs))
            state = u @ state
        mags = np.array(mags)
        np.testing.assert_allclose(mags, np.tile(mags[0], (len(mags), 1)), atol=1e-9)

    def test_long_t_adiabatic_limit(self):
        s = single(total_time=0.05)
        cfg = EvolutionConfig(dt=1e-6, store_every=500)
        traj = evolve.evolve_stepwise(s, None, cfg, ZERO)
        assert traj.fidelity_e0.min() > 0.998
        # Adiabatic-frame coefficient of the tracked (upper) level stays put.
        assert np.sqrt(traj.fidelity_e0.min()) > 0.999

    def test_norm_violation_rejected(self):
        s = single()
        h = model.h_single(s, 0.0)
        with pytest.raises(ValueError):
            evolve.project_adiabatic(np.array([0.5, 0.0]), h, np.zeros(2))
