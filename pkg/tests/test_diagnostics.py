import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symcycle.diagnostics import (ASYMPTOTICALLY_STABLE, DIVERGENT, INDETERMINATE, OSCILLATORY,
                                  MetricsError, Thresholds, block_means, classify,
                                  convergence_time, cycle_amplitudes, diagnostics_series,
                                  lyapunov_rate, lyapunov_sum, onroad_energy, onset_time,
                                  oscillation_metrics, reference_points)
from symcycle.integrator import (InputEntry, InputSchedule, IntegratorConfig, Trajectory,
                                 simulate)
from symcycle.model import SpecError, SystemSpec, vector_field

from conftest import log_uniform_spec


def fake_trajectory(spec, times, states):
    return Trajectory(np.asarray(times, float), np.asarray(states, float), spec)


class TestLyapunov:
    def test_fixed_point(self, five):
        l, q = lyapunov_rate(five, np.ones(5))
        assert (l, q) == pytest.approx((2.5, 2.5), abs=1e-15)
        assert lyapunov_sum(np.ones(5)) == 5.0

    def test_perturbed(self, five):
        l, q = lyapunov_rate(five, [2, 1, 1, 1, 1])
        assert l - q == pytest.approx(-0.5, abs=1e-15)

    def test_large_state_decreases(self, five):
        l, q = lyapunov_rate(five, np.full(5, 10.0))
        assert l - q < 0

    def test_rate_identity(self, rng):
        for _ in range(1000):
            n = int(rng.choice([3, 5, 8]))
            spec = log_uniform_spec(rng, n)
            x = rng.uniform(0, 5, n)
            l, q = lyapunov_rate(spec, x)
            total = vector_field(spec, x).sum()
            assert abs(total - (l - q)) <= 1e-12 * max(1.0, abs(l), abs(q))


class TestOnroadEnergy:
    def test_zero_deviation(self, five):
        b = np.array([1.0, 2, 3, 4, 5])
        assert onroad_energy(five, b, b) == 0.0

    def test_all_ones(self, five):
        assert onroad_energy(five, np.zeros(5), np.ones(5)) == pytest.approx(2.5)

    def test_alternating(self, five):
        d = np.array([1.0, -1, 1, -1, 1])
        assert onroad_energy(five, np.zeros(5), d) == pytest.approx(0.5)

    def test_length_mismatch(self, five):
        with pytest.raises(SpecError):
            onroad_energy(five, np.ones(4), np.ones(4))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.1, 2), min_size=10, max_size=10),
           st.lists(st.floats(-3, 3), min_size=5, max_size=5))
    def test_independent_of_k1_k2(self, rates, d):
        a = SystemSpec(5, 1.0, 0.5, 0.5)
        b = SystemSpec(5, rates[:5], rates[5:], 0.5)
        assert onroad_energy(a, np.ones(5), np.ones(5) + d) == onroad_energy(b, np.ones(5),
                                                                            np.ones(5) + d)


class TestSeries:
    def test_constant_at_fixed_point(self, five):
        traj = fake_trajectory(five, [0, 1, 2], np.ones((3, 5)))
        s = diagnostics_series(five, traj, np.ones(5))
        assert np.all(s.r == 0) and np.all(s.v == 5) and np.all(s.dv == 0)

    def test_pointwise_match(self, five):
        traj = simulate(five, [2, 1, 1, 1, 1], IntegratorConfig(0.01, 5, 10))
        s = diagnostics_series(five, traj, np.ones(5))
        for i in (0, 7, len(traj) - 1):
            x = traj.states[i]
            assert s.r[i] == pytest.approx(onroad_energy(five, np.ones(5), x), abs=1e-15)
            assert s.dv[i] == pytest.approx(vector_field(five, x).sum(), abs=1e-12)

    def test_shape_mismatch(self, five):
        traj = fake_trajectory(five, [0, 1], np.ones((2, 5)))
        with pytest.raises(SpecError):
            diagnostics_series(five, traj, np.ones((3, 5)))

    def test_csv_header(self, five):
        import io
        traj = fake_trajectory(five, [0, 1], np.ones((2, 5)))
        buf = io.StringIO()
        diagnostics_series(five, traj, np.ones(5)).to_csv(buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "t,V,L,Q,R,absR" and len(lines) == 3


class TestReferencePoints:
    def test_no_inputs(self, five):
        traj = fake_trajectory(five, [0, 1], np.ones((2, 5)))
        np.testing.assert_allclose(reference_points(five, traj), 1.0)

    def test_switches_at_injection(self):
        spec = SystemSpec.uniform(5, 1, 0.16, 0.5)
        sched = InputSchedule([InputEntry(1, 2.0, 1.5)])
        traj = simulate(spec, np.full(5, 1.68), IntegratorConfig(0.01, 4, 10), sched)
        b = reference_points(spec, traj)
        before = traj.times < 2.0
        np.testing.assert_allclose(b[before], 1.68, atol=1e-12)
        after = b[~before][0]
        assert np.abs(vector_field(spec, after) + sched.forcing(5, 2.0)).max() <= 1e-12
        assert not np.allclose(after, 1.68)


class TestMetrics:
    def test_synthetic_sinusoid(self):
        spec = SystemSpec.uniform(2, 1, 0.5, 0.5, -1, -1)
        t = np.arange(0, 200, 0.01)
        x = np.column_stack([2 + np.sin(2 * np.pi * t / 10), 2 + 0.5 * np.cos(2 * np.pi * t / 10)])
        period, amps = oscillation_metrics(fake_trajectory(spec, t, x), window=0.5)
        assert period == pytest.approx(10, abs=0.2)
        np.testing.assert_allclose(amps, [2, 1], atol=1e-3)
        assert len(cycle_amplitudes(fake_trajectory(spec, t, x), window=0.5)) >= 8

    def test_fixed_trajectory_has_no_cycles(self, five):
        t = np.linspace(0, 100, 1001)
        with pytest.raises(MetricsError):
            oscillation_metrics(fake_trajectory(five, t, np.ones((1001, 5))))

    def test_convergence_time(self):
        t = np.arange(6.0)
        assert convergence_time(t, np.array([1, 1, 0, 1, 0, 0.0]), 0.5) == 4.0
        assert convergence_time(t, np.zeros(6), 0.5) == 0.0
        assert convergence_time(t, np.ones(6), 0.5) is None

    def test_block_means(self):
        t = np.arange(0, 30.01, 0.5)
        centers, means = block_means(t, t, 10.0)
        np.testing.assert_allclose(centers, [5, 15, 25])
        assert np.all(np.diff(means) == pytest.approx(10.0))

    def test_onset(self, five):
        traj = fake_trajectory(five, [0, 1, 2], [[1] * 5, [1] * 5, [2] * 5])
        s = diagnostics_series(five, traj, np.ones(5))
        assert onset_time(s) == 2.0
        assert onset_time(s, eps_osc=10) is None


class TestClassify:
    def test_start_at_fixed_point(self, five):
        traj = simulate(five, np.ones(5), IntegratorConfig(0.01, 10, 10))
        c = classify(diagnostics_series(five, traj, np.ones(5)), traj)
        assert c.verdict == ASYMPTOTICALLY_STABLE and c.convergence_time == 0.0
        json.loads(c.to_json())

    def test_perturbed_stable(self, five):
        traj = simulate(five, [2, 1, 1, 1, 1], IntegratorConfig(0.01, 100, 10))
        c = classify(diagnostics_series(five, traj, np.ones(5)), traj)
        assert c.verdict == ASYMPTOTICALLY_STABLE and 0 < c.convergence_time < 50

    def test_short_run_indeterminate(self, five):
        traj = simulate(five, [6, 1, 1, 1, 1], IntegratorConfig(0.01, 3, 10))
        c = classify(diagnostics_series(five, traj, np.ones(5)), traj)
        assert c.verdict == INDETERMINATE and "t_end" in c.note

    def test_generator_oscillates(self):
        spec = SystemSpec.uniform(8, 1, 0.5, 0.5, -1, -3)
        traj = simulate(spec, [6] + [1] * 7, IntegratorConfig(0.01, 500, 10))
        c = classify(diagnostics_series(spec, traj, np.ones(8)), traj)
        assert c.verdict == OSCILLATORY
        assert c.cycle_period > 0 and len(c.cycle_amplitude) == 8

    def test_divergent(self, logistic):
        traj = simulate(logistic, [-0.1], IntegratorConfig(0.01, 30, 10), on_blowup="truncate",
                        check_positive=False)
        c = classify(diagnostics_series(logistic, traj, [1.0]), traj)
        assert c.verdict == DIVERGENT and c.to_dict()["final_r"] is None

    def test_thresholds_matter(self, five):
        traj = simulate(five, [2, 1, 1, 1, 1], IntegratorConfig(0.01, 30, 10))
        s = diagnostics_series(five, traj, np.ones(5))
        assert classify(s, traj, Thresholds(eps_state=1e-3)).verdict == ASYMPTOTICALLY_STABLE
        assert classify(s, traj, Thresholds(eps_state=1e-9, eps_conv=1e-30)).verdict == INDETERMINATE
