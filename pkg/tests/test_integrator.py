import io
import warnings

import numpy as np
import pytest

from symcycle import kernels
from symcycle.integrator import (DivergenceError, InputEntry, InputSchedule, IntegratorConfig,
                                 PositivityWarning, augmented_field, read_trajectory_csv,
                                 simulate, step_rk4)
from symcycle.model import SpecError, SystemSpec, vector_field

from conftest import log_uniform_spec, logistic_exact

EMPTY = InputSchedule()


class TestAugmentedField:
    def test_empty_schedule(self, five):
        x = [2.0, 1, 1, 1, 1]
        np.testing.assert_array_equal(augmented_field(five, x, EMPTY, 3.0), vector_field(five, x))

    def test_active_input_at_fixed_point(self, five):
        sched = InputSchedule((InputEntry(1, 0.0, 1.5),))
        np.testing.assert_array_equal(augmented_field(five, np.ones(5), sched, 1.0),
                                      [1.5, 0, 0, 0, 0])

    def test_inactive_before_start(self, five):
        sched = InputSchedule((InputEntry(1, 250.0, 1.5),))
        x = [2.0, 1, 1, 1, 1]
        np.testing.assert_array_equal(augmented_field(five, x, sched, 249.99), vector_field(five, x))

    def test_stop_is_exclusive(self, five):
        sched = InputSchedule((InputEntry(2, 1.0, 0.5, t_stop=2.0),))
        assert sched.forcing(5, 1.0)[1] == 0.5
        assert sched.forcing(5, 2.0)[1] == 0.0

    def test_out_of_range_element(self, five):
        with pytest.raises(SpecError):
            augmented_field(five, np.ones(5), InputSchedule((InputEntry(6, 0.0, 1.0),)), 0.0)

    def test_empty_window_rejected(self):
        with pytest.raises(SpecError):
            InputEntry(1, 5.0, 1.0, t_stop=5.0)


class TestStep:
    def test_fixed_point_unchanged(self, five):
        np.testing.assert_allclose(step_rk4(five, np.ones(5), EMPTY, 0.0, 0.01), np.ones(5),
                                   atol=1e-15)

    def test_logistic_one_step(self, logistic):
        x = step_rk4(logistic, [0.5], EMPTY, 0.0, 0.01)
        assert abs(x[0] - logistic_exact(0.01)) < 1e-10

    def test_local_order_five(self, logistic):
        # single-step error at dt = 0.5, 0.25, 0.125: ratios 32.15, 32.04
        errs = [abs(step_rk4(logistic, [0.5], EMPTY, 0.0, dt)[0] - logistic_exact(dt))
                for dt in (0.5, 0.25, 0.125)]
        for coarse, fine in zip(errs, errs[1:]):
            assert 28 <= coarse / fine <= 36

    def test_rejects_bad_dt(self, logistic):
        with pytest.raises(ValueError):
            step_rk4(logistic, [0.5], EMPTY, 0.0, 0.0)

    def test_kernel_step_matches_python_step(self, five):
        x0 = np.array([2.0, 1, 1, 1, 1])
        tr = simulate(five, x0, IntegratorConfig(0.01, 0.01, 1))
        np.testing.assert_allclose(tr.states[1], step_rk4(five, x0, EMPTY, 0.0, 0.01), rtol=1e-15)


class TestSimulate:
    def test_logistic_attractor(self, logistic):
        tr = simulate(logistic, [0.5], IntegratorConfig(0.01, 30.0))
        assert abs(tr.final[0] - 1.0) < 1e-6

    def test_global_error_and_order(self, logistic):
        errs = []
        for dt in (0.01, 0.005):
            tr = simulate(logistic, [0.5], IntegratorConfig(dt, 20.0, 1))
            errs.append(np.abs(tr.states[:, 0] - logistic_exact(tr.times)).max())
        assert errs[0] < 1e-8
        assert 8 <= errs[0] / errs[1] <= 32

    def test_fig3a_settles(self, five):
        tr = simulate(five, [2, 1, 1, 1, 1], IntegratorConfig(0.01, 50.0))
        assert np.abs(tr.final - 1).max() < 1e-3

    def test_negative_start_diverges(self, logistic):
        with pytest.raises(DivergenceError) as info:
            simulate(logistic, [-0.1], IntegratorConfig(0.01, 30.0), check_positive=False)
        assert 0 < info.value.time < 30

    def test_truncate_on_blowup(self, logistic):
        tr = simulate(logistic, [-0.1], IntegratorConfig(0.01, 30.0), on_blowup="truncate",
                      check_positive=False)
        assert tr.diverged and tr.times[-1] < 30
        assert np.all(np.isfinite(tr.states))

    def test_sampling_includes_endpoints(self, five):
        tr = simulate(five, np.ones(5), IntegratorConfig(0.01, 1.234, 10))
        assert tr.times[0] == 0.0
        assert tr.times[-1] == pytest.approx(1.234)
        assert np.all(np.diff(tr.times) > 0)
        assert len(tr) == 14  # 0, 0.1, ..., 1.2, 1.234

    def test_deterministic(self, five):
        cfg = IntegratorConfig(0.01, 50.0)
        sched = InputSchedule((InputEntry(1, 10.0, 0.7),))
        a = simulate(five, [6, 1, 1, 1, 1], cfg, sched)
        b = simulate(five, [6, 1, 1, 1, 1], cfg, sched)
        assert np.array_equal(a.states, b.states) and np.array_equal(a.times, b.times)

    def test_bad_initial_shape(self, five):
        with pytest.raises(SpecError):
            simulate(five, [1, 1], IntegratorConfig(0.01, 1.0))

    def test_positivity_warning_monitor(self):
        spec = SystemSpec.uniform(2, 1.0, 0.5, 0.5, -1, -1)
        sched = InputSchedule((InputEntry(1, 0.0, -50.0),))
        with pytest.warns(PositivityWarning):
            simulate(spec, [1.0, 1.0], IntegratorConfig(0.01, 0.2), sched)

    def test_injection_shift_invariance(self):
        spec = SystemSpec.uniform(5, 1.0, 0.16, 0.5)
        x0 = np.full(5, 1.68)  # at rest, so only the injection matters
        a = simulate(spec, x0, IntegratorConfig(0.01, 60.0), InputSchedule((InputEntry(1, 10.0, 1.5),)))
        b = simulate(spec, x0, IntegratorConfig(0.01, 80.0), InputSchedule((InputEntry(1, 30.0, 1.5),)))
        np.testing.assert_allclose(a.states[a.times >= 10.0 - 1e-9],
                                   b.states[b.times >= 30.0 - 1e-9], rtol=1e-12, atol=1e-12)

    def test_csv_export_round_trip(self, five):
        tr = simulate(five, [2, 1, 1, 1, 1], IntegratorConfig(0.01, 5.0))
        buf = io.StringIO()
        tr.to_csv(buf)
        text = buf.getvalue()
        assert text.splitlines()[0] == "t,E1,E2,E3,E4,E5"
        path = "/tmp/_symcycle_rt.csv"
        with open(path, "w") as fh:
            fh.write(text)
        t, x = read_trajectory_csv(path)
        assert np.array_equal(t, tr.times) and np.array_equal(x, tr.states)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(dt=0.0), dict(t_end=-1.0), dict(dt=2.0, t_end=1.0),
                                    dict(record_stride=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            IntegratorConfig(**kw)

    def test_step_count_rounding(self):
        assert IntegratorConfig(0.01, 100.0).n_steps == 10000
        assert IntegratorConfig(0.1, 0.3).n_steps == 3
        cfg = IntegratorConfig(0.01, 1.234)
        assert cfg.n_steps == 124 and cfg.last_dt == pytest.approx(0.004)


@pytest.mark.skipif("cython" not in kernels.backends(), reason="compiled kernel not built")
def test_backends_bit_identical(rng):
    mods = kernels.backends()
    spec = log_uniform_spec(rng, 8, offsets=(-1, -3))
    args = (spec.k1, spec.k2, spec.k3, spec.gen_index.astype(np.int64),
            spec.sup_index.astype(np.int64), rng.uniform(0.1, 5, 8), 0.01, 0.004, 3000, 7,
            np.array([0, 3]), np.array([5.0, 10.0]), np.array([np.inf, 20.0]),
            np.array([1.0, -0.3]), 1e12)
    py = mods["python"].integrate(*args)
    cy = mods["cython"].integrate(*args)
    assert np.array_equal(py[0], cy[0]) and np.array_equal(py[1], cy[1])
    assert py[2:] == cy[2:]


@pytest.mark.skipif("cython" not in kernels.backends(), reason="compiled kernel not built")
def test_backends_agree_on_divergence():
    mods = kernels.backends()
    k = np.array([1.0])
    args = (k, k * 0.5, k * 0.5, np.array([0]), np.array([0]), np.array([-0.1]), 0.01, 0.01, 3000, 10,
            np.array([], dtype=np.int64), np.array([]), np.array([]), np.array([]), 1e12)
    py, cy = mods["python"].integrate(*args), mods["cython"].integrate(*args)
    assert py[2] == cy[2] == 1 and py[3] == cy[3]
    assert np.array_equal(py[0], cy[0])


def test_positivity_small_ensemble(rng):
    for _ in range(10):
        n = int(rng.choice([3, 5, 8]))
        spec = log_uniform_spec(rng, n)
        with warnings.catch_warnings():
            warnings.simplefilter("error", PositivityWarning)
            tr = simulate(spec, rng.uniform(1e-3, 5, n), IntegratorConfig(0.01, 100.0))
        assert tr.states.min() > 0
        assert tr.states.max() < 100 * np.max(spec.k1 / spec.k3) * 100
