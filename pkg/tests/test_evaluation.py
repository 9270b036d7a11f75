import random

import numpy as np
import pytest

from hmimo_leo import ScenarioConfig
from hmimo_leo.evaluation import (aggregate, run_sweep, run_trial, run_trials, sinr_per_user,
                                  sum_rate, trial_streams)
from hmimo_leo.scenario import ScenarioError


def small(**kw):
    base = dict(rhs_elements=16, tris_elements=16, max_outer_iters=20)
    base.update(kw)
    return ScenarioConfig(**base)


class TestSinr:
    def test_interference_free(self):
        np.testing.assert_allclose(sinr_per_user(np.diag([2.0, 1.0]), np.eye(2), 0.5), [8.0, 2.0])

    def test_with_interference(self):
        T = np.array([[1.0, 1.0], [0.0, 2.0]])
        np.testing.assert_allclose(sinr_per_user(T, np.eye(2), 1.0), [0.5, 4.0])

    def test_zero_noise_no_interference_is_infinite(self):
        assert np.all(np.isinf(sinr_per_user(np.eye(2), np.eye(2), 0.0)))

    def test_zero_signal(self):
        assert sinr_per_user(np.zeros((2, 2)), np.eye(2), 0.0).tolist() == [0.0, 0.0]

    def test_non_square_product(self):
        with pytest.raises(ValueError):
            sinr_per_user(np.ones((2, 3)), np.ones((3, 3)), 1.0)


class TestSumRate:
    def test_example(self):
        assert sum_rate([3.0, 15.0]) == pytest.approx(6.0)

    def test_zero(self):
        assert sum_rate([0.0, 0.0]) == 0.0

    def test_negative(self):
        with pytest.raises(ValueError):
            sum_rate([-0.1])


class TestTrial:
    def test_streams_depend_only_on_seed_pair(self):
        a = [g.random() for g in trial_streams(3, 7)]
        b = [g.random() for g in trial_streams(3, 7)]
        c = [g.random() for g in trial_streams(3, 8)]
        assert a == b and a != c and len(set(a)) == 3

    def test_deterministic(self):
        cfg = small()
        assert run_trial(cfg, 4) == run_trial(cfg, 4)

    def test_no_direct_link_differs_from_multipath(self):
        r1 = run_trial(small(channel_case="I"), 0)
        r3 = run_trial(small(channel_case="III"), 0)
        assert r1.sum_rate_se != r3.sum_rate_se

    def test_fields(self):
        cfg = small(channel_case="II")
        r = run_trial(cfg, 2)
        assert r.transmit_power <= cfg.total_power * (1 + 1e-9)
        assert r.throughput == pytest.approx(cfg.bandwidth * r.sum_rate_se)
        assert r.sum_rate_se == pytest.approx(sum_rate(r.per_user_sinr))
        assert (r.N, r.K, r.channel_case, r.trial) == (16, 16, "II", 2)
        assert not r.degenerate and r.iterations >= 1

    def test_returns_model(self):
        r, model, channels = run_trial(small(), 0, return_model=True)
        assert model.score(channels) == pytest.approx(r.sum_rate_se)


class TestAggregation:
    def test_shuffled_order_identical(self):
        results = run_trials(small(), 6)
        shuffled = results[:]
        random.Random(1).shuffle(shuffled)
        assert aggregate("IV", 16, 16, results) == aggregate("IV", 16, 16, shuffled)

    def test_single_trial_zero_std(self):
        cell = aggregate("IV", 16, 16, run_trials(small(), 1))
        assert cell.trials == 1 and cell.std_sum_rate_se == 0.0


class TestSweep:
    def test_single_cell(self):
        res = run_sweep(small(), [16], ["IV"], 1)
        assert len(res.cells) == 1 and res.cells[0].trials == 1
        assert res.cell("IV", 16).N == 16

    def test_case_order_does_not_matter(self):
        cfg = small()
        a = run_sweep(cfg, [16], ["II", "IV"], 3)
        b = run_sweep(cfg, [16], ["IV", "II"], 3)
        for case in ("II", "IV"):
            assert a.cell(case, 16) == b.cell(case, 16)
            np.testing.assert_array_equal(a.rates(case, 16), b.rates(case, 16))

    def test_invalid_inputs(self):
        with pytest.raises(ScenarioError):
            run_sweep(small(), [], ["IV"], 1)
        with pytest.raises(ScenarioError):
            run_sweep(small(), [16], ["V"], 1)
        with pytest.raises(ScenarioError):
            run_sweep(small(), [16], ["IV"], 0)

    def test_doubling_power_does_not_reduce_rate(self):
        cfg = small(channel_case="III", rhs_elements=36, tris_elements=36)
        lo = run_sweep(cfg, [36], ["III"], 6).cell("III", 36)
        hi = run_sweep(cfg.replace(total_power=400.0), [36], ["III"], 6).cell("III", 36)
        assert hi.mean_sum_rate_se >= lo.mean_sum_rate_se

    def test_parallel_matches_serial(self):
        cfg = small()
        assert run_trials(cfg, 3, jobs=2) == run_trials(cfg, 3, jobs=1)
