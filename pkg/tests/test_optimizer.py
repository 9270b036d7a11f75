import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import crandn, random_problem
from oracles import full_mse, mu_grid_oracle, phase_grid_check, random_search_oracle
from hmimo_leo import ChannelSet, ScenarioConfig, build_geometry, synthesize_channels
from hmimo_leo.channel import noise_power
from hmimo_leo.optimizer import (BeamformerState, HolographicMMSEBeamformer, coordinate_sweep,
                                 mse, optimize, update_holographic_weights, update_precoder,
                                 update_tris_phases, wiener_precoder)
from hmimo_leo.surfaces import (assemble_holographic_matrix, assemble_tris_matrix,
                                effective_channel, reference_wave_matrix)


def physical_instance(seed, **kw):
    base = dict(num_satellites=1, rhs_elements=8, rhs_feeds=2, tris_elements=8, num_users=2)
    base.update(kw)
    cfg = ScenarioConfig(**base)
    rng = np.random.default_rng(seed)
    geo = build_geometry(cfg, rng)
    ch = synthesize_channels(cfg, geo, rng)
    refs = [reference_wave_matrix(s, cfg.guided_index, cfg.wavelength) for s in geo.rhs]
    return cfg, ch, refs


class TestMse:
    def test_perfect_equalisation(self):
        assert mse(np.eye(2), np.eye(2), 1.0) == pytest.approx(2.0)

    def test_zero_precoder(self):
        assert mse(np.ones((2, 3)), np.zeros((3, 2)), 0.0) == pytest.approx(2.0)

    def test_gain_scales_noise(self):
        assert mse(np.eye(2), np.eye(2), 1.0, gain=0.5) == pytest.approx(2 * 0.25 + 2 * 0.25)

    def test_matches_monte_carlo(self, rng):
        H, F, sigma2 = crandn(rng, 2, 2), crandn(rng, 2, 2), 0.3
        n = 100_000
        x = crandn(rng, 2, n)
        noise = np.sqrt(sigma2) * crandn(rng, 2, n)
        y = H @ F @ x + noise
        empirical = np.mean(np.sum(np.abs(y - x) ** 2, axis=0))
        assert mse(H, F, sigma2) == pytest.approx(empirical, rel=0.01)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse(np.ones((2, 3)), np.ones((2, 2)), 0.1)


class TestUpdatePrecoder:
    def test_inactive_constraint(self):
        np.testing.assert_allclose(update_precoder(np.array([[1.0]]), 4.0), [[1.0]])

    def test_active_constraint_scalar(self):
        # (1 + mu)^-1 = 0.5 at mu = 1 meets the 0.25 W budget
        np.testing.assert_allclose(update_precoder(np.array([[1.0]]), 0.25), [[0.5]], rtol=1e-9)

    def test_against_mu_grid(self, rng):
        H = crandn(rng, 2, 3) * 3
        F = update_precoder(H, 1.0)
        oracle = mu_grid_oracle(H, 1.0)
        assert np.vdot(F, F).real <= 1.0 * (1 + 1e-9)
        assert mse(H, F, 0.0) == pytest.approx(oracle, rel=1e-4)

    def test_zero_channel(self):
        np.testing.assert_array_equal(update_precoder(np.zeros((2, 4)), 1.0), np.zeros((4, 2)))

    def test_rank_deficient(self, rng):
        h = crandn(rng, 1, 4)
        H = np.vstack([h, 2 * h])
        F = update_precoder(H, 0.01)
        assert np.vdot(F, F).real == pytest.approx(0.01, rel=1e-9)
        assert mse(H, F, 0.0) == pytest.approx(mu_grid_oracle(H, 0.01), rel=1e-4)

    @pytest.mark.parametrize("alpha", [1e-9, 0.37, 2.5, 1e6])
    def test_scale_covariance(self, rng, alpha):
        H = crandn(rng, 2, 5)
        P = 0.05
        F = update_precoder(H, P)
        F_scaled = update_precoder(alpha * H, P / alpha ** 2)
        np.testing.assert_allclose(F_scaled, F / alpha, rtol=1e-9)

    def test_tiny_physical_scale(self, rng):
        H = 1e-9 * crandn(rng, 2, 20)
        F = update_precoder(H, 200.0)
        power = np.vdot(F, F).real
        assert power <= 200 * (1 + 1e-9)
        assert power == pytest.approx(200.0, rel=1e-8)


class TestWienerPrecoder:
    def test_joint_optimality_against_gain_grid(self, rng):
        for _ in range(5):
            H, P, sigma2 = crandn(rng, 2, 4), 0.5, 0.2
            F, g = wiener_precoder(H, P, sigma2)
            ours = mse(H, F, sigma2, g)
            assert np.vdot(F, F).real == pytest.approx(P, rel=1e-12)
            grid = min(mse(H, Fg := update_precoder(gg * H, P), sigma2, gg)
                       for gg in np.logspace(-2, 2, 4001))
            assert ours <= grid * (1 + 1e-12)
            assert ours == pytest.approx(grid, rel=1e-4)

    def test_zero_channel(self):
        F, g = wiener_precoder(np.zeros((2, 3)), 1.0, 0.1)
        assert g == 0 and not F.any()

    def test_scale_invariant_objective(self, rng):
        H = crandn(rng, 2, 6)
        F1, g1 = wiener_precoder(H, 2.0, 0.1)
        F2, g2 = wiener_precoder(1e-8 * H, 2.0, 0.1 * 1e-16)
        assert mse(H, F1, 0.1, g1) == pytest.approx(mse(1e-8 * H, F2, 1e-17, g2), rel=1e-9)


def _one_element_problem(h_hu, f):
    ch = ChannelSet(np.zeros((1, 1), complex), np.zeros((1, 1), complex),
                    np.array([[h_hu]], complex))
    state = BeamformerState(np.array([[f]], complex), np.array([1.0 + 0j]), np.zeros(1),
                            (np.ones((1, 1), complex),))
    return ch, state


class TestWeightSweep:
    def test_real_positive_coupling_flips_sign(self):
        ch, state = _one_element_problem(1.0, -2.0)
        w = update_holographic_weights(ch, state.upsilon, state)
        assert w[0] == pytest.approx(-1.0)

    def test_flat_coordinate_unchanged(self):
        ch, state = _one_element_problem(1e-13, 1.0)
        assert update_holographic_weights(ch, state.upsilon, state)[0] == 1.0

    @pytest.mark.parametrize("S, N", [(1, 8), (2, 4)])
    def test_against_phase_grid(self, rng, S, N):
        ch, refs, F, w, theta = random_problem(rng, S=S, N=N, L=2, Q=1, K=3, I=2)
        gain = 0.7 * np.exp(0.3j)
        state = BeamformerState(F, w, theta, tuple(refs), gain)
        w_new = update_holographic_weights(ch, state.upsilon, state)
        Y = assemble_tris_matrix(theta)

        def build(z):
            return gain * effective_channel(ch, Y, assemble_holographic_matrix(z, refs)) @ F - np.eye(2)

        assert phase_grid_check(build, w, w_new).max() < 0.1
        np.testing.assert_allclose(np.abs(w_new), 1.0, atol=1e-12)


class TestPhaseSweep:
    def test_no_cascaded_path_keeps_phases(self, rng):
        ch, refs, F, w, theta = random_problem(rng)
        ch = ChannelSet(np.zeros_like(ch.H_hs), ch.H_su, ch.H_hu)
        state = BeamformerState(F, w, theta, tuple(refs))
        np.testing.assert_array_equal(update_tris_phases(ch, state), theta)

    def test_real_positive_coupling_gives_pi(self):
        ch = ChannelSet(np.ones((1, 1), complex), np.ones((1, 1), complex), np.zeros((1, 1), complex))
        state = BeamformerState(np.array([[-2.0 + 0j]]), np.array([1.0 + 0j]), np.zeros(1),
                                (np.ones((1, 1), complex),))
        assert update_tris_phases(ch, state)[0] == pytest.approx(np.pi)

    @pytest.mark.parametrize("Q, K", [(1, 8), (2, 4)])
    def test_against_phase_grid(self, rng, Q, K):
        ch, refs, F, w, theta = random_problem(rng, S=2, N=3, L=1, Q=Q, K=K, I=2)
        state = BeamformerState(F, w, theta, tuple(refs), 1.3)
        theta_new = update_tris_phases(ch, state)
        M = assemble_holographic_matrix(w, refs)

        def build(z):
            return 1.3 * effective_channel(ch, np.diag(z), M) @ F - np.eye(2)

        assert phase_grid_check(build, np.exp(1j * theta), np.exp(1j * theta_new)).max() < 0.1
        assert np.all((theta_new >= 0) & (theta_new < 2 * np.pi))


class TestAdaptiveGainSweep:
    def test_descends_and_ends_at_optimal_gain(self, rng):
        ch, refs, F, w, theta = random_problem(rng, S=2, N=6, L=2, Q=1, K=6, I=2)
        sigma2 = 0.05
        state = BeamformerState(F, w, theta, tuple(refs), 0.2)
        before = full_mse(ch, refs, F, w, theta, sigma2, state.gain)
        w_new = update_holographic_weights(ch, state.upsilon, state, sigma2=sigma2)
        mid = full_mse(ch, refs, F, w_new, theta, sigma2, state.gain)
        state.w = w_new
        theta_new = update_tris_phases(ch, state, sigma2=sigma2)
        after = full_mse(ch, refs, F, w_new, theta_new, sigma2, state.gain)
        assert after <= mid <= before
        # gain equals its closed-form optimum for the final T
        T = effective_channel(ch, np.exp(1j * theta_new), assemble_holographic_matrix(w_new, refs)) @ F
        g_opt = np.conj(np.trace(T)) / (np.vdot(T, T).real + 2 * sigma2)
        assert state.gain == pytest.approx(g_opt, rel=1e-9)

    def test_matches_fixed_gain_sweep_without_noise_argument(self, rng):
        A, B, z = crandn(rng, 2, 5), crandn(rng, 5, 2), np.exp(2j * np.pi * rng.random(5))
        z1, g1 = coordinate_sweep(A, B, z, 0.0, gain=1.0)
        assert g1 == 1.0
        assert not np.allclose(z1, z)


def _joint_converge(ch, state, rounds=2000):
    """Alternate full weight and phase sweeps until neither block moves."""
    for _ in range(rounds):
        w = update_holographic_weights(ch, state.upsilon, state)
        moved = np.max(np.abs(w - state.w))
        state.w = w
        theta = update_tris_phases(ch, state)
        moved = max(moved, np.max(np.abs(np.exp(1j * theta) - np.exp(1j * state.theta))))
        state.theta = theta
        if moved < 1e-12:
            return
    raise AssertionError("coordinate descent did not settle")


class TestCoordinateOptimality:
    def test_plus_minus_one_degree(self, rng):
        ch, refs, F, w, theta = random_problem(rng, S=1, N=6, L=2, Q=1, K=6, I=2)
        state = BeamformerState(F, w, theta, tuple(refs))
        _joint_converge(ch, state)
        base = full_mse(ch, refs, F, state.w, state.theta, 0.0)
        rot = np.exp(1j * np.radians(1.0))
        for i in range(state.w.size):
            for r in (rot, rot.conj()):
                w2 = state.w.copy()
                w2[i] *= r
                assert full_mse(ch, refs, F, w2, state.theta, 0.0) >= base * (1 - 1e-12)
        for k in range(state.theta.size):
            for d in (1.0, -1.0):
                t2 = state.theta.copy()
                t2[k] += np.radians(d)
                assert full_mse(ch, refs, F, state.w, t2, 0.0) >= base * (1 - 1e-12)


class TestEstimator:
    @pytest.mark.parametrize("mode", ["common", "none"])
    def test_monotone_feasible(self, mode):
        cfg, ch, refs = physical_instance(3, num_satellites=2, channel_case="II")
        est = HolographicMMSEBeamformer(noise_power=noise_power(cfg), receive_gain=mode,
                                        max_outer_iters=40, rel_tol=0, random_state=0)
        est.fit(ch, refs)
        m = np.array(est.trace_.mse)
        assert np.all(m[1:] <= m[:-1] * (1 + 1e-9))
        assert np.vdot(est.precoder_, est.precoder_).real <= 200 * (1 + 1e-9)
        assert np.max(np.abs(np.abs(est.weights_) - 1)) <= 1e-12
        assert est.trace_.iterations <= 40 and est.trace_.termination in ("max-iters", "tolerance")

    def test_degenerate(self):
        cfg, ch, refs = physical_instance(0)
        zero = ChannelSet(ch.H_hs, np.zeros_like(ch.H_su), np.zeros_like(ch.H_hu))
        sigma2 = 0.25
        est = HolographicMMSEBeamformer(noise_power=sigma2, random_state=0).fit(zero, refs)
        assert est.degenerate_ and est.n_iter_ == 0
        assert not est.precoder_.any()
        assert est.trace_.mse == [pytest.approx(2 + 2 * sigma2)]

    def test_beats_random_search(self):
        cfg, ch, refs = physical_instance(11, channel_case="IV")
        sigma2 = noise_power(cfg)
        state, trace = optimize(ch, cfg, refs, rng=np.random.default_rng(0))
        oracle = random_search_oracle(ch, refs, cfg.total_power, sigma2,
                                      np.random.default_rng(1), samples=300)
        assert trace.mse[-1] <= oracle

    def test_deterministic(self):
        cfg, ch, refs = physical_instance(5)
        a, ta = optimize(ch, cfg, refs, rng=np.random.default_rng(4))
        b, tb = optimize(ch, cfg, refs, rng=np.random.default_rng(4))
        np.testing.assert_array_equal(a.F, b.F)
        np.testing.assert_array_equal(a.w, b.w)
        np.testing.assert_array_equal(a.theta, b.theta)
        assert ta.mse == tb.mse

    def test_init_state_respected(self):
        cfg, ch, refs = physical_instance(5)
        init = BeamformerState(None, np.ones(8, complex), np.zeros(8), tuple(refs))
        est = HolographicMMSEBeamformer(max_outer_iters=0).fit(ch, refs, init=init)
        np.testing.assert_array_equal(est.weights_, np.ones(8))

    def test_sklearn_api(self):
        est = HolographicMMSEBeamformer(total_power=10.0, random_state=3)
        params = est.get_params()
        assert params["total_power"] == 10.0 and params["receive_gain"] == "common"
        twin = clone(est).set_params(max_outer_iters=5)
        assert twin.max_outer_iters == 5 and est.max_outer_iters == 100
        cfg, ch, refs = physical_instance(2)
        with pytest.raises(NotFittedError):
            est.predict(ch)
        est.fit(ch, refs)
        assert est.predict(ch).shape == (2, 2)
        assert est.score(ch) == pytest.approx(np.sum(np.log2(1 + est.sinr(ch))))

    def test_accepts_matrix_triple(self, rng):
        ch, refs, *_ = random_problem(rng)
        est = HolographicMMSEBeamformer(noise_power=0.1, max_outer_iters=3, random_state=0)
        est.fit((ch.H_hs, ch.H_su, ch.H_hu), refs)
        assert est.precoder_.shape == (2, 2)

    def test_rejects_bad_inputs(self, rng):
        ch, refs, *_ = random_problem(rng)
        with pytest.raises(ValueError):
            HolographicMMSEBeamformer(receive_gain="bogus").fit(ch, refs)
        with pytest.raises(ValueError):
            HolographicMMSEBeamformer().fit(ch, refs[:0])
        with pytest.raises(ValueError):
            HolographicMMSEBeamformer().fit(ch, [np.ones((3, 2))])

    def test_trace_csv(self, tmp_path):
        cfg, ch, refs = physical_instance(1)
        _, trace = optimize(ch, cfg.replace(max_outer_iters=3), refs, rng=np.random.default_rng(0))
        trace.to_csv(tmp_path / "trace.csv")
        lines = (tmp_path / "trace.csv").read_text().splitlines()
        assert lines[0] == "iteration,mse" and len(lines) == len(trace.mse) + 1
