import numpy as np
import pytest

from bdris import (Architecture, Beamformer, ScatteringMatrix,
                   equivalent_channel, generate_channels_from_gains,
                   group_slice, init_beamformer_mmse, init_beamformer_uniform,
                   parse_architecture_tag, sinr, sum_rate)
from bdris.system import EquivalentChannel, infer_architecture

from helpers import make_config, make_instance


def identity_theta(config):
    return ScatteringMatrix(
        theta=np.eye(config.n_elements, dtype=complex),
        architecture=infer_architecture(config.n_elements, config.group_size),
        group_size=config.group_size)


class TestScatteringMatrix:
    def test_rejects_off_block_entries(self):
        theta = np.ones((4, 4), dtype=complex)
        with pytest.raises(ValueError, match="off-block"):
            ScatteringMatrix(theta=theta, architecture=Architecture.GROUP_CONNECTED,
                             group_size=2)

    def test_tag_consistency(self):
        theta = np.eye(4, dtype=complex)
        with pytest.raises(ValueError):
            ScatteringMatrix(theta=theta,
                             architecture=Architecture.SINGLE_CONNECTED,
                             group_size=2)
        with pytest.raises(ValueError):
            ScatteringMatrix(theta=theta,
                             architecture=Architecture.FULLY_CONNECTED,
                             group_size=2)

    def test_block_roundtrip(self):
        config, channels, theta, beam = make_instance(seed=0, n_elements=6,
                                                      n_groups=3)
        rebuilt = ScatteringMatrix.from_block_stack(theta.block_stack(),
                                                    theta.architecture)
        assert np.array_equal(rebuilt.theta, theta.theta)
        assert rebuilt.n_groups == 3
        assert np.array_equal(theta.block(2), theta.theta[2:4, 2:4])
        with pytest.raises(ValueError):
            theta.block(0)

    def test_parse_tags(self):
        assert parse_architecture_tag("sc", 8) == (Architecture.SINGLE_CONNECTED, 1)
        assert parse_architecture_tag("gc4", 8) == (Architecture.GROUP_CONNECTED, 4)
        assert parse_architecture_tag("fc", 8) == (Architecture.FULLY_CONNECTED, 8)
        with pytest.raises(ValueError):
            parse_architecture_tag("gc3", 8)
        with pytest.raises(ValueError):
            parse_architecture_tag("mesh", 8)


class TestEquivalentChannel:
    def test_identity_scattering(self):
        config, channels, _, _ = make_instance(seed=1)
        eq = equivalent_channel(identity_theta(config), channels)
        assert np.allclose(eq.e, channels.h_rx @ channels.h_tx, atol=1e-13)

    def test_matches_dense_triple_product(self):
        config, channels, theta, _ = make_instance(seed=2, n_elements=4,
                                                   n_groups=2)
        eq = equivalent_channel(theta, channels)
        dense = channels.h_rx @ theta.theta @ channels.h_tx
        assert np.allclose(eq.e, dense, atol=1e-12)
        assert np.allclose(eq.omega, theta.theta @ channels.h_tx, atol=1e-13)

    def test_diagonal_phases_scale_rows(self):
        config = make_config(n_elements=2, n_groups=2)
        channels = generate_channels_from_gains(config, 1.0, 1.0, seed=5)
        phases = np.exp(1j * np.array([0.3, -1.2]))
        theta = ScatteringMatrix(theta=np.diag(phases),
                                 architecture=Architecture.SINGLE_CONNECTED,
                                 group_size=1)
        eq = equivalent_channel(theta, channels)
        assert np.allclose(eq.omega, phases[:, None] * channels.h_tx, atol=1e-13)

    def test_linear_in_theta(self):
        config, channels, theta_a, _ = make_instance(seed=3)
        _, _, theta_b, _ = make_instance(seed=4)
        combined = ScatteringMatrix(theta=theta_a.theta + theta_b.theta,
                                    architecture=theta_a.architecture,
                                    group_size=theta_a.group_size)
        e_sum = (equivalent_channel(theta_a, channels).e
                 + equivalent_channel(theta_b, channels).e)
        assert np.allclose(equivalent_channel(combined, channels).e, e_sum,
                           atol=1e-12)

    def test_shape_mismatch(self):
        config, channels, _, _ = make_instance(seed=0)
        other = make_config(n_elements=8, n_groups=2)
        _, bigger, theta8, _ = make_instance(seed=0, n_elements=8, n_groups=2)
        with pytest.raises(ValueError):
            equivalent_channel(theta8, channels)


class TestGroupSlice:
    def test_single_group_returns_everything(self):
        config, channels, theta, _ = make_instance(seed=6, n_elements=4,
                                                   n_groups=1)
        h, w = group_slice(channels, theta, 1)
        assert np.array_equal(h, channels.h_rx)
        assert np.array_equal(w, channels.h_tx)

    def test_scalar_groups(self):
        config, channels, theta, _ = make_instance(seed=7, n_elements=4,
                                                   n_groups=4)
        h, w = group_slice(channels, theta, 3)
        assert h.shape == (config.n_users, 1)
        assert w.shape == (1, config.n_tx)

    def test_reconstruction_and_row_sum(self):
        config, channels, theta, _ = make_instance(seed=8, n_elements=6,
                                                   n_groups=2)
        eq = equivalent_channel(theta, channels)
        parts = []
        h_cat, w_cat = [], []
        for g in range(1, theta.n_groups + 1):
            h, w = group_slice(channels, theta, g)
            h_cat.append(h)
            w_cat.append(w)
            parts.append(h @ theta.block(g) @ w)
        assert np.allclose(sum(parts), eq.e, atol=1e-12)
        assert np.array_equal(np.hstack(h_cat), channels.h_rx)
        assert np.array_equal(np.vstack(w_cat), channels.h_tx)

    def test_out_of_range(self):
        config, channels, theta, _ = make_instance(seed=9)
        with pytest.raises(ValueError):
            group_slice(channels, theta, 0)
        with pytest.raises(ValueError):
            group_slice(channels, theta, theta.n_groups + 1)


class TestRates:
    def test_single_user_no_interference(self):
        config, channels, theta, beam = make_instance(seed=10, n_users=1,
                                                      n_tx=1, n_elements=2,
                                                      n_groups=1,
                                                      noise_power=0.5)
        eq = equivalent_channel(theta, channels)
        expected = abs(eq.e[0] @ beam.v[:, 0]) ** 2 / 0.5
        assert sinr(eq, beam, 0.5, 0) == pytest.approx(expected, rel=1e-12)

    def test_zero_beam_column(self):
        config, channels, theta, beam = make_instance(seed=11)
        v = beam.v.copy()
        v[:, 0] = 0
        beam2 = Beamformer(v=v, power_budget=beam.power_budget)
        eq = equivalent_channel(theta, channels)
        assert sinr(eq, beam2, config.noise_power, 0) == 0.0

    def test_two_user_scalar_oracle(self):
        config, channels, theta, beam = make_instance(seed=12)
        eq = equivalent_channel(theta, channels)
        n0 = config.noise_power
        for k in range(2):
            c = [eq.e[k] @ beam.v[:, i] for i in range(2)]
            expected = abs(c[k]) ** 2 / (abs(c[1 - k]) ** 2 + n0)
            assert sinr(eq, beam, n0, k) == pytest.approx(expected, rel=1e-12)

    def test_sinr_phase_invariance(self):
        config, channels, theta, beam = make_instance(seed=13)
        eq = equivalent_channel(theta, channels)
        rotated = EquivalentChannel(e=np.exp(1j * 0.7) * eq.e, omega=eq.omega)
        for k in range(config.n_users):
            assert sinr(rotated, beam, 1.0, k) == pytest.approx(
                sinr(eq, beam, 1.0, k), rel=1e-12)

    def test_sum_rate_zero_when_no_signal(self):
        config, channels, theta, beam = make_instance(seed=14)
        beam0 = Beamformer(v=np.zeros_like(beam.v), power_budget=beam.power_budget)
        eq = equivalent_channel(theta, channels)
        assert sum_rate(eq, beam0, config.noise_power) == 0.0

    def test_sum_rate_unit_sinr(self):
        config = make_config(n_users=1, n_tx=1, n_elements=2, n_groups=1,
                             p_max=1.0)
        eq = EquivalentChannel(e=np.array([[1.0 + 0j]]),
                               omega=np.zeros((2, 1), dtype=complex))
        beam = Beamformer(v=np.array([[1.0 + 0j]]), power_budget=1.0)
        assert sum_rate(eq, beam, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_sum_rate_matches_per_user_sum(self):
        config, channels, theta, beam = make_instance(seed=15)
        eq = equivalent_channel(theta, channels)
        total = sum(np.log2(1 + sinr(eq, beam, 1.0, k)) for k in range(2))
        assert sum_rate(eq, beam, 1.0) == pytest.approx(total, rel=1e-12)

    def test_zero_phase_single_connected_equals_direct_product(self):
        config, channels, _, beam = make_instance(seed=16, n_elements=4,
                                                  n_groups=4)
        theta = ScatteringMatrix(theta=np.eye(4, dtype=complex),
                                 architecture=Architecture.SINGLE_CONNECTED,
                                 group_size=1)
        eq = equivalent_channel(theta, channels)
        direct = EquivalentChannel(e=channels.h_rx @ channels.h_tx,
                                   omega=channels.h_tx)
        assert sum_rate(eq, beam, 1.0) == pytest.approx(
            sum_rate(direct, beam, 1.0), rel=1e-12)


class TestBeamformers:
    def test_uniform_fully_loaded_identity(self):
        config = make_config(n_users=4, n_tx=4, n_elements=4, n_groups=2,
                             p_max=4.0)
        beam = init_beamformer_uniform(config)
        assert np.allclose(beam.v, np.eye(4), atol=1e-15)

    def test_uniform_two_user(self):
        config = make_config(p_max=1.0)
        beam = init_beamformer_uniform(config)
        assert np.allclose(beam.v, np.diag([np.sqrt(0.5), np.sqrt(0.5)]),
                           atol=1e-15)

    def test_uniform_exact_power(self):
        config = make_config(n_users=3, n_tx=5, n_elements=4, n_groups=2,
                             p_max=2.7)
        beam = init_beamformer_uniform(config)
        assert np.linalg.norm(beam.v) ** 2 == pytest.approx(2.7, rel=1e-14)
        assert beam.v.shape == (5, 3)

    def test_power_budget_enforced(self):
        with pytest.raises(ValueError, match="power"):
            Beamformer(v=np.eye(2, dtype=complex), power_budget=1.0)

    def test_mmse_identity_channel(self):
        config = make_config(n_users=2, n_tx=2, p_max=2.0, noise_power=1e-9)
        eq = EquivalentChannel(e=np.eye(2, dtype=complex),
                               omega=np.zeros((4, 2), dtype=complex))
        beam = init_beamformer_mmse(eq, config)
        assert np.allclose(beam.v, np.eye(2), atol=1e-6)

    def test_mmse_power_normalization(self):
        config, channels, theta, _ = make_instance(seed=17, p_max=3.0)
        eq = equivalent_channel(theta, channels)
        beam = init_beamformer_mmse(eq, config)
        assert np.linalg.norm(beam.v) ** 2 == pytest.approx(3.0, abs=1e-10)

    def test_mmse_matches_direct_solve(self):
        config, channels, theta, _ = make_instance(seed=18)
        eq = equivalent_channel(theta, channels)
        beam = init_beamformer_mmse(eq, config)
        e = eq.e
        reg = config.n_users * config.noise_power / config.p_max
        raw = e.conj().T @ np.linalg.inv(e @ e.conj().T + reg * np.eye(2))
        expected = raw * np.sqrt(config.p_max) / np.linalg.norm(raw)
        assert np.allclose(beam.v, expected, atol=1e-12)
