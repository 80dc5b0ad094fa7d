"""Shared builders for test instances.

All tests use unit-gain channels (no pathloss) with noise power 1 and a
uniform beamformer at p_max = K, which puts typical SINRs in an
interference-limited, numerically comfortable range.
"""

from dataclasses import replace

import numpy as np

from bdris import (SystemConfig, equivalent_channel, generate_channels_from_gains,
                   init_beamformer_uniform, parse_architecture_tag,
                   random_feasible, update_fp_state)


def make_config(n_users=2, n_tx=2, n_elements=4, n_groups=2, noise_power=1.0,
                **overrides) -> SystemConfig:
    defaults = dict(n_tx=n_tx, n_users=n_users, n_elements=n_elements,
                    n_groups=n_groups, p_max=float(n_users),
                    noise_power=noise_power)
    defaults.update(overrides)
    return SystemConfig(**defaults)


def config_for_tag(tag: str, n_users=4, n_tx=4, n_elements=8, **overrides):
    config = make_config(n_users=n_users, n_tx=n_tx, n_elements=n_elements,
                         n_groups=1, **overrides)
    _, group_size = parse_architecture_tag(tag, config.n_elements)
    return replace(config, n_groups=config.n_elements // group_size)


def make_instance(seed, n_users=2, n_tx=2, n_elements=4, n_groups=2,
                  **overrides):
    """(config, channels, theta, beam) with unit link gains."""
    config = make_config(n_users=n_users, n_tx=n_tx, n_elements=n_elements,
                         n_groups=n_groups, **overrides)
    channels = generate_channels_from_gains(config, 1.0, 1.0, seed=seed)
    theta = random_feasible(config, seed=seed + 1)
    beam = init_beamformer_uniform(config)
    return config, channels, theta, beam


def fp_at(theta, channels, beam, config):
    """Closed-form optimal auxiliaries at the given point."""
    eq = equivalent_channel(theta, channels)
    return update_fp_state(eq, beam, config.noise_power), eq


def random_fp_state(rng: np.random.Generator, n_users: int):
    """Arbitrary feasible auxiliaries (tau >= 0, y complex)."""
    from bdris import FpState
    tau = rng.uniform(0.0, 5.0, n_users)
    y = rng.standard_normal(n_users) + 1j * rng.standard_normal(n_users)
    return FpState(tau=tau, y=y * rng.uniform(0.0, 1.0))
