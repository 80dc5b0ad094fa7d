import numpy as np
import pytest

from bdris import (BlockGradient, FpState, ScatteringMatrix,
                   euclidean_gradient, euclidean_gradient_diagonal_beam,
                   finite_difference_gradient,
                   finite_difference_objective_gradient,
                   penalized_objective)

from helpers import fp_at, make_instance


def rel_error(a: BlockGradient, b: BlockGradient) -> float:
    num = max(np.linalg.norm(x - y) for x, y in zip(a.grads, b.grads))
    den = max(max(np.linalg.norm(x) for x in a.grads), 1e-300)
    return num / den


def bent_copy(theta, rng, scale=0.2):
    stack = theta.block_stack()
    stack = stack + scale * (rng.standard_normal(stack.shape)
                             + 1j * rng.standard_normal(stack.shape))
    return ScatteringMatrix.from_block_stack(stack, theta.architecture)


class TestClosedForm:
    def test_zero_aux_symmetric_point_gives_zero(self):
        config, channels, theta, beam = make_instance(seed=0)
        fp = FpState(tau=np.zeros(2), y=np.zeros(2, dtype=complex))
        grad = euclidean_gradient(theta, fp, channels, beam, config)
        assert all(np.allclose(g, 0, atol=1e-14) for g in grad.grads)

    def test_zero_aux_reduces_to_penalty_gradient(self):
        rng = np.random.default_rng(1)
        config, channels, theta, beam = make_instance(seed=1)  # nu = 1
        bent = bent_copy(theta, rng)
        fp = FpState(tau=np.zeros(2), y=np.zeros(2, dtype=complex))
        grad = euclidean_gradient(bent, fp, channels, beam, config)
        for g, block in zip(grad.grads, bent.block_stack()):
            assert np.allclose(g, -4.0 * (block - block.T), atol=1e-13)

    def test_matches_finite_differences(self):
        config, channels, theta, beam = make_instance(seed=2, n_elements=4,
                                                      n_groups=2)
        fp, _ = fp_at(theta, channels, beam, config)
        cf = euclidean_gradient(theta, fp, channels, beam, config)
        fd = finite_difference_gradient(theta, fp, channels, beam, config,
                                        step=1e-6)
        assert rel_error(cf, fd) <= 1e-6

    def test_oracle_agreement_across_architectures(self):
        cases = [(2, 2, 1), (2, 4, 1), (2, 4, 2), (2, 4, 4), (2, 8, 2),
                 (4, 4, 4), (4, 8, 1), (4, 8, 2), (4, 8, 4), (4, 8, 8)]
        count = 0
        for seed_base, (k, r, group_size) in enumerate(cases * 2):
            config, channels, theta, beam = make_instance(
                seed=31 * seed_base, n_users=k, n_tx=k, n_elements=r,
                n_groups=r // group_size)
            fp, _ = fp_at(theta, channels, beam, config)
            cf = euclidean_gradient(theta, fp, channels, beam, config)
            fd = finite_difference_gradient(theta, fp, channels, beam, config,
                                            step=1e-6)
            assert rel_error(cf, fd) <= 1e-6
            count += 1
        assert count >= 20

    def test_directional_derivative_consistency(self):
        rng = np.random.default_rng(3)
        config, channels, theta, beam = make_instance(seed=3)
        fp, _ = fp_at(theta, channels, beam, config)
        grad = euclidean_gradient(theta, fp, channels, beam, config)
        direction = [rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
                     for g in grad.grads]
        predicted = sum(float(np.real(np.vdot(g, d)))
                        for g, d in zip(grad.grads, direction))
        f0 = penalized_objective(theta, fp, channels, beam, config)
        errors = []
        for t in (1e-4, 5e-5):
            stack = theta.block_stack() + t * np.stack(direction)
            moved = ScatteringMatrix.from_block_stack(stack, theta.architecture)
            f1 = penalized_objective(moved, fp, channels, beam, config)
            errors.append(abs((f1 - f0) - t * predicted))
        # first-order term dominates, remainder shrinks ~quadratically
        assert errors[0] <= 1e-5
        assert errors[1] <= errors[0] / 2.5


class TestDiagonalBeamFastPath:
    def test_uniform_allocation_matches_general(self):
        config, channels, theta, beam = make_instance(
            seed=4, n_users=4, n_tx=4, n_elements=8, n_groups=4, p_max=4.0)
        fp, _ = fp_at(theta, channels, beam, config)
        general = euclidean_gradient(theta, fp, channels, beam, config)
        power = np.full(4, config.p_max / 4)
        fast = euclidean_gradient_diagonal_beam(theta, fp, channels, power,
                                                config)
        assert rel_error(general, fast) <= 1e-12

    def test_single_user_matches_finite_differences(self):
        config, channels, theta, beam = make_instance(
            seed=5, n_users=1, n_tx=1, n_elements=2, n_groups=1, p_max=1.0)
        fp, _ = fp_at(theta, channels, beam, config)
        fast = euclidean_gradient_diagonal_beam(theta, fp, channels,
                                                np.array([1.0]), config)
        fd = finite_difference_gradient(theta, fp, channels, beam, config,
                                        step=1e-6)
        assert rel_error(fast, fd) <= 1e-6

    def test_zero_power_leaves_penalty_term(self):
        rng = np.random.default_rng(6)
        config, channels, theta, beam = make_instance(seed=6)
        bent = bent_copy(theta, rng)
        fp, _ = fp_at(theta, channels, beam, config)
        grad = euclidean_gradient_diagonal_beam(bent, fp, channels,
                                                np.zeros(2), config)
        for g, block in zip(grad.grads, bent.block_stack()):
            assert np.allclose(g, -4.0 * (block - block.T), atol=1e-13)

    def test_requires_fully_loaded(self):
        config, channels, theta, beam = make_instance(seed=7, n_users=2,
                                                      n_tx=3)
        fp, _ = fp_at(theta, channels, beam, config)
        with pytest.raises(ValueError):
            euclidean_gradient_diagonal_beam(theta, fp, channels,
                                             np.ones(2), config)


class TestFiniteDifferenceOracle:
    def test_quadratic_test_function(self):
        rng = np.random.default_rng(8)
        config, channels, theta, _ = make_instance(seed=8)
        target = [rng.standard_normal(b.shape) + 1j * rng.standard_normal(b.shape)
                  for b in theta.block_stack()]

        def objective(candidate):
            return -sum(np.linalg.norm(b - t) ** 2
                        for b, t in zip(candidate.block_stack(), target))

        fd = finite_difference_objective_gradient(objective, theta, step=1e-5)
        for g, b, t in zip(fd.grads, theta.block_stack(), target):
            assert np.allclose(g, 2.0 * (t - b), atol=1e-8)

    def test_exact_on_quadratic_objective(self):
        # The frozen-auxiliary objective is quadratic in every coordinate, so
        # central differences carry no truncation error even at coarse steps.
        config, channels, theta, beam = make_instance(seed=9)
        fp, _ = fp_at(theta, channels, beam, config)
        cf = euclidean_gradient(theta, fp, channels, beam, config)
        fd = finite_difference_gradient(theta, fp, channels, beam, config,
                                        step=1e-2)
        assert max(np.linalg.norm(a - b)
                   for a, b in zip(cf.grads, fd.grads)) <= 1e-10

    def test_second_order_accuracy_on_cubic(self):
        # Truncation error needs a third derivative to show; use Re tr(X^3),
        # whose ascent gradient is 3 (X^2)^H.
        config, channels, theta, _ = make_instance(seed=9)

        def objective(candidate):
            return sum(float(np.real(np.trace(b @ b @ b)))
                       for b in candidate.block_stack())

        exact = [3.0 * (b @ b).conj().T for b in theta.block_stack()]
        errors = []
        for step in (2e-3, 1e-3):
            fd = finite_difference_objective_gradient(objective, theta, step)
            errors.append(max(np.linalg.norm(a - b)
                              for a, b in zip(exact, fd.grads)))
        ratio = errors[0] / errors[1]
        assert 3.0 <= ratio <= 5.0  # ~4x for halved step

    def test_penalty_only_objective(self):
        rng = np.random.default_rng(10)
        config, channels, theta, _ = make_instance(seed=10)
        bent = bent_copy(theta, rng)
        nu = 1.7

        def objective(candidate):
            from bdris import penalty
            return -nu * penalty(candidate)

        fd = finite_difference_objective_gradient(objective, bent, step=1e-6)
        for g, block in zip(fd.grads, bent.block_stack()):
            assert np.allclose(g, -4.0 * nu * (block - block.T), atol=1e-7)

    def test_rejects_nonpositive_step(self):
        config, channels, theta, beam = make_instance(seed=11)
        fp, _ = fp_at(theta, channels, beam, config)
        with pytest.raises(ValueError):
            finite_difference_gradient(theta, fp, channels, beam, config, 0.0)
