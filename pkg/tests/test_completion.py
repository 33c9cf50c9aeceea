"""Tucker alternating-projection and CP weighted-ALS completion."""

import math

import numpy as np
import pytest

from tensorce import (ChannelSpec, CPCompletionConfig, CPModel,
                      TuckerCompletionConfig, cp_reconstruct,
                      cp_wals_complete, generate_channel, generate_mask,
                      nmse, observe, observed_nmse, reimpose_pilots,
                      tucker_complete, unfold)
from tensorce.seeding import derive_rng


def exact_rank_tensor(dims, ranks, seed):
    """Ground-truth oracle: tensor regenerated from known random factors."""
    rng = derive_rng(seed, "exact-rank-oracle")
    factors = [np.linalg.qr(rng.standard_normal((d, r))
                            + 1j * rng.standard_normal((d, r)))[0]
               for d, r in zip(dims, ranks)]
    core = rng.standard_normal(ranks) + 1j * rng.standard_normal(ranks)
    x = np.einsum("abc,ia,jb,kc->ijk", core, *factors, optimize=True)
    return x, core, factors


def observed(h, rho, snr_db, seed, pattern="random"):
    mask = generate_mask(pattern, rho, h.shape, derive_rng(seed, "mask"))
    return observe(h, mask, snr_db, derive_rng(seed, "noise"))


class TestTuckerComplete:
    def test_full_observation_exact_rank_single_iteration(self):
        h, _, _ = exact_rank_tensor((6, 6, 10), (2, 2, 3), 3)
        obs = observed(h, 1.0, math.inf, 3)
        res = tucker_complete(obs, TuckerCompletionConfig(ranks=(2, 2, 3)))
        assert nmse(res.estimate, h) <= 1e-10
        assert res.iterations == 1
        assert res.converged

    def test_exact_rank_half_observed_noiseless(self):
        # regenerate the truth from its known factors and demand the
        # iteration recover it; convergence takes tens of iterations here
        h, core, factors = exact_rank_tensor((8, 8, 16), (2, 2, 3), 5)
        regenerated = np.einsum("abc,ia,jb,kc->ijk", core, *factors,
                                optimize=True)
        assert np.array_equal(h, regenerated)
        obs = observed(h, 0.5, math.inf, 5)
        res = tucker_complete(
            obs, TuckerCompletionConfig(ranks=(2, 2, 3), max_iters=100))
        assert nmse(res.estimate, regenerated) <= 1e-6
        assert res.converged

    def test_all_zero_observation_degenerate(self):
        mask = generate_mask("random", 0.5, (4, 4, 8), derive_rng(7, "m"))
        obs = observe(np.zeros((4, 4, 8), dtype=complex), mask, math.inf)
        res = tucker_complete(obs, TuckerCompletionConfig(ranks=(2, 2, 2)))
        assert not res.estimate.any()
        assert res.converged and res.iterations == 0

    def test_data_consistency_every_iteration(self):
        spec = ChannelSpec(8, 8, 16, n_paths=3)
        h, _ = generate_channel(spec, derive_rng(11, "h"))
        obs = observed(h, 0.3, 10.0, 11)
        seen = []

        def check(t, x_hat, x_cons, delta):
            seen.append(delta)
            assert np.array_equal(x_cons[obs.mask.mask], obs.y[obs.mask.mask])

        tucker_complete(obs, TuckerCompletionConfig(ranks=(3, 3, 4)), check)
        assert seen and all(np.isfinite(seen))

    def test_iterate_multilinear_ranks_bounded(self):
        spec = ChannelSpec(8, 8, 16, n_paths=3)
        h, _ = generate_channel(spec, derive_rng(13, "h"))
        obs = observed(h, 0.4, 20.0, 13)
        ranks = (2, 3, 3)

        def check(t, x_hat, x_cons, delta):
            for mode, r in zip((1, 2, 3), ranks):
                s = np.linalg.svd(unfold(x_hat, mode), compute_uv=False)
                if r < len(s):
                    assert s[r] <= 1e-9 * s[0]

        tucker_complete(obs, TuckerCompletionConfig(ranks=ranks), check)

    def test_delta_sequence_and_exit_by_budget(self):
        spec = ChannelSpec(16, 16, 32, n_paths=4)
        h, _ = generate_channel(spec, derive_rng(17, "h"))
        obs = observed(h, 0.1, 10.0, 17)
        deltas = []
        res = tucker_complete(
            obs, TuckerCompletionConfig(ranks=(4, 4, 5)),
            lambda t, xh, xc, d: deltas.append(d))
        assert res.iterations <= 20
        assert len(deltas) == res.iterations
        assert all(np.isfinite(deltas))
        # the change sequence decays after the opening transient
        assert deltas[-1] <= deltas[1]

    def test_returns_projection_not_consistent_iterate(self):
        spec = ChannelSpec(8, 8, 16, n_paths=2)
        h, _ = generate_channel(spec, derive_rng(19, "h"))
        obs = observed(h, 0.3, 10.0, 19)
        res = tucker_complete(obs, TuckerCompletionConfig(ranks=(2, 2, 3)))
        # pilots are NOT re-imposed on the returned estimate
        assert not np.array_equal(res.estimate[obs.mask.mask],
                                  obs.y[obs.mask.mask])
        fixed = reimpose_pilots(res.estimate, obs)
        assert np.array_equal(fixed[obs.mask.mask], obs.y[obs.mask.mask])

    def test_rank_exceeding_dims_rejected(self):
        spec = ChannelSpec(4, 4, 8, n_paths=2)
        h, _ = generate_channel(spec, derive_rng(23, "h"))
        obs = observed(h, 0.5, math.inf, 23)
        with pytest.raises(ValueError):
            tucker_complete(obs, TuckerCompletionConfig(ranks=(5, 2, 2)))

    def test_determinism(self):
        spec = ChannelSpec(8, 8, 16, n_paths=3)
        h, _ = generate_channel(spec, derive_rng(29, "h"))
        obs = observed(h, 0.3, 10.0, 29)
        cfg = TuckerCompletionConfig(ranks=(3, 3, 4))
        r1 = tucker_complete(obs, cfg)
        r2 = tucker_complete(obs, cfg)
        assert np.array_equal(r1.estimate, r2.estimate)
        assert r1.iterations == r2.iterations


class TestCpWals:
    def test_exact_cp_rank_full_observation(self):
        rng = derive_rng(31, "cp-truth")
        factors = tuple(rng.standard_normal((d, 2))
                        + 1j * rng.standard_normal((d, 2))
                        for d in (6, 6, 10))
        h = cp_reconstruct(CPModel(rank=2, factors=factors))
        obs = observed(h, 1.0, math.inf, 31)
        res = cp_wals_complete(obs, CPCompletionConfig(rank=2, restarts=3),
                               derive_rng(31, "cp-init"))
        assert nmse(res.estimate, h) <= 1e-8
        assert res.best_fit <= 1e-8
        assert not res.diverged

    def test_objective_monotone_within_restart(self):
        spec = ChannelSpec(8, 8, 16, n_paths=3)
        h, _ = generate_channel(spec, derive_rng(37, "h"))
        obs = observed(h, 0.4, 15.0, 37)
        traces = []
        cp_wals_complete(obs,
                         CPCompletionConfig(rank=3, restarts=2, max_sweeps=30),
                         derive_rng(37, "cp-init"), fit_trace=traces)
        assert len(traces) == 2
        for trace in traces:
            assert len(trace) >= 2
            for prev, cur in zip(trace, trace[1:]):
                assert cur <= prev * (1 + 1e-10)

    def test_scaling_invariance_of_returned_model(self):
        spec = ChannelSpec(6, 6, 12, n_paths=2)
        h, _ = generate_channel(spec, derive_rng(41, "h"))
        obs = observed(h, 0.5, 20.0, 41)
        res = cp_wals_complete(obs, CPCompletionConfig(rank=2),
                               derive_rng(41, "cp-init"))
        a2, b2, c2 = (f.copy() for f in res.model.factors)
        alpha, beta = 2.0 + 1.0j, -0.5j
        a2[:, 1] *= alpha
        b2[:, 1] *= beta
        c2[:, 1] /= alpha * beta
        rescaled = cp_reconstruct(CPModel(rank=2, factors=(a2, b2, c2)))
        assert np.linalg.norm(rescaled - res.estimate) \
            <= 1e-12 * np.linalg.norm(res.estimate)

    def test_row_with_no_observations_zeroed(self):
        rng = derive_rng(43, "cp-empty")
        h = rng.standard_normal((6, 6, 8)) + 1j * rng.standard_normal((6, 6, 8))
        mask = generate_mask("random", 0.5, h.shape, derive_rng(43, "m"))
        # blank out receive row 2 entirely
        mask.mask[2, :, :] = False
        obs = observe(h, mask, math.inf)
        res = cp_wals_complete(obs, CPCompletionConfig(rank=2, restarts=1),
                               derive_rng(43, "cp-init"))
        assert np.all(res.model.factors[0][2] == 0)
        assert np.all(res.estimate[2] == 0)

    def test_best_restart_selected_by_observed_fit(self):
        spec = ChannelSpec(8, 8, 16, n_paths=2)
        h, _ = generate_channel(spec, derive_rng(47, "h"))
        obs = observed(h, 0.3, 20.0, 47)
        res = cp_wals_complete(obs, CPCompletionConfig(rank=2, restarts=4),
                               derive_rng(47, "cp-init"))
        assert res.best_fit == min(res.restart_fits)
        assert abs(observed_nmse(res.estimate, obs) - res.best_fit) <= 1e-9

    def test_determinism(self):
        spec = ChannelSpec(6, 6, 12, n_paths=2)
        h, _ = generate_channel(spec, derive_rng(53, "h"))
        obs = observed(h, 0.4, 10.0, 53)
        cfg = CPCompletionConfig(rank=2, restarts=2)
        r1 = cp_wals_complete(obs, cfg, derive_rng(53, "cp-init"))
        r2 = cp_wals_complete(obs, cfg, derive_rng(53, "cp-init"))
        assert np.array_equal(r1.estimate, r2.estimate)
        assert r1.restart_fits == r2.restart_fits


class TestObservedNmse:
    @pytest.fixture()
    def obs(self):
        spec = ChannelSpec(6, 6, 8, n_paths=2)
        h, _ = generate_channel(spec, derive_rng(59, "h"))
        return observed(h, 0.5, math.inf, 59)

    def test_zero_for_matching_pilots(self, obs):
        est = np.where(obs.mask.mask, obs.y, 123.0 + 0j)
        assert observed_nmse(est, obs) == 0.0

    def test_one_for_zero_estimate(self, obs):
        assert abs(observed_nmse(np.zeros(obs.dims, complex), obs) - 1.0) \
            <= 1e-12

    def test_constant_offset_closed_form(self, obs):
        c = 0.7 - 0.2j
        est = obs.y + c * obs.mask.mask.astype(complex)
        expected = (abs(c) ** 2 * obs.mask.count
                    / np.linalg.norm(obs.y[obs.mask.mask]) ** 2)
        assert abs(observed_nmse(est, obs) - expected) <= 1e-12 * expected

    def test_zero_pilot_energy_rejected(self):
        mask = generate_mask("random", 0.5, (4, 4, 4), derive_rng(61, "m"))
        empty = observe(np.zeros((4, 4, 4), complex), mask, math.inf)
        with pytest.raises(ValueError):
            observed_nmse(np.zeros((4, 4, 4), complex), empty)
