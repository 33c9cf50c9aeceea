"""Fast invariant checks runnable from the command line.

Each check re-derives a small known answer by hand or by an independent
brute-force route and asserts the library reproduces it. The suite covers
every module and finishes in a few seconds; it is the CLI's `selftest`
subcommand and a smoke test for installations.
"""

from __future__ import annotations

import math
import tempfile
import traceback
from pathlib import Path

import numpy as np

from . import bench, baselines, channel, completion, cten, tensor_ops
from .seeding import derive_rng


def _check_unfold_enumeration():
    # t[i, j, k] = i + 2j + 4k; mode-1 columns ordered with j fastest
    t = np.fromfunction(lambda i, j, k: i + 2 * j + 4 * k, (2, 2, 2))
    m = tensor_ops.unfold(t.astype(complex), 1)
    assert np.array_equal(m[0].real, [0, 2, 4, 6]), m[0]
    assert np.array_equal(m[1].real, [1, 3, 5, 7]), m[1]


def _check_fold_roundtrip():
    rng = derive_rng(7, "selftest-fold")
    x = rng.standard_normal((3, 4, 5)) + 1j * rng.standard_normal((3, 4, 5))
    for mode in (1, 2, 3):
        back = tensor_ops.fold(tensor_ops.unfold(x, mode), mode, x.shape)
        assert np.array_equal(back, x)


def _check_mode_product_identity():
    rng = derive_rng(7, "selftest-modeprod")
    x = rng.standard_normal((4, 3, 2)) + 1j * rng.standard_normal((4, 3, 2))
    for mode, n in zip((1, 2, 3), x.shape):
        assert np.allclose(tensor_ops.mode_product(x, np.eye(n), mode), x,
                           atol=1e-14)


def _check_hosvd_full_rank():
    rng = derive_rng(7, "selftest-hosvd")
    x = rng.standard_normal((4, 5, 6)) + 1j * rng.standard_normal((4, 5, 6))
    model = tensor_ops.truncated_hosvd(x, (4, 5, 6))
    err = np.linalg.norm(tensor_ops.tucker_reconstruct(model) - x)
    assert err <= 1e-12 * np.linalg.norm(x)


def _check_cp_scaling_invariance():
    rng = derive_rng(7, "selftest-cp")
    factors = tuple(rng.standard_normal((d, 3)) + 1j * rng.standard_normal((d, 3))
                    for d in (4, 5, 6))
    ref = tensor_ops.cp_reconstruct(tensor_ops.CPModel(3, factors))
    a, b, c = (f.copy() for f in factors)
    a[:, 1] *= 2.5
    c[:, 1] /= 2.5
    scaled = tensor_ops.cp_reconstruct(tensor_ops.CPModel(3, (a, b, c)))
    assert np.linalg.norm(scaled - ref) <= 1e-12 * np.linalg.norm(ref)


def _check_frobenius():
    x = np.zeros((2, 2, 2), dtype=complex)
    assert tensor_ops.frobenius_norm(x) == 0.0
    x[0, 0, 0] = 3 + 4j
    assert abs(tensor_ops.frobenius_norm(x) - 5.0) <= 1e-12


def _check_steering():
    assert np.allclose(channel.steering_vector(4, 0.0), np.ones(4))
    assert np.allclose(channel.steering_vector(2, np.pi / 2), [1, -1])


def _check_all_ones_channel():
    spec = channel.ChannelSpec(3, 4, 5, n_paths=1)
    params = channel.MultipathParams(
        angles_rx=np.array([0.0]), angles_tx=np.array([0.0]),
        gains=np.array([1.0 + 0.0j]), delays=np.array([0.0]))
    h = channel._specular_tensor(spec.dims, params)
    assert np.allclose(h, np.ones(spec.dims), atol=1e-14)


def _check_mask_counts():
    rng = derive_rng(7, "selftest-mask")
    m = channel.generate_mask("random", 0.10, (32, 32, 128), rng)
    assert m.count == round(0.10 * 131072) == 13107, m.count
    m = channel.generate_mask("comb", 0.25, (4, 4, 64))
    assert sorted(set(m.indices[:, 2])) == list(range(0, 64, 4))
    assert m.realized_rho == 0.25
    for pattern in ("random", "grid", "comb"):
        m = channel.generate_mask(pattern, 1.0, (3, 4, 5), rng)
        assert m.count == 60


def _check_observe_noiseless():
    rng = derive_rng(7, "selftest-observe")
    spec = channel.ChannelSpec(4, 4, 8, n_paths=2)
    h, _ = channel.generate_channel(spec, rng)
    mask = channel.generate_mask("random", 0.5, spec.dims, rng)
    obs = channel.observe(h, mask, math.inf)
    assert np.array_equal(obs.y, np.where(mask.mask, h, 0))
    obs = channel.observe(h, mask, 10.0, rng)
    expected = (np.linalg.norm(h.ravel()) ** 2 / h.size) / 10.0
    assert abs(obs.noise_var - expected) <= 1e-15
    assert np.all(obs.y[~mask.mask] == 0)


def _check_completion_full_observation():
    rng = derive_rng(7, "selftest-complete")
    u = [np.linalg.qr(rng.standard_normal((d, r))
                      + 1j * rng.standard_normal((d, r)))[0]
         for d, r in zip((6, 6, 8), (2, 2, 2))]
    core = rng.standard_normal((2, 2, 2)) + 1j * rng.standard_normal((2, 2, 2))
    h = np.einsum("abc,ia,jb,kc->ijk", core, *u, optimize=True)
    mask = channel.generate_mask("comb", 1.0, h.shape)
    obs = channel.observe(h, mask, math.inf)
    res = completion.tucker_complete(
        obs, completion.TuckerCompletionConfig(ranks=(2, 2, 2)))
    assert bench.nmse(res.estimate, h) <= 1e-10
    assert res.iterations == 1 and res.converged


def _check_observed_nmse():
    rng = derive_rng(7, "selftest-onmse")
    spec = channel.ChannelSpec(4, 4, 8, n_paths=2)
    h, _ = channel.generate_channel(spec, rng)
    mask = channel.generate_mask("random", 0.5, spec.dims, rng)
    obs = channel.observe(h, mask, math.inf)
    assert completion.observed_nmse(obs.y, obs) == 0.0
    assert abs(completion.observed_nmse(np.zeros_like(h), obs) - 1.0) <= 1e-12


def _check_ls_identity():
    rng = derive_rng(7, "selftest-ls")
    spec = channel.ChannelSpec(4, 4, 8, n_paths=2)
    h, _ = channel.generate_channel(spec, rng)
    mask = channel.generate_mask("random", 0.4, spec.dims, rng)
    obs = channel.observe(h, mask, math.inf)
    est = baselines.ls_estimate(obs)
    assert np.array_equal(est, obs.y)
    observed_fraction = np.linalg.norm(h[mask.mask]) ** 2 \
        / np.linalg.norm(h.ravel()) ** 2
    assert abs(bench.nmse(est, h) - (1 - observed_fraction)) <= 1e-12


def _check_lmmse_identity_cov():
    rng = derive_rng(7, "selftest-lmmse")
    spec = channel.ChannelSpec(4, 4, 16, n_paths=2)
    h, _ = channel.generate_channel(spec, rng)
    mask = channel.generate_mask("random", 0.5, spec.dims, rng)
    obs = channel.observe(h, mask, math.inf)
    cov = baselines.FrequencyCovariance(r_f=np.eye(16, dtype=complex),
                                        n_train=2)
    est = baselines.lmmse_estimate(obs, cov)
    assert np.allclose(est, obs.y, atol=1e-9)


def _check_dictionary_coherence():
    d = baselines.build_angular_dictionary(8, 8, 16, 16)
    gram = np.abs(d.a_rx.conj().T @ d.a_rx) / 8
    np.fill_diagonal(gram, 0.0)
    assert gram.max() <= 0.999


def _check_nmse_trivials():
    rng = derive_rng(7, "selftest-nmse")
    h = rng.standard_normal((3, 3, 3)) + 1j * rng.standard_normal((3, 3, 3))
    assert bench.nmse(h, h) == 0.0
    assert abs(bench.nmse(np.zeros_like(h), h) - 1.0) <= 1e-15
    assert abs(bench.nmse(2 * h, h) - 1.0) <= 1e-12


def _check_dof():
    assert bench.dof_tucker((2, 2, 3), (32, 32, 128)) == 524
    assert bench.dof_tucker((15, 15, 16), (32, 32, 128)) == 6608
    assert bench.dof_cp(5, (32, 32, 128)) == 960


def _check_threshold_step():
    rhos = [0.01, 0.02, 0.05, 0.10]
    means = [1.0, 0.5, 0.009, 0.001]
    assert bench.extract_threshold(rhos, means) == 0.05
    assert bench.extract_threshold(rhos, [1.0] * 4) is None


def _check_record_counting():
    cfg = bench.ExperimentConfig(
        experiment_id="selftest", dims=(4, 4, 8), n_paths=(2,),
        pilot_ratios=(0.3, 0.5, 0.8), snr_dbs=(10.0,),
        estimators=(bench.EstimatorSpec("ls"),
                    bench.EstimatorSpec("tucker", {"ranks": (2, 2, 2)})),
        mc_runs=2)
    records = bench.run_monte_carlo(cfg)
    assert len(records) == 12, len(records)


def _check_results_roundtrip():
    records = [bench.RunRecord("ls", 0.1, 10.0, 5, 0, 0.5, bench.nmse_db(0.5),
                               0, 0.01, 123)]
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "r.csv"
        bench.write_results(records, path, "csv")
        back = bench.read_results(path)
    assert len(back) == 1 and back[0].nmse == 0.5 and back[0].seed == 123


def _check_cten_roundtrip():
    rng = derive_rng(7, "selftest-cten")
    x = rng.standard_normal((3, 4, 5)) + 1j * rng.standard_normal((3, 4, 5))
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "x.cten"
        cten.write_cten(path, x)
        back = cten.read_cten(path)
    assert np.array_equal(back, x)


CHECKS = [
    ("tensor-core/unfold-enumeration", _check_unfold_enumeration),
    ("tensor-core/fold-roundtrip", _check_fold_roundtrip),
    ("tensor-core/mode-product-identity", _check_mode_product_identity),
    ("tensor-core/hosvd-full-rank", _check_hosvd_full_rank),
    ("tensor-core/cp-scaling-invariance", _check_cp_scaling_invariance),
    ("tensor-core/frobenius", _check_frobenius),
    ("channel-sim/steering", _check_steering),
    ("channel-sim/all-ones-channel", _check_all_ones_channel),
    ("channel-sim/mask-counts", _check_mask_counts),
    ("channel-sim/observe", _check_observe_noiseless),
    ("completion/full-observation", _check_completion_full_observation),
    ("completion/observed-nmse", _check_observed_nmse),
    ("baselines/ls-identity", _check_ls_identity),
    ("baselines/lmmse-identity-cov", _check_lmmse_identity_cov),
    ("baselines/dictionary-coherence", _check_dictionary_coherence),
    ("bench/nmse-trivials", _check_nmse_trivials),
    ("bench/dof", _check_dof),
    ("bench/threshold-step", _check_threshold_step),
    ("bench/record-counting", _check_record_counting),
    ("bench/results-roundtrip", _check_results_roundtrip),
    ("bench/cten-roundtrip", _check_cten_roundtrip),
]


def run_selftest(report=None) -> list[tuple[str, bool, str]]:
    """Run every check; returns (name, passed, detail) triples."""
    results = []
    for name, fn in CHECKS:
        try:
            fn()
            results.append((name, True, ""))
        except Exception:  # noqa: BLE001 - report, don't crash
            results.append((name, False, traceback.format_exc(limit=3)))
        if report is not None:
            ok = results[-1][1]
            report(f"{'PASS' if ok else 'FAIL'} {name}")
    return results
