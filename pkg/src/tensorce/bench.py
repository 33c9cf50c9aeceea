"""Monte Carlo benchmark harness.

Experiment drivers sweep pilot ratio, SNR and path count over a roster of
estimators, feeding every estimator at a given (sweep point, run) the
identical observation (paired comparison). Seeds for channels, masks, noise
and solver restarts derive from (base_seed, experiment_id, sweep point,
run, purpose), so reruns are byte-identical and runs can execute in any
order or in parallel.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import (build_angular_dictionary, estimate_frequency_covariance,
                        lmmse_estimate, ls_estimate, somp_estimate)
from .channel import (ChannelSpec, Observation, generate_channel, generate_mask,
                      generate_rich_channel, observe)
from .completion import (CPCompletionConfig, TuckerCompletionConfig,
                         cp_wals_complete, reimpose_pilots, tucker_complete)
from .seeding import DEFAULT_BASE_SEED, derive_rng, derive_seed
from .tensor_ops import Dims3, as_tensor3, frobenius_norm

ESTIMATOR_NAMES = ("ls", "lmmse", "omp", "tucker", "cp")

DEFAULT_DIMS: Dims3 = (32, 32, 128)

EXP1_RHO_GRID = (0.02, 0.04, 0.06, 0.08, 0.10, 0.15, 0.20)
EXP2_SNR_GRID = (-5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
EXP4_RHO_GRID = (0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.08, 0.10, 0.12, 0.15,
                 0.18, 0.20, 0.22, 0.25)
EXP4_PATH_COUNTS = (2, 3, 5, 8, 10, 15)
EXP4_SNR_GRID = (10.0, 20.0, 30.0)

RECOVERY_NMSE = 1e-2

LMMSE_DEFAULT_TRAIN = 200

CSV_COLUMNS = ("estimator", "pilot_ratio", "snr_db", "n_paths", "run_index",
               "nmse", "nmse_db", "iterations", "wall_time_s", "seed")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


def nmse(est, truth) -> float:
    """Normalized MSE: ||est - truth||_F^2 / ||truth||_F^2."""
    est = as_tensor3(est)
    truth = as_tensor3(truth)
    _require(est.shape == truth.shape,
             f"shape mismatch {est.shape} vs {truth.shape}")
    ref = frobenius_norm(truth) ** 2
    _require(ref > 0.0, "truth tensor has zero norm")
    return frobenius_norm(est - truth) ** 2 / ref


def nmse_db(value: float) -> float:
    if value == 0.0:
        return -math.inf
    return 10.0 * math.log10(value)


def dof_cp(n_paths: int, dims: Dims3) -> int:
    """CP-style parameter count: L * (N_r + N_t + N_f)."""
    return int(n_paths) * int(sum(dims))


def dof_tucker(ranks: Dims3, dims: Dims3) -> int:
    """Tucker parameter count: core entries plus the three factor blocks."""
    r1, r2, r3 = (int(r) for r in ranks)
    n1, n2, n3 = (int(d) for d in dims)
    return r1 * r2 * r3 + r1 * n1 + r2 * n2 + r3 * n3


@dataclass(frozen=True)
class EstimatorSpec:
    """Roster entry: estimator name plus optional per-estimator parameters.

    Recognized parameters: ``ranks``/``max_iters``/``tol`` (tucker),
    ``rank``/``restarts``/``max_sweeps``/``ridge`` (cp), ``sparsity``/
    ``grid_rx``/``grid_tx`` (omp), ``n_train`` (lmmse). Parameters left
    unset default per-point: tucker ranks (L, L, min(L+1, N_f)), cp rank L,
    omp sparsity L.
    """

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        _require(self.name in ESTIMATOR_NAMES,
                 f"unknown estimator {self.name!r}; valid: "
                 f"{', '.join(ESTIMATOR_NAMES)}")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    dims: Dims3 = DEFAULT_DIMS
    n_paths: tuple[int, ...] = (5,)
    pilot_ratios: tuple[float, ...] = EXP1_RHO_GRID
    snr_dbs: tuple[float, ...] = (10.0,)
    estimators: tuple[EstimatorSpec, ...] = (EstimatorSpec("ls"),)
    mc_runs: int = 100
    base_seed: int = DEFAULT_BASE_SEED
    mask_pattern: str = "random"
    output_path: str | None = None
    reimpose_pilots: bool = False
    diffuse_fraction: float = 0.0

    def __post_init__(self):
        _require(self.mc_runs >= 1, "mc_runs must be >= 1")
        _require(len(self.pilot_ratios) > 0, "pilot_ratios must be non-empty")
        _require(len(self.snr_dbs) > 0, "snr_dbs must be non-empty")
        _require(len(self.n_paths) > 0, "n_paths must be non-empty")
        _require(len(self.estimators) > 0, "estimator roster must be non-empty")

    @property
    def sweep_points(self) -> list[tuple[int, float, float]]:
        """(L, snr_db, rho) triples, path-count major, pilot-ratio minor."""
        return [(l, s, r) for l in self.n_paths for s in self.snr_dbs
                for r in self.pilot_ratios]


@dataclass
class RunRecord:
    estimator: str
    pilot_ratio: float
    snr_db: float
    n_paths: int
    run_index: int
    nmse: float
    nmse_db: float
    iterations: int
    wall_time_s: float
    seed: int
    failed: bool = False   # serialized to JSON only; the CSV schema is fixed


@dataclass(frozen=True)
class ThresholdRecord:
    """Recovery threshold for one (SNR, L) pair; ``rho_min`` is None when the
    criterion is never met on the grid."""

    snr_db: float
    n_paths: int
    rho_min: float | None
    omega_min: int | None
    oversampling: float | None
    dof_cp: int
    dof_tucker: int


def _channel_for(cfg: ExperimentConfig, n_paths: int,
                 rng: np.random.Generator) -> np.ndarray:
    spec = ChannelSpec(*cfg.dims, n_paths=n_paths, seed=cfg.base_seed)
    if cfg.diffuse_fraction > 0.0:
        return generate_rich_channel(spec, cfg.diffuse_fraction, rng)
    return generate_channel(spec, rng)[0]


def _resolve_estimator(spec: EstimatorSpec, cfg: ExperimentConfig,
                       n_paths: int, resources: dict):
    """Bind one roster entry to a callable ``obs, rng -> (estimate, iterations)``."""
    p = spec.params
    n_f = cfg.dims[2]
    if spec.name == "ls":
        return lambda obs, rng: (ls_estimate(obs), 0)
    if spec.name == "lmmse":
        cov = resources[("lmmse_cov", n_paths)]
        return lambda obs, rng: (lmmse_estimate(obs, cov), 0)
    if spec.name == "omp":
        sparsity = int(p.get("sparsity") or n_paths)
        dictionary = build_angular_dictionary(
            cfg.dims[0], cfg.dims[1], p.get("grid_rx"), p.get("grid_tx"))
        return lambda obs, rng: (somp_estimate(obs, dictionary, sparsity),
                                 sparsity)
    if spec.name == "tucker":
        ranks = tuple(p.get("ranks") or
                      (n_paths, n_paths, min(n_paths + 1, n_f)))
        tcfg = TuckerCompletionConfig(
            ranks=ranks, max_iters=int(p.get("max_iters", 20)),
            tol=float(p.get("tol", 1e-6)))

        def run_tucker(obs, rng):
            res = tucker_complete(obs, tcfg)
            return res.estimate, res.iterations
        return run_tucker
    if spec.name == "cp":
        ccfg = CPCompletionConfig(
            rank=int(p.get("rank") or n_paths),
            restarts=int(p.get("restarts", 3)),
            max_sweeps=int(p.get("max_sweeps", 50)),
            tol=float(p.get("tol", 1e-4)),
            ridge=float(p.get("ridge", 1e-8)))

        def run_cp(obs, rng):
            res = cp_wals_complete(obs, ccfg, rng)
            return res.estimate, res.sweeps
        return run_cp
    raise ValueError(f"unknown estimator {spec.name!r}")


def _build_resources(cfg: ExperimentConfig) -> dict:
    """Precompute shared per-experiment assets (LMMSE training covariance)."""
    resources: dict = {}
    if any(s.name == "lmmse" for s in cfg.estimators):
        n_train = max(int(s.params.get("n_train", LMMSE_DEFAULT_TRAIN))
                      for s in cfg.estimators if s.name == "lmmse")
        for n_paths in cfg.n_paths:
            rng = derive_rng(cfg.base_seed, cfg.experiment_id, "lmmse-train",
                             n_paths)
            spec = ChannelSpec(*cfg.dims, n_paths=n_paths, seed=cfg.base_seed)
            train = [generate_channel(spec, rng)[0] for _ in range(n_train)]
            resources[("lmmse_cov", n_paths)] = \
                estimate_frequency_covariance(train)
    return resources


def observation_hash(obs: Observation) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(obs.y).tobytes())
    digest.update(np.ascontiguousarray(obs.mask.mask).tobytes())
    digest.update(repr((obs.noise_var, obs.snr_db)).encode())
    return digest.hexdigest()


def _run_one(cfg: ExperimentConfig, point: tuple[int, float, float],
             run_index: int, resources: dict) -> tuple[str, list[RunRecord]]:
    n_paths, snr_db, rho = point
    run_seed = derive_seed(cfg.base_seed, cfg.experiment_id, point, run_index)
    rng_channel = derive_rng(cfg.base_seed, cfg.experiment_id, point,
                             run_index, "channel")
    rng_mask = derive_rng(cfg.base_seed, cfg.experiment_id, point,
                          run_index, "mask")
    rng_noise = derive_rng(cfg.base_seed, cfg.experiment_id, point,
                           run_index, "noise")
    truth = _channel_for(cfg, n_paths, rng_channel)
    mask = generate_mask(cfg.mask_pattern, rho, cfg.dims, rng_mask)
    obs = observe(truth, mask, snr_db, rng_noise)
    obs_digest = observation_hash(obs)
    records = []
    for spec in cfg.estimators:
        fn = _resolve_estimator(spec, cfg, n_paths, resources)
        rng_est = derive_rng(cfg.base_seed, cfg.experiment_id, point,
                             run_index, "estimator", spec.name)
        start = time.perf_counter()
        try:
            estimate, iterations = fn(obs, rng_est)
            if cfg.reimpose_pilots:
                estimate = reimpose_pilots(estimate, obs)
            value = nmse(estimate, truth)
            failed = False
        except Exception as exc:  # noqa: BLE001 - failures become records
            warnings.warn(f"estimator {spec.name} failed at point {point} "
                          f"run {run_index}: {exc}")
            value, iterations, failed = math.nan, 0, True
        elapsed = time.perf_counter() - start
        records.append(RunRecord(
            estimator=spec.name, pilot_ratio=rho, snr_db=snr_db,
            n_paths=n_paths, run_index=run_index, nmse=value,
            nmse_db=nmse_db(value) if not math.isnan(value) else math.nan,
            iterations=iterations, wall_time_s=elapsed, seed=run_seed,
            failed=failed))
    return obs_digest, records


def run_monte_carlo(cfg: ExperimentConfig, n_jobs: int = 1,
                    return_hashes: bool = False):
    """Execute the full sweep; returns records in deterministic order
    (sweep point major, estimator middle, run index minor).

    With ``return_hashes=True`` also returns {(point, run): observation
    sha256} for paired-comparison verification.
    """
    resources = _build_resources(cfg)
    points = cfg.sweep_points
    tasks = [(point, run) for point in points for run in range(cfg.mc_runs)]
    results: dict = {}
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = {
                pool.submit(_run_one, cfg, point, run, resources): (point, run)
                for point, run in tasks
            }
            for future, key in futures.items():
                results[key] = future.result()
    else:
        for point, run in tasks:
            results[(point, run)] = _run_one(cfg, point, run, resources)
    records: list[RunRecord] = []
    hashes: dict = {}
    for point in points:
        per_estimator: dict[str, list[RunRecord]] = \
            {s.name: [] for s in cfg.estimators}
        for run in range(cfg.mc_runs):
            digest, run_records = results[(point, run)]
            hashes[(point, run)] = digest
            for rec in run_records:
                per_estimator[rec.estimator].append(rec)
        for spec in cfg.estimators:
            records.extend(per_estimator[spec.name])
    if return_hashes:
        return records, hashes
    return records


def mean_nmse_curve(records, estimator: str, sweep_field: str
                    ) -> list[tuple[float, float, float]]:
    """Per-sweep-value (value, mean linear NMSE, dB of the mean) for one
    estimator; failed runs count as NaN and poison the mean by design."""
    values: dict[float, list[float]] = {}
    for rec in records:
        if rec.estimator != estimator:
            continue
        values.setdefault(getattr(rec, sweep_field), []).append(rec.nmse)
    curve = []
    for value in sorted(values):
        mean = float(np.mean(values[value]))
        curve.append((value, mean, nmse_db(mean)))
    return curve


def extract_threshold(rhos, mean_nmses, criterion: float = RECOVERY_NMSE
                      ) -> float | None:
    """First grid pilot ratio whose mean NMSE meets the criterion, else None.
    No interpolation: the threshold is always a grid point."""
    _require(len(rhos) == len(mean_nmses), "grid/value length mismatch")
    for rho, value in zip(rhos, mean_nmses):
        if value <= criterion:
            return float(rho)
    return None


# ---------------------------------------------------------------------------
# Experiment drivers


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    config: ExperimentConfig
    records: list
    curves: dict   # estimator -> [(sweep value, mean nmse, mean nmse dB)]


@dataclass(frozen=True, eq=False)
class Experiment4Result:
    config: ExperimentConfig
    records: list
    curves: dict           # (snr_db, L) -> [(rho, mean nmse, mean nmse dB)]
    heatmap: dict          # snr_db -> array (len(n_paths), len(rho_grid))
    thresholds: list[ThresholdRecord]


def default_experiment1_config(**overrides) -> ExperimentConfig:
    base = ExperimentConfig(
        experiment_id="exp1",
        pilot_ratios=EXP1_RHO_GRID,
        snr_dbs=(10.0,),
        n_paths=(5,),
        estimators=(EstimatorSpec("ls"), EstimatorSpec("lmmse"),
                    EstimatorSpec("omp"),
                    EstimatorSpec("tucker", {"ranks": (4, 4, 6)})),
        mc_runs=500)
    return replace(base, **overrides) if overrides else base


def default_experiment2_config(**overrides) -> ExperimentConfig:
    base = ExperimentConfig(
        experiment_id="exp2",
        pilot_ratios=(0.08,),
        snr_dbs=EXP2_SNR_GRID,
        n_paths=(5,),
        estimators=(EstimatorSpec("ls"), EstimatorSpec("lmmse"),
                    EstimatorSpec("omp"),
                    EstimatorSpec("tucker", {"ranks": (5, 5, 6)}),
                    EstimatorSpec("cp", {"rank": 5})),
        mc_runs=500)
    return replace(base, **overrides) if overrides else base


def default_experiment4_config(**overrides) -> ExperimentConfig:
    base = ExperimentConfig(
        experiment_id="exp4",
        pilot_ratios=EXP4_RHO_GRID,
        snr_dbs=EXP4_SNR_GRID,
        n_paths=EXP4_PATH_COUNTS,
        estimators=(EstimatorSpec("tucker"),),   # per-point ranks (L, L, L+1)
        mc_runs=100,
        reimpose_pilots=True)
    return replace(base, **overrides) if overrides else base


def _finish_sweep_experiment(cfg: ExperimentConfig, sweep_field: str,
                             n_jobs: int) -> ExperimentResult:
    records = run_monte_carlo(cfg, n_jobs=n_jobs)
    curves = {spec.name: mean_nmse_curve(records, spec.name, sweep_field)
              for spec in cfg.estimators}
    if cfg.output_path:
        write_results(records, cfg.output_path,
                      _format_for_path(cfg.output_path))
    return ExperimentResult(config=cfg, records=records, curves=curves)


def experiment1(cfg: ExperimentConfig | None = None,
                n_jobs: int = 1) -> ExperimentResult:
    """NMSE versus pilot ratio on the specular channel at fixed SNR."""
    cfg = cfg or default_experiment1_config()
    return _finish_sweep_experiment(cfg, "pilot_ratio", n_jobs)


def experiment2(cfg: ExperimentConfig | None = None,
                n_jobs: int = 1) -> ExperimentResult:
    """NMSE versus SNR at fixed pilot ratio, CP against Tucker."""
    cfg = cfg or default_experiment2_config()
    return _finish_sweep_experiment(cfg, "snr_db", n_jobs)


def experiment4(cfg: ExperimentConfig | None = None,
                n_jobs: int = 1) -> Experiment4Result:
    """Recovery-threshold mapping over the (L, rho) plane.

    NMSE here is computed on the pilot-consistent estimate (observed entries
    re-imposed), which reproduces the published noise-limited behaviour at
    low SNR. Thresholds are grid points, never interpolated.
    """
    cfg = cfg or default_experiment4_config()
    records = run_monte_carlo(cfg, n_jobs=n_jobs)
    estimator = cfg.estimators[0].name
    curves = {}
    heatmap = {snr: np.full((len(cfg.n_paths), len(cfg.pilot_ratios)), np.nan)
               for snr in cfg.snr_dbs}
    thresholds: list[ThresholdRecord] = []
    grouped: dict = {}
    for rec in records:
        if rec.estimator != estimator:
            continue
        grouped.setdefault((rec.snr_db, rec.n_paths, rec.pilot_ratio),
                           []).append(rec.nmse)
    for si, snr in enumerate(cfg.snr_dbs):
        for li, n_paths in enumerate(cfg.n_paths):
            curve = []
            for ri, rho in enumerate(cfg.pilot_ratios):
                mean = float(np.mean(grouped[(snr, n_paths, rho)]))
                heatmap[snr][li, ri] = mean
                curve.append((rho, mean, nmse_db(mean)))
            curves[(snr, n_paths)] = curve
            rho_min = extract_threshold([c[0] for c in curve],
                                        [c[1] for c in curve])
            total = int(np.prod(cfg.dims))
            ranks = (n_paths, n_paths, min(n_paths + 1, cfg.dims[2]))
            omega_min = round(rho_min * total) if rho_min is not None else None
            denom = dof_cp(n_paths, cfg.dims)
            thresholds.append(ThresholdRecord(
                snr_db=snr, n_paths=n_paths, rho_min=rho_min,
                omega_min=omega_min,
                oversampling=(omega_min / denom
                              if omega_min is not None else None),
                dof_cp=denom, dof_tucker=dof_tucker(ranks, cfg.dims)))
    if cfg.output_path:
        write_results(records, cfg.output_path,
                      _format_for_path(cfg.output_path))
    return Experiment4Result(config=cfg, records=records, curves=curves,
                             heatmap=heatmap, thresholds=thresholds)


def thresholds_as_dicts(thresholds) -> list[dict]:
    out = []
    for t in thresholds:
        d = asdict(t)
        if t.rho_min is None:
            d["rho_min"] = "not reached"
            d["omega_min"] = "not reached"
            d["oversampling"] = "not reached"
        out.append(d)
    return out


# ---------------------------------------------------------------------------
# Result serialization


def _format_for_path(path) -> str:
    return "json" if str(path).endswith(".json") else "csv"


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results(records, path, fmt: str = "csv") -> None:
    """Write records to CSV (fixed column set) or JSON (adds the failure
    flag). Row order is preserved from the input (deterministic)."""
    _require(fmt in ("csv", "json"), f"format must be csv or json, got {fmt}")
    path = Path(path)
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(CSV_COLUMNS)
                for rec in records:
                    writer.writerow([_cell(getattr(rec, col))
                                     for col in CSV_COLUMNS])
        else:
            payload = {"records": [asdict(rec) for rec in records]}
            with open(path, "w") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_results(path) -> list[RunRecord]:
    """Round-trip reader for :func:`write_results` output."""
    path = Path(path)
    if _format_for_path(path) == "json":
        payload = json.loads(path.read_text())
        return [RunRecord(**rec) for rec in payload["records"]]
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(RunRecord(
                estimator=row["estimator"],
                pilot_ratio=float(row["pilot_ratio"]),
                snr_db=float(row["snr_db"]),
                n_paths=int(row["n_paths"]),
                run_index=int(row["run_index"]),
                nmse=float(row["nmse"]),
                nmse_db=float(row["nmse_db"]),
                iterations=int(row["iterations"]),
                wall_time_s=float(row["wall_time_s"]),
                seed=int(row["seed"])))
    return records


# ---------------------------------------------------------------------------
# Hybrid dataset export


@dataclass(frozen=True)
class ExportConfig:
    """Dataset export settings for the neural residual stage.

    ``rho`` and ``snr_db`` may be single values or lists; per-sample values
    are drawn from the given choices with a derived stream and recorded in
    the manifest.
    """

    dims: Dims3 = (16, 32, 64)
    n_paths: int = 5
    diffuse_fraction: float = 0.3
    rho: float | tuple[float, ...] = 0.08
    snr_db: float | tuple[float, ...] = 10.0
    ranks: Dims3 = (4, 4, 8)
    mask_pattern: str = "random"
    base_seed: int = DEFAULT_BASE_SEED
    max_iters: int = 20
    tol: float = 1e-6

    def rho_choices(self) -> tuple[float, ...]:
        return tuple(self.rho) if isinstance(self.rho, (tuple, list)) \
            else (float(self.rho),)

    def snr_choices(self) -> tuple[float, ...]:
        return tuple(self.snr_db) if isinstance(self.snr_db, (tuple, list)) \
            else (float(self.snr_db),)


def _split_for(index: int, count: int) -> str:
    train_end = math.floor(0.8 * count)
    val_end = math.floor(0.9 * count)
    if index < train_end:
        return "train"
    if index < val_end:
        return "val"
    return "test"


def export_hybrid_dataset(cfg: ExportConfig, count: int, out_dir) -> dict:
    """Write ``count`` samples of (truth, observation, mask, low-rank
    completion) plus per-sample metadata and a manifest with a fixed
    80/10/10 train/val/test split by sample index.

    Re-running with an identical config reproduces byte-identical files.
    """
    from .cten import DTYPE_MASK, write_cten

    _require(count >= 1, "count must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = ChannelSpec(*cfg.dims, n_paths=cfg.n_paths, seed=cfg.base_seed)
    tucker_cfg_base = dict(max_iters=cfg.max_iters, tol=cfg.tol)
    samples = []
    for index in range(count):
        rng_pick = derive_rng(cfg.base_seed, "hybrid-export", index, "pick")
        rho = float(rng_pick.choice(cfg.rho_choices()))
        snr_db = float(rng_pick.choice(cfg.snr_choices()))
        seeds = {
            "channel": derive_seed(cfg.base_seed, "hybrid-export", index,
                                   "channel"),
            "mask": derive_seed(cfg.base_seed, "hybrid-export", index, "mask"),
            "noise": derive_seed(cfg.base_seed, "hybrid-export", index,
                                 "noise"),
        }
        rng_channel = derive_rng(cfg.base_seed, "hybrid-export", index,
                                 "channel")
        rng_mask = derive_rng(cfg.base_seed, "hybrid-export", index, "mask")
        rng_noise = derive_rng(cfg.base_seed, "hybrid-export", index, "noise")
        truth = generate_rich_channel(spec, cfg.diffuse_fraction, rng_channel)
        mask = generate_mask(cfg.mask_pattern, rho, cfg.dims, rng_mask)
        obs = observe(truth, mask, snr_db, rng_noise)
        completion = tucker_complete(
            obs, TuckerCompletionConfig(ranks=cfg.ranks, **tucker_cfg_base))
        name = f"sample_{index:05d}"
        sample_dir = out_dir / name
        sample_dir.mkdir(exist_ok=True)
        write_cten(sample_dir / "H.cten", truth)
        write_cten(sample_dir / "Y.cten", obs.y)
        write_cten(sample_dir / "M.cten", mask.mask.astype(np.uint8),
                   DTYPE_MASK)
        write_cten(sample_dir / "HLR.cten", completion.estimate)
        meta = {
            "dims": list(cfg.dims),
            "n_paths": cfg.n_paths,
            "diffuse_fraction": cfg.diffuse_fraction,
            "rho": rho,
            "rho_realized": mask.realized_rho,
            "snr_db": snr_db,
            "noise_var": obs.noise_var,
            "seeds": seeds,
            "ranks": list(cfg.ranks),
            "iterations": completion.iterations,
            "nmse_lr": nmse(completion.estimate, truth),
            "nmse_lr_db": nmse_db(nmse(completion.estimate, truth)),
            "nmse_ls": nmse(obs.y, truth),
        }
        (sample_dir / "meta.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n")
        samples.append({
            "id": name,
            "path": name,
            "split": _split_for(index, count),
            "rho": rho,
            "snr_db": snr_db,
        })
    manifest = {
        "format_version": 1,
        "count": count,
        "dims": list(cfg.dims),
        "n_paths": cfg.n_paths,
        "diffuse_fraction": cfg.diffuse_fraction,
        "ranks": list(cfg.ranks),
        "base_seed": cfg.base_seed,
        "rho_values": list(cfg.rho_choices()),
        "snr_values": list(cfg.snr_choices()),
        "split_fractions": [0.8, 0.1, 0.1],
        "samples": samples,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
