"""Command-line front end.

Subcommands: simulate, complete, exp1, exp2, exp4, export-hybrid, selftest.
Machine-readable summaries go to stdout (single JSON object per command);
progress and diagnostics go to stderr. Exit codes: 0 success, 1 validation
error, 2 runtime failure.

Experiment subcommands accept ``--config FILE`` (JSON object whose keys
match the flag names with underscores); explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bench
from .baselines import (build_angular_dictionary, estimate_frequency_covariance,
                        lmmse_estimate, ls_estimate, somp_estimate)
from .channel import (MASK_PATTERNS, ChannelSpec, Observation, PilotMask,
                      generate_channel, generate_mask, generate_rich_channel,
                      observe)
from .completion import (CPCompletionConfig, TuckerCompletionConfig,
                         cp_wals_complete, tucker_complete)
from .cten import DTYPE_MASK, read_cten, write_cten
from .seeding import DEFAULT_BASE_SEED, derive_rng
from .selftest import run_selftest

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


class ValidationFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the CLI contract reserves 2 for runtime
    # failures and 1 for validation.
    def error(self, message):
        raise ValidationFailure(message)


def _progress(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v != "")
    except ValueError as exc:
        raise ValidationFailure(f"bad numeric list {text!r}") from exc


def _parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v != "")
    except ValueError as exc:
        raise ValidationFailure(f"bad integer list {text!r}") from exc


def _parse_ranks(text: str) -> tuple[int, int, int]:
    parts = _parse_ints(text)
    if len(parts) != 3 or min(parts) < 1:
        raise ValidationFailure(
            f"--ranks expects three positive integers a,b,c, got {text!r}")
    return parts


def _check_ratio(value: float, name: str = "--pilot-ratio") -> float:
    if not 0.0 < value <= 1.0:
        raise ValidationFailure(f"{name} must be in (0, 1], got {value}")
    return value


def _parse_snr(text: str) -> float:
    if text.lower() in ("inf", "+inf", "none"):
        return math.inf
    try:
        return float(text)
    except ValueError as exc:
        raise ValidationFailure(f"bad --snr-db value {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tensorce",
                     description="Pilot-limited MIMO channel estimation via "
                                 "low-rank tensor completion")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[], help="generate H/Y/M files")
    sim.add_argument("--nr", type=int, default=32)
    sim.add_argument("--nt", type=int, default=32)
    sim.add_argument("--nf", type=int, default=128)
    sim.add_argument("--paths", type=int, default=5)
    sim.add_argument("--pilot-ratio", type=float, default=0.10)
    sim.add_argument("--snr-db", type=str, default="10")
    sim.add_argument("--mask", choices=MASK_PATTERNS, default="random")
    sim.add_argument("--diffuse-fraction", type=float, default=0.0)
    sim.add_argument("--seed", type=int, default=DEFAULT_BASE_SEED)
    sim.add_argument("--out", required=True, help="output directory")

    comp = sub.add_parser("complete",
                          help="run one estimator on simulate output")
    comp.add_argument("data_dir", help="directory with H/Y/M files")
    comp.add_argument("--method", required=True)
    comp.add_argument("--ranks", type=str, default=None)
    comp.add_argument("--cp-rank", type=int, default=None)
    comp.add_argument("--sparsity", type=int, default=None)
    comp.add_argument("--seed", type=int, default=DEFAULT_BASE_SEED)
    comp.add_argument("--out", default=None,
                      help="optional path for the estimate (.cten)")

    for name in ("exp1", "exp2", "exp4"):
        exp = sub.add_parser(name, help=f"run experiment {name[-1]}")
        exp.add_argument("--config", default=None,
                         help="JSON config file; flags override")
        exp.add_argument("--pilot-ratio", type=str, default=None,
                         help="comma list of pilot ratios")
        exp.add_argument("--snr-db", type=str, default=None,
                         help="comma list of SNRs in dB")
        exp.add_argument("--paths", type=str, default=None,
                         help="comma list of path counts")
        exp.add_argument("--mc-runs", type=int, default=None)
        exp.add_argument("--seed", type=int, default=None)
        exp.add_argument("--mask", choices=MASK_PATTERNS, default=None)
        exp.add_argument("--out", default=None)
        exp.add_argument("--format", choices=("csv", "json"), default=None)
        exp.add_argument("--jobs", type=int, default=1)

    exp_h = sub.add_parser("export-hybrid",
                           help="export a dataset for the neural stage")
    exp_h.add_argument("--out", required=True)
    exp_h.add_argument("--count", type=int, required=True)
    exp_h.add_argument("--nr", type=int, default=16)
    exp_h.add_argument("--nt", type=int, default=32)
    exp_h.add_argument("--nf", type=int, default=64)
    exp_h.add_argument("--paths", type=int, default=5)
    exp_h.add_argument("--diffuse-fraction", type=float, default=0.3)
    exp_h.add_argument("--pilot-ratio", type=str, default="0.08")
    exp_h.add_argument("--snr-db", type=str, default="10")
    exp_h.add_argument("--ranks", type=str, default="4,4,8")
    exp_h.add_argument("--mask", choices=MASK_PATTERNS, default="random")
    exp_h.add_argument("--seed", type=int, default=DEFAULT_BASE_SEED)

    sub.add_parser("selftest", help="run the built-in invariant suite")
    return parser


def _cmd_simulate(args) -> int:
    for dim, flag in ((args.nr, "--nr"), (args.nt, "--nt"), (args.nf, "--nf")):
        if dim < 1:
            raise ValidationFailure(f"{flag} must be >= 1")
    if args.paths < 1:
        raise ValidationFailure("--paths must be >= 1")
    _check_ratio(args.pilot_ratio)
    snr_db = _parse_snr(args.snr_db)
    if not 0.0 <= args.diffuse_fraction < 1.0:
        raise ValidationFailure("--diffuse-fraction must be in [0, 1)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = ChannelSpec(args.nr, args.nt, args.nf, n_paths=args.paths,
                       seed=args.seed)
    rng_channel = derive_rng(args.seed, "simulate", "channel")
    if args.diffuse_fraction > 0:
        truth = generate_rich_channel(spec, args.diffuse_fraction, rng_channel)
    else:
        truth, _ = generate_channel(spec, rng_channel)
    mask = generate_mask(args.mask, args.pilot_ratio, spec.dims,
                         derive_rng(args.seed, "simulate", "mask"))
    obs = observe(truth, mask, snr_db, derive_rng(args.seed, "simulate",
                                                  "noise"))
    write_cten(out / "H.cten", truth)
    write_cten(out / "Y.cten", obs.y)
    write_cten(out / "M.cten", mask.mask.astype(np.uint8), DTYPE_MASK)
    meta = {
        "dims": list(spec.dims), "n_paths": args.paths,
        "pilot_ratio": args.pilot_ratio, "rho_realized": mask.realized_rho,
        "mask_pattern": args.mask, "snr_db": "inf" if math.isinf(snr_db)
        else snr_db, "noise_var": obs.noise_var, "seed": args.seed,
        "diffuse_fraction": args.diffuse_fraction,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True)
                                   + "\n")
    _progress(f"wrote H/Y/M + meta.json to {out}")
    _emit({"out": str(out), "dims": list(spec.dims),
           "rho_realized": mask.realized_rho, "noise_var": obs.noise_var})
    return EXIT_OK


def _load_observation(data_dir: Path) -> tuple[np.ndarray | None, Observation, dict]:
    meta = json.loads((data_dir / "meta.json").read_text())
    y = read_cten(data_dir / "Y.cten").astype(np.complex128)
    mask_u8 = read_cten(data_dir / "M.cten")
    mask = PilotMask(pattern=meta.get("mask_pattern", "random"),
                     mask=mask_u8.astype(bool),
                     rho=float(meta.get("pilot_ratio", 1.0)))
    snr_db = meta.get("snr_db", "inf")
    snr_db = math.inf if snr_db == "inf" else float(snr_db)
    obs = Observation(y=y, mask=mask, noise_var=float(meta["noise_var"]),
                      snr_db=snr_db)
    truth_path = data_dir / "H.cten"
    truth = read_cten(truth_path).astype(np.complex128) \
        if truth_path.exists() else None
    return truth, obs, meta


def _cmd_complete(args) -> int:
    method = args.method
    if method not in bench.ESTIMATOR_NAMES:
        raise ValidationFailure(
            f"unknown --method {method!r}; valid: "
            f"{', '.join(bench.ESTIMATOR_NAMES)}")
    data_dir = Path(args.data_dir)
    if not (data_dir / "Y.cten").exists():
        raise ValidationFailure(f"no Y.cten under {data_dir}")
    truth, obs, meta = _load_observation(data_dir)
    n_paths = int(meta.get("n_paths", 1))
    iterations = 0
    if method == "ls":
        estimate = ls_estimate(obs)
    elif method == "lmmse":
        spec = ChannelSpec(*obs.dims, n_paths=n_paths,
                           seed=int(meta.get("seed", DEFAULT_BASE_SEED)))
        rng = derive_rng(spec.seed, "complete", "lmmse-train")
        train = [generate_channel(spec, rng)[0]
                 for _ in range(bench.LMMSE_DEFAULT_TRAIN)]
        estimate = lmmse_estimate(obs, estimate_frequency_covariance(train))
    elif method == "omp":
        sparsity = args.sparsity or n_paths
        dictionary = build_angular_dictionary(obs.dims[0], obs.dims[1])
        estimate = somp_estimate(obs, dictionary, sparsity)
        iterations = sparsity
    elif method == "tucker":
        if args.ranks is None:
            raise ValidationFailure("--method tucker requires --ranks a,b,c")
        ranks = _parse_ranks(args.ranks)
        for r, d in zip(ranks, obs.dims):
            if r > d:
                raise ValidationFailure(f"rank {r} exceeds dimension {d}")
        res = tucker_complete(obs, TuckerCompletionConfig(ranks=ranks))
        estimate, iterations = res.estimate, res.iterations
    else:
        rank = args.cp_rank or n_paths
        res = cp_wals_complete(obs, CPCompletionConfig(rank=rank),
                               derive_rng(args.seed, "complete", "cp"))
        estimate, iterations = res.estimate, res.sweeps
    payload = {"method": method, "iterations": iterations}
    if truth is not None:
        value = bench.nmse(estimate, truth)
        payload["nmse"] = value
        payload["nmse_db"] = bench.nmse_db(value)
    if args.out:
        write_cten(Path(args.out), estimate)
        payload["out"] = str(args.out)
    _emit(payload)
    return EXIT_OK


def _experiment_config(args, default_cfg) -> tuple[bench.ExperimentConfig, int]:
    overrides = {}
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationFailure(f"cannot read config {args.config}: {exc}")
        if not isinstance(file_cfg, dict):
            raise ValidationFailure("config file must hold a JSON object")
        allowed = {"pilot_ratios", "snr_dbs", "n_paths", "mc_runs",
                   "base_seed", "mask_pattern", "output_path"}
        unknown = set(file_cfg) - allowed
        if unknown:
            raise ValidationFailure(
                f"unknown config keys: {sorted(unknown)}; allowed: "
                f"{sorted(allowed)}")
        for key in ("pilot_ratios", "snr_dbs"):
            if key in file_cfg:
                overrides[key] = tuple(float(v) for v in file_cfg[key])
        if "n_paths" in file_cfg:
            overrides["n_paths"] = tuple(int(v) for v in file_cfg["n_paths"])
        for key in ("mc_runs", "base_seed"):
            if key in file_cfg:
                overrides[key] = int(file_cfg[key])
        for key in ("mask_pattern", "output_path"):
            if key in file_cfg:
                overrides[key] = file_cfg[key]
    if args.pilot_ratio is not None:
        ratios = _parse_floats(args.pilot_ratio)
        overrides["pilot_ratios"] = tuple(_check_ratio(r) for r in ratios)
    if args.snr_db is not None:
        overrides["snr_dbs"] = tuple(_parse_snr(v)
                                     for v in args.snr_db.split(","))
    if args.paths is not None:
        paths = _parse_ints(args.paths)
        if min(paths) < 1:
            raise ValidationFailure("--paths values must be >= 1")
        overrides["n_paths"] = paths
    if args.mc_runs is not None:
        if args.mc_runs < 1:
            raise ValidationFailure("--mc-runs must be >= 1")
        overrides["mc_runs"] = args.mc_runs
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.mask is not None:
        overrides["mask_pattern"] = args.mask
    if args.out is not None:
        overrides["output_path"] = args.out
    if args.jobs < 1:
        raise ValidationFailure("--jobs must be >= 1")
    try:
        cfg = default_cfg(**overrides)
    except ValueError as exc:
        raise ValidationFailure(str(exc))
    if args.format and cfg.output_path:
        suffix = ".json" if args.format == "json" else ".csv"
        if not str(cfg.output_path).endswith(suffix):
            raise ValidationFailure(
                f"--format {args.format} conflicts with output path "
                f"{cfg.output_path}")
    return cfg, args.jobs


def _curves_payload(curves: dict) -> dict:
    return {str(key): [[float(v) for v in row] for row in curve]
            for key, curve in curves.items()}


def _cmd_experiment(args, which: str) -> int:
    defaults = {"exp1": bench.default_experiment1_config,
                "exp2": bench.default_experiment2_config,
                "exp4": bench.default_experiment4_config}[which]
    cfg, jobs = _experiment_config(args, defaults)
    _progress(f"{which}: {len(cfg.sweep_points)} sweep points x "
              f"{cfg.mc_runs} runs, {len(cfg.estimators)} estimators")
    if which == "exp4":
        result = bench.experiment4(cfg, n_jobs=jobs)
        thresholds = bench.thresholds_as_dicts(result.thresholds)
        if cfg.output_path:
            tpath = Path(str(cfg.output_path) + ".thresholds.json")
            tpath.write_text(json.dumps(thresholds, indent=2, sort_keys=True)
                             + "\n")
            _progress(f"thresholds -> {tpath}")
        _emit({"experiment": which, "records": len(result.records),
               "out": cfg.output_path, "thresholds": thresholds})
    else:
        runner = bench.experiment1 if which == "exp1" else bench.experiment2
        result = runner(cfg, n_jobs=jobs)
        _emit({"experiment": which, "records": len(result.records),
               "out": cfg.output_path,
               "curves": _curves_payload(result.curves)})
    return EXIT_OK


def _cmd_export_hybrid(args) -> int:
    ratios = tuple(_check_ratio(r) for r in _parse_floats(args.pilot_ratio))
    snrs = tuple(_parse_snr(v) for v in args.snr_db.split(","))
    ranks = _parse_ranks(args.ranks)
    if args.count < 1:
        raise ValidationFailure("--count must be >= 1")
    if not 0.0 <= args.diffuse_fraction < 1.0:
        raise ValidationFailure("--diffuse-fraction must be in [0, 1)")
    cfg = bench.ExportConfig(
        dims=(args.nr, args.nt, args.nf), n_paths=args.paths,
        diffuse_fraction=args.diffuse_fraction,
        rho=ratios if len(ratios) > 1 else ratios[0],
        snr_db=snrs if len(snrs) > 1 else snrs[0],
        ranks=ranks, mask_pattern=args.mask, base_seed=args.seed)
    manifest = bench.export_hybrid_dataset(cfg, args.count, args.out)
    _progress(f"exported {args.count} samples to {args.out}")
    _emit({"out": str(args.out), "count": manifest["count"],
           "splits": {split: sum(1 for s in manifest["samples"]
                                 if s["split"] == split)
                      for split in ("train", "val", "test")}})
    return EXIT_OK


def _cmd_selftest() -> int:
    results = run_selftest(report=_progress)
    failed = [name for name, ok, _ in results if not ok]
    for name, ok, detail in results:
        if not ok:
            _progress(detail)
    _emit({"checks": len(results), "failed": failed})
    return EXIT_OK if not failed else EXIT_RUNTIME


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "complete":
            return _cmd_complete(args)
        if args.command in ("exp1", "exp2", "exp4"):
            return _cmd_experiment(args, args.command)
        if args.command == "export-hybrid":
            return _cmd_export_hybrid(args)
        if args.command == "selftest":
            return _cmd_selftest()
        raise ValidationFailure(f"unknown command {args.command!r}")
    except ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - runtime failures exit 2
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
