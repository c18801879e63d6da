"""Command-line interface: ``holdpp {params,verify,train,sample,plot,sweep}``.

Exit codes: 0 ok, 1 failed check, 2 usage error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import subprocess
import sys
from dataclasses import asdict, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, data, dynamics, linalg, pipeline, score, sde, verify
from .plotting import scatter_svg, trajectory_svg

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("holdpp")


class UsageError(Exception):
    pass


def version_string() -> str:
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True, text=True, timeout=5,
        )
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def resolve_seed(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("HOLDPP_SEED")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"HOLDPP_SEED={env!r} is not an integer") from exc
    return 0


def read_config_file(path) -> dict:
    """``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def write_manifest(out_path, subcommand: str, config: dict, seed: int, started: datetime, extra=None) -> Path:
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "version": version_string(),
    }
    if extra:
        manifest.update(extra)
    path = Path(f"{out_path}.manifest.json")
    data.atomic_write(path, (json.dumps(manifest, indent=2, default=_json_default) + "\n").encode())
    return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# -- subcommands -------------------------------------------------------------


def cmd_params(args) -> int:
    if args.n < 2:
        raise UsageError("params needs --n >= 2 (critical damping is defined for order 2 and up)")
    spec = dynamics.critical_params(args.n)
    F, _ = dynamics.build_drift(spec)
    eig = linalg.eigenvalues(F)
    print(f"order n       = {spec.n}")
    print(f"lambda*       = {spec.lambda_star:.15g}")
    print(f"xi            = {spec.xi:.15g}")
    for k, g in enumerate(spec.gammas, 1):
        print(f"gamma_{k:<7d} = {g:.15g}")
    print(f"max|eig - lambda*| (float64) = {np.max(np.abs(eig - spec.lambda_star)):.3e}")
    return EXIT_OK


def cmd_verify(args) -> int:
    suites = []
    if args.all or args.spectral:
        suites.append("spectral")
    if args.all or args.dynamics:
        suites.append("dynamics")
    if args.all or args.optimality:
        suites.append("optimality")
    if not suites:
        raise UsageError("choose at least one of --spectral, --dynamics, --optimality, --all")
    results = verify.run(suites, args.n_max)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}")
        return EXIT_CHECK
    print(f"all {len(results)} checks passed")
    return EXIT_OK


TRAIN_KEYS = {f.name for f in fields(score.TrainConfig)} | {"dataset", "n", "count", "hidden", "data_seed"}


def train_settings(args) -> dict:
    defaults = asdict(score.TrainConfig())
    defaults.update(dataset="eight_gaussians", n=3, count=pipeline.TRAIN_COUNT, hidden="128,128,128", data_seed=1)
    file_cfg = read_config_file(args.config) if args.config else {}
    unknown = set(file_cfg) - TRAIN_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    merged = {**defaults, **file_cfg}
    for key in TRAIN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    try:
        for key in ("T", "l_inv", "alpha", "lr", "lr_final", "t_eps"):
            merged[key] = float(merged[key])
        for key in ("batch", "iters", "n", "count", "data_seed", "log_every"):
            merged[key] = int(merged[key])
    except ValueError as exc:
        raise UsageError(f"bad config value: {exc}") from exc
    # --seed, then the config file, then HOLDPP_SEED, then 0
    if args.seed is None and "seed" in file_cfg:
        merged["seed"] = int(file_cfg["seed"])
    else:
        merged["seed"] = resolve_seed(args.seed)
    return merged


def cmd_train(args) -> int:
    started = datetime.now(timezone.utc)
    s = train_settings(args)
    hidden = tuple(int(x) for x in str(s["hidden"]).split(","))
    cfg_fields = {f.name for f in fields(score.TrainConfig)}
    try:
        cfg = score.TrainConfig(**{k: s[k] for k in cfg_fields})
        spec = dynamics.default_spec(s["n"], cfg.l_inv)
        ds = data.make_dataset(s["dataset"], s["count"], s["data_seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    net = score.ScoreNet.create(spec.n, ds.h, hidden=hidden, seed=cfg.seed, T=cfg.T)
    net, trace = score.train(net, spec, ds.points, cfg)
    extra = {
        "dataset": ds.name,
        "data_seed": s["data_seed"],
        "norm_mean": ",".join(repr(float(x)) for x in ds.mean),
        "norm_scale": ",".join(repr(float(x)) for x in ds.scale),
    }
    data.save_checkpoint(net, spec, cfg, args.out, extra)
    if args.data_out:
        data.write_csv(args.data_out, ds.denormalize(ds.points[: args.data_rows]))
    every = max(cfg.log_every, 1)
    curve = [float(np.mean(trace[i : i + every])) for i in range(0, len(trace), every)]
    write_manifest(args.out, "train", s, cfg.seed, started, {"loss_curve": curve, "outputs": [str(args.out)]})
    print(f"wrote {args.out} (final loss {curve[-1] if curve else float('nan'):.5f})")
    return EXIT_OK


def _load(args):
    net, spec, cfg, extra = data.load_checkpoint(args.ckpt)
    try:
        data.check_compatible(net, spec, getattr(args, "n", None))
    except data.CheckpointError as exc:
        raise UsageError(str(exc)) from exc
    mean = np.array([float(x) for x in extra.get("norm_mean", "").split(",") if x] or [0.0] * net.h)
    scale = np.array([float(x) for x in extra.get("norm_scale", "").split(",") if x] or [1.0] * net.h)
    return net, spec, cfg, extra, mean, scale


def cmd_sample(args) -> int:
    started = datetime.now(timezone.utc)
    seed = resolve_seed(args.seed)
    net, spec, cfg, extra, mean, scale = _load(args)
    rcfg = sde.ReverseConfig(steps=args.steps, t_end=cfg.T, t_eps=cfg.t_eps, seed=seed)
    state = sde.em_reverse(spec, score.score_fn(net), rcfg, np.random.default_rng(seed), (args.count, net.h))
    samples = state[:, 0, :]
    data.write_csv(args.out, samples * scale + mean)
    report = {}
    if extra.get("dataset") in data.DATASETS and args.evaluate:
        ds = data.Dataset(extra["dataset"], np.zeros((1, net.h)), mean, scale)
        report = pipeline.evaluate(samples, ds)
    config = {"ckpt": str(args.ckpt), "count": args.count, "steps": args.steps, "n": spec.n,
              "t_end": rcfg.t_end, "t_eps": rcfg.t_eps}
    write_manifest(args.out, "sample", config, seed, started, {"evaluation": report, "outputs": [str(args.out)]})
    print(f"wrote {args.count} samples to {args.out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    started = datetime.now(timezone.utc)
    seed = resolve_seed(args.seed)
    if args.trajectory:
        if not args.ckpt:
            raise UsageError("plot --trajectory needs --ckpt")
        net, spec, cfg, extra, mean, scale = _load(args)
        rcfg = sde.ReverseConfig(steps=args.steps, t_end=cfg.T, t_eps=cfg.t_eps, seed=seed)
        _, path, times = sde.em_reverse(
            spec, score.score_fn(net), rcfg, np.random.default_rng(seed), (args.chains, net.h), record=True
        )
        svg = trajectory_svg(times, path[:, :, 0] * scale[0] + mean[0], title=f"position paths, n={spec.n}")
        config = {"ckpt": str(args.ckpt), "chains": args.chains, "steps": args.steps}
    else:
        if not args.samples:
            raise UsageError("plot needs --samples (or --trajectory --ckpt)")
        samples = data.read_csv(args.samples)
        background = data.read_csv(args.data) if args.data else None
        svg = scatter_svg(samples, background)
        config = {"data": args.data, "samples": args.samples}
    data.atomic_write(args.out, svg.encode("utf-8"))
    write_manifest(args.out, "plot", config, seed, started, {"outputs": [str(args.out)]})
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    """Identical-budget toy runs for several orders; energy distances go in the manifest."""
    started = datetime.now(timezone.utc)
    seed = resolve_seed(args.seed)
    cfg = score.TrainConfig(iters=args.iters, seed=seed)
    reports = []
    for n in args.orders:
        res = pipeline.run_toy(n, args.dataset, cfg, count=args.count, steps=args.steps)
        reports.append(res["report"])
        print(f"n={n}: energy distance {res['report']['energy_distance']:.5f} "
              f"(baseline {res['report']['baseline_energy_distance']:.5f})")
    config = {"dataset": args.dataset, "orders": args.orders, "iters": args.iters, "count": args.count, "steps": args.steps}
    write_manifest(args.out, "sweep", config, seed, started, {"runs": reports})
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holdpp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("params", help="print critically damped coefficients")
    sp.add_argument("--n", type=int, required=True)
    sp.set_defaults(func=cmd_params)

    sp = sub.add_parser("verify", help="run the numerical/exact check suites")
    sp.add_argument("--spectral", action="store_true")
    sp.add_argument("--dynamics", action="store_true")
    sp.add_argument("--optimality", action="store_true")
    sp.add_argument("--all", action="store_true")
    sp.add_argument("--n-max", type=int, default=6)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("train", help="train a score network on a toy dataset")
    sp.add_argument("--dataset", choices=data.DATASETS)
    sp.add_argument("--n", type=int)
    sp.add_argument("--iters", type=int)
    sp.add_argument("--batch", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--lr-final", dest="lr_final", type=float)
    sp.add_argument("--T", type=float)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--l-inv", dest="l_inv", type=float)
    sp.add_argument("--t-eps", dest="t_eps", type=float)
    sp.add_argument("--count", type=int, help="training set size")
    sp.add_argument("--data-seed", dest="data_seed", type=int)
    sp.add_argument("--hidden", help="comma-separated hidden widths")
    sp.add_argument("--config", help="key=value file; CLI flags take precedence")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)
    sp.add_argument("--data-out", help="also write (a prefix of) the training data as CSV")
    sp.add_argument("--data-rows", type=int, default=2000)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("sample", help="generate samples from a checkpoint")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--count", type=int, default=2000)
    sp.add_argument("--steps", type=int, default=250)
    sp.add_argument("--n", type=int, help="expected order; rejected if it differs from the checkpoint")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--evaluate", action="store_true", help="add energy distance to held-out data to the manifest")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("plot", help="SVG scatter of samples over data, or reverse trajectories")
    sp.add_argument("--data")
    sp.add_argument("--samples")
    sp.add_argument("--trajectory", action="store_true")
    sp.add_argument("--ckpt")
    sp.add_argument("--chains", type=int, default=16)
    sp.add_argument("--steps", type=int, default=250)
    sp.add_argument("--n", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plot)

    sp = sub.add_parser("sweep", help="train/sample/evaluate several orders under one budget")
    sp.add_argument("--dataset", choices=data.DATASETS, default="eight_gaussians")
    sp.add_argument("--orders", type=int, nargs="+", default=[1, 2, 3, 4])
    sp.add_argument("--iters", type=int, default=20_000)
    sp.add_argument("--count", type=int, default=2000)
    sp.add_argument("--steps", type=int, default=250)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True, help="manifest prefix")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"holdpp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except data.CheckpointError as exc:
        print(f"holdpp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OSError, ValueError) as exc:
        print(f"holdpp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
