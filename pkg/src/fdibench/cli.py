"""``fdibench`` command line: cube-gen, sample, train, train-ensemble, infer, infer-ensemble, eval, report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, describe_keys, load_config
from .datacube import (
    Normalizer,
    crc64_hex,
    fit_normalizer,
    generate_synthetic_cube,
    load_cube,
    save_cube,
    weather_index,
)
from .errors import DataError, NumericError, UsageError
from .evaluation import (
    EvalReport,
    assemble_report,
    fire_days,
    rescale,
    select_no_fire_days,
    write_report,
)
from .inference import FdiMap, ensemble_average, full_map_inference, read_sidecar, render_map, write_sidecar
from .models import budget_report, build_model, load_weights, save_weights
from .sampling import (
    assemble_dataset,
    audit_sampling_rules,
    build_samples,
    chronological_split,
    read_manifest,
    write_manifest,
)
from .trainer import train, train_ensemble

log = logging.getLogger("fdibench")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


# ---------------------------------------------------------------- helpers

def _prepare_out(path, force: bool) -> Path:
    out = Path(path)
    if out.exists() and (not out.is_dir() or any(out.iterdir())):
        if not force:
            raise UsageError(f"output directory {out} is not empty (use --force to overwrite)")
        shutil.rmtree(out) if out.is_dir() else out.unlink()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dir_crcs(path) -> dict:
    path = Path(path)
    if path.is_file():
        return {path.name: crc64_hex(path.read_bytes())}
    return {str(p.relative_to(path)): crc64_hex(p.read_bytes())
            for p in sorted(path.rglob("*")) if p.is_file()}


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out: Path, command: str, cfg: RunConfig, args, inputs: dict, seeds: dict, extra=None):
    manifest = {
        "command": command,
        "package_version": __version__,
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
        "seeds": seeds,
        "inputs": {role: _dir_crcs(p) for role, p in inputs.items()},
        "threads": args.threads,
        "deterministic": args.threads == 1 or command not in ("train-ensemble",),
    }
    manifest.update(extra or {})
    _write_json(out / "manifest.json", manifest)


def _require_dir(path, what: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise DataError(f"{what} directory not found: {p}")
    return p


def _load_split(samples_dir: Path):
    samples = read_manifest(samples_dir / "samples.csv")
    split_file = samples_dir / "split.json"
    if not split_file.exists():
        raise DataError(f"split file not found: {split_file}")
    years = json.loads(split_file.read_text(encoding="utf-8"))
    split = chronological_split(samples, years["train_years"], years["val_years"], years["test_years"])
    return split, Normalizer.load(samples_dir / "normalizer.json")


def _datasets(cube, split, norm, cfg: RunConfig):
    m = cfg.model
    tr = assemble_dataset(cube, split.train, norm, m.temporal_len, m.patch_size)
    va = assemble_dataset(cube, split.val, norm, m.temporal_len, m.patch_size)
    log.info("training on %d samples, validating on %d", len(tr), len(va))
    return tr, va


def _epoch_logger(prefix):
    def report(rec):
        log.debug("%sepoch %d train %.4f val %.4f f1 %.3f lr %.1e", prefix, rec.epoch, rec.train_loss,
                  rec.val_loss, rec.f1, rec.lr)
    return report


def format_budget(report: dict) -> str:
    widths = f"conv width {report['conv_width']} x {report['conv_blocks']} block(s)"
    if report["lstm_hidden"] is not None:
        widths = f"lstm hidden {report['lstm_hidden']}, head conv {report['head_conv_width']}"
    return (f"{report['arch']}: {report['count']} learnable parameters "
            f"(budget {report['budget']}, {report['deviation']:+.2%}); {widths}, "
            f"classifier {tuple(report['classifier_widths'])}, padding {report['padding']}")


# ---------------------------------------------------------------- commands

def cmd_cube_gen(args, cfg: RunConfig):
    out = _prepare_out(args.out, args.force)
    cube = generate_synthetic_cube(cfg.synthetic)
    crcs = save_cube(cube, out)
    # weather-only baseline rasters, raw values with their global range documented
    raw = np.stack([weather_index(cube, d) for d in range(cube.header.n_days)]).astype(np.float32)
    lo, hi = float(raw.min()), float(raw.max())
    full = np.ones(raw.shape[1:], bool)
    for d in range(cube.header.n_days):
        write_sidecar(FdiMap(raw[d], full, d, "weather_index"), out / "baseline", {"min": lo, "max": hi})
    _write_manifest(out, "cube-gen", cfg, args, {}, {"generator": cfg.synthetic.seed}, {"cube_crc64": crcs})
    print(f"cube {cube.header.height}x{cube.header.width}x{cube.header.n_days} days, "
          f"{int(cube.burn.sum())} burn pixels -> {out}")


def cmd_sample(args, cfg: RunConfig):
    cube_dir = _require_dir(args.cube, "cube")
    cube = load_cube(cube_dir)
    out = _prepare_out(args.out, args.force)
    samples = build_samples(cube, cfg.sampling)
    violations = audit_sampling_rules(cube, samples, cfg.sampling)
    (out / "audit.txt").write_text("".join(v + "\n" for v in violations) or "no violations\n", encoding="utf-8")
    if violations:
        raise DataError(f"sampling audit found {len(violations)} violations, see {out / 'audit.txt'}")
    split_cfg = cfg.split.resolve(cube.years())
    split = chronological_split(samples, split_cfg.train_years, split_cfg.val_years, split_cfg.test_years)
    train_days = np.concatenate([cube.days_of_year(y) for y in split_cfg.train_years])
    norm = fit_normalizer(cube, (int(train_days.min()), int(train_days.max()) + 1))
    write_manifest(samples, out / "samples.csv")
    norm.save(out / "normalizer.json")
    _write_json(out / "split.json", {k: [int(y) for y in v] for k, v in vars(split_cfg).items()})
    _write_manifest(out, "sample", cfg, args, {"cube": cube_dir}, {"sampling": cfg.sampling.seed},
                    {"counts": {k: int(len(getattr(split, k))) for k in ("train", "val", "test")}})
    print(f"{len(samples)} samples ({int((samples['label'] == 0).sum())} fire); "
          f"train/val/test {len(split.train)}/{len(split.val)}/{len(split.test)} -> {out}")


def cmd_train(args, cfg: RunConfig):
    cube_dir = _require_dir(args.cube, "cube")
    samples_dir = _require_dir(args.samples, "samples")
    cube = load_cube(cube_dir)
    split, norm = _load_split(samples_dir)
    tr, va = _datasets(cube, split, norm, cfg)
    out = _prepare_out(args.out, args.force)
    report = budget_report(cfg.model)
    print(format_budget(report))
    bundle = build_model(cfg.model)
    best, hist = train(bundle, tr, va, cfg.train, _epoch_logger(""))
    save_weights(best, out)
    hist.write_csv(out / "history.csv")
    _write_json(out / "build_report.json", report)
    _write_manifest(out, "train", cfg, args, {"cube": cube_dir, "samples": samples_dir},
                    {"init": cfg.model.init_seed, "shuffle": cfg.train.shuffle_seed,
                     "dropout": cfg.train.dropout_seed})
    print(f"best epoch {hist.best_epoch} val loss {hist.best_val_loss:.4f} -> {out}")


def cmd_train_ensemble(args, cfg: RunConfig):
    cube_dir = _require_dir(args.cube, "cube")
    samples_dir = _require_dir(args.samples, "samples")
    cube = load_cube(cube_dir)
    split, norm = _load_split(samples_dir)
    tr, va = _datasets(cube, split, norm, cfg)
    out = _prepare_out(args.out, args.force)
    print(format_budget(budget_report(cfg.model)))
    bundles, hists = train_ensemble(cfg.model, cfg.ensemble, tr, va, cfg.train, workers=args.threads,
                                    progress=lambda i, r: _epoch_logger(f"member {i} ")(r))
    members = []
    for i, (b, h) in enumerate(zip(bundles, hists)):
        name = f"member_{i}"
        save_weights(b, out / name)
        h.write_csv(out / name / "history.csv")
        members.append({"dir": name, "seed": cfg.ensemble.seeds[i], "best_epoch": h.best_epoch})
        print(f"{name} seed {cfg.ensemble.seeds[i]}: best epoch {h.best_epoch} val loss {h.best_val_loss:.4f}")
    _write_json(out / "ensemble.json", {"members": members})
    _write_manifest(out, "train-ensemble", cfg, args, {"cube": cube_dir, "samples": samples_dir},
                    {"members": list(cfg.ensemble.seeds), "shuffle": cfg.train.shuffle_seed,
                     "dropout": cfg.train.dropout_seed})


def eval_days(cube, cfg: RunConfig, temporal_len: int = 1) -> dict:
    """Season fire days, consistency-month fire days and seeded no-fire days of the evaluation year."""
    ev = cfg.evaluation
    year = ev.year if ev.year is not None else cfg.split.resolve(cube.years()).test_years[-1]
    days = cube.days_of_year(year)
    if len(days) == 0:
        raise DataError(f"evaluation year {year} is not in the cube (years {cube.years()})")
    doy = days - days[0]
    lo, hi = ev.season or cfg.synthetic.fire_window
    if ev.month:
        mlo, mhi = ev.month
    else:
        span = min(30, hi - lo)
        mlo = lo + (hi - lo - span) // 2
        mhi = mlo + span
    season = [int(d) for d, k in zip(days, doy) if lo <= k < hi and d >= temporal_len - 1]
    fires = fire_days(cube.burn, cube.susceptible, season)
    quiet = select_no_fire_days(cube.burn, season, ev.no_fire_days, ev.no_fire_seed)
    month = [d for d in fires if mlo <= d - days[0] < mhi]
    return {"year": int(year), "season": fires, "month": month, "no_fire": quiet}


def _infer(args, cfg: RunConfig, bundles: list, ids: list, inputs: dict):
    cube_dir = _require_dir(args.cube, "cube")
    samples_dir = _require_dir(args.samples, "samples")
    cube = load_cube(cube_dir)
    norm = Normalizer.load(samples_dir / "normalizer.json")
    t = max(b.config.temporal_len for b in bundles)
    days = eval_days(cube, cfg, t)
    out = _prepare_out(args.out, args.force)
    todo = sorted(set(days["season"]) | set(days["no_fire"]))
    for d in todo:
        maps = [full_map_inference(b, cube, d, norm, cfg.evaluation.batch, args.threads, mid)
                for b, mid in zip(bundles, ids)]
        for m, mid in zip(maps, ids):
            render_map(m, out / "members" / mid)
        if len(maps) > 1:
            render_map(ensemble_average(maps), out / "ensemble")
    _write_json(out / "maps.json", {"members": ids, **days})
    inputs = dict(inputs, cube=cube_dir, samples=samples_dir)
    _write_manifest(out, args.command, cfg, args, inputs, {"no_fire": cfg.evaluation.no_fire_seed})
    print(f"{len(todo)} days x {len(ids)} model(s) -> {out}")


def cmd_infer(args, cfg: RunConfig):
    model_dir = _require_dir(args.model, "model")
    bundle = load_weights(model_dir)
    _infer(args, cfg, [bundle], [f"{bundle.config.arch}_seed_{bundle.config.init_seed}"], {"model": model_dir})


def cmd_infer_ensemble(args, cfg: RunConfig):
    ens_dir = _require_dir(args.ensemble, "ensemble")
    index = ens_dir / "ensemble.json"
    if not index.exists():
        raise DataError(f"ensemble index not found: {index}")
    members = json.loads(index.read_text(encoding="utf-8"))["members"]
    bundles = [load_weights(ens_dir / m["dir"]) for m in members]
    _infer(args, cfg, bundles, [m["dir"] for m in members], {"ensemble": ens_dir})


def cmd_eval(args, cfg: RunConfig):
    maps_dir = _require_dir(args.maps, "maps")
    cube_dir = _require_dir(args.cube, "cube")
    index = maps_dir / "maps.json"
    if not index.exists():
        raise DataError(f"map index not found: {index}")
    info = json.loads(index.read_text(encoding="utf-8"))
    cube = load_cube(cube_dir)
    days = sorted(set(info["season"]) | set(info["no_fire"]))
    members = {d: [read_sidecar(maps_dir / "members" / mid, d)[0] for mid in info["members"]] for d in days}
    base_dir = Path(args.baseline) if args.baseline else cube_dir / "baseline"
    baseline = None
    if base_dir.is_dir():
        baseline = {}
        for d in days:
            raw, meta = read_sidecar(base_dir, d)
            baseline[d] = rescale(raw, meta["min"], meta["max"])
    elif args.baseline:
        raise DataError(f"baseline directory not found: {base_dir}")
    ev = cfg.evaluation
    report = assemble_report(cube.burn, info["season"], info["month"], info["no_fire"], members, baseline,
                             tuple(ev.levels), ev.bins, ev.threshold, ev.baseline_threshold, args.threads,
                             {"year": info["year"]})
    out = _prepare_out(args.out, args.force)
    report.save(out / "eval.json")
    inputs = {"maps": maps_dir, "cube": cube_dir}
    if baseline is not None:
        inputs["baseline"] = base_dir
    _write_manifest(out, "eval", cfg, args, inputs, {"no_fire": ev.no_fire_seed})
    s = report.summary()
    print(f"{s['n_fire_days']} fire days, {s['n_no_fire_days']} no-fire days; quantiles {s.get('quantiles')}")


def cmd_report(args, cfg: RunConfig):
    eval_dir = _require_dir(args.eval, "evaluation")
    report = EvalReport.load(eval_dir / "eval.json")
    out = _prepare_out(args.out, args.force)
    files = write_report(report, out)
    _write_manifest(out, "report", cfg, args, {"eval": eval_dir}, {})
    print(f"{len(files)} report files -> {out}")


COMMANDS = {
    "cube-gen": (cmd_cube_gen, "generate a synthetic datacube and baseline rasters", ["out"]),
    "sample": (cmd_sample, "build and audit fire/no-fire samples, split and normalizer", ["cube", "out"]),
    "train": (cmd_train, "train one model", ["cube", "samples", "out"]),
    "train-ensemble": (cmd_train_ensemble, "train the seeded ensemble", ["cube", "samples", "out"]),
    "infer": (cmd_infer, "full-map inference with one model", ["model", "cube", "samples", "out"]),
    "infer-ensemble": (cmd_infer_ensemble, "full-map inference per member plus the average",
                       ["ensemble", "cube", "samples", "out"]),
    "eval": (cmd_eval, "daily recall, quantiles, skewness, consistency and baseline statistics",
             ["maps", "cube", "out"]),
    "report": (cmd_report, "write CSV tables, summary.json and SVG charts", ["eval", "out"]),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def make_parser() -> argparse.ArgumentParser:
    epilog = "configuration keys (TOML tables) and defaults:\n" + describe_keys()
    parser = _Parser(prog="fdibench", description=__doc__, epilog=epilog,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text, paths) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=epilog,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--threads", type=int, default=1, help="tile/ensemble parallelism (default 1)")
        p.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
        p.add_argument("-v", "--verbose", action="count", default=0)
        for path in paths:
            p.add_argument(f"--{path}", required=True)
        if name == "eval":
            p.add_argument("--baseline", help="baseline raster directory (default: <cube>/baseline)")
    return parser


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        if args.threads < 1:
            raise UsageError(f"--threads must be >= 1, got {args.threads}")
        cfg = load_config(args.config, args.overrides)
        COMMANDS[args.command][0](args, cfg)
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
