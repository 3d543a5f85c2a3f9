"""Command-line entry point: simulate, featurize, train, eval, fuse, render, plot.

Every command reads one YAML run config (``--config``), applies ``--set``
overrides, and writes the effective config next to its outputs.

Exit codes: 0 ok, 2 config error, 3 data error, 4 training divergence.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from fishingnet import container
from fishingnet.config import ConfigError
from fishingnet.featurize import RadarNorm
from fishingnet.fusion import PriorityMap, fuse_average, fuse_priority
from fishingnet.grid import CLASS_NAMES, GridSpec, NUM_CLASSES
from fishingnet.metrics import confusion, horizon_curves, write_summary_csv
from fishingnet.model.train import (MODALITIES, CheckpointMismatchError, DivergenceError, TrainConfig,
                                    load_model, predict, prepare_inputs, prepare_labels, train)
from fishingnet.sim.camera import CameraRig
from fishingnet.sim.sample import generate_samples, read_dataset, write_dataset
from fishingnet.sim.scene import SceneConfig
from fishingnet.sim.sensors import LidarConfig, RadarConfig

log = logging.getLogger("fishingnet")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4
PRED_MAGIC = b"FSNP"
FEAT_MAGIC = b"FSNF"
BASELINES = ("identity", "persistence")


class DataError(RuntimeError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    grid: dict = field(default_factory=dict)
    scene: dict = field(default_factory=dict)
    lidar: dict = field(default_factory=dict)
    radar: dict = field(default_factory=dict)
    camera: dict = field(default_factory=dict)
    radar_norm: dict = field(default_factory=dict)
    modalities: list = field(default_factory=lambda: list(MODALITIES))
    nets: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    priority: dict = field(default_factory=dict)
    eval_horizon: int = 0

    @classmethod
    def from_dict(cls, d: dict | None) -> "RunConfig":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not self.modalities or any(m not in MODALITIES for m in self.modalities):
            raise ConfigError(f"modalities must be a nonempty subset of {list(MODALITIES)}, got {self.modalities}")
        if len(set(self.modalities)) != len(self.modalities):
            raise ConfigError("duplicate modalities")
        if set(self.nets) - set(MODALITIES):
            raise ConfigError(f"nets has unknown modalities {sorted(set(self.nets) - set(MODALITIES))}")
        # build everything once so bad values fail before any work
        try:
            self.grid_spec()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"grid: {exc}") from exc
        self.scene_config(), self.lidar_config(), self.radar_config(), self.camera_rig()
        self.norm(), self.train_config(), self.priority_map()
        if not 0 <= self.eval_horizon < 5:
            raise ConfigError("eval_horizon must be a horizon index 0..4")

    def grid_spec(self) -> GridSpec:
        return GridSpec.from_dict(self.grid) if self.grid else GridSpec()

    def scene_config(self) -> SceneConfig:
        return SceneConfig.from_dict(self.scene)

    def lidar_config(self) -> LidarConfig:
        return LidarConfig.from_dict(self.lidar)

    def radar_config(self) -> RadarConfig:
        return RadarConfig.from_dict(self.radar)

    def camera_rig(self) -> CameraRig:
        d = dict(self.camera)
        # images share the output grid size unless set explicitly
        rows, cols = self.grid_spec().shape
        d.setdefault("height_px", rows)
        d.setdefault("width_px", cols)
        return CameraRig.from_dict(d)

    def norm(self) -> RadarNorm:
        return RadarNorm.from_dict(self.radar_norm)

    def train_config(self) -> TrainConfig:
        d = dict(self.train)
        d.setdefault("seed", self.seed)
        return TrainConfig.from_dict(d)

    def priority_map(self) -> PriorityMap:
        return PriorityMap.from_dict(self.priority)

    def net_config(self, modality: str) -> dict:
        d = dict(self.nets.get(modality) or {})
        if modality == "vision":
            d.setdefault("cameras", self.camera_rig().n_cameras)
        return d

    def effective(self) -> dict:
        """Fully expanded config, defaults included."""
        return {
            "seed": self.seed,
            "grid": self.grid_spec().to_dict(),
            "scene": self.scene_config().to_dict(),
            "lidar": self.lidar_config().to_dict(),
            "radar": self.radar_config().to_dict(),
            "camera": self.camera_rig().to_dict(),
            "radar_norm": self.norm().to_dict(),
            "modalities": list(self.modalities),
            "nets": {m: self.net_config(m) for m in self.modalities},
            "train": self.train_config().to_dict(),
            "priority": self.priority_map().to_dict(),
            "eval_horizon": self.eval_horizon,
        }


def parse_override(text: str) -> tuple[list[str], object]:
    if "=" not in text:
        raise ConfigError(f"override must look like key.sub=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"bad override value {raw!r}: {exc}") from exc
    return key.strip().split("."), value


def load_config(path: str | Path | None, overrides: list[str] | None = None) -> RunConfig:
    d = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            d = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    for item in overrides or []:
        keys, value = parse_override(item)
        node = d
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r} descends into a non-mapping")
        node[keys[-1]] = value
    return RunConfig.from_dict(d)


def echo_config(cfg: RunConfig, out_dir: Path, name: str = "config.yaml") -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(yaml.safe_dump(cfg.effective(), sort_keys=True))
    return path


def _load_samples(data_dir: str | Path, spec: GridSpec | None = None):
    data_dir = Path(data_dir)
    if not data_dir.exists():
        raise DataError(f"dataset directory not found: {data_dir}")
    samples = read_dataset(data_dir)
    if spec is not None and samples and samples[0].spec != spec:
        raise DataError(f"dataset grid {samples[0].spec} does not match configured grid {spec}")
    return samples


def class_fractions(samples) -> np.ndarray:
    counts = np.zeros(NUM_CLASSES, dtype=np.int64)
    for s in samples:
        counts += np.bincount(np.asarray(s.labels, dtype=np.int64).ravel(), minlength=NUM_CLASSES)
    total = counts.sum()
    return counts / total if total else np.zeros(NUM_CLASSES)


# ---- commands --------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, n: int, out_dir: str | Path, cameras: bool = True) -> Path:
    out_dir = Path(out_dir)
    spec = cfg.grid_spec()
    samples = generate_samples(n, spec, cfg.scene_config(), cfg.seed, cfg.lidar_config(), cfg.radar_config(),
                               cfg.camera_rig(), cameras=cameras)
    meta = {"seed": cfg.seed, "radar_norm": cfg.norm().to_dict(), "cameras": cameras}
    write_dataset(samples, out_dir, meta)
    echo_config(cfg, out_dir)
    frac = class_fractions(samples)
    stats = {"samples": n, "class_fraction": {c: float(f) for c, f in zip(CLASS_NAMES, frac)}}
    (out_dir / "stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    print(f"wrote {n} samples to {out_dir}")
    for c, f in zip(CLASS_NAMES, frac):
        print(f"  {c:<10} {f:.6f}")
    return out_dir


def cmd_featurize(cfg: RunConfig, data_dir, modality: str, out_path) -> Path:
    samples = _load_samples(data_dir, cfg.grid_spec())
    if not samples:
        raise DataError("cannot featurize an empty dataset")
    inputs = prepare_inputs(samples, modality, cfg.norm())
    labels = prepare_labels(samples)
    meta = {"modality": modality, "grid": cfg.grid_spec().to_dict(), "count": len(samples)}
    path = container.write(out_path, FEAT_MAGIC, {"inputs": inputs, "labels": labels}, meta)
    echo_config(cfg, Path(out_path).parent, f"{Path(out_path).stem}.config.yaml")
    print(f"{modality} features {inputs.shape} -> {path}")
    return path


def cmd_train(cfg: RunConfig, modality: str, data_dir, out_dir, features=None):
    if modality not in cfg.modalities:
        raise ConfigError(f"modality {modality!r} is not in the configured set {cfg.modalities}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = cfg.grid_spec()
    samples = _load_samples(data_dir, spec)
    if not samples:
        raise DataError("cannot train on an empty dataset")
    inputs = labels = None
    if features:
        arrays, meta = container.read(features, FEAT_MAGIC)
        if meta.get("modality") != modality or GridSpec.from_dict(meta["grid"]) != spec:
            raise DataError(f"{features} was featurized for {meta.get('modality')} on another grid")
        inputs, labels = arrays["inputs"], arrays["labels"]
    elif modality == "radar":
        inputs = prepare_inputs(samples, modality, cfg.norm())
    echo_config(cfg, out_dir)
    result = train(modality, samples, spec, cfg.net_config(modality), cfg.train_config(),
                   checkpoint_path=out_dir / "model.fsnc", log_path=out_dir / "loss.jsonl",
                   inputs=inputs, labels=labels)
    from fishingnet.plotting import plot_loss_curve
    plot_loss_curve(result.history, out_dir / "loss.png")
    h = result.history
    print(f"{modality}: {len(h)} steps, loss {h[0]['loss']:.5f} -> {h[-1]['loss']:.5f}; checkpoint {out_dir / 'model.fsnc'}")
    return result


def baseline_probs(samples, kind: str) -> np.ndarray:
    labels = np.stack([s.labels for s in samples]).astype(np.int64)       # N T H W
    if kind == "persistence":
        labels = np.repeat(labels[:, :1], labels.shape[1], axis=1)
    elif kind != "identity":
        raise ConfigError(f"unknown baseline {kind!r}")
    return np.ascontiguousarray(np.moveaxis(np.eye(NUM_CLASSES, dtype=np.float32)[labels], -1, 2))


def write_predictions(path, probs: np.ndarray, name: str, spec: GridSpec) -> Path:
    return container.write(path, PRED_MAGIC, {"probs": np.asarray(probs, dtype=np.float32)},
                           {"name": name, "grid": spec.to_dict()})


def read_predictions(path, spec: GridSpec | None = None) -> tuple[np.ndarray, dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"predictions not found: {path}")
    arrays, meta = container.read(path, PRED_MAGIC)
    if spec is not None and GridSpec.from_dict(meta["grid"]) != spec:
        raise DataError(f"predictions {path} were made on a different grid")
    return arrays["probs"], meta


def run_predictor(cfg: RunConfig, name: str, source: str, samples) -> np.ndarray:
    """Probabilities (N, T, 3, rows, cols) from a checkpoint, a predictions file or a baseline."""
    spec = cfg.grid_spec()
    if source in BASELINES:
        return baseline_probs(samples, source)
    path = Path(source)
    if not path.exists():
        raise DataError(f"checkpoint for {name!r} not found: {path}")
    if path.suffix == ".fsnp":
        probs, _ = read_predictions(path, spec)
    else:
        net, meta = load_model(path, spec)
        probs = predict(net, prepare_inputs(samples, meta["modality"], cfg.norm()))
    if probs.shape[0] != len(samples):
        raise DataError(f"{name}: {probs.shape[0]} predictions for {len(samples)} samples")
    return probs


def _parse_pairs(items: list[str] | None) -> dict[str, str]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"expected name=source, got {item!r}")
        k, v = item.split("=", 1)
        if k in out:
            raise ConfigError(f"predictor {k!r} given twice")
        out[k] = v
    return out


def cmd_eval(cfg: RunConfig, data_dir, predictors: dict[str, str], out_dir, baselines=(), plots=True):
    out_dir = Path(out_dir)
    spec = cfg.grid_spec()
    samples = _load_samples(data_dir, spec)
    if not samples:
        raise DataError("cannot evaluate on an empty dataset")
    missing = [m for m in cfg.modalities if m not in predictors]
    if missing:
        raise ConfigError(f"no predictor given for configured modalities {missing}")
    extra = [m for m in predictors if m not in cfg.modalities]
    if extra:
        raise ConfigError(f"predictors {extra} are not configured modalities; use --baseline for baselines")
    echo_config(cfg, out_dir)
    truth = np.stack([s.labels for s in samples]).astype(np.int64)
    probs = {m: run_predictor(cfg, m, predictors[m], samples) for m in cfg.modalities}
    stacked = [probs[m] for m in cfg.modalities]
    probs["Average"] = fuse_average(stacked)
    probs["Pool"] = fuse_priority(stacked, cfg.priority_map())
    for b in baselines:
        probs[b] = baseline_probs(samples, b)
    pred_dir = out_dir / "predictions"
    pred_dir.mkdir(parents=True, exist_ok=True)
    counts = {}
    for name, p in probs.items():
        write_predictions(pred_dir / f"{name}.fsnp", p, name, spec)
        counts[name] = confusion(np.argmax(p, axis=2), truth)
    write_summary_csv(counts, out_dir / "table.csv", cfg.eval_horizon)
    rows, _ = horizon_curves(counts, out_dir, plots=plots)
    print((out_dir / "table.csv").read_text(), end="")
    return counts, rows


def cmd_fuse(cfg: RunConfig, inputs: list[str], rule: str, out_path) -> Path:
    spec = cfg.grid_spec()
    arrays = [read_predictions(p, spec)[0] for p in inputs]
    if rule == "average":
        fused = fuse_average(arrays)
    elif rule == "priority":
        fused = fuse_priority(arrays, cfg.priority_map())
    else:
        raise ConfigError(f"unknown fusion rule {rule!r}")
    path = write_predictions(out_path, fused, rule, spec)
    print(f"fused {len(inputs)} prediction sets ({rule}) -> {path}")
    return path


def cmd_render(cfg: RunConfig, data_dir, index: int, out_dir, predictions: dict[str, str] | None = None) -> list[Path]:
    from fishingnet.featurize import featurize_sample
    from fishingnet.plotting import render_input_panels, render_sequence_panels

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = _load_samples(data_dir, cfg.grid_spec())
    if not 0 <= index < len(samples):
        raise DataError(f"sample index {index} out of range for {len(samples)} samples")
    s = samples[index]
    lidar = featurize_sample(s, "lidar")
    radar = featurize_sample(s, "radar", norm=cfg.norm())
    paths = [render_input_panels(lidar, radar, s.inputs.images, out_dir / f"inputs_{index:06d}.png")]
    seqs = {"label": s.labels}
    for name, path in (predictions or {}).items():
        probs, _ = read_predictions(path, cfg.grid_spec())
        seqs[name] = np.argmax(probs[index], axis=1)
    paths.append(render_sequence_panels(seqs, out_dir / f"sequence_{index:06d}.png"))
    for p in paths:
        print(p)
    return paths


def cmd_plot(metrics_csv=None, loss_log=None, out_dir=".") -> list[Path]:
    from fishingnet.metrics import read_horizon_csv
    from fishingnet.plotting import plot_horizon_curves, plot_loss_curve

    out_dir = Path(out_dir)
    paths = []
    if metrics_csv:
        if not Path(metrics_csv).exists():
            raise DataError(f"metrics table not found: {metrics_csv}")
        paths += plot_horizon_curves(read_horizon_csv(metrics_csv), out_dir)
    if loss_log:
        if not Path(loss_log).exists():
            raise DataError(f"loss log not found: {loss_log}")
        history = [json.loads(line) for line in Path(loss_log).read_text().splitlines() if line.strip()]
        out_dir.mkdir(parents=True, exist_ok=True)
        paths.append(plot_loss_curve(history, out_dir / "loss.png"))
    if not paths:
        raise ConfigError("plot needs --metrics and/or --loss-log")
    for p in paths:
        print(p)
    return paths


# ---- argument parsing ------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fishingnet", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML run config (defaults apply when omitted)")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config value, e.g. --set grid.resolution=0.5 (repeatable)")
        return sp

    sp = common(sub.add_parser("simulate", help="generate a synthetic dataset"))
    sp.add_argument("-n", "--n-samples", type=int, required=True)
    sp.add_argument("--out", required=True, help="dataset directory")
    sp.add_argument("--no-cameras", action="store_true", help="skip camera rendering")

    sp = common(sub.add_parser("featurize", help="write network inputs for one modality"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--modality", choices=MODALITIES, required=True)
    sp.add_argument("--out", required=True, help="output file (.fsnf)")

    sp = common(sub.add_parser("train", help="train one modality's network"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--modality", choices=MODALITIES, required=True)
    sp.add_argument("--out", required=True, help="run directory for checkpoint, loss log and plot")
    sp.add_argument("--features", help="precomputed features from `featurize`")

    sp = common(sub.add_parser("eval", help="per-modality inference, fusion, metrics and horizon curves"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--predictor", action="append", metavar="MODALITY=SOURCE",
                    help="SOURCE is a checkpoint, a .fsnp predictions file, 'identity' or 'persistence'")
    sp.add_argument("--baseline", action="append", default=[], choices=BASELINES,
                    help="extra baseline columns")
    sp.add_argument("--out", required=True, help="report directory")
    sp.add_argument("--no-plots", action="store_true")

    sp = common(sub.add_parser("fuse", help="fuse saved prediction files"))
    sp.add_argument("inputs", nargs="+", help=".fsnp files in modality order")
    sp.add_argument("--rule", choices=("average", "priority"), default="priority")
    sp.add_argument("--out", required=True)

    sp = common(sub.add_parser("render", help="input and label/prediction panels for one sample"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--index", type=int, default=0)
    sp.add_argument("--predictions", action="append", metavar="NAME=FILE", help=".fsnp file to overlay")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("plot", help="plots from a metrics table or loss log")
    sp.add_argument("--metrics", help="horizon_metrics.csv from eval")
    sp.add_argument("--loss-log", help="loss.jsonl from train")
    sp.add_argument("--out", default=".")
    return p


def run(args: argparse.Namespace) -> None:
    if args.command == "plot":
        cmd_plot(args.metrics, args.loss_log, args.out)
        return
    cfg = load_config(args.config, args.overrides)
    if args.command == "simulate":
        if args.n_samples < 0:
            raise ConfigError("--n-samples must be >= 0")
        cmd_simulate(cfg, args.n_samples, args.out, cameras=not args.no_cameras)
    elif args.command == "featurize":
        cmd_featurize(cfg, args.data, args.modality, args.out)
    elif args.command == "train":
        cmd_train(cfg, args.modality, args.data, args.out, args.features)
    elif args.command == "eval":
        cmd_eval(cfg, args.data, _parse_pairs(args.predictor), args.out, args.baseline, not args.no_plots)
    elif args.command == "fuse":
        cmd_fuse(cfg, args.inputs, args.rule, args.out)
    elif args.command == "render":
        cmd_render(cfg, args.data, args.index, args.out, _parse_pairs(args.predictions))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except CheckpointMismatchError as exc:
        print(f"checkpoint mismatch: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, container.ContainerError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
