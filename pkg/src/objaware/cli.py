"""Command-line driver.

Subcommands: synth, heatmap, objectness, mask, weights, train-toy, bench-masking.
Failures print one ``error: <kind>: <message>`` line on stderr and exit non-zero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import bench, io as fio
from .core import PatchGeometry, VideoTensor
from .errors import FormatError, ObjawareError, ParameterError
from .heatmap import DEFAULT_SIGMA_SCALE, PixelHeatmap, SigmaPolicy, video_heatmap
from .loss import loss_weights
from .masking import STRATEGIES, MaskParams, make_mask
from .objectness import ObjectnessMap, patch_objectness, token_scores
from .synth import SynthConfig, generate
from .toymae import ToyModel, TrainConfig, evaluate, save_checkpoint, synth_dataset, train

FORMAT_VERSION = 1
EXIT_ERROR = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _triple(text: str) -> tuple[int, int, int]:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected TxHxW, got {text!r}")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers in {text!r}") from None


def _pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected DX,DY, got {text!r}")
    return float(parts[0]), float(parts[1])


def _int_list(text: str) -> list[int]:
    return [int(p) for p in text.split(",") if p.strip()]


def _seed(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return v


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _pgm_path(out: Path) -> Path:
    return out.with_suffix(".pgm")


def _load_video(path: str, patch: Optional[tuple[int, int, int]]) -> VideoTensor:
    if patch is None:
        meta = Path(path).with_name("geometry.json")
        if not meta.exists():
            raise ParameterError("--patch is required when no geometry.json sits next to the video")
        g = PatchGeometry.from_dict(json.loads(meta.read_text())["geometry"])
        patch = (g.patch_t, g.patch_h, g.patch_w)
    return fio.read_video(path, patch)


# -- subcommands --------------------------------------------------------------

def cmd_synth(a) -> None:
    g = PatchGeometry(a.frames, a.channels, a.height, a.width, *a.patch)
    cfg = SynthConfig(g, n_objects=a.objects, coverage=a.coverage, drift=a.drift,
                      noise_amplitude=a.noise, object_amplitude=a.amplitude,
                      center_jitter=a.center_jitter, size_jitter=a.size_jitter, dropout=a.dropout)
    sample = generate(cfg, a.seed)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    fio.write_video(out / "video.soart", sample.video)
    fio.write_detections(out / "detections.jsonl", sample.detections)
    _write_json(out / "geometry.json", {"version": FORMAT_VERSION, "geometry": g.to_dict()})
    _write_json(out / "ground_truth.json", {
        "version": FORMAT_VERSION,
        "object_tokens": [list(t) for t in sample.object_tokens],
        "corners": [[list(c) for c in f] for f in sample.corners],
    })


def cmd_heatmap(a) -> None:
    arr = fio.read_tensor(a.video)
    if arr.ndim != 4:
        raise FormatError("video tensor must be rank 4 (T, C, H, W)")
    t, c, h, w = arr.shape
    g = PatchGeometry(t, c, h, w, 1, 1, 1)
    dets = fio.read_detections(a.dets, t)
    sigma = SigmaPolicy.fixed(a.sigma) if a.sigma is not None else SigmaPolicy.box_scaled(a.sigma_scale)
    hm = video_heatmap(dets, g, sigma, truncate=a.truncate)
    out = Path(a.out)
    fio.write_tensor(out, hm.values)
    fio.write_pgm(_pgm_path(out), hm.values)


def cmd_objectness(a) -> None:
    video = _load_video(a.video, a.patch)
    hm = PixelHeatmap(fio.read_tensor(a.heatmap))
    omap = patch_objectness(hm, video.geometry)
    out = Path(a.out)
    fio.write_tensor(out, omap.scores)
    fio.write_pgm(_pgm_path(out), omap.scores)


def cmd_mask(a) -> None:
    video = _load_video(a.video, a.patch)
    g = video.geometry
    params = MaskParams(rho=a.rho, seed=a.seed, strategy=a.strategy, x=a.x)
    omap = None
    if a.objectness:
        omap = ObjectnessMap(g, fio.read_tensor(a.objectness))
    mask = make_mask(g, params, omap)
    fio.write_mask(a.out, mask)


def cmd_weights(a) -> None:
    mask = fio.read_mask(a.mask)
    omap = ObjectnessMap(mask.geometry, fio.read_tensor(a.objectness))
    fio.write_weights(a.out, loss_weights(token_scores(omap), mask, use_mu=not a.no_mu))


_TRAIN_KEYS = {"version", "seed", "geometry", "synth", "dataset_size", "dim", "steps", "lr",
               "batch_size", "mask", "use_mu", "object_loss", "normalize_target", "eval_draws"}
_SYNTH_KEYS = {"coverage", "noise_amplitude", "object_amplitude", "objects", "drift",
               "shared_placement"}


def load_train_config(path: str) -> dict:
    cfg = json.loads(Path(path).read_text())
    if not isinstance(cfg, dict):
        raise FormatError("train config must be a JSON object")
    unknown = set(cfg) - _TRAIN_KEYS
    if unknown:
        raise ParameterError(f"unknown train config keys: {', '.join(sorted(unknown))}")
    if "seed" not in cfg:
        raise ParameterError("train config needs an explicit seed")
    unknown = set(cfg.get("synth", {})) - _SYNTH_KEYS
    if unknown:
        raise ParameterError(f"unknown synth keys: {', '.join(sorted(unknown))}")
    return cfg


def run_train_config(cfg: dict):
    """Build dataset, model and TrainConfig from a parsed config and train."""
    seed = int(cfg["seed"])
    g = PatchGeometry.from_dict(cfg["geometry"])
    sc = cfg.get("synth", {})
    synth = SynthConfig(g, n_objects=int(sc.get("objects", 1)),
                        coverage=float(sc.get("coverage", 0.05)),
                        drift=tuple(sc.get("drift", (0.0, 0.0))),
                        noise_amplitude=float(sc.get("noise_amplitude", 0.1)),
                        object_amplitude=float(sc.get("object_amplitude", 1.0)),
                        placement_seed=seed if sc.get("shared_placement", True) else None)
    dataset = synth_dataset(synth, int(cfg.get("dataset_size", 8)), seed)
    m = cfg.get("mask", {})
    tc = TrainConfig(steps=int(cfg.get("steps", 200)), lr=float(cfg.get("lr", 2.0)), seed=seed,
                     batch_size=int(cfg.get("batch_size", 1)),
                     mask=MaskParams(rho=float(m.get("rho", 0.7)), seed=0,
                                     strategy=m.get("strategy", "object_aware"), x=m.get("x")),
                     use_mu=bool(cfg.get("use_mu", True)),
                     object_loss=bool(cfg.get("object_loss", True)),
                     normalize_target=bool(cfg.get("normalize_target", False)))
    model = ToyModel.init(g, int(cfg.get("dim", 16)), seed)
    model, trace = train(model, dataset, tc)
    obj, bg = evaluate(model, dataset, tc.mask, seed, int(cfg.get("eval_draws", 4)),
                       tc.normalize_target)
    return model, trace, {"object_mse": obj, "background_mse": bg}


def cmd_train_toy(a) -> None:
    cfg = load_train_config(a.config)
    model, trace, summary = run_train_config(cfg)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.csv").write_text(trace.to_csv())
    save_checkpoint(out / "checkpoint.soart", model)
    _write_json(out / "summary.json", {"version": FORMAT_VERSION,
                                       **{k: float(v) for k, v in summary.items()}})


def cmd_bench_masking(a) -> None:
    omap, cells = bench.two_object_instance(a.grid, a.object_cells, a.slots)
    strategies = a.strategies.split(",") if a.strategies != "all" else STRATEGIES
    rows = bench.bench_masking(omap, cells, a.trials, a.seed, rho=a.rho, x=a.x,
                               strategies=strategies)
    text = bench.rows_to_csv(rows)
    if a.out:
        Path(a.out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="objaware", description="Object-aware masking and loss signals for video MAE.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic clip with detections")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--coverage", type=float, default=0.05)
    s.add_argument("--frames", type=int, default=16)
    s.add_argument("--channels", type=int, default=1)
    s.add_argument("--height", type=int, default=64)
    s.add_argument("--width", type=int, default=64)
    s.add_argument("--patch", type=_triple, default=(2, 8, 8))
    s.add_argument("--objects", type=int, default=1)
    s.add_argument("--drift", type=_pair, default=(0.0, 0.0))
    s.add_argument("--noise", type=float, default=0.1)
    s.add_argument("--amplitude", type=float, default=1.0)
    s.add_argument("--center-jitter", type=float, default=0.0)
    s.add_argument("--size-jitter", type=float, default=0.0)
    s.add_argument("--dropout", type=float, default=0.0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("heatmap", help="objectness heatmap from detections")
    s.add_argument("--video", required=True)
    s.add_argument("--dets", required=True)
    grp = s.add_mutually_exclusive_group()
    grp.add_argument("--sigma-scale", type=float, default=DEFAULT_SIGMA_SCALE)
    grp.add_argument("--sigma", type=float, default=None, help="fixed sigma in pixels")
    s.add_argument("--truncate", action="store_true", help="zero each Gaussian beyond 3 sigma")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_heatmap)

    s = sub.add_parser("objectness", help="patch-level objectness from a heatmap")
    s.add_argument("--heatmap", required=True)
    s.add_argument("--video", required=True)
    s.add_argument("--patch", type=_triple, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_objectness)

    s = sub.add_parser("mask", help="generate a token mask")
    s.add_argument("--strategy", default="object-aware",
                   choices=[x.replace("_", "-") for x in STRATEGIES] + list(STRATEGIES))
    s.add_argument("--rho", type=float, default=0.7)
    s.add_argument("--x", type=float, default=None)
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--video", required=True)
    s.add_argument("--patch", type=_triple, default=None)
    s.add_argument("--objectness", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mask)

    s = sub.add_parser("weights", help="object-aware loss weights for a mask")
    s.add_argument("--objectness", required=True)
    s.add_argument("--mask", required=True)
    s.add_argument("--no-mu", action="store_true", help="drop the +mu term")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_weights)

    s = sub.add_parser("train-toy", help="train the toy masked autoencoder")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_toy)

    s = sub.add_parser("bench-masking", help="object-token visibility per strategy")
    s.add_argument("--trials", type=int, default=100000)
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--rho", type=float, default=0.75)
    s.add_argument("--x", type=float, default=0.5)
    s.add_argument("--grid", type=int, default=4)
    s.add_argument("--slots", type=int, default=1)
    s.add_argument("--object-cells", type=_int_list, default=[5, 10])
    s.add_argument("--strategies", default="all")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_bench_masking)
    return p


def _one_line(msg: str) -> str:
    return " ".join(str(msg).split())


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except UsageError as exc:
        print(f"error: usage: {_one_line(exc)}", file=sys.stderr)
        return EXIT_USAGE
    except ObjawareError as exc:
        print(f"error: {exc.kind}: {_one_line(exc)}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {_one_line(exc)}", file=sys.stderr)
        return EXIT_ERROR
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
