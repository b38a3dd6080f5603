"""Command-line surface.

Verbs: synth, preprocess, train-segmenter, train-condgen, train-imggen,
tryon, fid, ablate, bench-backends, serve. Errors print one
machine-parseable line (`error: <kind>: <message>`) and exit 1; argparse
usage problems exit 2.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np


def _parse_resolution(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"resolution must look like 64x48, got {text!r}") from exc


def _add_synth(sub):
    p = sub.add_parser("synth", help="emit a synthetic annotated dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=_parse_resolution, default=(64, 48))
    p.add_argument("--stripes", action="store_true")
    p.add_argument("--decorations", action="store_true",
                   help="randomly add hats/sunglasses/beards/tattoos")


def _add_preprocess(sub):
    p = sub.add_parser("preprocess", help="batch annotate a dataset with "
                                          "the selected backends")
    p.add_argument("--root", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--segmenter", default="oracle")
    p.add_argument("--pose", default="oracle")
    p.add_argument("--densepose", default="oracle")
    p.add_argument("--cloth", default="threshold")
    p.add_argument("--oracle-root")
    p.add_argument("--oracle-split", default="train")
    p.add_argument("--toy-checkpoint")


def _add_train(sub):
    for verb in ("train-condgen", "train-imggen"):
        p = sub.add_parser(verb, help=f"{verb.split('-')[1]} training")
        p.add_argument("--data", required=True)
        p.add_argument("--split", default="train")
        p.add_argument("--out", required=True)
        p.add_argument("--steps", type=int, default=300)
        p.add_argument("--seed", type=int, default=7)
        p.add_argument("--batch-size", type=int)
        p.add_argument("--toy", action="store_true",
                       help="64x48 toy configuration")
        p.add_argument("--history", help="CSV loss history path")
        if verb == "train-imggen":
            p.add_argument("--condgen", required=True)
    p = sub.add_parser("train-segmenter", help="train the toy human parser")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=400)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--seed", type=int, default=11)


def _add_tryon(sub):
    p = sub.add_parser("tryon", help="run the full pipeline on one pair")
    p.add_argument("--config", required=True)
    p.add_argument("--person", required=True)
    p.add_argument("--cloth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--timing-out", help="write the timing report JSON here")


def _add_fid(sub):
    p = sub.add_parser("fid", help="Fréchet distance between two image dirs")
    p.add_argument("--real", required=True)
    p.add_argument("--fake", required=True)


def _add_ablate(sub):
    p = sub.add_parser("ablate", help="six-configuration backend ablation")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--json-out")


def _add_bench(sub):
    p = sub.add_parser("bench-backends",
                       help="IoU/time table over segmenter backends")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--backends", default="oracle,oracle-coarse")
    p.add_argument("--toy-checkpoint")
    p.add_argument("--out", help="JSON report path")


def _add_serve(sub):
    p = sub.add_parser("serve", help="run the HTTP try-on service")
    p.add_argument("--config", required=True)
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--host", default="127.0.0.1")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fitroom")
    sub = parser.add_subparsers(dest="verb", required=True)
    _add_synth(sub)
    _add_preprocess(sub)
    _add_train(sub)
    _add_tryon(sub)
    _add_fid(sub)
    _add_ablate(sub)
    _add_bench(sub)
    _add_serve(sub)
    return parser


def _load_split(root, split):
    from .datasets import load_manifest, load_sample

    manifest = load_manifest(root, split)
    return [load_sample(manifest, i) for i in range(len(manifest))]


def _cmd_synth(args) -> int:
    from .datasets import SynthOptions, export_dataset, synth_sample

    samples = []
    for i in range(args.count):
        opts = SynthOptions(stripes=args.stripes)
        if args.decorations:
            rng = np.random.default_rng(args.seed + 90000 + i)
            opts = SynthOptions(stripes=args.stripes,
                                hat=bool(rng.random() < 0.3),
                                sunglasses=bool(rng.random() < 0.3),
                                beard=bool(rng.random() < 0.3),
                                tattoo=bool(rng.random() < 0.3))
        samples.append(synth_sample(args.seed + i, args.resolution, opts))
    manifest = export_dataset(samples, args.out, args.split)
    print(f"wrote {len(manifest)} samples to {args.out}/{args.split}")
    return 0


def _backend_ctx(oracle_root, oracle_split, toy_checkpoint):
    from .backends import BackendContext, OracleStore
    from .datasets import load_manifest
    from .training import load_checkpoint

    store = None
    if oracle_root:
        store = OracleStore.from_manifest(load_manifest(oracle_root,
                                                        oracle_split))
    toy = load_checkpoint(toy_checkpoint) if toy_checkpoint else None
    return BackendContext(oracle_store=store, toy_segmenter_ckpt=toy)


def _cmd_preprocess(args) -> int:
    from .backends import create_backend
    from .datasets import (load_manifest, save_cloth_mask, save_densepose,
                           save_parse, save_pose)
    from .imaging import load_image
    from .parsing import (compute_densepose, detect_pose, make_cloth_mask,
                          segment_human)

    manifest = load_manifest(args.root, args.split)
    ctx = _backend_ctx(args.oracle_root or args.root,
                       args.oracle_split if args.oracle_root else args.split,
                       args.toy_checkpoint)
    seg = create_backend("segmenter", args.segmenter, ctx)
    pose = create_backend("pose-detector", args.pose, ctx)
    dp = create_backend("densepose-estimator", args.densepose, ctx)
    cloth = create_backend("cloth-segmenter", args.cloth, ctx)
    base = Path(args.root) / args.split
    for person_file, cloth_file in manifest.pairs:
        sid = Path(person_file).stem
        person = load_image(base / "image" / person_file)
        cloth_img = load_image(base / "cloth" / cloth_file)
        save_parse(segment_human(person, seg),
                   base / "image-parse" / f"{sid}.png")
        save_pose(detect_pose(person, pose),
                  base / "openpose-json" / f"{sid}_keypoints.json")
        save_densepose(compute_densepose(person, dp),
                       base / "image-densepose" / f"{sid}.png")
        save_cloth_mask(make_cloth_mask(cloth_img, cloth),
                        base / "cloth-mask" / cloth_file)
    print(f"annotated {len(manifest)} samples in {args.root}/{args.split}")
    return 0


def _train_config(args):
    from .training import TrainConfig

    cfg = TrainConfig.toy(seed=args.seed, steps=args.steps) if args.toy \
        else TrainConfig(seed=args.seed, steps=args.steps)
    if args.batch_size:
        cfg.batch_size = args.batch_size
    return cfg


def _cmd_train_condgen(args) -> int:
    from .training import save_checkpoint, train_condgen, write_history

    samples = _load_split(args.data, args.split)
    result = train_condgen(_train_config(args), samples)
    save_checkpoint(result.checkpoint, args.out)
    if args.history:
        write_history(result.history, args.history)
    last = result.history[-1] if result.history else {}
    status = "aborted" if result.aborted else "done"
    print(f"{status}: {len(result.history)} steps, "
          f"final ce={last.get('ce', float('nan')):.4f} -> {args.out}")
    return 1 if result.aborted else 0


def _cmd_train_imggen(args) -> int:
    from .training import (load_checkpoint, save_checkpoint, train_imggen,
                           write_history)

    samples = _load_split(args.data, args.split)
    condgen_ckpt = load_checkpoint(args.condgen)
    result = train_imggen(_train_config(args), samples, condgen_ckpt)
    save_checkpoint(result.checkpoint, args.out)
    if args.history:
        write_history(result.history, args.history)
    last = result.history[-1] if result.history else {}
    status = "aborted" if result.aborted else "done"
    print(f"{status}: {len(result.history)} steps, "
          f"final l1={last.get('l1', float('nan')):.4f} -> {args.out}")
    return 1 if result.aborted else 0


def _cmd_train_segmenter(args) -> int:
    from .backends import toy_segmenter_checkpoint, train_toy_segmenter
    from .training import save_checkpoint

    samples = _load_split(args.data, args.split)
    net, losses = train_toy_segmenter(samples, steps=args.steps,
                                      width=args.width, seed=args.seed)
    save_checkpoint(toy_segmenter_checkpoint(net, seed=args.seed), args.out)
    print(f"done: {len(losses)} steps, final ce={losses[-1]:.4f} -> {args.out}")
    return 0


def _cmd_tryon(args) -> int:
    from .imaging import load_image, save_image
    from .metrics import timing_report
    from .pipeline import PipelineConfig, load_runtime

    runtime = load_runtime(PipelineConfig.from_file(args.config))
    result = runtime.tryon(load_image(args.person), load_image(args.cloth))
    report = timing_report(result.timings)
    if args.timing_out:
        Path(args.timing_out).write_text(json.dumps(report.as_dict(),
                                                    indent=2),
                                         encoding="utf-8")
    print(report.as_text())
    if not result.accepted:
        print(f"error: rejection: score {result.score:.4f} below threshold",
              file=sys.stderr)
        return 1
    save_image(result.image, args.out)
    print(f"accepted (score {result.score:.4f}) -> {args.out}")
    return 0


def _load_dir_images(path):
    from .imaging import load_image

    root = Path(path)
    files = sorted(p for p in root.iterdir()
                   if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if not files:
        raise FileNotFoundError(f"no images found in {path}")
    return [load_image(p) for p in files]


def _cmd_fid(args) -> int:
    from .metrics import fid_between

    value = fid_between(_load_dir_images(args.real),
                        _load_dir_images(args.fake))
    print(f"{value:.6f}")
    return 0


def _cmd_ablate(args) -> int:
    from .ablation import run_ablation_config

    report = run_ablation_config(args.config)
    report.write_csv(args.out)
    if args.json_out:
        Path(args.json_out).write_text(report.to_json(), encoding="utf-8")
    for row in report.rows:
        print(f"E{row['row']}: seg={row['segmentation']:<8} "
              f"cloth={row['cloth_mask']:<8} dense={row['densepose']:<8} "
              f"fid={row['fid']:.4f} (reference {row['reference_fid']})")
    return 0


def _cmd_bench(args) -> int:
    from .backends import create_backend
    from .metrics import (REFERENCE_SEGMENTER_BENCH, bench_segmenters,
                          write_bench_report)

    samples = _load_split(args.data, args.split)
    ctx = _backend_ctx(args.data, args.split, args.toy_checkpoint)
    backends = {name: create_backend("segmenter", name, ctx)
                for name in args.backends.split(",") if name}
    rows = bench_segmenters(backends, [s.person for s in samples],
                            [s.parse for s in samples])
    if args.out:
        write_bench_report(rows, args.out)
    print(f"{'model':<16} {'time (s)':>10} {'IoU %':>8}")
    for row in rows:
        print(f"{row['model']:<16} {row['time_seconds']:>10.4f} "
              f"{row['iou_pct']:>8.2f}")
    for ref in REFERENCE_SEGMENTER_BENCH:
        print(f"{ref['model']:<16} {ref['time_seconds']:>10.2f} "
              f"{ref['iou_pct']:>8.2f}  (published reference)")
    return 0


def _cmd_serve(args) -> int:
    from .pipeline import PipelineConfig
    from .service import serve

    serve(PipelineConfig.from_file(args.config), port=args.port,
          host=args.host)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "preprocess": _cmd_preprocess,
    "train-condgen": _cmd_train_condgen,
    "train-imggen": _cmd_train_imggen,
    "train-segmenter": _cmd_train_segmenter,
    "tryon": _cmd_tryon,
    "fid": _cmd_fid,
    "ablate": _cmd_ablate,
    "bench-backends": _cmd_bench,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    from .errors import FitroomError

    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.verb](args)
    except FitroomError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, FileNotFoundError) as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
