"""Command-line interface: ``arbsr <subcommand> ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .scale import parse_scale, parse_scale_list, parse_size

log = logging.getLogger("arbsr")

DEFAULT_SEED = 0


class UsageError(Exception):
    pass


def _scale_arg(text):
    try:
        return parse_scale(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _size_arg(text):
    try:
        return parse_size(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _scale_list_arg(text):
    try:
        scales = parse_scale_list(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not scales:
        raise argparse.ArgumentTypeError("empty scale list")
    return scales


def _int_list_arg(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def thread_limit():
    """Cap BLAS threads from ARBSR_THREADS (0 or unset = library default)."""
    raw = os.environ.get("ARBSR_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"ARBSR_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise UsageError("ARBSR_THREADS must be >= 0")
    if n == 0:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


# --- subcommands ----------------------------------------------------------------

def cmd_train(args):
    from .data import load_corpus
    from .model import ArbNet, ModelConfig
    from .trainer import TrainConfig, train

    corpus = load_corpus(args.data)
    if not corpus:
        raise RuntimeError(f"no images found in {args.data}")
    val = load_corpus(args.val) if args.val else None
    mcfg = ModelConfig(blocks=args.blocks, channels=args.channels, experts=args.experts,
                       adapt_every=args.adapt_every)
    tcfg = TrainConfig(epochs=args.epochs, iters_per_epoch=args.iters, seed=args.seed,
                       lr0=args.lr, batch=args.batch, patch=args.patch)
    model = ArbNet(mcfg, seed=args.seed)
    log_dir = Path(args.log_dir) if args.log_dir else Path(args.out).resolve().parent
    train(model, corpus, tcfg, val_images=val, checkpoint=args.out, log_dir=log_dir)
    print(f"checkpoint written to {args.out}; logs in {log_dir}")
    return 0


def cmd_sr(args):
    from .data import read_image, to_image, to_tensor, write_image
    from .model import load_checkpoint

    model = load_checkpoint(args.model)
    img = read_image(args.input)
    x = to_tensor(img, dtype=model.dtype)
    size = None
    if args.size is not None:
        w, h = args.size
        size = (h, w)
    out = model.predict(x, scale=args.scale, size=size)
    result = to_image(out[0])
    write_image(args.output, result)
    h, w = result.shape[:2]
    print(f"wrote {args.output} ({w}x{h})")
    return 0


def cmd_eval(args):
    from .data import load_corpus
    from .evalkit import bicubic_upscale, evaluate, model_upscale
    from .model import load_checkpoint

    images = load_corpus(args.data, dtype=np.float64)
    if not images:
        raise RuntimeError(f"no images found in {args.data}")
    if args.model == "bicubic":
        upscale, name = bicubic_upscale, "bicubic"
    else:
        model = load_checkpoint(args.model)
        images = [im.astype(model.dtype) for im in images]
        upscale, name = model_upscale(model), Path(args.data).name
    report = evaluate(upscale, images, args.scales, dataset=name, with_ssim=not args.no_ssim)
    if args.report:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        report.write_csv(args.report)
    for r in report.rows:
        print(f"{r.r_h:g}x{r.r_v:g}: PSNR {r.psnr:.3f} dB  SSIM {r.ssim:.4f}  (n={r.n})")
    return 0


def cmd_gradcheck(args):
    from .gradsuite import format_table, run_all

    results = run_all(args.seed)
    print(format_table(results))
    bad = [r.name for r in results if not r.ok]
    if bad:
        print("gradient check failed for: " + ", ".join(bad), file=sys.stderr)
        return 1
    return 0


def cmd_analyze(args):
    from .data import read_image, to_tensor, write_pgm
    from .evalkit import feature_similarity
    from .model import load_checkpoint

    paths = [p for p in args.models.split(",") if p]
    if len(paths) != 3:
        raise UsageError("--models needs exactly three comma-separated checkpoints")
    models = [load_checkpoint(p) for p in paths]
    image = to_tensor(read_image(args.image), dtype=np.float64)[0]
    maps = feature_similarity(models, image, scales=args.scales)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "similarity.csv", "w") as fh:
        fh.write("block,mean,min,max\n")
        for i, s in enumerate(maps):
            write_pgm(out / f"similarity_{i}.pgm",
                      np.clip(np.floor(127.5 * (s + 1.0) + 0.5), 0, 255).astype(np.uint8))
            fh.write(f"{i},{s.mean():.6f},{s.min():.6f},{s.max():.6f}\n")
            print(f"block {i}: mean S = {s.mean():.4f}")
    return 0


def cmd_dump_routing(args):
    from .data import read_image, to_tensor
    from .evalkit import dump_guidance, dump_routing
    from .model import load_checkpoint

    model = load_checkpoint(args.model)
    rows = dump_routing(model, args.out)
    print(f"wrote {len(rows)} routing rows to {args.out}")
    if args.guidance_image:
        img = to_tensor(read_image(args.guidance_image), dtype=model.dtype)
        out_dir = Path(args.guidance_dir or Path(args.out).resolve().parent)
        paths = dump_guidance(model, img, args.scale, out_dir)
        print(f"wrote {len(paths)} guidance maps to {out_dir}")
    return 0


def cmd_ablate(args):
    from .data import load_corpus
    from .evalkit import DEFAULT_SCALES, make_variants, run_ablation
    from .model import ModelConfig
    from .trainer import TrainConfig

    corpus = load_corpus(args.data)
    if not corpus:
        raise RuntimeError(f"no images found in {args.data}")
    if args.val:
        val = load_corpus(args.val)
    else:
        if len(corpus) < 2:
            raise RuntimeError("need at least two images to hold one out for validation")
        n_val = max(1, len(corpus) // 4)
        corpus, val = corpus[:-n_val], corpus[-n_val:]
    base = ModelConfig(blocks=args.blocks, channels=args.channels, adapt_every=args.adapt_every)
    variants = make_variants(args.variants.split(","), args.experts, base)
    tcfg = TrainConfig(epochs=args.epochs, iters_per_epoch=args.iters, lr0=args.lr,
                       batch=args.batch, patch=args.patch)
    result = run_ablation(corpus, val, variants, tcfg, args.scales or DEFAULT_SCALES,
                          seeds=args.seeds, out_dir=args.out)
    for (label, seed), values in result.psnr.items():
        print(f"{label} seed {seed}: mean PSNR {np.mean(values):.3f} dB")
    return 0


# --- parser ---------------------------------------------------------------------

def _add_model_flags(p):
    p.add_argument("--blocks", type=int, default=8)
    p.add_argument("--channels", type=int, default=32)
    p.add_argument("--adapt-every", type=int, default=2)


def _add_train_flags(p, epochs=20, iters=200):
    p.add_argument("--epochs", type=int, default=epochs)
    p.add_argument("--iters", type=int, default=iters, help="iterations per epoch")
    p.add_argument("--lr", type=float, default=1e-4, help="initial learning rate")
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--patch", type=int, default=50, help="LR patch size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arbsr", description="Scale-arbitrary super-resolution.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a directory of HR images")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--val", help="directory of held-out HR images for per-epoch validation")
    p.add_argument("--log-dir", help="where train_log.csv / val_log.csv go (default: next to --out)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--experts", type=int, default=4)
    _add_model_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sr", help="super-resolve one image")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--scale", type=_scale_arg, help="R or RHxRV, e.g. 2.2x4.2")
    g.add_argument("--size", type=_size_arg, help="target WxH, e.g. 220x420")
    p.set_defaults(func=cmd_sr)

    p = sub.add_parser("eval", help="PSNR/SSIM over a directory of HR images")
    p.add_argument("--model", required=True, help="checkpoint path, or 'bicubic' for the baseline")
    p.add_argument("--data", required=True)
    p.add_argument("--scales", type=_scale_list_arg, default=parse_scale_list("2,3,4"))
    p.add_argument("--report", help="CSV output path")
    p.add_argument("--no-ssim", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of every differentiable op")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("analyze", help="cross-scale feature similarity of three models")
    p.add_argument("--models", required=True, help="three checkpoints, comma separated")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scales", type=_scale_list_arg, default=parse_scale_list("2,3,4"))
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("dump-routing", help="routing weights over the 30x30 scale grid")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--guidance-image", help="also dump guidance maps for this image")
    p.add_argument("--guidance-dir")
    p.add_argument("--scale", type=_scale_arg, default=parse_scale("2"))
    p.set_defaults(func=cmd_dump_routing)

    p = sub.add_parser("ablate", help="train and compare network variants")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--val")
    p.add_argument("--variants", default="model1,model2,model3,model4")
    p.add_argument("--experts", type=_int_list_arg, default=[4])
    p.add_argument("--seeds", type=_int_list_arg, default=[DEFAULT_SEED])
    p.add_argument("--scales", type=_scale_list_arg)
    _add_model_flags(p)
    _add_train_flags(p, epochs=5)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with thread_limit():
            return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"arbsr: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"arbsr {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
