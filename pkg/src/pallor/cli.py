"""Command-line entry point.

Machine-readable results go to stdout (JSON or the metrics table); progress
and diagnostics go to stderr. Exit codes: 0 success, 1 domain error
(bad input data, failed segmentation, ...), 2 usage error.

All randomness flows from explicit ``--seed`` flags; a missing seed means
seed 0, never the wall clock.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys

import numpy as np

from .calibration import apply_gains, compute_gains
from .errors import PallorError
from .imaging import Roi, load_image, load_mask_pbm
from .nn import TrainingConfig, gradient_check, init_network, load_weights, save_weights
from .pipeline import predict_response_dict, run_predict
from .rng import SplitMix64
from .screening import (
    evaluate,
    load_regressor,
    metrics_to_dict,
    read_manifest,
    render_report,
    save_regressor,
    train_regressor,
)
from .segmentation import (
    classical_segment,
    cnn_segment,
    default_segmenter_spec,
    iou,
    to_mask,
    train_segmenter,
)
from .synthdata import SynthConfig, generate_dataset

__all__ = ["main", "build_parser"]


def _eprint(*args) -> None:
    print(*args, file=sys.stderr)


def _cutoff_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad cutoff list {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("cutoff list is empty")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pallor",
        description="Conjunctival pallor screening pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--noise", type=float, default=2.0)
    p.add_argument("--hb-min", type=float, default=7.0)
    p.add_argument("--hb-max", type=float, default=14.0)
    p.add_argument("--gain-min", type=float, default=0.5)
    p.add_argument("--gain-max", type=float, default=2.0)
    p.add_argument("--size", type=int, default=256, help="square image side in pixels")

    p = sub.add_parser("train-seg", help="train the conjunctiva segmenter")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--lr", type=float, default=1.0)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--train-size", type=int, default=128)
    p.add_argument("--base-ch", type=int, default=8)

    p = sub.add_parser("train-reg", help="train the hemoglobin regressor")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--lr", type=float, default=0.02)
    p.add_argument("--batch", type=int, default=32)

    p = sub.add_parser("predict", help="predict hemoglobin for one image")
    p.add_argument("--image", required=True)
    p.add_argument("--card", type=Roi.parse, required=True, metavar="x,y,w,h")
    p.add_argument("--conjunctiva", type=Roi.parse, default=None, metavar="x,y,w,h")
    p.add_argument("--seg", choices=("classical", "cnn"), default="cnn")
    p.add_argument("--weights", required=True, help="regressor weights file")
    p.add_argument("--seg-weights", default=None, help="segmenter weights file")
    p.add_argument("--cutoffs", type=_cutoff_list, default=(9.0, 10.0, 11.0))

    p = sub.add_parser("evaluate", help="run the cut-off sweep over a manifest")
    p.add_argument("--data", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--seg", choices=("classical", "cnn"), default="classical")
    p.add_argument("--seg-weights", default=None)
    p.add_argument("--cutoffs", type=_cutoff_list, default=(9.0, 10.0, 11.0))
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("gradcheck", help="verify backpropagation against finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-4)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--config", required=True)

    return parser


def _load_segmenter(path):
    net, _std, model_id = load_weights(path)
    from .segmentation import _check_segmenter_net

    _check_segmenter_net(net)
    return net, model_id


def _manifest_features(rows, segmenter="classical", segmenter_net=None):
    """Calibrate + segment + measure every manifest row."""
    from .features import extract_features

    out = []
    for i, row in enumerate(rows):
        image = load_image(row.image_path)
        gains = compute_gains(image, row.card_roi)
        calibrated = apply_gains(image, gains)
        if segmenter == "classical":
            soft = classical_segment(calibrated)
        else:
            soft = cnn_segment(calibrated, segmenter_net)
        mask, _ = to_mask(soft)
        out.append((extract_features(calibrated, mask), row.gold_hb))
        if (i + 1) % 50 == 0:
            _eprint(f"features: {i + 1}/{len(rows)}")
    return out


def _cmd_synth(args) -> int:
    config = SynthConfig(
        n_samples=args.n,
        hb_range=(args.hb_min, args.hb_max),
        noise_sigma=args.noise,
        gain_range=(args.gain_min, args.gain_max),
        image_size=(args.size, args.size),
        seed=args.seed,
    )
    manifest = generate_dataset(config, args.out)
    _eprint(f"wrote {args.n} samples under {args.out}")
    print(json.dumps({"manifest": manifest, "n_samples": args.n}, indent=2))
    return 0


def _cmd_train_seg(args) -> int:
    rows = read_manifest(f"{args.data}/manifest.csv")
    samples = []
    for row in rows:
        if row.mask_path is None:
            raise PallorError("train-seg needs mask_path columns in the manifest")
        image = load_image(row.image_path)
        calibrated = apply_gains(image, compute_gains(image, row.card_roi))
        samples.append((calibrated, load_mask_pbm(row.mask_path)))
    order = SplitMix64(args.seed).permutation(len(samples))
    split = max(1, int(round(len(samples) * 0.8)))
    if split >= len(samples):
        split = len(samples) - 1
    train_set = [samples[i] for i in order[:split]]
    holdout = [samples[i] for i in order[split:]]
    _eprint(f"training on {len(train_set)} samples, holding out {len(holdout)}")

    spec = default_segmenter_spec(size=args.train_size, base_ch=args.base_ch, seed=args.seed)
    config = TrainingConfig(
        learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch, seed=args.seed
    )
    net, losses = train_segmenter(
        train_set,
        config,
        spec=spec,
        on_epoch=lambda e, loss: _eprint(f"epoch {e + 1}/{args.epochs} loss {loss:.6f}"),
    )

    ious = []
    for image, gt in holdout:
        mask, _ = to_mask(cnn_segment(image, net))
        ious.append(iou(mask, gt))
    median_iou = statistics.median(ious) if ious else None
    _eprint(f"held-out median IoU: {median_iou}")

    model_id = save_weights(net, args.out)
    print(
        json.dumps(
            {
                "epoch_loss": losses,
                "holdout_median_iou": median_iou,
                "weights": args.out,
                "model_id": model_id,
            },
            indent=2,
        )
    )
    return 0


def _cmd_train_reg(args) -> int:
    rows = read_manifest(f"{args.data}/manifest.csv")
    dataset = _manifest_features(rows)
    config = TrainingConfig(
        learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch, seed=args.seed
    )
    model, history = train_regressor(dataset, config)
    model = save_regressor(model, args.out)
    _eprint(f"validation MAE: {history['val_mae']:.4f} g/dL")
    print(
        json.dumps(
            {
                "val_mae": history["val_mae"],
                "val_mse": history["val_mse"],
                "n_train": history["n_train"],
                "n_val": history["n_val"],
                "weights": args.out,
                "model_id": model.model_id,
            },
            indent=2,
        )
    )
    return 0


def _cmd_predict(args) -> int:
    regressor = load_regressor(args.weights)
    segmenter_net = None
    if args.seg == "cnn":
        if args.seg_weights is None:
            raise PallorError("--seg cnn needs --seg-weights")
        segmenter_net, _ = _load_segmenter(args.seg_weights)
    image = load_image(args.image)
    outcome = run_predict(
        image,
        args.card,
        regressor=regressor,
        segmenter=args.seg,
        segmenter_net=segmenter_net,
        conjunctiva_roi=args.conjunctiva,
        cutoffs=args.cutoffs,
    )
    print(json.dumps(predict_response_dict(outcome), indent=2))
    return 0


def _cmd_evaluate(args) -> int:
    regressor = load_regressor(args.weights)
    segmenter_net = None
    if args.seg == "cnn":
        if args.seg_weights is None:
            raise PallorError("--seg cnn needs --seg-weights")
        segmenter_net, _ = _load_segmenter(args.seg_weights)
    rows = read_manifest(f"{args.data}/manifest.csv")
    pairs = []
    for row in rows:
        image = load_image(row.image_path)
        outcome = run_predict(
            image,
            row.card_roi,
            regressor=regressor,
            segmenter=args.seg,
            segmenter_net=segmenter_net,
            cutoffs=args.cutoffs,
        )
        pairs.append((outcome.prediction.hb, row.gold_hb))
    metrics = {c: evaluate(pairs, c) for c in args.cutoffs}
    if args.format == "json":
        print(json.dumps(metrics_to_dict(metrics), indent=2))
    else:
        print(render_report(metrics), end="")
    return 0


def _gradcheck_cases(seed: int):
    """Small networks covering every layer kind and activation."""
    from .nn import Conv2d, Dense, Flatten, Linear, Relu, Sigmoid, Upsample2x

    return [
        ("dense-relu", (4,), (Dense(4, 5), Relu(), Dense(5, 2), Linear()), seed),
        ("dense-sigmoid", (3,), (Dense(3, 4), Sigmoid(), Dense(4, 1)), seed + 1),
        (
            "conv-relu",
            (2, 6, 6),
            (Conv2d(2, 3, 3, stride=1, padding=1), Relu(),
             Conv2d(3, 2, 3, stride=2, padding=1), Relu(), Flatten(), Dense(18, 3)),
            seed + 2,
        ),
        (
            "conv-sigmoid-upsample",
            (1, 4, 4),
            (Conv2d(1, 2, 3, stride=2, padding=1), Sigmoid(), Upsample2x(),
             Conv2d(2, 1, 1), Sigmoid()),
            seed + 3,
        ),
    ]


def _cmd_gradcheck(args) -> int:
    from .nn import NetworkSpec

    results = {}
    worst = 0.0
    rng = SplitMix64(args.seed ^ 0x5EED)
    for name, ishape, layers, seed in _gradcheck_cases(args.seed):
        spec = NetworkSpec(input_shape=ishape, layers=layers, seed=seed)
        net = init_network(spec)
        n_in = int(np.prod(ishape))
        x = np.array(rng.uniform_array(n_in, 0.2, 1.0)).reshape(ishape)
        out_shape = spec.output_shape
        t = np.array(rng.uniform_array(int(np.prod(out_shape)), 0.0, 1.0)).reshape(out_shape)
        err = gradient_check(net, x, t, step=args.step)
        results[name] = err
        worst = max(worst, err)
    print(json.dumps({"max_relative_error": worst, "cases": results}, indent=2))
    return 0 if worst < 1e-5 else 1


def _cmd_serve(args) -> int:
    from .service import ServiceConfig, run_service

    run_service(ServiceConfig.from_file(args.config))
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "train-seg": _cmd_train_seg,
    "train-reg": _cmd_train_reg,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "gradcheck": _cmd_gradcheck,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except PallorError as exc:
        _eprint(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
