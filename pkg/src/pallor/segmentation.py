"""Locating the palpebral conjunctiva.

Two segmenters produce the same kind of output, a 3-channel "soft" image
that is bright on conjunctiva and dark elsewhere:

* ``classical_segment`` - a parameter-free color rule used as the trainable
  model's independent oracle. A pixel is kept when it is either red-dominant
  (red chromaticity ``R/(R+G+B) >= r_min``) or shows the green dip typical of
  blood-tinted mucosa (``B - G >= green_dip``; hemoglobin absorbs green more
  strongly than blue, while skin and neutral surfaces have G >= B), and its
  luminance sits inside a plausibility window. Only the largest 4-connected
  region survives.
* ``cnn_segment`` - a trainable encoder-decoder network whose target is the
  input image with non-conjunctiva pixels zeroed.

Either soft output is reduced to a binary mask through a 128-bin luminance
histogram: the threshold bin maximises the between-class variance (computed
in exact integer arithmetic so ties resolve deterministically to the lowest
bin), and pixels strictly above the bin's upper edge are foreground.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NetworkCompositionError
from .imaging import BinaryMask, RgbImage, resize_bilinear, upsample_nearest
from .nn import (
    Conv2d,
    Linear,
    Network,
    NetworkSpec,
    Relu,
    TrainingConfig,
    Upsample2x,
    forward,
    train,
)

__all__ = [
    "ClassicalParams",
    "SegmenterOutput",
    "MaskHistogram",
    "classical_segment",
    "cnn_segment",
    "to_mask",
    "iou",
    "largest_component",
    "luminance",
    "default_segmenter_spec",
    "build_segmenter_tensors",
    "train_segmenter",
    "HIST_BINS",
    "BIN_WIDTH",
]

HIST_BINS = 128
BIN_WIDTH = 2.0  # brightness units per bin over [0, 255]


@dataclass(frozen=True)
class ClassicalParams:
    """Keep rule: (redness OR green dip) AND luminance window."""

    r_min: float = 0.45
    green_dip: float = 4.0
    v_min: float = 40.0
    v_max: float = 250.0


@dataclass(frozen=True)
class SegmenterOutput:
    soft: RgbImage
    source: str  # "cnn" | "classical"


@dataclass(frozen=True)
class MaskHistogram:
    bins: np.ndarray  # 128 integer counts over luminance [0, 255]
    threshold_bin: int
    threshold_value: float

    def __post_init__(self):
        bins = np.ascontiguousarray(self.bins, dtype=np.int64)
        if bins.shape != (HIST_BINS,):
            raise ValueError(f"expected {HIST_BINS} bins, got {bins.shape}")
        bins.setflags(write=False)
        object.__setattr__(self, "bins", bins)


def luminance(image: RgbImage) -> np.ndarray:
    return image.planes.mean(axis=0)


def largest_component(keep: np.ndarray) -> np.ndarray:
    """Largest 4-connected True region, via run-based union-find.

    Rows are decomposed into runs of consecutive True pixels; runs in
    adjacent rows merge when their column spans overlap. Work is O(runs),
    not O(pixels). Size ties resolve to the earliest run in scan order.
    """
    keep = np.asarray(keep, dtype=bool)
    h, w = keep.shape
    parent: list[int] = []
    size: list[int] = []

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra == rb:
            return
        if ra > rb:  # keep the earliest run as root so ties are stable
            ra, rb = rb, ra
        parent[rb] = ra
        size[ra] += size[rb]

    rows: list[list[tuple[int, int, int]]] = []  # (start, end, run_id) per row
    pad = np.zeros(1, dtype=np.int8)
    for y in range(h):
        row = keep[y].astype(np.int8)
        edges = np.diff(np.concatenate((pad, row, pad)))
        starts = np.flatnonzero(edges == 1)
        ends = np.flatnonzero(edges == -1)
        runs = []
        for s, e in zip(starts, ends):
            rid = len(parent)
            parent.append(rid)
            size.append(int(e - s))
            runs.append((int(s), int(e), rid))
        if y > 0 and runs and rows[y - 1]:
            prev = rows[y - 1]
            pi = 0
            for s, e, rid in runs:
                while pi < len(prev) and prev[pi][1] <= s:
                    pi += 1
                qi = pi
                while qi < len(prev) and prev[qi][0] < e:
                    union(rid, prev[qi][2])
                    qi += 1
                if qi > pi:
                    pi = qi - 1  # last overlapping prev run may reach the next run too
        rows.append(runs)

    if not parent:
        return np.zeros_like(keep)
    roots = [find(i) for i in range(len(parent))]
    best = max(set(roots), key=lambda r: (size[r], -r))
    out = np.zeros_like(keep)
    for y, runs in enumerate(rows):
        for s, e, rid in runs:
            if roots[rid] == best:
                out[y, s:e] = True
    return out


def classical_segment(
    image: RgbImage, params: ClassicalParams = ClassicalParams()
) -> SegmenterOutput:
    """Color-rule segmenter for calibrated images.

    Output keeps the surviving pixels' values (clamped into [0, 255] to meet
    the soft-output range contract) and zeroes everything else. May return an
    all-zero output. Idempotent for images already inside display range.
    """
    r, g, b = image.planes
    total = r + g + b
    lum = total / 3.0
    safe_total = np.where(total > 1e-12, total, 1.0)
    red_chroma = np.where(total > 1e-12, r / safe_total, 0.0)
    colorful = (red_chroma >= params.r_min) | ((b - g) >= params.green_dip)
    keep = colorful & (lum >= params.v_min) & (lum <= params.v_max)
    keep = largest_component(keep)
    soft = np.clip(image.planes, 0.0, 255.0) * keep[None, :, :]
    return SegmenterOutput(soft=RgbImage(soft), source="classical")


def otsu_threshold_bin(bins: np.ndarray) -> int:
    """Bin index maximising between-class variance, ties to the lowest bin.

    Comparisons are exact: with integer counts and bin indices as values,
    the variance is the rational (S0*w1 - S1*w0)^2 / (w0*w1); candidates are
    ranked by cross-multiplied Python integers, so no float rounding can
    flip a near-tie.
    """
    counts = [int(c) for c in bins]
    total = sum(counts)
    total_s = sum(i * c for i, c in enumerate(counts))
    best_t, best_a2, best_b = 0, -1, 1
    w0 = 0
    s0 = 0
    for t in range(len(counts)):
        w0 += counts[t]
        s0 += t * counts[t]
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            a2, bdenom = 0, 1
        else:
            a = s0 * w1 - (total_s - s0) * w0
            a2, bdenom = a * a, w0 * w1
        if a2 * best_b > best_a2 * bdenom:
            best_t, best_a2, best_b = t, a2, bdenom
    return best_t


def to_mask(soft: SegmenterOutput) -> tuple[BinaryMask, MaskHistogram]:
    """Reduce a soft segmentation to a binary mask via the 128-bin histogram.

    Foreground is luminance strictly above the chosen bin's upper edge.
    Degenerate histograms (all mass in one bin) fall back to ``L > 0``.
    """
    lum = luminance(soft.soft)
    idx = np.clip((lum / BIN_WIDTH).astype(np.int64), 0, HIST_BINS - 1)
    bins = np.bincount(idx.ravel(), minlength=HIST_BINS)
    occupied = int(np.count_nonzero(bins))
    if occupied <= 1:
        threshold_bin = int(np.flatnonzero(bins)[0]) if occupied else 0
        hist = MaskHistogram(
            bins=bins,
            threshold_bin=threshold_bin,
            threshold_value=(threshold_bin + 1) * BIN_WIDTH,
        )
        return BinaryMask(lum > 0.0), hist
    t = otsu_threshold_bin(bins)
    threshold_value = (t + 1) * BIN_WIDTH
    hist = MaskHistogram(bins=bins, threshold_bin=t, threshold_value=threshold_value)
    return BinaryMask(lum > threshold_value), hist


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union; two empty masks count as a perfect match."""
    a.check_matches(b)
    inter = int(np.count_nonzero(a.bits & b.bits))
    union = int(np.count_nonzero(a.bits | b.bits))
    if union == 0:
        return 1.0
    return inter / union


# ---------------------------------------------------------------------------
# Trainable segmenter
# ---------------------------------------------------------------------------


def default_segmenter_spec(size: int = 128, base_ch: int = 8, seed: int = 0) -> NetworkSpec:
    """Seven learnable layers: three stride-2 encoders, a bottleneck, and
    three upsample+conv decoders.

    The head is linear: with a mostly-empty target, a sigmoid head saturates
    toward all-background under plain SGD and stops learning, so the range
    contract is enforced by clamping at inference instead.
    """
    c1, c2, c3 = base_ch, base_ch * 2, base_ch * 4
    return NetworkSpec(
        input_shape=(3, size, size),
        layers=(
            Conv2d(3, c1, 3, stride=2, padding=1), Relu(),
            Conv2d(c1, c2, 3, stride=2, padding=1), Relu(),
            Conv2d(c2, c3, 3, stride=2, padding=1), Relu(),
            Conv2d(c3, c3, 3, stride=1, padding=1), Relu(),
            Upsample2x(), Conv2d(c3, c2, 3, stride=1, padding=1), Relu(),
            Upsample2x(), Conv2d(c2, c1, 3, stride=1, padding=1), Relu(),
            Upsample2x(), Conv2d(c1, 3, 3, stride=1, padding=1), Linear(),
        ),
        seed=seed,
    )


def _check_segmenter_net(net: Network) -> tuple[int, int]:
    shape = net.spec.input_shape
    if len(shape) != 3 or shape[0] != 3:
        raise NetworkCompositionError(
            f"segmenter network must take (3, h, w) input, has {shape}"
        )
    if net.spec.output_shape != shape:
        raise NetworkCompositionError(
            f"segmenter output {net.spec.output_shape} must match its input {shape}"
        )
    return shape[1], shape[2]


# The network consumes brightness scaled to [-0.5, 0.5]; centred inputs are
# markedly better conditioned for plain SGD than all-positive ones.
INPUT_SCALE = 255.0
INPUT_SHIFT = 0.5


def cnn_segment(image: RgbImage, net: Network) -> SegmenterOutput:
    """Forward the image through the segmenter at its native resolution.

    The image is bilinearly resized to the network's input size and centred;
    the output is clamped to [0, 1], scaled back to [0, 255], and
    nearest-neighbour upsampled to the original dimensions.
    """
    nh, nw = _check_segmenter_net(net)
    small = resize_bilinear(image, nw, nh)
    x = small.planes / INPUT_SCALE - INPUT_SHIFT
    y = forward(net, x)
    y = np.clip(y, 0.0, 1.0) * 255.0
    full = upsample_nearest(y, image.width, image.height)
    return SegmenterOutput(soft=RgbImage(full), source="cnn")


def build_segmenter_tensors(
    samples, size: int
) -> tuple[np.ndarray, np.ndarray]:
    """(inputs, targets) tensors from (calibrated image, truth mask) pairs.

    The target is the input with non-conjunctiva pixels zeroed, resized to
    the training resolution; both tensors are scaled to [0, 1].
    """
    xs = np.empty((len(samples), 3, size, size), dtype=np.float64)
    ts = np.empty_like(xs)
    for i, (image, mask) in enumerate(samples):
        mask.check_matches(image)
        xs[i] = resize_bilinear(image, size, size).planes / INPUT_SCALE - INPUT_SHIFT
        masked = RgbImage(image.planes * mask.bits[None, :, :])
        ts[i] = resize_bilinear(masked, size, size).planes / INPUT_SCALE
    return xs, ts


def train_segmenter(
    samples,
    config: TrainingConfig,
    spec: NetworkSpec | None = None,
    net: Network | None = None,
    on_epoch=None,
) -> tuple[Network, list[float]]:
    """Train the encoder-decoder on (calibrated image, truth mask) pairs."""
    from .nn import init_network

    if net is None:
        net = init_network(spec if spec is not None else default_segmenter_spec(seed=config.seed))
    size = _check_segmenter_net(net)[0]
    xs, ts = build_segmenter_tensors(samples, size)
    return train(net, xs, ts, config, on_epoch=on_epoch)
